"""
Seeded instance generators

Random l1 instances have standard normal ``A`` and ``b``. Binary compressed
sensing instances follow the {0,1} model::

    min ||A x - y||_1 + lam * sum(x)   over x in {0,1}^N

with ``A_ij ~ N(mu/N, 1/N)``, a Bernoulli(rho) ground truth ``x0`` and
noiseless measurements ``y = A x0``.
"""

from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from ..model import ProblemInstance
from ..prox import SeparableLoss
from ..utils import FloatMatrix, FloatVector, SeedLike, make_rng


__all__ = [
    "gen_random_l1",
    "BcsSpec",
    "ZeroOneModel",
    "gen_bcs",
]


def gen_random_l1(rows: int, cols: int, seed: SeedLike) -> ProblemInstance:
    """``rows x cols`` standard normal ``A``, standard normal ``b``, l1 loss

    ``cols`` is the number of binary variables.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"Need rows, cols >= 1, got {rows}, {cols}")
    rng = make_rng(seed)
    A = rng.standard_normal((rows, cols))
    b = rng.standard_normal(rows)
    return ProblemInstance(
        A=A,
        b=b,
        loss=SeparableLoss.l1(rows),
        label=f"random-{rows}x{cols}-seed{seed}",
    )


class BcsSpec(BaseModel):
    N: int = Field(ge=1)
    alpha: float = Field(gt=0.0, le=1.0)
    # sparsity rate, Pr(x0_i = 1)
    rho: float = Field(ge=0.0, lt=1.0)
    mu: float = Field(0.0, ge=0.0)
    lam: float = Field(0.1, gt=0.0, alias="lambda")
    seed: int = Field(0, ge=0)

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @computed_field  # type: ignore
    @property
    def M(self) -> int:
        return max(1, int(round(self.alpha * self.N)))

    @property
    def label(self) -> str:
        return (
            f"bcs-N{self.N}-alpha{self.alpha:g}-rho{self.rho:g}-mu{self.mu:g}-seed{self.seed}"
        )


class ZeroOneModel(BaseModel):
    "``min ||A x - y||_1 + lam * sum(x)`` over ``x`` in ``{0,1}^N``"
    A: FloatMatrix
    y: FloatVector
    lam: float = Field(ge=0.0)
    label: Optional[str] = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _shapes_agree(self):
        if self.y.shape[0] != self.A.shape[0]:
            raise ValueError(f"y has length {self.y.shape[0]}, A has {self.A.shape[0]} rows")
        return self

    @property
    def N(self) -> int:
        return int(self.A.shape[1])

    @property
    def M(self) -> int:
        return int(self.A.shape[0])

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sum(np.abs(self.A @ x - self.y)) + self.lam * np.sum(x))


def gen_bcs(spec: BcsSpec) -> Tuple[ZeroOneModel, np.ndarray]:
    rng = make_rng(spec.seed)
    N, M = spec.N, spec.M
    A = rng.normal(loc=spec.mu / N, scale=1.0 / np.sqrt(N), size=(M, N))
    x0 = (rng.random(N) < spec.rho).astype(float)
    y = A @ x0
    model = ZeroOneModel(A=A, y=y, lam=spec.lam, label=spec.label)
    return model, x0
