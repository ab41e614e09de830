"""
Problem data and the factorized, smoothed, penalized objective

The binary problem is ``min f(Az - b)`` over sign vectors ``z``. It is lifted
to ``X = V^T V`` with ``V`` an ``m x p`` matrix of unit columns, ``p = n + 1``,
column 0 being the homogenization coordinate. ``X`` itself is never formed:
the lifted residual only needs ``u = V[:, 1:]^T V[:, 0]``, which equals ``z``
at a rank-one point.

Smoothed objective for penalty ``rho`` and Moreau parameter ``delta``::

    Phi(V) = env_{delta f}(A u - b) + offset + rho * (||V||_F^2 - sigma_1(V)^2)
"""

import json
import logging
import math
from pathlib import Path
from typing import List, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import DimensionError, FeasibilityError, ParameterError, SpectralConvergenceError
from .prox import LossBlock, SeparableLoss, envelope_and_gradient, lipschitz_modulus, loss_value
from .utils import (
    SCHEMA_VERSION,
    FloatMatrix,
    FloatVector,
    as_float_array,
    check_schema_version,
    log_read_failure,
)


__all__ = [
    "ProblemInstance",
    "FactorizedPoint",
    "SmoothedObjective",
    "SpectralSubgradient",
    "lifted_residual",
    "smoothed_loss",
    "smoothed_loss_and_gradient",
    "smoothed_value",
    "smoothed_gradient",
    "spectral_subgradient",
    "penalty_gap",
    "numerical_rank",
    "operator_norm_estimate",
    "estimate_lipschitz_fhat",
    "true_objective",
    "default_delta",
    "exact_penalty_threshold",
    "instance_to_json",
    "instance_from_json",
    "load_instance",
    "write_instance",
]


LOG = logging.getLogger(__name__)

POWER_TOLERANCE = 1e-10
POWER_MAX_SWEEPS = 500
EIGENVALUE_TIE = 1e-12
RANK_CUTOFF = 1e-8


class ProblemInstance(BaseModel):
    """
    ``min f(A z - b) + offset`` over ``z`` in ``{-1, 1}^n``

    ``offset`` is a constant carried along so that transformed instances
    report the same objective values as the model they came from.
    """
    A: FloatMatrix
    b: FloatVector
    loss: SeparableLoss
    offset: float = 0.0
    label: Optional[str] = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _shapes_agree(self):
        rows = self.A.shape[0]
        if self.b.shape[0] != rows:
            raise ValueError(f"b has length {self.b.shape[0]}, A has {rows} rows")
        if self.loss.total_rows != rows:
            raise ValueError(f"loss covers {self.loss.total_rows} rows, A has {rows} rows")
        if self.A.shape[1] < 1:
            raise ValueError("A needs at least one column")
        return self

    @property
    def n(self) -> int:
        return int(self.A.shape[1])

    @property
    def r(self) -> int:
        return int(self.A.shape[0])

    @property
    def p(self) -> int:
        return self.n + 1


class FactorizedPoint:
    """
    An ``m x p`` matrix with unit-norm columns, ``2 <= m <= p``

    The matrix is copied and made read-only.
    """
    COLUMN_NORM_TOLERANCE = 1e-10

    __slots__ = ("V",)

    def __init__(self, V):
        V = as_float_array(V, 2, "V")
        m, p = V.shape
        if not 2 <= m <= p:
            raise FeasibilityError(f"Need 2 <= m <= p, got m={m}, p={p}")
        norms = np.linalg.norm(V, axis=0)
        worst = int(np.argmax(np.abs(norms - 1.0)))
        if abs(norms[worst] - 1.0) > self.COLUMN_NORM_TOLERANCE:
            raise FeasibilityError(f"Column {worst} has norm {norms[worst]!r}, expected 1")
        self.V = V

    def __repr__(self):
        return f"<FactorizedPoint m={self.m} p={self.p}>"

    @property
    def m(self) -> int:
        return int(self.V.shape[0])

    @property
    def p(self) -> int:
        return int(self.V.shape[1])

    @property
    def n(self) -> int:
        return self.p - 1


PointOrMatrix = Union[FactorizedPoint, np.ndarray]


def _matrix(P: PointOrMatrix) -> np.ndarray:
    if isinstance(P, FactorizedPoint):
        return P.V
    return np.asarray(P, dtype=float)


class SmoothedObjective(BaseModel):
    """
    The penalized objective at one outer iteration

    ``rho`` may be 0, which switches the penalty off.
    """
    instance: ProblemInstance
    delta: float = Field(gt=0)
    rho: float = Field(ge=0)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class SpectralSubgradient(NamedTuple):
    gamma: np.ndarray
    direction: np.ndarray
    sigma: float


def lifted_residual(inst: ProblemInstance, P: PointOrMatrix) -> np.ndarray:
    V = _matrix(P)
    if V.ndim != 2 or V.shape[1] != inst.p:
        raise DimensionError(f"V has shape {V.shape}, instance needs {inst.p} columns")
    u = V[:, 1:].T @ V[:, 0]
    return inst.A @ u - inst.b


def smoothed_loss(obj: SmoothedObjective, P: PointOrMatrix) -> float:
    "The smoothed data term alone, offset included"
    value, _ = smoothed_loss_and_gradient(obj, P)
    return value


def smoothed_loss_and_gradient(obj: SmoothedObjective, P: PointOrMatrix):
    """Smoothed data term and its gradient with respect to V

    With ``g`` the envelope gradient at the lifted residual and ``w = A^T g``,
    column 0 of the gradient is ``V[:, 1:] @ w`` and column ``j >= 1`` is
    ``w_j * V[:, 0]``.
    """
    inst = obj.instance
    V = _matrix(P)
    residual = lifted_residual(inst, V)
    value, g = envelope_and_gradient(inst.loss, residual, obj.delta)
    w = inst.A.T @ g
    gradient = np.empty_like(V)
    gradient[:, 0] = V[:, 1:] @ w
    gradient[:, 1:] = np.outer(V[:, 0], w)
    return value + inst.offset, gradient


def smoothed_gradient(obj: SmoothedObjective, P: PointOrMatrix) -> np.ndarray:
    "Gradient of the smoothed data term, the penalty is left to the solver"
    _, gradient = smoothed_loss_and_gradient(obj, P)
    return gradient


def penalty_gap(P: PointOrMatrix, sigma: Optional[float] = None) -> float:
    """``||V||_F^2 - sigma_1(V)^2``, zero exactly at rank one

    Pass ``sigma`` when the leading singular value is already known.
    """
    V = _matrix(P)
    if sigma is None:
        sigma = spectral_subgradient(V).sigma
    return max(float(np.sum(V * V)) - sigma * sigma, 0.0)


def smoothed_value(obj: SmoothedObjective, P: PointOrMatrix) -> float:
    value = smoothed_loss(obj, P)
    if obj.rho == 0:
        return value
    return value + obj.rho * penalty_gap(P)


def _canonical_sign(direction: np.ndarray) -> float:
    # coordinate 0 nonnegative, first nonzero coordinate positive if it is 0
    nonzero = np.flatnonzero(direction)
    if nonzero.size == 0:
        return 1.0
    if direction[0] != 0:
        return 1.0 if direction[0] > 0 else -1.0
    return 1.0 if direction[nonzero[0]] > 0 else -1.0


def _leading_eigenpair(gram: np.ndarray, start: np.ndarray, fallback: bool):
    size = gram.shape[0]
    q = np.array(start, dtype=float)
    if q.shape != (size,) or not np.linalg.norm(q) > 0:
        q = np.ones(size)
    q = q / np.linalg.norm(q)
    for _ in range(POWER_MAX_SWEEPS):
        gq = gram @ q
        eigenvalue = float(q @ gq)
        if np.linalg.norm(gq - eigenvalue * q) <= POWER_TOLERANCE * eigenvalue:
            return eigenvalue, q
        q = gq / np.linalg.norm(gq)

    if not fallback:
        raise SpectralConvergenceError(
            f"Power iteration did not converge in {POWER_MAX_SWEEPS} sweeps"
        )
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    if size > 1 and eigenvalues[-1] - eigenvalues[-2] <= EIGENVALUE_TIE * abs(eigenvalues[-1]):
        LOG.warning(
            "Leading eigenvalue %g is degenerate, picked one direction of its eigenspace",
            eigenvalues[-1],
        )
    else:
        LOG.debug("Power iteration slow, used a dense eigen-solve of the %dx%d Gram matrix",
                  size, size)
    return float(eigenvalues[-1]), eigenvectors[:, -1]


def spectral_subgradient(
    P: PointOrMatrix,
    start: Optional[np.ndarray] = None,
    fallback: bool = True,
) -> SpectralSubgradient:
    """Subgradient ``-2 V P1 P1^T`` of ``-||V^T V||`` with its ingredients

    ``P1`` is the leading right singular vector of ``V`` and ``sigma`` the
    largest singular value. The work happens on the ``m x m`` Gram matrix
    ``V V^T``; ``start`` warm-starts the power iteration with a left vector.
    ``P1`` is signed so that coordinate 0 is nonnegative.
    """
    V = _matrix(P)
    if V.ndim != 2:
        raise DimensionError(f"V must be a matrix, got shape {V.shape}")
    if start is None:
        start = V.sum(axis=1)
    eigenvalue, left = _leading_eigenpair(V @ V.T, start, fallback)
    sigma = math.sqrt(max(eigenvalue, 0.0))
    if sigma == 0.0:
        raise FeasibilityError("V is the zero matrix")
    direction = V.T @ left / sigma
    direction = direction / np.linalg.norm(direction)
    direction = direction * _canonical_sign(direction)
    gamma = -2.0 * np.outer(V @ direction, direction)
    return SpectralSubgradient(gamma, direction, sigma)


def true_objective(inst: ProblemInstance, z) -> float:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.shape[0] != inst.n:
        raise DimensionError(f"z has shape {z.shape}, instance needs length {inst.n}")
    if not np.all(np.abs(z) == 1.0):
        raise ParameterError("z must only hold -1 and 1")
    return loss_value(inst.loss, inst.A @ z - inst.b) + inst.offset


def default_delta(inst: Union[ProblemInstance, np.ndarray]) -> float:
    "Smoothing parameter from the scale of ``b`` (or of any array of shifts)"
    b = inst.b if isinstance(inst, ProblemInstance) else np.asarray(inst, dtype=float)
    return 0.1 * (float(np.median(np.abs(b))) + 1.0)


def exact_penalty_threshold(inst: ProblemInstance) -> float:
    "(1 + 2p) L_f, reported for information and never enforced"
    return (1 + 2 * inst.p) * lipschitz_modulus(inst.loss)


# Instance files


class InstanceDocument(BaseModel):
    version: str
    n: int = Field(ge=1)
    r: int = Field(ge=1)
    A: List[float]
    b: List[float]
    loss_blocks: List[dict]
    label: Optional[str] = None
    offset: float = 0.0

    @model_validator(mode="after")
    def _sizes_agree(self):
        if len(self.A) != self.n * self.r:
            raise ValueError(f"A has {len(self.A)} entries, expected n*r = {self.n * self.r}")
        if len(self.b) != self.r:
            raise ValueError(f"b has {len(self.b)} entries, expected r = {self.r}")
        return self

    def to_instance(self) -> ProblemInstance:
        A = np.array(self.A, dtype=float).reshape(self.r, self.n)
        return ProblemInstance(
            A=A,
            b=self.b,
            loss=SeparableLoss(blocks=self.loss_blocks),
            offset=self.offset,
            label=self.label,
        )


def _block_to_dict(block: LossBlock) -> dict:
    return block.model_dump(mode="json", exclude_none=True)


def instance_to_json(inst: ProblemInstance) -> str:
    document = {
        "version": SCHEMA_VERSION,
        "n": inst.n,
        "r": inst.r,
        "A": inst.A.ravel().tolist(),
        "b": inst.b.tolist(),
        "loss_blocks": [_block_to_dict(block) for block in inst.loss.blocks],
        "label": inst.label,
        "offset": inst.offset,
    }
    return json.dumps(document, indent=1)


def instance_from_json(text: str) -> ProblemInstance:
    """Parse an instance document

    Raises json.JSONDecodeError on broken JSON, pydantic's ValidationError on
    missing or malformed fields and SchemaVersionError on an unknown major
    version.
    """
    raw = json.loads(text)
    if isinstance(raw, dict) and "version" in raw:
        check_schema_version(raw["version"], "instance")
    document = InstanceDocument.model_validate(raw)
    return document.to_instance()


@log_read_failure(LOG, "instance")
def load_instance(path) -> ProblemInstance:
    text = Path(path).read_text(encoding="utf-8")
    return instance_from_json(text)


def write_instance(inst: ProblemInstance, path) -> None:
    Path(path).write_text(instance_to_json(inst) + "\n", encoding="utf-8")


def numerical_rank(P: PointOrMatrix, cutoff: float = RANK_CUTOFF) -> int:
    "Number of singular values above ``cutoff * sigma_1``"
    singular_values = np.linalg.svd(_matrix(P), compute_uv=False)
    if singular_values.size == 0 or singular_values[0] == 0:
        return 0
    return int(np.sum(singular_values > cutoff * singular_values[0]))


def operator_norm_estimate(A, sweeps: int = 1000, tolerance: float = 1e-12) -> float:
    "Largest singular value of ``A`` by power iteration on ``A^T A``"
    A = np.asarray(A, dtype=float)
    x = np.random.default_rng(0).standard_normal(A.shape[1])
    x = x / np.linalg.norm(x)
    estimate = 0.0
    for _ in range(sweeps):
        y = A.T @ (A @ x)
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        x = y / norm
        previous, estimate = estimate, norm
        if abs(estimate - previous) <= tolerance * estimate:
            break
    return float(np.sqrt(estimate))


def estimate_lipschitz_fhat(inst: ProblemInstance) -> float:
    "Lipschitz modulus of the loss times the operator norm of ``A``"
    return lipschitz_modulus(inst.loss) * operator_norm_estimate(inst.A)
