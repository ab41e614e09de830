"""
Proximal operators and Moreau envelopes of separable losses

A loss is an ordered sequence of row blocks, each one of:

* ``l1``: ``weight * ||u||_1``
* ``linear``: ``<coeffs, u>``
* ``huber``: ``sum_i H_mu(u_i)`` with ``H_mu(t) = t**2/(2 mu)`` for
  ``|t| <= mu`` and ``|t| - mu/2`` otherwise

Build one with the helpers::

    > loss = SeparableLoss.l1(30)
    > loss = SeparableLoss.concat(SeparableLoss.l1(30), SeparableLoss.linear([0.5] * 10))

or from a plain dict, as stored in instance files::

    > loss = SeparableLoss(blocks=[{"kind": "l1", "row_count": 30}])

Value, prox and envelope all decompose over the blocks. Every function here is
pure; the models are frozen.
"""

import logging
import math
from typing import ClassVar, Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from .compat import StrEnum
from .errors import DimensionError, ParameterError
from .utils import FloatVector, as_float_array


__all__ = [
    "LossKind",
    "LossBlock",
    "L1Block",
    "LinearBlock",
    "HuberBlock",
    "SeparableLoss",
    "loss_value",
    "loss_values",
    "prox",
    "envelope",
    "envelope_gradient",
    "envelope_and_gradient",
    "loss_subgradient",
    "lipschitz_modulus",
    "huber_value_grad",
]


LOG = logging.getLogger(__name__)


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma > 0 or not math.isfinite(gamma):
        raise ParameterError(f"Smoothing parameter must be positive and finite, got {gamma}")
    return gamma


class LossKind(StrEnum):
    L1 = "l1"
    LINEAR = "linear"
    HUBER = "huber"


class LossBlock(BaseModel):
    """
    Base-class for one row block of a separable loss

    Never ``LossBlock()``, always ``LossBlock.create()`` or one of the
    subclasses, the block formulas live on the subclasses.
    """
    kind: LossKind
    row_count: int = Field(ge=1)
    weight: float = Field(1.0, ge=0)
    coeffs: Optional[FloatVector] = None
    huber_mu: Optional[float] = None

    KIND: ClassVar[LossKind]
    SUBTYPES: ClassVar[Dict[str, type]] = {}

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.SUBTYPES[cls.KIND.value] = cls

    @classmethod
    def create(cls, attrdict) -> "LossBlock":
        if isinstance(attrdict, LossBlock):
            return attrdict
        kind = str(attrdict.get("kind"))
        subtype = LossBlock.SUBTYPES.get(kind)
        if subtype is None:
            known = sorted(LossBlock.SUBTYPES)
            raise ValueError(f"Unknown loss block kind \"{kind}\", expected one of {known}")
        return subtype(**attrdict)

    def value(self, u: np.ndarray) -> float:
        raise NotImplementedError

    def batch_value(self, U: np.ndarray) -> np.ndarray:
        "Values of every column of ``U``"
        raise NotImplementedError

    def prox(self, x: np.ndarray, gamma: float) -> np.ndarray:
        raise NotImplementedError

    def envelope(self, x: np.ndarray, gamma: float) -> float:
        raise NotImplementedError

    def subgradient(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_modulus(self) -> float:
        raise NotImplementedError


class L1Block(LossBlock):
    kind: LossKind = LossKind.L1

    KIND: ClassVar[LossKind] = LossKind.L1

    @model_validator(mode="after")
    def _only_l1_fields(self):
        if self.coeffs is not None or self.huber_mu is not None:
            raise ValueError("l1 blocks take neither coeffs nor huber_mu")
        return self

    def value(self, u):
        return self.weight * float(np.sum(np.abs(u)))

    def batch_value(self, U):
        return self.weight * np.sum(np.abs(U), axis=0)

    def prox(self, x, gamma):
        threshold = gamma * self.weight
        return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)

    def envelope(self, x, gamma):
        threshold = gamma * self.weight
        ax = np.abs(x)
        inside = ax <= threshold
        quadratic = x[inside] ** 2 / (2.0 * gamma)
        linear = self.weight * ax[~inside] - gamma * self.weight**2 / 2.0
        return float(np.sum(quadratic) + np.sum(linear))

    def subgradient(self, u):
        return self.weight * np.sign(u)

    def lipschitz_modulus(self):
        return self.weight * math.sqrt(self.row_count)


class LinearBlock(LossBlock):
    kind: LossKind = LossKind.LINEAR

    KIND: ClassVar[LossKind] = LossKind.LINEAR

    @model_validator(mode="after")
    def _coeffs_match_rows(self):
        if self.coeffs is None:
            raise ValueError("linear blocks need coeffs")
        if self.coeffs.shape[0] != self.row_count:
            raise ValueError(
                f"coeffs has length {self.coeffs.shape[0]}, expected row_count={self.row_count}"
            )
        if self.huber_mu is not None or self.weight != 1.0:
            raise ValueError("linear blocks take neither huber_mu nor weight")
        return self

    def value(self, u):
        return float(self.coeffs @ u)

    def batch_value(self, U):
        return self.coeffs @ U

    def prox(self, x, gamma):
        return x - gamma * self.coeffs

    def envelope(self, x, gamma):
        return float(self.coeffs @ x) - gamma * float(self.coeffs @ self.coeffs) / 2.0

    def subgradient(self, u):
        return np.array(self.coeffs)

    def lipschitz_modulus(self):
        return float(np.linalg.norm(self.coeffs))


class HuberBlock(LossBlock):
    kind: LossKind = LossKind.HUBER

    KIND: ClassVar[LossKind] = LossKind.HUBER

    @model_validator(mode="after")
    def _mu_positive(self):
        if self.huber_mu is None or not self.huber_mu > 0:
            raise ValueError("huber blocks need a positive huber_mu")
        if self.coeffs is not None or self.weight != 1.0:
            raise ValueError("huber blocks take neither coeffs nor weight")
        return self

    def value(self, u):
        value, _ = huber_value_grad(u, self.huber_mu)
        return value

    def batch_value(self, U):
        mu = self.huber_mu
        absolute = np.abs(U)
        return np.sum(np.where(absolute <= mu, U**2 / (2.0 * mu), absolute - mu / 2.0), axis=0)

    def prox(self, x, gamma):
        # quadratic branch scales, linear branch shifts like soft-thresholding
        mu = self.huber_mu
        shrunk = x * (mu / (mu + gamma))
        shifted = x - gamma * np.sign(x)
        return np.where(np.abs(x) <= mu + gamma, shrunk, shifted)

    def envelope(self, x, gamma):
        # env of H_mu with step gamma is H_{mu + gamma}
        value, _ = huber_value_grad(x, self.huber_mu + gamma)
        return value

    def subgradient(self, u):
        return np.clip(u / self.huber_mu, -1.0, 1.0)

    def lipschitz_modulus(self):
        return math.sqrt(self.row_count)


class SeparableLoss(BaseModel):
    blocks: List[LossBlock] = Field(min_length=1)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("blocks", mode="before")
    @classmethod
    def _create_blocks(cls, value):
        return [LossBlock.create(block) for block in value]

    @computed_field  # type: ignore
    @property
    def total_rows(self) -> int:
        return sum(block.row_count for block in self.blocks)

    @classmethod
    def l1(cls, row_count: int, weight: float = 1.0) -> "SeparableLoss":
        return cls(blocks=[L1Block(row_count=row_count, weight=weight)])

    @classmethod
    def linear(cls, coeffs) -> "SeparableLoss":
        coeffs = as_float_array(coeffs, 1, "coeffs")
        return cls(blocks=[LinearBlock(row_count=coeffs.shape[0], coeffs=coeffs)])

    @classmethod
    def huber(cls, row_count: int, mu: float) -> "SeparableLoss":
        return cls(blocks=[HuberBlock(row_count=row_count, huber_mu=mu)])

    @classmethod
    def concat(cls, *losses: "SeparableLoss") -> "SeparableLoss":
        return cls(blocks=[block for loss in losses for block in loss.blocks])

    def iter_blocks(self) -> Iterator[Tuple[LossBlock, slice]]:
        start = 0
        for block in self.blocks:
            stop = start + block.row_count
            yield block, slice(start, stop)
            start = stop

    def has_kind(self, kind: LossKind) -> bool:
        return any(block.kind == kind for block in self.blocks)

    def check_vector(self, u, name: str = "u") -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim != 1 or u.shape[0] != self.total_rows:
            raise DimensionError(
                f"{name} has shape {u.shape}, loss expects length {self.total_rows}"
            )
        return u


def loss_value(loss: SeparableLoss, u) -> float:
    u = loss.check_vector(u)
    return sum(block.value(u[rows]) for block, rows in loss.iter_blocks())


def loss_values(loss: SeparableLoss, U) -> np.ndarray:
    "Loss of every column of the ``total_rows x K`` matrix ``U``"
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != loss.total_rows:
        raise DimensionError(f"U has shape {U.shape}, loss expects {loss.total_rows} rows")
    values = np.zeros(U.shape[1])
    for block, rows in loss.iter_blocks():
        values += block.batch_value(U[rows])
    return values


def prox(loss: SeparableLoss, x, gamma: float) -> np.ndarray:
    gamma = _check_gamma(gamma)
    x = loss.check_vector(x, "x")
    result = np.empty_like(x)
    for block, rows in loss.iter_blocks():
        result[rows] = block.prox(x[rows], gamma)
    return result


def envelope(loss: SeparableLoss, x, gamma: float) -> float:
    gamma = _check_gamma(gamma)
    x = loss.check_vector(x, "x")
    return sum(block.envelope(x[rows], gamma) for block, rows in loss.iter_blocks())


def envelope_gradient(loss: SeparableLoss, x, gamma: float) -> np.ndarray:
    "Gradient (x - prox(x)) / gamma of the Moreau envelope"
    x = loss.check_vector(x, "x")
    return (x - prox(loss, x, gamma)) / gamma


def envelope_and_gradient(loss: SeparableLoss, x, gamma: float) -> Tuple[float, np.ndarray]:
    """Envelope value and gradient in one pass over the blocks

    This is what the solver calls on every inner iteration.
    """
    gamma = _check_gamma(gamma)
    x = loss.check_vector(x, "x")
    value = 0.0
    gradient = np.empty_like(x)
    for block, rows in loss.iter_blocks():
        block_x = x[rows]
        value += block.envelope(block_x, gamma)
        gradient[rows] = (block_x - block.prox(block_x, gamma)) / gamma
    return value, gradient


def loss_subgradient(loss: SeparableLoss, u) -> np.ndarray:
    "One element of the subdifferential, 0 is picked at the l1 kink"
    u = loss.check_vector(u)
    result = np.empty_like(u)
    for block, rows in loss.iter_blocks():
        result[rows] = block.subgradient(u[rows])
    return result


def lipschitz_modulus(loss: SeparableLoss) -> float:
    "Euclidean Lipschitz modulus of the loss, blocks combine in quadrature"
    return math.sqrt(sum(block.lipschitz_modulus() ** 2 for block in loss.blocks))


def huber_value_grad(R, mu: float) -> Tuple[float, np.ndarray]:
    """Elementwise Huber value and derivative of an array of any shape

    Returns ``(sum_ij H_mu(R_ij), H'_mu(R))``.
    """
    mu = float(mu)
    if not mu > 0:
        raise ParameterError(f"Huber parameter must be positive, got {mu}")
    R = np.asarray(R, dtype=float)
    absolute = np.abs(R)
    inside = absolute <= mu
    values = np.where(inside, R**2 / (2.0 * mu), absolute - mu / 2.0)
    derivative = np.clip(R / mu, -1.0, 1.0)
    return float(np.sum(values)), derivative
