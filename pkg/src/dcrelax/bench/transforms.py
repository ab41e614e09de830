"""
Rewriting models into the ``f(A z - b)`` template over ``{-1, 1}^n``
"""

from typing import Optional

import numpy as np

from ..errors import DimensionError
from ..model import ProblemInstance
from ..prox import SeparableLoss
from .generators import ZeroOneModel


__all__ = [
    "zero_one_transform",
    "augment_linear",
    "to_zero_one",
    "to_signs",
]


def to_zero_one(z) -> np.ndarray:
    return (np.asarray(z, dtype=float) + 1.0) / 2.0


def to_signs(x) -> np.ndarray:
    return 2.0 * np.asarray(x, dtype=float) - 1.0


def augment_linear(
    Ap,
    bp,
    c,
    offset: float = 0.0,
    label: Optional[str] = None,
) -> ProblemInstance:
    """
    ``||A' z - b'||_1 + c^T z`` as a single separable loss

    Identity rows are stacked under ``A'`` and zeros under ``b'``, the extra
    rows are charged linearly with ``c``.
    """
    Ap = np.asarray(Ap, dtype=float)
    bp = np.asarray(bp, dtype=float)
    c = np.asarray(c, dtype=float)
    if Ap.ndim != 2 or bp.shape != (Ap.shape[0],):
        raise DimensionError(f"A' has shape {Ap.shape}, b' has shape {bp.shape}")
    if c.shape != (Ap.shape[1],):
        raise DimensionError(f"c has shape {c.shape}, A' has {Ap.shape[1]} columns")
    M, N = Ap.shape
    A = np.vstack([Ap, np.eye(N)])
    b = np.concatenate([bp, np.zeros(N)])
    loss = SeparableLoss.concat(SeparableLoss.l1(M), SeparableLoss.linear(c))
    return ProblemInstance(A=A, b=b, loss=loss, offset=offset, label=label)


def zero_one_transform(model: ZeroOneModel) -> ProblemInstance:
    """
    Substitute ``x = (z + e) / 2``

    Gives ``||A~ z - b~||_1 + c^T z + lam N / 2`` with ``A~ = A/2``,
    ``b~ = y - A e / 2`` and ``c = (lam/2) e``, so objective values agree
    pointwise.
    """
    A = model.A
    half = 0.5 * A
    shifted = model.y - 0.5 * A.sum(axis=1)
    c = np.full(model.N, model.lam / 2.0)
    return augment_linear(
        half,
        shifted,
        c,
        offset=model.lam * model.N / 2.0,
        label=model.label,
    )
