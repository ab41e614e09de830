"""
Exact enumeration and a simple comparator

``brute_force_oracle`` walks ``{-1, 1}^n`` by Gray code over the high
variables, updating the residual with one column per flip, and evaluates all
settings of the low variables at once. Ties are broken towards the
lexicographically smallest ``z`` (with -1 < 1).
"""

import itertools
import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..errors import OracleMismatchError, OracleSizeError
from ..model import ProblemInstance, operator_norm_estimate, true_objective
from ..prox import loss_subgradient, loss_values
from ..utils import SeedLike, make_rng


__all__ = [
    "OracleResult",
    "brute_force_oracle",
    "naive_enumeration",
    "projected_subgradient_baseline",
]


LOG = logging.getLogger(__name__)

DEFAULT_N_CAP = 22
NAIVE_N_CAP = 16
CROSS_CHECK_N_CAP = 10
LOW_BITS = 12
TIE_TOLERANCE = 1e-12


class OracleResult(NamedTuple):
    z: np.ndarray
    objective: float


def _is_tie(value: float, best: float) -> bool:
    if not np.isfinite(best):
        return False
    return abs(value - best) <= TIE_TOLERANCE * (1.0 + abs(best))


def _lexicographic_signs(k: int) -> np.ndarray:
    "All of ``{-1, 1}^k`` as columns, first variable most significant"
    index = np.arange(2**k)
    shifts = np.arange(k - 1, -1, -1)
    bits = (index[None, :] >> shifts[:, None]) & 1
    return 2.0 * bits - 1.0


def brute_force_oracle(
    inst: ProblemInstance,
    n_cap: int = DEFAULT_N_CAP,
    cross_check_cap: int = CROSS_CHECK_N_CAP,
) -> OracleResult:
    """
    Exact minimizer of the true objective over ``{-1, 1}^n``

    Instances with ``n <= cross_check_cap`` are also solved by
    ``naive_enumeration`` and OracleMismatchError is raised if the two
    optimal values disagree.
    """
    n = inst.n
    if n > n_cap:
        raise OracleSizeError(f"Enumeration needs n <= {n_cap}, instance has n={n}")
    low = min(n, LOW_BITS)
    high = n - low
    A = inst.A
    low_signs = _lexicographic_signs(low)
    low_residuals = A[:, :low] @ low_signs

    z_high = -np.ones(high)
    base = A[:, low:] @ z_high - inst.b
    best_value = np.inf
    best_z: Optional[np.ndarray] = None

    for t in range(2**high):
        if t:
            # Gray code: flip the lowest set bit of t
            j = (t & -t).bit_length() - 1
            z_high[j] = -z_high[j]
            base += 2.0 * z_high[j] * A[:, low + j]
        values = loss_values(inst.loss, base[:, None] + low_residuals)
        column = int(np.argmin(values))
        value = float(values[column])
        ties = np.flatnonzero(values <= value + TIE_TOLERANCE * (1.0 + abs(value)))
        column = int(ties[0])
        candidate = np.concatenate([low_signs[:, column], z_high])
        if value < best_value and not _is_tie(value, best_value):
            best_value, best_z = value, candidate
        elif (best_z is not None and _is_tie(value, best_value)
              and tuple(candidate) < tuple(best_z)):
            best_value, best_z = min(value, best_value), candidate

    z = best_z.astype(int)
    result = OracleResult(z, true_objective(inst, z))
    if n <= cross_check_cap:
        _cross_check(inst, result)
    return result


def _cross_check(inst: ProblemInstance, result: OracleResult) -> None:
    reference = naive_enumeration(inst)
    if not np.isclose(result.objective, reference.objective, rtol=1e-9, atol=1e-12):
        raise OracleMismatchError(
            f"Gray-code enumeration found {result.objective!r}, "
            f"naive enumeration {reference.objective!r} (n={inst.n})"
        )
    LOG.debug("Oracle cross-checked at n=%i: %g", inst.n, result.objective)


def naive_enumeration(inst: ProblemInstance, n_cap: int = NAIVE_N_CAP) -> OracleResult:
    "Evaluate every sign vector from scratch, in lexicographic order"
    n = inst.n
    if n > n_cap:
        raise OracleSizeError(f"Naive enumeration needs n <= {n_cap}, instance has n={n}")
    best_value = np.inf
    best_z = None
    for signs in itertools.product((-1, 1), repeat=n):
        value = true_objective(inst, signs)
        if value < best_value and not _is_tie(value, best_value):
            best_value, best_z = value, signs
    z = np.array(best_z, dtype=int)
    return OracleResult(z, true_objective(inst, z))


def _round(x: np.ndarray) -> np.ndarray:
    return np.where(x < 0, -1, 1).astype(int)


def _subgradient_run(inst: ProblemInstance, x: np.ndarray, iters: int,
                     step_scale: float) -> Tuple[np.ndarray, float]:
    best_z = None
    best_value = np.inf
    for t in range(1, iters + 1):
        residual = inst.A @ x - inst.b
        direction = inst.A.T @ loss_subgradient(inst.loss, residual)
        x = np.clip(x - step_scale / np.sqrt(t) * direction, -1.0, 1.0)
        z = _round(x)
        value = true_objective(inst, z)
        if value < best_value:
            best_z, best_value = z, value
    return best_z, best_value


def projected_subgradient_baseline(
    inst: ProblemInstance,
    iters: int,
    seed: SeedLike,
    restarts: int = 1,
) -> OracleResult:
    """
    Subgradient descent on the box ``[-1, 1]^n``, rounding every iterate

    Steps are ``a / sqrt(t)`` with ``a = 1 / ||A||_2``. The first run starts
    at 0, further restarts at seeded uniform points in the box. The best
    rounded point seen is returned.
    """
    if iters < 1 or restarts < 1:
        raise ValueError(f"Need iters, restarts >= 1, got {iters}, {restarts}")
    norm = operator_norm_estimate(inst.A)
    step_scale = 1.0 / norm if norm > 0 else 1.0
    rng = make_rng(seed)
    best: Optional[OracleResult] = None
    for restart in range(restarts):
        if restart == 0:
            start = np.zeros(inst.n)
        else:
            start = rng.uniform(-1.0, 1.0, inst.n)
        z, value = _subgradient_run(inst, start, iters, step_scale)
        if best is None or value < best.objective:
            best = OracleResult(z, value)
    LOG.debug("Subgradient baseline: objective %g after %i x %i steps",
              best.objective, restarts, iters)
    return best
