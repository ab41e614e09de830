"""
Supervised hashing by alternating minimization

Learn codes ``X`` in ``{-1, 1}^(n x r_bits)`` and a projection ``W`` for data
``B`` (``d x n``)::

    min ||B - W X^T||_1 + (delta_reg / 2) ||W||_F^2

Alternate a W-step (gradient descent on the Huber-smoothed objective) with an
X-step that solves one small binary l1 problem per column of ``B`` with the
penalty solver.
"""

import csv
import io
import logging
from typing import Dict, List, NamedTuple, Optional, TextIO, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .certificates import rank_one_project, sign_round
from .config import HashingConfig, SolverConfig
from .errors import DcrelaxError, DimensionError
from .model import ProblemInstance, default_delta, true_objective
from .prox import SeparableLoss, huber_value_grad
from .solver import solve
from .utils import (
    SCHEMA_VERSION,
    FloatMatrix,
    SeedLike,
    emit_text,
    format_float,
    make_rng,
    parallel_map,
)


__all__ = [
    "HashingProblem",
    "WStep",
    "XStep",
    "AlternationResult",
    "planted_hashing_problem",
    "hashing_objective",
    "smoothed_hashing_objective",
    "w_step",
    "x_step",
    "alternate",
    "write_objective_trace_csv",
]


LOG = logging.getLogger(__name__)

DESCENT_SLACK = 1e-9


class HashingProblem(BaseModel):
    B: FloatMatrix
    r_bits: int = Field(ge=1)
    delta_reg: float = Field(1.0, gt=0.0)
    mu: float = Field(0.1, gt=0.0)
    K: int = Field(5, ge=0)
    label: Optional[str] = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    def d(self) -> int:
        return int(self.B.shape[0])

    @property
    def n(self) -> int:
        return int(self.B.shape[1])

    def config(self, base: Optional[HashingConfig] = None) -> HashingConfig:
        "``base`` (or the defaults) with this problem's K, mu and delta_reg"
        base = base or HashingConfig()
        return base.with_overrides(K=self.K, mu=self.mu, delta_reg=self.delta_reg)


class WStep(NamedTuple):
    W: np.ndarray
    iterations: int
    # smoothed objective before the first and after every step
    objectives: List[float]


class XStep(NamedTuple):
    X: np.ndarray
    # columns where the previous code was better and was kept
    kept: List[int]
    # column -> error, these also keep their previous (or fallback) code
    failed: Dict[int, str]


class TraceRow(NamedTuple):
    round: int
    half: str
    objective: float


class AlternationResult(NamedTuple):
    W: np.ndarray
    X: np.ndarray
    trace: List[TraceRow]


def planted_hashing_problem(
    d: int,
    n: int,
    r_bits: int,
    noise_rate: float,
    seed: SeedLike,
    **fields,
) -> Tuple[HashingProblem, np.ndarray, np.ndarray]:
    """
    ``B = W X^T`` plus sparse noise, returns ``(problem, W, X)``

    ``W`` is standard normal, ``X`` uniform signs; each entry of ``B`` gets
    standard normal noise with probability ``noise_rate``. ``fields`` go to
    ``HashingProblem``.
    """
    if not 0.0 <= noise_rate <= 1.0:
        raise ValueError(f"noise_rate must be in [0, 1], got {noise_rate}")
    rng = make_rng(seed)
    W = rng.standard_normal((d, r_bits))
    X = np.where(rng.random((n, r_bits)) < 0.5, -1.0, 1.0)
    mask = rng.random((d, n)) < noise_rate
    B = W @ X.T + mask * rng.standard_normal((d, n))
    fields.setdefault("label", f"planted-d{d}-n{n}-r{r_bits}-seed{seed}")
    problem = HashingProblem(B=B, r_bits=r_bits, **fields)
    return problem, W, X


def _check_shapes(B: np.ndarray, W: Optional[np.ndarray], X: Optional[np.ndarray]):
    if B.ndim != 2:
        raise DimensionError(f"B must be a matrix, got shape {B.shape}")
    d, n = B.shape
    if W is not None and (W.ndim != 2 or W.shape[0] != d):
        raise DimensionError(f"W has shape {W.shape}, B has {d} rows")
    if X is not None and (X.ndim != 2 or X.shape[0] != n):
        raise DimensionError(f"X has shape {X.shape}, B has {n} columns")
    if W is not None and X is not None and W.shape[1] != X.shape[1]:
        raise DimensionError(f"W has {W.shape[1]} columns, X has {X.shape[1]}")


def hashing_objective(B, W, X, delta_reg: float) -> float:
    "``||B - W X^T||_1 + (delta_reg / 2) ||W||_F^2``"
    B, W, X = (np.asarray(a, dtype=float) for a in (B, W, X))
    _check_shapes(B, W, X)
    return float(np.sum(np.abs(B - W @ X.T)) + 0.5 * delta_reg * np.sum(W * W))


def smoothed_hashing_objective(B, W, X, mu: float, delta_reg: float) -> Tuple[float, np.ndarray]:
    "Huber-smoothed objective and its gradient in ``W``"
    B, W, X = (np.asarray(a, dtype=float) for a in (B, W, X))
    R = B - W @ X.T
    value, derivative = huber_value_grad(R, mu)
    value += 0.5 * delta_reg * float(np.sum(W * W))
    return value, -derivative @ X + delta_reg * W


def w_step(B, X, W0, cfg: HashingConfig) -> WStep:
    """
    Gradient descent in ``W`` with the fixed step ``1 / (n r_bits / mu + delta_reg)``

    ``n r_bits / mu`` bounds the curvature of the Huber term since
    ``||X||_2^2 <= n r_bits``, so every step decreases the objective. Stops
    when the gradient's Frobenius norm is at most ``cfg.w_tol`` or after
    ``cfg.w_max_iter`` steps.
    """
    B = np.asarray(B, dtype=float)
    X = np.asarray(X, dtype=float)
    W = np.array(W0, dtype=float)
    _check_shapes(B, W, X)
    if not np.all(np.abs(X) == 1.0):
        raise ValueError("X must only hold -1 and 1")
    n, r_bits = X.shape
    step = 1.0 / (n * r_bits / cfg.mu + cfg.delta_reg)

    value, gradient = smoothed_hashing_objective(B, W, X, cfg.mu, cfg.delta_reg)
    objectives = [value]
    iterations = 0
    while np.linalg.norm(gradient) > cfg.w_tol and iterations < cfg.w_max_iter:
        W = W - step * gradient
        iterations += 1
        value, gradient = smoothed_hashing_objective(B, W, X, cfg.mu, cfg.delta_reg)
        if value > objectives[-1] + DESCENT_SLACK * (1.0 + abs(objectives[-1])):
            LOG.warning("W-step objective went up from %g to %g", objectives[-1], value)
        objectives.append(value)
    LOG.debug("W-step: %i iterations, objective %g", iterations, value)
    return WStep(W, iterations, objectives)


def _fallback_code(W: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(W.T @ b < 0, -1, 1).astype(int)


def x_step(
    B,
    W,
    cfg: HashingConfig,
    X_prev=None,
    solver_config: Optional[SolverConfig] = None,
    jobs: int = 1,
) -> XStep:
    """
    Solve ``min ||W x - B[:, j]||_1`` over sign vectors for every column ``j``

    All columns share ``A = W``, the smoothing parameter and the start point
    seed, so equal columns get equal codes. With ``X_prev`` a column keeps its
    previous code when the new one is worse.
    """
    B = np.asarray(B, dtype=float)
    W = np.asarray(W, dtype=float)
    if X_prev is not None:
        X_prev = np.asarray(X_prev)
    _check_shapes(B, W, X_prev)
    solver_config = solver_config or SolverConfig()
    delta = solver_config.delta if solver_config.delta is not None else default_delta(B)
    column_config = solver_config.with_overrides(k_max=cfg.k_max, delta=delta)
    loss = SeparableLoss.l1(B.shape[0])

    def solve_column(j: int) -> Tuple[np.ndarray, bool, Optional[str]]:
        inst = ProblemInstance(A=W, b=B[:, j], loss=loss, label=f"column-{j}")
        previous = X_prev[j] if X_prev is not None else _fallback_code(W, B[:, j])
        try:
            V, _ = solve(inst, column_config, instrument=False)
            code = sign_round(rank_one_project(V))
        except DcrelaxError as e:
            return previous, False, f"{type(e).__name__}: {e}"
        if X_prev is not None and true_objective(inst, code) > true_objective(inst, previous):
            return previous, True, None
        return code, False, None

    results = parallel_map(solve_column, range(B.shape[1]), jobs)
    X = np.array([code for code, _, _ in results], dtype=int).reshape(B.shape[1], W.shape[1])
    kept = [j for j, (_, was_kept, _) in enumerate(results) if was_kept]
    failed = {j: error for j, (_, _, error) in enumerate(results) if error is not None}
    for j, error in failed.items():
        LOG.warning("X-step column %i failed: %s", j, error)
    return XStep(X, kept, failed)


def alternate(
    prob: HashingProblem,
    seed: SeedLike,
    cfg: Optional[HashingConfig] = None,
    solver_config: Optional[SolverConfig] = None,
    jobs: int = 1,
) -> AlternationResult:
    """
    ``prob.K`` rounds of W-step then X-step

    Starts from ``W = 0`` and seeded random codes. The trace holds the exact
    objective at the start and after every half-step.
    """
    cfg = prob.config(cfg)
    rng = make_rng(seed)
    B = prob.B
    W = np.zeros((prob.d, prob.r_bits))
    X = np.where(rng.random((prob.n, prob.r_bits)) < 0.5, -1, 1)
    solver_config = (solver_config or SolverConfig()).with_overrides(
        seed=int(rng.integers(2**63))
    )
    trace = [TraceRow(0, "init", hashing_objective(B, W, X, cfg.delta_reg))]
    for k in range(1, cfg.K + 1):
        W = w_step(B, X, W, cfg).W
        trace.append(TraceRow(k, "w", hashing_objective(B, W, X, cfg.delta_reg)))
        X = x_step(B, W, cfg, X_prev=X, solver_config=solver_config, jobs=jobs).X
        trace.append(TraceRow(k, "x", hashing_objective(B, W, X, cfg.delta_reg)))
        LOG.debug("Round %i: objective %g", k, trace[-1].objective)
    return AlternationResult(W, X, trace)


def write_objective_trace_csv(trace: List[TraceRow], out: Union[str, TextIO, None] = None) -> str:
    buffer = io.StringIO()
    buffer.write(f"# dcrelax hashing trace schema_version={SCHEMA_VERSION}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TraceRow._fields)
    for row in trace:
        writer.writerow([row.round, row.half, format_float(row.objective)])
    return emit_text(buffer.getvalue(), out)
