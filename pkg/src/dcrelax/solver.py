"""
Penalty continuation with a majorize-minimize inner loop

Outer loop, for k = 0, 1, ...:

1. run the inner loop on ``Phi_k`` (penalty ``rho_k``) from ``V^k``, giving
   ``V^{k+1}``
2. stop when ``||V^{k+1}||_F^2 - sigma_1(V^{k+1})^2 <= eps_outer``
3. ``rho_{k+1} = min(sigma * rho_k, rho_max)``

Inner loop: linearize the smooth term and the concave part of the penalty,
add ``L/2 ||V' - V||^2`` and minimize over unit columns, which is the closed
form::

    V+ = proj((L V - grad f(V) - rho Gamma(V)) / (2 rho + L))

``L`` is found by backtracking on the smooth term. Stop on a small step or
after ``l_max`` steps.

With column scaling, column ``j`` gets curvature ``L * c_j`` instead of
``L``, where ``c`` is ``column_weights`` of the current point. The smallest
weight is 1, so ``L`` stays the smallest curvature in use and an accepted
step still decreases the objective by at least ``min_j ||N_j|| ||Delta||^2 / 2``
with ``N`` the numerator above.

Before the first outer iteration a random start is run through the inner
loop with the penalty switched off, so the penalty starts from a point
where the smooth term is already small.
"""

import csv
import io
import logging
import time
from typing import List, NamedTuple, Optional, TextIO, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .compat import StrEnum
from .config import SolverConfig
from .errors import FeasibilityError, ProjectionError
from .model import (
    FactorizedPoint,
    ProblemInstance,
    SmoothedObjective,
    default_delta,
    estimate_lipschitz_fhat,
    numerical_rank,
    penalty_gap,
    smoothed_gradient,
    smoothed_loss_and_gradient,
    spectral_subgradient,
)
from .utils import SCHEMA_VERSION, emit_text, format_float, make_rng


__all__ = [
    "Termination",
    "InnerState",
    "InnerStep",
    "InnerTrace",
    "PointStats",
    "OuterRecord",
    "OuterTrace",
    "project_columns",
    "inner_step",
    "solve_inner",
    "solve",
    "stationarity_surrogate",
    "initial_point",
    "auto_curvature",
    "scaled_auto_curvature",
    "auto_penalty",
    "column_weights",
    "write_trace_csv",
]


LOG = logging.getLogger(__name__)

L_FLOOR = 1e-8
HALVE_EVERY = 10
STALL_FACTOR = 10.0
MAX_INIT_ATTEMPTS = 100
SMALL_DIRECTION_ENTRY = 1e-12
RHO_MAX_WARN = 1e4
# column weights are at most 1/WEIGHT_FLOOR
WEIGHT_FLOOR = 1e-6


class Termination(StrEnum):
    GAP_REACHED = "gap-reached"
    KMAX_EXCEEDED = "kmax-exceeded"
    INNER_STALL = "inner-stall"


class InnerState(NamedTuple):
    V: FactorizedPoint
    l: int
    L: float
    last_step_norm: float
    phi: float


class InnerStep(NamedTuple):
    "One accepted inner step"
    l: int
    L: float
    step_sq: float
    phi_before: float
    phi_after: float
    # guaranteed decrease modulus: phi_before - phi_after >= curvature * step_sq / 2
    curvature: float
    backtracks: int


class InnerTrace(NamedTuple):
    rho: float
    iterations: int
    step_sq_sum: float
    final_L: float
    surrogate: float
    stalled: bool
    rows: List[InnerStep]
    instrumented: bool = True


class PointStats(BaseModel):
    "What the certificates need to know about one outer iterate"
    f_smooth: float
    sigma_sq: float
    gap: float
    rank: int


class OuterRecord(BaseModel):
    k: int
    rho: float
    inner_iterations: int
    phi: float
    surrogate: float
    seconds: float
    L: float
    stalled: bool
    min_abs_direction: float
    step_sq_sum: float
    # stats of the point the inner loop produced, V^{k+1}
    point: PointStats

    @property
    def gap(self) -> float:
        return self.point.gap


class OuterTrace(BaseModel):
    """
    Everything recorded during one solve

    ``records[k]`` describes outer iteration ``k``, ``initial`` the starting
    point ``V^0``. ``rho_next`` is the penalty that would have been used next,
    the certificates need it. With a warm start, ``initial`` describes the
    point it produced.
    """
    p: int
    m: int
    delta: float
    sigma: float
    rho_next: float
    initial: PointStats
    records: List[OuterRecord] = Field(default_factory=list)
    termination: Termination
    seconds: float = 0.0
    warm_start_iterations: int = 0
    inner: List[InnerTrace] = Field(default_factory=list, exclude=True, repr=False)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def final_gap(self) -> float:
        if not self.records:
            return self.initial.gap
        return self.records[-1].point.gap

    @property
    def total_inner_iterations(self) -> int:
        return sum(record.inner_iterations for record in self.records)

    def point_stats(self, k: int) -> PointStats:
        "Stats of V^k, the point outer iteration k started from"
        if k == 0:
            return self.initial
        return self.records[k - 1].point


def project_columns(M) -> FactorizedPoint:
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=0)
    bad = np.flatnonzero(~(norms > np.finfo(float).tiny) | ~np.isfinite(norms))
    if bad.size:
        raise ProjectionError(int(bad[0]))
    return FactorizedPoint(M / norms)


def _update(V: np.ndarray, gradient: np.ndarray, gamma: np.ndarray, rho: float, scale):
    # scale is L or the per-column curvatures L * c
    numerator = scale * V - gradient - rho * gamma
    return numerator / (2.0 * rho + scale)


def inner_step(obj: SmoothedObjective, V: FactorizedPoint, L: float,
               weights: Optional[np.ndarray] = None) -> FactorizedPoint:
    "One closed-form update at fixed curvature ``L``, no backtracking"
    gradient = smoothed_gradient(obj, V)
    gamma = spectral_subgradient(V).gamma
    scale = L if weights is None else L * np.asarray(weights, dtype=float)
    return project_columns(_update(V.V, gradient, gamma, obj.rho, scale))


def column_weights(inst: ProblemInstance, V) -> np.ndarray:
    """
    Relative curvature of the smooth term along each column of ``V``

    Column ``j >= 1`` only enters through ``u_j``, its weight is ``||A_j||^2``.
    Column 0 enters every ``u_j`` and gets ``||A V[:, 1:]^T||_F^2``. The
    weights are scaled so that the smallest is 1 and floored at
    ``WEIGHT_FLOOR`` of the largest before that.
    """
    V = V.V if isinstance(V, FactorizedPoint) else np.asarray(V, dtype=float)
    A = inst.A
    raw = np.empty(inst.p)
    raw[0] = float(np.sum((A @ V[:, 1:].T) ** 2))
    raw[1:] = np.sum(A * A, axis=0)
    top = float(raw.max())
    if not top > 0:
        return np.ones(inst.p)
    raw = np.maximum(raw, WEIGHT_FLOOR * top)
    return raw / raw.min()


def stationarity_surrogate(obj: SmoothedObjective, V_prev, V_next, L: float,
                           gradients: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> float:
    """Computable majorant of the stationarity residual at ``V_next``

    ``||grad f(V_next) - grad f(V_prev)||_F + L ||V_next - V_prev||_F``.
    Already known gradients may be passed as ``(grad_prev, grad_next)``.
    """
    prev = V_prev.V if isinstance(V_prev, FactorizedPoint) else np.asarray(V_prev)
    nxt = V_next.V if isinstance(V_next, FactorizedPoint) else np.asarray(V_next)
    if gradients is None:
        gradients = (smoothed_gradient(obj, prev), smoothed_gradient(obj, nxt))
    grad_prev, grad_next = gradients
    return float(np.linalg.norm(grad_next - grad_prev) + L * np.linalg.norm(nxt - prev))


def auto_curvature(inst: ProblemInstance, delta: float) -> float:
    "Cheap overestimate ``4 ||A||_1 ||A||_inf / delta`` of the smooth term's curvature"
    A = inst.A
    norm_1 = float(np.max(np.sum(np.abs(A), axis=0)))
    norm_inf = float(np.max(np.sum(np.abs(A), axis=1)))
    return max(4.0 * norm_1 * norm_inf / delta, L_FLOOR)


def scaled_auto_curvature(inst: ProblemInstance, delta: float) -> float:
    "Start for ``L`` under column scaling, ``2 min_j ||A_j||^2 / delta``"
    column_sq = np.sum(inst.A * inst.A, axis=0)
    top = float(column_sq.max())
    if not top > 0:
        return L_FLOOR
    smallest = max(float(column_sq.min()), WEIGHT_FLOOR * top)
    return max(2.0 * smallest / delta, L_FLOOR)


def auto_penalty(inst: ProblemInstance, rho_max: float = np.inf) -> float:
    "First penalty scaled to the loss, ``L_fhat / p``, capped at ``rho_max``"
    rho = estimate_lipschitz_fhat(inst) / inst.p
    if not rho > 0:
        rho = 1.0
    return min(rho, rho_max)


def initial_point(p: int, m: int, seed) -> FactorizedPoint:
    """Seeded Gaussian ``m x p`` start with unit columns and full row rank

    A rank-deficient draw is replaced by one from the next seed stream.
    """
    for attempt in range(MAX_INIT_ATTEMPTS):
        rng = make_rng(seed, attempt)
        V = rng.standard_normal((m, p))
        norms = np.linalg.norm(V, axis=0)
        if np.any(norms == 0):
            continue
        V = V / norms
        if np.linalg.matrix_rank(V) == m:
            return FactorizedPoint(V)
        LOG.debug("Start point attempt %i is rank deficient, resampling", attempt)
    raise FeasibilityError(f"No full-rank start point found in {MAX_INIT_ATTEMPTS} attempts")


def solve_inner(
    obj: SmoothedObjective,
    V0: FactorizedPoint,
    cfg: SolverConfig,
    L: Optional[float] = None,
    instrument: bool = True,
) -> Tuple[FactorizedPoint, InnerTrace]:
    """
    Iterate the closed-form update on ``obj`` from ``V0``

    ``L`` is the starting curvature, by default taken from ``cfg.L_init``. It
    is doubled until the smooth term is majorized and tentatively halved after
    every ``HALVE_EVERY`` accepted steps. Every accepted step decreases the
    objective. With ``cfg.column_scaling`` column ``j`` uses ``L * c_j``.
    """
    rho = obj.rho
    if L is None:
        L = _initial_curvature(obj.instance, cfg, obj.delta)
    weights: Optional[np.ndarray] = None
    f, gradient = smoothed_loss_and_gradient(obj, V0)
    spectral = spectral_subgradient(V0)
    phi = f + rho * penalty_gap(V0, spectral.sigma)
    state = InnerState(V0, 0, L, float("inf"), phi)
    rows: List[InnerStep] = []
    step_sq_sum = 0.0
    surrogate = 0.0
    previous_gradient = gradient

    while state.l < cfg.l_max:
        V = state.V.V
        L = state.L
        if cfg.column_scaling:
            weights = column_weights(obj.instance, V)
        backtracks = 0
        while True:
            scale = L if weights is None else L * weights
            numerator = scale * V - gradient - rho * spectral.gamma
            candidate = project_columns(numerator / (2.0 * rho + scale))
            f_next, gradient_next = smoothed_loss_and_gradient(obj, candidate)
            delta_V = candidate.V - V
            column_sq = np.sum(delta_V * delta_V, axis=0)
            step_sq = float(np.sum(column_sq))
            weighted_sq = step_sq if weights is None else float(weights @ column_sq)
            model = f + float(np.sum(gradient * delta_V)) + 0.5 * L * weighted_sq
            if f_next <= model + 1e-12 * (1.0 + abs(f)):
                break
            L *= 2.0
            backtracks += 1
            LOG.debug("Backtracking, curvature now %g", L)

        spectral_next = spectral_subgradient(candidate, start=candidate.V @ spectral.direction)
        phi_next = f_next + rho * penalty_gap(candidate, spectral_next.sigma)
        if phi_next > state.phi + 1e-9 * (1.0 + abs(state.phi)):
            LOG.warning("Inner step %i increased the objective: %r -> %r",
                        state.l, state.phi, phi_next)
        if instrument:
            curvature = float(np.min(np.linalg.norm(numerator, axis=0)))
            rows.append(InnerStep(state.l, L, step_sq, state.phi, phi_next, curvature, backtracks))
        step_sq_sum += step_sq
        previous_gradient = gradient
        l = state.l + 1
        step_norm = step_sq ** 0.5
        if l % HALVE_EVERY == 0:
            next_L = max(L / 2.0, L_FLOOR)
        else:
            next_L = L
        state = InnerState(candidate, l, next_L, step_norm, phi_next)
        f, gradient, spectral = f_next, gradient_next, spectral_next
        surrogate = stationarity_surrogate(
            obj, V, candidate, L, gradients=(previous_gradient, gradient)
        )
        if step_norm <= cfg.eps_inner:
            break

    stalled = state.l >= cfg.l_max and state.last_step_norm > STALL_FACTOR * cfg.eps_inner
    if stalled:
        LOG.warning("Inner loop stalled after %i steps at rho=%g, last step %g",
                    state.l, rho, state.last_step_norm)
    trace = InnerTrace(
        rho=rho,
        iterations=state.l,
        step_sq_sum=step_sq_sum,
        final_L=state.L,
        surrogate=surrogate,
        stalled=stalled,
        rows=rows,
        instrumented=instrument,
    )
    return state.V, trace


def _initial_curvature(inst: ProblemInstance, cfg: SolverConfig, delta: float) -> float:
    if cfg.L_init != "auto":
        return float(cfg.L_init)
    if cfg.column_scaling:
        return scaled_auto_curvature(inst, delta)
    return auto_curvature(inst, delta)


def _initial_penalty(inst: ProblemInstance, cfg: SolverConfig) -> float:
    if cfg.rho0 == "auto":
        return auto_penalty(inst, cfg.rho_max)
    return float(cfg.rho0)


def _point_stats(obj: SmoothedObjective, P: FactorizedPoint):
    f, _ = smoothed_loss_and_gradient(obj, P)
    # fresh power iteration, no start vector
    spectral = spectral_subgradient(P)
    sigma_sq = spectral.sigma ** 2
    stats = PointStats(
        f_smooth=f,
        sigma_sq=sigma_sq,
        gap=penalty_gap(P, spectral.sigma),
        rank=numerical_rank(P),
    )
    return stats, spectral


def solve(
    inst: ProblemInstance,
    cfg: SolverConfig,
    V0: Optional[FactorizedPoint] = None,
    instrument: bool = True,
) -> Tuple[FactorizedPoint, OuterTrace]:
    """
    Run the outer penalty loop on ``inst``

    The result is deterministic for a fixed config, seed included. With
    ``instrument`` every accepted inner step is kept in ``trace.inner``.
    A given ``V0`` is used as is, only the seeded random start gets the
    warm start of ``cfg.warm_start``.
    """
    started = time.perf_counter()
    p = inst.p
    m = min(cfg.m, p)
    if m != cfg.m:
        LOG.debug("Clamped m from %i to p=%i", cfg.m, p)
    delta = cfg.delta if cfg.delta is not None else default_delta(inst)
    L = _initial_curvature(inst, cfg, delta)
    warm_start_iterations = 0
    if V0 is None:
        V0 = initial_point(p, m, cfg.seed)
        if cfg.warm_start:
            unpenalized = SmoothedObjective(instance=inst, delta=delta, rho=0.0)
            V_warm, warm = solve_inner(unpenalized, V0, cfg, L=L, instrument=False)
            # the penalty loop needs a full-rank start
            if numerical_rank(V_warm) == V0.m:
                V0, L = V_warm, warm.final_L
                warm_start_iterations = warm.iterations
                LOG.debug("Warm start: %i steps, curvature %g", warm.iterations, L)
            else:
                LOG.debug("Warm start lost rank, keeping the random start")
    elif V0.p != p:
        raise FeasibilityError(f"Start point has p={V0.p}, instance needs p={p}")
    m = V0.m

    rho = _initial_penalty(inst, cfg)
    V = V0
    initial, _ = _point_stats(SmoothedObjective(instance=inst, delta=delta, rho=rho), V)
    records: List[OuterRecord] = []
    inner_traces: List[InnerTrace] = []
    termination = Termination.KMAX_EXCEEDED

    for k in range(cfg.k_max):
        outer_started = time.perf_counter()
        obj = SmoothedObjective(instance=inst, delta=delta, rho=rho)
        V, inner = solve_inner(obj, V, cfg, L=L, instrument=instrument)
        L = inner.final_L
        stats, spectral = _point_stats(obj, V)
        min_abs = float(np.min(np.abs(spectral.direction)))
        if min_abs < SMALL_DIRECTION_ENTRY:
            LOG.warning(
                "Leading direction has an entry of size %g at k=%i, progress bounds may not hold",
                min_abs, k,
            )
        record = OuterRecord(
            k=k,
            rho=rho,
            inner_iterations=inner.iterations,
            phi=stats.f_smooth + rho * stats.gap,
            surrogate=inner.surrogate,
            seconds=time.perf_counter() - outer_started,
            L=L,
            stalled=inner.stalled,
            min_abs_direction=min_abs,
            step_sq_sum=inner.step_sq_sum,
            point=stats,
        )
        records.append(record)
        inner_traces.append(inner)
        LOG.debug("k=%i rho=%g inner=%i gap=%g phi=%g", k, rho, inner.iterations,
                  stats.gap, record.phi)
        rho = min(cfg.sigma * rho, cfg.rho_max)
        if stats.gap <= cfg.eps_outer:
            termination = Termination.GAP_REACHED
            break
    else:
        if records and records[-1].stalled:
            termination = Termination.INNER_STALL

    trace = OuterTrace(
        p=p,
        m=m,
        delta=delta,
        sigma=cfg.sigma,
        rho_next=rho,
        initial=initial,
        records=records,
        termination=termination,
        seconds=time.perf_counter() - started,
        warm_start_iterations=warm_start_iterations,
        inner=inner_traces if instrument else [],
    )
    if (
        termination != Termination.GAP_REACHED
        and cfg.rho_max >= RHO_MAX_WARN
        and records[-1].rho >= cfg.rho_max
    ):
        LOG.warning("Gap %g still above %g after rho reached rho_max=%g",
                    trace.final_gap, cfg.eps_outer, cfg.rho_max)
    return V, trace


TRACE_COLUMNS = ("k", "l_total", "rho", "gap", "phi", "surrogate", "seconds")


def write_trace_csv(trace: OuterTrace, out: Union[str, TextIO, None] = None) -> str:
    """Write the outer trace as CSV, returns the text

    ``out`` is a path, an open text file or None (just return the text).
    """
    buffer = io.StringIO()
    buffer.write(f"# dcrelax outer trace schema_version={SCHEMA_VERSION}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    l_total = 0
    for record in trace.records:
        l_total += record.inner_iterations
        writer.writerow([
            record.k,
            l_total,
            format_float(record.rho),
            format_float(record.gap),
            format_float(record.phi),
            format_float(record.surrogate),
            format_float(record.seconds),
        ])
    return emit_text(buffer.getvalue(), out)
