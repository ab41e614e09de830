"""
Rounding of a solver result and what can be certified about it

From the final ``V`` the rank-one projection ``x_bar = sigma_1 P1`` is taken,
then rounded to a sign vector ``z``. Alongside come the feasibility gap
``||x_bar o x_bar - e||``, an upper bound on how much worse the rounded point
can be than the best smoothed value seen during the run, and a check of the
inner loop's summed step lengths against its objective decrease.
"""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from .errors import CertificateError, HomogenizationError
from .model import (
    FactorizedPoint,
    ProblemInstance,
    estimate_lipschitz_fhat,
    spectral_subgradient,
    true_objective,
)
from .prox import envelope
from .solver import InnerTrace, OuterTrace
from .utils import FloatVector


__all__ = [
    "Certificate",
    "OptimalityBound",
    "DescentSegment",
    "DescentReport",
    "rank_one_project",
    "rank_one_residual",
    "sign_round",
    "feasibility_gap",
    "rounded_envelope_objective",
    "optimality_bound",
    "descent_certificate",
    "estimate_lipschitz_fhat",
    "certify",
]


LOG = logging.getLogger(__name__)


class OptimalityBound(BaseModel):
    """
    Upper bounds on ``f_hat(x_bar x_bar^T) - f_smooth(V^k_star)``

    ``telescoped`` uses the recorded penalty and spectral norm sequence,
    ``closed_form`` only the end points.
    """
    k_star: int
    k_bar: int
    rho_bar: float
    rho_k_star: float
    r_star: int
    p: int
    L_fhat: float
    eps: float
    f_smooth_k_star: float
    telescoped: float
    closed_form: float


class Certificate(BaseModel):
    x_bar: FloatVector
    z: List[int]
    feas_gap: float
    rank_one_residual: float
    env_obj_rounded: float
    true_obj: float
    gap_bound: Optional[OptimalityBound] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)


class DescentSegment(BaseModel):
    "Steps ``start`` to ``stop - 1`` of an inner run, all taken with curvature ``L``"
    start: int
    stop: int
    L: float
    L_est: float
    lhs: float
    rhs: float
    slack: float
    holds: bool


class DescentReport(BaseModel):
    segments: List[DescentSegment]

    @property
    def holds(self) -> bool:
        return all(segment.holds for segment in self.segments)

    @property
    def slack(self) -> float:
        if not self.segments:
            return 0.0
        return min(segment.slack for segment in self.segments)


def _matrix(V) -> np.ndarray:
    if isinstance(V, FactorizedPoint):
        return V.V
    return np.asarray(V, dtype=float)


def rank_one_project(V) -> np.ndarray:
    "``sigma_1(V) P1`` with coordinate 0 nonnegative"
    spectral = spectral_subgradient(V)
    return spectral.sigma * spectral.direction


def rank_one_residual(V, x_bar=None) -> float:
    """``||x_bar x_bar^T - V^T V||_F`` without forming ``V^T V``

    Equals ``sqrt(||V V^T||_F^2 - sigma_1^4)`` when ``x_bar`` is the rank-one
    projection of ``V``, which is the default.
    """
    V = _matrix(V)
    if x_bar is None:
        sigma_sq = spectral_subgradient(V).sigma ** 2
        gram = V @ V.T
        return float(np.sqrt(max(np.sum(gram * gram) - sigma_sq**2, 0.0)))
    x_bar = np.asarray(x_bar, dtype=float)
    difference = np.outer(x_bar, x_bar) - V.T @ V
    return float(np.linalg.norm(difference))


def sign_round(x_bar) -> np.ndarray:
    """Signs of ``x_bar[1:] / x_bar[0]``, exact zeros go to +1

    The global sign of ``x_bar`` does not matter.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    if x_bar.ndim != 1 or x_bar.shape[0] < 2:
        raise HomogenizationError(f"x_bar needs length >= 2, got shape {x_bar.shape}")
    if x_bar[0] == 0:
        raise HomogenizationError("Homogenization coordinate of x_bar is 0")
    ratios = x_bar[1:] / x_bar[0]
    return np.where(ratios < 0, -1, 1).astype(int)


def feasibility_gap(x_bar) -> float:
    x_bar = np.asarray(x_bar, dtype=float)
    return float(np.linalg.norm(x_bar * x_bar - 1.0))


def rounded_envelope_objective(inst: ProblemInstance, x_bar, delta: float) -> float:
    "Smoothed objective at the lifted point ``x_bar x_bar^T``"
    x_bar = np.asarray(x_bar, dtype=float)
    u = x_bar[0] * x_bar[1:]
    return envelope(inst.loss, inst.A @ u - inst.b, delta) + inst.offset


def optimality_bound(
    trace: OuterTrace,
    k_star: Optional[int] = None,
    L_fhat: float = 0.0,
    eps: Optional[float] = None,
) -> OptimalityBound:
    """
    Bound the excess of the rounded point over ``f_smooth(V^k_star)``

    ``k_star`` defaults to the start point of the outer iteration with the
    lowest smoothed value, ``eps`` to the final gap.
    """
    k_bar = len(trace.records)
    if k_bar == 0:
        raise CertificateError("Trace has no outer iterations")
    if k_star is None:
        k_star = min(range(k_bar), key=lambda k: trace.point_stats(k).f_smooth)
    if not 0 <= k_star < k_bar:
        raise CertificateError(f"k_star must be in [0, {k_bar}), got {k_star}")
    star = trace.point_stats(k_star)
    if star.rank < 1:
        raise CertificateError(f"Iterate {k_star} has no recorded rank")
    if eps is None:
        eps = trace.final_gap
    p = trace.p
    rho_bar = trace.rho_next
    rho_k_star = trace.records[k_star].rho
    ratio = p / star.rank

    telescoped = rho_bar * trace.point_stats(k_bar).sigma_sq - rho_k_star * ratio
    for j in range(k_star, k_bar):
        rho_j = trace.records[j].rho
        rho_following = trace.records[j + 1].rho if j + 1 < k_bar else rho_bar
        telescoped += (rho_j - rho_following) * trace.records[j].point.sigma_sq
    telescoped += L_fhat * eps
    closed_form = rho_bar * (p - 1) + rho_k_star * (1 - ratio) + (L_fhat - rho_bar) * eps

    return OptimalityBound(
        k_star=k_star,
        k_bar=k_bar,
        rho_bar=rho_bar,
        rho_k_star=rho_k_star,
        r_star=star.rank,
        p=p,
        L_fhat=L_fhat,
        eps=eps,
        f_smooth_k_star=star.f_smooth,
        telescoped=telescoped,
        closed_form=closed_form,
    )


def descent_certificate(inner_trace: InnerTrace, L_est: Optional[float] = None) -> DescentReport:
    """
    Check summed squared steps against objective decrease per fixed-L segment

    On every run of steps sharing the curvature ``L``::

        sum ||Delta||_F^2 <= 2 (phi_first - phi_last) / (L - L_est)

    Without ``L_est`` the smallest decrease modulus recorded in the segment is
    used, i.e. ``L - L_est`` is that modulus.
    """
    if not inner_trace.instrumented:
        raise CertificateError("Inner trace was recorded without per-step rows")
    segments = []
    rows = inner_trace.rows
    start = 0
    while start < len(rows):
        stop = start + 1
        while stop < len(rows) and rows[stop].L == rows[start].L:
            stop += 1
        segment = rows[start:stop]
        L = segment[0].L
        if L_est is None:
            modulus = min(step.curvature for step in segment)
            segment_L_est = L - modulus
        else:
            modulus = L - L_est
            segment_L_est = L_est
        if not modulus > 0:
            raise CertificateError(f"L={L} does not exceed the curvature estimate {segment_L_est}")
        lhs = sum(step.step_sq for step in segment)
        decrease = segment[0].phi_before - segment[-1].phi_after
        rhs = 2.0 * decrease / modulus
        tolerance = 2e-9 * (1.0 + abs(segment[0].phi_before)) * len(segment) / modulus
        segments.append(DescentSegment(
            start=segment[0].l,
            stop=segment[-1].l + 1,
            L=L,
            L_est=segment_L_est,
            lhs=lhs,
            rhs=rhs,
            slack=rhs - lhs,
            holds=lhs <= rhs + tolerance,
        ))
        start = stop
    return DescentReport(segments=segments)


def certify(
    inst: ProblemInstance,
    V,
    trace: OuterTrace,
    L_fhat: Optional[float] = None,
    eps: Optional[float] = None,
) -> Certificate:
    x_bar = rank_one_project(V)
    z = sign_round(x_bar)
    gap = feasibility_gap(x_bar)
    if L_fhat is None:
        L_fhat = estimate_lipschitz_fhat(inst)
    bound = optimality_bound(trace, None, L_fhat, eps) if trace.records else None
    certificate = Certificate(
        x_bar=x_bar,
        z=z.tolist(),
        feas_gap=gap,
        rank_one_residual=rank_one_residual(V),
        env_obj_rounded=rounded_envelope_objective(inst, x_bar, trace.delta),
        true_obj=true_objective(inst, z),
        gap_bound=bound,
    )
    LOG.debug("Certificate: feasibility gap %g, objective %g", gap, certificate.true_obj)
    return certificate
