"""
Batch runs of several methods over generated instances

A suite lists instance sizes (random l1) and/or a BCS grid, the seeds and the
methods. Every (instance, method) pair becomes one ``BenchRow``; a method that
fails on an instance gives a row with ``status="failed"`` and the run goes on.

Aggregates per DCRA method and competitor:

* win rate: share of common instances where DCRA's objective is not worse
* mean relative difference: mean of ``(obj_dcra - obj_other) / obj_other``

Suite format (JSON)::

    {
        "schema_version": "1.0",
        "sizes": [{"rows": 100, "cols": 50}],
        "seeds": [0, 1, 2],
        "methods": [
            {"name": "dcra", "kind": "dcra"},
            {"name": "dcra-m20", "kind": "dcra", "overrides": {"m": 20}},
            {"name": "subgradient", "kind": "baseline"}
        ],
        "bcs_grid": {"N": 100, "alphas": [0.3], "rhos": [0.1], "mus": [0]}
    }

``sizes`` uses (rows, cols) of ``A``, so a table keyed on (n, d) for an
``n x d`` matrix maps to ``rows=n``, ``cols=d`` with ``d`` binary variables.
"""

import csv
import io
import json
import logging
import time
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, TextIO, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..certificates import feasibility_gap, rank_one_project, sign_round
from ..compat import StrEnum
from ..config import BaselineConfig, SolverConfig
from ..model import ProblemInstance, true_objective
from ..solver import solve
from ..utils import (
    SCHEMA_VERSION,
    check_schema_version,
    emit_text,
    format_float,
    log_read_failure,
    make_rng,
    parallel_map,
)
from .generators import BcsSpec, gen_bcs, gen_random_l1
from .oracles import brute_force_oracle, projected_subgradient_baseline
from .transforms import to_zero_one, zero_one_transform


__all__ = [
    "MethodKind",
    "MethodSpec",
    "InstanceSize",
    "BcsGrid",
    "Suite",
    "BenchRow",
    "MethodSummary",
    "Comparison",
    "BenchReport",
    "run_bench",
    "sweep_bcs",
    "load_suite",
    "write_rows_csv",
    "report_to_json",
]


LOG = logging.getLogger(__name__)

WIN_TOLERANCE = 1e-9


class MethodKind(StrEnum):
    DCRA = "dcra"
    BASELINE = "baseline"
    ORACLE = "oracle"


class MethodSpec(BaseModel):
    name: str
    kind: MethodKind
    # DCRA: SolverConfig fields, baseline: BaselineConfig fields, oracle: n_cap
    overrides: Dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True)


class InstanceSize(BaseModel):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)


class BcsGrid(BaseModel):
    N: int = Field(ge=1)
    alphas: List[float]
    sparsity_rhos: List[float] = Field(alias="rhos")
    mus: List[float] = Field(default_factory=lambda: [0.0])
    lam: float = Field(0.1, gt=0.0, alias="lambda")

    model_config = ConfigDict(populate_by_name=True)

    def specs(self, seeds: List[int]) -> Iterator[BcsSpec]:
        for mu in self.mus:
            for alpha in self.alphas:
                for rho in self.sparsity_rhos:
                    for seed in seeds:
                        yield BcsSpec(N=self.N, alpha=alpha, rho=rho, mu=mu, lam=self.lam,
                                      seed=seed)


class Suite(BaseModel):
    schema_version: str = SCHEMA_VERSION
    sizes: List[InstanceSize] = Field(default_factory=list)
    seeds: List[int] = Field(default_factory=lambda: [0])
    methods: List[MethodSpec]
    bcs_grid: Optional[BcsGrid] = None
    # master seed of the per-instance solver and baseline streams
    seed: int = Field(0, ge=0)

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, value):
        return check_schema_version(value, "suite")

    @field_validator("methods")
    @classmethod
    def _unique_names(cls, value):
        names = [method.name for method in value]
        if len(set(names)) != len(names):
            raise ValueError(f"Method names must be unique, got {names}")
        if not value:
            raise ValueError("A suite needs at least one method")
        return value


class BenchRow(BaseModel):
    index: int
    label: str
    method: str
    kind: MethodKind
    status: str = "ok"
    objective: Optional[float] = None
    seconds: float = 0.0
    rows: Optional[int] = None
    cols: Optional[int] = None
    seed: Optional[int] = None
    alpha: Optional[float] = None
    sparsity_rho: Optional[float] = None
    mu: Optional[float] = None
    mse: Optional[float] = None
    hamming: Optional[int] = None
    rel_gap: Optional[float] = None
    termination: Optional[str] = None
    feas_gap: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class MethodSummary(BaseModel):
    name: str
    kind: MethodKind
    count: int
    failures: int
    avg_objective: Optional[float] = None
    avg_seconds: Optional[float] = None
    avg_mse: Optional[float] = None
    avg_hamming: Optional[float] = None


class Comparison(BaseModel):
    method: str
    against: str
    instances: int
    win_rate: Optional[float] = None
    mean_rel_diff: Optional[float] = None


class BenchReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    rows: List[BenchRow]
    methods: List[MethodSummary]
    comparisons: List[Comparison]

    def comparison(self, method: str, against: str) -> Optional[Comparison]:
        for comparison in self.comparisons:
            if comparison.method == method and comparison.against == against:
                return comparison
        return None

    def summary(self, name: str) -> Optional[MethodSummary]:
        for summary in self.methods:
            if summary.name == name:
                return summary
        return None


class _Task(NamedTuple):
    index: int
    size: Optional[InstanceSize]
    bcs: Optional[BcsSpec]
    seed: int


def _tasks(suite: Suite) -> List[_Task]:
    tasks = []
    for size in suite.sizes:
        for seed in suite.seeds:
            tasks.append(_Task(len(tasks), size, None, seed))
    if suite.bcs_grid is not None:
        for spec in suite.bcs_grid.specs(suite.seeds):
            tasks.append(_Task(len(tasks), None, spec, spec.seed))
    return tasks


def _build(task: _Task) -> Tuple[ProblemInstance, Optional[np.ndarray], Dict[str, Any]]:
    if task.bcs is not None:
        model, x0 = gen_bcs(task.bcs)
        fields = {
            "rows": model.M,
            "cols": model.N,
            "seed": task.seed,
            "alpha": task.bcs.alpha,
            "sparsity_rho": task.bcs.rho,
            "mu": task.bcs.mu,
        }
        return zero_one_transform(model), x0, fields
    inst = gen_random_l1(task.size.rows, task.size.cols, task.seed)
    fields = {"rows": task.size.rows, "cols": task.size.cols, "seed": task.seed}
    return inst, None, fields


def _run_method(
    method: MethodSpec,
    inst: ProblemInstance,
    method_seed: int,
    solver_config: SolverConfig,
    baseline_config: BaselineConfig,
) -> Tuple[np.ndarray, Dict[str, Any]]:
    if method.kind == MethodKind.DCRA:
        overrides = {"seed": method_seed, **method.overrides}
        cfg = solver_config.with_overrides(**overrides)
        V, trace = solve(inst, cfg, instrument=False)
        x_bar = rank_one_project(V)
        extra = {"termination": str(trace.termination), "feas_gap": feasibility_gap(x_bar)}
        return sign_round(x_bar), extra
    if method.kind == MethodKind.BASELINE:
        seed = method.overrides.get("seed", method_seed)
        options = {k: v for k, v in method.overrides.items() if k != "seed"}
        cfg = baseline_config.with_overrides(**options)
        result = projected_subgradient_baseline(inst, cfg.iters, seed, cfg.restarts)
        return result.z, {}
    result = brute_force_oracle(inst, **method.overrides)
    return result.z, {}


def _run_task(
    task: _Task,
    suite: Suite,
    solver_config: SolverConfig,
    baseline_config: BaselineConfig,
) -> List[BenchRow]:
    inst, x0, fields = _build(task)
    rng = make_rng(suite.seed, task.index)
    rows = []
    for method in suite.methods:
        method_seed = int(rng.integers(2**63))
        started = time.perf_counter()
        try:
            z, extra = _run_method(method, inst, method_seed, solver_config, baseline_config)
        except Exception as e:
            LOG.exception("%s failed on %s", method.name, inst.label or task.index)
            rows.append(BenchRow(
                index=task.index,
                label=inst.label or str(task.index),
                method=method.name,
                kind=method.kind,
                status="failed",
                seconds=time.perf_counter() - started,
                error=f"{type(e).__name__}: {e}",
                **fields,
            ))
            continue
        seconds = time.perf_counter() - started
        if x0 is not None:
            x = to_zero_one(z)
            extra["mse"] = float(np.sum((x - x0) ** 2) / x0.shape[0])
            extra["hamming"] = int(np.sum(x != x0))
        rows.append(BenchRow(
            index=task.index,
            label=inst.label or str(task.index),
            method=method.name,
            kind=method.kind,
            objective=true_objective(inst, z),
            seconds=seconds,
            **fields,
            **extra,
        ))
    _fill_oracle_gaps(rows)
    return rows


def _fill_oracle_gaps(rows: List[BenchRow]) -> None:
    "Relative gap to the oracle optimum on the same instance, if there is one"
    optimum = next(
        (row.objective for row in rows if row.kind == MethodKind.ORACLE and row.ok), None
    )
    if optimum is None or optimum == 0:
        return
    for row in rows:
        if row.ok:
            row.rel_gap = (row.objective - optimum) / optimum


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def _summaries(suite: Suite, rows: List[BenchRow]) -> List[MethodSummary]:
    summaries = []
    for method in suite.methods:
        mine = [row for row in rows if row.method == method.name]
        ok = [row for row in mine if row.ok]
        summaries.append(MethodSummary(
            name=method.name,
            kind=method.kind,
            count=len(ok),
            failures=len(mine) - len(ok),
            avg_objective=_mean([row.objective for row in ok]),
            avg_seconds=_mean([row.seconds for row in ok]),
            avg_mse=_mean([row.mse for row in ok if row.mse is not None]),
            avg_hamming=_mean([row.hamming for row in ok if row.hamming is not None]),
        ))
    return summaries


def _comparisons(suite: Suite, rows: List[BenchRow]) -> List[Comparison]:
    objectives: Dict[str, Dict[int, float]] = {method.name: {} for method in suite.methods}
    for row in rows:
        if row.ok:
            objectives[row.method][row.index] = row.objective
    comparisons = []
    for method in suite.methods:
        if method.kind != MethodKind.DCRA:
            continue
        mine = objectives[method.name]
        for other in suite.methods:
            if other.name == method.name:
                continue
            theirs = objectives[other.name]
            common = sorted(set(mine) & set(theirs))
            wins = [
                mine[i] <= theirs[i] + WIN_TOLERANCE * (1.0 + abs(theirs[i])) for i in common
            ]
            differences = [(mine[i] - theirs[i]) / theirs[i] for i in common if theirs[i] != 0]
            comparisons.append(Comparison(
                method=method.name,
                against=other.name,
                instances=len(common),
                win_rate=_mean(wins),
                mean_rel_diff=_mean(differences),
            ))
    return comparisons


def run_bench(
    suite: Suite,
    jobs: int = 1,
    solver_config: Optional[SolverConfig] = None,
    baseline_config: Optional[BaselineConfig] = None,
) -> BenchReport:
    """
    Run every method of ``suite`` on every instance

    Each instance is its own task with its own random stream, so rows and
    aggregates do not depend on ``jobs``.
    """
    solver_config = solver_config or SolverConfig()
    baseline_config = baseline_config or BaselineConfig()
    tasks = _tasks(suite)
    LOG.debug("Running %i instances x %i methods on %i thread(s)",
              len(tasks), len(suite.methods), jobs)

    def run(task):
        return _run_task(task, suite, solver_config, baseline_config)

    rows = [row for task_rows in parallel_map(run, tasks, jobs) for row in task_rows]
    return BenchReport(
        rows=rows,
        methods=_summaries(suite, rows),
        comparisons=_comparisons(suite, rows),
    )


def sweep_bcs(
    grid: BcsGrid,
    seeds: List[int],
    methods: List[MethodSpec],
    jobs: int = 1,
    solver_config: Optional[SolverConfig] = None,
    baseline_config: Optional[BaselineConfig] = None,
) -> BenchReport:
    "One row per (mu, alpha, rho, seed, method)"
    suite = Suite(seeds=seeds, methods=methods, bcs_grid=grid)
    return run_bench(suite, jobs, solver_config, baseline_config)


@log_read_failure(LOG, "suite")
def load_suite(path) -> Suite:
    with open(path, encoding="utf-8") as F:
        return Suite.model_validate(json.load(F))


BENCH_COLUMNS = (
    "index", "label", "method", "kind", "status", "rows", "cols", "seed", "alpha",
    "sparsity_rho", "mu", "objective", "rel_gap", "mse", "hamming", "feas_gap",
    "termination", "seconds",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_rows_csv(report: BenchReport, out: Union[str, TextIO, None] = None) -> str:
    "Long format, one row per (instance, method); returns the text"
    buffer = io.StringIO()
    buffer.write(f"# dcrelax bench rows schema_version={SCHEMA_VERSION}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for row in report.rows:
        writer.writerow([_cell(getattr(row, column)) for column in BENCH_COLUMNS])
    return emit_text(buffer.getvalue(), out)


def report_to_json(report: BenchReport, include_rows: bool = False) -> str:
    "Aggregates as JSON, missing aggregates are left out"
    exclude = None if include_rows else {"rows"}
    document = report.model_dump(mode="json", exclude=exclude, exclude_none=True)
    return json.dumps(document, indent=1)
