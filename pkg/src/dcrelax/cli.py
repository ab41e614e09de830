"""
Command-line front end

Subcommands::

    dcrelax solve --gen random --n 50 --r 30 --seed 7
    dcrelax solve --instance instance.json --out result.json
    dcrelax bench suite.json --out results/ --jobs 4
    dcrelax sweep-bcs --N 100 --alphas 0.3 0.6 --rhos 0.1 0.5 --seeds 0 1 2
    dcrelax export-milp --instance instance.json --out instance.lp
    dcrelax hashing --d 8 --n 30 --r-bits 6 --seed 0

``solve`` exits with 0 when the feasibility gap was reached, 2 when the outer
iteration cap ran out and 3 when the inner loop stalled on the last outer
iteration. Malformed input gives exit code 1 everywhere.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ValidationError, field_validator

from .bench import (
    BcsGrid,
    BcsSpec,
    MethodKind,
    MethodSpec,
    gen_bcs,
    gen_random_l1,
    load_suite,
    milp_export,
    report_to_json,
    run_bench,
    sweep_bcs,
    write_rows_csv,
    zero_one_transform,
)
from .certificates import Certificate, certify
from .config import BaselineConfig, HashingConfig, SolverConfig, load_configs
from .errors import DcrelaxError
from .hashing import alternate, planted_hashing_problem, write_objective_trace_csv
from .model import ProblemInstance, exact_penalty_threshold, load_instance
from .solver import OuterTrace, Termination, solve, write_trace_csv
from .utils import SCHEMA_VERSION, check_schema_version, emit_text


__all__ = [
    "RunResult",
    "TraceSummary",
    "EXIT_CODES",
    "main",
]


LOG = logging.getLogger(__name__)

EXIT_CODES = {
    Termination.GAP_REACHED: 0,
    Termination.KMAX_EXCEEDED: 2,
    Termination.INNER_STALL: 3,
}
EXIT_MALFORMED = 1


class TraceSummary(BaseModel):
    termination: Termination
    outer_iterations: int
    inner_iterations: int
    warm_start_iterations: int = 0
    final_gap: float
    rho_final: float
    delta: float
    m: int
    exact_penalty_threshold: float

    @classmethod
    def from_trace(cls, inst: ProblemInstance, trace: OuterTrace) -> "TraceSummary":
        return cls(
            termination=trace.termination,
            outer_iterations=len(trace.records),
            inner_iterations=trace.total_inner_iterations,
            warm_start_iterations=trace.warm_start_iterations,
            final_gap=trace.final_gap,
            rho_final=trace.records[-1].rho if trace.records else trace.rho_next,
            delta=trace.delta,
            m=trace.m,
            exact_penalty_threshold=exact_penalty_threshold(inst),
        )


class Timings(BaseModel):
    solve_seconds: float
    certify_seconds: float


class RunResult(BaseModel):
    schema_version: str = SCHEMA_VERSION
    label: Optional[str] = None
    config: SolverConfig
    certificate: Certificate
    summary: TraceSummary
    timings: Timings

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, value):
        return check_schema_version(value, "result")

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=1)


class _Parser(argparse.ArgumentParser):
    "Usage errors exit with 1, 2 and 3 belong to solver outcomes"

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_MALFORMED, f"{self.prog}: error: {message}\n")


def _default(name: str):
    return SolverConfig.model_fields[name].default


def _float_or_auto(text: str):
    if text == "auto":
        return text
    return float(text)


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("solver")
    group.add_argument("--m", type=int, help=f"factorization rank (default: {_default('m')})")
    group.add_argument("--rho0", type=_float_or_auto,
                       help=f"initial penalty or 'auto' (default: {_default('rho0')})")
    group.add_argument("--sigma", type=float,
                       help=f"penalty growth factor (default: {_default('sigma')})")
    group.add_argument("--rho-max", dest="rho_max", type=float,
                       help=f"penalty cap (default: {_default('rho_max')})")
    group.add_argument("--delta", type=float,
                       help="smoothing parameter (default: from the instance)")
    group.add_argument("--eps-outer", dest="eps_outer", type=float,
                       help=f"feasibility gap target (default: {_default('eps_outer')})")
    group.add_argument("--eps-inner", dest="eps_inner", type=float,
                       help=f"inner step tolerance (default: {_default('eps_inner')})")
    group.add_argument("--l-max", dest="l_max", type=int,
                       help=f"inner iteration cap (default: {_default('l_max')})")
    group.add_argument("--no-warm-start", dest="warm_start", action="store_const", const=False,
                       help="start the penalty loop from the random point")
    group.add_argument("--no-column-scaling", dest="column_scaling", action="store_const",
                       const=False, help="one curvature for all columns")


def _add_instance_flags(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--instance", help="instance JSON file")
    source.add_argument("--gen", choices=("random", "bcs"), help="generate the instance")
    group = parser.add_argument_group("generator")
    group.add_argument("--n", type=int, default=20,
                       help="binary variables, N for bcs (default: %(default)s)")
    group.add_argument("--r", type=int, default=10,
                       help="rows of A, random only (default: %(default)s)")
    group.add_argument("--alpha", type=float, default=0.5,
                       help="bcs compression ratio M/N (default: %(default)s)")
    group.add_argument("--sparsity-rho", dest="sparsity_rho", type=float, default=0.1,
                       help="bcs sparsity rate (default: %(default)s)")
    group.add_argument("--bcs-mu", "--mu", dest="bcs_mu", type=float, default=0.0,
                       help="bcs bias (default: %(default)s)")
    group.add_argument("--lam", type=float, default=0.1,
                       help="bcs l1 weight (default: %(default)s)")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file (default: search for dcrelax.toml)")
    parser.add_argument("--out", help="output file (directory for bench), default stdout")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dcrelax", description="Binary l1 optimization by DC relaxation")
    commands = parser.add_subparsers(dest="command", required=True)

    solve_parser = commands.add_parser("solve", help="solve one instance and certify it")
    _add_instance_flags(solve_parser)
    _add_solver_flags(solve_parser)
    solve_parser.add_argument("--seed", type=int,
                              help="generator and start point seed (default: 0)")
    solve_parser.add_argument("--k-max", dest="k_max", type=int,
                              help=f"outer iteration cap (default: {_default('k_max')})")
    solve_parser.add_argument("--trace", help="write the outer trace as CSV here")
    _add_common_flags(solve_parser)

    bench_parser = commands.add_parser("bench", help="run a benchmark suite")
    bench_parser.add_argument("suite", help="suite JSON file")
    bench_parser.add_argument("--jobs", type=int, default=1,
                              help="worker threads (default: %(default)s)")
    _add_common_flags(bench_parser)

    sweep_parser = commands.add_parser("sweep-bcs", help="binary compressed sensing grid")
    sweep_parser.add_argument("--N", type=int, default=100, help="signal length (default: 100)")
    sweep_parser.add_argument("--alphas", type=float, nargs="+", default=[0.3, 0.6])
    sweep_parser.add_argument("--rhos", type=float, nargs="+", default=[0.1, 0.5],
                              help="sparsity rates")
    sweep_parser.add_argument("--mus", type=float, nargs="+", default=[0.0])
    sweep_parser.add_argument("--lam", type=float, default=0.1)
    sweep_parser.add_argument("--seeds", type=int, nargs="+", default=[0])
    sweep_parser.add_argument("--methods", nargs="+", default=["dcra", "baseline"],
                              choices=[kind.value for kind in MethodKind])
    sweep_parser.add_argument("--jobs", type=int, default=1)
    _add_common_flags(sweep_parser)

    milp_parser = commands.add_parser("export-milp", help="write an instance as an LP file")
    _add_instance_flags(milp_parser)
    milp_parser.add_argument("--seed", type=int, default=0)
    _add_common_flags(milp_parser)

    hashing_parser = commands.add_parser("hashing", help="planted supervised hashing run")
    hashing_parser.add_argument("--d", type=int, default=8, help="data dimension")
    hashing_parser.add_argument("--n", type=int, default=30, help="number of samples")
    hashing_parser.add_argument("--r-bits", dest="r_bits", type=int, default=6)
    hashing_parser.add_argument("--noise-rate", dest="noise_rate", type=float, default=0.1)
    hashing_parser.add_argument("--seed", type=int, default=0)
    hashing_parser.add_argument("--K", type=int, help="alternation rounds (default: 5)")
    hashing_parser.add_argument("--mu", type=float, help="Huber parameter (default: 0.1)")
    hashing_parser.add_argument("--delta-reg", dest="delta_reg", type=float,
                                help="ridge weight (default: 1.0)")
    hashing_parser.add_argument("--k-max", dest="k_max", type=int,
                                help="outer iteration cap per column (default: 50)")
    hashing_parser.add_argument("--jobs", type=int, default=1)
    _add_solver_flags(hashing_parser)
    _add_common_flags(hashing_parser)
    return parser


def _configs(args, hashing: bool = False):
    "Command line values override the file, hashing values only for the hashing command"
    solver_config, hashing_config, baseline_config = load_configs(
        args.config, required=args.config is not None
    )
    solver_config.update_from_args(args)
    if hashing:
        hashing_config.update_from_args(args)
    return solver_config, hashing_config, baseline_config


def _instance(args) -> ProblemInstance:
    if args.instance:
        return load_instance(args.instance)
    seed = args.seed if args.seed is not None else 0
    if args.gen == "random":
        return gen_random_l1(args.r, args.n, seed)
    spec = BcsSpec(N=args.n, alpha=args.alpha, rho=args.sparsity_rho, mu=args.bcs_mu,
                   lam=args.lam, seed=seed)
    model, _ = gen_bcs(spec)
    return zero_one_transform(model)


def cmd_solve(args) -> int:
    solver_config, _, _ = _configs(args)
    inst = _instance(args)
    started = time.perf_counter()
    V, trace = solve(inst, solver_config)
    solved = time.perf_counter()
    certificate = certify(inst, V, trace)
    result = RunResult(
        label=inst.label,
        config=solver_config,
        certificate=certificate,
        summary=TraceSummary.from_trace(inst, trace),
        timings=Timings(
            solve_seconds=solved - started,
            certify_seconds=time.perf_counter() - solved,
        ),
    )
    _emit(result.to_json() + "\n", args.out)
    if args.trace:
        write_trace_csv(trace, args.trace)
    return EXIT_CODES[trace.termination]


def cmd_bench(args) -> int:
    solver_config, _, baseline_config = _configs(args)
    suite = load_suite(args.suite)
    report = run_bench(suite, args.jobs, solver_config, baseline_config)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(report, str(out / "rows.csv"))
        emit_text(report_to_json(report) + "\n", str(out / "report.json"))
    else:
        sys.stdout.write(report_to_json(report) + "\n")
    return 0


def cmd_sweep_bcs(args) -> int:
    solver_config, _, baseline_config = _configs(args)
    grid = BcsGrid(N=args.N, alphas=args.alphas, sparsity_rhos=args.rhos, mus=args.mus,
                   lam=args.lam)
    methods = [MethodSpec(name=kind, kind=kind) for kind in args.methods]
    report = sweep_bcs(grid, args.seeds, methods, args.jobs, solver_config, baseline_config)
    _emit(write_rows_csv(report), args.out)
    return 0


def cmd_export_milp(args) -> int:
    inst = _instance(args)
    _emit(milp_export(inst), args.out)
    return 0


def cmd_hashing(args) -> int:
    solver_config, hashing_config, _ = _configs(args, hashing=True)
    fields = {"K": hashing_config.K, "mu": hashing_config.mu,
              "delta_reg": hashing_config.delta_reg}
    problem, _, _ = planted_hashing_problem(args.d, args.n, args.r_bits, args.noise_rate,
                                            args.seed, **fields)
    result = alternate(problem, args.seed, hashing_config, solver_config, args.jobs)
    _emit(write_objective_trace_csv(result.trace), args.out)
    return 0


def _emit(text: str, out: Optional[str]) -> None:
    emit_text(text, out if out else sys.stdout)


COMMANDS = {
    "solve": cmd_solve,
    "bench": cmd_bench,
    "sweep-bcs": cmd_sweep_bcs,
    "export-milp": cmd_export_milp,
    "hashing": cmd_hashing,
}


def _report_malformed(error: Exception) -> int:
    if isinstance(error, json.JSONDecodeError):
        message = f"line {error.lineno} column {error.colno}: {error.msg}"
    elif isinstance(error, ValidationError):
        problems = [
            f"{'.'.join(str(part) for part in detail['loc']) or '<root>'}: {detail['msg']}"
            for detail in error.errors()
        ]
        message = "; ".join(problems)
    else:
        message = str(error)
    sys.stderr.write(f"dcrelax: malformed input: {message}\n")
    return EXIT_MALFORMED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (json.JSONDecodeError, ValidationError, OSError, DcrelaxError, ValueError) as e:
        return _report_malformed(e)
