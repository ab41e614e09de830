from .generators import BcsSpec, ZeroOneModel, gen_bcs, gen_random_l1
from .harness import (
    BcsGrid,
    BenchReport,
    BenchRow,
    MethodKind,
    MethodSpec,
    Suite,
    load_suite,
    report_to_json,
    run_bench,
    sweep_bcs,
    write_rows_csv,
)
from .milp import milp_export
from .oracles import (
    OracleResult,
    brute_force_oracle,
    naive_enumeration,
    projected_subgradient_baseline,
)
from .transforms import augment_linear, to_signs, to_zero_one, zero_one_transform
