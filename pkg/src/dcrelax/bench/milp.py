"""
Export an l1 (plus linear) instance as a mixed-integer LP file

With ``z = 2x - e`` and binary ``x`` each l1 row ``i`` gets a continuous
``t_i >= |u_i|``, ``u = A z - b``::

    min  sum_i w_i t_i + sum over linear rows of c_i u_i + offset
    s.t. t_i - u_i >= 0
         t_i + u_i >= 0
         x binary

The file is in CPLEX LP format with every number printed to 17 significant
digits, so exporting the same instance twice gives identical bytes.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from ..errors import UnsupportedLossError
from ..model import ProblemInstance
from ..prox import LossKind
from ..utils import SCHEMA_VERSION, emit_text, format_float


__all__ = [
    "milp_export",
]


LOG = logging.getLogger(__name__)

CONSTANT_NAME = "ONE_VAR_CONSTANT"


def _coefficient(value: float) -> str:
    if value == 0:
        value = 0.0
    return "%+.17g" % value


def _terms(coefficients: List[Tuple[float, str]]) -> List[str]:
    return [f"{_coefficient(c)} {name}\n" for c, name in coefficients if c != 0]


def _objective(inst: ProblemInstance) -> Tuple[np.ndarray, np.ndarray, float]:
    """Weights of the t variables, coefficients on x and the constant

    Returns ``(l1_weights, x_coefficients, constant)`` where ``l1_weights``
    maps every row to its weight (NaN for linear rows).
    """
    A = inst.A
    twice = 2.0 * A
    shift = A.sum(axis=1) + inst.b
    weights = np.full(inst.r, np.nan)
    x_coefficients = np.zeros(inst.n)
    constant = inst.offset
    for block, rows in inst.loss.iter_blocks():
        if block.kind == LossKind.L1:
            weights[rows] = block.weight
        elif block.kind == LossKind.LINEAR:
            c = block.coeffs
            x_coefficients += c @ twice[rows]
            constant -= float(c @ shift[rows])
        else:
            raise UnsupportedLossError(
                f"Cannot write a {block.kind} block as a linear program"
            )
    return weights, x_coefficients, constant


def milp_export(inst: ProblemInstance, path: Optional[str] = None) -> str:
    """Write ``inst`` as an LP file, returns the text

    Binaries are ``x1 .. xn`` with ``z_j = 2 x_j - 1``; the auxiliary
    continuous variables are ``t1 ..`` numbered by row. Without ``path`` the
    text is only returned.
    """
    weights, x_coefficients, constant = _objective(inst)
    l1_rows = [i for i in range(inst.r) if not np.isnan(weights[i])]
    x_names = [f"x{j + 1}" for j in range(inst.n)]
    twice = 2.0 * inst.A
    shift = inst.A.sum(axis=1) + inst.b

    output = [f"\\* dcrelax MILP export schema_version={SCHEMA_VERSION} *\\\n"]
    if inst.label:
        output.append(f"\\* instance {inst.label} *\\\n")
    output.append("\nmin \nobj:\n")
    objective = [(weights[i], f"t{i + 1}") for i in l1_rows]
    objective += list(zip(x_coefficients, x_names))
    lines = _terms(objective)
    use_constant = constant != 0 or not lines
    if use_constant:
        lines.append(f"{_coefficient(constant)} {CONSTANT_NAME}\n")
    output.extend(lines)
    output.append("\ns.t.\n\n")

    for i in l1_rows:
        row = list(zip(twice[i], x_names))
        for side, sign in (("lo", -1.0), ("hi", 1.0)):
            output.append(f"c_l_r{i + 1}_{side}_:\n")
            output.append(f"+1 t{i + 1}\n")
            output.extend(_terms([(sign * c, name) for c, name in row]))
            output.append(f">= {format_float(sign * shift[i])}\n\n")

    if use_constant:
        output.append(f"c_e_{CONSTANT_NAME}:\n{CONSTANT_NAME} = 1.0\n\n")

    output.append("bounds\n")
    for i in l1_rows:
        output.append(f"   0 <= t{i + 1} <= +inf\n")
    for name in x_names:
        output.append(f"   0 <= {name} <= 1\n")
    output.append("binary\n")
    for name in x_names:
        output.append(f"  {name}\n")
    output.append("end\n")

    text = emit_text("".join(output), path)
    if path is not None:
        LOG.debug("Wrote LP file %s (%i binaries, %i rows)", path, inst.n, len(l1_rows))
    return text
