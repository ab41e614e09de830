import concurrent.futures
import functools
import logging
from typing import Annotated, Optional, Sequence, TextIO, Union

import numpy as np
from pydantic.functional_serializers import PlainSerializer
from pydantic.functional_validators import BeforeValidator

from .errors import DimensionError, SchemaVersionError


__all__ = [
    "SCHEMA_VERSION",
    "FloatVector",
    "FloatMatrix",
    "as_float_array",
    "check_schema_version",
    "format_float",
    "make_rng",
    "log_read_failure",
    "parallel_map",
    "emit_text",
]


# Shared by every JSON/CSV document the package writes
SCHEMA_VERSION = "1.0"
SUPPORTED_MAJOR = 1

SeedLike = Union[int, Sequence[int]]


def as_float_array(value, ndim: int, name: str = "array") -> np.ndarray:
    """Convert ``value`` to a read-only float64 array of exactly ``ndim`` dims

    Raises DimensionError on the wrong number of dimensions and ValueError on
    NaN/Inf entries.
    """
    array = np.array(value, dtype=float)
    if array.ndim != ndim:
        raise DimensionError(f"{name} must have {ndim} dimension(s), got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    array.setflags(write=False)
    return array


FloatVector = Annotated[
    np.ndarray,
    BeforeValidator(lambda v: as_float_array(v, 1, "vector")),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]
FloatMatrix = Annotated[
    np.ndarray,
    BeforeValidator(lambda v: as_float_array(v, 2, "matrix")),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]


def check_schema_version(version: str, kind: str = "document") -> str:
    "Reject documents whose major schema version we do not understand"
    try:
        major = int(str(version).split(".", 1)[0])
    except ValueError as e:
        raise SchemaVersionError(f'Malformed {kind} schema version "{version}"') from e
    if major != SUPPORTED_MAJOR:
        raise SchemaVersionError(
            f'Unsupported {kind} schema version "{version}", expected {SUPPORTED_MAJOR}.x'
        )
    return str(version)


def format_float(value: float) -> str:
    """17 significant digits, never "-0"

    Output is stable across runs, which keeps exported files diffable.
    """
    if value == 0:
        value = 0.0
    return "%.17g" % value


def make_rng(seed: SeedLike, index: Optional[int] = None) -> np.random.Generator:
    """A numpy Generator for ``seed``, or for task ``index`` under ``seed``

    Per-task streams are derived through SeedSequence so they never overlap,
    whatever order tasks finish in.
    """
    if isinstance(seed, (int, np.integer)):
        entropy = [int(seed)]
    else:
        entropy = [int(s) for s in seed]
    if index is not None:
        entropy.append(int(index))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def log_read_failure(logger, what: str, reraise: bool = True, default=None):
    """Decorate a reader taking a path so failures name the file

    The error is logged with the kind of document (``what``) and the path,
    the traceback only when ``logger`` is at DEBUG. With ``reraise`` False
    ``default`` is returned instead.
    """
    def decorate(reader):
        @functools.wraps(reader)
        def read(path, *args, **kwargs):
            try:
                return reader(path, *args, **kwargs)
            except Exception as e:
                logger.error(
                    "Reading %s from %s failed: %s: %s", what, path, type(e).__name__, e,
                    exc_info=logger.isEnabledFor(logging.DEBUG),
                )
                if reraise:
                    raise
                return default
        return read
    return decorate


def parallel_map(function, items, jobs: int = 1) -> list:
    "``list(map(function, items))``, on ``jobs`` threads when ``jobs > 1``"
    items = list(items)
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1 or len(items) < 2:
        return [function(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as executor:
        # results come back in submission order
        return list(executor.map(function, items))


def emit_text(text: str, out: Union[str, TextIO, None] = None) -> str:
    "Write ``text`` to a path or an open file, None just returns it"
    if isinstance(out, str):
        with open(out, "w", encoding="utf-8", newline="") as F:
            F.write(text)
    elif out is not None:
        out.write(text)
    return text
