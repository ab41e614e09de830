# mypy: ignore-errors
import sys

if sys.version_info >= (3, 11):
    from enum import StrEnum
    from tomllib import load as tomlload
else:
    from enum import Enum

    class StrEnum(str, Enum):
        "Members are their values, ``str(Termination.GAP_REACHED) == 'gap-reached'``"
        __str__ = str.__str__
        __format__ = str.__format__

    try:
        from tomli import load as tomlload
    except ImportError:
        def tomlload(fp, **kwargs):
            raise ImportError("Reading config files needs tomli on Python < 3.11")


__all__ = ["StrEnum", "tomlload"]
