from .certificates import Certificate, certify, sign_round
from .config import SolverConfig
from .errors import DcrelaxError
from .model import FactorizedPoint, ProblemInstance, load_instance, true_objective
from .prox import LossBlock, SeparableLoss
from .solver import OuterTrace, Termination, solve

__all__ = [
    "Certificate",
    "certify",
    "sign_round",
    "SolverConfig",
    "DcrelaxError",
    "FactorizedPoint",
    "ProblemInstance",
    "load_instance",
    "true_objective",
    "LossBlock",
    "SeparableLoss",
    "OuterTrace",
    "Termination",
    "solve",
]


try:
    from .version import version as __version__
except ImportError:
    # not installed through setuptools_scm, ask the package metadata
    from importlib.metadata import PackageNotFoundError, version

    __version__ = "main"  # fallback
    try:
        __version__ = version("dcrelax")
    except PackageNotFoundError:
        pass
