"""
Expected format of toml-file::

    [solver]
    m = 5
    rho0 = 1.0        # or "auto"
    sigma = 1.2
    rho_max = 1e6
    eps_outer = 1e-3
    L_init = "auto"   # or a positive float
    warm_start = true
    column_scaling = true
    seed = 7

    [hashing]
    K = 5
    mu = 0.1
    delta_reg = 1.0

    [baseline]
    iters = 500
    restarts = 1

Every section and every key is optional. This is parsed into a dict of the
format::

    {
        "solver": {
            "m": 5,
            "rho0": 1.0,
            ...
        },
        "hashing": {
            "K": 5,
            ...
        },
        "baseline": {
            "iters": 500,
            "restarts": 1,
        },
    }
"""

import logging
from pathlib import Path

from ..compat import tomlload
from .utils import find_config_file


LOG = logging.getLogger(__name__)


def parse_toml_config(filename=None):
    """
    Read a config file into a dict

    An existing path is used as is, anything else is looked up with
    ``find_config_file``.
    """
    if filename is not None and Path(filename).is_file():
        full_filename = Path(filename)
    else:
        full_filename = find_config_file(filename)
    LOG.debug("Reading config from %s", full_filename)
    with open(full_filename, "rb") as TF:
        toml = tomlload(TF)
        return toml
