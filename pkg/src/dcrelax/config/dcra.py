from typing import Any, ClassVar, Dict

from pydantic import BaseModel, model_validator

from . import toml
from .models import (
    AlternationOptions,
    BaselineOptions,
    Factorization,
    PenaltySchedule,
    Tolerances,
)


__all__ = [
    "SolverConfig",
    "HashingConfig",
    "BaselineConfig",
    "load_configs",
]


class SectionConfig(BaseModel):
    """
    Shared loading machinery, one config class per toml section

    How to use::

    With a toml-file stored on disk, sections and keys all optional::

        > config = SolverConfig.from_toml()

    From an already parsed dict::

        > config = SolverConfig.from_dict({"solver": {"m": 10}})

    Read some command-line arguments via argparse.ArgumentParser and update the
    config::

        > config.update_from_args(args)
    """
    DEFAULT_SECTION: ClassVar[str] = ""

    @classmethod
    def from_dict(cls, config_dict, section=None):
        section = section or cls.DEFAULT_SECTION
        options = config_dict.get(section, {}) or {}
        return cls(**options)

    @classmethod
    def from_toml(cls, filename=None, section=None):
        config_dict = toml.parse_toml_config(filename)
        return cls.from_dict(config_dict, section)

    def with_overrides(self, **overrides):
        "Validated copy with some fields replaced"
        values = self.model_dump()
        values.update(overrides)
        return type(self).model_validate(values)

    def update_from_args(self, args):
        """
        Assumes argparse-style args namespace object

        arg-names not found in the config-object are ignored, so are args that
        were not given (None). The result is validated as a whole.
        """
        updates: Dict[str, Any] = {}
        for arg in vars(args):
            value = getattr(args, arg, None)
            if value is not None and arg in type(self).model_fields:
                updates[arg] = value
        checked = self.with_overrides(**updates)
        for name in updates:
            setattr(self, name, getattr(checked, name))


class SolverConfig(Factorization, PenaltySchedule, Tolerances, SectionConfig):
    "Every tunable of the outer penalty loop and the inner solver"
    DEFAULT_SECTION: ClassVar[str] = "solver"

    @model_validator(mode="after")
    def _rho0_below_rho_max(self):
        if self.rho0 != "auto" and self.rho0 > self.rho_max:
            raise ValueError(f"rho0 ({self.rho0}) must not exceed rho_max ({self.rho_max})")
        return self


class HashingConfig(AlternationOptions, SectionConfig):
    DEFAULT_SECTION: ClassVar[str] = "hashing"

    # per-column solves in the X-step
    k_max: int = 50


class BaselineConfig(BaselineOptions, SectionConfig):
    DEFAULT_SECTION: ClassVar[str] = "baseline"


def load_configs(filename=None, required=False):
    """
    Read all three sections from one file

    Without ``required`` a missing default file just means "use defaults".
    """
    try:
        config_dict = toml.parse_toml_config(filename)
    except FileNotFoundError:
        if required:
            raise
        config_dict = {}
    return (
        SolverConfig.from_dict(config_dict),
        HashingConfig.from_dict(config_dict),
        BaselineConfig.from_dict(config_dict),
    )
