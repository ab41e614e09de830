from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, PositiveFloat, PositiveInt


class PenaltySchedule(BaseModel):
    # "auto" scales the first penalty to the loss, see dcrelax.solver.auto_penalty
    rho0: Union[PositiveFloat, Literal["auto"]] = 1.0
    sigma: float = Field(1.2, gt=1.0)
    rho_max: PositiveFloat = 1e6
    # first minimize the unpenalized smooth term from the random start
    warm_start: bool = True


class Tolerances(BaseModel):
    eps_outer: float = Field(1e-3, gt=0.0, lt=1.0)
    eps_inner: PositiveFloat = 1e-6
    k_max: PositiveInt = 200
    l_max: PositiveInt = 2000


class Factorization(BaseModel):
    m: int = Field(5, ge=2)
    # None means "pick from the instance", see dcrelax.model.default_delta
    delta: Optional[PositiveFloat] = None
    L_init: Union[PositiveFloat, Literal["auto"]] = "auto"
    # per-column curvature in the inner update, column 0 couples to all others
    column_scaling: bool = True
    seed: int = Field(0, ge=0, lt=2**64)


class AlternationOptions(BaseModel):
    K: int = Field(5, ge=0)
    mu: PositiveFloat = 0.1
    delta_reg: PositiveFloat = 1.0
    w_tol: PositiveFloat = 1e-6
    w_max_iter: PositiveInt = 500


class BaselineOptions(BaseModel):
    iters: PositiveInt = 500
    restarts: PositiveInt = 1
