"""
ODE solver settings.

SolverConfig:
    - method: ``rk4`` (fixed step, used for training) or ``dopri5`` (adaptive, used for evaluation).
    - rtol / atol: error tolerances of dopri5.
    - step_size: rk4 step length in model time units (20 steps per unit time by default).
    - max_steps: hard limit on accepted + rejected steps of one integrate call.
    - trace_limit: largest dimension for which the exact Jacobian trace is computed.
"""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    method: Literal["rk4", "dopri5"] = "rk4"
    rtol: float = Field(default=1e-5, gt=0)
    atol: float = Field(default=1e-5, gt=0)
    step_size: float = Field(default=0.05, gt=0)
    max_steps: int = Field(default=10000, gt=0)
    trace_limit: int = Field(default=10, ge=1)


def evaluation_solver() -> SolverConfig:
    return SolverConfig(method="dopri5", rtol=1e-5, atol=1e-5)
