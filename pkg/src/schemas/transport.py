"""
Optimal transport solver settings.

SinkhornConfig:
    - max_iter / tol: iteration limit and marginal-residual stopping threshold of balanced Sinkhorn.

UnbalancedOTConfig:
    - reg: entropic weight lambda.
    - alpha / beta: KL weights on the source / target marginals; ``inf`` enforces that marginal exactly.
    - max_iter / tol: iteration limit and potential-change stopping threshold.
"""
import math

from pydantic import BaseModel, ConfigDict, Field


class SinkhornConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_iter: int = Field(default=100000, gt=0)
    tol: float = Field(default=1e-9, gt=0)


class UnbalancedOTConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    reg: float = Field(default=0.1, gt=0)
    alpha: float = Field(default=1.0, gt=0)
    beta: float = Field(default=10000.0, gt=0)
    max_iter: int = Field(default=10000, gt=0)
    tol: float = Field(default=1e-9, gt=0)

    @property
    def balanced(self) -> bool:
        return math.isinf(self.alpha) and math.isinf(self.beta)
