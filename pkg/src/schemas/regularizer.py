from pydantic import BaseModel, ConfigDict, Field


class RegularizerConfig(BaseModel):
    """
    Weights of the loss terms.

    All zero except ``lambda_nll`` is the plain CNF likelihood ("base").
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda_nll: float = Field(default=1.0, ge=0)
    lambda_e: float = Field(default=0.0, ge=0)
    lambda_j: float = Field(default=0.0, ge=0)
    lambda_d: float = Field(default=0.0, ge=0)
    h: float = Field(default=0.1, gt=0)
    k: int = Field(default=5, ge=1)
    lambda_v: float = Field(default=0.0, ge=0)
    growth_enabled: bool = False

    @property
    def needs_energy(self) -> bool:
        return self.lambda_e > 0

    @property
    def needs_jacnorm(self) -> bool:
        return self.lambda_j > 0
