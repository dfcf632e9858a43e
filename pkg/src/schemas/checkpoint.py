from pydantic import BaseModel, ConfigDict, Field

from schemas.regularizer import RegularizerConfig
from schemas.solver import SolverConfig


class CheckpointMeta(BaseModel):
    """Scalar header of a checkpoint file; parameters are stored separately as hex-float blocks."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    format_version: int = 1
    dim: int = Field(ge=1)
    labels: tuple[float, ...]
    times: tuple[float, ...]
    time_mode: str = "index"
    held_out: float | None = None
    seed: int = 0
    iterations: int = Field(default=0, ge=0)
    slope: float = 0.01
    dynamics_hidden: tuple[int, ...] = (64, 64, 64)
    growth_hidden: tuple[int, ...] | None = None
    dataset: str = ""
    regularizer: RegularizerConfig = RegularizerConfig()
    solver: SolverConfig = SolverConfig()
    effective_config: dict[str, str] = {}
