"""
Training configuration and reports.

TrainConfig:
    - Optimizer and batching settings of one flow training run, with its regularizer and solver sections.
        - preset: ``desk`` (3000 iterations, batch 256) or ``paper`` (10000 iterations, batch 1000) fills
          ``iterations`` and ``batch_size`` when they are not given.
        - time_mode: how dataset labels map to model times (``index`` or ``explicit``).

GrowthTrainConfig:
    - Settings of the growth network regression.

RunConfig:
    - Everything a command-line run needs: a TrainConfig plus the growth, OT and evaluation sections.

IterationRecord / TrainReport:
    - One record per training iteration with the total loss and its terms.
"""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from schemas.evaluation import EvalConfig
from schemas.regularizer import RegularizerConfig
from schemas.solver import SolverConfig, evaluation_solver
from schemas.transport import UnbalancedOTConfig

PRESETS: dict[str, dict[str, int]] = {
    "desk": {"iterations": 3000, "batch_size": 256},
    "paper": {"iterations": 10000, "batch_size": 1000},
}


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    preset: Literal["desk", "paper"] = "desk"
    iterations: int = Field(default=3000, ge=0)
    batch_size: int = Field(default=256, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    weight_decay: float = Field(default=5e-5, ge=0)
    seed: int = 0
    log_every: int = Field(default=100, ge=0)
    time_mode: Literal["index", "explicit"] = "index"
    regularizer: RegularizerConfig = RegularizerConfig()
    solver: SolverConfig = SolverConfig()
    eval_solver: SolverConfig = Field(default_factory=evaluation_solver)

    @model_validator(mode="before")
    @classmethod
    def apply_preset(cls, data):
        if isinstance(data, dict):
            preset = data.get("preset", "desk")
            for key, default in PRESETS.get(preset, {}).items():
                data.setdefault(key, default)
        return data


class GrowthTrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    iterations: int = Field(default=1000, ge=0)
    batch_size: int = Field(default=256, gt=0)
    learning_rate: float = Field(default=1e-2, gt=0)
    weight_decay: float = Field(default=0.0, ge=0)
    seed: int = 0
    ot_points: int = Field(default=2000, gt=0)


class RunConfig(TrainConfig):
    growth: GrowthTrainConfig = GrowthTrainConfig()
    ot: UnbalancedOTConfig = UnbalancedOTConfig()
    eval: EvalConfig = EvalConfig()

    def train_config(self) -> TrainConfig:
        fields = {name: getattr(self, name) for name in TrainConfig.model_fields}
        return TrainConfig(**fields)


class IterationRecord(BaseModel):
    iteration: int
    total: float
    nll: float
    energy: float
    density: float
    velocity: float
    degenerate_velocity: int = 0


class TrainReport(BaseModel):
    records: list[IterationRecord] = []
    wall_time_s: float = 0.0
    seed: int = 0
    n_parameters: int = 0

    @property
    def totals(self) -> list[float]:
        return [record.total for record in self.records]
