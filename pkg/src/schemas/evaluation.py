"""
Evaluation settings and reports.

EvalConfig:
    - n_eval: sample count on each side of an EMD comparison.
    - n_traj: number of ground-truth trajectories scored by trajectory MSE.
    - seeds: evaluation seeds; tables report the mean over them.
    - emd_order: ground-cost exponent p of the reported EMD.
    - ot_subsample: cap on the next-timepoint sample used by the OT baseline coupling.

EvalRecord:
    - One cell of a report: dataset, method, held_out_time, seed, emd, mse, wall_time_s and an error message when the cell failed.

EvalReport:
    - All records of a run plus the flattened effective configuration that produced them.
"""
import math
from collections import defaultdict

from pydantic import BaseModel, ConfigDict, Field

REPORT_COLUMNS = ("dataset", "method", "held_out_time", "seed", "emd", "mse", "wall_time_s", "error")


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_eval: int = Field(default=1000, gt=0)
    n_traj: int = Field(default=5000, gt=0)
    seeds: tuple[int, ...] = (0, 1, 2)
    emd_order: int = Field(default=1, ge=1, le=2)
    ot_subsample: int = Field(default=1000, gt=0)


class EvalRecord(BaseModel):
    dataset: str
    method: str
    held_out_time: float
    seed: int
    emd: float = math.nan
    mse: float = math.nan
    wall_time_s: float = 0.0
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


class CellSummary(BaseModel):
    dataset: str
    method: str
    held_out_time: float
    emd: float
    mse: float
    n_seeds: int
    failed: int


class EvalReport(BaseModel):
    records: list[EvalRecord] = []
    config: dict[str, str] = {}

    def summary(self) -> list[CellSummary]:
        """Mean EMD and MSE per (dataset, method, held-out time) over the successful seeds."""
        groups: dict[tuple, list[EvalRecord]] = defaultdict(list)
        for record in self.records:
            groups[(record.dataset, record.method, record.held_out_time)].append(record)
        cells = []
        for (dataset, method, held_out), records in groups.items():
            ok = [r for r in records if not r.failed]
            emds = [r.emd for r in ok if not math.isnan(r.emd)]
            mses = [r.mse for r in ok if not math.isnan(r.mse)]
            cells.append(
                CellSummary(
                    dataset=dataset,
                    method=method,
                    held_out_time=held_out,
                    emd=sum(emds) / len(emds) if emds else math.nan,
                    mse=sum(mses) / len(mses) if mses else math.nan,
                    n_seeds=len(ok),
                    failed=len(records) - len(ok),
                )
            )
        return cells

    def cell(self, dataset: str, method: str) -> CellSummary:
        for summary in self.summary():
            if summary.dataset == dataset and summary.method == method:
                return summary
        raise KeyError(f"no cell for dataset '{dataset}' and method '{method}'")
