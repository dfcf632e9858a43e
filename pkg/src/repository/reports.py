"""
Evaluation reports: a CSV of every cell and an aligned text table of the means over seeds.
"""
import io
import logging
import math
from pathlib import Path

import pandas as pd

from config.config import settings
from config.runconfig import dump_assignments
from schemas.evaluation import REPORT_COLUMNS, EvalRecord, EvalReport
from utils.files import atomic_write

logger = logging.getLogger(f"{settings.app_name}.{__name__}")

MISSING = "--"


def report_frame(report: EvalReport) -> pd.DataFrame:
    return pd.DataFrame([record.model_dump() for record in report.records], columns=list(REPORT_COLUMNS))


def save_report(report: EvalReport, path: Path | str) -> None:
    """
    Write the report CSV; the effective configuration goes to a ``.conf`` file next to it.

    :param report: evaluation records.
    :type report: EvalReport
    :param path: CSV destination.
    :type path: Path | str
    """
    path = Path(path)
    buffer = io.StringIO()
    report_frame(report).to_csv(buffer, index=False, float_format="%.6g", lineterminator="\n")
    atomic_write(path, buffer.getvalue())
    if report.config:
        atomic_write(path.with_suffix(".conf"), dump_assignments(report.config))
    failed = sum(record.failed for record in report.records)
    logger.info(f"saved report with {len(report.records)} cells ({failed} failed) to {path}")


def load_report(path: Path | str) -> EvalReport:
    frame = pd.read_csv(path, dtype={"dataset": str, "method": str, "error": str})
    frame["error"] = frame["error"].fillna("")
    return EvalReport(records=[EvalRecord(**row) for row in frame.to_dict(orient="records")])


def _cell(value: float) -> str:
    return MISSING if math.isnan(value) else f"{value:.3f}"


def format_table(report: EvalReport) -> str:
    """
    Aligned text table: one row per method, EMD and MSE columns per dataset.

    Cells without a successful seed show ``--``; cells with failed seeds are marked ``*``.
    """
    summary = report.summary()
    datasets = list(dict.fromkeys(cell.dataset for cell in summary))
    methods = list(dict.fromkeys(cell.method for cell in summary))
    header = ["method"] + [f"{name} {metric}" for name in datasets for metric in ("EMD", "MSE")]
    rows = [header]
    lookup = {(cell.dataset, cell.method): cell for cell in summary}
    for method in methods:
        row = [method]
        for name in datasets:
            cell = lookup.get((name, method))
            if cell is None:
                row.extend([MISSING, MISSING])
                continue
            mark = "*" if cell.failed else ""
            row.extend([_cell(cell.emd) + mark, _cell(cell.mse) + mark])
        rows.append(row)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(value.ljust(widths[0]) if i == 0 else value.rjust(widths[i]) for i, value in enumerate(row)) for row in rows]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def save_table(report: EvalReport, path: Path | str) -> None:
    atomic_write(path, format_table(report))
