import argparse
import logging
import time

from config.config import settings
from exceptions import HoldoutError
from repository.checkpoints import load_checkpoint
from repository.datasets import load_dataset
from repository.reports import format_table, save_report, save_table
from routes.common import add_config_arguments, parse_floats, run_config_from_args
from schemas.evaluation import EvalRecord, EvalReport
from services.datagen import generate
from services.evaluation import (
    BASELINES,
    BaselinePredictor,
    FlowPredictor,
    grid_search,
    holdout_eval,
    run_table,
    trajectory_mse,
)

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


def _score(name, method, predictor, data, held_out, args) -> EvalRecord:
    started = time.perf_counter()
    record = EvalRecord(dataset=name, method=method, held_out_time=held_out, seed=args.seed)
    record.emd = holdout_eval(data, held_out, predictor, args.n_eval, args.seed, args.emd_order)
    if data.has_pairing:
        record.mse = trajectory_mse(predictor, data, held_out, args.n_traj, args.seed)
    record.wall_time_s = time.perf_counter() - started
    return record


def evaluate_model(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.model)
    data = load_dataset(args.data)
    checkpoint.check_dimension(data)
    held_out = args.holdout if args.holdout is not None else checkpoint.meta.held_out
    if held_out is None:
        raise HoldoutError("no --holdout given and the checkpoint was trained on every timepoint")
    predictor = FlowPredictor(checkpoint.net, checkpoint.time_map, checkpoint.meta.solver)
    records = [_score(data.name, "flow", predictor, data, held_out, args)]
    for kind in args.baselines or []:
        records.append(_score(data.name, kind, BaselinePredictor(kind), data, held_out, args))
    report = EvalReport(records=records, config=checkpoint.meta.effective_config)
    save_report(report, args.report)
    print(format_table(report), end="")


def table(args: argparse.Namespace) -> None:
    cfg = run_config_from_args(args)
    datasets = {name: generate(name, args.n, args.data_seed) for name in args.datasets.split(",")}
    report = run_table(datasets, args.methods.split(","), cfg, max_workers=args.workers)
    save_report(report, args.report)
    text = format_table(report)
    if args.table:
        save_table(report, args.table)
    print(text, end="")


def _grid(items: list[str]) -> dict[str, tuple[float, ...]] | None:
    if not items:
        return None
    grid = {}
    for item in items:
        key, _, values = item.partition("=")
        grid[key.strip()] = tuple(parse_floats(values, "--grid"))
    return grid


def grid(args: argparse.Namespace) -> None:
    cfg = run_config_from_args(args)
    data = load_dataset(args.data)
    report = grid_search(data, args.holdout, cfg, _grid(args.grid), max_workers=args.workers)
    save_report(report, args.report)
    print(format_table(report), end="")


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="score a checkpoint on a held-out timepoint")
    parser.add_argument("--model", required=True, help="checkpoint file")
    parser.add_argument("--data", required=True, help="dataset CSV")
    parser.add_argument("--holdout", type=float, help="held-out label, the checkpoint's own by default")
    parser.add_argument("--report", required=True, help="report CSV destination")
    parser.add_argument("--baselines", type=lambda text: text.split(","), help=f"also score baselines from {BASELINES}")
    parser.add_argument("--n-eval", type=int, default=1000)
    parser.add_argument("--n-traj", type=int, default=5000)
    parser.add_argument("--emd-order", type=int, choices=(1, 2), default=settings.default_emd_order)
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=evaluate_model)

    parser = subparsers.add_parser("table", help="leave-one-out results table over synthetic datasets")
    parser.add_argument("--datasets", default="arch,tree,cycle")
    parser.add_argument("--methods", default="base,base+v,ot,prev,next,rand")
    parser.add_argument("--n", type=int, default=5000, help="points per generated timepoint")
    parser.add_argument("--data-seed", type=int, default=0)
    parser.add_argument("--report", required=True, help="report CSV destination")
    parser.add_argument("--table", help="aligned text table destination")
    parser.add_argument("--workers", type=int, default=settings.max_workers)
    add_config_arguments(parser)
    parser.set_defaults(handler=table)

    parser = subparsers.add_parser("grid", help="grid search over loss weights")
    parser.add_argument("--data", required=True, help="dataset CSV")
    parser.add_argument("--holdout", type=float, required=True)
    parser.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2", help="grid axis (repeatable)")
    parser.add_argument("--report", required=True)
    parser.add_argument("--workers", type=int, default=settings.max_workers)
    add_config_arguments(parser)
    parser.set_defaults(handler=grid)
