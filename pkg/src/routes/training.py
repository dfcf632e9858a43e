import argparse
import logging

from config.config import settings
from config.runconfig import flatten
from models.dataset import TimeSeriesDataset
from models.networks import DynamicsNet, GrowthNet
from repository.checkpoints import Checkpoint, save_checkpoint
from repository.datasets import load_dataset
from routes.common import add_config_arguments, run_config_from_args
from schemas.checkpoint import CheckpointMeta
from schemas.training import RunConfig
from services.growth import fit_growth
from services.trainer import build_time_map, regularizer_for_method, train

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


def build_checkpoint(
    net: DynamicsNet,
    growth: GrowthNet | None,
    data: TimeSeriesDataset,
    cfg: RunConfig,
    held_out: float | None,
) -> Checkpoint:
    time_map = build_time_map(data, cfg, held_out)
    meta = CheckpointMeta(
        format_version=settings.checkpoint_format_version,
        dim=data.dim,
        labels=time_map.labels,
        times=time_map.times,
        time_mode=time_map.mode,
        held_out=time_map.held_out,
        seed=cfg.seed,
        iterations=cfg.iterations,
        slope=net.slope,
        dynamics_hidden=net.hidden,
        growth_hidden=None if growth is None else growth.hidden,
        dataset=data.name,
        regularizer=cfg.regularizer,
        solver=cfg.eval_solver,
        effective_config=flatten(cfg),
    )
    return Checkpoint(meta, net, growth)


def train_model(args: argparse.Namespace) -> None:
    cfg = run_config_from_args(args)
    if args.method:
        cfg = cfg.model_copy(update={"regularizer": regularizer_for_method(args.method, cfg.regularizer)})
    if args.growth:
        cfg = cfg.model_copy(update={"regularizer": cfg.regularizer.model_copy(update={"growth_enabled": True})})
    data = load_dataset(args.data)
    time_map = build_time_map(data, cfg, args.holdout)
    growth = None
    if cfg.regularizer.growth_enabled:
        growth = fit_growth(data, cfg.ot, cfg.growth, time_map).net
    net, report = train(data, cfg.train_config(), growth, held_out=args.holdout)
    save_checkpoint(build_checkpoint(net, growth, data, cfg, args.holdout), args.out)
    final = f"{report.totals[-1]:.5g}" if report.records else "n/a"
    print(f"trained {cfg.iterations} iterations in {report.wall_time_s:.1f}s, final loss {final} -> {args.out}")


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="train a flow and write a checkpoint")
    parser.add_argument("--data", required=True, help="dataset CSV")
    parser.add_argument("--out", required=True, help="checkpoint destination")
    parser.add_argument("--holdout", type=float, help="timepoint label excluded from training")
    parser.add_argument("--method", help="regularizer flags such as base+v or base+e+d")
    parser.add_argument("--growth", action="store_true", help="fit and apply a growth network")
    add_config_arguments(parser)
    parser.set_defaults(handler=train_model)
