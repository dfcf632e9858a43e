import argparse
import logging

from config.config import settings
from repository.checkpoints import load_checkpoint
from repository.datasets import load_dataset
from routes.common import parse_ints
from utils.plotting import plot_paths

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


def plot(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.model)
    data = load_dataset(args.data)
    checkpoint.check_dimension(data)
    projection = tuple(parse_ints(args.projection, "--projection")) if args.projection else None
    plot_paths(
        checkpoint.net,
        data,
        args.out,
        checkpoint.time_map,
        n_trajectories=args.trajectories,
        seed=args.seed,
        projection=projection,
        cfg=checkpoint.meta.solver,
    )
    print(f"plot -> {args.out}")


def register(subparsers) -> None:
    parser = subparsers.add_parser("plot", help="SVG of the data and sampled flow trajectories")
    parser.add_argument("--model", required=True, help="checkpoint file")
    parser.add_argument("--data", required=True, help="dataset CSV")
    parser.add_argument("--out", required=True, help="SVG destination")
    parser.add_argument("--trajectories", type=int, default=20, help="number of trajectories, 0 for scatter only")
    parser.add_argument("--projection", help="two columns to draw when d is not 2, e.g. 0,1")
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=plot)
