import argparse
import logging

import numpy as np

from config.config import settings
from exceptions import DimensionError
from models.dataset import TimeSeriesDataset
from repository.checkpoints import load_checkpoint
from repository.datasets import save_dataset
from routes.common import parse_floats
from services.trainer import sample, trajectory

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


def sample_points(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.model)
    if args.label is not None:
        label, t = args.label, checkpoint.time_map.time_of(args.label)
    else:
        label = t = args.time
    points = sample(checkpoint.net, args.n, t, checkpoint.meta.solver, args.seed)
    save_dataset(TimeSeriesDataset((label,), (points,), name="samples"), args.out)
    print(f"{args.n} samples at model time {t:g} -> {args.out}")


def trace_trajectory(args: argparse.Namespace) -> None:
    checkpoint = load_checkpoint(args.model)
    start = np.array(parse_floats(args.start, "--start"))
    times = parse_floats(args.times, "--times")
    if start.size != checkpoint.meta.dim:
        raise DimensionError(f"--start has {start.size} coordinates, the model has d={checkpoint.meta.dim}")
    path = trajectory(checkpoint.net, start, times, checkpoint.meta.solver)
    header = "t," + ",".join(f"x{i}" for i in range(start.size))
    print(header)
    for t, x in zip(times, path):
        print(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in x))


def register(subparsers) -> None:
    parser = subparsers.add_parser("sample", help="draw points from a trained flow")
    parser.add_argument("--model", required=True, help="checkpoint file")
    parser.add_argument("--n", type=int, default=1000)
    when = parser.add_mutually_exclusive_group(required=True)
    when.add_argument("--time", type=float, help="model time (the base Gaussian sits at 0)")
    when.add_argument("--label", type=float, help="timepoint label of the training data")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="CSV destination")
    parser.set_defaults(handler=sample_points)

    parser = subparsers.add_parser("trajectory", help="integrate one particle through a list of model times")
    parser.add_argument("--model", required=True, help="checkpoint file")
    parser.add_argument("--start", required=True, help="coordinates at the first time, e.g. 0.5,0.1")
    parser.add_argument("--times", required=True, help="sorted model times, e.g. 1,1.5,2")
    parser.set_defaults(handler=trace_trajectory)
