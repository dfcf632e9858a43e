import argparse
import logging

from config.config import settings
from repository.datasets import save_dataset
from services.datagen import DATASETS, generate

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


def generate_dataset(args: argparse.Namespace) -> None:
    data = generate(args.dataset, args.n, args.seed)
    save_dataset(data, args.out)
    print(f"{args.dataset}: {data.n_timepoints} timepoints {data.labels}, sizes {data.sizes} -> {args.out}")


def register(subparsers) -> None:
    parser = subparsers.add_parser("generate", help="write a synthetic dataset as CSV")
    parser.add_argument("--dataset", required=True, choices=sorted(DATASETS))
    parser.add_argument("--n", type=int, default=5000, help="points per timepoint")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="CSV destination")
    parser.set_defaults(handler=generate_dataset)
