"""
Argument helpers shared by the command modules.
"""
import argparse

from config.runconfig import load_run_config, parse_assignments
from exceptions import UsageError
from schemas.training import RunConfig


def parse_floats(text: str, name: str) -> list[float]:
    """``"1,2.5"`` -> ``[1.0, 2.5]``; the error names the flag."""
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise UsageError(f"{name} expects comma-separated numbers, got '{text}'") from None
    if not values:
        raise UsageError(f"{name} is empty")
    return values


def parse_ints(text: str, name: str) -> list[int]:
    try:
        values = [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise UsageError(f"{name} expects comma-separated integers, got '{text}'") from None
    if not values:
        raise UsageError(f"{name} is empty")
    return values


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration file (key = value lines)")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override one configuration key (repeatable)"
    )
    parser.add_argument("--iterations", type=int, help="training iterations")
    parser.add_argument("--seed", type=int, help="training seed")
    parser.add_argument("--batch-size", type=int, help="points per timepoint in a batch")


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """Configuration file, then ``--set`` overrides, then the dedicated flags."""
    overrides = parse_assignments(args.set)
    for flag, key in (("iterations", "iterations"), ("seed", "seed"), ("batch_size", "batch_size")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    return load_run_config(args.config, overrides)
