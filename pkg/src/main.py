import argparse
import logging
import sys

import colorlog

from config.config import settings
from exceptions import TrajnetError, UsageError, UserInputError
from routes import benchmark, datasets, evaluation, inference, plots, training

logger = logging.getLogger(f"{settings.app_name}")
logger.setLevel(logging.DEBUG if settings.app_mode == "dev" else logging.INFO)
handler = colorlog.StreamHandler()
handler.setLevel(logging.DEBUG if settings.app_mode == "dev" else logging.INFO)
handler.setFormatter(colorlog.ColoredFormatter("%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
logger.addHandler(handler)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors raise :class:`UsageError` (exit 1) instead of exiting with argparse's 2."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="trajnet", description="Regularized continuous normalizing flows for time series of point clouds.")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    for routes in (datasets, training, evaluation, inference, plots, benchmark):
        routes.register(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    """
    Command-line entry point.

    :param argv: arguments without the program name, ``sys.argv[1:]`` by default.
    :type argv: list[str] | None
    :return: 0 on success, 1 on user error, 2 on numerical failure.
    :rtype: int
    """
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logger.setLevel(logging.DEBUG)
            handler.setLevel(logging.DEBUG)
        args.handler(args)
    except TrajnetError as err:
        logger.error(f"{type(err).__name__}: {err}")
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except ValueError as err:
        logger.error(f"invalid input: {err}")
        print(f"error: {err}", file=sys.stderr)
        return UserInputError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
