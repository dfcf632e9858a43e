import argparse

from routes.common import parse_ints
from services.benchmark import bench_dim


def benchmark(args: argparse.Namespace) -> None:
    timings = bench_dim(parse_ints(args.dims, "--dims"), args.batch_size, args.repeats, args.seed)
    print(f"{'d':>4}  {'ms/eval':>10}  {'nfe':>6}  {'s/solve':>9}")
    for timing in timings:
        print(f"{timing.dim:>4}  {timing.seconds_per_eval * 1e3:>10.3f}  {timing.nfe:>6}  {timing.seconds_per_solve:>9.3f}")


def register(subparsers) -> None:
    parser = subparsers.add_parser("bench-dim", help="time the exact-trace field evaluation against dimension")
    parser.add_argument("--dims", default="2,5,10,20")
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=benchmark)
