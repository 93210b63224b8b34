import argparse
import sys
from typing import List, Optional

from flightfix import __version__
from flightfix.handlers import bench, check, compare, params, replay, run
from flightfix.loader import ADVISOR_CHOICES


HANDLERS = (run, bench, replay, params, check, compare)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="harness config JSON (default: shipped config)")
    common.add_argument("--advisor", choices=ADVISOR_CHOICES, help="override the configured advisor")
    common.add_argument("--output-dir", dest="output_dir", help="directory for run outputs")
    common.add_argument("--link", help="vehicle link: sim, spawn or tcp://host:port")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--realtime", action="store_true", help="pace the simulator at wall-clock speed")

    parser = argparse.ArgumentParser(
        prog="flightfix",
        description="Monitor-and-repair harness for risk-prone flight-control configurations",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for handler in HANDLERS:
        handler.add_parser(subparsers, [common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
