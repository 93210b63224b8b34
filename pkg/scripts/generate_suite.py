"""Regenerates flightfix/data/suite.jsonl from the suite generator."""
import argparse
import sys

from flightfix.config import DEFAULT_SUITE_PATH
from flightfix.services.bench.suite import dump_suite, generate_suite


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default=str(DEFAULT_SUITE_PATH))
    args = parser.parse_args(argv)

    suite = generate_suite()
    path = dump_suite(suite, args.output)
    print(f"wrote {len(suite.cases)} cases to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
