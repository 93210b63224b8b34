from pathlib import Path
from typing import List

from pydantic import ValidationError

from flightfix.handlers.common import EXIT_OK, INPUT_ERRORS, fail
from flightfix.services.bench.metrics import BenchReport, CombinedSummary, combine
from flightfix.services.paramdb import SchemaError


def add_parser(subparsers, parents) -> None:
    parser = subparsers.add_parser("compare", parents=parents, help="combine report.json files from several advisors")
    parser.add_argument("reports", nargs="+", help="report.json files written by `bench`")
    parser.set_defaults(handler=handle)


def load_reports(paths: List[str]) -> List[BenchReport]:
    reports = []
    for source in paths:
        path = Path(source)
        try:
            reports.append(BenchReport.model_validate_json(path.read_text(encoding="utf-8")))
        except ValidationError as e:
            raise SchemaError(f"{path}: not a benchmark report: {e.errors()[0]['msg']}") from e
    return reports


def render(reports: List[BenchReport], summary: CombinedSummary) -> str:
    lines = [f"{'ADVISOR':<20} {'TTC':>5} {'NRC':>5} {'TRA':>5} {'RSR':>6} {'ANR':>6}"]
    for report in reports:
        lines.append(
            f"{report.label or '-':<20} {report.ttc:>5} {report.nrc:>5} {report.tra:>5} "
            f"{report.rsr.display:>6} {report.anr.display:>6}"
        )
    lines.append(f"{'model-weighted':<20} {'':>5} {'':>5} {'':>5} {summary.model_weighted_rsr.display:>6} {summary.model_weighted_anr.display:>6}")
    lines.append(f"{'case-weighted':<20} {'':>5} {'':>5} {'':>5} {summary.case_weighted_rsr.display:>6} {summary.case_weighted_anr.display:>6}")
    return "\n".join(lines)


def handle(args) -> int:
    try:
        reports = load_reports(args.reports)
    except INPUT_ERRORS as e:
        return fail(e)
    print(render(reports, combine(reports)))
    return EXIT_OK
