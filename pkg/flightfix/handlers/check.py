"""Pre-flight check of a parameter file against the registry and the fault model."""
from flightfix.handlers.common import EXIT_FAILED, EXIT_OK, INPUT_ERRORS, fail, load_context, load_params_file
from flightfix.services.paramdb import format_value


def add_parser(subparsers, parents) -> None:
    parser = subparsers.add_parser("check", parents=parents, help="validate a params file and predict risky parameters")
    parser.add_argument("--params", required=True, help="JSON object of parameter overrides")
    parser.set_defaults(handler=handle)


def handle(args) -> int:
    try:
        ctx = load_context(args)
        params = load_params_file(args.params, ctx.registry)
    except INPUT_ERRORS as e:
        return fail(e)

    effective = {**ctx.registry.defaults(), **params}
    risks = ctx.fault_model.risks(effective)
    if not risks:
        print("no risky parameters")
        return EXIT_OK
    for risk in risks:
        print(
            f"{risk.name}={format_value(effective[risk.name])}  severity {risk.severity:.2f}  "
            f"-> {risk.fault_class.anomaly.value}"
        )
    return EXIT_FAILED
