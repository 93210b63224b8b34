from flightfix.handlers.common import EXIT_OK, INPUT_ERRORS, fail, load_context
from flightfix.services.paramdb import ParamRegistry, format_value


HEADER = f"{'NAME':<16} {'MIN':>10} {'MAX':>10} {'STEP':>8} {'DEFAULT':>10}  DESCRIPTION"


def add_parser(subparsers, parents) -> None:
    parser = subparsers.add_parser("params", parents=parents, help="list the parameter registry")
    parser.set_defaults(handler=handle)


def render_table(registry: ParamRegistry) -> str:
    rows = [HEADER]
    for spec in registry:
        rows.append(
            f"{spec.name:<16} {format_value(spec.min):>10} {format_value(spec.max):>10} "
            f"{format_value(spec.step):>8} {format_value(spec.default):>10}  {spec.description}"
        )
    return "\n".join(rows)


def handle(args) -> int:
    try:
        ctx = load_context(args)
    except INPUT_ERRORS as e:
        return fail(e)
    print(render_table(ctx.registry))
    return EXIT_OK
