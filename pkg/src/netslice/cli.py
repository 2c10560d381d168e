"""Command-line surface.

Subcommands: validate, entail, query, path, delegate, embed, run. Documents
are NDL-Lite files; scenario scripts drive the full actor protocol. Exit
codes are a stable contract: 0 clean, 1 semantic or expectation failure,
2 input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import embed as embed_mod
from . import rules as rules_mod
from .actors import World
from .graphstore import (
    Iri,
    Literal,
    Model,
    ParseError,
    Var,
    entail,
    merge,
    parse_document,
    query_bgp,
    render_term,
    serialize_document,
)
from .models import (
    PlanIncomplete,
    RequestError,
    SubstrateError,
    build_delegation,
    build_manifest,
    parse_datetime,
    parse_request,
    parse_substrate,
)
from .pathquery import PathExprError, eval_path, parse_path_expr
from .vocab import BASE_PREFIXES, builtin_schema, validate_conformance

EXIT_OK = 0
EXIT_SEMANTIC = 1
EXIT_INPUT = 2


class CliInputError(Exception):
    pass


def _read_model(path: str) -> Model:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliInputError(f"{path}: {e}")
    try:
        return parse_document(text)
    except ParseError as e:
        raise CliInputError(f"{path}: {e}")


def _merged(files, schemas) -> Model:
    models = [builtin_schema()]
    for path in schemas or ():
        models.append(_read_model(path))
    for path in files:
        models.append(_read_model(path))
    return merge(models)


def _resolve(text: str, prefixes: dict) -> Iri:
    if text.startswith("<") and text.endswith(">"):
        return Iri(text[1:-1])
    if ":" in text:
        name, local = text.split(":", 1)
        if name in prefixes:
            return Iri(prefixes[name] + local)
        if "://" in text or text.startswith("urn:"):
            return Iri(text)
    raise CliInputError(f"cannot resolve IRI {text!r}")


def _load_rules(paths) -> list:
    out = []
    for path in paths or ():
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise CliInputError(f"{path}: {e}")
        try:
            out.extend(rules_mod.parse_ruleset(text))
        except (rules_mod.RuleSyntaxError, rules_mod.UnsafeRule) as e:
            raise CliInputError(f"{path}: {e}")
    return out


def cmd_validate(args) -> int:
    merged = _merged(args.files, args.schema)
    issues = validate_conformance(merged)
    violations = rules_mod.validate(entail(merged), _load_rules(args.rules))
    for issue in issues:
        print(f"ISSUE {issue.kind} {issue.subject.value} {issue.detail}")
    for v in violations:
        print(v)
    return EXIT_SEMANTIC if issues or violations else EXIT_OK


def cmd_entail(args) -> int:
    closed = entail(_merged(args.files, args.schema))
    text = serialize_document(closed)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_bgp(text: str, prefixes: dict) -> list:
    tokens = text.replace("\n", " ").split()
    patterns = []
    current = []
    for tok in tokens:
        if tok == ".":
            if current:
                patterns.append(current)
                current = []
            continue
        if tok.startswith("?"):
            current.append(Var(tok[1:]))
        elif tok.startswith('"'):
            current.append(Literal(tok.strip('"')))
        else:
            current.append(_resolve(tok, prefixes))
        if len(current) == 3:
            patterns.append(current)
            current = []
    if current:
        raise CliInputError(f"incomplete triple pattern: {current!r}")
    return [tuple(p) for p in patterns]


def cmd_query(args) -> int:
    merged = _merged(args.files, args.schema)
    closed = entail(merged)
    prefixes = dict(BASE_PREFIXES)
    prefixes.update(merged.prefixes)
    if args.bgp:
        patterns = _parse_bgp(args.bgp, prefixes)
        if not patterns:
            raise CliInputError("empty pattern")
        for binding in query_bgp(closed, patterns):
            parts = [
                f"?{name}={render_term(binding[name], prefixes)}"
                for name in sorted(binding)
            ]
            print(" ".join(parts))
        return EXIT_OK
    if not args.path_expr or not args.start:
        raise CliInputError("query needs --bgp, or --path-expr with --from")
    try:
        expr = parse_path_expr(args.path_expr, prefixes)
    except PathExprError as e:
        raise CliInputError(str(e))
    start = _resolve(args.start, prefixes)
    for node in sorted(eval_path(closed, start, expr), key=lambda n: n.value):
        print(node.value)
    return EXIT_OK


def cmd_path(args) -> int:
    merged = _merged(args.files, args.schema)
    closed = entail(merged)
    prefixes = dict(BASE_PREFIXES)
    prefixes.update(merged.prefixes)
    source = _resolve(getattr(args, "from"), prefixes)
    dest = _resolve(args.to, prefixes)
    known = {t.subject for t in closed}
    if source not in known or dest not in known:
        missing = source if source not in known else dest
        raise CliInputError(f"unknown element {missing.value}")
    layer = _resolve(args.layer, prefixes)
    preq = embed_mod.PathRequest(
        source, dest, layer, args.bandwidth, required_label=args.label
    )
    result = embed_mod.shortest_valid_path(closed, preq, limit=args.limit)
    if result is None:
        print("NO PATH")
        return EXIT_SEMANTIC
    for hop in result.hops:
        print(f"HOP {hop.element.value}")
    for element in result.internal_elements:
        print(f"INTERNAL {element.value}")
    if result.allocated_label is not None:
        print(f"LABEL {result.allocated_label}")
    print(f"BANDWIDTH {result.consumed_bandwidth}")
    return EXIT_OK


def cmd_delegate(args) -> int:
    closed = entail(_merged([args.file], args.schema))
    try:
        graph = parse_substrate(closed)
    except SubstrateError as e:
        raise CliInputError(str(e))
    text = serialize_document(build_delegation(graph))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_embed(args) -> int:
    schemas = [_read_model(p) for p in (args.schema or ())]
    request_raw = _read_model(args.request)
    merged_req = merge([builtin_schema(), *schemas, request_raw])
    issues = validate_conformance(merged_req)
    closed_req = entail(merged_req)
    violations = rules_mod.validate(closed_req, _load_rules(args.rules))
    if issues or violations:
        for issue in issues:
            print(f"ISSUE {issue.kind} {issue.subject.value} {issue.detail}")
        for v in violations:
            print(v)
        return EXIT_SEMANTIC
    try:
        request = parse_request(closed_req, source=request_raw)
    except RequestError as e:
        raise CliInputError(str(e))
    states = {}
    delegations = []
    for path in args.substrates:
        try:
            state = embed_mod.prepare_domain(_read_model(path), schemas)
        except SubstrateError as e:
            raise CliInputError(f"{path}: {e}")
        states[state.substrate.domain] = state
        delegations.append(build_delegation(state.substrate))
    try:
        plan = embed_mod.embed_request(request, delegations, states, args.slice_id)
    except embed_mod.EmbeddingFailed as e:
        print(f"EMBEDDING FAILED {e}")
        return EXIT_SEMANTIC
    manifest = build_manifest(request, plan)
    text = serialize_document(manifest)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- scenario runner -------------------------------------------------------------


class ScenarioError(Exception):
    pass


def _parse_scenario(text: str) -> list:
    """Commands as (lineno, verb, args). Raises ScenarioError on bad syntax."""
    commands = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = _split_scenario_line(body, lineno)
        verb = parts[0]
        shapes = {
            "load-substrate": 2,
            "load-rules": 2,
            "submit-request": 4,
            "delete-slice": 2,
            "advance-time": 2,
            "expect-violation": 2,
            "expect-state": 3,
            "dump-manifest": 3,
        }
        if verb not in shapes:
            raise ScenarioError(f"line {lineno}: unknown command {verb!r}")
        if len(parts) != shapes[verb]:
            raise ScenarioError(f"line {lineno}: {verb} takes {shapes[verb] - 1} arguments")
        if verb == "submit-request" and parts[2] != "as":
            raise ScenarioError(f"line {lineno}: expected 'submit-request <file> as <sliceId>'")
        commands.append((lineno, verb, parts[1:]))
    return commands


def _split_scenario_line(body: str, lineno: int) -> list:
    parts = []
    i = 0
    while i < len(body):
        if body[i].isspace():
            i += 1
            continue
        if body[i] == '"':
            j = body.find('"', i + 1)
            if j < 0:
                raise ScenarioError(f"line {lineno}: unterminated quote")
            parts.append(body[i + 1 : j])
            i = j + 1
        else:
            j = i
            while j < len(body) and not body[j].isspace():
                j += 1
            parts.append(body[i:j])
            i = j
    return parts


def run_scenario(script_path: str, out=sys.stdout) -> int:
    """Execute a scenario: one broker, one controller, one AM per substrate.

    The event log goes to `out`; any failed expectation makes the exit code
    nonzero."""
    script = Path(script_path)
    try:
        commands = _parse_scenario(script.read_text(encoding="utf-8"))
    except OSError as e:
        raise CliInputError(f"{script_path}: {e}")
    world = World()
    failures = []
    last_slice = None
    for lineno, verb, args in commands:
        if verb == "load-substrate":
            world.add_substrate(_read_fixture(script.parent / args[0]))
        elif verb == "load-rules":
            text = _read_fixture(script.parent / args[0])
            try:
                world.controller.extra_rules.extend(rules_mod.parse_ruleset(text))
            except (rules_mod.RuleSyntaxError, rules_mod.UnsafeRule) as e:
                raise ScenarioError(f"line {lineno}: {e}")
        elif verb == "submit-request":
            last_slice = args[2]
            world.submit_request(args[2], _read_fixture(script.parent / args[0]))
        elif verb == "delete-slice":
            world.delete_slice(args[0])
        elif verb == "advance-time":
            try:
                world.advance_time(parse_datetime(args[0]))
            except ValueError as e:
                raise ScenarioError(f"line {lineno}: {e}")
        elif verb == "expect-violation":
            record = world.controller.slices.get(last_slice) if last_slice else None
            messages = (
                [v.message for v in record.failure.violations]
                if record is not None and record.failure is not None
                else []
            )
            if args[0] not in messages:
                failures.append(
                    f"line {lineno}: expected violation {args[0]!r}, saw {messages!r}"
                )
        elif verb == "expect-state":
            record = world.controller.slices.get(args[0])
            state = record.state if record is not None else "missing"
            if state != args[1]:
                failures.append(
                    f"line {lineno}: slice {args[0]} in state {state}, expected {args[1]}"
                )
        elif verb == "dump-manifest":
            record = world.controller.slices.get(args[0])
            if record is None or record.manifest_text is None:
                failures.append(f"line {lineno}: slice {args[0]} has no manifest to dump")
            else:
                Path(args[1]).write_text(record.manifest_text, encoding="utf-8")
    for line in world.events:
        print(line, file=out)
    for failure in failures:
        print(f"EXPECTATION FAILED {failure}", file=sys.stderr)
    return EXIT_SEMANTIC if failures else EXIT_OK


def _read_fixture(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise CliInputError(f"{path}: {e}")


def cmd_run(args) -> int:
    return run_scenario(args.scenario)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netslice",
        description="Multi-domain network slice orchestration over semantic resource graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="conformance and rule validation")
    p.add_argument("files", nargs="+")
    p.add_argument("--schema", action="append", help="extension schema file (repeatable)")
    p.add_argument("--rules", action="append", help="extra ruleset file (repeatable)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("entail", help="print the entailed closure, canonically serialized")
    p.add_argument("files", nargs="+")
    p.add_argument("--schema", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_entail)

    p = sub.add_parser("query", help="basic graph pattern or path expression query")
    p.add_argument("files", nargs="+")
    p.add_argument("--schema", action="append")
    p.add_argument("--bgp", help="triple patterns, e.g. '?s topo:hasInterface ?i'")
    p.add_argument("--path-expr", help="path expression, e.g. 'topo:hasInterface/topo:linkedTo'")
    p.add_argument("--from", dest="start", help="start node for --path-expr")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("path", help="constrained shortest path across substrates")
    p.add_argument("files", nargs="+")
    p.add_argument("--from", required=True)
    p.add_argument("--to", required=True)
    p.add_argument("--layer", default="eth:EthernetNetworkElement")
    p.add_argument("--bandwidth", type=int, default=0)
    p.add_argument("--label", type=int)
    p.add_argument("--limit", type=int, default=10)
    p.add_argument("--schema", action="append")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("delegate", help="build the delegation for a substrate")
    p.add_argument("file")
    p.add_argument("--schema", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_delegate)

    p = sub.add_parser("embed", help="one-shot embedding of a request onto substrates")
    p.add_argument("substrates", nargs="+")
    p.add_argument("--request", required=True)
    p.add_argument("--slice-id", default="cli")
    p.add_argument("--schema", action="append")
    p.add_argument("--rules", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("run", help="execute a scenario script")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliInputError, ScenarioError, ParseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
