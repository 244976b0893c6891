"""``permlab`` command line.

Exit codes: 0 success, 1 completed with failures (scenario expectation
failed, partial scan), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from permlab._data import PACKAGE_DATA, data_path
from permlab.fingerprint import Observation, ObservationError, classify, partition, plan_probes
from permlab.matrix import (
    MatrixError,
    PermissionMatrix,
    Platform,
    QueryContext,
    UnknownTargetError,
    diff_targets,
    load_matrix,
)
from permlab.permstore import Scenario, ScenarioError, run_scenario
from permlab.registry import Registry, RegistryError, UnknownDescriptorError, descriptors_by_category, load_registry
from permlab.scanner import FetchLimits, fetch_sites, group_origin, load_fixture, load_patterns, scan_report
from permlab.scanner.analysis import PatternError
from permlab.scanner.fixture import FixtureError

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _read_doc(path: str, what: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path} is not valid JSON: {exc}") from None


def _registry(args: argparse.Namespace) -> Registry:
    if getattr(args, "_registry", None) is None:
        doc = _read_doc(args.registry, "registry") if args.registry else None
        args._registry = load_registry(doc)
    return args._registry


def _matrix(args: argparse.Namespace) -> PermissionMatrix:
    if getattr(args, "_matrix", None) is None:
        doc = _read_doc(args.matrix, "matrix") if args.matrix else None
        args._matrix = load_matrix(doc, _registry(args))
    return args._matrix


def _emit(args: argparse.Namespace, payload: Any, rows: list[list[Any]] | None = None,
          header: list[str] | None = None) -> None:
    if args.format == "json" or rows is None:
        print(json.dumps(payload, indent=2))
        return
    table = [header or []] + [[("" if c is None else str(c)) for c in r] for r in rows]
    widths = [max(len(str(r[i])) for r in table if i < len(r)) for i in range(len(table[0]))]
    for r in table:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip())


# -- registry -----------------------------------------------------------------

_DESC_HEADER = ["name", "category", "web_api", "invocable", "prompted", "sw_queryable", "count"]


def _desc_row(d) -> list[Any]:
    return [d.name, d.category.value, d.web_api, d.invocable, d.prompted.value, d.sw_queryable, d.reference_count]


def cmd_registry(args: argparse.Namespace) -> int:
    reg = _registry(args)
    if args.action == "show":
        try:
            d = reg.get(args.name)
        except UnknownDescriptorError as exc:
            raise UsageError(str(exc)) from None
        _emit(args, d.to_dict(), [_desc_row(d)], _DESC_HEADER)
        return EXIT_OK
    if args.category:
        try:
            descs = descriptors_by_category(reg, args.category)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        descs = list(reg)
    _emit(args, [d.to_dict() for d in descs], [_desc_row(d) for d in descs], _DESC_HEADER)
    return EXIT_OK


# -- matrix -------------------------------------------------------------------


def cmd_matrix(args: argparse.Namespace) -> int:
    m = _matrix(args)
    try:
        if args.action == "show":
            col = m.column(args.target)
            payload = {"target": m.target(args.target).to_dict(), "cells": {k: v.value for k, v in col.items()}}
            _emit(args, payload, [[k, v.value] for k, v in col.items()], ["descriptor", args.target])
        else:
            diff = diff_targets(m, args.a, args.b)
            payload = {"a": args.a, "b": args.b,
                       "differences": [{"descriptor": n, "a": x.value, "b": y.value} for n, x, y in diff]}
            _emit(args, payload, [[n, x.value, y.value] for n, x, y in diff], ["descriptor", args.a, args.b])
    except UnknownTargetError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK


# -- fingerprint --------------------------------------------------------------


def _expand_targets(m: PermissionMatrix, spec: str) -> list[str]:
    out: list[str] = []
    for token in (t.strip() for t in spec.split(",") if t.strip()):
        if token.lower() == "all":
            out.extend(m.target_ids)
            continue
        platform = next((p for p in Platform if p.value.lower() == token.lower()), None)
        if platform is not None:
            out.extend(m.targets_on(platform))
            continue
        try:
            m.target(token)
        except UnknownTargetError as exc:
            raise UsageError(str(exc)) from None
        out.append(token)
    if not out:
        raise UsageError("no targets given")
    return list(dict.fromkeys(out))


def cmd_fingerprint(args: argparse.Namespace) -> int:
    m = _matrix(args)
    if args.action == "classify":
        doc = _read_doc(args.observation, "observation")
        try:
            obs = Observation.from_dict(doc)
            result = classify(obs, m)
        except (ObservationError, UnknownDescriptorError) as exc:
            raise UsageError(str(exc)) from None
        _emit(args, result.to_dict(), [[t, n, "*" if t in result.exact else ""] for t, n in result.ranked],
              ["target", "mismatches", "exact"])
        return EXIT_OK

    targets = _expand_targets(m, args.targets)
    context = QueryContext(args.context)
    if args.max < 1:
        raise UsageError("--max must be positive")
    probes = plan_probes(targets, m, args.max, context)
    verified = all(
        classify(Observation.of_target(m, t, context, probes), m).exact & set(targets) == {t}
        for t in targets
    )
    payload = {
        "targets": targets,
        "context": context.value,
        "probes": probes,
        "verified": verified,
        "residual_groups": [sorted(g) for g in partition(targets, probes, m, context) if len(g) > 1],
    }
    _emit(args, payload, [[i + 1, p] for i, p in enumerate(probes)], ["step", "descriptor"])
    if args.format != "json":
        print(f"verified: {verified}")
    return EXIT_OK


# -- simulate -----------------------------------------------------------------


def _scenario_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    for candidate in (data_path(f"scenarios/{name}"), PACKAGE_DATA / "scenarios" / name):
        if candidate.exists():
            return candidate
    raise UsageError(f"scenario file not found: {name}")


def cmd_simulate(args: argparse.Namespace) -> int:
    doc = _read_doc(str(_scenario_path(args.scenario)), "scenario")
    try:
        scenario = Scenario.from_dict(doc)
        trace = run_scenario(scenario, _matrix(args))
    except (ScenarioError, UnknownTargetError) as exc:
        raise UsageError(str(exc)) from None
    rows = [
        [r.index, r.actor, r.kind.value, r.descriptor or "", r.outcome.value if r.outcome else "",
         r.expected.value if r.expected else "", "ok" if r.passed else "FAIL",
         "inherited" if r.inherited else (r.error or "")]
        for r in trace.records
    ]
    _emit(args, {"scenario": scenario.name, **trace.to_dict()}, rows,
          ["#", "actor", "event", "descriptor", "outcome", "expected", "result", "note"])
    if not trace.passed:
        print(f"failing events: {trace.failures}", file=sys.stderr)
        return EXIT_FAILURES
    return EXIT_OK


# -- scan ---------------------------------------------------------------------


def cmd_scan(args: argparse.Namespace) -> int:
    if not args.url and not args.fixture_dir:
        raise UsageError("scan needs --url or --fixture-dir")
    reg = _registry(args)
    try:
        patterns = load_patterns(args.patterns, reg)
    except PatternError as exc:
        raise UsageError(str(exc)) from None
    snapshots = []
    for d in args.fixture_dir or []:
        try:
            snapshots.append(load_fixture(d))
        except FixtureError as exc:
            raise UsageError(str(exc)) from None
    if args.url:
        try:
            limits = FetchLimits(per_site_timeout=args.timeout_secs)
            snapshots.extend(fetch_sites(args.url, limits, args.concurrency))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    reports = group_origin(snapshots, reg, patterns)
    report = scan_report(reports, reg)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    if args.format == "json":
        if not args.out:
            print(text)
    else:
        rows = [[r["descriptor"], r["count"], r["invocable"], r["prompted"]]
                for r in report["aggregate"]["descriptor_ranking"]]
        _emit(args, report, rows, ["descriptor", "apps", "invocable", "prompted"])
        for rep in reports:
            flag = " multi-PWA" if rep.multi_pwa else ""
            shared = ", ".join(sorted(rep.shared_risk_descriptors)) or "-"
            print(f"{rep.origin}: {len(rep.apps)} app(s){flag}; shared: {shared}")
    failures = [f for rep in reports for f in rep.failures]
    for f in failures:
        print(f"partial: {f['document_url']}: {f['kind']} ({f['message']})", file=sys.stderr)
    return EXIT_FAILURES if failures else EXIT_OK


# -- parser -------------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permlab", description="PWA permission model toolkit")
    parser.add_argument("--registry", help="registry JSON (default: embedded)")
    parser.add_argument("--matrix", help="default-state matrix JSON (default: embedded)")
    parser.add_argument("--patterns", help="scanner pattern table JSON (default: embedded)")
    parser.add_argument("--format", choices=("json", "table"), default="json")
    parser.add_argument("--concurrency", type=_positive_int, default=8, help="sites scanned in parallel")
    parser.add_argument("--timeout-secs", type=_positive_float, default=30.0, help="per-site timeout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("registry", help="inspect permission descriptors")
    rsub = p.add_subparsers(dest="action", required=True)
    lst = rsub.add_parser("list")
    lst.add_argument("--category")
    show = rsub.add_parser("show")
    show.add_argument("name")
    p.set_defaults(func=cmd_registry)

    p = sub.add_parser("matrix", help="inspect default states")
    msub = p.add_subparsers(dest="action", required=True)
    show = msub.add_parser("show")
    show.add_argument("--target", required=True)
    diff = msub.add_parser("diff")
    diff.add_argument("a")
    diff.add_argument("b")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("fingerprint", help="classify observations, plan probes")
    fsub = p.add_subparsers(dest="action", required=True)
    cls = fsub.add_parser("classify")
    cls.add_argument("--observation", required=True)
    plan = fsub.add_parser("plan")
    plan.add_argument("--targets", required=True, help="comma-separated target ids or platform names")
    plan.add_argument("--max", type=int, default=4)
    plan.add_argument("--context", choices=[c.value for c in QueryContext], default=QueryContext.INSTALLED_PWA.value)
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("simulate", help="replay a permission-store scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON path or bundled scenario name")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", help="scan sites or fixtures for PWA and permission usage")
    p.add_argument("--url", action="append", default=[])
    p.add_argument("--fixture-dir", action="append", default=[])
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"permlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RegistryError, MatrixError) as exc:
        print(f"permlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
