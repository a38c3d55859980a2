"""``ccoq`` command line.

Exit codes: 0 success, 1 data or validation errors, 2 usage errors.
Diagnostics go to stderr; report bodies to stdout or ``--out``.

Defaults for ``--core``, ``--mapping`` and ``--currency`` resolve as
flag > environment (CCOQ_CORE, CCOQ_MAPPING, CCOQ_CURRENCY) > config file
> shipped data. The config file is JSON with optional keys ``core``,
``mapping``, ``currency``, ``format`` and ``profile``; it is read from
``--config``, else ``$CCOQ_CONFIG``, else ``./ccoq.json`` when present.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import agreement, framework_core, ledger, mapping, metrics, report
from .errors import CcoqError, Finding, FormatError, NotFoundError
from .framework_core import FrameworkCore, Standard
from .ledger import Scope
from .mapping import Mapping

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE = 0, 1, 2

SCOPES = {
    "all": None,
    "cyber": Scope.CYBERSECURITY,
    "cybersecurity": Scope.CYBERSECURITY,
    "ordinary": Scope.ORDINARY_QUALITY,
    "ordinaryquality": Scope.ORDINARY_QUALITY,
}
CONFIG_KEYS = ("core", "mapping", "currency", "format", "profile")


class UsageError(CcoqError):
    pass


def _build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's unset --config from clobbering a global one.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="JSON config file")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--core", help="Framework Core file (default: shipped CSF v1.0)")
    data.add_argument("--mapping", help="mapping file (default: shipped mapping)")

    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", "-f", help="json | csv | markdown | plot")
    fmt.add_argument("--out", "-o", type=Path, help="write the report here instead of stdout")
    fmt.add_argument("--stamp", action="store_true", help="add a generation timestamp")

    parser = argparse.ArgumentParser(
        prog="ccoq",
        description="Cybersecurity cost of quality over the NIST CSF Framework Core.",
    )
    parser.add_argument("--config", type=Path, help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("validate", parents=[common, fmt], help="validate a core file and a mapping file")
    p.add_argument("core_file")
    p.add_argument("mapping_file")
    p.add_argument("--profile", choices=framework_core.PROFILES, help="validation profile (default generic)")

    p = sub.add_parser("report", parents=[common, data, fmt], help="cost of quality reports from a ledger")
    p.add_argument("kind", choices=("coq", "split", "trend", "pareto"))
    p.add_argument("--ledger", required=True, type=Path)
    p.add_argument("--scope", default="all", choices=sorted(SCOPES))
    p.add_argument("--granularity", default="m", choices=("m", "q", "monthly", "quarterly"))
    p.add_argument("--contiguous", action="store_true", help="emit zero points for gaps in a trend")
    p.add_argument("--group-by", default="subcategory", choices=sorted(metrics.GROUPERS))
    p.add_argument("--currency", help="currency for rows without one (default USD)")

    p = sub.add_parser("kappa", parents=[common, fmt], help="Cohen's kappa between two rating sheets")
    p.add_argument("sheet_a", type=Path)
    p.add_argument("sheet_b", type=Path)

    p = sub.add_parser("lookup", parents=[common, data], help="show one subcategory")
    p.add_argument("subcategory")
    p.add_argument("--format", "-f", choices=("text", "json"), default="text")

    p = sub.add_parser("csc", parents=[common], help="quality cost roles of one Critical Security Control")
    p.add_argument("number", type=int)

    p = sub.add_parser("rosi", parents=[common], help="return on security investment")
    p.add_argument("--benefit", type=int, required=True, help="benefit in minor units")
    p.add_argument("--cost", type=int, required=True, help="cost in minor units")
    return parser


@dataclass
class Settings:
    core: str | None = None
    mapping: str | None = None
    currency: str = ledger.DEFAULT_CURRENCY
    format: str = "json"
    profile: str = "generic"


def _load_config(path: Path | None) -> dict:
    if path is None:
        env = os.environ.get("CCOQ_CONFIG")
        if env:
            path = Path(env)
        elif Path("ccoq.json").is_file():
            path = Path("ccoq.json")
        else:
            return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must be a JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise UsageError(f"config {path}: unknown keys {', '.join(unknown)}")
    return data


def resolve_settings(args: argparse.Namespace) -> Settings:
    cfg = _load_config(getattr(args, "config", None))
    s = Settings()
    for key, env in (("core", "CCOQ_CORE"), ("mapping", "CCOQ_MAPPING"), ("currency", "CCOQ_CURRENCY")):
        value = getattr(args, key, None) or os.environ.get(env) or cfg.get(key)
        if value:
            setattr(s, key, value)
    for key in ("format", "profile"):
        value = getattr(args, key, None) or cfg.get(key)
        if value:
            setattr(s, key, value)
    return s


def _load_core(path: str | None) -> FrameworkCore:
    return framework_core.load_core(path) if path else framework_core.shipped_core()


def _load_mapping(path: str | None, core: FrameworkCore) -> Mapping:
    return mapping.read_mapping(path, core) if path else mapping.shipped_mapping(core)


def _write(body: bytes, out: Path | None) -> None:
    if out is None:
        sys.stdout.buffer.write(body)
        sys.stdout.flush()
    else:
        out.write_bytes(body)


def _diag(message: str) -> None:
    print(message, file=sys.stderr)


def _format(settings: Settings) -> report.OutputFormat:
    try:
        return report.OutputFormat.parse(settings.format)
    except ValueError:
        raise UsageError(f"unknown format {settings.format!r}") from None


def cmd_validate(args: argparse.Namespace, s: Settings) -> int:
    fmt = _format(s)
    findings: list[Finding] = []
    summary: dict = {"core": args.core_file, "mapping": args.mapping_file, "profile": s.profile}
    try:
        core = framework_core.load_core(args.core_file)
    except (FormatError, OSError) as exc:
        findings.append(Finding("CORE_FORMAT", str(exc), location=getattr(exc, "location", None)))
        core = None
    if core is not None:
        try:
            findings += framework_core.validate_core(core, s.profile).findings
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        summary["subcategories"] = len(core)
        try:
            m = mapping.read_mapping(args.mapping_file, core)
        except (FormatError, OSError) as exc:
            findings.append(Finding("MAPPING_FORMAT", str(exc), location=getattr(exc, "location", None)))
        else:
            summary["mapping_entries"] = len(m)
            gaps = mapping.coverage_check(m, core)
            severity = "error" if s.profile == "csf-v1.0" else "warning"
            findings += [Finding("UNMAPPED", f"{sid} has no mapping entry", severity) for sid in gaps]
    for f in findings:
        _diag(str(f))
    _write(report.emit(report.validation_report(findings, summary), fmt, args.stamp), args.out)
    return EXIT_FINDINGS if any(f.severity == "error" for f in findings) else EXIT_OK


def cmd_report(args: argparse.Namespace, s: Settings) -> int:
    fmt = _format(s)
    core = _load_core(s.core)
    m = _load_mapping(s.mapping, core)
    records, findings = ledger.read_ledger(args.ledger, m, core, s.currency)
    for f in findings:
        _diag(str(f))
    if any(f.code == ledger.MIXED_CURRENCY for f in findings):
        _diag("error: refusing to aggregate mixed currencies")
        return EXIT_FINDINGS
    scope = SCOPES[args.scope]
    allocations = ledger.allocate(records, m)
    kind = args.kind
    if kind == "coq":
        doc = report.coq_report(metrics.coq(allocations, scope, None), args.scope)
    elif kind == "split":
        split = metrics.development_split(records, m)
        ratio_set = metrics.ratios(split) if split.total > 0 else None
        doc = report.split_report(split, ratio_set)
    elif kind == "trend":
        granularity = metrics.Granularity.parse(args.granularity)
        doc = report.trend_report(
            metrics.trend(allocations, granularity, scope, contiguous=args.contiguous), args.scope
        )
    else:
        doc = report.pareto_report(metrics.pareto(allocations, args.group_by, scope))
    _write(report.emit(doc, fmt, args.stamp), args.out)
    return EXIT_FINDINGS if ledger.has_errors(findings) else EXIT_OK


def cmd_kappa(args: argparse.Namespace, s: Settings) -> int:
    fmt = _format(s)
    a = agreement.read_sheet(args.sheet_a)
    b = agreement.read_sheet(args.sheet_b)
    result = agreement.analyze(a, b)
    if result.degenerate:
        _diag("warning: kappa undefined (chance agreement is 1)")
    _write(report.emit(report.agreement_report(result), fmt, args.stamp), args.out)
    return EXIT_OK


def cmd_lookup(args: argparse.Namespace, s: Settings) -> int:
    core = _load_core(s.core)
    sub = framework_core.lookup(core, args.subcategory)
    m = None
    try:
        m = _load_mapping(s.mapping, core).get(sub.id)
    except FormatError as exc:
        _diag(f"warning: mapping not loaded: {exc}")
    if args.format == "json":
        doc = {
            "id": str(sub.id),
            "description": sub.description,
            "references": {r.standard.value: list(r.clauses) for r in sub.references},
        }
        if m is not None:
            doc["categories"] = [c.value for c in m.categories]
            doc["facets"] = {f.facet_id: f.category.value for f in m.facets}
            doc["provenance"] = m.provenance.value
        print(json.dumps(doc, sort_keys=True, indent=2))
        return EXIT_OK
    print(f"{sub.id}: {sub.description}")
    for std in Standard:
        clauses = sub.clauses(std)
        if clauses:
            print(f"  {std.value}: {', '.join(clauses)}")
    if m is not None:
        line = f"  quality cost: {', '.join(c.value for c in m.categories)} ({m.provenance.value})"
        if m.facets:
            line += "; facets " + ", ".join(f"{f.facet_id}={f.category.value}" for f in m.facets)
        print(line)
    return EXIT_OK


def cmd_csc(args: argparse.Namespace, s: Settings) -> int:
    by_number = {c.control_number: c for c in mapping.csc_examples()}
    if args.number not in by_number:
        raise UsageError(f"CSC number must be 1-20, got {args.number}")
    c = by_number[args.number]
    print(f"CSC {c.control_number}: {c.title}")
    for category in mapping.QualityCostCategory:
        if category in c.roles:
            print(f"  {category.value}: {c.roles[category]}")
    return EXIT_OK


def cmd_rosi(args: argparse.Namespace, s: Settings) -> int:
    value = metrics.rosi(ledger.Money(args.benefit, s.currency), ledger.Money(args.cost, s.currency))
    print(metrics.format_percent(value))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "report": cmd_report,
    "kappa": cmd_kappa,
    "lookup": cmd_lookup,
    "csc": cmd_csc,
    "rosi": cmd_rosi,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](args, settings)
    except UsageError as exc:
        _diag(f"usage error: {exc}")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except NotFoundError as exc:
        _diag(f"error: {exc}")
        return EXIT_FINDINGS
    except (CcoqError, OSError) as exc:
        _diag(f"error: {exc}")
        return EXIT_FINDINGS


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
