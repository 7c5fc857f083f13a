"""``livecase`` command-line tool.

Exit codes:

========  ==========================================================
validate  0 no errors, 1 error findings, 2 I/O or parse failure
evaluate  0 green, 1 amber, 2 red, 3 operational failure
impact    0 all unaffected, 1 something impacted, 3 unknown target,
          malformed events or I/O failure
init      0 written, 1 file exists (no ``--force``), 2 I/O failure
fta       0 quantified within budget, 1 placeholder rates or budget
          exceeded, 2 missing tree, parse or I/O failure
ingest    0 all records accepted, 1 some record rejected, 2 I/O failure
========  ==========================================================
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Sequence, TextIO

from livecase.argument import SafetyCase
from livecase.config import FORMATS, RunConfig, find_config
from livecase.evidence import EvidenceRegistry
from livecase.exceptions import JournalError, PlaceholderRateError, RejectedInput
from livecase.fault_tree import (
    allocate_budget,
    check_budgets,
    minimal_cut_sets,
    top_probability,
)
from livecase.hazard_log import HazardLog, RiskMatrix, load_log
from livecase.impact import LinkAnnotation, parse_events, propagate
from livecase.report import FORMAT_VERSION, CaseVerdict, evaluate_case, lint_case, render_text, to_structured
from livecase.scdl import parse_file, print_case
from livecase.spi import (
    ALL_DATA,
    TelemetryDiagnostic,
    TelemetryStore,
    Window,
    format_telemetry_record,
    parse_telemetry_line,
)
from livecase.template import instantiate_oascf_template

DEFAULT_CASE = "case.scdl"

VERDICT_EXIT = {CaseVerdict.GREEN: 0, CaseVerdict.AMBER: 1, CaseVerdict.RED: 2}


class CommandFailed(Exception):
    """Abort a command with a message and an exit code."""

    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same folder, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Context:
    def __init__(self, args: argparse.Namespace, config: RunConfig, out: TextIO, err: TextIO) -> None:
        self.args = args
        self.config = config
        self.out = out
        self.err = err

    @property
    def structured(self) -> bool:
        return self.config.output_format == "structured"

    def emit(self, text: str) -> None:
        output = getattr(self.args, "output", None)
        if output:
            atomic_write(Path(output), text)
        else:
            self.out.write(text)

    def case_path(self) -> Path:
        return self.config.case_path or Path(DEFAULT_CASE)

    def load_case(self, failure_code: int) -> SafetyCase:
        path = self.case_path()
        try:
            case, diagnostics = parse_file(path)
        except OSError as exc:
            raise CommandFailed(f"cannot read case {path}: {exc.strerror or exc}", failure_code) from None
        for d in diagnostics:
            print(f"{path}:{d}", file=self.err)
        if case is None:
            raise CommandFailed(f"{path}: case does not parse", failure_code)
        return case

    def hazard_log(self, case: SafetyCase, failure_code: int) -> HazardLog | None:
        path = self.config.hazard_log_path
        if path is None and case.hazard_log_ref:
            path = self.case_path().parent / case.hazard_log_ref
        if path is None:
            return None
        try:
            return load_log(path)
        except OSError as exc:
            raise CommandFailed(f"cannot read hazard log {path}: {exc.strerror or exc}", failure_code) from None
        except RejectedInput as exc:
            raise CommandFailed(str(exc), failure_code) from None

    def risk_matrix(self, failure_code: int) -> RiskMatrix | None:
        path = self.config.risk_matrix_path
        if path is None:
            return None
        try:
            return RiskMatrix.load(path)
        except OSError as exc:
            raise CommandFailed(f"cannot read risk matrix {path}: {exc.strerror or exc}", failure_code) from None
        except RejectedInput as exc:
            raise CommandFailed(f"{path}: {exc}", failure_code) from None


# --- commands ----------------------------------------------------------------

def cmd_validate(ctx: _Context) -> int:
    case = ctx.load_case(2)
    log = ctx.hazard_log(case, 2)
    matrix = ctx.risk_matrix(2)
    report = lint_case(case, log, matrix, fan_in=ctx.config.fan_in,
                       artifact_fan_out=ctx.config.artifact_fan_out)
    if ctx.structured:
        ctx.emit(to_structured({
            "format_version": FORMAT_VERSION,
            "command": "validate",
            "case": case.name,
            "ok": report.ok,
            "findings": [f.as_dict() for f in report.findings],
        }))
    else:
        lines = [f"{f.severity.value}: {f.rule_id}: {f.element_id}: {f.message}" for f in report.findings]
        lines.append(f"{case.name}: {len(report.errors)} error(s), {len(report.warnings)} warning(s)")
        ctx.emit("\n".join(lines) + "\n")
    return 0 if report.ok else 1


def _read_telemetry(paths: Sequence[Path], store: TelemetryStore) -> list[TelemetryDiagnostic]:
    diagnostics = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            report = store.ingest(fh.read().splitlines())
        diagnostics.extend(TelemetryDiagnostic(d.line, f"{path.name}: {d.message}") for d in report.diagnostics)
    return diagnostics


def cmd_evaluate(ctx: _Context) -> int:
    cfg = ctx.config
    case = ctx.load_case(3)
    log = ctx.hazard_log(case, 3)
    matrix = ctx.risk_matrix(3)
    store = TelemetryStore()
    try:
        diagnostics = _read_telemetry(cfg.telemetry_paths, store)
        registry = EvidenceRegistry(cfg.evidence_journal_path) if cfg.evidence_journal_path else None
    except (OSError, JournalError) as exc:
        raise CommandFailed(f"evaluate: {exc}", 3) from None
    window = Window(cfg.phases) if cfg.phases is not None else ALL_DATA
    try:
        report = evaluate_case(
            case, store, registry, hazard_log=log, matrix=matrix, window=window,
            confidence=cfg.confidence, policy=cfg.policy, telemetry_diagnostics=diagnostics,
            fan_in=cfg.fan_in, artifact_fan_out=cfg.artifact_fan_out,
        )
    except RejectedInput as exc:
        raise CommandFailed(f"evaluate: {exc}", 3) from None
    ctx.emit(to_structured(report.as_dict()) if ctx.structured else render_text(report))
    return VERDICT_EXIT[report.verdict]


def _read_annotations(path: Path) -> list[LinkAnnotation]:
    annotations = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                annotations.append(LinkAnnotation(obj["link"], obj["sensitivity"], obj.get("rationale", "")))
            except (ValueError, KeyError, TypeError) as exc:
                raise RejectedInput(f"{path}:{lineno}: malformed annotation ({exc})") from None
    return annotations


def cmd_impact(ctx: _Context) -> int:
    case = ctx.load_case(3)
    try:
        with open(ctx.args.events, encoding="utf-8") as fh:
            events = parse_events(fh)
        annotations = _read_annotations(Path(ctx.args.annotations)) if ctx.args.annotations else None
        impact = propagate(case, events, annotations)
    except OSError as exc:
        raise CommandFailed(f"impact: {exc}", 3) from None
    except RejectedInput as exc:
        raise CommandFailed(f"impact: {exc}", 3) from None
    if ctx.structured:
        payload = {"format_version": FORMAT_VERSION, "command": "impact", "case": case.name}
        payload.update(impact.as_dict())
        ctx.emit(to_structured(payload))
    else:
        impacted = impact.impacted()
        lines = [f"{k}: {v.value}" for k, v in impacted.items()] or ["no element impacted"]
        lines += [f"  {s.source} -> {s.target} ({s.rule})" for s in impact.trace]
        ctx.emit("\n".join(lines) + "\n")
    return 0 if impact.all_unaffected else 1


def cmd_init(ctx: _Context) -> int:
    path = Path(ctx.args.path) if ctx.args.path else ctx.case_path()
    if path.exists() and not ctx.args.force:
        print(f"{path} exists; pass --force to overwrite", file=ctx.err)
        return 1
    try:
        case = instantiate_oascf_template(ctx.args.system, ctx.args.odd)
    except RejectedInput as exc:
        raise CommandFailed(f"init: {exc}", 2) from None
    try:
        atomic_write(path, print_case(case))
    except OSError as exc:
        raise CommandFailed(f"cannot write {path}: {exc.strerror or exc}", 2) from None
    print(f"wrote {path}", file=ctx.err)
    return 0


def cmd_fta(ctx: _Context) -> int:
    case = ctx.load_case(2)
    try:
        tree = case.tree(ctx.args.tree)
    except RejectedInput:
        known = ", ".join(t.id for t in case.fault_trees) or "none"
        raise CommandFailed(f"no fault tree {ctx.args.tree!r} (known: {known})", 2) from None
    cut_sets = minimal_cut_sets(tree)
    try:
        probability = top_probability(tree)
    except PlaceholderRateError as exc:
        probability = None
        guidance = str(exc)
    budgets = dict(tree.budgets)
    if ctx.args.target is not None:
        try:
            allocated = allocate_budget(tree, ctx.args.target)
        except RejectedInput as exc:
            raise CommandFailed(f"fta: {exc}", 2) from None
        budgets = {**allocated, **budgets}
    checks = check_budgets(tree, budgets) if probability is not None else []
    exceeded = [c for c in checks if not c.ok]
    if ctx.structured:
        ctx.emit(to_structured({
            "format_version": FORMAT_VERSION,
            "command": "fta",
            "tree": tree.id,
            "hazard": tree.hazard_id,
            "cut_sets": [list(c) for c in cut_sets],
            "top_probability": probability,
            "budgets": [{"node": c.node_id, "probability": c.probability, "budget": c.budget, "ok": c.ok}
                        for c in checks],
        }))
    else:
        lines = [f"fault tree {tree.id} (hazard {tree.hazard_id})", f"minimal cut sets ({len(cut_sets)}):"]
        lines += ["  {" + ", ".join(c) + "}" for c in cut_sets]
        if probability is None:
            lines.append(f"top probability: unquantified ({guidance})")
        else:
            lines.append(f"top probability: {probability:.6g}")
        lines += [f"  budget {c.node_id}: {c.probability:.6g} vs {c.budget:.6g} {'pass' if c.ok else 'FAIL'}"
                  for c in checks]
        ctx.emit("\n".join(lines) + "\n")
    return 1 if probability is None or exceeded else 0


def cmd_ingest(ctx: _Context) -> int:
    rejected = 0
    accepted: list[str] = []
    store = TelemetryStore()
    lines_out = []
    try:
        for name in ctx.args.telemetry:
            path = Path(name)
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh.read().splitlines(), start=1):
                    if not line.strip():
                        continue
                    try:
                        record = parse_telemetry_line(line)
                        store.add(record)
                    except RejectedInput as exc:
                        rejected += 1
                        lines_out.append(f"{path.name}:{lineno}: rejected: {exc}")
                        continue
                    accepted.append(format_telemetry_record(record))
        if ctx.args.into:
            into = Path(ctx.args.into)
            existing = into.read_text(encoding="utf-8") if into.exists() else ""
            if existing and not existing.endswith("\n"):
                existing += "\n"
            atomic_write(into, existing + "".join(a + "\n" for a in accepted))
        journal = ctx.config.evidence_journal_path
        if ctx.args.artifact and journal is None:
            raise CommandFailed("ingest: --artifact needs an evidence journal (--journal or config)", 2)
        registry = EvidenceRegistry(journal) if ctx.args.artifact else None
        for artifact_id, content_path in ctx.args.artifact or ():
            version = registry.register_version(artifact_id, Path(content_path).read_bytes(), uri=content_path)
            lines_out.append(f"artifact {artifact_id}: version {version.seq} {version.content_digest[:12]}")
    except (OSError, JournalError) as exc:
        raise CommandFailed(f"ingest: {exc}", 2) from None
    if ctx.structured:
        ctx.emit(to_structured({
            "format_version": FORMAT_VERSION,
            "command": "ingest",
            "accepted": len(accepted),
            "rejected": rejected,
            "messages": lines_out,
        }))
    else:
        ctx.emit("\n".join(lines_out + [f"{len(accepted)} accepted, {rejected} rejected"]) + "\n")
    return 1 if rejected else 0


# --- argument parsing --------------------------------------------------------

def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--case", default=default, help="SCDL case file (default: case.scdl)")
    parser.add_argument("--format", choices=FORMATS, default=default, help="output format")
    parser.add_argument("--config", default=default,
                        help="TOML run configuration (fallback: $LIVECASE_CONFIG)")
    parser.add_argument("--output", default=default, help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="livecase", description="Live safety-case engine")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler: Callable[[_Context], int], help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        _global_options(p, suppress=True)
        p.set_defaults(handler=handler)
        return p

    command("validate", cmd_validate, "parse and lint a case")

    p = command("evaluate", cmd_evaluate, "evaluate SPIs, evidence and fault trees")
    p.add_argument("--telemetry", nargs="+", help="telemetry JSON-lines files (override config)")
    p.add_argument("--journal", help="evidence journal (overrides config)")
    p.add_argument("--confidence", type=float, help="confidence target for every SPI")

    p = command("impact", cmd_impact, "change impact analysis")
    p.add_argument("events", help="change events, one JSON object per line")
    p.add_argument("--annotations", help="link annotations, one JSON object per line")

    p = command("init", cmd_init, "write a case from the OASCF template")
    p.add_argument("--system", required=True, help="name of the autonomous driver")
    p.add_argument("--odd", required=True, help="name of the operational design domain")
    p.add_argument("--path", help="file to write (default: --case)")
    p.add_argument("--force", action="store_true", help="overwrite an existing file")

    p = command("fta", cmd_fta, "quantitative fault-tree analysis")
    p.add_argument("tree", help="fault tree id")
    p.add_argument("--target", type=float, help="allocate budgets from this top-event target")

    p = command("ingest", cmd_ingest, "check telemetry and register evidence versions")
    p.add_argument("telemetry", nargs="*", help="telemetry JSON-lines files")
    p.add_argument("--into", help="append accepted records to this file")
    p.add_argument("--journal", help="evidence journal (overrides config)")
    p.add_argument("--artifact", nargs=2, action="append", metavar=("ID", "PATH"),
                   help="register PATH's content as a new version of artifact ID")
    return parser


_CONFIG_FAILURE = {"validate": 2, "evaluate": 3, "impact": 3, "init": 2, "fta": 2, "ingest": 2}


def main(argv: Sequence[str] | None = None, *, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = find_config(args.config)
        config = config.with_overrides(
            case_path=Path(args.case) if args.case else None,
            output_format=args.format,
            telemetry_paths=tuple(Path(t) for t in args.telemetry) if getattr(args, "telemetry", None)
            and args.command == "evaluate" else None,
            evidence_journal_path=Path(args.journal) if getattr(args, "journal", None) else None,
            confidence=getattr(args, "confidence", None),
        )
    except (OSError, RejectedInput) as exc:
        print(f"livecase: configuration: {exc}", file=err)
        return _CONFIG_FAILURE[args.command]
    ctx = _Context(args, config, out, err)
    try:
        return args.handler(ctx)
    except CommandFailed as exc:
        print(f"livecase {args.command}: {exc}", file=err)
        return exc.code
    except OSError as exc:
        print(f"livecase {args.command}: {exc}", file=err)
        return _CONFIG_FAILURE[args.command]


if __name__ == "__main__":
    sys.exit(main())
