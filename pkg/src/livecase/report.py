"""Whole-case evaluation and the red/amber/green case report.

Verdict mapping:

* red: any element ``violated``, any impact ``invalidated``, or any error finding;
* amber: otherwise, any element ``in_question`` or ``stale``, any impact
  ``needs_review``, or any warning finding;
* green: everything else.

Structured output is one JSON document with a ``format_version`` field, keys
sorted and no timestamps, so identical inputs give identical bytes.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping

from livecase.argument import (
    Finding,
    SafetyCase,
    Severity,
    Status,
    ValidationReport,
    validate_wellformed,
)
from livecase.evidence import EvidenceRegistry, Freshness
from livecase.exceptions import PlaceholderRateError
from livecase.fault_tree import BudgetCheck, check_budgets, refine_rates, top_probability
from livecase.hazard_log import HazardLog, RiskMatrix, trace_check
from livecase.impact import ImpactReport, ImpactState, structure_lint
from livecase.spi import (
    ALL_DATA,
    FleetDirective,
    RemediationPolicy,
    SpiEvaluation,
    SpiStatus,
    TelemetryDiagnostic,
    TelemetryStore,
    Window,
    detect_violations,
    evaluate,
)

FORMAT_VERSION = "1"


class CaseVerdict(str, enum.Enum):
    GREEN = "green"
    AMBER = "amber"
    RED = "red"


@dataclass(frozen=True)
class TreeSummary:
    tree_id: str
    hazard_id: str
    top_probability: float | None
    budgets: tuple[BudgetCheck, ...] = ()
    deviating_events: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, Any]:
        return {
            "tree": self.tree_id,
            "hazard": self.hazard_id,
            "top_probability": self.top_probability,
            "budgets": [
                {"node": b.node_id, "probability": b.probability, "budget": b.budget, "ok": b.ok}
                for b in self.budgets
            ],
            "deviating_events": list(self.deviating_events),
        }


@dataclass(frozen=True)
class CaseReport:
    case_name: str
    statuses: Mapping[str, Status] = field(default_factory=dict)
    evaluations: tuple[SpiEvaluation, ...] = ()
    evidence: Mapping[str, Freshness] = field(default_factory=dict)
    trees: tuple[TreeSummary, ...] = ()
    impact: ImpactReport | None = None
    findings: ValidationReport = field(default_factory=ValidationReport)
    directive: FleetDirective = FleetDirective.CONTINUE
    telemetry_diagnostics: tuple[TelemetryDiagnostic, ...] = ()

    @property
    def verdict(self) -> CaseVerdict:
        statuses = set(self.statuses.values())
        impacts = set(self.impact.states.values()) if self.impact is not None else set()
        if (Status.VIOLATED in statuses or ImpactState.INVALIDATED in impacts
                or self.findings.errors):
            return CaseVerdict.RED
        if (statuses & {Status.IN_QUESTION, Status.STALE} or ImpactState.NEEDS_REVIEW in impacts
                or self.findings.warnings):
            return CaseVerdict.AMBER
        return CaseVerdict.GREEN

    def as_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "case": self.case_name,
            "verdict": self.verdict.value,
            "directive": self.directive.value,
            "statuses": {k: v.value for k, v in sorted(self.statuses.items())},
            "spis": [_finite(ev.as_dict()) for ev in sorted(self.evaluations, key=lambda e: e.spi_id)],
            "evidence": {k: v.value for k, v in sorted(self.evidence.items())},
            "fault_trees": [t.as_dict() for t in sorted(self.trees, key=lambda t: t.tree_id)],
            "impact": self.impact.as_dict() if self.impact is not None else None,
            "findings": [f.as_dict() for f in self.findings.findings],
            "telemetry_diagnostics": [
                {"line": d.line, "message": d.message} for d in self.telemetry_diagnostics
            ],
        }


def _finite(obj: dict[str, Any]) -> dict[str, Any]:
    # JSON has no infinity; an unbounded rate is reported as null.
    return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in obj.items()}


def to_structured(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def summarize_tree(tree, evaluations: Mapping[str, SpiEvaluation] | None = None) -> tuple[TreeSummary, list[Finding]]:
    """Quantify one tree (with field-refined rates where SPI data exists)."""
    findings: list[Finding] = []
    deviating: tuple[str, ...] = ()
    if evaluations:
        tree, flags = refine_rates(tree, evaluations)
        deviating = tuple(sorted(f.event_id for f in flags))
        for flag in flags:
            findings.append(Finding(
                flag.event_id, Severity.WARNING, "rate_deviation",
                f"field rate of {flag.event_id} ({flag.spi_id}) departs from its prior "
                f"(p = {flag.p_value:.3g}); revisit the fault tree",
            ))
    try:
        probability = top_probability(tree)
    except PlaceholderRateError as exc:
        findings.append(Finding(tree.id, Severity.WARNING, "placeholder_rates", str(exc)))
        return TreeSummary(tree.id, tree.hazard_id, None, (), deviating), findings
    budgets = tuple(check_budgets(tree))
    for b in budgets:
        if not b.ok:
            findings.append(Finding(
                b.node_id, Severity.ERROR, "budget_exceeded",
                f"{b.node_id} probability {b.probability:.6g} exceeds its budget {b.budget:.6g}",
            ))
    return TreeSummary(tree.id, tree.hazard_id, probability, budgets, deviating), findings


def lint_case(
    case: SafetyCase,
    hazard_log: HazardLog | None = None,
    matrix: RiskMatrix | None = None,
    *,
    fan_in: int = 5,
    artifact_fan_out: int = 5,
) -> ValidationReport:
    """Well-formedness, hazard traceability and change-resilience lints together."""
    report = validate_wellformed(case).merged(structure_lint(case, fan_in, artifact_fan_out))
    if hazard_log is not None:
        report = report.merged(trace_check(hazard_log, case, matrix=matrix))
    return report


def evaluate_case(
    case: SafetyCase,
    store: TelemetryStore,
    registry: EvidenceRegistry | None = None,
    *,
    hazard_log: HazardLog | None = None,
    matrix: RiskMatrix | None = None,
    window: Window = ALL_DATA,
    confidence: float | None = None,
    policy: RemediationPolicy = RemediationPolicy(),
    telemetry_diagnostics: Iterable[TelemetryDiagnostic] = (),
    fan_in: int = 5,
    artifact_fan_out: int = 5,
) -> CaseReport:
    """Evaluate every SPI, resolve evidence, quantify trees and derive statuses.

    Without a registry every evidence link is unresolvable and so stale.
    """
    evaluations = {}
    for spi in case.spis:
        if confidence is not None:
            spi = replace(spi, confidence_target=confidence)
        evaluations[spi.id] = evaluate(spi, store, window)
    registry = registry if registry is not None else EvidenceRegistry()
    evidence = registry.evidence_state(case.links)
    remediation = detect_violations(case, evaluations, evidence, policy)

    lints = lint_case(case, hazard_log, matrix, fan_in=fan_in, artifact_fan_out=artifact_fan_out)
    extra: list[Finding] = []
    for ev in evaluations.values():
        if ev.status is SpiStatus.NO_DATA:
            extra.append(Finding(ev.spi_id, Severity.WARNING, "spi_no_data",
                                 f"SPI {ev.spi_id} has no telemetry in the window"))
    for diag in telemetry_diagnostics:
        extra.append(Finding(f"telemetry:{diag.line}", Severity.WARNING, "telemetry_rejected", diag.message))
    summaries = []
    for tree in case.fault_trees:
        summary, tree_findings = summarize_tree(tree, evaluations)
        summaries.append(summary)
        extra.extend(tree_findings)
    report = lints.merged(ValidationReport(tuple(extra)))
    return CaseReport(
        case.name,
        remediation.statuses,
        tuple(evaluations.values()),
        evidence,
        tuple(summaries),
        None,
        report,
        remediation.directive,
        tuple(telemetry_diagnostics),
    )


def render_text(report: CaseReport, now: datetime | None = None) -> str:
    now = (now or datetime.now(timezone.utc)).astimezone(timezone.utc)
    lines = [
        f"case: {report.case_name}",
        f"generated: {now.strftime('%Y-%m-%dT%H:%M:%SZ')}",
        f"verdict: {report.verdict.value.upper()}",
        f"fleet directive: {report.directive.value}",
    ]
    if report.statuses:
        lines.append("elements:")
        lines += [f"  {k:<12} {v.value}" for k, v in sorted(report.statuses.items())]
    if report.evaluations:
        lines.append("SPIs:")
        for ev in sorted(report.evaluations, key=lambda e: e.spi_id):
            unit = ev.unit.value if ev.unit else "?"
            lines.append(
                f"  {ev.spi_id:<12} {ev.status.value:<20} k={ev.total_events} T={ev.total_exposure:g} "
                f"rate={ev.point_rate:.6g}/{unit} upper={ev.upper_bound:.6g}"
            )
    if report.evidence:
        lines.append("evidence links:")
        lines += [f"  {k:<12} {v.value}" for k, v in sorted(report.evidence.items())]
    for tree in sorted(report.trees, key=lambda t: t.tree_id):
        prob = "unquantified" if tree.top_probability is None else f"{tree.top_probability:.6g}"
        lines.append(f"fault tree {tree.tree_id} (hazard {tree.hazard_id}): top probability {prob}")
        for b in tree.budgets:
            lines.append(f"  budget {b.node_id}: {b.probability:.6g} vs {b.budget:.6g} {'ok' if b.ok else 'EXCEEDED'}")
        if tree.deviating_events:
            lines.append(f"  deviating field rates: {', '.join(tree.deviating_events)}")
    if report.impact is not None:
        lines.append("impact:")
        impacted = report.impact.impacted()
        lines += [f"  {k:<12} {v.value}" for k, v in sorted(impacted.items())] or ["  (none)"]
    if report.findings.findings:
        lines.append("findings:")
        lines += [f"  {f.severity.value:<8} {f.rule_id:<22} {f.element_id}: {f.message}"
                  for f in report.findings.findings]
    return "\n".join(lines) + "\n"
