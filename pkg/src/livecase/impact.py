"""Change impact analysis over a safety case.

Rules, applied until nothing changes (states only escalate, and
``invalidated`` outranks ``needs_review``):

R1  content_changed / version_bumped / statement_edited on an artifact marks
    every solution linked to it ``needs_review``. Editorial kinds
    (version_bumped, statement_edited) are suppressed behind a
    ``robust_to_editorial`` link; content_changed is not.
R2  deleted on an artifact invalidates every linked solution.
R3  an edit to an element marks it ``needs_review``; deleting it invalidates
    it. An edit to an SPI definition counts as an edit of its claim(s).
R4  any impacted element marks each supported_by ancestor ``needs_review``.
R5  a changed context, assumption or justification marks every element that
    is in its context ``needs_review`` (then R4). Editorial edits are
    suppressed behind a ``robust_to_editorial`` edge annotation.

Impact never flows from a parent to its supporting evidence.
"""

from __future__ import annotations

import enum
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from livecase.argument import (
    CONTEXT_KINDS,
    EdgeKind,
    ElementKind,
    Finding,
    SafetyCase,
    Severity,
    ValidationReport,
)
from livecase.evidence import Sensitivity
from livecase.exceptions import RejectedInput


class ChangeKind(str, enum.Enum):
    CONTENT_CHANGED = "content_changed"
    DELETED = "deleted"
    VERSION_BUMPED = "version_bumped"
    STATEMENT_EDITED = "statement_edited"


EDITORIAL_KINDS = frozenset({ChangeKind.VERSION_BUMPED, ChangeKind.STATEMENT_EDITED})


class ImpactState(str, enum.Enum):
    UNAFFECTED = "unaffected"
    NEEDS_REVIEW = "needs_review"
    INVALIDATED = "invalidated"


_RANK = {ImpactState.UNAFFECTED: 0, ImpactState.NEEDS_REVIEW: 1, ImpactState.INVALIDATED: 2}


@dataclass(frozen=True)
class ChangeEvent:
    target: str
    kind: ChangeKind
    detail: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ChangeKind(self.kind))

    @property
    def editorial(self) -> bool:
        return self.kind in EDITORIAL_KINDS


@dataclass(frozen=True)
class LinkAnnotation:
    link_id: str
    sensitivity: Sensitivity
    rationale: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "sensitivity", Sensitivity(self.sensitivity))


@dataclass(frozen=True)
class TraceStep:
    source: str
    target: str
    rule: str


@dataclass(frozen=True)
class ImpactReport:
    states: Mapping[str, ImpactState]
    trace: tuple[TraceStep, ...] = field(default_factory=tuple)

    def impacted(self) -> dict[str, ImpactState]:
        return {k: v for k, v in self.states.items() if v is not ImpactState.UNAFFECTED}

    @property
    def all_unaffected(self) -> bool:
        return not self.impacted()

    def as_dict(self) -> dict[str, Any]:
        return {
            "states": {k: v.value for k, v in sorted(self.states.items())},
            "trace": [[s.source, s.target, s.rule] for s in self.trace],
        }


def _annotation_map(annotations: Iterable[LinkAnnotation] | Mapping[str, Any] | None) -> dict[str, Sensitivity]:
    if annotations is None:
        return {}
    if isinstance(annotations, Mapping):
        return {k: Sensitivity(getattr(v, "sensitivity", v)) for k, v in annotations.items()}
    out: dict[str, Sensitivity] = {}
    for ann in annotations:
        if ann.link_id in out:
            raise RejectedInput(f"more than one annotation for {ann.link_id!r}")
        out[ann.link_id] = ann.sensitivity
    return out


def resolve_target(case: SafetyCase, target: str) -> str:
    """Classify an event target as ``element``, ``spi`` or ``artifact``."""
    matches = []
    if case.has_element(target):
        matches.append("element")
    if any(s.id == target for s in case.spis):
        matches.append("spi")
    if any(link.artifact_id == target for link in case.links):
        matches.append("artifact")
    if not matches:
        raise RejectedInput(f"unknown change target {target!r}")
    if len(matches) > 1:
        raise RejectedInput(f"ambiguous change target {target!r} ({', '.join(matches)})")
    return matches[0]


def propagate(
    case: SafetyCase,
    events: Iterable[ChangeEvent],
    annotations: Iterable[LinkAnnotation] | Mapping[str, Any] | None = None,
) -> ImpactReport:
    events = list(events)
    sensitivity = _annotation_map(annotations)
    for link in case.links:
        sensitivity.setdefault(link.id, link.sensitivity)

    solutions_by_link: dict[str, list[str]] = defaultdict(list)
    for element in case.elements:
        for link_id in element.evidence_links:
            solutions_by_link[link_id].append(element.id)
    links_by_artifact: dict[str, list[str]] = defaultdict(list)
    for link in case.links:
        links_by_artifact[link.artifact_id].append(link.id)
    holders: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for edge in case.edges:
        if edge.kind is EdgeKind.IN_CONTEXT_OF:
            holders[edge.target].append((edge.source, edge.id))

    states = {e.id: ImpactState.UNAFFECTED for e in case.elements}
    steps: set[TraceStep] = set()
    queue: list[str] = []

    def escalate(source: str, element_id: str, state: ImpactState, rule: str) -> None:
        steps.add(TraceStep(source, element_id, rule))
        if _RANK[state] > _RANK[states[element_id]]:
            states[element_id] = state
            queue.append(element_id)

    def element_changed(source: str, element_id: str, kind: ChangeKind, editorial: bool) -> None:
        state = ImpactState.INVALIDATED if kind is ChangeKind.DELETED else ImpactState.NEEDS_REVIEW
        escalate(source, element_id, state, "R3")
        if case.element(element_id).kind in CONTEXT_KINDS:
            for holder, edge_id in holders.get(element_id, ()):
                if editorial and sensitivity.get(edge_id) is Sensitivity.ROBUST_TO_EDITORIAL:
                    continue
                escalate(element_id, holder, ImpactState.NEEDS_REVIEW, "R5")

    for event in events:
        what = resolve_target(case, event.target)
        if what == "artifact":
            for link_id in links_by_artifact[event.target]:
                for solution in solutions_by_link.get(link_id, ()):
                    if event.kind is ChangeKind.DELETED:
                        escalate(event.target, solution, ImpactState.INVALIDATED, "R2")
                    elif not event.editorial or sensitivity[link_id] is Sensitivity.STRICT:
                        escalate(event.target, solution, ImpactState.NEEDS_REVIEW, "R1")
        elif what == "spi":
            claims = {case.spi(event.target).claim_id}
            claims.update(e.id for e in case.elements if event.target in e.spi_refs)
            for claim in sorted(claims):
                element_changed(event.target, claim, ChangeKind.STATEMENT_EDITED, editorial=True)
        else:
            element_changed(event.target, event.target, event.kind, event.editorial)

    while queue:
        node = queue.pop()
        for parent in case.parents(node):
            escalate(node, parent, ImpactState.NEEDS_REVIEW, "R4")

    # R4 steps from every impacted node, so the trace does not depend on visiting order.
    for node, state in states.items():
        if state is not ImpactState.UNAFFECTED:
            for parent in case.parents(node):
                steps.add(TraceStep(node, parent, "R4"))
    trace = tuple(sorted(steps, key=lambda s: (s.target, s.source, s.rule)))
    return ImpactReport(dict(sorted(states.items())), trace)


def parse_events(lines: Iterable[str]) -> list[ChangeEvent]:
    """Read change events, one JSON object per line with target, kind, detail."""
    events = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("record must be a JSON object")
            extra = sorted(set(obj) - {"target", "kind", "detail"})
            if extra:
                raise ValueError("unknown field(s): " + ", ".join(extra))
            events.append(ChangeEvent(str(obj["target"]), ChangeKind(obj["kind"]), str(obj.get("detail", ""))))
        except (ValueError, KeyError, TypeError) as exc:
            raise RejectedInput(f"line {lineno}: malformed change event ({exc})") from None
    return events


def structure_lint(case: SafetyCase, fan_in: int = 5, artifact_fan_out: int = 5) -> ValidationReport:
    """Warn about structures that amplify change impact.

    ``fan_in`` bounds how many elements one solution may support;
    ``artifact_fan_out`` bounds how many solutions may strict-link one artifact.
    """
    findings = []
    for element in case.elements:
        if element.kind is ElementKind.SOLUTION:
            parents = set(case.parents(element.id))
            if len(parents) > fan_in:
                findings.append(Finding(
                    element.id, Severity.WARNING, "solution_fan_in",
                    f"solution {element.id} supports {len(parents)} elements (limit {fan_in})",
                ))
    strict_solutions: dict[str, set[str]] = defaultdict(set)
    for element in case.elements:
        for link_id in element.evidence_links:
            try:
                link = case.link(link_id)
            except RejectedInput:
                continue
            if link.sensitivity is Sensitivity.STRICT:
                strict_solutions[link.artifact_id].add(element.id)
    for artifact_id, solutions in sorted(strict_solutions.items()):
        if len(solutions) > artifact_fan_out:
            findings.append(Finding(
                artifact_id, Severity.WARNING, "artifact_fan_out",
                f"artifact {artifact_id} is strict-linked from {len(solutions)} solutions "
                f"(limit {artifact_fan_out})",
            ))
    return ValidationReport(tuple(findings))
