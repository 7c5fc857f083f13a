"""Hazard log: loss events, hazards, mitigations, risk assessment and tracing.

The log is persisted as a ``hazards.scdl-log`` file that reuses the SCDL
lexical rules::

    hazard_log "Pedestrian safety" {
      loss_event L1 "Collision with a pedestrian" severity catastrophic;
      hazard H1 "Vehicle does not yield to a crossing pedestrian" {
        loss_events: L1;
        fault_tree: FT_PED;
        status: mitigated;
        assessed catastrophic remote level serious at "2026-01-05T09:00:00Z";
      }
      function F1 "Pedestrian detection and emergency braking" mitigates H1 rigour 4;
      control OC1 "Routes avoid school zones" kind route_restriction mitigates H1 audit SPI_ROUTE;
      factor CF1 "Pedestrian occluded by a parked van" kind triggering_condition;
      pathway P1 for H1: CF1, CF2;
    }

A pathway is one recorded way the hazard can arise: every factor in it must
occur together. Risk matrices are TOML files (see :meth:`RiskMatrix.from_toml`).
"""

from __future__ import annotations

import enum
import sys
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping

from livecase._lexer import (
    Diagnostic,
    Lexer,
    SourceSpan,
    SyntaxProblem,
    Tok,
    Token,
    TokenStream,
    quote,
)
from livecase.argument import Finding, SafetyCase, Severity, ValidationReport
from livecase.exceptions import RejectedInput, StatusTransitionError
from livecase.fault_tree import (
    BasicEvent,
    EventKind,
    Gate,
    GateOp,
    QuantitativeFaultTree,
    refine_rates,
)
from livecase.spi import SpiEvaluation

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class RiskLevel(str, enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    SERIOUS = "serious"
    HIGH = "high"

    @property
    def rank(self) -> int:
        return _LEVEL_ORDER.index(self)


_LEVEL_ORDER = [RiskLevel.LOW, RiskLevel.MEDIUM, RiskLevel.SERIOUS, RiskLevel.HIGH]

DEFAULT_RIGOUR = {RiskLevel.LOW: 1, RiskLevel.MEDIUM: 2, RiskLevel.SERIOUS: 3, RiskLevel.HIGH: 4}


class HazardStatus(str, enum.Enum):
    OPEN = "open"
    MITIGATED = "mitigated"
    VERIFIED = "verified"
    VALIDATED = "validated"


_STATUS_ORDER = list(HazardStatus)


class ControlKind(str, enum.Enum):
    ROUTE_RESTRICTION = "route_restriction"
    MAINTENANCE = "maintenance"
    SAFETY_DRIVER = "safety_driver"
    OTHER = "other"


@dataclass(frozen=True)
class RiskMatrix:
    """Severity x probability lookup.

    Axes run from least to worst. ``cells[(severity, probability)]`` gives the
    risk level; ``acceptable`` is the highest level accepted without
    mitigation; ``rigour`` maps each level to the minimum rigour tier (1-4) of
    a safety-critical function mitigating a hazard at that level.
    """

    severities: tuple[str, ...]
    probabilities: tuple[str, ...]
    cells: Mapping[tuple[str, str], RiskLevel]
    acceptable: RiskLevel = RiskLevel.MEDIUM
    rigour: Mapping[RiskLevel, int] = field(default_factory=lambda: dict(DEFAULT_RIGOUR))

    def __post_init__(self) -> None:
        object.__setattr__(self, "severities", tuple(self.severities))
        object.__setattr__(self, "probabilities", tuple(self.probabilities))
        object.__setattr__(self, "acceptable", RiskLevel(self.acceptable))
        if not self.severities or not self.probabilities:
            raise RejectedInput("risk matrix axes must be non-empty")
        for name, axis in (("severity", self.severities), ("probability", self.probabilities)):
            if len(set(axis)) != len(axis):
                raise RejectedInput(f"risk matrix {name} axis has duplicate labels")
        try:
            cells = {key: RiskLevel(value) for key, value in self.cells.items()}
            rigour = {RiskLevel(k): int(v) for k, v in self.rigour.items()}
        except ValueError as exc:
            raise RejectedInput(f"risk matrix: {exc}") from None
        expected = {(s, p) for s in self.severities for p in self.probabilities}
        if set(cells) != expected:
            missing = sorted(expected - set(cells))
            extra = sorted(set(cells) - expected)
            raise RejectedInput(f"risk matrix cells are not total (missing {missing}, unexpected {extra})")
        for i, s in enumerate(self.severities):
            for j, p in enumerate(self.probabilities):
                here = cells[(s, p)].rank
                if i + 1 < len(self.severities) and cells[(self.severities[i + 1], p)].rank < here:
                    raise RejectedInput(f"risk matrix is not monotone in severity at ({s}, {p})")
                if j + 1 < len(self.probabilities) and cells[(s, self.probabilities[j + 1])].rank < here:
                    raise RejectedInput(f"risk matrix is not monotone in probability at ({s}, {p})")
        if set(rigour) != set(RiskLevel):
            raise RejectedInput("rigour table must give a tier for every risk level")
        tiers = [rigour[level] for level in _LEVEL_ORDER]
        if any(not 1 <= t <= 4 for t in tiers) or tiers != sorted(tiers):
            raise RejectedInput("rigour tiers must lie in 1..4 and not decrease with risk level")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "rigour", rigour)

    def level(self, severity: str, probability: str) -> RiskLevel:
        if severity not in self.severities:
            raise RejectedInput(f"unknown severity label {severity!r}")
        if probability not in self.probabilities:
            raise RejectedInput(f"unknown probability label {probability!r}")
        return self.cells[(severity, probability)]

    def is_acceptable(self, level: RiskLevel) -> bool:
        return RiskLevel(level).rank <= self.acceptable.rank

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RiskMatrix":
        """Build from the TOML layout::

            severity = ["marginal", "critical", "catastrophic"]
            probability = ["remote", "occasional", "frequent"]
            cells = [["low", "low", "medium"], ...]   # one row per severity
            acceptable = "medium"
            [rigour]                                   # optional
            low = 1
            medium = 2
            serious = 3
            high = 4
        """
        unknown = sorted(set(data) - {"severity", "probability", "cells", "acceptable", "rigour"})
        if unknown:
            raise RejectedInput(f"risk matrix: unknown key(s) {', '.join(unknown)}")
        try:
            severities = [str(s) for s in data["severity"]]
            probabilities = [str(p) for p in data["probability"]]
            rows = data["cells"]
        except KeyError as exc:
            raise RejectedInput(f"risk matrix: missing key {exc.args[0]!r}") from None
        if len(rows) != len(severities) or any(len(r) != len(probabilities) for r in rows):
            raise RejectedInput("risk matrix: cells must have one row per severity and one column per probability")
        cells = {(s, p): rows[i][j] for i, s in enumerate(severities) for j, p in enumerate(probabilities)}
        return cls(
            tuple(severities),
            tuple(probabilities),
            cells,
            data.get("acceptable", RiskLevel.MEDIUM.value),
            data.get("rigour", {k.value: v for k, v in DEFAULT_RIGOUR.items()}),
        )

    @classmethod
    def from_toml(cls, text: str) -> "RiskMatrix":
        try:
            return cls.from_mapping(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise RejectedInput(f"risk matrix is not valid TOML: {exc}") from None

    @classmethod
    def load(cls, path) -> "RiskMatrix":
        with open(path, encoding="utf-8") as fh:
            return cls.from_toml(fh.read())


@dataclass(frozen=True)
class LossEvent:
    id: str
    description: str
    severity_class: str


@dataclass(frozen=True)
class RiskAssessment:
    severity: str
    probability: str
    level: RiskLevel
    assessed_at: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "level", RiskLevel(self.level))


@dataclass(frozen=True)
class Hazard:
    id: str
    description: str
    loss_event_ids: tuple[str, ...] = ()
    fault_tree_id: str | None = None
    status: HazardStatus = HazardStatus.OPEN
    assessment: RiskAssessment | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "loss_event_ids", tuple(self.loss_event_ids))
        object.__setattr__(self, "status", HazardStatus(self.status))


@dataclass(frozen=True)
class SafetyCriticalFunction:
    id: str
    description: str
    hazard_ids: tuple[str, ...]
    level_of_rigour: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "hazard_ids", tuple(self.hazard_ids))
        if not 1 <= self.level_of_rigour <= 4:
            raise RejectedInput(f"function {self.id}: level of rigour must lie in 1..4")


@dataclass(frozen=True)
class OperationalControl:
    id: str
    description: str
    kind: ControlKind
    hazard_ids: tuple[str, ...]
    audit_spi_ref: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ControlKind(self.kind))
        object.__setattr__(self, "hazard_ids", tuple(self.hazard_ids))


@dataclass(frozen=True)
class CausalFactor:
    id: str
    description: str
    kind: EventKind = EventKind.CAUSAL_FACTOR

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EventKind(self.kind))


@dataclass(frozen=True)
class CausalPathway:
    """One recorded combination of factors that together lead to a hazard."""

    id: str
    hazard_id: str
    factor_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "factor_ids", tuple(self.factor_ids))
        if not self.factor_ids:
            raise RejectedInput(f"pathway {self.id} names no causal factors")


def _by_id(items: Iterable[Any]) -> dict[str, Any]:
    return {item.id: item for item in sorted(items, key=lambda i: i.id)}


class HazardLog:
    """Mutable container of hazard-log records.

    Mutations take an internal lock; :meth:`snapshot` hands out an
    independent copy for readers.
    """

    def __init__(
        self,
        name: str,
        loss_events: Iterable[LossEvent] = (),
        hazards: Iterable[Hazard] = (),
        functions: Iterable[SafetyCriticalFunction] = (),
        controls: Iterable[OperationalControl] = (),
        factors: Iterable[CausalFactor] = (),
        pathways: Iterable[CausalPathway] = (),
    ) -> None:
        self.name = name
        self.loss_events: dict[str, LossEvent] = _by_id(loss_events)
        self.hazards: dict[str, Hazard] = _by_id(hazards)
        self.functions: dict[str, SafetyCriticalFunction] = _by_id(functions)
        self.controls: dict[str, OperationalControl] = _by_id(controls)
        self.factors: dict[str, CausalFactor] = _by_id(factors)
        self.pathways: dict[str, CausalPathway] = _by_id(pathways)
        self._lock = threading.Lock()

    def _key(self) -> tuple:
        return (self.name, self.loss_events, self.hazards, self.functions,
                self.controls, self.factors, self.pathways)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, HazardLog) and self._key() == other._key()

    def __repr__(self) -> str:
        return f"HazardLog({self.name!r}, {len(self.hazards)} hazards)"

    def snapshot(self) -> "HazardLog":
        with self._lock:
            return HazardLog(self.name, self.loss_events.values(), self.hazards.values(),
                             self.functions.values(), self.controls.values(),
                             self.factors.values(), self.pathways.values())

    def hazard(self, hazard_id: str) -> Hazard:
        try:
            return self.hazards[hazard_id]
        except KeyError:
            raise RejectedInput(f"unknown hazard {hazard_id!r}") from None

    def replace_hazard(self, hazard: Hazard) -> None:
        with self._lock:
            if hazard.id not in self.hazards:
                raise RejectedInput(f"unknown hazard {hazard.id!r}")
            self.hazards[hazard.id] = hazard

    def mitigations(self, hazard_id: str) -> tuple[list[str], list[str]]:
        functions = [f.id for f in self.functions.values() if hazard_id in f.hazard_ids]
        controls = [c.id for c in self.controls.values() if hazard_id in c.hazard_ids]
        return functions, controls

    def pathways_for(self, hazard_id: str) -> list[CausalPathway]:
        return [p for p in self.pathways.values() if p.hazard_id == hazard_id]

    def ids(self) -> set[str]:
        return (set(self.loss_events) | set(self.hazards) | set(self.functions)
                | set(self.controls) | set(self.factors) | set(self.pathways))


# --- operations --------------------------------------------------------------

def assess_risk(
    log: HazardLog,
    hazard_id: str,
    severity: str,
    probability: str,
    matrix: RiskMatrix,
    *,
    at: datetime | None = None,
) -> RiskLevel:
    """Look up the risk level and record the assessment on the hazard."""
    hazard = log.hazard(hazard_id)
    level = matrix.level(severity, probability)
    when = (at or datetime.now(timezone.utc)).astimezone(timezone.utc).replace(microsecond=0)
    log.replace_hazard(replace(hazard, assessment=RiskAssessment(severity, probability, level, when)))
    return level


def _trees_by_id(case: SafetyCase | None, trees: Iterable[QuantitativeFaultTree]) -> dict[str, QuantitativeFaultTree]:
    out = {t.id: t for t in case.fault_trees} if case is not None else {}
    out.update((t.id, t) for t in trees)
    return out


def trace_check(
    log: HazardLog,
    case: SafetyCase | None = None,
    trees: Iterable[QuantitativeFaultTree] = (),
    matrix: RiskMatrix | None = None,
) -> ValidationReport:
    """Check traceability from loss events through hazards to mitigations and trees.

    Trees come from ``case`` (if given) plus ``trees``. Without a matrix every
    assessed level above ``low`` counts as needing mitigation and the default
    rigour table applies.
    """
    findings: list[Finding] = []

    def add(element_id: str, severity: Severity, rule: str, message: str) -> None:
        findings.append(Finding(element_id, severity, rule, message))

    tree_map = _trees_by_id(case, trees)
    spi_ids = {s.id for s in case.spis} if case is not None else None
    rigour = matrix.rigour if matrix is not None else DEFAULT_RIGOUR

    def acceptable(level: RiskLevel) -> bool:
        return matrix.is_acceptable(level) if matrix is not None else level is RiskLevel.LOW

    def dangling(owner: str, ref: str, what: str) -> None:
        add(owner, Severity.ERROR, "dangling_reference", f"{owner} refers to unknown {what} {ref}")

    for loss in log.loss_events.values():
        if matrix is not None and loss.severity_class not in matrix.severities:
            add(loss.id, Severity.ERROR, "unknown_severity_class",
                f"loss event {loss.id} has severity class {loss.severity_class!r}, not on the matrix axis")

    for hazard in log.hazards.values():
        if not hazard.loss_event_ids:
            add(hazard.id, Severity.ERROR, "hazard_no_loss_event", f"hazard {hazard.id} leads to no loss event")
        for ref in hazard.loss_event_ids:
            if ref not in log.loss_events:
                dangling(hazard.id, ref, "loss event")
        functions, controls = log.mitigations(hazard.id)
        if hazard.assessment is not None and not acceptable(hazard.assessment.level):
            if not functions and not controls:
                add(hazard.id, Severity.ERROR, "unmitigated_hazard",
                    f"hazard {hazard.id} is assessed {hazard.assessment.level.value}, above the acceptance "
                    "level, with no safety-critical function or operational control")
        if hazard.fault_tree_id is not None and hazard.fault_tree_id not in tree_map:
            dangling(hazard.id, hazard.fault_tree_id, "fault tree")
        elif hazard.fault_tree_id is None and not any(t.hazard_id == hazard.id for t in tree_map.values()):
            add(hazard.id, Severity.WARNING, "hazard_no_fault_tree", f"hazard {hazard.id} has no fault tree")

    for function in log.functions.values():
        worst = None
        for ref in function.hazard_ids:
            hazard = log.hazards.get(ref)
            if hazard is None:
                dangling(function.id, ref, "hazard")
            elif hazard.assessment is not None:
                if worst is None or hazard.assessment.level.rank > worst.rank:
                    worst = hazard.assessment.level
        if worst is not None and function.level_of_rigour < rigour[worst]:
            add(function.id, Severity.ERROR, "insufficient_rigour",
                f"function {function.id} has rigour {function.level_of_rigour}; "
                f"a {worst.value} hazard needs at least {rigour[worst]}")

    for control in log.controls.values():
        for ref in control.hazard_ids:
            if ref not in log.hazards:
                dangling(control.id, ref, "hazard")
        if control.audit_spi_ref is None:
            add(control.id, Severity.WARNING, "control_no_audit_spi",
                f"operational control {control.id} has no audit SPI")
        elif spi_ids is not None and control.audit_spi_ref not in spi_ids:
            dangling(control.id, control.audit_spi_ref, "SPI")

    for pathway in log.pathways.values():
        if pathway.hazard_id not in log.hazards:
            dangling(pathway.id, pathway.hazard_id, "hazard")
        for ref in pathway.factor_ids:
            if ref not in log.factors:
                dangling(pathway.id, ref, "causal factor")

    for tree in tree_map.values():
        if tree.hazard_id not in log.hazards:
            add(tree.id, Severity.ERROR, "tree_unknown_hazard",
                f"fault tree {tree.id} models hazard {tree.hazard_id}, which is not in the log")
    return ValidationReport(tuple(findings))


def set_status(
    log: HazardLog,
    hazard_id: str,
    status: HazardStatus | str,
    *,
    trees: Iterable[QuantitativeFaultTree] = (),
    evaluations: Mapping[str, SpiEvaluation] | None = None,
    alpha: float = 0.05,
) -> Hazard:
    """Move a hazard forward in its lifecycle, or back to ``open``.

    ``validated`` requires the hazard's fault tree (looked up in ``trees``)
    to have every SPI-annotated event evaluated with data and none deviating
    from its prior rate.
    """
    status = HazardStatus(status)
    hazard = log.hazard(hazard_id)
    current = _STATUS_ORDER.index(hazard.status)
    target = _STATUS_ORDER.index(status)
    if status is not HazardStatus.OPEN and target <= current:
        raise StatusTransitionError(f"hazard {hazard_id}: cannot move from {hazard.status.value} to {status.value}")
    if status is HazardStatus.VALIDATED:
        tree_map = {t.id: t for t in trees}
        tree = tree_map.get(hazard.fault_tree_id) if hazard.fault_tree_id else None
        if tree is None:
            raise StatusTransitionError(f"hazard {hazard_id}: validation needs an attached fault tree")
        evaluations = evaluations or {}
        missing = sorted(e.id for e in tree.basic_events()
                         if e.spi_ref is not None and (e.spi_ref not in evaluations
                                                       or evaluations[e.spi_ref].total_exposure <= 0))
        if missing:
            raise StatusTransitionError(
                f"hazard {hazard_id}: SPI-annotated events without field data: {', '.join(missing)}")
        _, flags = refine_rates(tree, evaluations, alpha)
        if flags:
            raise StatusTransitionError(
                f"hazard {hazard_id}: field rates deviate for {', '.join(f.event_id for f in flags)}")
    updated = replace(hazard, status=status)
    log.replace_hazard(updated)
    return updated


def generate_tree_skeleton(log: HazardLog, hazard_id: str, tree_id: str | None = None) -> QuantitativeFaultTree:
    """Draft a fault tree from the hazard's recorded causal pathways.

    The top OR gate has one branch per pathway: the factor itself for a
    single-factor pathway, else an AND gate named after the pathway. Every
    rate is a placeholder, so the skeleton cannot be quantified until edited.
    """
    log.hazard(hazard_id)
    pathways = log.pathways_for(hazard_id)
    if not pathways:
        raise RejectedInput(
            f"hazard {hazard_id} has no recorded causal pathways; add 'pathway <id> for {hazard_id}: "
            "<factor>, ...;' rows to the hazard log before generating a fault tree"
        )
    tree_id = tree_id or f"FT_{hazard_id}"

    def basic(factor_id: str) -> BasicEvent:
        factor = log.factors.get(factor_id)
        if factor is None:
            raise RejectedInput(f"pathway refers to unknown causal factor {factor_id!r}")
        return BasicEvent(factor.id, None, kind=factor.kind, description=factor.description)

    branches: list[Gate | BasicEvent] = []
    for pathway in pathways:
        events = [basic(f) for f in pathway.factor_ids]
        branches.append(events[0] if len(events) == 1 else Gate(pathway.id, GateOp.AND, tuple(events)))
    return QuantitativeFaultTree(tree_id, hazard_id, Gate(f"{tree_id}.top", GateOp.OR, tuple(branches)))


# --- persistence -------------------------------------------------------------

class _LogParser:
    def __init__(self, text: str) -> None:
        tokens, self.diagnostics = Lexer(text).tokenize()
        self.ts = TokenStream(tokens)
        self.items: dict[str, list[Any]] = {k: [] for k in
                                            ("loss", "hazard", "function", "control", "factor", "pathway")}
        self.declared: dict[str, SourceSpan] = {}

    def error(self, span: SourceSpan, message: str) -> None:
        self.diagnostics.append(Diagnostic(span, "error", message))

    def declare(self, tok: Token) -> None:
        if tok.text in self.declared:
            self.error(tok.span, f"duplicate id {tok.text} (first declared at {self.declared[tok.text]})")
        else:
            self.declared[tok.text] = tok.span

    def ident(self, what: str = "identifier") -> Token:
        return self.ts.expect_kind(Tok.IDENT, what)

    def label(self, what: str) -> str:
        tok = self.ts.current
        if tok.kind in (Tok.IDENT, Tok.STRING):
            self.ts.advance()
            return str(tok.value)
        raise SyntaxProblem(tok, f"expected {what}, found {tok.describe()}")

    def id_list(self) -> tuple[str, ...]:
        items = [self.ident().text]
        while self.ts.accept(","):
            items.append(self.ident().text)
        return tuple(items)

    def parse(self) -> HazardLog | None:
        ts = self.ts
        try:
            ts.expect("hazard_log")
            name = ts.expect_kind(Tok.STRING, "log name").value
            ts.expect("{")
        except SyntaxProblem as problem:
            self.error(problem.token.span, problem.message)
            return None
        while not ts.at("}") and ts.current.kind is not Tok.EOF:
            start = ts.pos
            try:
                self.item()
            except (SyntaxProblem, RejectedInput) as problem:
                tok = problem.token if isinstance(problem, SyntaxProblem) else ts.tokens[start]
                self.error(tok.span, getattr(problem, "message", str(problem)))
                ts.recover(start)
                if ts.pos == start and not ts.at("}"):
                    ts.advance()
        if not ts.accept("}"):
            self.error(ts.current.span, "expected '}' closing the hazard log")
        elif ts.current.kind is not Tok.EOF:
            self.error(ts.current.span, f"unexpected {ts.current.describe()} after the hazard log")
        if any(d.severity == "error" for d in self.diagnostics):
            return None
        i = self.items
        return HazardLog(name, i["loss"], i["hazard"], i["function"], i["control"], i["factor"], i["pathway"])

    def item(self) -> None:
        ts = self.ts
        keyword = self.ident("item keyword")
        handler = {
            "loss_event": self.loss_event,
            "hazard": self.hazard,
            "function": self.function,
            "control": self.control,
            "factor": self.factor,
            "pathway": self.pathway,
        }.get(keyword.text)
        if handler is None:
            raise SyntaxProblem(keyword, f"unknown item {keyword.text!r}")
        ident = self.ident(f"{keyword.text} id")
        self.declare(ident)
        handler(ident.text)
        if keyword.text != "hazard":
            ts.expect(";")

    def string(self) -> str:
        return self.ts.expect_kind(Tok.STRING, "description").value

    def loss_event(self, ident: str) -> None:
        description = self.string()
        self.ts.expect("severity")
        self.items["loss"].append(LossEvent(ident, description, self.label("severity class")))

    def hazard(self, ident: str) -> None:
        ts = self.ts
        description = self.string()
        fields: dict[str, Any] = {}
        ts.expect("{")
        while not ts.accept("}"):
            key = ts.expect_one_of(("loss_events", "fault_tree", "status", "assessed"), "hazard field")
            if key.text in fields:
                raise SyntaxProblem(key, f"hazard field {key.text} given twice")
            if key.text == "assessed":
                severity = self.label("severity label")
                probability = self.label("probability label")
                ts.expect("level")
                level = RiskLevel(ts.expect_one_of([lv.value for lv in RiskLevel], "risk level").text)
                ts.expect("at")
                stamp = ts.expect_kind(Tok.STRING, "timestamp")
                try:
                    when = datetime.strptime(stamp.value, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
                except ValueError:
                    raise SyntaxProblem(stamp, "timestamp must look like 2026-01-31T12:00:00Z") from None
                fields["assessed"] = RiskAssessment(severity, probability, level, when)
            else:
                ts.expect(":")
                if key.text == "loss_events":
                    fields[key.text] = self.id_list()
                elif key.text == "fault_tree":
                    fields[key.text] = self.ident("fault tree id").text
                else:
                    fields[key.text] = HazardStatus(
                        ts.expect_one_of([s.value for s in HazardStatus], "status").text)
            ts.expect(";")
        self.items["hazard"].append(Hazard(
            ident, description, fields.get("loss_events", ()), fields.get("fault_tree"),
            fields.get("status", HazardStatus.OPEN), fields.get("assessed"),
        ))

    def function(self, ident: str) -> None:
        description = self.string()
        self.ts.expect("mitigates")
        hazards = self.id_list()
        self.ts.expect("rigour")
        tier = self.ts.expect_kind(Tok.NUMBER, "rigour tier")
        if tier.value != int(tier.value):
            raise SyntaxProblem(tier, "rigour tier must be a whole number")
        self.items["function"].append(SafetyCriticalFunction(ident, description, hazards, int(tier.value)))

    def control(self, ident: str) -> None:
        ts = self.ts
        description = self.string()
        ts.expect("kind")
        kind = ts.expect_one_of([k.value for k in ControlKind], "control kind").text
        ts.expect("mitigates")
        hazards = self.id_list()
        audit = self.ident("audit SPI id").text if ts.accept("audit") else None
        self.items["control"].append(OperationalControl(ident, description, kind, hazards, audit))

    def factor(self, ident: str) -> None:
        description = self.string()
        kind = EventKind.CAUSAL_FACTOR
        if self.ts.accept("kind"):
            kind = EventKind(self.ts.expect_one_of([k.value for k in EventKind], "event kind").text)
        self.items["factor"].append(CausalFactor(ident, description, kind))

    def pathway(self, ident: str) -> None:
        self.ts.expect("for")
        hazard = self.ident("hazard id").text
        self.ts.expect(":")
        self.items["pathway"].append(CausalPathway(ident, hazard, self.id_list()))


def parse_log(text: str | bytes) -> tuple[HazardLog | None, list[Diagnostic]]:
    """Parse a ``hazards.scdl-log`` document; same contract as :func:`livecase.scdl.parse`."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            return None, [Diagnostic(SourceSpan(1, 1, 0), "error", f"input is not valid UTF-8 ({exc.reason})")]
    parser = _LogParser(text)
    log = parser.parse()
    diagnostics = sorted(parser.diagnostics, key=lambda d: (d.span.line, d.span.column, d.message))
    if log is None and not diagnostics:
        diagnostics.append(Diagnostic(SourceSpan(1, 1, 0), "error", "document could not be parsed"))
    return log, diagnostics


def load_log(path) -> HazardLog:
    with open(path, "rb") as fh:
        log, diagnostics = parse_log(fh.read())
    if log is None:
        raise RejectedInput(f"{path}: " + "; ".join(str(d) for d in diagnostics if d.severity == "error"))
    return log


def _label(value: str) -> str:
    tok = Lexer(value).tokenize()[0]
    plain = len(tok) == 2 and tok[0].kind is Tok.IDENT and tok[0].text == value
    return value if plain else quote(value)


def print_log(log: HazardLog) -> str:
    """Canonical text of a hazard log."""
    out = [f"hazard_log {quote(log.name)} {{"]
    for loss in log.loss_events.values():
        out.append(f"  loss_event {loss.id} {quote(loss.description)} severity {_label(loss.severity_class)};")
    for hazard in log.hazards.values():
        out.append(f"  hazard {hazard.id} {quote(hazard.description)} {{")
        if hazard.loss_event_ids:
            out.append(f"    loss_events: {', '.join(hazard.loss_event_ids)};")
        if hazard.fault_tree_id is not None:
            out.append(f"    fault_tree: {hazard.fault_tree_id};")
        out.append(f"    status: {hazard.status.value};")
        a = hazard.assessment
        if a is not None:
            stamp = a.assessed_at.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)
            out.append(f"    assessed {_label(a.severity)} {_label(a.probability)} "
                       f"level {a.level.value} at {quote(stamp)};")
        out.append("  }")
    for f in log.functions.values():
        out.append(f"  function {f.id} {quote(f.description)} mitigates {', '.join(f.hazard_ids)} "
                   f"rigour {f.level_of_rigour};")
    for c in log.controls.values():
        audit = f" audit {c.audit_spi_ref}" if c.audit_spi_ref else ""
        out.append(f"  control {c.id} {quote(c.description)} kind {c.kind.value} "
                   f"mitigates {', '.join(c.hazard_ids)}{audit};")
    for factor in log.factors.values():
        out.append(f"  factor {factor.id} {quote(factor.description)} kind {factor.kind.value};")
    for p in log.pathways.values():
        out.append(f"  pathway {p.id} for {p.hazard_id}: {', '.join(p.factor_ids)};")
    out.append("}")
    return "\n".join(out) + "\n"
