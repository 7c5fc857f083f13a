"""GSN-style argument model: elements, edges, well-formedness and soundness.

A :class:`SafetyCase` is an immutable value. Its element, edge, SPI, link and
fault-tree collections are normalised into a canonical order on construction,
so two cases holding the same items compare equal regardless of how they were
assembled.
"""

from __future__ import annotations

import enum
import re
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Any, Iterable, Mapping

from livecase.exceptions import RejectedInput

if TYPE_CHECKING:
    from livecase.evidence import DynamicLink
    from livecase.fault_tree import QuantitativeFaultTree
    from livecase.spi import SpiDefinition

ID_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class ElementKind(str, enum.Enum):
    GOAL = "goal"
    STRATEGY = "strategy"
    SOLUTION = "solution"
    CONTEXT = "context"
    ASSUMPTION = "assumption"
    JUSTIFICATION = "justification"


class EdgeKind(str, enum.Enum):
    SUPPORTED_BY = "supported_by"
    IN_CONTEXT_OF = "in_context_of"


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"


class Status(str, enum.Enum):
    """Soundness status of an argument element."""

    SUPPORTED = "supported"
    IN_QUESTION = "in_question"
    VIOLATED = "violated"
    STALE = "stale"


class InterfaceTag(str, enum.Enum):
    REGULATION = "regulation"
    STANDARD = "standard"
    FAILURE_MODEL = "failure_model"
    ACCEPTANCE_CRITERION = "acceptance_criterion"
    VALIDATION_TARGET = "validation_target"
    FAILURE_MODE = "failure_mode"
    SAFETY_REQUIREMENT = "safety_requirement"


SUPPORT_SOURCES = frozenset({ElementKind.GOAL, ElementKind.STRATEGY})
SUPPORT_TARGETS = frozenset({ElementKind.GOAL, ElementKind.STRATEGY, ElementKind.SOLUTION})
CONTEXT_KINDS = frozenset(
    {ElementKind.CONTEXT, ElementKind.ASSUMPTION, ElementKind.JUSTIFICATION}
)

# Lagging SPIs belong near the top of the argument.
LAGGING_MAX_DEPTH = 2


@dataclass(frozen=True)
class ArgumentElement:
    id: str
    kind: ElementKind
    statement: str
    spi_refs: tuple[str, ...] = ()
    evidence_links: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ElementKind(self.kind))
        object.__setattr__(self, "spi_refs", tuple(self.spi_refs))
        object.__setattr__(self, "evidence_links", tuple(self.evidence_links))
        if not ID_RE.match(self.id):
            raise RejectedInput(f"invalid element id {self.id!r}")
        if not self.statement.strip():
            raise RejectedInput(f"element {self.id} has an empty statement")
        if self.evidence_links and self.kind is not ElementKind.SOLUTION:
            raise RejectedInput(
                f"element {self.id} is a {self.kind.value}; only solutions carry evidence"
            )


@dataclass(frozen=True, order=True)
class ArgumentEdge:
    source: str
    target: str
    kind: EdgeKind = EdgeKind.SUPPORTED_BY

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EdgeKind(self.kind))

    @property
    def id(self) -> str:
        return f"{self.source}:{self.kind.value}:{self.target}"


@dataclass(frozen=True)
class TaggedStatement:
    tag: InterfaceTag
    statement: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "tag", InterfaceTag(self.tag))
        if not self.statement.strip():
            raise RejectedInput("interface statement must be non-empty")

    @property
    def key(self) -> tuple[str, str]:
        return self.tag.value, normalize_statement(self.statement)


@dataclass(frozen=True)
class CaseInterface:
    assumptions: tuple[TaggedStatement, ...] = ()
    guarantees: tuple[TaggedStatement, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "assumptions", tuple(self.assumptions))
        object.__setattr__(self, "guarantees", tuple(self.guarantees))


def _sorted_by_id(items: Iterable[Any]) -> tuple:
    return tuple(sorted(items, key=lambda item: (item.id, repr(item))))


@dataclass(frozen=True)
class SafetyCase:
    name: str
    elements: tuple[ArgumentElement, ...] = ()
    edges: tuple[ArgumentEdge, ...] = ()
    root: str | None = None
    spis: tuple["SpiDefinition", ...] = ()
    fault_trees: tuple["QuantitativeFaultTree", ...] = ()
    links: tuple["DynamicLink", ...] = ()
    interface: CaseInterface | None = None
    hazard_log_ref: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", _sorted_by_id(self.elements))
        object.__setattr__(self, "edges", tuple(sorted(set(self.edges))))
        object.__setattr__(self, "spis", _sorted_by_id(self.spis))
        object.__setattr__(self, "fault_trees", _sorted_by_id(self.fault_trees))
        object.__setattr__(self, "links", _sorted_by_id(self.links))

    @cached_property
    def _elements(self) -> dict[str, ArgumentElement]:
        return {e.id: e for e in self.elements}

    @cached_property
    def _children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for edge in self.edges:
            if edge.kind is EdgeKind.SUPPORTED_BY:
                out[edge.source].append(edge.target)
        return out

    @cached_property
    def _parents(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for edge in self.edges:
            if edge.kind is EdgeKind.SUPPORTED_BY:
                out[edge.target].append(edge.source)
        return out

    def element(self, element_id: str) -> ArgumentElement:
        try:
            return self._elements[element_id]
        except KeyError:
            raise RejectedInput(f"unknown element {element_id!r}") from None

    def has_element(self, element_id: str) -> bool:
        return element_id in self._elements

    def children(self, element_id: str) -> list[str]:
        return list(self._children.get(element_id, ()))

    def parents(self, element_id: str) -> list[str]:
        return list(self._parents.get(element_id, ()))

    def ancestors(self, element_id: str) -> set[str]:
        seen: set[str] = set()
        queue = deque(self._parents.get(element_id, ()))
        while queue:
            node = queue.popleft()
            if node in seen:
                continue
            seen.add(node)
            queue.extend(self._parents.get(node, ()))
        return seen

    def spi(self, spi_id: str) -> "SpiDefinition":
        for spi in self.spis:
            if spi.id == spi_id:
                return spi
        raise RejectedInput(f"unknown SPI {spi_id!r}")

    def link(self, link_id: str) -> "DynamicLink":
        for link in self.links:
            if link.id == link_id:
                return link
        raise RejectedInput(f"unknown evidence link {link_id!r}")

    def tree(self, tree_id: str) -> "QuantitativeFaultTree":
        for tree in self.fault_trees:
            if tree.id == tree_id:
                return tree
        raise RejectedInput(f"unknown fault tree {tree_id!r}")

    def attached_spis(self, element_id: str) -> tuple[str, ...]:
        """SPIs attached to an element, by block reference or by ``spi ... on``."""
        refs = set(self._elements[element_id].spi_refs) if element_id in self._elements else set()
        refs.update(s.id for s in self.spis if s.claim_id == element_id)
        return tuple(sorted(refs))

    def depths(self) -> dict[str, int]:
        """Shortest supported_by distance from the root."""
        if self.root is None:
            return {}
        depth = {self.root: 0}
        queue = deque([self.root])
        while queue:
            node = queue.popleft()
            for child in self._children.get(node, ()):
                if child not in depth:
                    depth[child] = depth[node] + 1
                    queue.append(child)
        return depth


@dataclass(frozen=True)
class Finding:
    element_id: str
    severity: Severity
    rule_id: str
    message: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "severity", Severity(self.severity))

    def as_dict(self) -> dict[str, str]:
        return {
            "element": self.element_id,
            "severity": self.severity.value,
            "rule": self.rule_id,
            "message": self.message,
        }


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        ordered = sorted(self.findings, key=lambda f: (f.element_id, f.rule_id, f.message))
        object.__setattr__(self, "findings", tuple(ordered))

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.WARNING]

    @property
    def ok(self) -> bool:
        return not self.errors

    def rules(self) -> set[str]:
        return {f.rule_id for f in self.findings}

    def merged(self, *others: "ValidationReport") -> "ValidationReport":
        findings = list(self.findings)
        for other in others:
            findings.extend(other.findings)
        return ValidationReport(tuple(findings))


def _strong_components(nodes: Iterable[str], succ: Mapping[str, list[str]]) -> list[list[str]]:
    """Tarjan's algorithm, iterative."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    components: list[list[str]] = []
    counter = 0
    for start in sorted(nodes):
        if start in index:
            continue
        work = [(start, iter(succ.get(start, ())))]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(succ.get(nxt, ()))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node])
            if low[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                components.append(sorted(component))
    return components


def validate_wellformed(case: SafetyCase) -> ValidationReport:
    """Check the structural rules of a safety case.

    Every problem is returned as a finding; nothing raises. Rule ids:
    ``duplicate_id``, ``dangling_reference``, ``illegal_edge``, ``cycle``,
    ``root`` (errors) and ``undeveloped_goal``, ``undeveloped_strategy``,
    ``orphan_solution``, ``detached_goal``, ``spi_depth`` (warnings).
    """
    findings: list[Finding] = []

    def add(element_id: str, severity: Severity, rule: str, message: str) -> None:
        findings.append(Finding(element_id, severity, rule, message))

    counts: dict[str, int] = defaultdict(int)
    for element in case.elements:
        counts[element.id] += 1
    for element_id, n in counts.items():
        if n > 1:
            add(element_id, Severity.ERROR, "duplicate_id", f"id {element_id} declared {n} times")

    kinds = {e.id: e.kind for e in case.elements}
    spi_ids = {s.id for s in case.spis}
    link_ids = {link.id for link in case.links}

    succ: dict[str, list[str]] = defaultdict(list)
    has_out: set[str] = set()
    has_in: dict[str, set[str]] = defaultdict(set)
    for edge in case.edges:
        missing = [x for x in (edge.source, edge.target) if x not in kinds]
        if missing:
            for x in missing:
                add(edge.source, Severity.ERROR, "dangling_reference",
                    f"edge {edge.id} references unknown element {x}")
            continue
        if edge.source == edge.target:
            add(edge.source, Severity.ERROR, "illegal_edge", f"self-edge {edge.id}")
            continue
        src, dst = kinds[edge.source], kinds[edge.target]
        if edge.kind is EdgeKind.SUPPORTED_BY:
            if src not in SUPPORT_SOURCES or dst not in SUPPORT_TARGETS:
                add(edge.source, Severity.ERROR, "illegal_edge",
                    f"{src.value} {edge.source} cannot be supported_by {dst.value} {edge.target}")
            succ[edge.source].append(edge.target)
            has_out.add(edge.source)
            has_in[edge.target].add(edge.source)
        elif dst not in CONTEXT_KINDS:
            add(edge.source, Severity.ERROR, "illegal_edge",
                f"in_context_of must target a context, assumption or justification, "
                f"not {dst.value} {edge.target}")

    for element in case.elements:
        for ref in element.spi_refs:
            if ref not in spi_ids:
                add(element.id, Severity.ERROR, "dangling_reference", f"unknown SPI {ref}")
        for ref in element.evidence_links:
            if ref not in link_ids:
                add(element.id, Severity.ERROR, "dangling_reference", f"unknown evidence link {ref}")
    for spi in case.spis:
        if spi.claim_id not in kinds:
            add(spi.id, Severity.ERROR, "dangling_reference", f"SPI attached to unknown claim {spi.claim_id}")
    for tree in case.fault_trees:
        for event in tree.basic_events():
            if event.spi_ref is not None and event.spi_ref not in spi_ids:
                add(tree.id, Severity.ERROR, "dangling_reference",
                    f"basic event {event.id} annotated with unknown SPI {event.spi_ref}")
        if tree.budgets and tree.top.id not in tree.budgets:
            add(tree.id, Severity.ERROR, "budget_coverage", "risk budgets do not cover the top gate")

    component_of: dict[str, int] = {}
    for i, component in enumerate(_strong_components(kinds, succ)):
        for member in component:
            component_of[member] = i
        if len(component) > 1:
            add(component[0], Severity.ERROR, "cycle",
                "supported_by cycle through " + ", ".join(component))

    if case.elements:
        root = case.root
        if root is None:
            add("<case>", Severity.ERROR, "root", "case has no root goal")
        elif root not in kinds:
            add(root, Severity.ERROR, "root", f"root {root} is not an element")
        else:
            if kinds[root] is not ElementKind.GOAL:
                add(root, Severity.ERROR, "root", f"root {root} is a {kinds[root].value}, not a goal")
            outside = sorted(p for p in has_in.get(root, ()) if component_of.get(p) != component_of[root])
            if outside:
                add(root, Severity.ERROR, "root",
                    f"root {root} is supported_by target of {', '.join(outside)}")

    for element in case.elements:
        if element.kind is ElementKind.GOAL:
            if element.id not in has_out:
                add(element.id, Severity.WARNING, "undeveloped_goal", f"undeveloped goal {element.id}")
            if element.id != case.root and not has_in.get(element.id):
                add(element.id, Severity.WARNING, "detached_goal",
                    f"goal {element.id} is not reachable from any parent")
        elif element.kind is ElementKind.STRATEGY and element.id not in has_out:
            add(element.id, Severity.WARNING, "undeveloped_strategy",
                f"strategy {element.id} has no supporting elements")
        elif element.kind is ElementKind.SOLUTION and not has_in.get(element.id):
            add(element.id, Severity.WARNING, "orphan_solution",
                f"solution {element.id} supports no goal or strategy")

    depth = case.depths()
    for spi in case.spis:
        d = depth.get(spi.claim_id)
        if spi.timing.value == "lagging" and d is not None and d > LAGGING_MAX_DEPTH:
            add(spi.id, Severity.WARNING, "spi_depth",
                f"lagging SPI {spi.id} attached at depth {d}; lagging SPIs belong within "
                f"{LAGGING_MAX_DEPTH} levels of the root")

    return ValidationReport(tuple(findings))


def _state_value(value: Any) -> str:
    value = getattr(value, "status", value)
    return getattr(value, "value", value)


def soundness_status(
    case: SafetyCase,
    spi_state: Mapping[str, Any],
    evidence_state: Mapping[str, Any] | None = None,
) -> dict[str, Status]:
    """Derive the soundness status of every element.

    ``spi_state`` maps SPI ids to an evaluation (anything with a ``status``)
    or a bare status; ``evidence_state`` maps link ids to ``fresh``/``stale``.
    ``None`` for ``evidence_state`` treats every link as fresh.
    """
    own: dict[str, Status] = {}
    for element in case.elements:
        status = Status.SUPPORTED
        for link_id in element.evidence_links:
            if evidence_state is None:
                continue
            if link_id not in evidence_state:
                raise RejectedInput(f"no evidence state for link {link_id!r} of {element.id}")
            if _state_value(evidence_state[link_id]) == "stale":
                status = Status.STALE
        for spi_id in case.attached_spis(element.id):
            if spi_id not in spi_state:
                raise RejectedInput(f"no evaluation for SPI {spi_id!r} attached to {element.id}")
            if _state_value(spi_state[spi_id]) == "violated":
                status = Status.VIOLATED
        own[element.id] = status

    result = dict(own)
    bad = [eid for eid, s in own.items() if s is not Status.SUPPORTED]
    for element_id in bad:
        for ancestor in case.ancestors(element_id):
            if result[ancestor] is Status.SUPPORTED:
                result[ancestor] = Status.IN_QUESTION
    return result


def normalize_statement(text: str) -> str:
    return " ".join(text.split()).casefold()


def compose(parent: SafetyCase, child: SafetyCase) -> ValidationReport:
    """Check a child case's interface against the guarantees of its parent.

    Each child assumption with no parent guarantee of the same tag and
    normalised text is an error; each child guarantee that no parent
    assumption consumes is a warning.
    """
    if child.interface is None:
        raise RejectedInput(f"child case {child.name!r} declares no interface")
    provided = parent.interface or CaseInterface()
    guaranteed = {g.key for g in provided.guarantees}
    needed = {a.key for a in provided.assumptions}
    findings = []
    for i, assumption in enumerate(child.interface.assumptions):
        if assumption.key not in guaranteed:
            findings.append(Finding(
                f"assume.{i}", Severity.ERROR, "unmatched_assumption",
                f"{child.name}: assumption ({assumption.tag.value}) {assumption.statement!r} "
                f"is not guaranteed by {parent.name}",
            ))
    for i, guarantee in enumerate(child.interface.guarantees):
        if guarantee.key not in needed:
            findings.append(Finding(
                f"guarantee.{i}", Severity.WARNING, "unused_guarantee",
                f"{child.name}: guarantee ({guarantee.tag.value}) {guarantee.statement!r} "
                f"is not used by {parent.name}",
            ))
    return ValidationReport(tuple(findings))
