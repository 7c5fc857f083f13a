"""Reader and canonical printer for the Safety Case Definition Language.

An SCDL document holds one case::

    case "Robotaxi" {
      goal G1 "The autonomous driver is safe enough to operate ..." {
        supported_by: S1
        spi: SPI_NEAR_HITS
      }
      strategy S1 "Argue over each hazard" { supported_by: Sn1 }
      solution Sn1 "Simulation campaign" { evidence: E1 }
      evidence E1 uri "s3://results/sim.json" version latest reviewed 2;
      spi SPI_NEAR_HITS on G1 {
        metric "near_hits";
        threshold <= 0.001 per hour;
        kind lagging behavioral;
      }
      fault_tree FT1 for H1 mission 1.0 hour {
        top or { basic a rate 1e-4; and { basic b rate 0.01 spi SPI_X; basic c rate tbd; } }
        budget FT1.g0 1e-3;
      }
      interface { assume standard "ISO 26262 conformance"; }
    }

``parse`` never raises on bad input: it returns ``(case_or_None, diagnostics)``
and keeps going after an error by skipping to the next ``;`` or ``}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from livecase._lexer import (
    Diagnostic,
    Lexer,
    SourceSpan,
    SyntaxProblem,
    Tok,
    Token,
    TokenStream,
    format_number,
    quote,
)
from livecase.argument import (
    ArgumentEdge,
    ArgumentElement,
    CaseInterface,
    EdgeKind,
    ElementKind,
    InterfaceTag,
    SafetyCase,
    TaggedStatement,
)
from livecase.evidence import DynamicLink, Sensitivity
from livecase.exceptions import RejectedInput
from livecase.fault_tree import BasicEvent, EventKind, Gate, QuantitativeFaultTree
from livecase.spi import Direction, SpiDefinition, Timing, Trace, Unit

ELEMENT_KEYWORDS = tuple(k.value for k in ElementKind)
UNITS = tuple(u.value for u in Unit)
TAGS = tuple(t.value for t in InterfaceTag)
EVENT_KINDS = tuple(k.value for k in EventKind)
PLACEHOLDER = "tbd"


@dataclass
class _RawGate:
    op: str
    id: str | None
    span: SourceSpan
    children: list = field(default_factory=list)


@dataclass
class _RawTree:
    id: str
    hazard_id: str
    span: SourceSpan
    top: _RawGate | None = None
    budgets: list[tuple[str, float, SourceSpan]] = field(default_factory=list)
    mission_time: float = 1.0
    mission_unit: str | None = None


class _Parser:
    def __init__(self, text: str) -> None:
        self.lexer = Lexer(text)
        tokens, self.diagnostics = self.lexer.tokenize()
        self.ts = TokenStream(tokens)
        self.name: str | None = None
        self.name_span: SourceSpan | None = None
        self.elements: list[tuple[ArgumentElement | None, dict]] = []
        self.edges: list[tuple[ArgumentEdge, SourceSpan]] = []
        self.spis: list[SpiDefinition] = []
        self.links: list[DynamicLink] = []
        self.trees: list[_RawTree] = []
        self.assume: list[TaggedStatement] = []
        self.guarantee: list[TaggedStatement] = []
        self.interface_span: SourceSpan | None = None
        self.root: tuple[str, SourceSpan] | None = None
        self.hazards: str | None = None
        # id -> (namespace, span); all case-level items share one namespace
        self.declared: dict[str, tuple[str, SourceSpan]] = {}
        # (id, namespace expected, span)
        self.refs: list[tuple[str, str, SourceSpan]] = []
        self.goal_order: list[str] = []

    # -- helpers -------------------------------------------------------------

    def error(self, span: SourceSpan, message: str) -> None:
        self.diagnostics.append(Diagnostic(span, "error", message))

    def warn(self, span: SourceSpan, message: str) -> None:
        self.diagnostics.append(Diagnostic(span, "warning", message))

    def declare(self, tok: Token, namespace: str) -> None:
        ident = tok.text
        if ident in self.declared:
            first = self.declared[ident][1]
            self.error(tok.span, f"duplicate id {ident} (first declared at {first})")
        else:
            self.declared[ident] = (namespace, tok.span)

    def ident(self, what: str = "identifier") -> Token:
        return self.ts.expect_kind(Tok.IDENT, what)

    def string(self, what: str = "string") -> Token:
        return self.ts.expect_kind(Tok.STRING, what)

    def number(self, what: str = "number") -> Token:
        return self.ts.expect_kind(Tok.NUMBER, what)

    def id_list(self) -> list[Token]:
        items = [self.ident()]
        while self.ts.accept(","):
            items.append(self.ident())
        return items

    # -- document ------------------------------------------------------------

    def parse(self) -> SafetyCase | None:
        ts = self.ts
        try:
            ts.expect("case")
            name = self.string("case name")
            self.name, self.name_span = name.value, name.span
            ts.expect("{")
        except SyntaxProblem as problem:
            self.error(problem.token.span, problem.message)
            return None
        while not ts.at("}") and ts.current.kind is not Tok.EOF:
            start = ts.pos
            try:
                self.item()
            except SyntaxProblem as problem:
                self.error(problem.token.span, problem.message)
                ts.recover(start)
                if ts.pos == start and not ts.at("}"):
                    ts.advance()
        if not ts.accept("}"):
            self.error(ts.current.span, "expected '}' closing the case")
        elif ts.current.kind is not Tok.EOF:
            self.error(ts.current.span, f"unexpected {ts.current.describe()} after the case")
        self.resolve_references()
        trees = [self.build_tree(raw) for raw in self.trees]
        if any(d.severity == "error" for d in self.diagnostics) or None in trees:
            return None
        try:
            return self.build(trees)
        except RejectedInput as exc:
            self.error(self.name_span, str(exc))
            return None

    def item(self) -> None:
        tok = self.ts.current
        if tok.kind is not Tok.IDENT:
            raise SyntaxProblem(tok, f"expected an item, found {tok.describe()}")
        keyword = tok.text
        if keyword in ELEMENT_KEYWORDS:
            self.element()
        elif keyword == "spi":
            self.spi()
        elif keyword == "fault_tree":
            self.fault_tree()
        elif keyword == "evidence":
            self.evidence()
        elif keyword == "interface":
            self.interface()
        elif keyword == "root":
            self.ts.advance()
            ident = self.ident("root goal id")
            self.ts.expect(";")
            if self.root is not None:
                self.error(tok.span, "root declared more than once")
            self.root = (ident.text, ident.span)
            self.refs.append((ident.text, "element", ident.span))
        elif keyword == "hazards":
            self.ts.advance()
            path = self.string("hazard log path")
            self.ts.expect(";")
            self.hazards = path.value
        elif self.ts.peek().text in ("supported_by", "in_context_of"):
            self.edge_inline()
        else:
            raise SyntaxProblem(tok, f"unknown item {tok.text!r}")

    def element(self) -> None:
        ts = self.ts
        kind = ElementKind(ts.advance().text)
        ident = self.ident("element id")
        statement = self.string("statement")
        self.declare(ident, "element")
        if not statement.value.strip():
            self.error(statement.span, f"element {ident.text} has an empty statement")
        spi_refs: list[str] = []
        evidence: list[str] = []
        if ts.accept("{"):
            while not ts.accept("}"):
                entry = ts.expect_one_of(("supported_by", "in_context_of", "evidence", "spi"), "block entry")
                ts.expect(":")
                if entry.text in ("supported_by", "in_context_of"):
                    for target in self.id_list():
                        self.edges.append((ArgumentEdge(ident.text, target.text, EdgeKind(entry.text)), target.span))
                        self.refs.append((target.text, "element", target.span))
                else:
                    target = self.ident()
                    if entry.text == "spi":
                        spi_refs.append(target.text)
                        self.refs.append((target.text, "spi", target.span))
                    else:
                        if kind is not ElementKind.SOLUTION:
                            self.error(entry.span, f"only solutions carry evidence; {ident.text} is a {kind.value}")
                        evidence.append(target.text)
                        self.refs.append((target.text, "evidence", target.span))
                ts.accept(";")
        if kind is ElementKind.GOAL:
            self.goal_order.append(ident.text)
        element = None
        if statement.value.strip() and (not evidence or kind is ElementKind.SOLUTION):
            element = ArgumentElement(ident.text, kind, statement.value, tuple(spi_refs), tuple(evidence))
        self.elements.append((element, {"span": ident.span}))

    def edge_inline(self) -> None:
        source = self.ident()
        kind = EdgeKind(self.ts.advance().text)
        self.ts.expect(":")
        self.refs.append((source.text, "element", source.span))
        for target in self.id_list():
            self.edges.append((ArgumentEdge(source.text, target.text, kind), target.span))
            self.refs.append((target.text, "element", target.span))
        self.ts.expect(";")

    def spi(self) -> None:
        ts = self.ts
        ts.advance()
        ident = self.ident("SPI id")
        ts.expect("on")
        claim = self.ident("claim id")
        self.declare(ident, "spi")
        self.refs.append((claim.text, "element", claim.span))
        ts.expect("{")
        ts.expect("metric")
        metric = self.string("metric name")
        ts.expect(";")
        ts.expect("threshold")
        comparator = ts.current
        if not (ts.accept("<=") or ts.accept(">=")):
            raise SyntaxProblem(comparator, f"expected '<=' or '>=', found {comparator.describe()}")
        threshold = self.number("threshold")
        ts.expect("per")
        unit = ts.expect_one_of(UNITS, "exposure unit")
        ts.expect(";")
        ts.expect("kind")
        timing = ts.expect_one_of(("leading", "lagging"), "SPI timing")
        trace = ts.expect_one_of(("behavioral", "operational"), "SPI trace")
        ts.expect(";")
        confidence = 0.95
        if ts.accept("confidence"):
            tok = self.number("confidence target")
            ts.expect(";")
            confidence = tok.value
            if not 0 < confidence < 1:
                self.error(tok.span, "confidence target must lie in (0, 1)")
                confidence = 0.95
        ts.expect("}")
        if threshold.value < 0:
            self.error(threshold.span, "threshold must be non-negative")
            return
        self.spis.append(SpiDefinition(
            ident.text, claim.text, metric.value, threshold.value, Unit(unit.text),
            Direction.AT_MOST if comparator.text == "<=" else Direction.AT_LEAST,
            Timing(timing.text), Trace(trace.text), confidence,
        ))

    def evidence(self) -> None:
        ts = self.ts
        ts.advance()
        ident = self.ident("evidence id")
        self.declare(ident, "evidence")
        ts.expect("uri")
        uri = self.string("uri")
        ts.expect("version")
        pinned = None
        if not ts.accept("latest"):
            version = self.string("'latest' or a quoted version number")
            if not version.value.isdigit() or int(version.value) < 1:
                self.error(version.span, f"pinned version must be a positive integer, got {version.value!r}")
            else:
                pinned = int(version.value)
        artifact = ident.text
        sensitivity = Sensitivity.STRICT
        reviewed = None
        while not ts.accept(";"):
            clause = ts.expect_one_of(("artifact", "sensitivity", "reviewed"), "evidence clause")
            if clause.text == "artifact":
                artifact = self.ident("artifact id").text
            elif clause.text == "sensitivity":
                sensitivity = Sensitivity(ts.expect_one_of(tuple(s.value for s in Sensitivity), "sensitivity").text)
            else:
                tok = self.number("reviewed version")
                if tok.value < 0 or tok.value != int(tok.value):
                    self.error(tok.span, "reviewed version must be a non-negative integer")
                else:
                    reviewed = int(tok.value)
        self.links.append(DynamicLink(ident.text, artifact, pinned, sensitivity, uri.value, reviewed))

    def interface(self) -> None:
        ts = self.ts
        start = ts.advance()
        if self.interface_span is not None:
            self.error(start.span, "interface declared more than once")
        self.interface_span = start.span
        ts.expect("{")
        while not ts.accept("}"):
            side = ts.expect_one_of(("assume", "guarantee"), "'assume' or 'guarantee'")
            tag = ts.expect_one_of(TAGS, "interface tag")
            text = self.string("statement")
            while ts.accept(";"):
                pass
            if not text.value.strip():
                self.error(text.span, "interface statement must be non-empty")
                continue
            entry = TaggedStatement(InterfaceTag(tag.text), text.value)
            (self.assume if side.text == "assume" else self.guarantee).append(entry)

    # -- fault trees ---------------------------------------------------------

    def fault_tree(self) -> None:
        ts = self.ts
        ts.advance()
        ident = self.ident("fault tree id")
        self.declare(ident, "fault_tree")
        ts.expect("for")
        hazard = self.ident("hazard id")
        raw = _RawTree(ident.text, hazard.text, ident.span)
        if ts.accept("mission"):
            time = self.number("mission time")
            if time.value <= 0:
                self.error(time.span, "mission time must be positive")
            else:
                raw.mission_time = time.value
            if ts.current.kind is Tok.IDENT and ts.current.text in UNITS:
                raw.mission_unit = ts.advance().text
        ts.expect("{")
        ts.expect("top")
        raw.top = self.gate()
        while ts.accept("budget"):
            node = self.ident("node id")
            value = self.number("budget")
            ts.expect(";")
            if not 0 < value.value <= 1:
                self.error(value.span, "budget must lie in (0, 1]")
            raw.budgets.append((node.text, value.value, node.span))
        ts.expect("}")
        self.trees.append(raw)

    def gate(self) -> _RawGate:
        ts = self.ts
        op = ts.expect_one_of(("or", "and"), "gate")
        gate_id = None
        if ts.current.kind is Tok.IDENT:
            gate_id = ts.advance().text
        gate = _RawGate(op.text, gate_id, op.span)
        ts.expect("{")
        while not ts.accept("}"):
            if ts.at("basic"):
                gate.children.append(self.basic())
            elif ts.at("or") or ts.at("and"):
                gate.children.append(self.gate())
            else:
                raise SyntaxProblem(ts.current, f"expected 'basic' or a gate, found {ts.current.describe()}")
        if not gate.children:
            self.error(op.span, "gate has no children")
        return gate

    def basic(self) -> tuple[BasicEvent, SourceSpan]:
        ts = self.ts
        ts.advance()
        ident = self.ident("basic event id")
        ts.expect("rate")
        rate = None
        if not ts.accept(PLACEHOLDER):
            tok = self.number(f"rate or '{PLACEHOLDER}'")
            rate = tok.value
            if not 0 <= rate <= 1:
                self.error(tok.span, f"rate {tok.text} lies outside [0, 1]")
        spi_ref = None
        kind = EventKind.CAUSAL_FACTOR
        description = ""
        while not ts.accept(";"):
            clause = ts.expect_one_of(("spi", "kind", "desc"), "basic event clause")
            if clause.text == "spi":
                ref = self.ident("SPI id")
                spi_ref = ref.text
                self.refs.append((ref.text, "spi", ref.span))
            elif clause.text == "kind":
                kind = EventKind(ts.expect_one_of(EVENT_KINDS, "event kind").text)
            else:
                description = self.string("description").value
        return BasicEvent(ident.text, rate, spi_ref, kind, description), ident.span

    def build_tree(self, raw: _RawTree) -> QuantitativeFaultTree | None:
        used: set[str] = set()
        basics: dict[str, BasicEvent] = {}
        ok = True

        def collect(gate: _RawGate) -> None:
            nonlocal ok
            if gate.id is not None:
                if gate.id in used:
                    self.error(gate.span, f"duplicate node id {gate.id} in fault tree {raw.id}")
                    ok = False
                used.add(gate.id)
            for child in gate.children:
                if isinstance(child, _RawGate):
                    collect(child)
                else:
                    event, span = child
                    if event.id in basics:
                        if basics[event.id] != event:
                            self.error(span, f"basic event {event.id} redeclared with different attributes")
                            ok = False
                    else:
                        if event.id in used:
                            self.error(span, f"duplicate node id {event.id} in fault tree {raw.id}")
                            ok = False
                        basics[event.id] = event
                        used.add(event.id)

        collect(raw.top)
        counter = 0

        def build(gate: _RawGate) -> Gate:
            nonlocal counter
            gate_id = gate.id
            if gate_id is None:
                while f"{raw.id}.g{counter}" in used:
                    counter += 1
                gate_id = f"{raw.id}.g{counter}"
                used.add(gate_id)
            children = tuple(build(c) if isinstance(c, _RawGate) else c[0] for c in gate.children)
            return Gate(gate_id, gate.op, children)

        top = build(raw.top) if raw.top.children else None
        for node_id, _, span in raw.budgets:
            if node_id not in used:
                self.error(span, f"budget for unknown node {node_id} in fault tree {raw.id}")
                ok = False
        if top is None or not ok:
            return None
        budgets = dict((node_id, value) for node_id, value, _ in raw.budgets)
        if budgets and top.id not in budgets:
            self.error(raw.span, f"budgets of fault tree {raw.id} must cover the top gate {top.id}")
            return None
        if any(not gate.children for gate in _raw_gates(raw.top)):
            return None
        return QuantitativeFaultTree(raw.id, raw.hazard_id, top, budgets, raw.mission_time, raw.mission_unit)

    # -- semantic pass -------------------------------------------------------

    def resolve_references(self) -> None:
        for ident, namespace, span in self.refs:
            declared = self.declared.get(ident)
            if declared is None:
                self.error(span, f"dangling reference {ident}")
            elif declared[0] != namespace:
                self.error(span, f"{ident} is a {declared[0]}, expected a {namespace}")

    def build(self, trees: list[QuantitativeFaultTree]) -> SafetyCase:
        edges = [edge for edge, _ in self.edges]
        if self.root is not None:
            root = self.root[0]
        else:
            supported = {e.target for e in edges if e.kind is EdgeKind.SUPPORTED_BY}
            parentless = [g for g in self.goal_order if g not in supported]
            root = (parentless or self.goal_order or [None])[0]
        interface = None
        if self.interface_span is not None:
            interface = CaseInterface(tuple(self.assume), tuple(self.guarantee))
        return SafetyCase(
            name=self.name,
            elements=tuple(e for e, _ in self.elements if e is not None),
            edges=tuple(edges),
            root=root,
            spis=tuple(self.spis),
            fault_trees=tuple(trees),
            links=tuple(self.links),
            interface=interface,
            hazard_log_ref=self.hazards,
        )


def _raw_gates(gate: _RawGate):
    yield gate
    for child in gate.children:
        if isinstance(child, _RawGate):
            yield from _raw_gates(child)


def parse(text: str | bytes) -> tuple[SafetyCase | None, list[Diagnostic]]:
    """Parse an SCDL document.

    Returns the case (``None`` if any error was found) and all diagnostics in
    source order. Input bytes must be UTF-8.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            return None, [Diagnostic(SourceSpan(1, 1, 0), "error", f"input is not valid UTF-8 ({exc.reason})")]
    parser = _Parser(text)
    case = parser.parse()
    if case is None and not any(d.severity == "error" for d in parser.diagnostics):
        parser.error(SourceSpan(1, 1, 0), "document could not be parsed")
    diagnostics = sorted(parser.diagnostics, key=lambda d: (d.span.line, d.span.column, d.message))
    return (case if not any(d.severity == "error" for d in diagnostics) else None), diagnostics


def parse_file(path) -> tuple[SafetyCase | None, list[Diagnostic]]:
    with open(path, "rb") as fh:
        return parse(fh.read())


# -- printer -----------------------------------------------------------------

_KIND_ORDER = {kind: i for i, kind in enumerate(ElementKind)}


def _print_gate(gate: Gate, indent: str, out: list[str], lead: str = "") -> None:
    out.append(f"{indent}{lead}{gate.op.value} {gate.id} {{")
    for child in gate.children:
        if isinstance(child, Gate):
            _print_gate(child, indent + "  ", out)
        else:
            parts = [f"basic {child.id} rate",
                     PLACEHOLDER if child.rate is None else format_number(child.rate)]
            if child.spi_ref is not None:
                parts.append(f"spi {child.spi_ref}")
            if child.kind is not EventKind.CAUSAL_FACTOR:
                parts.append(f"kind {child.kind.value}")
            if child.description:
                parts.append(f"desc {quote(child.description)}")
            out.append(f"{indent}  {' '.join(parts)};")
    out.append(f"{indent}}}")


def print_case(case: SafetyCase) -> str:
    """Render a case in canonical SCDL: items ordered by (kind, id), two-space indent."""
    out = [f"case {quote(case.name)} {{"]
    if case.root is not None:
        out.append(f"  root {case.root};")
    if case.hazard_log_ref is not None:
        out.append(f"  hazards {quote(case.hazard_log_ref)};")
    by_source: dict[str, list[ArgumentEdge]] = {}
    for edge in case.edges:
        by_source.setdefault(edge.source, []).append(edge)
    element_ids = {e.id for e in case.elements}
    for element in sorted(case.elements, key=lambda e: (_KIND_ORDER[e.kind], e.id)):
        head = f"  {element.kind.value} {element.id} {quote(element.statement)}"
        body = []
        edges = by_source.pop(element.id, [])
        for kind in EdgeKind:
            targets = [e.target for e in edges if e.kind is kind]
            if targets:
                body.append(f"    {kind.value}: {', '.join(targets)}")
        body.extend(f"    evidence: {ref}" for ref in element.evidence_links)
        body.extend(f"    spi: {ref}" for ref in element.spi_refs)
        if body:
            out.append(head + " {")
            out.extend(body)
            out.append("  }")
        else:
            out.append(head)
    for source in sorted(by_source):
        if source in element_ids:
            continue
        for kind in EdgeKind:
            targets = [e.target for e in by_source[source] if e.kind is kind]
            if targets:
                out.append(f"  {source} {kind.value}: {', '.join(targets)};")
    for link in case.links:
        parts = [f"  evidence {link.id} uri {quote(link.uri)} version",
                 "latest" if link.pinned is None else quote(str(link.pinned))]
        if link.artifact_id != link.id:
            parts.append(f"artifact {link.artifact_id}")
        if link.sensitivity is not Sensitivity.STRICT:
            parts.append(f"sensitivity {link.sensitivity.value}")
        if link.reviewed_seq is not None:
            parts.append(f"reviewed {link.reviewed_seq}")
        out.append(" ".join(parts) + ";")
    for spi in case.spis:
        comparator = "<=" if spi.direction is Direction.AT_MOST else ">="
        out.append(f"  spi {spi.id} on {spi.claim_id} {{")
        out.append(f"    metric {quote(spi.metric)};")
        out.append(f"    threshold {comparator} {format_number(spi.threshold)} per {spi.unit.value};")
        out.append(f"    kind {spi.timing.value} {spi.trace.value};")
        if spi.confidence_target != 0.95:
            out.append(f"    confidence {format_number(spi.confidence_target)};")
        out.append("  }")
    for tree in case.fault_trees:
        head = f"  fault_tree {tree.id} for {tree.hazard_id}"
        if tree.mission_unit is not None or tree.mission_time != 1.0:
            head += f" mission {format_number(tree.mission_time)}"
            if tree.mission_unit is not None:
                head += f" {tree.mission_unit.value}"
        out.append(head + " {")
        _print_gate(tree.top, "    ", out, lead="top ")
        for node_id, value in tree.budgets.items():
            out.append(f"    budget {node_id} {format_number(value)};")
        out.append("  }")
    if case.interface is not None:
        out.append("  interface {")
        for side, entries in (("assume", case.interface.assumptions), ("guarantee", case.interface.guarantees)):
            for entry in entries:
                out.append(f"    {side} {entry.tag.value} {quote(entry.statement)};")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"
