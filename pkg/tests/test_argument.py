from __future__ import annotations

import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import random_case
from livecase.argument import (
    ArgumentEdge,
    ArgumentElement,
    CaseInterface,
    EdgeKind,
    ElementKind,
    InterfaceTag,
    SafetyCase,
    Status,
    TaggedStatement,
    compose,
    soundness_status,
    validate_wellformed,
)
from livecase.evidence import DynamicLink
from livecase.exceptions import RejectedInput
from livecase.spi import SpiDefinition, SpiStatus, Timing, Unit

G, S, SN, C = ElementKind.GOAL, ElementKind.STRATEGY, ElementKind.SOLUTION, ElementKind.CONTEXT


def case_of(elements, edges, root="G1", **kw) -> SafetyCase:
    return SafetyCase("t", tuple(elements), tuple(edges), root, **kw)


def rules(report) -> list[tuple[str, str]]:
    return [(f.element_id, f.rule_id) for f in report.findings]


# --- construction ------------------------------------------------------------------

def test_element_invariants():
    with pytest.raises(RejectedInput):
        ArgumentElement("G 1", G, "bad id")
    with pytest.raises(RejectedInput):
        ArgumentElement("G1", G, "   ")
    with pytest.raises(RejectedInput):
        ArgumentElement("G1", G, "goal with evidence", evidence_links=("L1",))
    assert ArgumentElement("Sn1.a_2", SN, "ok", evidence_links=("L1",)).evidence_links == ("L1",)


def test_edge_id_is_stable():
    assert ArgumentEdge("G1", "C1", EdgeKind.IN_CONTEXT_OF).id == "G1:in_context_of:C1"


# --- validate_wellformed ------------------------------------------------------------------

def test_single_goal_is_undeveloped_warning():
    report = validate_wellformed(case_of([ArgumentElement("G1", G, "Top")], []))
    assert rules(report) == [("G1", "undeveloped_goal")]
    assert report.ok and report.findings[0].severity.value == "warning"


def test_smallest_cycle():
    elements = [ArgumentElement("G1", G, "Top"), ArgumentElement("S1", S, "Split")]
    report = validate_wellformed(case_of(elements, [ArgumentEdge("G1", "S1"), ArgumentEdge("S1", "G1")]))
    assert [f.rule_id for f in report.errors] == ["cycle"]


def test_clean_case_has_no_findings():
    elements = [ArgumentElement("G1", G, "Top"), ArgumentElement("Sn1", SN, "Ev"), ArgumentElement("C1", C, "Ctx")]
    edges = [ArgumentEdge("G1", "Sn1"), ArgumentEdge("G1", "C1", EdgeKind.IN_CONTEXT_OF)]
    assert validate_wellformed(case_of(elements, edges)).findings == ()


@pytest.mark.parametrize("elements, edges, root, expected", [
    ([("G1", G), ("Sn1", SN)], [("Sn1", "G1", EdgeKind.SUPPORTED_BY), ("G1", "Sn1", EdgeKind.SUPPORTED_BY)], "G1",
     ("Sn1", "illegal_edge")),
    ([("G1", G), ("Sn1", SN)], [("G1", "Sn1", EdgeKind.IN_CONTEXT_OF)], "G1", ("G1", "illegal_edge")),
    ([("G1", G), ("C1", C)], [("G1", "C1", EdgeKind.SUPPORTED_BY)], "G1", ("G1", "illegal_edge")),
    ([("G1", G)], [("G1", "G1", EdgeKind.SUPPORTED_BY)], "G1", ("G1", "illegal_edge")),
    ([("G1", G)], [("G1", "G7", EdgeKind.SUPPORTED_BY)], "G1", ("G1", "dangling_reference")),
    ([("S1", S), ("Sn1", SN)], [("S1", "Sn1", EdgeKind.SUPPORTED_BY)], "S1", ("S1", "root")),
    ([("G1", G), ("G2", G), ("Sn1", SN)],
     [("G2", "G1", EdgeKind.SUPPORTED_BY), ("G1", "Sn1", EdgeKind.SUPPORTED_BY)], "G1", ("G1", "root")),
    ([("G1", G)], [], None, ("<case>", "root")),
])
def test_error_rules(elements, edges, root, expected):
    case = case_of([ArgumentElement(i, k, "s") for i, k in elements],
                   [ArgumentEdge(a, b, k) for a, b, k in edges], root)
    assert expected in [(f.element_id, f.rule_id) for f in validate_wellformed(case).errors]


def test_duplicate_ids():
    case = case_of([ArgumentElement("G1", G, "a"), ArgumentElement("G1", G, "b"),
                    ArgumentElement("Sn1", SN, "c")], [ArgumentEdge("G1", "Sn1")])
    assert ("G1", "duplicate_id") in rules(validate_wellformed(case))


def test_warning_rules():
    elements = [ArgumentElement("G1", G, "Top"), ArgumentElement("S1", S, "Split"),
                ArgumentElement("Sn9", SN, "Orphan"), ArgumentElement("G5", G, "Loose")]
    report = validate_wellformed(case_of(elements, [ArgumentEdge("G1", "S1")]))
    assert set(rules(report)) == {("S1", "undeveloped_strategy"), ("Sn9", "orphan_solution"),
                                  ("G5", "detached_goal"), ("G5", "undeveloped_goal")}
    assert report.ok


def test_dangling_spi_and_link_references():
    elements = [ArgumentElement("G1", G, "Top", spi_refs=("SPI_X",)),
                ArgumentElement("Sn1", SN, "Ev", evidence_links=("L_X",))]
    spi = SpiDefinition("SPI_Y", "G9", "m", 1.0, Unit.HOUR)
    report = validate_wellformed(case_of(elements, [ArgumentEdge("G1", "Sn1")], spis=(spi,)))
    assert set(rules(report)) == {("G1", "dangling_reference"), ("Sn1", "dangling_reference"),
                                  ("SPI_Y", "dangling_reference")}


def test_lagging_spi_depth_warning():
    chain = ["G0", "G1", "G2", "G3"]
    elements = [ArgumentElement(g, G, "s") for g in chain] + [ArgumentElement("Sn", SN, "e")]
    edges = [ArgumentEdge(a, b) for a, b in zip(chain, chain[1:])] + [ArgumentEdge("G3", "Sn")]
    deep = SpiDefinition("SPI_DEEP", "G3", "m", 1.0, Unit.HOUR, timing=Timing.LAGGING)
    shallow = SpiDefinition("SPI_OK", "G2", "m", 1.0, Unit.HOUR, timing=Timing.LAGGING)
    leading = SpiDefinition("SPI_LEAD", "G3", "m", 1.0, Unit.HOUR, timing=Timing.LEADING)
    report = validate_wellformed(case_of(elements, edges, "G0", spis=(deep, shallow, leading)))
    assert rules(report) == [("SPI_DEEP", "spi_depth")]


def test_findings_are_ordered():
    elements = [ArgumentElement(f"G{i}", G, "s") for i in (3, 1, 2)]
    report = validate_wellformed(case_of(elements, []))
    keys = [(f.element_id, f.rule_id) for f in report.findings]
    assert keys == sorted(keys)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 120))
def test_random_cases_are_acyclic_and_wellformed(seed, n):
    case = random_case(random.Random(seed), n)
    report = validate_wellformed(case)
    assert report.errors == []
    graph = nx.DiGraph((e.source, e.target) for e in case.edges if e.kind is EdgeKind.SUPPORTED_BY)
    assert nx.is_directed_acyclic_graph(graph)


# --- soundness_status -------------------------------------------------------------------

def pillar_case() -> SafetyCase:
    elements = [ArgumentElement("G1", G, "Top"), ArgumentElement("S1", S, "Pillars")]
    edges = [ArgumentEdge("G1", "S1")]
    spis, links = [], []
    for i in (1, 2, 3):
        elements += [ArgumentElement(f"P{i}", G, f"Pillar {i}"),
                     ArgumentElement(f"Sn{i}", SN, f"Evidence {i}", evidence_links=(f"L{i}",))]
        edges += [ArgumentEdge("S1", f"P{i}"), ArgumentEdge(f"P{i}", f"Sn{i}")]
        spis.append(SpiDefinition(f"SPI{i}", f"P{i}", "m", 1.0, Unit.HOUR))
        links.append(DynamicLink(f"L{i}", f"A{i}"))
    return case_of(elements, edges, spis=tuple(spis), links=tuple(links))


PASSING = {f"SPI{i}": SpiStatus.PASS for i in (1, 2, 3)}
FRESH = {f"L{i}": "fresh" for i in (1, 2, 3)}


def test_all_good_is_supported():
    statuses = soundness_status(pillar_case(), PASSING, FRESH)
    assert set(statuses.values()) == {Status.SUPPORTED}


def test_stale_leaf_puts_ancestors_in_question():
    statuses = soundness_status(pillar_case(), PASSING, dict(FRESH, L1="stale"))
    assert statuses["Sn1"] is Status.STALE
    assert [statuses[e] for e in ("P1", "S1", "G1")] == [Status.IN_QUESTION] * 3
    assert statuses["P2"] is Status.SUPPORTED


def test_pillar_spi_violation():
    statuses = soundness_status(pillar_case(), dict(PASSING, SPI2=SpiStatus.VIOLATED), FRESH)
    assert statuses["P2"] is Status.VIOLATED and statuses["G1"] is Status.IN_QUESTION
    assert statuses["P1"] is statuses["P3"] is Status.SUPPORTED


def test_violated_outranks_stale_on_one_element():
    case = pillar_case()
    case = SafetyCase(case.name, case.elements, case.edges, case.root,
                      case.spis + (SpiDefinition("SPI_SN", "Sn1", "m", 1.0, Unit.HOUR),), links=case.links)
    statuses = soundness_status(case, dict(PASSING, SPI_SN="violated"), dict(FRESH, L1="stale"))
    assert statuses["Sn1"] is Status.VIOLATED


def test_missing_state_is_rejected():
    with pytest.raises(RejectedInput, match="SPI3"):
        soundness_status(pillar_case(), {"SPI1": "pass", "SPI2": "pass"}, FRESH)
    with pytest.raises(RejectedInput, match="L2"):
        soundness_status(pillar_case(), PASSING, {"L1": "fresh"})


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 120))
def test_status_matches_reachability_and_is_monotone(seed, n):
    rng = random.Random(seed)
    case = random_case(rng, n)
    spi_state = {s.id: rng.choice(["pass", "violated", "no_data", "pass_low_confidence"]) for s in case.spis}
    evidence = {link.id: rng.choice(["fresh", "stale"]) for link in case.links}
    statuses = soundness_status(case, spi_state, evidence)

    graph = nx.DiGraph()
    graph.add_nodes_from(e.id for e in case.elements)
    graph.add_edges_from((e.source, e.target) for e in case.edges if e.kind is EdgeKind.SUPPORTED_BY)
    violated = {s.claim_id for s in case.spis if spi_state[s.id] == "violated"}
    stale = {e.id for e in case.elements if any(evidence[link] == "stale" for link in e.evidence_links)}
    for element in case.elements:
        below = nx.descendants(graph, element.id)
        if element.id in violated:
            expected = Status.VIOLATED
        elif element.id in stale:
            expected = Status.STALE
        elif below & (violated | stale):
            expected = Status.IN_QUESTION
        else:
            expected = Status.SUPPORTED
        assert statuses[element.id] is expected
    for edge in case.edges:
        if edge.kind is EdgeKind.SUPPORTED_BY and statuses[edge.target] is not Status.SUPPORTED:
            assert statuses[edge.source] is not Status.SUPPORTED


# --- compose -------------------------------------------------------------------------

def with_interface(assume=(), guarantee=()) -> SafetyCase:
    return SafetyCase("c", interface=CaseInterface(
        tuple(TaggedStatement(t, s) for t, s in assume), tuple(TaggedStatement(t, s) for t, s in guarantee)))


STD, FM = InterfaceTag.STANDARD, InterfaceTag.FAILURE_MODEL


def test_exact_match():
    child = with_interface(assume=[(STD, "ISO 26262 conformance")])
    parent = with_interface(guarantee=[(STD, "  iso 26262   Conformance ")])
    assert compose(parent, child).errors == []


def test_unmatched_assumption():
    report = compose(SafetyCase("p"), with_interface(assume=[(FM, "fail-silent actuators")]))
    assert [f.rule_id for f in report.errors] == ["unmatched_assumption"]


def test_tag_must_match_too():
    child = with_interface(assume=[(FM, "ISO 26262 conformance")])
    parent = with_interface(guarantee=[(STD, "ISO 26262 conformance")])
    assert len(compose(parent, child).errors) == 1


def test_five_assumptions_three_matched():
    statements = [(STD, f"s{i}") for i in range(5)]
    report = compose(with_interface(guarantee=statements[:3]), with_interface(assume=statements))
    assert len(report.errors) == 2


def test_unused_guarantee_warning():
    child = with_interface(guarantee=[(STD, "provided")])
    report = compose(with_interface(), child)
    assert [f.rule_id for f in report.warnings] == ["unused_guarantee"] and report.ok


def test_compose_needs_child_interface():
    with pytest.raises(RejectedInput):
        compose(SafetyCase("p"), SafetyCase("c"))


tagged = st.tuples(st.sampled_from([STD, FM, InterfaceTag.REGULATION]), st.sampled_from(["a", "b", "c", "A ", "d e"]))


@settings(max_examples=200, deadline=None)
@given(st.lists(tagged, max_size=20), st.lists(tagged, max_size=20))
def test_error_count_is_unmatched_assumptions(assumptions, guarantees):
    report = compose(with_interface(guarantee=guarantees), with_interface(assume=assumptions))
    matched = sum(
        1 for tag, text in assumptions
        if any(tag == gt and " ".join(text.split()).lower() == " ".join(gs.split()).lower() for gt, gs in guarantees)
    )
    assert len(report.errors) == len(assumptions) - matched
