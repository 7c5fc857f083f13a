from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import random_annotations, random_case, random_events
from oracles import impact_by_reachability
from livecase.argument import ArgumentEdge, ArgumentElement, EdgeKind, ElementKind, SafetyCase
from livecase.evidence import DynamicLink, Sensitivity
from livecase.exceptions import RejectedInput
from livecase.impact import (
    ChangeEvent,
    ChangeKind,
    ImpactState,
    LinkAnnotation,
    parse_events,
    propagate,
    structure_lint,
)
from livecase.spi import SpiDefinition, Unit

G, S, SN, C = ElementKind.GOAL, ElementKind.STRATEGY, ElementKind.SOLUTION, ElementKind.CONTEXT


def small_case(link_sensitivity=Sensitivity.STRICT) -> SafetyCase:
    """G1 -> S1 -> {G2 -> Sn1 [L1 -> ART], G3 -> Sn2}; G2 in context of C1."""
    elements = (
        ArgumentElement("G1", G, "Top"),
        ArgumentElement("S1", S, "Split"),
        ArgumentElement("G2", G, "Left"),
        ArgumentElement("G3", G, "Right"),
        ArgumentElement("Sn1", SN, "Left evidence", evidence_links=("L1",)),
        ArgumentElement("Sn2", SN, "Right evidence"),
        ArgumentElement("C1", C, "Operating context"),
    )
    edges = (
        ArgumentEdge("G1", "S1"), ArgumentEdge("S1", "G2"), ArgumentEdge("S1", "G3"),
        ArgumentEdge("G2", "Sn1"), ArgumentEdge("G3", "Sn2"),
        ArgumentEdge("G2", "C1", EdgeKind.IN_CONTEXT_OF),
    )
    spis = (SpiDefinition("SPI1", "G3", "m", 0.1, Unit.HOUR),)
    links = (DynamicLink("L1", "ART", sensitivity=link_sensitivity),)
    return SafetyCase("small", elements, edges, "G1", spis, links=links)


def impacted(report) -> dict[str, str]:
    return {k: v.value for k, v in report.impacted().items()}


def test_no_events_leaves_everything_unaffected():
    report = propagate(small_case(), [])
    assert report.all_unaffected and report.trace == ()


def test_strict_content_change_climbs_to_root_only():
    report = propagate(small_case(), [ChangeEvent("ART", ChangeKind.CONTENT_CHANGED)])
    assert impacted(report) == {"Sn1": "needs_review", "G2": "needs_review",
                                "S1": "needs_review", "G1": "needs_review"}
    for sibling in ("G3", "Sn2", "C1"):
        assert report.states[sibling] is ImpactState.UNAFFECTED


def test_editorial_change_behind_robust_link_is_suppressed():
    case = small_case(Sensitivity.ROBUST_TO_EDITORIAL)
    for kind in (ChangeKind.VERSION_BUMPED, ChangeKind.STATEMENT_EDITED):
        assert propagate(case, [ChangeEvent("ART", kind)]).all_unaffected
    assert not propagate(case, [ChangeEvent("ART", ChangeKind.CONTENT_CHANGED)]).all_unaffected


def test_annotation_overrides_link_sensitivity():
    case = small_case(Sensitivity.STRICT)
    relaxed = [LinkAnnotation("L1", Sensitivity.ROBUST_TO_EDITORIAL, "typo-tolerant")]
    assert propagate(case, [ChangeEvent("ART", ChangeKind.VERSION_BUMPED)], relaxed).all_unaffected


def test_deleted_artifact_invalidates_solution():
    report = propagate(small_case(), [ChangeEvent("ART", ChangeKind.DELETED)])
    assert report.states["Sn1"] is ImpactState.INVALIDATED
    assert report.states["G1"] is ImpactState.NEEDS_REVIEW


def test_context_change_reaches_holders():
    report = propagate(small_case(), [ChangeEvent("C1", ChangeKind.STATEMENT_EDITED)])
    assert set(report.impacted()) == {"C1", "G2", "S1", "G1"}
    assert any(step.rule == "R5" and step.target == "G2" for step in report.trace)
    robust = [LinkAnnotation("G2:in_context_of:C1", Sensitivity.ROBUST_TO_EDITORIAL)]
    assert set(propagate(small_case(), [ChangeEvent("C1", ChangeKind.STATEMENT_EDITED)], robust).impacted()) == {"C1"}


def test_spi_edit_counts_as_claim_edit():
    report = propagate(small_case(), [ChangeEvent("SPI1", ChangeKind.CONTENT_CHANGED)])
    assert set(report.impacted()) == {"G3", "S1", "G1"}


def test_impact_never_flows_downward():
    report = propagate(small_case(), [ChangeEvent("G1", ChangeKind.STATEMENT_EDITED)])
    assert set(report.impacted()) == {"G1"}


def test_unknown_target_rejected():
    with pytest.raises(RejectedInput, match="nowhere"):
        propagate(small_case(), [ChangeEvent("nowhere", ChangeKind.DELETED)])


def test_duplicate_annotation_rejected():
    twice = [LinkAnnotation("L1", Sensitivity.STRICT), LinkAnnotation("L1", Sensitivity.STRICT)]
    with pytest.raises(RejectedInput):
        propagate(small_case(), [], twice)


def test_parse_events():
    events = parse_events(['{"target": "ART", "kind": "deleted", "detail": "gone"}', "",
                           '{"target": "G1", "kind": "statement_edited"}'])
    assert events == [ChangeEvent("ART", ChangeKind.DELETED, "gone"), ChangeEvent("G1", ChangeKind.STATEMENT_EDITED)]
    for bad in ('{"target": "G1"}', '{"target": "G1", "kind": "renamed"}',
                '{"target": "G1", "kind": "deleted", "who": 1}', "[]", "nope"):
        with pytest.raises(RejectedInput, match="line 1"):
            parse_events([bad])


def test_report_dict_is_sorted():
    data = propagate(small_case(), [ChangeEvent("ART", ChangeKind.CONTENT_CHANGED)]).as_dict()
    assert list(data["states"]) == sorted(data["states"])
    assert ["Sn1", "G2", "R4"] in data["trace"]


# --- structure lint ------------------------------------------------------------------

def fan_out_case(n_solutions: int) -> SafetyCase:
    elements = [ArgumentElement("G1", G, "Top")]
    edges = []
    links = []
    for i in range(n_solutions):
        elements.append(ArgumentElement(f"Sn{i}", SN, "Evidence", evidence_links=(f"L{i}",)))
        edges.append(ArgumentEdge("G1", f"Sn{i}"))
        links.append(DynamicLink(f"L{i}", "ART", sensitivity=Sensitivity.STRICT))
    return SafetyCase("fan", tuple(elements), tuple(edges), "G1", links=tuple(links))


def test_structure_lint_thresholds():
    assert structure_lint(fan_out_case(1)).findings == ()
    assert structure_lint(fan_out_case(5)).findings == ()
    report = structure_lint(fan_out_case(6))
    assert [(f.element_id, f.rule_id) for f in report.findings] == [("ART", "artifact_fan_out")]
    assert structure_lint(fan_out_case(6), artifact_fan_out=10).findings == ()


def test_structure_lint_solution_fan_in():
    elements = [ArgumentElement("G0", G, "Top"), ArgumentElement("Sn", SN, "Shared")]
    edges = [ArgumentEdge("G0", "Sn")]
    for i in range(1, 6):
        elements.append(ArgumentElement(f"G{i}", G, "Sub"))
        edges += [ArgumentEdge("G0", f"G{i}"), ArgumentEdge(f"G{i}", "Sn")]
    case = SafetyCase("fan_in", tuple(elements), tuple(edges), "G0")
    assert structure_lint(case).rules() == {"solution_fan_in"}
    assert structure_lint(case, fan_in=6).findings == ()


# --- properties ------------------------------------------------------------------------

cases = st.builds(lambda seed, n: (random.Random(seed), n), st.integers(0, 2**32 - 1), st.integers(2, 60))


@settings(max_examples=120, deadline=None)
@given(cases, st.integers(0, 6))
def test_matches_reachability_oracle(setup, n_events):
    rng, n = setup
    case = random_case(rng, n)
    events = random_events(rng, case, n_events)
    annotations = random_annotations(rng, case)
    assert impacted(propagate(case, events, annotations)) == impact_by_reachability(case, events, annotations)


@settings(max_examples=80, deadline=None)
@given(cases, st.integers(1, 6), st.randoms(use_true_random=False))
def test_event_order_does_not_matter(setup, n_events, shuffler):
    rng, n = setup
    case = random_case(rng, n)
    events = random_events(rng, case, n_events)
    shuffled = list(events)
    shuffler.shuffle(shuffled)
    assert propagate(case, events) == propagate(case, shuffled)


@settings(max_examples=80, deadline=None)
@given(cases, st.integers(0, 5))
def test_extra_event_never_downgrades(setup, n_events):
    rng, n = setup
    case = random_case(rng, n)
    events = random_events(rng, case, n_events)
    before = propagate(case, events).states
    after = propagate(case, events + random_events(rng, case, 1)).states
    rank = {ImpactState.UNAFFECTED: 0, ImpactState.NEEDS_REVIEW: 1, ImpactState.INVALIDATED: 2}
    assert all(rank[after[e]] >= rank[before[e]] for e in before)


@settings(max_examples=80, deadline=None)
@given(cases, st.integers(1, 5))
def test_every_impacted_element_has_a_trace_step(setup, n_events):
    rng, n = setup
    case = random_case(rng, n)
    report = propagate(case, random_events(rng, case, n_events))
    targets = {step.target for step in report.trace}
    assert set(report.impacted()) <= targets
