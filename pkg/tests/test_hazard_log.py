from __future__ import annotations

from dataclasses import replace
from datetime import datetime, timezone
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from livecase.exceptions import PlaceholderRateError, RejectedInput, StatusTransitionError
from livecase.fault_tree import BasicEvent, EventKind, Gate, GateOp, QuantitativeFaultTree, top_probability
from livecase.fixtures import load_fixture
from livecase.hazard_log import (
    CausalFactor,
    CausalPathway,
    ControlKind,
    Hazard,
    HazardLog,
    HazardStatus,
    LossEvent,
    OperationalControl,
    RiskLevel,
    RiskMatrix,
    SafetyCriticalFunction,
    assess_risk,
    generate_tree_skeleton,
    parse_log,
    print_log,
    set_status,
    trace_check,
)
from livecase.spi import SpiDefinition, Unit, evaluate_totals

AT = datetime(2026, 3, 1, tzinfo=timezone.utc)

TWO_BY_TWO = RiskMatrix(
    ("sev_lo", "sev_hi"), ("prob_lo", "prob_hi"),
    {("sev_hi", "prob_hi"): "high", ("sev_hi", "prob_lo"): "serious",
     ("sev_lo", "prob_hi"): "medium", ("sev_lo", "prob_lo"): "low"},
)


def toy_log(**overrides) -> HazardLog:
    parts = dict(
        loss_events=[LossEvent("L1", "Injury", "sev_hi")],
        hazards=[Hazard("H1", "Late braking", ("L1",), fault_tree_id="FT1")],
        functions=[SafetyCriticalFunction("F1", "Emergency braking", ("H1",), 4)],
        controls=[OperationalControl("OC1", "Avoid school zones", ControlKind.ROUTE_RESTRICTION, ("H1",), "SPI1")],
        factors=[CausalFactor("CF1", "Occlusion", EventKind.TRIGGERING_CONDITION),
                 CausalFactor("CF2", "Slow perception", EventKind.SW_DEFECT)],
        pathways=[CausalPathway("P1", "H1", ("CF1", "CF2"))],
    )
    parts.update(overrides)
    return HazardLog("toy", **parts)


def toy_tree(rate=0.01, spi_ref=None) -> QuantitativeFaultTree:
    return QuantitativeFaultTree("FT1", "H1", Gate("top", GateOp.OR, (
        BasicEvent("CF1", rate, spi_ref=spi_ref), BasicEvent("CF2", 0.01))))


# --- risk matrix --------------------------------------------------------------

def test_assess_risk_lookups_and_record():
    log = toy_log()
    assert assess_risk(log, "H1", "sev_hi", "prob_hi", TWO_BY_TWO, at=AT) is RiskLevel.HIGH
    assert log.hazard("H1").assessment.assessed_at == AT
    assert assess_risk(log, "H1", "sev_lo", "prob_lo", TWO_BY_TWO, at=AT) is RiskLevel.LOW
    assert log.hazard("H1").assessment.level is RiskLevel.LOW


def test_assess_risk_unknown_label():
    with pytest.raises(RejectedInput, match="sev_mid"):
        assess_risk(toy_log(), "H1", "sev_mid", "prob_lo", TWO_BY_TWO)
    with pytest.raises(RejectedInput):
        assess_risk(toy_log(), "H9", "sev_lo", "prob_lo", TWO_BY_TWO)


def test_matrix_must_be_total_and_monotone():
    cells = dict(TWO_BY_TWO.cells)
    del cells[("sev_lo", "prob_lo")]
    with pytest.raises(RejectedInput, match="total"):
        RiskMatrix(TWO_BY_TWO.severities, TWO_BY_TWO.probabilities, cells)
    cells = dict(TWO_BY_TWO.cells, **{})
    cells[("sev_hi", "prob_hi")] = RiskLevel.LOW
    with pytest.raises(RejectedInput, match="monotone"):
        RiskMatrix(TWO_BY_TWO.severities, TWO_BY_TWO.probabilities, cells)


def test_matrix_rigour_table_validation():
    with pytest.raises(RejectedInput):
        replace(TWO_BY_TWO, rigour={"low": 3, "medium": 2, "serious": 3, "high": 4})
    with pytest.raises(RejectedInput):
        replace(TWO_BY_TWO, rigour={"low": 1, "medium": 2, "serious": 3, "high": 5})


def test_matrix_from_toml():
    text = (
        'severity = ["minor", "major"]\nprobability = ["rare", "often"]\n'
        'cells = [["low", "medium"], ["serious", "high"]]\nacceptable = "low"\n'
    )
    matrix = RiskMatrix.from_toml(text)
    assert matrix.level("major", "often") is RiskLevel.HIGH
    assert not matrix.is_acceptable(RiskLevel.MEDIUM)
    with pytest.raises(RejectedInput, match="unknown key"):
        RiskMatrix.from_toml(text + "colour = 1\n")
    with pytest.raises(RejectedInput):
        RiskMatrix.from_toml('severity = ["a"]\nprobability = ["b"]\ncells = [["low", "low"]]\n')
    with pytest.raises(RejectedInput):
        RiskMatrix.from_toml("severity = [")


levels = st.sampled_from(list(RiskLevel))


@st.composite
def monotone_matrices(draw):
    n_sev, n_prob = draw(st.integers(1, 5)), draw(st.integers(1, 5))
    raw = [[draw(levels).rank for _ in range(n_prob)] for _ in range(n_sev)]
    # 2-D running maximum makes the grid monotone in both axes.
    for i, j in product(range(n_sev), range(n_prob)):
        raw[i][j] = max([raw[i][j]] + ([raw[i - 1][j]] if i else []) + ([raw[i][j - 1]] if j else []))
    order = list(RiskLevel)
    sev = tuple(f"s{i}" for i in range(n_sev))
    prob = tuple(f"p{j}" for j in range(n_prob))
    return RiskMatrix(sev, prob, {(sev[i], prob[j]): order[raw[i][j]] for i in range(n_sev) for j in range(n_prob)})


@settings(max_examples=150, deadline=None)
@given(monotone_matrices())
def test_walking_up_never_lowers_level(matrix):
    for s, p in product(matrix.severities, matrix.probabilities):
        here = matrix.level(s, p).rank
        j = matrix.probabilities.index(p)
        i = matrix.severities.index(s)
        if j + 1 < len(matrix.probabilities):
            assert matrix.level(s, matrix.probabilities[j + 1]).rank >= here
        if i + 1 < len(matrix.severities):
            assert matrix.level(matrix.severities[i + 1], p).rank >= here


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_matrix_accepted_iff_monotone(n_sev, n_prob, data):
    grid = [[data.draw(levels) for _ in range(n_prob)] for _ in range(n_sev)]
    monotone = all(
        grid[i][j].rank <= grid[i2][j2].rank
        for i, j, i2, j2 in product(range(n_sev), range(n_prob), range(n_sev), range(n_prob))
        if i <= i2 and j <= j2
    )
    sev = tuple(f"s{i}" for i in range(n_sev))
    prob = tuple(f"p{j}" for j in range(n_prob))
    cells = {(sev[i], prob[j]): grid[i][j] for i in range(n_sev) for j in range(n_prob)}
    if monotone:
        RiskMatrix(sev, prob, cells)
    else:
        with pytest.raises(RejectedInput):
            RiskMatrix(sev, prob, cells)


# --- trace check ---------------------------------------------------------------

def test_fully_linked_log_has_no_findings():
    log = toy_log()
    assess_risk(log, "H1", "sev_hi", "prob_hi", TWO_BY_TWO, at=AT)
    assert trace_check(log, trees=[toy_tree()], matrix=TWO_BY_TWO).findings == ()


def test_high_hazard_without_mitigation_is_one_error():
    log = toy_log(functions=[], controls=[])
    assess_risk(log, "H1", "sev_hi", "prob_hi", TWO_BY_TWO, at=AT)
    report = trace_check(log, trees=[toy_tree()], matrix=TWO_BY_TWO)
    assert [(f.element_id, f.rule_id) for f in report.errors] == [("H1", "unmitigated_hazard")]
    assert report.warnings == []


def test_acceptable_hazard_needs_no_mitigation():
    log = toy_log(functions=[], controls=[])
    assess_risk(log, "H1", "sev_lo", "prob_hi", TWO_BY_TWO, at=AT)
    assert trace_check(log, trees=[toy_tree()], matrix=TWO_BY_TWO).findings == ()


def test_control_without_audit_spi_is_one_warning():
    control = OperationalControl("OC1", "Avoid school zones", ControlKind.ROUTE_RESTRICTION, ("H1",))
    report = trace_check(toy_log(controls=[control]), trees=[toy_tree()], matrix=TWO_BY_TWO)
    assert [(f.element_id, f.severity.value, f.rule_id) for f in report.findings] == [
        ("OC1", "warning", "control_no_audit_spi")]


@pytest.mark.parametrize("overrides, tree, expected", [
    (dict(hazards=[Hazard("H1", "x", (), fault_tree_id="FT1")]), toy_tree(), {("H1", "hazard_no_loss_event")}),
    (dict(hazards=[Hazard("H1", "x", ("L9",), fault_tree_id="FT1")]), toy_tree(), {("H1", "dangling_reference")}),
    (dict(hazards=[Hazard("H1", "x", ("L1",))]), None, {("H1", "hazard_no_fault_tree")}),
    (dict(hazards=[Hazard("H1", "x", ("L1",), fault_tree_id="FT9")]), toy_tree(), {("H1", "dangling_reference")}),
    (dict(loss_events=[LossEvent("L1", "Injury", "sev_unheard")]), toy_tree(), {("L1", "unknown_severity_class")}),
    (dict(pathways=[CausalPathway("P1", "H1", ("CF9",))]), toy_tree(), {("P1", "dangling_reference")}),
])
def test_trace_check_rules(overrides, tree, expected):
    report = trace_check(toy_log(**overrides), trees=[tree] if tree else [], matrix=TWO_BY_TWO)
    assert {(f.element_id, f.rule_id) for f in report.findings} == expected


def test_tree_for_unknown_hazard():
    stray = QuantitativeFaultTree("FT2", "H7", Gate("t", GateOp.OR, (BasicEvent("x", 0.1),)))
    report = trace_check(toy_log(), trees=[toy_tree(), stray], matrix=TWO_BY_TWO)
    assert {(f.element_id, f.rule_id) for f in report.findings} == {("FT2", "tree_unknown_hazard")}


def test_insufficient_rigour():
    log = toy_log(functions=[SafetyCriticalFunction("F1", "Braking", ("H1",), 2)])
    assess_risk(log, "H1", "sev_hi", "prob_lo", TWO_BY_TWO, at=AT)
    report = trace_check(log, trees=[toy_tree()], matrix=TWO_BY_TWO)
    assert [(f.element_id, f.rule_id) for f in report.findings] == [("F1", "insufficient_rigour")]


def test_trace_check_is_deterministic_and_idempotent():
    log = toy_log(hazards=[Hazard("H1", "x", ("L9",))], controls=[])
    first = trace_check(log, matrix=TWO_BY_TWO)
    assert trace_check(log, matrix=TWO_BY_TWO) == first
    assert trace_check(log.snapshot(), matrix=TWO_BY_TWO) == first


# --- status discipline ----------------------------------------------------------------

def test_status_moves_forward_or_back_to_open():
    log = toy_log()
    set_status(log, "H1", HazardStatus.MITIGATED)
    set_status(log, "H1", HazardStatus.VERIFIED)
    with pytest.raises(StatusTransitionError):
        set_status(log, "H1", HazardStatus.MITIGATED)
    with pytest.raises(StatusTransitionError):
        set_status(log, "H1", HazardStatus.VERIFIED)
    assert set_status(log, "H1", HazardStatus.OPEN).status is HazardStatus.OPEN


def test_validated_needs_tree_and_consistent_field_data():
    spi = SpiDefinition("SPI1", "G1", "m", 1.0, Unit.HOUR)
    tree = toy_tree(rate=0.02, spi_ref="SPI1")
    log = toy_log()
    with pytest.raises(StatusTransitionError, match="fault tree"):
        set_status(log, "H1", "validated")
    with pytest.raises(StatusTransitionError, match="field data"):
        set_status(log, "H1", "validated", trees=[tree], evaluations={})
    deviating = {"SPI1": evaluate_totals(spi, 200, 1000.0)}
    with pytest.raises(StatusTransitionError, match="deviate"):
        set_status(log, "H1", "validated", trees=[tree], evaluations=deviating)
    consistent = {"SPI1": evaluate_totals(spi, 20, 1000.0)}
    assert set_status(log, "H1", "validated", trees=[tree], evaluations=consistent).status is HazardStatus.VALIDATED


# --- skeletons -------------------------------------------------------------------

def test_skeleton_one_pathway_of_two_factors():
    tree = generate_tree_skeleton(toy_log(), "H1")
    assert tree.id == "FT_H1" and tree.top.op is GateOp.OR
    (branch,) = tree.top.children
    assert isinstance(branch, Gate) and branch.op is GateOp.AND
    assert [c.id for c in branch.children] == ["CF1", "CF2"]
    assert branch.children[0].kind is EventKind.TRIGGERING_CONDITION


def test_skeleton_three_single_factor_pathways():
    factors = [CausalFactor(f"CF{i}", f"Factor {i}") for i in range(3)]
    pathways = [CausalPathway(f"P{i}", "H1", (f"CF{i}",)) for i in range(3)]
    tree = generate_tree_skeleton(toy_log(factors=factors, pathways=pathways), "H1")
    assert tree.top.op is GateOp.OR
    assert all(isinstance(c, BasicEvent) for c in tree.top.children) and len(tree.top.children) == 3


def test_skeleton_cannot_be_quantified():
    tree = generate_tree_skeleton(toy_log(), "H1")
    with pytest.raises(PlaceholderRateError):
        top_probability(tree)


def test_skeleton_needs_pathways():
    with pytest.raises(RejectedInput, match="pathway"):
        generate_tree_skeleton(toy_log(pathways=[]), "H1")


# --- persistence ----------------------------------------------------------------------

def test_log_round_trip():
    log = toy_log()
    assess_risk(log, "H1", "sev_hi", "prob_hi", TWO_BY_TWO, at=AT)
    text = print_log(log)
    parsed, diagnostics = parse_log(text)
    assert diagnostics == [] and parsed == log
    assert print_log(parsed) == text


def test_fixture_log_round_trip_and_clean_trace():
    fixture = load_fixture("sotif_pedestrian")
    reparsed, diagnostics = parse_log(print_log(fixture.hazard_log))
    assert diagnostics == [] and reparsed == fixture.hazard_log
    assert trace_check(fixture.hazard_log, fixture.case, matrix=fixture.matrix).findings == ()
    skeleton = generate_tree_skeleton(fixture.hazard_log, "H_PED")
    assert {e.id for e in skeleton.basic_events()} == {e.id for e in fixture.case.tree("FT_PED").basic_events()}


def test_parse_log_reports_several_errors():
    text = 'hazard_log "x" {\n  hazard H1 "a" { status: sideways; }\n  control OC1 "b" kind teleport mitigates H1;\n}\n'
    log, diagnostics = parse_log(text)
    assert log is None
    assert len(diagnostics) >= 2
    assert all(d.span.line >= 1 for d in diagnostics)
