from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from livecase.argument import ElementKind, validate_wellformed
from livecase.exceptions import RejectedInput
from livecase.template import PILLAR_NAMES, ROOT_STRATEGY, instantiate_oascf_template, pillar_goals

VERIFICATION = "Our Safety Verification activities conform with MIL-STD-882E"


def test_root_claim_names_system_and_odd():
    case = instantiate_oascf_template("AV-1", "urban-ODD")
    statement = case.element(case.root).statement
    assert "safe enough to operate" in statement
    assert "AV-1" in statement and "urban-ODD" in statement


def test_three_pillars_under_root_strategy():
    case = instantiate_oascf_template("AV-1", "urban-ODD")
    assert case.children(case.root) == [ROOT_STRATEGY]
    pillars = pillar_goals(case)
    assert len(pillars) == 3
    statements = [case.element(p).statement for p in pillars]
    for name in PILLAR_NAMES:
        assert sum(name in s for s in statements) == 1
    for pillar in pillars:
        assert case.attached_spis(pillar), f"{pillar} has no SPI slot"


def test_verification_goal_sits_under_engineer_pillar():
    case = instantiate_oascf_template("AV-1", "urban-ODD")
    goal = case.element("G5.2.8")
    assert goal.kind is ElementKind.GOAL and goal.statement == VERIFICATION
    engineer = next(p for p in pillar_goals(case) if "Engineer It Right" in case.element(p).statement)
    assert engineer in case.ancestors("G5.2.8")


def test_empty_parameters_rejected():
    for system, odd in (("", "odd"), ("sys", ""), ("  ", "odd")):
        with pytest.raises(RejectedInput):
            instantiate_oascf_template(system, odd)


def test_custom_template_text():
    text = 'case "$system_name" { goal G1 "$system_name in $odd_name" }'
    case = instantiate_oascf_template("Shuttle", "campus", template=text)
    assert case.name == "Shuttle" and case.element("G1").statement == "Shuttle in campus"
    with pytest.raises(RejectedInput, match="does not parse"):
        instantiate_oascf_template("a", "b", template='case "x" { goal }')


@settings(max_examples=60, deadline=None)
@given(st.text(min_size=1, max_size=40).filter(str.strip), st.text(min_size=1, max_size=40).filter(str.strip))
def test_any_instantiation_is_wellformed(system, odd):
    case = instantiate_oascf_template(system, odd)
    assert validate_wellformed(case).errors == []
    assert len(pillar_goals(case)) == 3
