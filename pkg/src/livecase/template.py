"""Instantiation of the built-in OASCF top-level argument template."""

from __future__ import annotations

import string
from importlib import resources

from livecase.argument import SafetyCase
from livecase.exceptions import RejectedInput
from livecase.scdl import parse

TOP_CLAIM = "safe enough to operate in the considered operational design domain"
PILLAR_NAMES = ("Live It Right", "Engineer It Right", "Operate It Right")
ROOT_STRATEGY = "S1"


def template_text() -> str:
    return resources.files("livecase").joinpath("data/oascf_template.scdl").read_text("utf-8")


def _scdl_escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")


def instantiate_oascf_template(
    system_name: str,
    odd_name: str,
    template: str | None = None,
) -> SafetyCase:
    """Build a case from the OASCF template for one system and ODD.

    ``template`` overrides the shipped SCDL template text; it may use the
    ``$system_name`` and ``$odd_name`` placeholders.
    """
    if not system_name or not system_name.strip():
        raise RejectedInput("system_name must be non-empty")
    if not odd_name or not odd_name.strip():
        raise RejectedInput("odd_name must be non-empty")
    text = string.Template(template if template is not None else template_text()).substitute(
        system_name=_scdl_escape(system_name.strip()),
        odd_name=_scdl_escape(odd_name.strip()),
    )
    case, diagnostics = parse(text)
    if case is None:
        raise RejectedInput(
            "template does not parse: " + "; ".join(str(d) for d in diagnostics if d.severity == "error")
        )
    return case


def pillar_goals(case: SafetyCase) -> list[str]:
    """Goals directly under the root strategy."""
    if case.root is None:
        return []
    goals = []
    for strategy in case.children(case.root):
        if case.element(strategy).kind.value == "strategy":
            goals.extend(c for c in case.children(strategy) if case.element(c).kind.value == "goal")
    return goals
