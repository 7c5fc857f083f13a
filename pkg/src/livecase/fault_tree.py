"""Quantitative fault trees over independent basic events.

Rates on basic events are per-demand probabilities in ``[0, 1]``. A per-unit
occurrence rate ``lam`` converts to a probability over a mission of length
``tau`` as ``1 - exp(-lam * tau)`` (see :func:`to_per_demand`). A rate of
``None`` is a placeholder that blocks quantification until it is filled in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Union

from livecase.exceptions import (
    PlaceholderRateError,
    RejectedInput,
    TreeTooLargeError,
    UnitMismatchError,
)
from livecase.spi import SpiEvaluation, Unit, deviation_test

MAX_CUT_SET_EVENTS = 24
MAX_INCLUSION_EXCLUSION_EVENTS = 20
# Shared-event trees are evaluated by conditioning on their shared events
# (2^n bottom-up passes) up to this many; beyond it, inclusion-exclusion.
MAX_PIVOT_EVENTS = 12
# Budget shares are shrunk by a few ulps so that leaf budgets still meet the
# target after floating-point rounding.
_ROUNDING_GUARD = 1.0 - 16 * 2.0**-52


class EventKind(str, enum.Enum):
    CAUSAL_FACTOR = "causal_factor"
    TRIGGERING_CONDITION = "triggering_condition"
    HW_FAILURE = "hw_failure"
    SW_DEFECT = "sw_defect"


class GateOp(str, enum.Enum):
    AND = "and"
    OR = "or"


@dataclass(frozen=True)
class BasicEvent:
    id: str
    rate: float | None = None
    spi_ref: str | None = None
    kind: EventKind = EventKind.CAUSAL_FACTOR
    description: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EventKind(self.kind))
        if self.rate is not None:
            object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True)
class Gate:
    id: str
    op: GateOp
    children: tuple[Union["Gate", BasicEvent], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "op", GateOp(self.op))
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise RejectedInput(f"gate {self.id} has no children")


Node = Union[Gate, BasicEvent]


@dataclass(frozen=True)
class QuantitativeFaultTree:
    id: str
    hazard_id: str
    top: Gate
    budgets: Mapping[str, float] = field(default_factory=dict)
    mission_time: float = 1.0
    mission_unit: Unit | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "budgets", dict(sorted(self.budgets.items())))
        if self.mission_unit is not None:
            object.__setattr__(self, "mission_unit", Unit(self.mission_unit))
        if not self.mission_time > 0:
            raise RejectedInput(f"tree {self.id}: mission time must be positive")

    def nodes(self) -> Iterator[Node]:
        """Pre-order walk; shared basic events appear once per occurrence."""
        stack: list[Node] = [self.top]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Gate):
                stack.extend(reversed(node.children))

    def gates(self) -> list[Gate]:
        return [n for n in self.nodes() if isinstance(n, Gate)]

    def basic_events(self) -> list[BasicEvent]:
        """Distinct basic events in order of first appearance."""
        seen: dict[str, BasicEvent] = {}
        for node in self.nodes():
            if isinstance(node, BasicEvent) and node.id not in seen:
                seen[node.id] = node
        return list(seen.values())

    def has_shared_events(self) -> bool:
        ids = [n.id for n in self.nodes() if isinstance(n, BasicEvent)]
        return len(ids) != len(set(ids))

    def node(self, node_id: str) -> Node:
        for n in self.nodes():
            if n.id == node_id:
                return n
        raise RejectedInput(f"tree {self.id} has no node {node_id!r}")

    def with_rates(self, rates: Mapping[str, float | None]) -> "QuantitativeFaultTree":
        def rebuild(node: Node) -> Node:
            if isinstance(node, BasicEvent):
                return replace(node, rate=rates[node.id]) if node.id in rates else node
            return Gate(node.id, node.op, tuple(rebuild(c) for c in node.children))

        return replace(self, top=rebuild(self.top))


def to_per_demand(rate: float, mission_time: float) -> float:
    return -math.expm1(-rate * mission_time)


def from_per_demand(probability: float, mission_time: float) -> float:
    return -math.log1p(-probability) / mission_time


# --- minimal cut sets -------------------------------------------------------

def _minimize(masks: set[int]) -> list[int]:
    kept: list[int] = []
    for m in sorted(masks, key=lambda x: (x.bit_count(), x)):
        if not any(k & m == k for k in kept):
            kept.append(m)
    return kept


def _cut_masks(node: Node, index: Mapping[str, int]) -> list[int]:
    if isinstance(node, BasicEvent):
        return [1 << index[node.id]]
    parts = [_cut_masks(c, index) for c in node.children]
    if node.op is GateOp.OR:
        return _minimize({m for part in parts for m in part})
    acc = parts[0]
    for part in parts[1:]:
        acc = _minimize({a | b for a in acc for b in part})
    return acc


def _event_index(tree: QuantitativeFaultTree, limit: int, what: str) -> list[str]:
    ids = sorted(e.id for e in tree.basic_events())
    if len(ids) > limit:
        raise TreeTooLargeError(
            f"{what} supports at most {limit} distinct basic events; tree {tree.id} has {len(ids)}"
        )
    return ids


def minimal_cut_sets(tree: QuantitativeFaultTree) -> tuple[tuple[str, ...], ...]:
    """All minimal cut sets, each sorted, in lexicographic order."""
    ids = _event_index(tree, MAX_CUT_SET_EVENTS, "minimal_cut_sets")
    index = {eid: i for i, eid in enumerate(ids)}
    sets = [tuple(ids[i] for i in range(len(ids)) if m >> i & 1) for m in _cut_masks(tree.top, index)]
    return tuple(sorted(sets))


# --- probability ------------------------------------------------------------

def _rates(tree: QuantitativeFaultTree) -> dict[str, float]:
    rates: dict[str, float] = {}
    placeholders = []
    for event in tree.basic_events():
        if event.rate is None:
            placeholders.append(event.id)
            continue
        if not 0.0 <= event.rate <= 1.0:
            raise RejectedInput(f"basic event {event.id} rate {event.rate} lies outside [0, 1]")
        rates[event.id] = event.rate
    if placeholders:
        raise PlaceholderRateError(
            f"tree {tree.id} has placeholder rates for {', '.join(placeholders)}; "
            "replace them with estimates before quantification"
        )
    return rates


def _bottom_up(node: Node, rates: Mapping[str, float]) -> float:
    if isinstance(node, BasicEvent):
        return rates[node.id]
    probs = [_bottom_up(c, rates) for c in node.children]
    if node.op is GateOp.AND:
        return math.prod(probs)
    if any(p >= 1.0 for p in probs):
        return 1.0
    # 1 - prod(1 - p) without cancellation for rare events.
    return -math.expm1(math.fsum(math.log1p(-p) for p in probs))


def _pivotal(node: Node, rates: Mapping[str, float], shared: list[str]) -> float:
    # Condition on every shared event: once they are fixed to 0 or 1 the rest
    # is a true tree, and every term of the sum is non-negative.
    terms = []
    for bits in range(1 << len(shared)):
        weight = 1.0
        fixed = dict(rates)
        for i, eid in enumerate(shared):
            on = bool(bits >> i & 1)
            weight *= rates[eid] if on else 1.0 - rates[eid]
            fixed[eid] = 1.0 if on else 0.0
        if weight:
            terms.append(weight * _bottom_up(node, fixed))
    return math.fsum(terms)


def _inclusion_exclusion(cut_masks: list[int], probs: list[float]) -> float:
    # Terms sharing the same union of cut sets are merged, so the number of
    # live terms is bounded by the number of distinct unions, not 2^m.
    coeff: dict[int, int] = {}
    for cut in cut_masks:
        update: dict[int, int] = {cut: 1}
        for union, c in coeff.items():
            merged = union | cut
            update[merged] = update.get(merged, 0) - c
        for union, c in update.items():
            coeff[union] = coeff.get(union, 0) + c
    terms = []
    for union, c in coeff.items():
        if c:
            term = float(c)
            bit = 0
            while union:
                if union & 1:
                    term *= probs[bit]
                union >>= 1
                bit += 1
            terms.append(term)
    return math.fsum(terms)


def _node_probability(tree: QuantitativeFaultTree, node: Node, rates: Mapping[str, float]) -> float:
    sub = QuantitativeFaultTree(tree.id, tree.hazard_id, node if isinstance(node, Gate)
                                else Gate(node.id, GateOp.OR, (node,)))
    if not sub.has_shared_events():
        return _bottom_up(node, rates)
    counts: dict[str, int] = {}
    for n in sub.nodes():
        if isinstance(n, BasicEvent):
            counts[n.id] = counts.get(n.id, 0) + 1
    shared = sorted(eid for eid, c in counts.items() if c > 1)
    if len(shared) <= MAX_PIVOT_EVENTS:
        return _pivotal(node, rates, shared)
    ids = _event_index(sub, MAX_INCLUSION_EXCLUSION_EVENTS, "exact probability of shared-event trees")
    index = {eid: i for i, eid in enumerate(ids)}
    return _inclusion_exclusion(_cut_masks(node, index), [rates[e] for e in ids])


def top_probability(tree: QuantitativeFaultTree, method: str = "auto") -> float:
    """Exact top-event probability assuming independent basic events.

    ``method`` is ``"auto"`` (bottom-up for true trees, inclusion-exclusion
    over minimal cut sets when events are shared), ``"bottom_up"`` (only
    valid without sharing) or ``"cut_sets"``.
    """
    rates = _rates(tree)
    if method == "auto":
        return _node_probability(tree, tree.top, rates)
    if method == "bottom_up":
        if tree.has_shared_events():
            raise RejectedInput("bottom-up evaluation is inexact when basic events are shared")
        return _bottom_up(tree.top, rates)
    if method == "cut_sets":
        ids = _event_index(tree, MAX_INCLUSION_EXCLUSION_EVENTS, "inclusion-exclusion")
        index = {eid: i for i, eid in enumerate(ids)}
        return _inclusion_exclusion(_cut_masks(tree.top, index), [rates[e] for e in ids])
    raise RejectedInput(f"unknown method {method!r}")


def node_probabilities(tree: QuantitativeFaultTree) -> dict[str, float]:
    rates = _rates(tree)
    out: dict[str, float] = {}
    for node in tree.nodes():
        if node.id not in out:
            out[node.id] = _node_probability(tree, node, rates)
    return out


# --- budgets ----------------------------------------------------------------

def _support(node: Node) -> frozenset[str]:
    if isinstance(node, BasicEvent):
        return frozenset({node.id})
    return frozenset().union(*(_support(c) for c in node.children))


def allocate_budget(
    tree: QuantitativeFaultTree,
    top_target: float,
    overrides: Mapping[str, float] | None = None,
) -> dict[str, float]:
    """Split a top-event risk target down to every node.

    An OR gate gives each of its k children ``target / k`` (the union bound);
    an AND gate over children with disjoint basic events gives each the k-th
    root of its target. When AND children share events each child keeps the
    whole target, and a basic event reached along several paths keeps its
    smallest allocation, so meeting every leaf budget always meets the top
    target. ``overrides`` pin the budget of named nodes.
    """
    if not 0.0 < top_target < 1.0:
        raise RejectedInput("top target must lie strictly between 0 and 1")
    overrides = dict(overrides or {})
    budgets: dict[str, float] = {}

    def assign(node: Node, target: float) -> None:
        target = overrides.get(node.id, target)
        budgets[node.id] = min(budgets.get(node.id, target), target)
        if isinstance(node, BasicEvent):
            return
        k = len(node.children)
        if node.op is GateOp.OR:
            share = target / k * _ROUNDING_GUARD
        else:
            supports = [_support(c) for c in node.children]
            disjoint = sum(len(s) for s in supports) == len(frozenset().union(*supports))
            share = target ** (1.0 / k) * _ROUNDING_GUARD if disjoint else target
        for child in node.children:
            assign(child, share)

    assign(tree.top, top_target)
    return budgets


@dataclass(frozen=True)
class BudgetCheck:
    node_id: str
    probability: float
    budget: float

    @property
    def ok(self) -> bool:
        return self.probability <= self.budget


def check_budgets(tree: QuantitativeFaultTree, budgets: Mapping[str, float] | None = None) -> list[BudgetCheck]:
    budgets = tree.budgets if budgets is None else budgets
    if not budgets:
        return []
    probs = node_probabilities(tree)
    return [BudgetCheck(node_id, probs[node_id], budget)
            for node_id, budget in sorted(budgets.items()) if node_id in probs]


# --- refinement from field data --------------------------------------------

@dataclass(frozen=True)
class DeviationFlag:
    event_id: str
    spi_id: str
    prior_rate: float
    field_rate: float
    p_value: float


def refine_rates(
    tree: QuantitativeFaultTree,
    evaluations: Mapping[str, SpiEvaluation],
    alpha: float = 0.05,
) -> tuple[QuantitativeFaultTree, list[DeviationFlag]]:
    """Replace SPI-annotated rates with field estimates.

    Each annotated event takes the SPI point rate converted to a per-demand
    probability over the tree's mission time. The prior rate, expressed as
    pseudo-counts over the same exposure as the field data, is compared with
    the field counts by :func:`~livecase.spi.deviation_test`; deviating
    events are flagged. Events without data keep their prior rate.
    """
    new_rates: dict[str, float] = {}
    flags: list[DeviationFlag] = []
    for event in tree.basic_events():
        if event.spi_ref is None or event.spi_ref not in evaluations:
            continue
        ev = evaluations[event.spi_ref]
        if tree.mission_unit is not None and ev.unit is not None and ev.unit is not tree.mission_unit:
            raise UnitMismatchError(
                f"tree {tree.id} missions are per {tree.mission_unit.value}; "
                f"SPI {ev.spi_id} is per {ev.unit.value}"
            )
        if ev.total_exposure <= 0:
            continue
        field_p = to_per_demand(ev.point_rate, tree.mission_time)
        new_rates[event.id] = field_p
        if event.rate is None or event.rate >= 1.0:
            continue
        prior_lambda = from_per_demand(event.rate, tree.mission_time)
        pseudo = round(prior_lambda * ev.total_exposure)
        result = deviation_test((pseudo, ev.total_exposure), (ev.total_events, ev.total_exposure), alpha)
        if result.deviating:
            flags.append(DeviationFlag(event.id, ev.spi_id, event.rate, field_p, result.p_value))
    return tree.with_rates(new_rates), flags
