"""Independent reference implementations used to check the engine.

None of these share code with ``livecase``'s algorithms: fault trees are
checked by brute-force enumeration, change impact by graph reachability in
networkx, rate bounds by high-precision bisection in mpmath and the deviation
test by exact rational tail sums.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

import mpmath
import networkx as nx
import numpy as np

from livecase.argument import EdgeKind, ElementKind, SafetyCase
from livecase.fault_tree import BasicEvent, Gate, GateOp, QuantitativeFaultTree

# --- fault trees ---------------------------------------------------------------


def _truth(node, states: np.ndarray, column: dict[str, int]) -> np.ndarray:
    if isinstance(node, BasicEvent):
        return states[:, column[node.id]]
    parts = [_truth(c, states, column) for c in node.children]
    out = parts[0].copy()
    for p in parts[1:]:
        out = out & p if node.op is GateOp.AND else out | p
    return out


def enumerate_states(tree: QuantitativeFaultTree):
    events = sorted({e.id for e in tree.basic_events()})
    n = len(events)
    masks = np.arange(2**n, dtype=np.int64)
    states = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    top = _truth(tree.top, states, {e: i for i, e in enumerate(events)})
    return events, states, top


def top_probability_by_enumeration(tree: QuantitativeFaultTree) -> float:
    """Sum of the probabilities of every basic-event state that fails the top."""
    events, states, top = enumerate_states(tree)
    rates = {e.id: e.rate for e in tree.basic_events()}
    p = np.array([rates[e] for e in events])
    weights = np.where(states, p, 1.0 - p).prod(axis=1)
    return float(mpmath.fsum(weights[top].tolist()))


def minimal_cut_sets_by_enumeration(tree: QuantitativeFaultTree) -> set[frozenset[str]]:
    """Failing states with no failing proper subset."""
    events, states, top = enumerate_states(tree)
    failing = {int(m) for m in np.flatnonzero(top)}
    minimal = set()
    for mask in failing:
        if any((mask & ~(1 << b)) in failing for b in range(len(events)) if mask >> b & 1):
            continue
        minimal.add(frozenset(events[b] for b in range(len(events)) if mask >> b & 1))
    return minimal


# --- change impact ------------------------------------------------------------

EDITORIAL = {"version_bumped", "statement_edited"}
CONTEXT_KINDS = {ElementKind.CONTEXT, ElementKind.ASSUMPTION, ElementKind.JUSTIFICATION}


def impact_by_reachability(case: SafetyCase, events, annotations) -> dict[str, str]:
    """Non-unaffected elements and their state, from reachability in a rule-filtered graph.

    Each event becomes a source node wired to the elements its rule reaches
    directly; supported_by edges are reversed (child -> parent) so that
    reachability models upward propagation.
    """
    sensitivity = {link.id: link.sensitivity.value for link in case.links}
    sensitivity.update({a.link_id: a.sensitivity.value for a in annotations})
    kind_of = {e.id: e.kind for e in case.elements}
    graph = nx.DiGraph()
    graph.add_nodes_from(kind_of)
    for edge in case.edges:
        if edge.kind is EdgeKind.SUPPORTED_BY:
            graph.add_edge(edge.target, edge.source)
    invalidated: set[str] = set()
    for n, event in enumerate(events):
        kind = event.kind.value
        source = ("event", n)
        graph.add_node(source)
        artifact_links = [link for link in case.links if link.artifact_id == event.target]
        if artifact_links:
            for link in artifact_links:
                holders = [e.id for e in case.elements if link.id in e.evidence_links]
                for h in holders:
                    if kind == "deleted":
                        invalidated.add(h)
                        graph.add_edge(source, h)
                    elif kind not in EDITORIAL or sensitivity[link.id] == "strict":
                        graph.add_edge(source, h)
            continue
        spi = next((s for s in case.spis if s.id == event.target), None)
        if spi is not None:
            claims = {spi.claim_id} | {e.id for e in case.elements if spi.id in e.spi_refs}
            targets = [(c, "statement_edited") for c in claims]
        else:
            targets = [(event.target, kind)]
        for element_id, k in targets:
            graph.add_edge(source, element_id)
            if k == "deleted":
                invalidated.add(element_id)
            if kind_of[element_id] in CONTEXT_KINDS:
                for edge in case.edges:
                    if edge.kind is EdgeKind.IN_CONTEXT_OF and edge.target == element_id:
                        if k in EDITORIAL and sensitivity.get(edge.id) == "robust_to_editorial":
                            continue
                        graph.add_edge(source, edge.source)
    reached: set[str] = set()
    for node in list(graph.nodes):
        if isinstance(node, tuple):
            reached |= nx.descendants(graph, node)
    return {e: ("invalidated" if e in invalidated else "needs_review") for e in reached}


# --- rate bounds -------------------------------------------------------------


def poisson_upper_bound(k: int, exposure: float, confidence: float, digits: int = 40) -> float:
    """Solve P(N <= k | mean mu) = 1 - confidence for mu by bisection, then divide by T."""
    with mpmath.workdps(digits):
        target = 1 - mpmath.mpf(confidence)

        def cdf(mu):
            return mpmath.gammainc(k + 1, mu, mpmath.inf, regularized=True)

        lo, hi = mpmath.mpf(0), mpmath.mpf(k + 10)
        while cdf(hi) > target:
            hi *= 2
        for _ in range(200):
            mid = (lo + hi) / 2
            if cdf(mid) > target:
                lo = mid
            else:
                hi = mid
        return float((lo + hi) / 2 / exposure)


# --- deviation test ----------------------------------------------------------


def binomial_two_sided_p(k1: int, k2: int) -> float:
    """Exact two-sided p-value for equal exposures: sum of Binomial(n, 1/2)
    outcomes no more probable than the observed one."""
    n = k1 + k2
    if n == 0:
        return 1.0
    pmf = [Fraction(comb(n, i), 2**n) for i in range(n + 1)]
    observed = pmf[k2]
    return float(min(Fraction(1), sum(p for p in pmf if p <= observed)))
