"""Quantify a fault tree, allocate a risk budget, and refine rates from field data."""

from __future__ import annotations

from livecase import allocate_budget, load_fixture, minimal_cut_sets, refine_rates, top_probability
from livecase.fault_tree import check_budgets
from livecase.spi import evaluate


def main() -> None:
    for name in ("sotif_pedestrian", "deviation_demo"):
        fixture = load_fixture(name)
        tree = fixture.case.fault_trees[0]
        print(f"{name}: tree {tree.id} for hazard {tree.hazard_id}")
        print("  minimal cut sets:", ["{" + ", ".join(c) + "}" for c in minimal_cut_sets(tree)])
        print(f"  top probability per mission: {top_probability(tree):.6g}")
        for check in check_budgets(tree):
            print(f"  budget {check.node_id}: {check.probability:.3g} <= {check.budget:g}? {check.ok}")

        store, _ = fixture.telemetry()
        evaluations = {s.id: evaluate(s, store) for s in fixture.case.spis}
        refined, flags = refine_rates(tree, evaluations)
        print(f"  after field refinement: {top_probability(refined):.6g}")
        for flag in flags:
            print(f"  deviation on {flag.event_id}: prior {flag.prior_rate:g} vs field {flag.field_rate:.3g} "
                  f"(p={flag.p_value:.2g})")

    tree = load_fixture("sotif_pedestrian").case.fault_trees[0]
    budgets = allocate_budget(tree, 1e-4)
    print("\nallocating a 1e-4 target top-down:")
    for node_id, budget in budgets.items():
        print(f"  {node_id:<14} {budget:.3g}")


if __name__ == "__main__":
    main()
