"""Check hazard-log traceability and generate a fault-tree skeleton from causal pathways."""

from __future__ import annotations

from livecase import SafetyCase, generate_tree_skeleton, load_fixture, trace_check
from livecase.scdl import print_case


def main() -> None:
    fixture = load_fixture("sotif_pedestrian")
    log, matrix = fixture.hazard_log, fixture.matrix
    print("risk level of catastrophic/remote:", matrix.level("catastrophic", "remote").value)
    report = trace_check(log, fixture.case, matrix=matrix)
    print(f"trace check: {len(report.findings)} findings")
    for finding in report.findings:
        print(f"  {finding.severity.value} {finding.rule_id} at {finding.element_id}: {finding.message}")

    skeleton = generate_tree_skeleton(log, "H_PED", "FT_SKELETON")
    print("\nskeleton built from the pathways (every rate is a placeholder):")
    print(print_case(SafetyCase("skeleton", fault_trees=(skeleton,))))


if __name__ == "__main__":
    main()
