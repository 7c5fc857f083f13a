"""Instantiate the built-in argument template, check it, then break it on purpose."""

from __future__ import annotations

from dataclasses import replace

from livecase import ArgumentEdge, validate_wellformed
from livecase.template import instantiate_oascf_template, pillar_goals


def main() -> None:
    case = instantiate_oascf_template("Shuttle-7", "campus loop, daylight, dry")
    print("top claim:", case.element(case.root).statement)
    for pillar in pillar_goals(case):
        spis = ", ".join(case.attached_spis(pillar))
        print(f"  pillar {pillar}: {case.element(pillar).statement}  [SPIs: {spis}]")
    print("G5.2.8:", case.element("G5.2.8").statement)
    print("findings on a fresh instantiation:", len(validate_wellformed(case).errors), "errors")

    # Close a loop from a verification sub-goal back to its pillar.
    pillar = next(a for a in case.ancestors("G5.2.8") if a in pillar_goals(case))
    broken = replace(case, edges=case.edges + (ArgumentEdge("G5.2.8", pillar),))
    for finding in validate_wellformed(broken).errors:
        print(f"  {finding.severity.value} {finding.rule_id} at {finding.element_id}: {finding.message}")


if __name__ == "__main__":
    main()
