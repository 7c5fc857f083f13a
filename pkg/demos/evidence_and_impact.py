"""Register evidence versions, watch links go stale, and trace the impact of a change."""

from __future__ import annotations

import tempfile
from pathlib import Path

from livecase import ChangeEvent, ChangeKind, EvidenceRegistry, load_fixture, propagate
from livecase.impact import LinkAnnotation


def main() -> None:
    case = load_fixture("sotif_pedestrian").case
    with tempfile.TemporaryDirectory() as tmp:
        journal = Path(tmp) / "evidence.log"
        registry = EvidenceRegistry(journal)
        for artifact, contents in {"E_FTA": [b"fta v1", b"fta v2"], "E_FLEET": [b"fleet q1"],
                                   "E_AUDIT": [b"audit 2026-03"]}.items():
            for content in contents:
                registry.register_version(artifact, content)
        print("journal:\n" + journal.read_text())
        print("link freshness:", {k: v.value for k, v in registry.evidence_state(case.links).items()})

        registry.register_version("E_FTA", b"fta v3, revised occlusion rate")
        print("after a new FTA version:",
              {k: v.value for k, v in EvidenceRegistry(journal).evidence_state(case.links).items()})

    report = propagate(case, [ChangeEvent("E_FTA", ChangeKind.CONTENT_CHANGED, "new occlusion rate")])
    print("\nimpact of new FTA content:")
    for element, state in sorted(report.impacted().items()):
        print(f"  {element}: {state.value}")
    for step in report.trace:
        print(f"    {step.source} -> {step.target} ({step.rule})")

    editorial = [ChangeEvent("E_FTA", ChangeKind.VERSION_BUMPED, "typo fix")]
    robust = [LinkAnnotation("E_FTA", "robust_to_editorial", "formatting does not change the numbers")]
    print("editorial bump on a robust link leaves everything unaffected:",
          propagate(case, editorial, robust).all_unaffected)


if __name__ == "__main__":
    main()
