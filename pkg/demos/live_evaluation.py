"""Run the whole live check on every shipped fixture and print the verdicts."""

from __future__ import annotations

from livecase import evaluate_case, load_fixture
from livecase.cli import VERDICT_EXIT
from livecase.fixtures import FIXTURE_NAMES
from livecase.report import render_text


def main() -> None:
    for name in FIXTURE_NAMES:
        fixture = load_fixture(name)
        store, diagnostics = fixture.telemetry()
        report = evaluate_case(fixture.case, store, fixture.registry(), hazard_log=fixture.hazard_log,
                               matrix=fixture.matrix, telemetry_diagnostics=diagnostics)
        print(f"{name:<18} verdict {report.verdict.value:<6} exit {VERDICT_EXIT[report.verdict]}  "
              f"directive {report.directive.value}")
    fixture = load_fixture("deviation_demo")
    store, diagnostics = fixture.telemetry()
    report = evaluate_case(fixture.case, store, fixture.registry(), hazard_log=fixture.hazard_log,
                           matrix=fixture.matrix, telemetry_diagnostics=diagnostics)
    print("\nfull report for deviation_demo:\n" + render_text(report))


if __name__ == "__main__":
    main()
