"""Feed telemetry into SPIs, read the confidence bounds and the fleet directive."""

from __future__ import annotations

from livecase import load_fixture
from livecase.spi import deviation_test, detect_violations, evaluate, rate_upper_bound


def main() -> None:
    print("zero events over 1000 h, 95% upper bound:", f"{rate_upper_bound(0, 1000.0, 0.95):.6g}", "per hour")

    for name in ("sotif_pedestrian", "deviation_demo"):
        fixture = load_fixture(name)
        store, diagnostics = fixture.telemetry()
        print(f"\n{name}: {len(store)} records, {len(diagnostics)} rejected")
        for d in diagnostics:
            print(f"   rejected line {d.line}: {d.message}")
        evaluations = {s.id: evaluate(s, store) for s in fixture.case.spis}
        for spi in fixture.case.spis:
            ev = evaluations[spi.id]
            print(f"  {spi.id:<16} {spi.timing.value:<8} k={ev.total_events:<3} T={ev.total_exposure:<8g} "
                  f"rate={ev.point_rate:.3g} upper={ev.upper_bound:.3g} threshold={spi.threshold:g} "
                  f"-> {ev.status.value}")
        directive = detect_violations(fixture.case, evaluations)
        print("  fleet directive:", directive.directive.value, "violated:", directive.violated or "none")

    result = deviation_test((4, 2000.0), (19, 2000.0))
    print(f"\nvalidation 4 events vs field 19 events over equal exposure: p={result.p_value:.3g}, "
          f"{result.verdict.value}")


if __name__ == "__main__":
    main()
