"""Parse SCDL text with errors, read the diagnostics, and print the canonical form."""

from __future__ import annotations

from livecase.scdl import parse, print_case

BROKEN = """case "demo" {
  goal G1 "Vehicle stops for obstacles" { supported_by: Sn1 }
  solution Sn1 "Braking test report" { evidence: E1 }
  goal G2 ;
  evidence E1 uri "file://tests/braking.pdf" version latest;
  spi SPI1 on G1 { metric "hard_brakes"; threshold <= 0.5 per furlong; kind leading behavioral; }
}
"""


def main() -> None:
    case, diagnostics = parse(BROKEN)
    print(f"{len(diagnostics)} diagnostics; recovery keeps going after each one:")
    for d in diagnostics:
        print("  ", d)

    fixed = BROKEN.replace("  goal G2 ;\n", "").replace("furlong", "km")
    case, diagnostics = parse(fixed)
    assert case is not None and not diagnostics
    canonical = print_case(case)
    print("canonical form:\n" + canonical)
    again, _ = parse(canonical)
    print("parse(print(case)) == case:", again == case)


if __name__ == "__main__":
    main()
