"""Shipped example bundles used by tests, demos and documentation.

Each bundle lives in ``livecase/data/fixtures/<name>/`` and holds
``case.scdl``, ``telemetry.jsonl``, ``evidence.log``, ``hazards.scdl-log``,
``risk_matrix.toml`` and a ``livecase.toml`` run configuration. Every numeric
rate and threshold in them is illustrative.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from livecase.argument import SafetyCase, ValidationReport
from livecase.evidence import EvidenceRegistry
from livecase.exceptions import RejectedInput
from livecase.hazard_log import HazardLog, RiskMatrix, load_log
from livecase.report import lint_case
from livecase.scdl import parse_file
from livecase.spi import TelemetryDiagnostic, TelemetryStore

FIXTURE_NAMES = ("minimal", "oascf_template", "sotif_pedestrian", "deviation_demo")


def fixtures_root() -> Path:
    return Path(str(resources.files("livecase").joinpath("data/fixtures")))


@dataclass
class FixtureSet:
    name: str
    path: Path
    case: SafetyCase
    hazard_log: HazardLog
    matrix: RiskMatrix
    report: ValidationReport

    @property
    def case_path(self) -> Path:
        return self.path / "case.scdl"

    @property
    def config_path(self) -> Path:
        return self.path / "livecase.toml"

    @property
    def telemetry_path(self) -> Path:
        return self.path / "telemetry.jsonl"

    @property
    def journal_path(self) -> Path:
        return self.path / "evidence.log"

    def telemetry(self) -> tuple[TelemetryStore, list[TelemetryDiagnostic]]:
        store = TelemetryStore()
        report = store.ingest(self.telemetry_path.read_text(encoding="utf-8").splitlines())
        return store, report.diagnostics

    def registry(self) -> EvidenceRegistry:
        """In-memory copy of the evidence journal (the shipped file is never written)."""
        return EvidenceRegistry.read_only_copy(self.journal_path)


def load_fixture(name: str) -> FixtureSet:
    if name not in FIXTURE_NAMES:
        raise RejectedInput(f"unknown fixture {name!r}; choose one of {', '.join(FIXTURE_NAMES)}")
    path = fixtures_root() / name
    case, diagnostics = parse_file(path / "case.scdl")
    if case is None:
        raise RejectedInput(f"fixture {name} does not parse: {diagnostics}")
    log = load_log(path / "hazards.scdl-log")
    matrix = RiskMatrix.load(path / "risk_matrix.toml")
    report = lint_case(case, log, matrix)
    if not report.ok:
        raise RejectedInput(f"fixture {name} fails validation: {report.errors}")
    return FixtureSet(name, path, case, log, matrix, report)
