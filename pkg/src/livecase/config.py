"""Run configuration for the command-line tool, read from TOML.

Example ``livecase.toml`` (relative paths resolve against the file's folder)::

    case = "case.scdl"
    telemetry = ["telemetry.jsonl"]
    evidence_journal = "evidence.log"
    hazard_log = "hazards.scdl-log"
    risk_matrix = "risk_matrix.toml"
    confidence = 0.95
    format = "text"
    phases = ["deployment"]

    [lint]
    fan_in = 5
    artifact_fan_out = 5

    [remediation]
    lagging = "ground"
    leading = "restrict"
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from livecase.exceptions import RejectedInput
from livecase.spi import FleetDirective, Phase, RemediationPolicy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_VAR = "LIVECASE_CONFIG"
FORMATS = ("text", "structured")

_TOP_KEYS = {"case", "telemetry", "evidence_journal", "hazard_log", "risk_matrix",
             "confidence", "format", "phases", "lint", "remediation"}
_TABLE_KEYS = {"lint": {"fan_in", "artifact_fan_out"}, "remediation": {"lagging", "leading"}}


@dataclass(frozen=True)
class RunConfig:
    case_path: Path | None = None
    telemetry_paths: tuple[Path, ...] = ()
    evidence_journal_path: Path | None = None
    hazard_log_path: Path | None = None
    risk_matrix_path: Path | None = None
    confidence: float | None = None
    output_format: str = "text"
    phases: frozenset[Phase] | None = None
    fan_in: int = 5
    artifact_fan_out: int = 5
    policy: RemediationPolicy = field(default_factory=RemediationPolicy)

    def __post_init__(self) -> None:
        if self.output_format not in FORMATS:
            raise RejectedInput(f"format must be one of {', '.join(FORMATS)}")
        if self.confidence is not None and not 0 < self.confidence < 1:
            raise RejectedInput("confidence must lie in (0, 1)")
        if self.fan_in < 1 or self.artifact_fan_out < 1:
            raise RejectedInput("lint thresholds must be positive")

    def with_overrides(self, **changes: Any) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _check_keys(table: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise RejectedInput(f"{where}: unknown key(s) {', '.join(unknown)}")


def config_from_mapping(data: Mapping[str, Any], base: Path = Path(".")) -> RunConfig:
    _check_keys(data, _TOP_KEYS, "config")
    for table, allowed in _TABLE_KEYS.items():
        if table in data:
            if not isinstance(data[table], Mapping):
                raise RejectedInput(f"config: [{table}] must be a table")
            _check_keys(data[table], allowed, f"config [{table}]")

    def path(key: str) -> Path | None:
        value = data.get(key)
        if value is None:
            return None
        if not isinstance(value, str):
            raise RejectedInput(f"config: {key} must be a path string")
        return base / value

    telemetry = data.get("telemetry", [])
    if isinstance(telemetry, str):
        telemetry = [telemetry]
    if not all(isinstance(t, str) for t in telemetry):
        raise RejectedInput("config: telemetry must be a list of paths")
    lint = data.get("lint", {})
    remediation = data.get("remediation", {})
    try:
        phases = frozenset(Phase(p) for p in data["phases"]) if "phases" in data else None
        policy = RemediationPolicy(
            FleetDirective(remediation.get("lagging", FleetDirective.GROUND)),
            FleetDirective(remediation.get("leading", FleetDirective.RESTRICT)),
        )
    except ValueError as exc:
        raise RejectedInput(f"config: {exc}") from None
    confidence = data.get("confidence")
    return RunConfig(
        case_path=path("case"),
        telemetry_paths=tuple(base / t for t in telemetry),
        evidence_journal_path=path("evidence_journal"),
        hazard_log_path=path("hazard_log"),
        risk_matrix_path=path("risk_matrix"),
        confidence=float(confidence) if confidence is not None else None,
        output_format=data.get("format", "text"),
        phases=phases,
        fan_in=int(lint.get("fan_in", 5)),
        artifact_fan_out=int(lint.get("artifact_fan_out", 5)),
        policy=policy,
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise RejectedInput(f"{path}: not valid TOML ({exc})") from None
    return config_from_mapping(data, path.parent)


def find_config(explicit: str | None, environ: Mapping[str, str] = os.environ) -> RunConfig:
    """Load ``explicit`` if given, else the file named by ``LIVECASE_CONFIG``, else defaults."""
    chosen = explicit or environ.get(ENV_VAR)
    return load_config(chosen) if chosen else RunConfig()
