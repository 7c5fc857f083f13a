"""Safety Performance Indicators: telemetry ingestion, evaluation, remediation.

Event counts are modelled as a Poisson process over exposure. The upper bound
on the event rate at confidence ``c`` is the ``c`` quantile of the
Gamma(k + 1, T) posterior obtained from a flat prior, which for ``k = 0``
reduces to ``-ln(1 - c) / T``.
"""

from __future__ import annotations

import enum
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import TYPE_CHECKING, Any, Iterable, Mapping

from scipy.special import gammaincinv

from livecase.exceptions import RejectedInput, UnitMismatchError

if TYPE_CHECKING:
    from livecase.argument import SafetyCase, Status


class Direction(str, enum.Enum):
    AT_MOST = "at_most"
    AT_LEAST = "at_least"


class Timing(str, enum.Enum):
    LEADING = "leading"
    LAGGING = "lagging"


class Trace(str, enum.Enum):
    BEHAVIORAL = "behavioral"
    OPERATIONAL = "operational"


class Unit(str, enum.Enum):
    HOUR = "hour"
    KM = "km"
    MISSION = "mission"


class Phase(str, enum.Enum):
    SIMULATION = "simulation"
    ROAD_TEST = "road_test"
    DEPLOYMENT = "deployment"


class SpiStatus(str, enum.Enum):
    PASS = "pass"
    PASS_LOW_CONFIDENCE = "pass_low_confidence"
    VIOLATED = "violated"
    NO_DATA = "no_data"


class FleetDirective(str, enum.Enum):
    CONTINUE = "continue"
    RESTRICT = "restrict"
    GROUND = "ground"


_DIRECTIVE_RANK = {FleetDirective.CONTINUE: 0, FleetDirective.RESTRICT: 1, FleetDirective.GROUND: 2}


@dataclass(frozen=True)
class SpiDefinition:
    id: str
    claim_id: str
    metric: str
    threshold: float
    unit: Unit
    direction: Direction = Direction.AT_MOST
    timing: Timing = Timing.LEADING
    trace: Trace = Trace.BEHAVIORAL
    confidence_target: float = 0.95

    def __post_init__(self) -> None:
        for name, enum_type in (("unit", Unit), ("direction", Direction),
                                ("timing", Timing), ("trace", Trace)):
            object.__setattr__(self, name, enum_type(getattr(self, name)))
        object.__setattr__(self, "threshold", float(self.threshold))
        if not (self.threshold >= 0 and math.isfinite(self.threshold)):
            raise RejectedInput(f"SPI {self.id}: threshold must be a finite non-negative rate")
        if not 0 < self.confidence_target < 1:
            raise RejectedInput(f"SPI {self.id}: confidence_target must lie in (0, 1)")


@dataclass(frozen=True)
class TelemetryRecord:
    timestamp: datetime
    metric: str
    count: int
    exposure: float
    unit: Unit
    phase: Phase

    def __post_init__(self) -> None:
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(self, "phase", Phase(self.phase))
        if isinstance(self.count, bool) or not isinstance(self.count, int) or self.count < 0:
            raise RejectedInput("count must be a non-negative integer")
        if not (self.exposure > 0 and math.isfinite(self.exposure)):
            raise RejectedInput("exposure must be a positive finite number")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))


@dataclass(frozen=True)
class Window:
    """Phase filter plus a half-open ``[start, end)`` time range; ``None`` means unbounded."""

    phases: frozenset[Phase] | None = None
    start: datetime | None = None
    end: datetime | None = None

    def __post_init__(self) -> None:
        if self.phases is not None:
            object.__setattr__(self, "phases", frozenset(Phase(p) for p in self.phases))

    def admits(self, record: TelemetryRecord) -> bool:
        if self.phases is not None and record.phase not in self.phases:
            return False
        if self.start is not None and record.timestamp < self.start:
            return False
        if self.end is not None and record.timestamp >= self.end:
            return False
        return True

    def describe(self) -> dict[str, Any]:
        return {
            "phases": sorted(p.value for p in self.phases) if self.phases is not None else None,
            "start": self.start.isoformat() if self.start else None,
            "end": self.end.isoformat() if self.end else None,
        }


ALL_DATA = Window()


@dataclass(frozen=True)
class SpiEvaluation:
    spi_id: str
    window: Window
    total_events: int
    total_exposure: float
    point_rate: float
    lower_bound: float
    upper_bound: float
    status: SpiStatus
    confidence_met: bool
    unit: Unit | None = None

    def as_dict(self) -> dict[str, Any]:
        return {
            "spi": self.spi_id,
            "window": self.window.describe(),
            "events": self.total_events,
            "exposure": self.total_exposure,
            "point_rate": self.point_rate,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "status": self.status.value,
            "confidence_met": self.confidence_met,
            "unit": self.unit.value if self.unit else None,
        }


@dataclass(frozen=True)
class TelemetryDiagnostic:
    line: int
    message: str


@dataclass
class IngestReport:
    accepted: int = 0
    diagnostics: list[TelemetryDiagnostic] = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return len(self.diagnostics)


TELEMETRY_FIELDS = ("ts", "metric", "count", "exposure", "unit", "phase")


def parse_telemetry_line(line: str) -> TelemetryRecord:
    """Decode one JSON telemetry line; raises :class:`RejectedInput` on any defect."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RejectedInput(f"not valid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise RejectedInput("record must be a JSON object")
    missing = [k for k in TELEMETRY_FIELDS if k not in obj]
    if missing:
        raise RejectedInput("missing field(s): " + ", ".join(missing))
    extra = sorted(set(obj) - set(TELEMETRY_FIELDS))
    if extra:
        raise RejectedInput("unknown field(s): " + ", ".join(extra))
    try:
        ts = datetime.fromisoformat(str(obj["ts"]).replace("Z", "+00:00"))
    except ValueError:
        raise RejectedInput(f"bad timestamp {obj['ts']!r}") from None
    if not isinstance(obj["metric"], str) or not obj["metric"]:
        raise RejectedInput("metric must be a non-empty string")
    exposure = obj["exposure"]
    if isinstance(exposure, bool) or not isinstance(exposure, (int, float)):
        raise RejectedInput("exposure must be a number")
    try:
        return TelemetryRecord(ts, obj["metric"], obj["count"], float(exposure),
                               Unit(obj["unit"]), Phase(obj["phase"]))
    except ValueError as exc:
        raise RejectedInput(str(exc)) from None


def format_telemetry_record(record: TelemetryRecord) -> str:
    return json.dumps({
        "ts": record.timestamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "metric": record.metric,
        "count": record.count,
        "exposure": record.exposure,
        "unit": record.unit.value,
        "phase": record.phase.value,
    })


class TelemetryStore:
    """Append-only telemetry accumulator.

    Totals are sums over the admitted records; exposure is summed with
    ``math.fsum`` so the result does not depend on ingestion order.
    """

    def __init__(self) -> None:
        self._records: list[TelemetryRecord] = []
        self._units: dict[str, Unit] = {}

    def __len__(self) -> int:
        return len(self._records)

    def add(self, record: TelemetryRecord) -> None:
        unit = self._units.setdefault(record.metric, record.unit)
        if unit is not record.unit:
            raise UnitMismatchError(
                f"metric {record.metric!r} already recorded in {unit.value}, got {record.unit.value}"
            )
        self._records.append(record)

    def ingest(self, records: Iterable[TelemetryRecord | str], *, first_line: int = 1) -> IngestReport:
        """Accumulate records; strings are parsed as JSON lines.

        Invalid entries are reported with their 1-based line number and
        skipped; valid ones are kept.
        """
        report = IngestReport()
        for lineno, item in enumerate(records, start=first_line):
            if isinstance(item, str):
                if not item.strip():
                    continue
                try:
                    item = parse_telemetry_line(item)
                except RejectedInput as exc:
                    report.diagnostics.append(TelemetryDiagnostic(lineno, str(exc)))
                    continue
            try:
                self.add(item)
            except RejectedInput as exc:
                report.diagnostics.append(TelemetryDiagnostic(lineno, str(exc)))
                continue
            report.accepted += 1
        return report

    def unit_of(self, metric: str) -> Unit | None:
        return self._units.get(metric)

    def totals(self, metric: str, window: Window = ALL_DATA) -> tuple[int, float]:
        selected = [r for r in self._records if r.metric == metric and window.admits(r)]
        return sum(r.count for r in selected), math.fsum(r.exposure for r in selected)

    def phase_totals(self) -> dict[tuple[str, Phase], tuple[int, float]]:
        grouped: dict[tuple[str, Phase], list[TelemetryRecord]] = defaultdict(list)
        for record in self._records:
            grouped[record.metric, record.phase].append(record)
        return {
            key: (sum(r.count for r in rs), math.fsum(r.exposure for r in rs))
            for key, rs in sorted(grouped.items(), key=lambda kv: (kv[0][0], kv[0][1].value))
        }


def rate_upper_bound(events: int, exposure: float, confidence: float) -> float:
    """One-sided upper bound on a Poisson rate from ``events`` over ``exposure``."""
    if exposure <= 0:
        raise RejectedInput("exposure must be positive")
    return float(gammaincinv(events + 1, confidence)) / exposure


def rate_lower_bound(events: int, exposure: float, confidence: float) -> float:
    """One-sided lower bound; the companion of :func:`rate_upper_bound`."""
    if exposure <= 0:
        raise RejectedInput("exposure must be positive")
    if events == 0:
        return 0.0
    return float(gammaincinv(events, 1.0 - confidence)) / exposure


def evaluate_totals(spi: SpiDefinition, events: int, exposure: float,
                    window: Window = ALL_DATA, unit: Unit | None = None) -> SpiEvaluation:
    if exposure == 0:
        return SpiEvaluation(spi.id, window, events, 0.0, 0.0, 0.0, math.inf,
                             SpiStatus.NO_DATA, False, unit or spi.unit)
    point = events / exposure
    lower = rate_lower_bound(events, exposure, spi.confidence_target)
    upper = max(rate_upper_bound(events, exposure, spi.confidence_target), point)
    if spi.direction is Direction.AT_MOST:
        if point > spi.threshold:
            status = SpiStatus.VIOLATED
        elif upper <= spi.threshold:
            status = SpiStatus.PASS
        else:
            status = SpiStatus.PASS_LOW_CONFIDENCE
    else:
        if point < spi.threshold:
            status = SpiStatus.VIOLATED
        elif lower >= spi.threshold:
            status = SpiStatus.PASS
        else:
            status = SpiStatus.PASS_LOW_CONFIDENCE
    return SpiEvaluation(spi.id, window, events, exposure, point, lower, upper,
                         status, status is SpiStatus.PASS, unit or spi.unit)


def evaluate(spi: SpiDefinition, store: TelemetryStore, window: Window = ALL_DATA) -> SpiEvaluation:
    unit = store.unit_of(spi.metric)
    if unit is not None and unit is not spi.unit:
        raise UnitMismatchError(
            f"SPI {spi.id} is per {spi.unit.value} but {spi.metric!r} telemetry is per {unit.value}"
        )
    events, exposure = store.totals(spi.metric, window)
    return evaluate_totals(spi, events, exposure, window, spi.unit)


@dataclass(frozen=True)
class RemediationPolicy:
    """Directive issued when a lagging or leading SPI is violated."""

    lagging: FleetDirective = FleetDirective.GROUND
    leading: FleetDirective = FleetDirective.RESTRICT

    def __post_init__(self) -> None:
        object.__setattr__(self, "lagging", FleetDirective(self.lagging))
        object.__setattr__(self, "leading", FleetDirective(self.leading))


@dataclass(frozen=True)
class RemediationDirective:
    violated: tuple[str, ...]
    statuses: Mapping[str, "Status"]
    directive: FleetDirective

    @property
    def affected_claims(self) -> dict[str, "Status"]:
        return {k: v for k, v in self.statuses.items() if v.value != "supported"}


def _status_of(value: Any) -> str:
    value = getattr(value, "status", value)
    return getattr(value, "value", value)


def detect_violations(
    case: "SafetyCase",
    evaluations: Mapping[str, Any] | Iterable[SpiEvaluation],
    evidence_state: Mapping[str, Any] | None = None,
    policy: RemediationPolicy = RemediationPolicy(),
) -> RemediationDirective:
    from livecase.argument import soundness_status

    if not isinstance(evaluations, Mapping):
        evaluations = {ev.spi_id: ev for ev in evaluations}
    missing = [s.id for s in case.spis if s.id not in evaluations]
    if missing:
        raise RejectedInput("no evaluation for SPI(s): " + ", ".join(missing))
    violated = tuple(sorted(s.id for s in case.spis if _status_of(evaluations[s.id]) == "violated"))
    directive = FleetDirective.CONTINUE
    for spi_id in violated:
        timing = case.spi(spi_id).timing
        candidate = policy.lagging if timing is Timing.LAGGING else policy.leading
        if _DIRECTIVE_RANK[candidate] > _DIRECTIVE_RANK[directive]:
            directive = candidate
    statuses = soundness_status(case, evaluations, evidence_state)
    return RemediationDirective(violated, statuses, directive)


class Verdict(str, enum.Enum):
    CONSISTENT = "consistent"
    DEVIATING = "deviating"


@dataclass(frozen=True)
class DeviationResult:
    verdict: Verdict
    p_value: float

    @property
    def deviating(self) -> bool:
        return self.verdict is Verdict.DEVIATING


# Relative slack when deciding whether a term is "as extreme" as the observed one.
_TIE_TOLERANCE = 1e-7


def deviation_test(
    validation: tuple[int, float],
    field: tuple[int, float],
    alpha: float = 0.05,
) -> DeviationResult:
    """Exact conditional test that two Poisson samples share one rate.

    Given ``n = k1 + k2`` events, the field count is Binomial(n, T2/(T1+T2))
    under the null; the two-sided p-value sums every outcome no more likely
    than the observed one.
    """
    (k1, t1), (k2, t2) = validation, field
    if not (t1 > 0 and t2 > 0):
        raise RejectedInput("both exposures must be positive")
    if k1 < 0 or k2 < 0:
        raise RejectedInput("event counts must be non-negative")
    n = k1 + k2
    if n == 0:
        return DeviationResult(Verdict.CONSISTENT, 1.0)
    total = t1 + t2
    log_p2 = math.log(t2) - math.log(total)
    log_p1 = math.log(t1) - math.log(total)

    def log_pmf(i: int) -> float:
        # Two-operand sums only, so swapping the samples mirrors bit-exactly.
        return math.log(math.comb(n, i)) + (i * log_p2 + (n - i) * log_p1)

    logs = [log_pmf(i) for i in range(n + 1)]
    cutoff = logs[k2] + math.log1p(_TIE_TOLERANCE)
    p_value = min(1.0, math.fsum(math.exp(v) for v in logs if v <= cutoff))
    verdict = Verdict.DEVIATING if p_value <= alpha else Verdict.CONSISTENT
    return DeviationResult(verdict, p_value)
