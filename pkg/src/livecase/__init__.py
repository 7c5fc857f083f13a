"""Live safety cases: GSN-style arguments bound to evidence, SPIs and fault trees."""

from livecase.argument import (
    ArgumentEdge,
    ArgumentElement,
    CaseInterface,
    EdgeKind,
    ElementKind,
    Finding,
    SafetyCase,
    Severity,
    Status,
    ValidationReport,
    compose,
    soundness_status,
    validate_wellformed,
)
from livecase.evidence import DynamicLink, EvidenceRegistry, Freshness, Sensitivity
from livecase.exceptions import (
    PlaceholderRateError,
    RejectedInput,
    ResolutionError,
    StatusTransitionError,
    UnitMismatchError,
)
from livecase.fault_tree import (
    BasicEvent,
    Gate,
    QuantitativeFaultTree,
    allocate_budget,
    minimal_cut_sets,
    refine_rates,
    top_probability,
)
from livecase.fixtures import load_fixture
from livecase.hazard_log import HazardLog, RiskMatrix, assess_risk, generate_tree_skeleton, trace_check
from livecase.impact import ChangeEvent, ChangeKind, ImpactReport, ImpactState, propagate, structure_lint
from livecase.report import CaseReport, CaseVerdict, evaluate_case
from livecase.scdl import parse, print_case
from livecase.spi import (
    SpiDefinition,
    SpiEvaluation,
    SpiStatus,
    TelemetryStore,
    deviation_test,
    detect_violations,
    evaluate,
    rate_upper_bound,
)
from livecase.template import instantiate_oascf_template

__version__ = "0.1.0"
