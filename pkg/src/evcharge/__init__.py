"""Online posted-pricing engine for EV-charging stations.

Public surface: domain model and generators, the utilization-based pricing
function, the water-filling scheduler, online policies, an exact offline
oracle, runtime certification, and the experiment harness with its CLI.
"""

from .certify import (
    CAPACITY_FREE,
    CAPACITY_LIMITED,
    CertReport,
    DualCertificate,
    build_certificate,
    certify,
    check_dual_feasibility,
    check_kkt,
    check_pd_inequalities,
    classify_trace,
    cr_bound,
)
from .cli import cli
from .harness import (
    SweepConfig,
    TrialConfig,
    TrialResult,
    congestion_study,
    parameter_sweep,
    run_trials,
)
from .model import (
    Bounds,
    ChargingSchedule,
    EVRequest,
    GeneratorConfig,
    Instance,
    StationConfig,
    TraceEvent,
    TrialOutcome,
    derive_bounds,
    generate_synthetic,
    generate_worst_case,
    ingest_sessions,
    load_instance,
    save_instance,
    validate_instance,
)
from .online import run_ommp, run_opa, run_pboa, run_policy, run_uboa, welfare
from .oracle import default_epsilon, enumerate_opt, min_cost_schedule_flow, offline_opt
from .pricing import (
    PricingParams,
    check_sufficient_condition,
    make_params,
    phi,
    phi_inverse,
    pseudo_cost,
)
from .scheduler import (
    CandidateSchedule,
    brute_force_min_cost,
    posted_price,
    residual_feasible,
    schedule_candidate,
)

__version__ = "0.1.0"
