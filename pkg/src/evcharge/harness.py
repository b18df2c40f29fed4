"""Experiment orchestration: trial batches, congestion studies, parameter
sweeps, CSV emission, and the versioned trace-file format.

Ratios are "empirical profit ratios": exact offline optimum divided by the
policy's welfare.  Non-positive policy welfare yields an INF sentinel that is
excluded from means and counted separately.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .certify import certify, classify_trace
from .errors import InvalidConfigError, ParseError, TheoremPreconditionError
from .model import (
    Bounds,
    EVRequest,
    GeneratorConfig,
    Instance,
    StationConfig,
    TraceEvent,
    TrialOutcome,
    generate_synthetic,
    instance_from_dict,
    instance_to_dict,
    resample_values,
    tou_prices,
)
from .online import run_policy
from .oracle import default_epsilon, offline_opt
from .pricing import PricingParams, make_params

# per-trial seeds are derived by counter so parallel collection order can
# never change the results
_SEED_STRIDE = 1_000_003

ORACLE_EXACT = "exact"
ORACLE_SKIP = "skip"

TRIAL_CSV_HEADER = ("instance_id", "policy", "welfare", "oracle_welfare",
                    "ratio", "classification", "certified")
CDF_CSV_HEADER = ("level", "policy", "ratio")
SWEEP_CSV_HEADER = ("axis", "value", "policy", "mean_ratio", "n_trials", "n_inf")


@dataclass(frozen=True)
class TrialConfig:
    instance: Instance
    policies: Tuple[str, ...] = ("opa", "uboa", "pboa", "ommp")
    trials: int = 1
    oracle_mode: str = ORACLE_EXACT
    master_seed: int = 0
    epsilon: Optional[float] = None
    certify_opa: bool = False


@dataclass(frozen=True)
class SweepConfig:
    axis: str  # capacity | rho | delta | pmax
    grid: Tuple[float, ...]
    base: GeneratorConfig
    instance_seed: int = 0
    trials: int = 1
    policies: Tuple[str, ...] = ("opa", "uboa", "pboa", "ommp")
    master_seed: int = 0


@dataclass(frozen=True)
class TrialResult:
    instance_id: str
    policy: str
    welfare: float
    oracle_welfare: Optional[float]
    ratio: float  # math.inf sentinel when the policy earned nothing
    classification: str
    certified: str  # "true" / "false" / "" (not applicable)


def _trial_seed(master: int, counter: int) -> int:
    return master * _SEED_STRIDE + counter


def _ratio(oracle_w: Optional[float], policy_w: float) -> float:
    if oracle_w is None:
        return math.nan
    if policy_w <= 0:
        return 0.0 if oracle_w <= 0 else math.inf
    return oracle_w / policy_w


def run_trials(cfg: TrialConfig) -> List[TrialResult]:
    """Run every policy on ``trials`` fresh value redraws of the instance.

    Deterministic for a fixed master seed.  Per-trial failures are recorded
    as rows with NaN welfare instead of aborting the batch.
    """
    if cfg.trials < 1:
        raise InvalidConfigError("trials must be >= 1")
    if cfg.oracle_mode not in (ORACLE_EXACT, ORACLE_SKIP):
        raise InvalidConfigError(f"unknown oracle mode {cfg.oracle_mode!r}")
    results: List[TrialResult] = []
    params: Optional[PricingParams] = None
    if any(p in ("opa", "ommp") for p in cfg.policies):
        params = make_params(cfg.instance.bounds, cfg.instance.config)
    for i in range(cfg.trials):
        trial = resample_values(cfg.instance, _trial_seed(cfg.master_seed, i))
        instance_id = f"t{i:04d}"
        oracle_w: Optional[float] = None
        if cfg.oracle_mode == ORACLE_EXACT:
            eps = cfg.epsilon if cfg.epsilon else default_epsilon(trial)
            oracle_w, _, _ = offline_opt(trial, eps)
        for name in cfg.policies:
            want_trace = name == "opa" and cfg.certify_opa
            try:
                outcome = run_policy(name, trial, params,
                                     trace=name in ("opa", "ommp"))
            except Exception as exc:  # keep the batch alive, mark the row
                results.append(TrialResult(
                    instance_id, name, math.nan, oracle_w, math.nan,
                    f"ERROR:{type(exc).__name__}", ""))
                continue
            classification = (classify_trace(outcome.trace)
                              if outcome.trace is not None else "")
            certified = ""
            if want_trace and params is not None:
                report = certify(outcome.trace, params, trial)
                certified = "true" if report.ok else "false"
            results.append(TrialResult(
                instance_id, name, outcome.welfare, oracle_w,
                _ratio(oracle_w, outcome.welfare), classification, certified))
    results.sort(key=lambda r: (r.instance_id, r.policy))
    return results


def busy_slots(instance: Instance) -> int:
    """Number of slots covered by at least one availability window."""
    covered = set()
    for r in instance.requests:
        covered.update(r.window)
    return len(covered)


def congestion_capacity(instance: Instance, level: float,
                        quantum: float = 0.0) -> float:
    """C = level * (total demand) / (busy slots), snapped up to the lattice."""
    if not (0 < level <= 1):
        raise InvalidConfigError(f"congestion level {level} outside (0, 1]")
    total = sum(r.energy for r in instance.requests)
    c = level * total / max(busy_slots(instance), 1)
    if quantum > 0:
        c = max(1, math.ceil(c / quantum - 1e-9)) * quantum
    return c


def with_capacity(instance: Instance, capacity: float) -> Instance:
    cfg = instance.config
    return Instance(
        config=StationConfig(cfg.horizon, capacity, cfg.prices),
        bounds=instance.bounds,
        requests=instance.requests,
    )


def congestion_study(instance: Instance, levels: Sequence[float],
                     cfg: TrialConfig,
                     quantum: float = 0.0) -> List[Tuple[float, str, float]]:
    """CDF rows (level, policy, ratio), one per trial per policy, with the
    station capacity rescaled to each congestion level."""
    rows: List[Tuple[float, str, float]] = []
    for level in levels:
        scaled = with_capacity(instance, congestion_capacity(instance, level, quantum))
        sub = replace(cfg, instance=scaled)
        for r in run_trials(sub):
            rows.append((level, r.policy, r.ratio))
    return rows


def _apply_axis(base: GeneratorConfig, axis: str, value: float) -> GeneratorConfig:
    b = base.bounds
    if axis == "capacity":
        return replace(base, capacity=value)
    if axis == "rho":
        return replace(base, bounds=replace(b, U=b.L * value))
    if axis == "delta":
        dmax = int(round(b.Dmin * value))
        if abs(b.Dmin * value - dmax) > 1e-9 or dmax < b.Dmin:
            raise InvalidConfigError(f"delta {value} gives non-integer Dmax")
        return replace(base, bounds=replace(b, Dmax=dmax))
    if axis == "pmax":
        if value > 0.95 * b.L:
            raise InvalidConfigError(
                f"pmax {value} exceeds the 0.95*L singularity guard")
        return replace(base, bounds=replace(b, pmax=value))
    raise InvalidConfigError(f"unknown sweep axis {axis!r}")


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    policy: str
    mean_ratio: float  # NaN when skipped or no finite ratios
    n_trials: int
    n_inf: int
    skipped: bool = False


def parameter_sweep(cfg: SweepConfig) -> List[SweepRow]:
    """One row per (grid point, policy): mean finite ratio over the trials.

    Grid points that violate the pricing precondition are emitted as skipped
    rows rather than aborting the sweep.
    """
    if cfg.axis not in ("capacity", "rho", "delta", "pmax"):
        raise InvalidConfigError(f"unknown sweep axis {cfg.axis!r}")
    rows: List[SweepRow] = []
    for value in cfg.grid:
        try:
            gen = _apply_axis(cfg.base, cfg.axis, value)
            instance = generate_synthetic(gen, cfg.instance_seed)
            make_params(instance.bounds, instance.config)  # precondition probe
        except (TheoremPreconditionError, InvalidConfigError):
            for name in cfg.policies:
                rows.append(SweepRow(cfg.axis, value, name, math.nan, 0, 0,
                                     skipped=True))
            continue
        trial_cfg = TrialConfig(
            instance=instance,
            policies=cfg.policies,
            trials=cfg.trials,
            oracle_mode=ORACLE_EXACT,
            master_seed=cfg.master_seed,
            epsilon=gen.quantum if gen.quantum > 0 else None,
        )
        results = run_trials(trial_cfg)
        for name in cfg.policies:
            ratios = [r.ratio for r in results if r.policy == name]
            finite = [x for x in ratios if math.isfinite(x)]
            n_inf = sum(1 for x in ratios if math.isinf(x))
            mean = sum(finite) / len(finite) if finite else math.nan
            rows.append(SweepRow(cfg.axis, value, name, mean,
                                 len(finite), n_inf))
    return rows


# ---------------------------------------------------------------------------
# CSV emission (schemas consumed by the plotting component)
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def write_trial_csv(path: str, results: Sequence[TrialResult]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(TRIAL_CSV_HEADER)
        for r in results:
            out.writerow([r.instance_id, r.policy, _fmt(r.welfare),
                          _fmt(r.oracle_welfare), _fmt(r.ratio),
                          r.classification, r.certified])


def write_cdf_csv(path: str, rows: Sequence[Tuple[float, str, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(CDF_CSV_HEADER)
        for level, policy, ratio in rows:
            out.writerow([_fmt(level), policy, _fmt(ratio)])


def write_sweep_csv(path: str, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(SWEEP_CSV_HEADER)
        for r in rows:
            out.writerow([r.axis, _fmt(r.value), r.policy, _fmt(r.mean_ratio),
                          r.n_trials, r.n_inf])


# ---------------------------------------------------------------------------
# Trace file (versioned JSON; self-contained for later certification)
# ---------------------------------------------------------------------------

_TRACE_FORMAT = "evcharge-trace"
_TRACE_VERSION = 1


def save_trace(path: str, instance: Instance, outcome: TrialOutcome) -> None:
    if outcome.trace is None:
        raise InvalidConfigError("outcome carries no trace to save")
    doc = {
        "format": _TRACE_FORMAT,
        "version": _TRACE_VERSION,
        "policy": outcome.policy,
        "instance": instance_to_dict(instance),
        "events": [
            {
                "ev_id": e.ev_id,
                "feasible": e.feasible,
                "capacity_pressed": e.capacity_pressed,
                "allocation": [list(a) for a in e.allocation],
                "water_level": None if math.isnan(e.water_level) else e.water_level,
                "sigma": [list(s) for s in e.sigma],
                "posted_price": ("inf" if math.isinf(e.posted_price)
                                 else e.posted_price),
                "admitted": e.admitted,
                "pre_utilization": [list(u) for u in e.pre_utilization],
                "post_utilization": [list(u) for u in e.post_utilization],
            }
            for e in outcome.trace
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def load_trace(path: str) -> Tuple[Instance, str, Tuple[TraceEvent, ...]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != _TRACE_FORMAT or doc.get("version") != _TRACE_VERSION:
        raise ParseError(f"{path}: not a version-{_TRACE_VERSION} trace file")
    instance = instance_from_dict(doc["instance"])
    events = tuple(
        TraceEvent(
            ev_id=e["ev_id"],
            feasible=e["feasible"],
            capacity_pressed=e["capacity_pressed"],
            allocation=tuple((int(t), float(y)) for t, y in e["allocation"]),
            water_level=(math.nan if e["water_level"] is None
                         else float(e["water_level"])),
            sigma=tuple((int(t), float(s)) for t, s in e["sigma"]),
            posted_price=(math.inf if e["posted_price"] == "inf"
                          else float(e["posted_price"])),
            admitted=e["admitted"],
            pre_utilization=tuple((int(t), float(w))
                                  for t, w in e["pre_utilization"]),
            post_utilization=tuple((int(t), float(w))
                                   for t, w in e["post_utilization"]),
        )
        for e in doc["events"]
    )
    return instance, doc["policy"], events
