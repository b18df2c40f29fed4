"""Runtime certification of posted-pricing traces.

Mechanizes the proof artifacts as checks over a recorded trace: the dual
construction, dual feasibility, the per-EV KKT system of the scheduling
subproblem, and the primal-dual initial/incremental inequalities, plus the
closed-form competitive-ratio bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import NoTraceError, WrongClassificationError
from .model import Instance, TraceEvent
from .pricing import PricingParams, phi_value

CAPACITY_FREE = "CAPACITY_FREE"
CAPACITY_LIMITED = "CAPACITY_LIMITED"

_CONSTRAINT_TOL = 1e-7


def classify_trace(trace: Optional[Sequence[TraceEvent]]) -> str:
    """Capacity-limited iff some candidate (even for a rejected EV) wanted
    more energy than the residual capacity left in one of its slots."""
    if trace is None:
        raise NoTraceError("policy was run without trace recording")
    if any(not e.feasible or e.capacity_pressed for e in trace):
        return CAPACITY_LIMITED
    return CAPACITY_FREE


@dataclass(frozen=True)
class DualCertificate:
    """Constructed multipliers: capacity (lambda), demand (mu), rate (sigma),
    admission (eta), and the index of the first EV after which some slot's
    utilization reaches the threshold beta."""

    lambda_bar: Tuple[float, ...]
    mu_bar: Tuple[float, ...]
    sigma_bar: Dict[Tuple[int, int], float]
    eta_bar: Tuple[float, ...]
    k_index: Optional[int]


@dataclass(frozen=True)
class CheckFragment:
    ok: bool
    worst_margin: float
    detail: str = ""


@dataclass(frozen=True)
class CertReport:
    classification: str
    dual_feasible: bool
    kkt_ok: bool
    initial_ok: bool
    incremental_ok: bool
    degenerate_k: bool
    worst_margins: Dict[str, float]

    @property
    def ok(self) -> bool:
        return (self.dual_feasible and self.kkt_ok and self.initial_ok
                and self.incremental_ok)


def _replay(trace: Sequence[TraceEvent], horizon: int) -> List[List[float]]:
    """Utilization snapshot after each EV (index 0 = before any EV)."""
    w = [0.0] * horizon
    snaps = [list(w)]
    for e in trace:
        if e.admitted:
            for t, y in e.allocation:
                w[t] += y
        snaps.append(list(w))
    return snaps


def _post_candidate(event: TraceEvent) -> Dict[int, float]:
    """Window utilization right after applying the candidate allocation."""
    w = dict(event.pre_utilization)
    for t, y in event.allocation:
        w[t] += y
    return w


def build_certificate(trace: Optional[Sequence[TraceEvent]],
                      params: PricingParams,
                      requests) -> DualCertificate:
    """Construct the dual variables from the final and running utilizations.

    For an EV without a feasible candidate all of its multipliers are zero;
    such EVs only occur on capacity-limited traces, outside the scope of the
    feasibility guarantees.
    """
    if trace is None:
        raise NoTraceError("policy was run without trace recording")
    horizon = len(params.prices)
    final = _replay(trace, horizon)[-1]
    lam = tuple(
        (phi_value(params, t, final[t]) - params.prices[t])
        if final[t] >= params.beta else 0.0
        for t in range(horizon)
    )
    mu, eta = [], []
    sigma: Dict[Tuple[int, int], float] = {}
    req_by_id = {r.id: r for r in requests}
    for e in trace:
        if not e.feasible or not e.allocation:
            mu.append(0.0)
            eta.append(0.0)
            continue
        if not e.admitted:
            # the committed allocation is zero, so the demand and rate
            # multipliers carry no support; the water level is kept for
            # reference only
            mu.append(e.water_level)
            eta.append(0.0)
            continue
        post = _post_candidate(e)
        mu_n = max(phi_value(params, t, post[t]) for t, _ in e.allocation)
        mu.append(mu_n)
        s_sum = 0.0
        req = req_by_id[e.ev_id]
        for t, y in e.allocation:
            s = max(mu_n - phi_value(params, t, post[t]), 0.0)
            sigma[(e.ev_id, t)] = s
            s_sum += s * req.rate
        eta.append(req.value - mu_n * req.energy + s_sum)

    k_index: Optional[int] = None
    w = [0.0] * horizon
    for i, e in enumerate(trace):
        if e.admitted:
            for t, y in e.allocation:
                w[t] += y
            if k_index is None and any(w[t] >= params.beta for t, _ in e.allocation):
                k_index = i
    return DualCertificate(
        lambda_bar=lam,
        mu_bar=tuple(mu),
        sigma_bar=sigma,
        eta_bar=tuple(eta),
        k_index=k_index,
    )


def _completion_price(req, final: Sequence[float], params: PricingParams) -> float:
    """Largest mu*E - sum(sigma*R) any feasible completion can reach for an
    EV with no committed allocation: the rate-capped cost of buying E units
    at the final per-slot prices (cheapest slots first)."""
    prices = sorted(phi_value(params, t, final[t]) for t in req.window)
    remaining = req.energy
    total = 0.0
    for price in prices:
        take = min(req.rate, remaining)
        total += price * take
        remaining -= take
        if remaining <= 0:
            break
    return total


def check_dual_feasibility(cert: DualCertificate, instance: Instance,
                           trace: Sequence[TraceEvent],
                           params: PricingParams) -> CheckFragment:
    """Verify nonnegativity and both dual constraints at tolerance 1e-7.

    The capacity multiplier entering the per-slot constraint is evaluated at
    the final utilization without the threshold indicator (its value is
    identical on slots at or above beta and dominates below, which is the
    feasibility-preserving direction).  Rejected EVs commit nothing, so their
    demand and rate multipliers are free; for them the check is whether any
    nonnegative completion satisfies both constraints, which holds exactly
    when the value does not exceed the rate-capped cost of the demand at
    final prices.
    """
    horizon = instance.config.horizon
    final = _replay(trace, horizon)[-1]
    p = instance.config.prices
    worst = math.inf
    detail = ""
    multipliers = (
        list(cert.lambda_bar) + list(cert.eta_bar)
        + list(cert.sigma_bar.values())
    )
    for v in multipliers:
        worst = min(worst, v + _CONSTRAINT_TOL)
        if v < -1e-12:
            detail = detail or "negative multiplier"
    req_by_id = {r.id: r for r in instance.requests}
    for i, e in enumerate(trace):
        req = req_by_id[e.ev_id]
        if not e.feasible:
            continue
        if not e.admitted:
            slack = _completion_price(req, final, params) - req.value
            worst = min(worst, slack + _CONSTRAINT_TOL)
            if slack < -_CONSTRAINT_TOL:
                detail = detail or (
                    f"no feasible completion for rejected EV {e.ev_id}"
                )
            continue
        mu_n = cert.mu_bar[i]
        worst = min(worst, mu_n + _CONSTRAINT_TOL)
        s_sum = sum(cert.sigma_bar.get((e.ev_id, t), 0.0) * req.rate
                    for t in req.window)
        # admission constraint: v - mu*E + sum(sigma*R) - eta <= 0
        slack = -(req.value - mu_n * req.energy + s_sum - cert.eta_bar[i])
        worst = min(worst, slack + _CONSTRAINT_TOL)
        if slack < -_CONSTRAINT_TOL:
            detail = detail or f"admission constraint violated for EV {e.ev_id}"
        for t in req.window:
            lam_t = phi_value(params, t, final[t]) - p[t]
            s_nt = cert.sigma_bar.get((e.ev_id, t), 0.0)
            slack = -(mu_n - lam_t - p[t] - s_nt)
            worst = min(worst, slack + _CONSTRAINT_TOL)
            if slack < -_CONSTRAINT_TOL:
                detail = detail or (
                    f"per-slot constraint violated for EV {e.ev_id}, slot {t}"
                )
    return CheckFragment(ok=not detail, worst_margin=worst, detail=detail)


def check_kkt(event: TraceEvent, params: PricingParams,
              request) -> CheckFragment:
    """Verify the scheduling subproblem's KKT system on one trace event:
    stationarity (with the zero-allocation multiplier reconstructed as
    max(price - water level, 0)), complementary slackness, and the identity
    sum(y * price) = mu * E - sum(sigma * R)."""
    if not event.feasible:
        return CheckFragment(ok=True, worst_margin=math.inf, detail="infeasible")
    post = _post_candidate(event)
    mu = event.water_level
    sigma = dict(event.sigma)
    alloc = dict(event.allocation)
    worst = math.inf
    detail = ""
    for t in request.window:
        price = phi_value(params, t, post.get(t, 0.0))
        y = alloc.get(t, 0.0)
        if y > 0:
            resid = abs(price - mu + sigma.get(t, 0.0))
            worst = min(worst, _CONSTRAINT_TOL - resid)
            if resid > _CONSTRAINT_TOL:
                detail = detail or f"stationarity fails at slot {t}"
            # slackness: positive sigma requires a binding rate (or, on
            # capacity-limited traces, a slot filled to capacity)
            if sigma.get(t, 0.0) > _CONSTRAINT_TOL:
                gap = min(abs(y - request.rate),
                          abs(post.get(t, 0.0) - params.capacity))
                worst = min(worst, _CONSTRAINT_TOL - gap)
                if gap > _CONSTRAINT_TOL * max(1.0, request.rate):
                    detail = detail or f"rate multiplier without binding rate at {t}"
        else:
            gamma = price - mu  # reconstructed zero-allocation multiplier
            worst = min(worst, gamma + _CONSTRAINT_TOL)
            if gamma < -_CONSTRAINT_TOL:
                detail = detail or f"negative reconstructed multiplier at slot {t}"
    total = sum(alloc.values())
    demand_gap = abs(total - request.energy)
    if demand_gap > 1e-9 * request.energy:
        detail = detail or "demand constraint not met"
    lhs = sum(phi_value(params, t, post[t]) * y for t, y in event.allocation)
    rhs = mu * request.energy - sum(
        sigma.get(t, 0.0) * request.rate for t, _ in event.allocation
    )
    ident = abs(lhs - rhs)
    scale = max(1.0, abs(lhs))
    worst = min(worst, _CONSTRAINT_TOL * scale - ident)
    if ident > _CONSTRAINT_TOL * scale:
        detail = detail or "payment identity fails"
    return CheckFragment(ok=not detail, worst_margin=worst, detail=detail)


def check_pd_inequalities(trace: Sequence[TraceEvent], params: PricingParams,
                          instance: Instance) -> CheckFragment:
    """Initial and incremental primal-dual inequalities on a capacity-free
    trace.

    The initial inequality compares the primal value after the first EV that
    lifts a slot to beta against the running dual objective; the dual
    increments afterwards follow the telescoping of the per-slot prices.  If
    no slot ever reaches beta the aggregate inequality is checked directly
    (degenerate case, flagged in the report).
    """
    if classify_trace(trace) != CAPACITY_FREE:
        raise WrongClassificationError(
            "primal-dual inequalities apply to capacity-free traces only"
        )
    horizon = instance.config.horizon
    p = instance.config.prices
    alpha = params.alpha
    snaps = _replay(trace, horizon)
    cert = build_certificate(trace, params, instance.requests)
    req_by_id = {r.id: r for r in instance.requests}

    # running primal increments
    deltas_p = []
    for e in trace:
        if e.admitted:
            req = req_by_id[e.ev_id]
            deltas_p.append(req.value - sum(p[t] * y for t, y in e.allocation))
        else:
            deltas_p.append(0.0)

    k = cert.k_index
    C = params.capacity

    def dual_at(step: int) -> float:
        w = snaps[step + 1]
        lam_term = sum(
            (phi_value(params, t, w[t]) - p[t]) * C
            for t in range(horizon) if w[t] >= params.beta
        )
        return lam_term + sum(cert.eta_bar[: step + 1])

    # incremental dual increments via price telescoping
    def dual_increment(i: int) -> float:
        e = trace[i]
        if not e.admitted:
            return 0.0
        w_pre, w_post = snaps[i], snaps[i + 1]
        tel = sum(
            C * (phi_value(params, t, w_post[t]) - phi_value(params, t, w_pre[t]))
            for t, _ in e.allocation
        )
        return tel + cert.eta_bar[i]

    worst = math.inf
    detail = ""
    if not trace:
        return CheckFragment(ok=True, worst_margin=worst, detail="empty trace")
    if k is None:
        d_total = sum(cert.eta_bar)
    else:
        d_total = dual_at(k) + sum(
            dual_increment(i) for i in range(k + 1, len(trace))
        )
    tol = 1e-6 * max(1.0, abs(d_total))
    if k is None:
        # no slot ever reached beta: check the aggregate inequality directly
        p_total = sum(deltas_p)
        margin = p_total - sum(cert.eta_bar) / alpha
        worst = min(worst, margin + tol)
        if margin < -tol:
            detail = "degenerate aggregate inequality fails"
        return CheckFragment(ok=not detail, worst_margin=worst,
                             detail=detail or "degenerate")
    p_k = sum(deltas_p[: k + 1])
    margin = p_k - dual_at(k) / alpha
    worst = min(worst, margin + tol)
    if margin < -tol:
        detail = "initial inequality fails"
    for i in range(k + 1, len(trace)):
        margin = deltas_p[i] - dual_increment(i) / alpha
        worst = min(worst, margin + tol)
        if margin < -tol:
            detail = detail or f"incremental inequality fails at EV {trace[i].ev_id}"
    return CheckFragment(ok=not detail, worst_margin=worst, detail=detail)


def certify(trace: Optional[Sequence[TraceEvent]], params: PricingParams,
            instance: Instance) -> CertReport:
    """Full report over one trace: classification plus every check that is
    sound for its class (the primal-dual inequalities are recorded only for
    capacity-free traces)."""
    classification = classify_trace(trace)
    cert = build_certificate(trace, params, instance.requests)
    dual = check_dual_feasibility(cert, instance, trace, params)
    req_by_id = {r.id: r for r in instance.requests}
    kkt_worst = math.inf
    kkt_ok = True
    for e in trace:
        frag = check_kkt(e, params, req_by_id[e.ev_id])
        kkt_worst = min(kkt_worst, frag.worst_margin)
        kkt_ok = kkt_ok and frag.ok
    if classification == CAPACITY_FREE:
        pd = check_pd_inequalities(trace, params, instance)
        initial_ok = incremental_ok = pd.ok
        degenerate = pd.detail.startswith("degenerate")
        pd_margin = pd.worst_margin
    else:
        initial_ok = incremental_ok = True  # out of scope, informational only
        degenerate = False
        pd_margin = math.nan
    return CertReport(
        classification=classification,
        dual_feasible=dual.ok,
        kkt_ok=kkt_ok,
        initial_ok=initial_ok,
        incremental_ok=incremental_ok,
        degenerate_k=degenerate,
        worst_margins={
            "dual": dual.worst_margin,
            "kkt": kkt_worst,
            "primal_dual": pd_margin,
        },
    )


def cr_bound(params: PricingParams) -> float:
    """Closed-form worst-case welfare-ratio bound for the pricing policy."""
    alpha, theta = params.alpha, params.theta
    return max(alpha, 6.0 * math.sqrt(math.e),
               3.0 * theta * alpha * math.exp(1.0 - alpha / 2.0))


def report_to_dict(report: CertReport) -> dict:
    return {
        "format": "evcharge-cert-report",
        "version": 1,
        "classification": report.classification,
        "dual_feasible": report.dual_feasible,
        "kkt_ok": report.kkt_ok,
        "initial_ok": report.initial_ok,
        "incremental_ok": report.incremental_ok,
        "degenerate_k": report.degenerate_k,
        "ok": report.ok,
        "worst_margins": {
            k: (None if isinstance(v, float) and math.isnan(v) else v)
            for k, v in report.worst_margins.items()
        },
    }
