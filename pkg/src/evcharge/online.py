"""Online policies: the posted-pricing main loop and three baselines.

Every policy consumes requests strictly in arrival order, never revisits a
past decision, and returns a TrialOutcome whose welfare is recomputable from
its fields.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import InconsistentOutcomeError, ParamsMismatchError
from .model import (
    ChargingSchedule,
    EVRequest,
    Instance,
    TraceEvent,
    TrialOutcome,
)
from .pricing import PricingParams
from .scheduler import (
    CandidateSchedule,
    posted_price,
    residual_feasible,
    schedule_candidate,
)

_DEMAND_RTOL = 1e-9


class LinearCurve:
    """Myopic linear price ramp from (0, p_t) to (C, U*Dmax/Dmin).

    Surrogate for the myopic-price baseline: spans the same price range as
    the exponential function but grows linearly in utilization.
    """

    def __init__(self, params: PricingParams):
        self.capacity = params.capacity
        self.prices = params.prices
        self.top = params.bounds.boundary_density

    def value(self, t, w):
        p = self.prices[t]
        return p + (w / self.capacity) * (self.top - p)

    def inverse(self, t, price):
        p = self.prices[t]
        w = self.capacity * (price - p) / (self.top - p)
        return min(max(w, 0.0), self.capacity)

    def integral(self, t, w0, w1):
        p = self.prices[t]
        slope = (self.top - p) / self.capacity
        return p * (w1 - w0) + 0.5 * slope * (w1 * w1 - w0 * w0)

    def cap_price(self, t):
        return self.top

    def flat_price(self):
        return None

    def flat_threshold(self):
        return None


def _check_params(instance: Instance, params: PricingParams) -> None:
    if params.bounds != instance.bounds:
        raise ParamsMismatchError("params derived from different bounds")
    if params.capacity != instance.config.capacity:
        raise ParamsMismatchError("params capacity differs from station config")
    if params.prices != instance.config.prices:
        raise ParamsMismatchError("params prices differ from station config")


def _finalize(policy: str, instance: Instance, admissions, prices, alloc_map,
              w, events) -> TrialOutcome:
    schedule = ChargingSchedule(allocations=alloc_map)
    value = sum(r.value for r, x in zip(instance.requests, admissions) if x)
    p = instance.config.prices
    cost = sum(p[t] * y for a in alloc_map.values() for t, y in a)
    return TrialOutcome(
        policy=policy,
        admissions=tuple(admissions),
        posted_prices=tuple(prices),
        schedule=schedule,
        welfare=value - cost,
        final_utilization=tuple(w),
        trace=tuple(events) if events is not None else None,
    )


def _run_priced(instance: Instance, curve, policy: str,
                trace: bool) -> TrialOutcome:
    w = [0.0] * instance.config.horizon
    admissions: List[bool] = []
    prices: List[float] = []
    alloc_map: Dict[int, Tuple[Tuple[int, float], ...]] = {}
    events: Optional[List[TraceEvent]] = [] if trace else None
    for req in instance.requests:
        pre = tuple((t, w[t]) for t in req.window) if trace else ()
        cand = schedule_candidate(curve, w, req)
        if not cand.feasible:
            admitted = False
            xi = math.inf
        else:
            xi = posted_price(curve, w, cand)
            admitted = req.value >= xi
        if admitted:
            for t, y in cand.allocation:
                w[t] += y
            alloc_map[req.id] = cand.allocation
        admissions.append(admitted)
        prices.append(xi)
        if trace:
            events.append(TraceEvent(
                ev_id=req.id,
                feasible=cand.feasible,
                capacity_pressed=cand.capacity_pressed,
                allocation=cand.allocation if cand.feasible else (),
                water_level=cand.water_level,
                sigma=cand.sigma,
                posted_price=xi,
                admitted=admitted,
                pre_utilization=pre,
                post_utilization=tuple((t, w[t]) for t in req.window),
            ))
    return _finalize(policy, instance, admissions, prices, alloc_map, w, events)


def run_opa(instance: Instance, params: PricingParams,
            trace: bool = False) -> TrialOutcome:
    """Posted-pricing main loop with the exponential pricing function."""
    _check_params(instance, params)
    return _run_priced(instance, params, "opa", trace)


def run_ommp(instance: Instance, params: PricingParams,
             trace: bool = False) -> TrialOutcome:
    """Same loop as the posted-pricing policy, with the linear myopic ramp."""
    _check_params(instance, params)
    return _run_priced(instance, LinearCurve(params), "ommp", trace)


def _water_fill_levels(levels: Dict[int, float], caps: Dict[int, float],
                       demand: float) -> Dict[int, float]:
    """Raise per-slot levels to a common height until demand is met."""
    lo = min(levels.values())
    hi = max(levels[t] + caps[t] for t in levels)
    alloc = {t: 0.0 for t in levels}
    tol = _DEMAND_RTOL * demand
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        total = sum(min(max(mid - levels[t], 0.0), caps[t]) for t in levels)
        if abs(total - demand) <= tol:
            lo = hi = mid
            break
        if total < demand:
            lo = mid
        else:
            hi = mid
    level = 0.5 * (lo + hi)
    for t in levels:
        alloc[t] = min(max(level - levels[t], 0.0), caps[t])
    residual = demand - sum(alloc.values())
    for t in sorted(alloc):
        if residual <= 0:
            break
        room = caps[t] - alloc[t]
        add = min(room, residual)
        alloc[t] += add
        residual -= add
    return alloc


def run_uboa(instance: Instance) -> TrialOutcome:
    """First-come-first-served admission; schedules by filling the least
    utilized slots first (uniform raise, ties by slot index)."""
    C = instance.config.capacity
    w = [0.0] * instance.config.horizon
    admissions, prices = [], []
    alloc_map: Dict[int, Tuple[Tuple[int, float], ...]] = {}
    for req in instance.requests:
        if not residual_feasible(w, req, C):
            admissions.append(False)
            prices.append(0.0)
            continue
        levels = {t: w[t] for t in req.window}
        caps = {t: min(req.rate, C - w[t]) for t in req.window}
        alloc = _water_fill_levels(levels, caps, req.energy)
        committed = tuple((t, y) for t, y in sorted(alloc.items()) if y > 0)
        for t, y in committed:
            w[t] += y
        alloc_map[req.id] = committed
        admissions.append(True)
        prices.append(0.0)
    return _finalize("uboa", instance, admissions, prices, alloc_map, w, None)


def run_pboa(instance: Instance) -> TrialOutcome:
    """First-come-first-served admission; schedules greedily into the slots
    with the lowest unit energy cost (ties by slot index)."""
    C = instance.config.capacity
    p = instance.config.prices
    w = [0.0] * instance.config.horizon
    admissions, prices = [], []
    alloc_map: Dict[int, Tuple[Tuple[int, float], ...]] = {}
    for req in instance.requests:
        if not residual_feasible(w, req, C):
            admissions.append(False)
            prices.append(0.0)
            continue
        remaining = req.energy
        alloc = []
        for t in sorted(req.window, key=lambda t: (p[t], t)):
            if remaining <= 0:
                break
            y = min(req.rate, C - w[t], remaining)
            if y > 0:
                alloc.append((t, y))
                remaining -= y
        committed = tuple(sorted(alloc))
        for t, y in committed:
            w[t] += y
        alloc_map[req.id] = committed
        admissions.append(True)
        prices.append(0.0)
    return _finalize("pboa", instance, admissions, prices, alloc_map, w, None)


def welfare(outcome: TrialOutcome, instance: Instance) -> float:
    """Recompute total value of admitted EVs minus electricity cost; raises
    when the outcome's schedule contradicts its admissions."""
    if len(outcome.admissions) != len(instance.requests):
        raise InconsistentOutcomeError("admissions length mismatch")
    p = instance.config.prices
    total = 0.0
    for req, x in zip(instance.requests, outcome.admissions):
        got = outcome.schedule.energy_of(req.id)
        if x:
            if abs(got - req.energy) > _DEMAND_RTOL * req.energy:
                raise InconsistentOutcomeError(
                    f"EV {req.id} admitted but delivered {got} of {req.energy}"
                )
            total += req.value
            total -= sum(p[t] * y for t, y in outcome.schedule.allocations[req.id])
        elif got > 0:
            raise InconsistentOutcomeError(f"EV {req.id} rejected but charged")
    if abs(total - outcome.welfare) > 1e-9 * max(1.0, abs(total)):
        raise InconsistentOutcomeError(
            f"stored welfare {outcome.welfare} != recomputed {total}"
        )
    return total


POLICIES: Dict[str, Callable] = {
    "opa": run_opa,
    "uboa": run_uboa,
    "pboa": run_pboa,
    "ommp": run_ommp,
}


def run_policy(name: str, instance: Instance,
               params: Optional[PricingParams] = None,
               trace: bool = False) -> TrialOutcome:
    if name in ("opa", "ommp"):
        if params is None:
            raise ParamsMismatchError(f"policy {name} requires pricing params")
        return POLICIES[name](instance, params, trace)
    return POLICIES[name](instance)
