"""Per-EV pseudo-cost minimization by water-filling.

Given the current utilization profile and a request, the candidate schedule
fills the cheapest slots of the availability window up to a common price
level (the water level), capped by the per-slot rate limit and the residual
capacity.  The same machinery also serves alternative price curves (e.g. the
linear myopic baseline) through the small PriceCurve protocol below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

from .errors import InfeasibleCandidateError, TooLargeError
from .model import EVRequest
from .pricing import PricingParams, phi_inverse, phi_value, pseudo_cost

_DEMAND_RTOL = 1e-9
_MAX_BISECT = 200


class PriceCurve(Protocol):
    """Minimal interface the water-filling solver needs from a price family."""

    capacity: float

    def value(self, t: int, w: float) -> float: ...
    def inverse(self, t: int, price: float) -> float: ...
    def integral(self, t: int, w0: float, w1: float) -> float: ...
    def cap_price(self, t: int) -> float: ...
    def flat_price(self) -> Optional[float]: ...
    def flat_threshold(self) -> Optional[float]: ...


class ExponentialCurve:
    """Adapter exposing the three-segment pricing function as a PriceCurve."""

    def __init__(self, params: PricingParams):
        self.params = params
        self.capacity = params.capacity

    def value(self, t, w):
        return phi_value(self.params, t, w)

    def inverse(self, t, price):
        return phi_inverse(self.params, t, price)

    def integral(self, t, w0, w1):
        return pseudo_cost(self.params, t, w0, w1)

    def cap_price(self, t):
        return phi_value(self.params, t, self.params.capacity)

    def flat_price(self):
        return self.params.bounds.L

    def flat_threshold(self):
        return self.params.beta


def _as_curve(params) -> PriceCurve:
    if isinstance(params, PricingParams):
        return ExponentialCurve(params)
    return params


@dataclass(frozen=True)
class CandidateSchedule:
    """Water-filling output: allocation, water level, rate-cap multipliers.

    ``capacity_pressed`` marks candidates whose fill was truncated by the
    residual capacity below the rate limit in some slot (or that were outright
    infeasible); such events classify the whole trace as capacity-limited.
    """

    feasible: bool
    allocation: Tuple[Tuple[int, float], ...] = ()
    water_level: float = math.nan
    sigma: Tuple[Tuple[int, float], ...] = ()
    capacity_pressed: bool = False

    @property
    def total_energy(self) -> float:
        return sum(y for _, y in self.allocation)


def residual_feasible(w: Sequence[float], req: EVRequest, capacity: float) -> bool:
    """True iff the window's residual rate-capped capacity covers the demand."""
    room = sum(min(req.rate, capacity - w[t]) for t in req.window)
    return room >= req.energy * (1 - _DEMAND_RTOL)


def _fix_residual(alloc: Dict[int, float], caps: Dict[int, float],
                  residual: float) -> None:
    # push sub-tolerance leftover mass to slots already in the support first
    # (a zero slot may price above the water level, and even dust there would
    # break stationarity), then to the lowest-index slots with slack
    order = sorted(alloc, key=lambda t: (alloc[t] <= 0.0, t))
    for t in order:
        if residual <= 0:
            break
        room = caps[t] - alloc[t]
        add = min(room, residual)
        alloc[t] += add
        residual -= add


def schedule_candidate(params, w: Sequence[float], req: EVRequest) -> CandidateSchedule:
    """Solve the per-EV pseudo-cost minimization over the availability window.

    Returns an infeasible candidate when the residual capacity cannot cover
    the demand (the over-capacity price segment); otherwise the allocation is
    y_t = min([inverse(mu) - w_t]^+, rate) with mu found by bisection.
    """
    curve = _as_curve(params)
    C = curve.capacity
    window = list(req.window)
    caps = {t: max(min(req.rate, C - w[t]), 0.0) for t in window}
    if sum(caps.values()) < req.energy * (1 - _DEMAND_RTOL):
        return CandidateSchedule(feasible=False, capacity_pressed=True)

    E = req.energy
    tol = _DEMAND_RTOL * E

    flat_price = curve.flat_price()
    flat_thresh = curve.flat_threshold()
    if flat_price is not None:
        # demand coverable below the flat threshold: every feasible split has
        # identical cost, fill with equal per-slot increments
        flat_caps = {t: min(max(flat_thresh - w[t], 0.0), caps[t]) for t in window}
        if sum(flat_caps.values()) >= E - tol:
            lo, hi = 0.0, max(flat_caps.values()) if flat_caps else 0.0
            for _ in range(_MAX_BISECT):
                mid = 0.5 * (lo + hi)
                total = sum(min(mid, c) for c in flat_caps.values())
                if abs(total - E) <= tol:
                    lo = hi = mid
                    break
                if total < E:
                    lo = mid
                else:
                    hi = mid
            delta = 0.5 * (lo + hi)
            alloc = {t: min(delta, flat_caps[t]) for t in window}
            _fix_residual(alloc, flat_caps, E - sum(alloc.values()))
            allocation = tuple((t, y) for t, y in sorted(alloc.items()) if y > 0)
            return CandidateSchedule(
                feasible=True, allocation=allocation,
                water_level=flat_price,
                sigma=tuple((t, 0.0) for t, _ in allocation),
            )

    def fill(mu: float) -> Dict[int, float]:
        return {
            t: min(max(curve.inverse(t, mu) - w[t], 0.0), caps[t])
            for t in window
        }

    lo = min(curve.value(t, min(w[t], C)) for t in window)
    hi = max(curve.cap_price(t) for t in window) + 1.0
    alloc = None
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        alloc = fill(mid)
        total = sum(alloc.values())
        if abs(total - E) <= tol:
            lo = hi = mid
            break
        if total < E:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    alloc = fill(mu)
    _fix_residual(alloc, caps, E - sum(alloc.values()))
    allocation = tuple((t, y) for t, y in sorted(alloc.items()) if y > 0)
    # bisection may stop anywhere on a plateau of the fill map; the canonical
    # (minimal) water level is the highest post-allocation price on the
    # support, which is a valid dual of the candidate problem
    mu = max(curve.value(t, w[t] + y) for t, y in allocation)
    sigma = tuple(
        (t, max(mu - curve.value(t, w[t] + y), 0.0)) for t, y in allocation
    )
    # the fill hit a per-slot cap set by residual capacity rather than the
    # rate limit: this candidate needed more than C - w_t in that slot
    pressed = any(
        caps[t] < req.rate * (1 - _DEMAND_RTOL)
        and y >= caps[t] * (1 - _DEMAND_RTOL)
        for t, y in allocation
    )
    return CandidateSchedule(feasible=True, allocation=allocation,
                             water_level=mu, sigma=sigma,
                             capacity_pressed=pressed)


def posted_price(params, w: Sequence[float], cand: CandidateSchedule) -> float:
    """Total price: per-unit price at post-allocation utilization, times the
    allocated energy, summed over the window."""
    if not cand.feasible:
        raise InfeasibleCandidateError("cannot price an infeasible candidate")
    curve = _as_curve(params)
    return sum(curve.value(t, w[t] + y) * y for t, y in cand.allocation)


def candidate_pseudo_cost(params, w: Sequence[float],
                          cand: CandidateSchedule) -> float:
    if not cand.feasible:
        raise InfeasibleCandidateError("infeasible candidate has no cost")
    curve = _as_curve(params)
    return sum(curve.integral(t, w[t], w[t] + y) for t, y in cand.allocation)


def brute_force_min_cost(params, w: Sequence[float], req: EVRequest,
                         grid: int) -> Tuple[float, Tuple[Tuple[int, float], ...]]:
    """Exact minimum pseudo-cost on an E/grid lattice (test oracle).

    Exhausts every lattice allocation by dynamic programming over slots;
    separable costs make this equivalent to full enumeration.
    """
    window = list(req.window)
    if len(window) > 6:
        raise TooLargeError(f"window of {len(window)} slots exceeds oracle limit")
    if grid > 200:
        raise TooLargeError(f"grid {grid} exceeds oracle limit")
    curve = _as_curve(params)
    C = curve.capacity
    eps = req.energy / grid
    max_units = [
        min(grid, int((min(req.rate, C - w[t]) + 1e-9 * eps) / eps))
        for t in window
    ]
    INF = math.inf
    best = [0.0] + [INF] * grid
    choice: List[List[int]] = []
    for idx, t in enumerate(window):
        costs = [curve.integral(t, w[t], w[t] + j * eps) for j in range(max_units[idx] + 1)]
        nxt = [INF] * (grid + 1)
        pick = [0] * (grid + 1)
        for u in range(grid + 1):
            for j in range(min(max_units[idx], u) + 1):
                if best[u - j] == INF:
                    continue
                c = best[u - j] + costs[j]
                if c < nxt[u]:
                    nxt[u] = c
                    pick[u] = j
        best = nxt
        choice.append(pick)
    if best[grid] == INF:
        return INF, ()
    alloc = []
    u = grid
    for idx in range(len(window) - 1, -1, -1):
        j = choice[idx][u]
        if j:
            alloc.append((window[idx], j * eps))
        u -= j
    return best[grid], tuple(sorted(alloc))
