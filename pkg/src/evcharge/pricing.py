"""The three-segment utilization-based pricing function and its calculus.

The per-slot marginal price is flat at L while utilization is below the
threshold beta = C/alpha, grows exponentially from L up to at least
U*Dmax/Dmin at full capacity, and is non-finite beyond capacity.  The
exponential segment solves the boundary-value problem

    alpha * f(w) - C * f'(w) = alpha * p_t,   f(beta) = L,

with alpha = 1 + 2*ln(theta) and theta = (U*Dmax/Dmin) / (L - pmax).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

from .errors import (
    CapacityExceededError,
    PriceBelowLError,
    PriceExceedsPmaxError,
    TheoremPreconditionError,
)
from .model import Bounds, StationConfig

_REL_TOL = 1e-9


@dataclass(frozen=True)
class PriceQuote:
    """A per-unit price; ``finite=False`` encodes the over-capacity segment."""

    finite: bool
    value: float = math.inf


@dataclass(frozen=True)
class PricingParams:
    bounds: Bounds
    capacity: float
    prices: Tuple[float, ...]
    theta: float
    alpha: float
    beta: float


def make_params(bounds: Bounds, config: StationConfig) -> PricingParams:
    """Derive theta, alpha and the utilization threshold beta = C/alpha."""
    if bounds.ratio_product < 2 * (1 - _REL_TOL):
        raise TheoremPreconditionError(
            f"(U/L)*(Dmax/Dmin) = {bounds.ratio_product:.6g} < 2"
        )
    if bounds.pmax >= bounds.L:
        raise TheoremPreconditionError("pmax must be strictly below L")
    if config.prices and max(config.prices) > bounds.pmax * (1 + _REL_TOL):
        raise PriceExceedsPmaxError(
            f"max slot price {max(config.prices)} exceeds pmax {bounds.pmax}"
        )
    theta = bounds.boundary_density / (bounds.L - bounds.pmax)
    alpha = 1.0 + 2.0 * math.log(theta)
    return PricingParams(
        bounds=bounds,
        capacity=config.capacity,
        prices=tuple(config.prices),
        theta=theta,
        alpha=alpha,
        beta=config.capacity / alpha,
    )


def phi(params: PricingParams, t: int, w: float) -> PriceQuote:
    """Marginal price at slot ``t`` when utilization is ``w``."""
    if w < 0:
        raise ValueError(f"utilization {w} negative")
    C = params.capacity
    if w > C:
        return PriceQuote(finite=False)
    if w < params.beta:
        return PriceQuote(finite=True, value=params.bounds.L)
    p = params.prices[t]
    g = (params.bounds.L - p) / math.e
    return PriceQuote(finite=True, value=g * math.exp(params.alpha * w / C) + p)


def phi_value(params: PricingParams, t: int, w: float) -> float:
    """Like :func:`phi` but for callers that already guard w <= C."""
    C = params.capacity
    if w < params.beta:
        return params.bounds.L
    p = params.prices[t]
    return (params.bounds.L - p) / math.e * math.exp(params.alpha * w / C) + p


def phi_inverse(params: PricingParams, t: int, price: float) -> float:
    """Utilization at which the slot price reaches ``price``.

    The flat segment is set-valued at L; by convention the supremum beta is
    returned.  Results are clamped to [beta, C].
    """
    L = params.bounds.L
    if price < L * (1 - _REL_TOL):
        raise PriceBelowLError(f"price {price} below L={L}")
    if price <= L:
        return params.beta
    p = params.prices[t]
    w = (params.capacity / params.alpha) * (1.0 + math.log((price - p) / (L - p)))
    return min(max(w, params.beta), params.capacity)


def pseudo_cost(params: PricingParams, t: int, w0: float, w1: float) -> float:
    """Exact integral of the piecewise price over the utilization interval."""
    if w0 < 0 or w1 < w0:
        raise ValueError(f"bad interval [{w0}, {w1}]")
    C = params.capacity
    if w1 > C * (1 + _REL_TOL):
        raise CapacityExceededError(f"upper limit {w1} exceeds capacity {C}")
    w1 = min(w1, C)
    beta = params.beta
    L = params.bounds.L
    total = 0.0
    if w0 < beta:
        total += L * (min(w1, beta) - w0)
    lo = max(w0, beta)
    if w1 > lo:
        p = params.prices[t]
        g = (L - p) / math.e
        a_over_c = params.alpha / C
        total += g / a_over_c * (math.exp(a_over_c * w1) - math.exp(a_over_c * lo))
        total += p * (w1 - lo)
    return total


@dataclass(frozen=True)
class SufficientConditionReport:
    """Result of checking the competitiveness conditions on a price grid."""

    ode_ok: bool
    continuity_ok: bool
    boundary_ok: bool
    worst_ode_margin: float       # min over grid of alpha*f - C*f' - alpha*p
    worst_boundary_margin: float  # min over prices of f(C) - U*Dmax/Dmin

    @property
    def ok(self) -> bool:
        return self.ode_ok and self.continuity_ok and self.boundary_ok


def check_sufficient_condition(
    params: PricingParams,
    grid_points: int,
    price_func: Optional[Callable[[int, float], float]] = None,
) -> SufficientConditionReport:
    """Verify, per distinct slot price and on a uniform grid over [beta, C]:
    (i) alpha*f(w) - C*f'(w) >= alpha*p_t (f' by central difference),
    (ii) f(beta) = L, (iii) f(C) >= U*Dmax/Dmin.

    ``price_func(t, w)`` overrides the built-in function, allowing test
    doubles to be checked against the same conditions.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    f = price_func or (lambda t, w: phi_value(params, t, w))
    C, alpha, beta = params.capacity, params.alpha, params.beta
    L = params.bounds.L
    h = C * 1e-6
    ode_tol = 1e-5
    ode_margin = math.inf
    boundary_margin = math.inf
    continuity_ok = True
    distinct = sorted(set(params.prices))
    target = params.bounds.boundary_density
    for p in distinct:
        t = params.prices.index(p)
        if abs(f(t, beta) - L) > 1e-6 * L:
            continuity_ok = False
        boundary_margin = min(boundary_margin, f(t, C) - target)
        for i in range(grid_points):
            w = beta + (C - beta) * i / (grid_points - 1)
            # keep the difference central at the segment ends; a clamped
            # one-sided difference has first-order error above the tolerance
            w = min(max(w, beta + h), C - h)
            deriv = (f(t, w + h) - f(t, w - h)) / (2 * h)
            ode_margin = min(ode_margin, alpha * f(t, w) - C * deriv - alpha * p)
    return SufficientConditionReport(
        ode_ok=ode_margin >= -ode_tol,
        continuity_ok=continuity_ok,
        boundary_ok=boundary_margin >= -1e-9 * target,
        worst_ode_margin=ode_margin,
        worst_boundary_margin=boundary_margin,
    )
