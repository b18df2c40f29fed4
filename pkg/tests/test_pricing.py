"""Three-segment pricing function: parameters, evaluation, calculus."""

import math
import random

import pytest

from evcharge.errors import (
    CapacityExceededError,
    PriceBelowLError,
    PriceExceedsPmaxError,
    TheoremPreconditionError,
)
from evcharge.model import Bounds, StationConfig
from evcharge.pricing import (
    check_sufficient_condition,
    make_params,
    phi,
    phi_inverse,
    phi_value,
    pseudo_cost,
)

BOUNDS = Bounds(L=1.0, U=2.0, Dmin=1, Dmax=2, pmax=0.5)
CONFIG = StationConfig(horizon=2, capacity=10.0, prices=(0.5, 0.1))

# closed-form reference values, computed independently at high precision
THETA = 8.0
ALPHA = 5.1588830833596715
BETA = 1.9384040766994082
PHI_AT_C = 32.5              # 0.5 * theta**2 + 0.5 at p_t = 0.5
INTEGRAL_BETA_TO_C = 65.09052637768163


def params():
    return make_params(BOUNDS, CONFIG)


def test_make_params_constants():
    p = params()
    assert p.theta == THETA
    assert abs(p.alpha - ALPHA) < 1e-15
    assert abs(p.beta - BETA) < 1e-15


def test_make_params_small_ratio():
    p = make_params(Bounds(L=1.0, U=2.0, Dmin=1, Dmax=1, pmax=0.0),
                    StationConfig(1, 10.0, (0.0,)))
    assert p.theta == 2.0
    assert abs(p.alpha - (1 + 2 * math.log(2))) < 1e-15


def test_make_params_preconditions():
    with pytest.raises(TheoremPreconditionError):
        make_params(Bounds(L=1.0, U=1.0, Dmin=1, Dmax=1, pmax=0.0),
                    StationConfig(1, 10.0, (0.0,)))
    with pytest.raises(TheoremPreconditionError):
        make_params(Bounds(L=1.0, U=4.0, Dmin=1, Dmax=2, pmax=1.0),
                    StationConfig(1, 10.0, (0.0,)))
    with pytest.raises(PriceExceedsPmaxError):
        make_params(BOUNDS, StationConfig(1, 10.0, (0.6,)))


def test_phi_segments():
    p = params()
    assert phi(p, 0, 0.0).value == BOUNDS.L
    assert phi(p, 0, BETA / 2).value == BOUNDS.L
    at_c = phi(p, 0, p.capacity)
    assert at_c.finite and abs(at_c.value - PHI_AT_C) < 1e-9 * PHI_AT_C
    assert not phi(p, 0, p.capacity + 0.001).finite
    with pytest.raises(ValueError):
        phi(p, 0, -0.1)


def test_phi_continuity_at_threshold():
    p = params()
    eps = 1e-9 * p.capacity
    for t in range(2):
        lo = phi_value(p, t, p.beta - eps)
        hi = phi_value(p, t, p.beta + eps)
        assert abs(lo - hi) <= 1e-6 * BOUNDS.L


def test_phi_monotone():
    p = params()
    for t in range(2):
        prev = 0.0
        for i in range(2001):
            w = p.capacity * i / 2000
            v = phi_value(p, t, w)
            assert v >= prev - 1e-12
            prev = v


def test_phi_inverse_conventions():
    p = params()
    assert phi_inverse(p, 0, BOUNDS.L) == p.beta
    assert abs(phi_inverse(p, 0, PHI_AT_C) - p.capacity) < 1e-9 * p.capacity
    with pytest.raises(PriceBelowLError):
        phi_inverse(p, 0, BOUNDS.L - 0.01)


def test_phi_inverse_round_trip():
    p = params()
    for t in range(2):
        for i in range(500):
            w = p.beta + (p.capacity - p.beta) * i / 499
            back = phi_inverse(p, t, phi_value(p, t, w))
            assert abs(back - w) <= 1e-9 * p.capacity


def test_pseudo_cost_flat_and_empty():
    p = params()
    assert abs(pseudo_cost(p, 0, 0.0, 1.5) - BOUNDS.L * 1.5) < 1e-12
    assert pseudo_cost(p, 0, 3.0, 3.0) == 0.0
    with pytest.raises(CapacityExceededError):
        pseudo_cost(p, 0, 0.0, p.capacity + 1.0)
    with pytest.raises(ValueError):
        pseudo_cost(p, 0, 2.0, 1.0)


def test_pseudo_cost_exponential_segment():
    p = params()
    got = pseudo_cost(p, 0, p.beta, p.capacity)
    assert abs(got - INTEGRAL_BETA_TO_C) < 1e-9 * INTEGRAL_BETA_TO_C


def test_pseudo_cost_matches_quadrature():
    # independent Simpson quadrature over the same piecewise integrand
    p = params()
    rng = random.Random(11)
    for _ in range(25):
        t = rng.randrange(2)
        w0 = rng.uniform(0.0, p.capacity)
        w1 = rng.uniform(w0, p.capacity)
        n = 4096
        h = (w1 - w0) / n
        s = phi_value(p, t, w0) + phi_value(p, t, w1)
        s += 4 * sum(phi_value(p, t, w0 + (2 * i - 1) * h)
                     for i in range(1, n // 2 + 1))
        s += 2 * sum(phi_value(p, t, w0 + 2 * i * h) for i in range(1, n // 2))
        quad = s * h / 3
        assert abs(pseudo_cost(p, t, w0, w1) - quad) < 1e-7 * max(1.0, quad)


def test_pseudo_cost_additive():
    p = params()
    rng = random.Random(3)
    for _ in range(50):
        t = rng.randrange(2)
        a, b, c = sorted(rng.uniform(0, p.capacity) for _ in range(3))
        whole = pseudo_cost(p, t, a, c)
        split = pseudo_cost(p, t, a, b) + pseudo_cost(p, t, b, c)
        assert abs(whole - split) <= 1e-12 * max(1.0, abs(whole))


def test_sufficient_condition_passes_for_builtin():
    report = check_sufficient_condition(params(), 200)
    assert report.ok
    assert report.worst_ode_margin >= -1e-5
    # boundary holds with room: phi(C) = 32.5 >= U*Dmax/Dmin = 4
    assert report.worst_boundary_margin >= PHI_AT_C - 4.0 - 1e-6


def test_sufficient_condition_rejects_flat_double():
    report = check_sufficient_condition(params(), 50,
                                        price_func=lambda t, w: BOUNDS.L)
    assert not report.boundary_ok
    assert not report.ok


def test_sufficient_condition_grid_guard():
    with pytest.raises(ValueError):
        check_sufficient_condition(params(), 1)
