"""Domain types, instance validation, generators and session-file ingestion.

All types are immutable value objects; generators are deterministic functions
of (config, seed).  Slots are abstract 0-based indices and availability
windows are departure-exclusive: an EV arriving at ``a`` and departing at
``d`` may charge in slots ``a, a+1, ..., d-1``.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    EmptyInstanceError,
    InvalidConfigError,
    IOErrorWrapped,
    ParseError,
    TheoremPreconditionError,
)

# relative tolerance for float comparisons against hard bounds
_REL_TOL = 1e-9

# an EV whose rate limit exceeds this fraction of the station capacity
# stresses the infinitesimal-schedule assumption (warning, not an error)
RATE_WARNING_FRACTION = 0.05


@dataclass(frozen=True)
class Bounds:
    """Fleet-wide constants: value-density range, duration range, price cap."""

    L: float
    U: float
    Dmin: int
    Dmax: int
    pmax: float

    @property
    def ratio_product(self) -> float:
        return (self.U / self.L) * (self.Dmax / self.Dmin)

    @property
    def boundary_density(self) -> float:
        """U * Dmax / Dmin, the price the exponential segment must reach."""
        return self.U * self.Dmax / self.Dmin


@dataclass(frozen=True)
class EVRequest:
    """One arriving charging request."""

    id: int
    arrival: int
    departure: int
    energy: float
    rate: float
    value: float

    @property
    def duration(self) -> int:
        return self.departure - self.arrival

    @property
    def window(self) -> range:
        """Available slots, departure-exclusive."""
        return range(self.arrival, self.departure)

    @property
    def density(self) -> float:
        return self.value / self.energy


@dataclass(frozen=True)
class StationConfig:
    """Fixed setup information: horizon, per-slot capacity, energy prices."""

    horizon: int
    capacity: float
    prices: Tuple[float, ...]


@dataclass(frozen=True)
class Instance:
    config: StationConfig
    bounds: Bounds
    requests: Tuple[EVRequest, ...]


@dataclass(frozen=True)
class UtilizationProfile:
    """Committed energy per slot."""

    w: Tuple[float, ...]


@dataclass(frozen=True)
class ChargingSchedule:
    """Per-EV committed allocations: id -> ((slot, energy), ...)."""

    allocations: Dict[int, Tuple[Tuple[int, float], ...]]

    def energy_of(self, ev_id: int) -> float:
        return sum(y for _, y in self.allocations.get(ev_id, ()))


@dataclass(frozen=True)
class TraceEvent:
    """Everything the certifier needs about the processing of one EV."""

    ev_id: int
    feasible: bool
    capacity_pressed: bool
    allocation: Tuple[Tuple[int, float], ...]
    water_level: float
    sigma: Tuple[Tuple[int, float], ...]
    posted_price: float  # math.inf encodes the non-finite quote
    admitted: bool
    pre_utilization: Tuple[Tuple[int, float], ...]   # window slots only
    post_utilization: Tuple[Tuple[int, float], ...]  # window slots only


@dataclass(frozen=True)
class TrialOutcome:
    policy: str
    admissions: Tuple[bool, ...]
    posted_prices: Tuple[float, ...]
    schedule: ChargingSchedule
    welfare: float
    final_utilization: Tuple[float, ...]
    trace: Optional[Tuple[TraceEvent, ...]] = None


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[str, ...]
    warnings: Tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_instance(instance: Instance) -> ValidationReport:
    """Check every type invariant; returns a report instead of raising."""
    violations: List[str] = []
    warnings: List[str] = []
    cfg, b = instance.config, instance.bounds

    if not (0 < b.L <= b.U * (1 + _REL_TOL)):
        violations.append(f"bounds: need 0 < L <= U, got L={b.L}, U={b.U}")
    if not (1 <= b.Dmin <= b.Dmax):
        violations.append(f"bounds: need 1 <= Dmin <= Dmax, got {b.Dmin}, {b.Dmax}")
    if b.pmax > b.L * (1 + _REL_TOL):
        violations.append(f"bounds: pmax={b.pmax} exceeds L={b.L}")
    if b.ratio_product < 2 * (1 - _REL_TOL):
        violations.append(
            f"bounds: (U/L)*(Dmax/Dmin)={b.ratio_product:.6g} < 2"
        )

    if cfg.capacity <= 0:
        violations.append(f"config: capacity {cfg.capacity} not positive")
    if cfg.horizon < b.Dmax:
        violations.append(f"config: horizon {cfg.horizon} < Dmax {b.Dmax}")
    if len(cfg.prices) != cfg.horizon:
        violations.append(
            f"config: {len(cfg.prices)} prices for horizon {cfg.horizon}"
        )
    for t, p in enumerate(cfg.prices):
        if p < 0 or p > b.pmax * (1 + _REL_TOL):
            violations.append(f"config: price p[{t}]={p} outside [0, pmax={b.pmax}]")

    prev_arrival = None
    for req in instance.requests:
        tag = f"request {req.id}"
        if not (0 <= req.arrival < req.departure):
            violations.append(f"{tag}: need 0 <= arrival < departure")
            continue
        if req.departure > cfg.horizon:
            violations.append(f"{tag}: departure {req.departure} beyond horizon")
        if req.duration < b.Dmin:
            violations.append(f"{tag}: availability below Dmin")
        if req.duration > b.Dmax:
            violations.append(f"{tag}: availability exceeds Dmax")
        if req.energy <= 0 or req.rate <= 0 or req.value <= 0:
            violations.append(f"{tag}: energy, rate and value must be positive")
            continue
        if req.energy > req.rate * req.duration * (1 + _REL_TOL):
            violations.append(f"{tag}: energy {req.energy} not satisfiable at rate "
                              f"{req.rate} over {req.duration} slots")
        dens = req.density
        if dens < b.L * (1 - _REL_TOL) or dens > b.U * (1 + _REL_TOL):
            violations.append(f"{tag}: value density {dens:.6g} outside [L, U]")
        if req.rate > RATE_WARNING_FRACTION * cfg.capacity:
            warnings.append(
                f"{tag}: rate {req.rate} exceeds {RATE_WARNING_FRACTION:.0%} of "
                f"capacity; infinitesimal-schedule assumption is stressed"
            )
        if prev_arrival is not None and req.arrival < prev_arrival:
            violations.append(f"{tag}: requests not sorted by arrival")
        prev_arrival = req.arrival

    return ValidationReport(tuple(violations), tuple(warnings))


def derive_bounds(instance: Instance) -> Bounds:
    """Tightest Bounds consistent with the given requests and prices."""
    if not instance.requests:
        raise EmptyInstanceError("cannot derive bounds from an empty instance")
    dens = [r.density for r in instance.requests]
    durs = [r.duration for r in instance.requests]
    b = Bounds(
        L=min(dens),
        U=max(dens),
        Dmin=min(durs),
        Dmax=max(durs),
        pmax=max(instance.config.prices) if instance.config.prices else 0.0,
    )
    if b.ratio_product < 2 * (1 - _REL_TOL):
        raise TheoremPreconditionError(
            f"(U/L)*(Dmax/Dmin) = {b.ratio_product:.6g} < 2"
        )
    return b


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic instance generator.

    ``quantum`` aligns energies, rates and capacity to a lattice so the exact
    offline oracle has zero quantization slack; 0 disables alignment.
    """

    n_requests: int
    horizon: int
    capacity: float
    bounds: Bounds
    rate: float
    quantum: float = 0.0
    price_period: int = 24
    price_phase: float = 0.0


def _snap(x: float, quantum: float) -> float:
    if quantum <= 0:
        return x
    return round(x / quantum) * quantum


def tou_prices(horizon: int, pmax: float, period: int, phase: float) -> Tuple[float, ...]:
    """Bounded time-of-use tariff: sinusoid clipped to [0, pmax]."""
    out = []
    for t in range(horizon):
        p = pmax * (0.5 + 0.5 * math.sin(2 * math.pi * (t + phase) / period))
        out.append(min(max(p, 0.0), pmax))
    return tuple(out)


def generate_synthetic(gen: GeneratorConfig, seed: int) -> Instance:
    """Deterministic random instance; all request invariants hold by
    construction (density uniform in [L, U], duration uniform integer in
    [Dmin, Dmax], energy uniform in (0, rate*duration])."""
    b = gen.bounds
    if gen.n_requests < 1 or gen.horizon < b.Dmax or gen.capacity <= 0:
        raise InvalidConfigError("generator config violates basic invariants")
    if not (0 < b.L <= b.U) or not (1 <= b.Dmin <= b.Dmax) or b.pmax > b.L:
        raise InvalidConfigError("generator bounds are invalid")
    if gen.rate <= 0:
        raise InvalidConfigError("rate must be positive")

    rng = random.Random(seed)
    rate = _snap(gen.rate, gen.quantum)
    capacity = _snap(gen.capacity, gen.quantum)
    reqs = []
    for _ in range(gen.n_requests):
        dur = rng.randint(b.Dmin, b.Dmax)
        arrival = rng.randint(0, gen.horizon - dur)
        e_max = rate * dur
        energy = rng.uniform(0.0, e_max)
        if gen.quantum > 0:
            units = max(1, min(round(energy / gen.quantum), round(e_max / gen.quantum)))
            energy = units * gen.quantum
        else:
            energy = max(energy, e_max * 1e-6)
        density = rng.uniform(b.L, b.U)
        reqs.append((arrival, arrival + dur, energy, rate, density * energy))
    reqs.sort(key=lambda r: r[0])
    requests = tuple(
        EVRequest(id=i, arrival=a, departure=d, energy=e, rate=r, value=v)
        for i, (a, d, e, r, v) in enumerate(reqs)
    )
    config = StationConfig(
        horizon=gen.horizon,
        capacity=capacity,
        prices=tou_prices(gen.horizon, b.pmax, gen.price_period, gen.price_phase),
    )
    return Instance(config=config, bounds=b, requests=requests)


def resample_values(instance: Instance, seed: int) -> Instance:
    """Same arrival skeleton, fresh values with density uniform in [L, U]."""
    rng = random.Random(seed)
    b = instance.bounds
    requests = tuple(
        EVRequest(r.id, r.arrival, r.departure, r.energy, r.rate,
                  rng.uniform(b.L, b.U) * r.energy)
        for r in instance.requests
    )
    return Instance(instance.config, b, requests)


def generate_worst_case(capacity: float, Dmin: int, rate: float,
                        bounds: Bounds, t_prime: int) -> Instance:
    """Two-group stress fixture: both groups overlap only at slot t_prime,
    every EV has zero scheduling slack (energy = rate * Dmin), and the
    aggregate demand at t_prime equals the capacity exactly.

    Group 1 (density L) occupies {t_prime-Dmin+1, ..., t_prime}; group 2
    (density U) occupies {t_prime, ..., t_prime+Dmin-1}.
    """
    group = capacity / (2 * rate)
    if abs(group - round(group)) > 1e-9 or round(group) < 1:
        raise InvalidConfigError("capacity/(2*rate) must be a positive integer")
    if t_prime < Dmin:
        raise InvalidConfigError("t_prime must be >= Dmin")
    if bounds.Dmin != Dmin or bounds.Dmax < Dmin:
        raise InvalidConfigError("bounds duration range must contain Dmin")
    group = round(group)
    energy = rate * Dmin
    horizon = max(t_prime + Dmin, bounds.Dmax, t_prime + bounds.Dmax - Dmin + 1)
    reqs = []
    for i in range(group):
        a = t_prime - Dmin + 1
        reqs.append(EVRequest(id=i, arrival=a, departure=a + Dmin,
                              energy=energy, rate=rate, value=bounds.L * energy))
    for i in range(group):
        reqs.append(EVRequest(id=group + i, arrival=t_prime,
                              departure=t_prime + Dmin,
                              energy=energy, rate=rate, value=bounds.U * energy))
    config = StationConfig(horizon=horizon, capacity=capacity,
                           prices=tuple(0.0 for _ in range(horizon)))
    return Instance(config=config, bounds=bounds, requests=tuple(reqs))


@dataclass(frozen=True)
class ValueModel:
    """Value assignment for ingested sessions: longer windows draw higher
    densities, with multiplicative noise uniform on [0.5, 1]."""

    L: float
    U: float
    seed: int


def ingest_sessions(path: str, value_model: ValueModel,
                    config: StationConfig) -> Instance:
    """Read a session CSV (header arrival,departure,energy,max_rate) and
    assign values from the window-length model.  Rows with unsatisfiable
    energy are clipped to rate*(d-a) with a warning on the report attached
    to the returned instance's validation, not here."""
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != [
                "arrival", "departure", "energy", "max_rate"
            ]:
                raise ParseError(f"bad header in {path}: {header}", row=0)
            for i, row in enumerate(reader, start=1):
                if len(row) != 4:
                    raise ParseError(f"row {i}: expected 4 columns", row=i)
                vals = []
                for j, cell in enumerate(row, start=1):
                    try:
                        vals.append(float(cell) if j >= 3 else int(cell))
                    except ValueError:
                        raise ParseError(
                            f"row {i}, col {j}: cannot parse {cell!r}",
                            row=i, col=j,
                        ) from None
                rows.append(vals)
    except OSError as exc:
        raise IOErrorWrapped(f"cannot read {path}: {exc}") from exc

    if not rows:
        raise EmptyInstanceError(f"no session rows in {path}")

    durs = [d - a for a, d, _, _ in rows]
    dmin, dmax = min(durs), max(durs)
    rng = random.Random(value_model.seed)
    L, U = value_model.L, value_model.U
    reqs = []
    for i, (a, d, e, r) in enumerate(rows):
        e = min(e, r * (d - a))  # clip unsatisfiable demand
        zeta = rng.uniform(0.5, 1.0)
        frac = 0.0 if dmax == dmin else (d - a - dmin) / (dmax - dmin)
        density = L + (U - L) * frac * zeta
        density = min(max(density, L), U)
        reqs.append(EVRequest(id=i, arrival=a, departure=d, energy=e,
                              rate=r, value=density * e))
    reqs.sort(key=lambda r: (r.arrival, r.id))
    reqs = tuple(
        EVRequest(i, r.arrival, r.departure, r.energy, r.rate, r.value)
        for i, r in enumerate(reqs)
    )
    bounds = Bounds(L=L, U=U, Dmin=dmin, Dmax=dmax,
                    pmax=max(config.prices) if config.prices else 0.0)
    return Instance(config=config, bounds=bounds, requests=reqs)


# ---------------------------------------------------------------------------
# Instance serialization (self-describing JSON, round-trip guaranteed)
# ---------------------------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    return {
        "format": "evcharge-instance",
        "version": 1,
        "config": {
            "horizon": instance.config.horizon,
            "capacity": instance.config.capacity,
            "prices": list(instance.config.prices),
        },
        "bounds": {
            "L": instance.bounds.L,
            "U": instance.bounds.U,
            "Dmin": instance.bounds.Dmin,
            "Dmax": instance.bounds.Dmax,
            "pmax": instance.bounds.pmax,
        },
        "requests": [
            {
                "id": r.id, "arrival": r.arrival, "departure": r.departure,
                "energy": r.energy, "rate": r.rate, "value": r.value,
            }
            for r in instance.requests
        ],
    }


def instance_from_dict(doc: dict) -> Instance:
    if doc.get("format") != "evcharge-instance":
        raise ParseError("not an evcharge instance document")
    cfg = doc["config"]
    b = doc["bounds"]
    return Instance(
        config=StationConfig(horizon=cfg["horizon"], capacity=cfg["capacity"],
                             prices=tuple(cfg["prices"])),
        bounds=Bounds(L=b["L"], U=b["U"], Dmin=b["Dmin"], Dmax=b["Dmax"],
                      pmax=b["pmax"]),
        requests=tuple(
            EVRequest(id=r["id"], arrival=r["arrival"], departure=r["departure"],
                      energy=r["energy"], rate=r["rate"], value=r["value"])
            for r in doc["requests"]
        ),
    )


def save_instance(instance: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=1)


def load_instance(path: str) -> Instance:
    try:
        with open(path, encoding="utf-8") as fh:
            return instance_from_dict(json.load(fh))
    except OSError as exc:
        raise IOErrorWrapped(f"cannot read {path}: {exc}") from exc
