"""Exact offline welfare optimum at desk scale.

For a fixed admission set the cheapest feasible schedule is a min-cost flow
(source -> EV -> slot -> sink) on energies quantized to an integer lattice,
solved by successive shortest augmenting paths with potentials.  The outer
search over admission vectors is branch-and-bound ordered by value density,
with a brute-force enumerator kept as an independent cross-check.
"""

from __future__ import annotations

import heapq
import itertools
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import QuantizationError, TooLargeError
from .model import ChargingSchedule, EVRequest, Instance, StationConfig

_BNB_LIMIT = 24
_ENUM_LIMIT = 12
# prune only branches that are worse by a clear margin so float rounding in
# the bound can never discard the true optimum (keeps parity with the
# brute-force enumerator exact)
_PRUNE_MARGIN = 1e-9


class _MinCostFlow:
    """Successive shortest paths with Johnson potentials; float costs >= 0."""

    def __init__(self, n: int):
        self.n = n
        self.graph: List[List[int]] = [[] for _ in range(n)]
        # arcs stored flat: to, residual capacity, unit cost
        self.to: List[int] = []
        self.cap: List[int] = []
        self.cost: List[float] = []

    def add_arc(self, u: int, v: int, cap: int, cost: float) -> int:
        idx = len(self.to)
        self.graph[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.graph[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(0)
        self.cost.append(-cost)
        return idx

    def min_cost_flow(self, s: int, t: int, target: int) -> Tuple[int, float]:
        """Push up to ``target`` units; returns (flow pushed, total cost)."""
        n = self.n
        potential = [0.0] * n
        flow, total_cost = 0, 0.0
        while flow < target:
            dist = [math.inf] * n
            parent_arc = [-1] * n
            dist[s] = 0.0
            heap = [(0.0, s)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u] + 1e-15:
                    continue
                for idx in self.graph[u]:
                    if self.cap[idx] <= 0:
                        continue
                    v = self.to[idx]
                    nd = d + max(self.cost[idx] + potential[u] - potential[v], 0.0)
                    if nd < dist[v] - 1e-15:
                        dist[v] = nd
                        parent_arc[v] = idx
                        heapq.heappush(heap, (nd, v))
            if parent_arc[t] == -1:
                break
            for v in range(n):
                if dist[v] < math.inf:
                    potential[v] += dist[v]
            # bottleneck along the path
            push = target - flow
            v = t
            while v != s:
                idx = parent_arc[v]
                push = min(push, self.cap[idx])
                v = self.to[idx ^ 1]
            v = t
            while v != s:
                idx = parent_arc[v]
                self.cap[idx] -= push
                self.cap[idx ^ 1] += push
                total_cost += push * self.cost[idx]
                v = self.to[idx ^ 1]
            flow += push
        return flow, total_cost

    def has_negative_cycle(self) -> bool:
        """Bellman-Ford over the residual graph (test hook)."""
        dist = [0.0] * self.n
        arcs = [
            (self.to[i ^ 1], self.to[i], self.cost[i])
            for i in range(len(self.to)) if self.cap[i] > 0
        ]
        for it in range(self.n):
            changed = False
            for u, v, c in arcs:
                if dist[u] + c < dist[v] - 1e-9:
                    dist[v] = dist[u] + c
                    changed = True
            if not changed:
                return False
        return True


def _units(x: float, epsilon: float, what: str) -> int:
    u = x / epsilon
    if abs(u - round(u)) > 1e-9 * max(1.0, abs(u)):
        raise QuantizationError(f"{what}={x} not divisible by epsilon={epsilon}")
    return int(round(u))


def min_cost_schedule_flow(
    config: StationConfig,
    admitted: Sequence[EVRequest],
    epsilon: float,
) -> Optional[Tuple[float, ChargingSchedule]]:
    """Cheapest schedule fully charging ``admitted``; None when infeasible."""
    admitted = sorted(admitted, key=lambda r: r.id)
    slots = sorted({t for r in admitted for t in r.window})
    slot_index = {t: i for i, t in enumerate(slots)}
    n_nodes = 2 + len(admitted) + len(slots)
    source, sink = 0, 1
    net = _MinCostFlow(n_nodes)
    cap_units = _units(config.capacity, epsilon, "capacity")
    demand = 0
    ev_arcs: Dict[int, List[Tuple[int, int]]] = {}
    for i, req in enumerate(admitted):
        ev_node = 2 + i
        e_units = _units(req.energy, epsilon, f"energy[{req.id}]")
        r_units = _units(req.rate, epsilon, f"rate[{req.id}]")
        demand += e_units
        net.add_arc(source, ev_node, e_units, 0.0)
        arcs = []
        for t in req.window:
            idx = net.add_arc(ev_node, 2 + len(admitted) + slot_index[t],
                              r_units, 0.0)
            arcs.append((t, idx))
        ev_arcs[req.id] = arcs
    for t in slots:
        net.add_arc(2 + len(admitted) + slot_index[t], sink, cap_units,
                    config.prices[t] * epsilon)
    flow, cost = net.min_cost_flow(source, sink, demand)
    if flow < demand:
        return None
    allocations: Dict[int, Tuple[Tuple[int, float], ...]] = {}
    for req in admitted:
        alloc = []
        for t, idx in ev_arcs[req.id]:
            pushed = net.cap[idx ^ 1]  # reverse residual = flow on the arc
            if pushed > 0:
                alloc.append((t, pushed * epsilon))
        allocations[req.id] = tuple(alloc)
    # recompute the money cost in a deterministic slot order
    p = config.prices
    cost = sum(p[t] * y for a in allocations.values() for t, y in a)
    return cost, ChargingSchedule(allocations=allocations)


def _welfare_of(config: StationConfig, subset: Sequence[EVRequest],
                epsilon: float) -> Optional[Tuple[float, ChargingSchedule]]:
    subset = sorted(subset, key=lambda r: r.id)
    res = min_cost_schedule_flow(config, subset, epsilon)
    if res is None:
        return None
    cost, schedule = res
    return sum(r.value for r in subset) - cost, schedule


def offline_opt(instance: Instance, epsilon: float
                ) -> Tuple[float, Tuple[bool, ...], ChargingSchedule]:
    """Maximize admitted value minus energy cost by branch-and-bound over
    admission vectors, exact on the epsilon lattice."""
    requests = instance.requests
    n = len(requests)
    if n > _BNB_LIMIT:
        raise TooLargeError(f"{n} EVs exceeds exact-oracle limit {_BNB_LIMIT}")
    if n == 0:
        return 0.0, (), ChargingSchedule(allocations={})
    config = instance.config
    order = sorted(requests, key=lambda r: -r.density)
    # optimistic per-EV surplus: value minus cheapest-slot cost, capacity-free
    opt_gain = [
        max(0.0, r.value - r.energy * min(config.prices[t] for t in r.window))
        for r in order
    ]
    suffix = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + opt_gain[i]

    best_w = 0.0
    best_set: Tuple[EVRequest, ...] = ()

    def dfs(i: int, chosen: List[EVRequest], value: float, cost: float) -> None:
        nonlocal best_w, best_set
        if value - cost + suffix[i] <= best_w - _PRUNE_MARGIN:
            return
        if i == n:
            return
        req = order[i]
        trial = chosen + [req]
        res = _welfare_of(config, trial, epsilon)
        if res is not None:
            w_new, _ = res
            if w_new > best_w:
                best_w = w_new
                best_set = tuple(trial)
            # exact cost of the enlarged set tightens the bound
            dfs(i + 1, trial, value + req.value, sum(r.value for r in trial) - w_new)
        dfs(i + 1, chosen, value, cost)

    dfs(0, [], 0.0, 0.0)
    if best_set:
        final = _welfare_of(config, best_set, epsilon)
        assert final is not None
        best_w, schedule = final
    else:
        schedule = ChargingSchedule(allocations={})
    chosen_ids = {r.id for r in best_set}
    admissions = tuple(r.id in chosen_ids for r in requests)
    return best_w, admissions, schedule


def enumerate_opt(instance: Instance, epsilon: float) -> float:
    """Brute force over all admission vectors (independent oracle)."""
    n = len(instance.requests)
    if n > _ENUM_LIMIT:
        raise TooLargeError(f"{n} EVs exceeds enumeration limit {_ENUM_LIMIT}")
    best = 0.0
    for k in range(1, n + 1):
        for subset in itertools.combinations(instance.requests, k):
            res = _welfare_of(instance.config, subset, epsilon)
            if res is not None and res[0] > best:
                best = res[0]
    return best


def default_epsilon(instance: Instance) -> float:
    """E_min / 100: fine enough that lattice-aligned instances are exact."""
    if not instance.requests:
        return 1.0
    return min(r.energy for r in instance.requests) / 100.0
