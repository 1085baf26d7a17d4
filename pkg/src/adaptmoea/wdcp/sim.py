"""Event-driven warehouse simulation.

Inbound trucks dock, their pallets are put away by the product placement
algorithm (PPA), outbound trucks dock and have their manifests picked. A
single FIFO task queue feeds a pool of material-handling resources; docks
are assigned first-free with a FIFO waiting line.

PPA rules work on storage bins (one bin per hall and storage class). A bin
is represented by its nearest free slot, so slots in the same bin never
compete with each other. Each rule scores the remaining candidate bins and
keeps those within ``delta_i`` of the best score, relative to the score
range; rules run in the genome's order. ``delta_5`` then blends travel time
against dimensional waste to pick the final bin.

    rule 0  nearest-to-dock   score = travel minutes of the bin's nearest slot
    rule 1  best-fit          score = normalized slack in width plus height
    rule 2  zone-affinity     score = 0 in the product's preferred hall, else 1
    rule 3  load-balancing    score = occupied fraction of the bin's hall
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from adaptmoea.errors import ConfigError
from adaptmoea.wdcp.genome import WdcpGenome, decode_genome, genome_length
from adaptmoea.wdcp.scenario import SimScenario

ON_TIME = 30.0
LATE = 120.0


def tardiness_factor(delay: float) -> float:
    if delay < ON_TIME:
        return 0.0
    if delay <= LATE:
        return 0.5
    return 1.0


@dataclass
class SimResult:
    tardiness: float
    resource_cost: float
    unplaceable_count: int
    short_picks: int = 0
    trucks_scored: int = 0

    def objectives(self) -> np.ndarray:
        return np.array([self.tardiness, self.resource_cost, float(self.unplaceable_count)])


class _Bin:
    __slots__ = ("hall", "width", "height", "free")

    def __init__(self, hall, width, height):
        self.hall, self.width, self.height = hall, width, height
        self.free: list = []  # heap of (travel, slot)


class WarehouseSim:
    """One simulation run. Use :func:`run_simulation` for the plain call."""

    def __init__(self, genome: WdcpGenome, scenario: SimScenario, check: bool = False):
        if len(genome.resource_counts) != len(scenario.resources):
            raise ConfigError("genome and scenario disagree on resource types")
        if genome.storage_alloc.shape != (len(scenario.halls), len(scenario.storage_classes)):
            raise ConfigError("genome and scenario disagree on the storage grid")
        self.g = genome
        self.deltas = [float(v) for v in genome.deltas]
        self.sc = scenario
        self.check = check
        self.rng = np.random.default_rng(scenario.seed)
        self._build_layout()
        self.max_w = max(c.width for c in scenario.storage_classes)
        self.max_h = max(c.height for c in scenario.storage_classes)

        # resources: fastest first when several are idle
        self.speed = []
        self.rtype = []
        for i, (r, z) in enumerate(zip(scenario.resources, genome.resource_counts)):
            self.speed += [r.speed] * int(z)
            self.rtype += [i] * int(z)
        self.idle = sorted(range(len(self.speed)), key=lambda r: (-self.speed[r], r))
        self.busy: set[int] = set()

        self.tasks: deque = deque()
        self.events: list = []
        self._seq = 0
        self.free_docks = scenario.n_docks
        self.dock_queue: deque = deque()
        self.remaining: dict[int, int] = {}
        self.departure: dict[int, float] = {}
        self.stock: list[list] = [[] for _ in scenario.products]
        self.unplaceable = 0
        self.short_picks = 0

    def _build_layout(self):
        sc = self.sc
        self.bins: list[_Bin] = []
        self.slot_travel = []
        self.slot_bin = []
        self.hall_cap = np.zeros(len(sc.halls), dtype=int)
        self.hall_used = np.zeros(len(sc.halls), dtype=int)
        for h, hall in enumerate(sc.halls):
            pos = 0
            for c, cls in enumerate(sc.storage_classes):
                b = _Bin(h, cls.width, cls.height)
                for _ in range(int(self.g.storage_alloc[h, c])):
                    travel = hall.base_travel + pos * hall.slot_step
                    slot = len(self.slot_travel)
                    self.slot_travel.append(travel)
                    self.slot_bin.append(len(self.bins))
                    b.free.append((travel, slot))
                    pos += 1
                heapq.heapify(b.free)
                self.bins.append(b)
            self.hall_cap[h] = pos
        self.mean_travel = float(np.mean(self.slot_travel)) if self.slot_travel else float(
            np.mean([h.base_travel for h in sc.halls])
        )

    # -- placement -------------------------------------------------------------

    def choose_bin(self, product: int) -> int | None:
        """PPA decision for one pallet; ``None`` when nothing fits."""
        p = self.sc.products[product]
        cands = [
            i for i, b in enumerate(self.bins)
            if b.free and b.width >= p.width and b.height >= p.height
        ]
        if not cands:
            return None
        d = self.deltas
        for rule in self.g.rule_order:
            if len(cands) == 1:
                break
            scores = [self._score(rule, i, p) for i in cands]
            lo, hi = min(scores), max(scores)
            cut = lo + d[rule] * (hi - lo)
            cands = [i for i, s in zip(cands, scores) if s <= cut + 1e-12]
        if len(cands) == 1:
            return cands[0]
        travel = [self.bins[i].free[0][0] for i in cands]
        waste = [self._score(1, i, p) for i in cands]
        t_lo, t_span = min(travel), (max(travel) - min(travel)) or 1.0
        w_lo, w_span = min(waste), (max(waste) - min(waste)) or 1.0
        blend = d[4]
        best = min(
            range(len(cands)),
            key=lambda k: (
                blend * (travel[k] - t_lo) / t_span + (1 - blend) * (waste[k] - w_lo) / w_span,
                cands[k],
            ),
        )
        return cands[best]

    def _score(self, rule, i, p):
        b = self.bins[i]
        if rule == 0:
            return b.free[0][0]
        if rule == 1:
            return (b.width - p.width) / self.max_w + (b.height - p.height) / self.max_h
        if rule == 2:
            return 0.0 if b.hall == p.zone else 1.0
        cap = self.hall_cap[b.hall]
        return self.hall_used[b.hall] / cap if cap else 1.0

    def place_now(self, product: int) -> int | None:
        i = self.choose_bin(product)
        if i is None:
            return None
        travel, slot = heapq.heappop(self.bins[i].free)
        self.hall_used[self.bins[i].hall] += 1
        heapq.heappush(self.stock[product], (travel, slot))
        return slot

    # -- event machinery -------------------------------------------------------

    def _push(self, t, kind, payload):
        heapq.heappush(self.events, (t, self._seq, kind, payload))
        self._seq += 1

    def _duration(self, travel, res):
        j = self.sc.handling_jitter
        noise = 1.0 + j * (2.0 * self.rng.random() - 1.0) if j else 1.0
        return (self.sc.handling_time + 2.0 * travel / self.speed[res]) * noise

    def _dock(self, k, t):
        truck = self.sc.trucks[k]
        self.free_docks -= 1
        self.remaining[k] = len(truck.manifest)
        if not truck.manifest:
            self._depart(k, t)
            return
        op = "put" if truck.kind == "inbound" else "pick"
        for prod in truck.manifest:
            self.tasks.append((op, k, prod))

    def _depart(self, k, t):
        self.departure[k] = t
        self.free_docks += 1
        if self.dock_queue:
            self._dock(self.dock_queue.popleft(), t)

    def _finish(self, k, t):
        self.remaining[k] -= 1
        if self.remaining[k] == 0:
            self._depart(k, t)

    def _dispatch(self, t):
        while self.tasks and self.idle:
            op, k, prod = self.tasks.popleft()
            if op == "pick" and not self.stock[prod]:
                self.short_picks += 1
                self._finish(k, t)
                continue
            res = self.idle.pop(0)
            self.busy.add(res)
            slot = None
            if op == "put":
                slot = self.place_now(prod)
                if slot is None:
                    if t >= self.sc.warmup:
                        self.unplaceable += 1
                    travel = self.mean_travel
                else:
                    travel = self.slot_travel[slot]
                self._push(t + self._duration(travel, res), "done", (res, k, None))
            else:
                travel, slot = heapq.heappop(self.stock[prod])
                self._push(t + self._duration(travel, res), "done", (res, k, slot))

    def _release(self, res, slot):
        self.busy.discard(res)
        self.idle.append(res)
        self.idle.sort(key=lambda r: (-self.speed[r], r))
        if slot is not None:
            b = self.slot_bin[slot]
            heapq.heappush(self.bins[b].free, (self.slot_travel[slot], slot))
            self.hall_used[self.bins[b].hall] -= 1

    def _audit(self):
        for h in range(len(self.sc.halls)):
            free = sum(len(b.free) for b in self.bins if b.hall == h)
            assert free + self.hall_used[h] == self.hall_cap[h], "slot conservation broken"
        for i, z in enumerate(self.g.resource_counts):
            n = sum(1 for r in self.idle if self.rtype[r] == i) + sum(
                1 for r in self.busy if self.rtype[r] == i
            )
            assert n == z, "resource conservation broken"

    def run(self) -> SimResult:
        sc = self.sc
        for prod in sc.initial_stock:
            self.place_now(prod)
        for k, truck in enumerate(sc.trucks):
            if truck.arrival <= sc.horizon:
                self._push(truck.arrival, "arrive", k)
        while self.events:
            t, _, kind, payload = heapq.heappop(self.events)
            if t > sc.horizon:
                break
            if kind == "arrive":
                if self.free_docks > 0:
                    self._dock(payload, t)
                else:
                    self.dock_queue.append(payload)
            else:
                res, k, slot = payload
                self._release(res, slot)
                self._finish(k, t)
            self._dispatch(t)
            if self.check:
                self._audit()
        return self._collect()

    def _collect(self) -> SimResult:
        sc = self.sc
        tard = 0.0
        scored = 0
        for k, truck in enumerate(sc.trucks):
            if truck.kind != "outbound" or truck.arrival < sc.warmup or truck.arrival > sc.horizon:
                continue
            delay = self.departure.get(k, sc.horizon) - truck.arrival
            tard += tardiness_factor(delay) * delay
            scored += 1
        cost = float(sum(r.cost * z for r, z in zip(sc.resources, self.g.resource_counts)))
        return SimResult(tard, cost, self.unplaceable, self.short_picks, scored)


def run_simulation(genome: WdcpGenome, scenario: SimScenario, check: bool = False) -> SimResult:
    return WarehouseSim(genome, scenario, check=check).run()


def wdcp_lite_eval(x, scenario: SimScenario) -> np.ndarray:
    """(tardiness, resource cost, unplaceable count) for one decision vector."""
    return run_simulation(decode_genome(x, scenario), scenario).objectives()


class WdcpEvaluator:
    """Picklable ``x -> objectives`` closure over a scenario."""

    def __init__(self, scenario: SimScenario):
        self.scenario = scenario

    def __call__(self, x):
        return wdcp_lite_eval(x, self.scenario)


def wdcp_lite_problem(scenario: SimScenario | None = None, variant: str | None = None,
                      seed: int = 0, scenario_file=None):
    from adaptmoea.problems import ProblemSpec
    from adaptmoea.wdcp.scenario import default_scenario, load_scenario, scenario_variant

    if scenario is None:
        scenario = load_scenario(scenario_file) if scenario_file else default_scenario(seed)
    if variant:
        scenario = scenario_variant(scenario, variant)
    n = genome_length(scenario)
    return ProblemSpec("wdcp-lite", n, 3, np.zeros(n), np.ones(n), WdcpEvaluator(scenario))
