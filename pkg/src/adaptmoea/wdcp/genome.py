"""Real-coded genome for the warehouse problem and its decoder.

Layout of the unit-box vector (desk scale, 23 genes)::

    [0:4]    rule-order keys       -> permutation of the 4 placement rules
    [4:9]    rule parameters       -> delta_1..delta_5 in [0, 1]
    [9:9+R]  resource genes        -> integer count per resource type
    [...]    storage genes         -> per hall, one weight per storage class
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from adaptmoea.wdcp.scenario import SimScenario

N_RULES = 4
N_DELTAS = 5
RULE_NAMES = ("nearest-to-dock", "best-fit", "zone-affinity", "load-balancing")


@dataclass
class WdcpGenome:
    rule_order: tuple[int, ...]
    deltas: np.ndarray
    resource_counts: np.ndarray
    storage_alloc: np.ndarray  # (halls, classes) slot counts


def genome_length(scenario: SimScenario) -> int:
    return N_RULES + N_DELTAS + len(scenario.resources) + len(scenario.halls) * len(
        scenario.storage_classes
    )


def largest_remainder(weights, total: int) -> np.ndarray:
    """Integer split of ``total`` proportional to ``weights``.

    Leftover units go to the largest fractional parts, lowest index first on
    ties. All-zero weights put everything on the first class.
    """
    w = np.asarray(weights, dtype=float)
    out = np.zeros(w.size, dtype=int)
    s = w.sum()
    if s <= 0:
        out[0] = total
        return out
    quota = w / s * total
    out = np.floor(quota).astype(int)
    rest = total - int(out.sum())
    frac = quota - out
    order = sorted(range(w.size), key=lambda i: (-frac[i], i))
    for i in order[:rest]:
        out[i] += 1
    return out


def decode_genome(x, scenario: SimScenario) -> WdcpGenome:
    x = np.asarray(x, dtype=float)
    if x.size != genome_length(scenario):
        raise ValueError(f"genome has {x.size} genes, scenario needs {genome_length(scenario)}")
    keys = x[:N_RULES]
    order = tuple(int(i) for i in np.argsort(keys, kind="stable"))
    deltas = x[N_RULES : N_RULES + N_DELTAS].copy()
    pos = N_RULES + N_DELTAS
    counts = []
    for r, gene in zip(scenario.resources, x[pos : pos + len(scenario.resources)]):
        levels = r.max_count - r.min_count + 1
        counts.append(r.min_count + min(int(np.floor(gene * levels)), levels - 1))
    pos += len(scenario.resources)
    n_cls = len(scenario.storage_classes)
    alloc = np.array([
        largest_remainder(x[pos + h * n_cls : pos + (h + 1) * n_cls], hall.capacity)
        for h, hall in enumerate(scenario.halls)
    ])
    return WdcpGenome(order, deltas, np.array(counts, dtype=int), alloc)


def audit_genome(g: WdcpGenome, scenario: SimScenario) -> list[str]:
    """List every way ``g`` violates the decode contract (empty if valid)."""
    problems = []
    if sorted(g.rule_order) != list(range(N_RULES)):
        problems.append(f"rule order {g.rule_order} is not a permutation")
    if np.any(g.deltas < 0) or np.any(g.deltas > 1):
        problems.append("rule parameter outside [0, 1]")
    for r, z in zip(scenario.resources, g.resource_counts):
        if not r.min_count <= z <= r.max_count:
            problems.append(f"{r.name} count {z} outside [{r.min_count}, {r.max_count}]")
    for h, hall in enumerate(scenario.halls):
        if np.any(g.storage_alloc[h] < 0):
            problems.append(f"hall {h} has a negative slot count")
        if g.storage_alloc[h].sum() != hall.capacity:
            problems.append(f"hall {h} slots sum to {g.storage_alloc[h].sum()}, not {hall.capacity}")
    return problems
