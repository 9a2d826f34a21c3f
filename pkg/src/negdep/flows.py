"""Integer-capacity flow utilities (networkx backed).

Probabilities are scaled to integers at ``1e-12`` resolution before any flow
solve, so the solver never sees floating-point capacities.
"""
from __future__ import annotations

import networkx as nx
import numpy as np

SCALE = 10**12
# one flow unit is 1e-12; accept up to 1e-10 of unrouted mass
SLACK_UNITS = 100


def to_units(p: float) -> int:
    return int(round(float(p) * SCALE))


def max_weight_upset(weights, k: int) -> tuple[np.ndarray, float]:
    """Up-set ``G`` of ``{0,1}^k`` maximizing ``sum_{y in G} weights[y]``.

    Solved as a maximum-weight closure: arcs ``y -> y | e_b`` carry infinite
    capacity, so the source side of a minimum cut is upward closed. The
    returned set is the smallest maximizer (source side of the canonical cut).
    """
    w = np.asarray(weights, dtype=np.float64)
    size = 1 << k
    units = [to_units(x) for x in w]
    G = nx.DiGraph()
    G.add_node("s")
    G.add_node("t")
    for y in range(size):
        G.add_node(y)
        if units[y] > 0:
            G.add_edge("s", y, capacity=units[y])
        elif units[y] < 0:
            G.add_edge(y, "t", capacity=-units[y])
        for b in range(k):
            if not (y >> b) & 1:
                G.add_edge(y, y | (1 << b))  # no capacity attribute = infinite
    _, (S, _) = nx.minimum_cut(G, "s", "t")
    member = np.zeros(size, dtype=bool)
    for v in S:
        if v != "s":
            member[v] = True
    return member, float(w[member].sum())


def transport(supply: dict, demand: dict, edges) -> tuple[int, dict, set]:
    """Max flow from ``supply`` nodes to ``demand`` nodes along ``edges``.

    Capacities are integer units. Returns ``(flow_value, flow, source_side)``
    where ``flow[(a, b)]`` is the routed amount on arc ``a -> b`` and
    ``source_side`` is the set of nodes reachable from the source in the
    final residual network (the canonical minimum cut).
    """
    G = nx.DiGraph()
    G.add_node(("src",))
    G.add_node(("snk",))
    for a, cap in supply.items():
        G.add_edge(("src",), ("Y", a), capacity=cap)
    for b, cap in demand.items():
        G.add_edge(("Z", b), ("snk",), capacity=cap)
    for a, b in edges:
        G.add_edge(("Y", a), ("Z", b))
    R = nx.algorithms.flow.preflow_push(G, ("src",), ("snk",))
    value = R.graph["flow_value"]
    flow = {}
    for a, b in edges:
        f = R[("Y", a)][("Z", b)]["flow"]
        if f > 0:
            flow[(a, b)] = f
    # residual reachability; infinite arcs carry capacity = R.graph['inf']
    seen = {("src",)}
    stack = [("src",)]
    while stack:
        u = stack.pop()
        for v, attr in R[u].items():
            if v not in seen and attr["capacity"] - attr["flow"] > 0:
                seen.add(v)
                stack.append(v)
    return value, flow, seen
