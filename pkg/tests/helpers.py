"""Shared fixtures-by-function: reference graphs, oracles, metrics."""

from __future__ import annotations

import itertools

import numpy as np

from mixgraph import Graph, NodeType

T = NodeType


def rel_linf(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.max(np.abs(b)) if b.size else 0.0
    err = np.max(np.abs(a - b)) if b.size else 0.0
    if scale == 0.0:
        return float(err)
    return float(err / scale)


def three_track_graph() -> Graph:
    """21-node three-track mix graph whose shortest type string is iecgmregro.

    Three tracks run eq -> compressor -> gain into a mix; the mix feeds a
    reverb -> eq -> gain return, two tracks also send to reverbs that meet in
    a second eq, and a final reverb collects both returns before the output.
    Greedy scheduling takes the two track reverbs before the mix and needs one
    extra step.
    """
    g = Graph()
    ins = [g.add(T.IN) for _ in range(3)]
    ends = []
    for i in ins:
        start, end = g.add_serial_chain([T.EQ, T.COMPRESSOR, T.GAIN])
        g.connect(i, start)
        ends.append(end)
    mix = g.add(T.MIX)
    for e in ends:
        g.connect(e, mix)
    bus_reverb = g.add(T.REVERB)
    g.connect(mix, bus_reverb)
    sends = []
    for e in ends[1:]:
        r = g.add(T.REVERB)
        g.connect(e, r)
        sends.append(r)
    bus_eq = g.add(T.EQ)
    g.connect(bus_reverb, bus_eq)
    send_eq = g.add(T.EQ)
    for r in sends:
        g.connect(r, send_eq)
    bus_gain = g.add(T.GAIN)
    g.connect(bus_eq, bus_gain)
    final = g.add(T.REVERB)
    g.connect(bus_gain, final)
    g.connect(send_eq, final)
    out = g.add(T.OUT)
    g.connect(final, out)
    return g


def exhaustive_min_steps(g: Graph) -> int:
    """Shortest valid schedule by plain depth-first enumeration of type strings.

    Independent of the library's search: no memoization, no bounds, and no
    maximal-subset shortcut.  Every step may process any non-empty subset of
    computable nodes of one type; strings are tried in increasing length.
    """
    n = g.num_nodes
    types = g.node_types
    preds = [set() for _ in range(n)]
    for e in g.edges:
        preds[e.dst].add(e.src)
    inputs = frozenset(i for i in range(n) if types[i] == T.IN)
    middle = frozenset(i for i in range(n) if types[i] not in (T.IN, T.OUT))

    def ready(done):
        return [v for v in middle - done if preds[v] <= done]

    def search(done, budget):
        if middle <= done:
            return True
        if budget == 0:
            return False
        cand = ready(done)
        for t in {types[v] for v in cand}:
            group = [v for v in cand if types[v] == t]
            for size in range(len(group), 0, -1):
                for subset in itertools.combinations(group, size):
                    if search(done | frozenset(subset), budget - 1):
                        return True
        return False

    budget = 0
    while not search(inputs, budget):
        budget += 1
    return budget + 1  # the output step
