"""Mutable audio processing graphs and their flat array form."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    pass


class NodeType(enum.IntEnum):
    IN = 0
    OUT = 1
    MIX = 2
    GAIN = 3
    EQ = 4
    COMPRESSOR = 5
    NOISEGATE = 6
    IMAGER = 7
    REVERB = 8
    DELAY = 9

    @property
    def tag(self) -> str:
        return _TAGS[self]

    @property
    def code(self) -> str:
        return _CODES[self]

    @property
    def width(self) -> int:
        return PARAM_WIDTHS[self]

    @classmethod
    def parse(cls, value: "NodeType | str | int") -> "NodeType":
        if isinstance(value, NodeType):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in _BY_TAG:
                return _BY_TAG[key]
            if key in _BY_CODE:
                return _BY_CODE[key]
            raise GraphError(f"unknown node type {value!r}")
        try:
            return cls(int(value))
        except ValueError:
            raise GraphError(f"unknown node type {value!r}") from None


_TAGS = {
    NodeType.IN: "in",
    NodeType.OUT: "out",
    NodeType.MIX: "mix",
    NodeType.GAIN: "gain",
    NodeType.EQ: "eq",
    NodeType.COMPRESSOR: "compressor",
    NodeType.NOISEGATE: "noisegate",
    NodeType.IMAGER: "imager",
    NodeType.REVERB: "reverb",
    NodeType.DELAY: "delay",
}
_CODES = {
    NodeType.IN: "i",
    NodeType.OUT: "o",
    NodeType.MIX: "m",
    NodeType.GAIN: "g",
    NodeType.EQ: "e",
    NodeType.COMPRESSOR: "c",
    NodeType.NOISEGATE: "n",
    NodeType.IMAGER: "s",
    NodeType.REVERB: "r",
    NodeType.DELAY: "d",
}
_BY_TAG = {v: k for k, v in _TAGS.items()}
_BY_CODE = {v: k for k, v in _CODES.items()}

PARAM_WIDTHS = {
    NodeType.IN: 0,
    NodeType.OUT: 0,
    NodeType.MIX: 0,
    NodeType.GAIN: 2,
    NodeType.EQ: 1024,
    NodeType.COMPRESSOR: 4,
    NodeType.NOISEGATE: 4,
    NodeType.IMAGER: 1,
    NodeType.REVERB: 768,
    NodeType.DELAY: 880,
}

PARAMETERIZED = tuple(t for t in NodeType if PARAM_WIDTHS[t] > 0)

# (alpha, threshold, half knee width, ratio), natural-log energy units
DYNAMICS_DEFAULT = (0.995, -1.0, 0.5, 4.0)

DEFAULT_SAMPLE_RATE = 44100

# multitap delay layout: 2 channels x 20 taps x (re z, im z, 20 log-magnitudes)
DELAY_CHANNELS = 2
DELAY_TAPS = 20
DELAY_FIR_BINS = 20
DELAY_TAP_WIDTH = 2 + DELAY_FIR_BINS


def delay_geometry(sample_rate: int) -> tuple[int, int]:
    """Return ``(total_length, window_length)`` of the multitap delay in samples."""
    return 2 * sample_rate, int(round(0.1 * sample_rate))


def default_delay_row(sample_rate: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    n_total, window = delay_geometry(sample_rate)
    row = np.zeros((DELAY_CHANNELS, DELAY_TAPS, DELAY_TAP_WIDTH))
    centers = np.arange(DELAY_TAPS) * window + window // 2
    z = np.exp(-2j * np.pi * centers / n_total)
    row[:, :, 0] = z.real
    row[:, :, 1] = z.imag
    return row.reshape(-1)


def default_row(t: NodeType, sample_rate: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    if t in (NodeType.COMPRESSOR, NodeType.NOISEGATE):
        return np.array(DYNAMICS_DEFAULT, dtype=float)
    if t == NodeType.DELAY:
        return default_delay_row(sample_rate)
    return np.zeros(PARAM_WIDTHS[t])


class ParamStore:
    """Per-type parameter matrices, row ``l`` of ``P[t]`` belonging to the
    ``l``-th node of type ``t`` in node order."""

    def __init__(self, data: dict | None = None):
        self._data: dict[NodeType, np.ndarray] = {}
        for t, rows in (data or {}).items():
            self[t] = rows

    @classmethod
    def defaults(cls, node_types: Iterable, sample_rate: int = DEFAULT_SAMPLE_RATE) -> "ParamStore":
        counts: dict[NodeType, int] = {}
        for t in node_types:
            t = NodeType.parse(t)
            counts[t] = counts.get(t, 0) + 1
        store = cls()
        for t in PARAMETERIZED:
            n = counts.get(t, 0)
            store[t] = np.tile(default_row(t, sample_rate), (n, 1))
        return store

    def __getitem__(self, t) -> np.ndarray:
        t = NodeType.parse(t)
        if t not in self._data:
            return np.zeros((0, PARAM_WIDTHS[t]))
        return self._data[t]

    def __setitem__(self, t, rows) -> None:
        t = NodeType.parse(t)
        arr = np.asarray(rows, dtype=float)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, PARAM_WIDTHS[t])
        if arr.ndim != 2 or arr.shape[1] != PARAM_WIDTHS[t]:
            raise GraphError(
                f"{t.tag} parameters must have width {PARAM_WIDTHS[t]}, got shape {arr.shape}"
            )
        self._data[t] = arr

    def __contains__(self, t) -> bool:
        return NodeType.parse(t) in self._data

    def types(self) -> list[NodeType]:
        return sorted(self._data)

    def items(self):
        return [(t, self._data[t]) for t in self.types()]

    def copy(self) -> "ParamStore":
        return ParamStore({t: a.copy() for t, a in self._data.items()})

    def flatten(self, types: Sequence[NodeType] | None = None) -> np.ndarray:
        types = self.types() if types is None else [NodeType.parse(t) for t in types]
        if not types:
            return np.zeros(0)
        return np.concatenate([self[t].reshape(-1) for t in types])

    def unflatten(self, vector: np.ndarray, types: Sequence[NodeType] | None = None) -> "ParamStore":
        """Return a copy with the given types overwritten from ``vector``."""
        types = self.types() if types is None else [NodeType.parse(t) for t in types]
        out = self.copy()
        offset = 0
        for t in types:
            shape = self[t].shape
            size = shape[0] * shape[1]
            out[t] = np.asarray(vector[offset:offset + size], dtype=float).reshape(shape)
            offset += size
        if offset != len(vector):
            raise GraphError("parameter vector length does not match the store")
        return out

    def validate(self, node_types: Sequence) -> None:
        """Check row counts against ``node_types`` and the value ranges."""
        counts = {t: 0 for t in NodeType}
        for t in node_types:
            counts[NodeType.parse(t)] += 1
        for t in PARAMETERIZED:
            rows = self[t]
            if rows.shape[0] != counts[t]:
                raise GraphError(
                    f"{t.tag}: {rows.shape[0]} parameter rows for {counts[t]} nodes"
                )
            if not np.all(np.isfinite(rows)):
                raise GraphError(f"{t.tag}: non-finite parameter values")
        for t in (NodeType.COMPRESSOR, NodeType.NOISEGATE):
            check_dynamics_rows(self[t], t.tag)
        check_delay_rows(self[NodeType.DELAY])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamStore):
            return NotImplemented
        keys = {t for t in PARAMETERIZED if self[t].size or other[t].size}
        return all(
            self[t].shape == other[t].shape and np.array_equal(self[t], other[t]) for t in keys
        )

    def __repr__(self) -> str:
        shapes = ", ".join(f"{t.tag}={a.shape}" for t, a in self.items())
        return f"ParamStore({shapes})"


def check_dynamics_rows(rows: np.ndarray, name: str = "dynamics") -> None:
    rows = np.atleast_2d(rows)
    if rows.size == 0:
        return
    alpha, _, knee, ratio = rows.T
    if np.any((alpha <= 0) | (alpha >= 1)):
        raise GraphError(f"{name}: alpha must lie in (0, 1)")
    if np.any(knee <= 0):
        raise GraphError(f"{name}: knee half width must be positive")
    if np.any(ratio < 1):
        raise GraphError(f"{name}: ratio must be >= 1")


def check_delay_rows(rows: np.ndarray, tol: float = 1e-9) -> None:
    rows = np.atleast_2d(rows)
    if rows.size == 0:
        return
    taps = rows.reshape(rows.shape[0], DELAY_CHANNELS, DELAY_TAPS, DELAY_TAP_WIDTH)
    mag = np.hypot(taps[..., 0], taps[..., 1])
    if np.any(mag > 1 + tol):
        raise GraphError("delay: |z| must not exceed 1")


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    outlet: int = 0
    inlet: int = 0


@dataclass
class Graph:
    """Mutable multigraph of typed processor nodes.

    Node ids are dense and follow insertion order.  Parallel edges are kept;
    each contributes one summand to the destination's input.
    """

    node_types: list[NodeType] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return len(self.node_types)

    def add(self, t) -> int:
        self.node_types.append(NodeType.parse(t))
        return len(self.node_types) - 1

    def add_serial_chain(self, types: Sequence) -> tuple[int, int]:
        if len(types) == 0:
            raise GraphError("serial chain needs at least one node type")
        ids = [self.add(t) for t in types]
        for a, b in zip(ids[:-1], ids[1:]):
            self.connect(a, b)
        return ids[0], ids[-1]

    def connect(self, src: int, dst: int, outlet: int = 0, inlet: int = 0) -> None:
        for node in (src, dst):
            if not 0 <= node < self.num_nodes:
                raise GraphError(f"unknown node id {node}")
        if self.node_types[dst] == NodeType.IN:
            raise GraphError(f"cannot connect into input node {dst}")
        if self.node_types[src] == NodeType.OUT:
            raise GraphError(f"cannot connect out of output node {src}")
        self.edges.append(Edge(src, dst, outlet, inlet))

    def nodes_of(self, t) -> list[int]:
        t = NodeType.parse(t)
        return [i for i, nt in enumerate(self.node_types) if nt == t]

    def validate(self) -> None:
        n = self.num_nodes
        for e in self.edges:
            for node in (e.src, e.dst):
                if not 0 <= node < n:
                    raise GraphError(f"edge {e} refers to unknown node id {node}")
            if self.node_types[e.dst] == NodeType.IN:
                raise GraphError(f"input node {e.dst} has an incoming edge")
            if self.node_types[e.src] == NodeType.OUT:
                raise GraphError(f"output node {e.src} has an outgoing edge")
            if e.outlet != 0 or e.inlet != 0:
                raise GraphError(
                    f"edge {e.src}->{e.dst} uses channel ({e.outlet}, {e.inlet}); "
                    "only single-input single-output processors are available"
                )
        cycle = find_cycle(n, [(e.src, e.dst) for e in self.edges])
        if cycle is not None:
            raise GraphError("graph has a cycle through nodes " + " -> ".join(map(str, cycle)))

    def to_flat(self, sample_rate: int = DEFAULT_SAMPLE_RATE, params: ParamStore | None = None) -> "FlatGraph":
        self.validate()
        node_types = np.array([int(t) for t in self.node_types], dtype=np.int64)
        if self.edges:
            edge_index = np.array([[e.src, e.dst] for e in self.edges], dtype=np.int64).T
            edge_types = np.array([[e.outlet, e.inlet] for e in self.edges], dtype=np.int64).T
        else:
            edge_index = np.zeros((2, 0), dtype=np.int64)
            edge_types = np.zeros((2, 0), dtype=np.int64)
        if params is None:
            params = ParamStore.defaults(self.node_types, sample_rate)
        params.validate(self.node_types)
        return FlatGraph(node_types, edge_index, edge_types, params)

    def copy(self) -> "Graph":
        return Graph(list(self.node_types), list(self.edges))


def find_cycle(num_nodes: int, edges: Sequence[tuple[int, int]]) -> list[int] | None:
    """Return the node ids of one directed cycle, or None for a DAG."""
    succ: list[list[int]] = [[] for _ in range(num_nodes)]
    for s, d in edges:
        succ[s].append(d)
    state = [0] * num_nodes  # 0 new, 1 on stack, 2 done
    for root in range(num_nodes):
        if state[root]:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                state[node] = 2
            elif state[nxt] == 1:
                return path[path.index(nxt):] + [nxt]
            elif state[nxt] == 0:
                state[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(succ[nxt])))
    return None


def kahn_order(num_nodes: int, edges: Sequence[tuple[int, int]]) -> list[int]:
    """Topological order by Kahn's algorithm, lowest row first among ready nodes.

    Returns fewer than ``num_nodes`` entries when the graph is cyclic.
    """
    import heapq

    indeg = [0] * num_nodes
    succ: list[list[int]] = [[] for _ in range(num_nodes)]
    for s, d in edges:
        succ[s].append(d)
        indeg[d] += 1
    ready = [i for i in range(num_nodes) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for d in succ[node]:
            indeg[d] -= 1
            if indeg[d] == 0:
                heapq.heappush(ready, d)
    return order


@dataclass(frozen=True, eq=False)
class FlatGraph:
    """Array form of a graph: node types, edge index, edge types, parameters."""

    node_types: np.ndarray
    edge_index: np.ndarray
    edge_types: np.ndarray
    params: ParamStore

    def __post_init__(self):
        for name in ("node_types", "edge_index", "edge_types"):
            getattr(self, name).setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return len(self.node_types)

    @property
    def num_edges(self) -> int:
        return self.edge_index.shape[1]

    @property
    def num_inputs(self) -> int:
        return int(np.sum(self.node_types == NodeType.IN))

    @property
    def num_outputs(self) -> int:
        return int(np.sum(self.node_types == NodeType.OUT))

    def types(self) -> list[NodeType]:
        return [NodeType(int(t)) for t in self.node_types]

    def edge_list(self) -> list[tuple[int, int]]:
        return [(int(s), int(d)) for s, d in self.edge_index.T]

    def predecessors(self) -> list[list[int]]:
        pred: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for s, d in self.edge_list():
            pred[d].append(s)
        return pred

    def to_graph(self) -> Graph:
        g = Graph(self.types())
        for (s, d), (k, l) in zip(self.edge_list(), self.edge_types.T):
            g.edges.append(Edge(s, d, int(k), int(l)))
        return g

    def with_params(self, params: ParamStore) -> "FlatGraph":
        params.validate(self.node_types)
        return FlatGraph(self.node_types, self.edge_index, self.edge_types, params)


def disjoint_union(graphs: Sequence[Graph]) -> Graph:
    out = Graph()
    for g in graphs:
        g.validate()
        offset = out.num_nodes
        out.node_types.extend(g.node_types)
        for e in g.edges:
            out.edges.append(Edge(e.src + offset, e.dst + offset, e.outlet, e.inlet))
    return out


def union_params(stores: Sequence[ParamStore]) -> ParamStore:
    """Concatenate parameter stores in the same order as :func:`disjoint_union`."""
    out = ParamStore()
    for t in PARAMETERIZED:
        rows = [s[t] for s in stores]
        out[t] = np.concatenate(rows, axis=0) if rows else np.zeros((0, PARAM_WIDTHS[t]))
    return out
