"""Batched-processing schedules.

A schedule splits the nodes into a sequence of subsets ``V_0 .. V_N``: a
partition, causal (every edge points to a strictly later subset), and
homogeneous (one node type per subset).  ``V_0`` holds the inputs and ``V_N``
the outputs, and every other subset is the maximal set of computable nodes of
its type, so a schedule is determined by its type string.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import FlatGraph, NodeType, ParamStore, kahn_order

STRATEGIES = ("one_by_one", "greedy", "beam", "optimal")
DEFAULT_BEAM_WIDTH = 32
OPTIMAL_NODE_CAP = 256


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    type_string: tuple[NodeType, ...]
    subsets: tuple[tuple[int, ...], ...]

    @property
    def num_steps(self) -> int:
        """Number of processing steps ``N``; ``V_0`` is never processed."""
        return len(self.subsets) - 1

    @property
    def code(self) -> str:
        return "".join(t.code for t in self.type_string)

    def step_of(self, num_nodes: int) -> np.ndarray:
        steps = np.full(num_nodes, -1, dtype=np.int64)
        for n, subset in enumerate(self.subsets):
            steps[list(subset)] = n
        return steps

    def __str__(self) -> str:
        return self.code


class _Frontier:
    """Bitset bookkeeping shared by all strategies."""

    def __init__(self, fg: FlatGraph):
        self.fg = fg
        self.n = fg.num_nodes
        self.types = fg.types()
        self.pred_mask = [0] * self.n
        for s, d in fg.edge_list():
            self.pred_mask[d] |= 1 << s
        self.inputs = [i for i, t in enumerate(self.types) if t == NodeType.IN]
        self.outputs = [i for i, t in enumerate(self.types) if t == NodeType.OUT]
        self.start = _mask(self.inputs)
        self.goal = ((1 << self.n) - 1) & ~_mask(self.outputs)
        self.middle = [i for i in range(self.n) if self.types[i] not in (NodeType.IN, NodeType.OUT)]
        self._ready: dict[int, dict[NodeType, int]] = {}
        if not self.inputs:
            raise ScheduleError("graph has no input node")
        if not self.outputs:
            raise ScheduleError("graph has no output node")
        for o in self.outputs:
            if self.pred_mask[o] & _mask(self.outputs):
                raise ScheduleError(f"output node {o} is fed by another output")

    def computable(self, done: int) -> dict[NodeType, int]:
        """Maximal computable subset per type, as bitsets (memoized)."""
        ready = self._ready.get(done)
        if ready is None:
            ready = self._ready[done] = self._computable(done)
        return ready

    def _computable(self, done: int) -> dict[NodeType, int]:
        ready: dict[NodeType, int] = {}
        for i in self.middle:
            bit = 1 << i
            if not done & bit and self.pred_mask[i] & ~done == 0:
                t = self.types[i]
                ready[t] = ready.get(t, 0) | bit
        return ready

    def finish(self, steps: Sequence[tuple[NodeType, int]]) -> Schedule:
        types = [NodeType.IN] + [t for t, _ in steps] + [NodeType.OUT]
        subsets = [tuple(self.inputs)] + [_members(m) for _, m in steps] + [tuple(self.outputs)]
        return Schedule(tuple(types), tuple(subsets))


def _mask(rows) -> int:
    m = 0
    for r in rows:
        m |= 1 << r
    return m


def _members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def _code_key(t: NodeType) -> str:
    return t.code


def schedule(
    fg: FlatGraph,
    strategy: str = "beam",
    beam_width: int = DEFAULT_BEAM_WIDTH,
    max_nodes: int | None = OPTIMAL_NODE_CAP,
) -> Schedule:
    strategy = strategy.replace("-", "_")
    fr = _Frontier(fg)
    if strategy == "one_by_one":
        return _one_by_one(fr)
    if strategy == "greedy":
        return _greedy(fr)
    if strategy == "beam":
        if beam_width < 1:
            raise ScheduleError("beam width must be at least 1")
        return _beam(fr, beam_width)
    if strategy == "optimal":
        if max_nodes is not None and fg.num_nodes > max_nodes:
            raise ScheduleError(
                f"optimal search is capped at {max_nodes} nodes (graph has {fg.num_nodes}); "
                "use the beam strategy or raise the cap"
            )
        return _optimal(fr)
    raise ScheduleError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")


def _one_by_one(fr: _Frontier) -> Schedule:
    order = kahn_order(fr.n, fr.fg.edge_list())
    steps = [(fr.types[i], 1 << i) for i in order if fr.types[i] not in (NodeType.IN, NodeType.OUT)]
    return fr.finish(steps)


def _greedy(fr: _Frontier) -> Schedule:
    done, steps = fr.start, []
    while done != fr.goal:
        ready = fr.computable(done)
        t = max(sorted(ready), key=lambda t: bin(ready[t]).count("1"))
        steps.append((t, ready[t]))
        done |= ready[t]
    return fr.finish(steps)


def _beam(fr: _Frontier, width: int) -> Schedule:
    """Best of plain beam searches at every width up to ``width``.

    Taking the best over all narrower beams keeps the schedule length
    non-increasing in ``width``; width 1 coincides with greedy.  Stops early
    once a schedule meets the lower bound.
    """
    floor = _lower_bound_fn(fr)(fr.start) + 1
    best = None
    for w in range(width, 0, -1):
        s = _beam_run(fr, w)
        if best is None or s.num_steps < best.num_steps:
            best = s
        if best.num_steps <= floor:
            break
    return best


def _beam_run(fr: _Frontier, width: int) -> Schedule:
    beam: list[tuple[int, tuple[tuple[NodeType, int], ...]]] = [(fr.start, ())]
    while True:
        for done, steps in beam:
            if done == fr.goal:
                return fr.finish(steps)
        children: dict[int, tuple[tuple[NodeType, int], ...]] = {}
        for done, steps in beam:
            for t, m in fr.computable(done).items():
                child = done | m
                cand = steps + ((t, m),)
                best = children.get(child)
                if best is None or _string_key(cand) < _string_key(best):
                    children[child] = cand
        ranked = sorted(
            children.items(),
            key=lambda kv: (-bin(kv[0]).count("1"), len(kv[1]), _string_key(kv[1])),
        )
        beam = ranked[:width]


def _string_key(steps) -> tuple[int, ...]:
    return tuple(int(t) for t, _ in steps)


def _type_chains(fr: _Frontier) -> dict[NodeType, list[int]]:
    """Per type, the most nodes of that type on any path starting at each node."""
    succ: list[list[int]] = [[] for _ in range(fr.n)]
    for s, d in fr.fg.edge_list():
        succ[s].append(d)
    order = kahn_order(fr.n, fr.fg.edge_list())
    chains = {}
    for t in {fr.types[v] for v in fr.middle}:
        chain = [0] * fr.n
        for v in reversed(order):
            chain[v] = max((chain[d] for d in succ[v]), default=0) + (fr.types[v] == t)
        chains[t] = chain
    return chains


def _lower_bound_fn(fr: _Frontier):
    """Admissible bound on the processing steps still needed from a processed set.

    The unprocessed nodes are closed under successors, so each type ``t``
    needs at least as many steps as the longest chain of unprocessed ``t``
    nodes.
    """
    ranked = [
        (chain, sorted((v for v in fr.middle if chain[v]), key=lambda v: -chain[v]))
        for chain in _type_chains(fr).values()
    ]

    def lower_bound(done: int) -> int:
        total = 0
        for chain, nodes in ranked:
            for v in nodes:
                if not done >> v & 1:
                    total += chain[v]
                    break
        return total

    return lower_bound


def _optimal(fr: _Frontier) -> Schedule:
    """Level-wise breadth-first search over processed-node sets.

    A processed set that contains another reaches the goal in no more steps,
    so each level keeps only inclusion-maximal sets.  Sets whose lower bound
    cannot beat a beam-search schedule are dropped.
    """
    lower_bound = _lower_bound_fn(fr)
    bound = _beam_run(fr, DEFAULT_BEAM_WIDTH).num_steps - 1
    parent: dict[int, tuple[int, NodeType, int] | None] = {fr.start: None}
    level = [fr.start]
    depth = 0
    while level:
        for done in level:
            if done == fr.goal:
                steps = []
                while parent[done] is not None:
                    prev, t, m = parent[done]
                    steps.append((t, m))
                    done = prev
                return fr.finish(steps[::-1])
        depth += 1
        children = []
        for done in level:
            ready = fr.computable(done)
            for t in sorted(ready, key=_code_key):
                child = done | ready[t]
                if child in parent or depth + lower_bound(child) > bound:
                    continue
                parent[child] = (done, t, ready[t])
                children.append(child)
        level = _maximal(children, fr.n)
    raise ScheduleError("no schedule reaches every node")  # unreachable for a DAG


def _maximal(states: list[int], num_nodes: int) -> list[int]:
    """Inclusion-maximal bitsets, in their original order."""
    if len(states) < 2:
        return states
    words = max(1, -(-num_nodes // 64))
    mask = (1 << 64) - 1
    bits = np.array(
        [[(s >> (64 * w)) & mask for w in range(words)] for s in states], dtype=np.uint64
    )
    counts = np.array([bin(s).count("1") for s in states])
    kept = np.zeros(len(states), dtype=bool)
    for i in np.argsort(-counts, kind="stable"):
        covered = kept & np.all((bits[i] & ~bits) == 0, axis=1)
        if not covered.any():
            kept[i] = True
    return [s for s, k in zip(states, kept) if k]


def validate_schedule(fg: FlatGraph, s: Schedule) -> None:
    n = fg.num_nodes
    types = fg.types()
    seen = np.zeros(n, dtype=np.int64)
    for subset in s.subsets:
        for v in subset:
            if not 0 <= v < n:
                raise ScheduleError(f"partition: unknown node {v}")
            seen[v] += 1
    if np.any(seen != 1):
        bad = int(np.flatnonzero(seen != 1)[0])
        raise ScheduleError(f"partition: node {bad} appears {seen[bad]} times")
    if len(s.type_string) != len(s.subsets):
        raise ScheduleError("type string and subsets differ in length")
    for n_step, (t, subset) in enumerate(zip(s.type_string, s.subsets)):
        for v in subset:
            if types[v] != t:
                raise ScheduleError(
                    f"homogeneity: step {n_step} is typed {t.tag} but holds node {v} of type {types[v].tag}"
                )
    inputs = {i for i, t in enumerate(types) if t == NodeType.IN}
    outputs = {i for i, t in enumerate(types) if t == NodeType.OUT}
    if set(s.subsets[0]) != inputs:
        raise ScheduleError("first subset must hold exactly the input nodes")
    if set(s.subsets[-1]) != outputs:
        raise ScheduleError("last subset must hold exactly the output nodes")
    steps = s.step_of(n)
    for src, dst in fg.edge_list():
        if steps[src] >= steps[dst]:
            raise ScheduleError(
                f"causality: edge {src}->{dst} goes from step {steps[src]} to step {steps[dst]}"
            )


def optimize_node_order(fg: FlatGraph, s: Schedule) -> np.ndarray:
    """Permutation ``sigma`` with ``sigma[new_row] = old_row``, sorting by step."""
    steps = s.step_of(fg.num_nodes)
    return np.lexsort((np.arange(fg.num_nodes), steps))


def reorder(fg: FlatGraph, sigma: np.ndarray) -> FlatGraph:
    """Relabel node rows by ``sigma`` and permute parameter rows to match."""
    sigma = np.asarray(sigma, dtype=np.int64)
    inverse = np.empty_like(sigma)
    inverse[sigma] = np.arange(len(sigma))
    return FlatGraph(
        fg.node_types[sigma].copy(),
        inverse[fg.edge_index],
        fg.edge_types.copy(),
        reorder_params(fg.node_types, fg.params, sigma),
    )


def reorder_params(node_types: np.ndarray, params: ParamStore, sigma: np.ndarray) -> ParamStore:
    """Permute the rows of each ``P[t]`` to follow the node permutation."""
    out = ParamStore()
    node_types = np.asarray(node_types)
    for t in params.types():
        rows = np.flatnonzero(node_types == t)
        rank = np.empty(len(node_types), dtype=np.int64)
        rank[rows] = np.arange(len(rows))
        new_rows = [rank[old] for old in sigma if node_types[old] == t]
        out[t] = params[t][new_rows]
    return out


@dataclass(frozen=True, eq=False)
class RenderData:
    """Everything the batched renderer reads, in reordered row space."""

    schedule: Schedule
    sigma: np.ndarray
    graph: FlatGraph
    gather_idx: tuple[np.ndarray, ...]
    aggregate_idx: tuple[np.ndarray, ...]
    param_idx: tuple[slice, ...]
    store_idx: tuple[slice, ...]
    buffer_rows: int

    @property
    def num_steps(self) -> int:
        return self.schedule.num_steps

    @property
    def num_inputs(self) -> int:
        return self.graph.num_inputs

    @property
    def step_types(self) -> tuple[NodeType, ...]:
        return self.schedule.type_string[1:]

    def reorder_params(self, params: ParamStore, original_types: np.ndarray) -> ParamStore:
        """Map a parameter store in original node order onto this render data."""
        return reorder_params(original_types, params, self.sigma)


def get_read_write_index(s: Schedule, fg: FlatGraph):
    """Per-step gather / aggregate / parameter / store indices.

    ``fg`` must already be reordered so that each step occupies a contiguous
    block of rows.
    """
    node_types = fg.node_types
    pred: list[list[int]] = [[] for _ in range(fg.num_nodes)]
    for src, dst in fg.edge_list():
        pred[dst].append(src)
    gather, aggregate, param, store = [], [], [], []
    start = len(s.subsets[0])
    for t, subset in zip(s.type_string[1:], s.subsets[1:]):
        stop = start + len(subset)
        g_rows, a_rows = [], []
        for slot, v in enumerate(range(start, stop)):
            for src in pred[v]:
                g_rows.append(src)
                a_rows.append(slot)
        gather.append(np.array(g_rows, dtype=np.int64))
        aggregate.append(np.array(a_rows, dtype=np.int64))
        store.append(slice(start, stop))
        first = int(np.sum(node_types[:start] == t))
        param.append(slice(first, first + len(subset)))
        start = stop
    return tuple(gather), tuple(aggregate), tuple(param), tuple(store)


def compute_render_data(
    fg: FlatGraph,
    strategy: str = "beam",
    beam_width: int = DEFAULT_BEAM_WIDTH,
    max_nodes: int | None = OPTIMAL_NODE_CAP,
) -> RenderData:
    s = schedule(fg, strategy, beam_width, max_nodes)
    sigma = optimize_node_order(fg, s)
    reordered = reorder(fg, sigma)
    new_pos = np.empty_like(sigma)
    new_pos[sigma] = np.arange(len(sigma))
    relabeled = Schedule(
        s.type_string,
        tuple(tuple(sorted(int(new_pos[v]) for v in subset)) for subset in s.subsets),
    )
    gather, aggregate, param, store = get_read_write_index(relabeled, reordered)
    return RenderData(
        schedule=relabeled,
        sigma=sigma,
        graph=reordered,
        gather_idx=gather,
        aggregate_idx=aggregate,
        param_idx=param,
        store_idx=store,
        buffer_rows=fg.num_nodes,
    )
