"""Batched graph rendering and a per-node reference renderer."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .graph import FlatGraph, NodeType, ParamStore, kahn_order
from .processors import Processor
from .schedule import RenderData, compute_render_data


class RenderError(ValueError):
    pass


def _canonical_sources(sources: np.ndarray, num_inputs: int) -> tuple[np.ndarray, bool]:
    """Return sources as ``(K, B, C, L)`` and whether a batch axis was given.

    Accepts ``(K, C, L)`` or ``(B, K, C, L)``.
    """
    s = np.asarray(sources, dtype=float)
    if s.ndim == 3:
        s, batched = s[:, None], False
    elif s.ndim == 4:
        s, batched = np.swapaxes(s, 0, 1), True
    else:
        raise RenderError(f"sources must have shape (K, C, L) or (B, K, C, L), got {s.shape}")
    if s.shape[0] != num_inputs:
        raise RenderError(f"graph has {num_inputs} inputs but {s.shape[0]} sources were given")
    if s.shape[2] != 2:
        raise RenderError(f"sources must be stereo, got {s.shape[2]} channels")
    return s, batched


def _restore(y: np.ndarray, batched: bool) -> np.ndarray:
    return np.swapaxes(y, 0, 1) if batched else y[:, 0]


def _check_params(params: ParamStore, node_types) -> None:
    try:
        params.validate(node_types)
    except ValueError as exc:
        raise RenderError(str(exc)) from exc


def render(
    rd: RenderData,
    processors: Mapping[NodeType, Processor],
    params: ParamStore | None,
    sources: np.ndarray,
    return_intermediate: bool = False,
):
    """Run the gather / aggregate / process / store loop.

    ``params`` must be row-aligned with ``rd.graph`` (the reordered graph);
    ``None`` uses ``rd.graph.params``.  Returns the outputs of the final step,
    and the intermediate buffer ``U`` of shape ``(rows, B, C, L)`` on request.
    """
    params = rd.graph.params if params is None else params
    _check_params(params, rd.graph.node_types)
    s, batched = _canonical_sources(sources, rd.num_inputs)
    k = rd.num_inputs
    u = np.zeros((rd.buffer_rows,) + s.shape[1:])
    u[:k] = s
    y = u[:0]
    for t, g_idx, a_idx, p_idx, s_idx in zip(
        rd.step_types, rd.gather_idx, rd.aggregate_idx, rd.param_idx, rd.store_idx
    ):
        slots = s_idx.stop - s_idx.start
        gathered = u[g_idx]
        if len(a_idx) == slots and np.array_equal(a_idx, np.arange(slots)):
            inputs = gathered
        else:
            inputs = np.zeros((slots,) + u.shape[1:])
            np.add.at(inputs, a_idx, gathered)
        y = processors[t](inputs, params[t][p_idx])
        u[s_idx] = y
    out = _restore(y, batched)
    if return_intermediate:
        return out, u
    return out


def render_reference(
    fg: FlatGraph,
    processors: Mapping[NodeType, Processor],
    params: ParamStore | None,
    sources: np.ndarray,
) -> np.ndarray:
    """Evaluate one node at a time in topological order, no batching.

    Processors run through their ``reference`` methods (direct convolution,
    recursive envelopes).  Outputs follow the order of ``out`` nodes in ``fg``.
    """
    params = fg.params if params is None else params
    _check_params(params, fg.node_types)
    s, batched = _canonical_sources(sources, fg.num_inputs)
    types = fg.types()
    pred = fg.predecessors()
    row_of = {}
    counts: dict[NodeType, int] = {}
    for i, t in enumerate(types):
        row_of[i] = counts.get(t, 0)
        counts[t] = row_of[i] + 1
    order = kahn_order(fg.num_nodes, fg.edge_list())
    outputs: dict[int, np.ndarray] = {}
    for v in order:
        t = types[v]
        if t == NodeType.IN:
            outputs[v] = s[row_of[v]]
            continue
        acc = np.zeros(s.shape[1:])
        for src in pred[v]:
            acc = acc + outputs[src]
        row = params[t][row_of[v]] if t.width else None
        outputs[v] = processors[t].reference(acc, row)
    y = np.stack([outputs[v] for v in range(fg.num_nodes) if types[v] == NodeType.OUT])
    return _restore(y, batched)


def render_graph(
    fg: FlatGraph,
    processors: Mapping[NodeType, Processor],
    sources: np.ndarray,
    strategy: str = "beam",
    beam_width: int = 32,
) -> np.ndarray:
    """Schedule, reorder and render ``fg`` with its own parameters."""
    rd = compute_render_data(fg, strategy, beam_width)
    return render(rd, processors, None, sources)
