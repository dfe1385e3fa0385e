"""Mixing-console and random graph generators."""

from __future__ import annotations

import numpy as np

from .graph import (
    DEFAULT_SAMPLE_RATE,
    DELAY_CHANNELS,
    DELAY_FIR_BINS,
    DELAY_TAP_WIDTH,
    DELAY_TAPS,
    PARAM_WIDTHS,
    Graph,
    GraphError,
    NodeType,
    ParamStore,
    delay_geometry,
)

T = NodeType

TRACK_CHAIN = (T.EQ, T.COMPRESSOR, T.NOISEGATE, T.IMAGER, T.GAIN)
BUS_CHAIN = (T.EQ, T.COMPRESSOR, T.IMAGER, T.GAIN, T.OUT)
SENDS = (T.DELAY, T.REVERB)

PROCESSOR_TYPES = (T.MIX, T.GAIN, T.EQ, T.COMPRESSOR, T.NOISEGATE, T.IMAGER, T.REVERB, T.DELAY)


def generate_console(num_tracks: int, prune: float = 0.0, seed: int | None = 0) -> Graph:
    """Build a mixing console with ``num_tracks`` input tracks.

    Each track runs ``in -> eq -> compressor -> noisegate -> imager -> gain``
    into the mix bus, with delay and reverb sends from the track gain.  The
    bus runs ``mix -> eq -> compressor -> imager -> gain -> out``.  With
    ``prune > 0`` each send is dropped independently with that probability.
    """
    if num_tracks < 1:
        raise GraphError("a console needs at least one track")
    if not 0.0 <= prune <= 1.0:
        raise GraphError("prune probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    g = Graph()
    track_ends = []
    for _ in range(num_tracks):
        src = g.add(T.IN)
        start, end = g.add_serial_chain(TRACK_CHAIN)
        g.connect(src, start)
        track_ends.append(end)
    bus = g.add(T.MIX)
    for end in track_ends:
        g.connect(end, bus)
        for send in SENDS:
            if prune > 0 and rng.random() < prune:
                continue
            node = g.add(send)
            g.connect(end, node)
            g.connect(node, bus)
    start, _ = g.add_serial_chain(BUS_CHAIN)
    g.connect(bus, start)
    return g


def random_graph(
    rng: np.random.Generator,
    num_nodes: int | None = None,
    min_nodes: int = 5,
    max_nodes: int = 40,
    types=PROCESSOR_TYPES,
    shuffle: bool = True,
) -> Graph:
    """Random acyclic graph with 1-3 inputs, 1-2 outputs and mixed processors.

    Each processor draws 0-2 incoming edges (rarely 0, occasionally parallel)
    from earlier nodes in a hidden topological order; ``shuffle`` scrambles
    insertion order so it is no longer topological.
    """
    n = int(rng.integers(min_nodes, max_nodes + 1)) if num_nodes is None else num_nodes
    if n < 3:
        raise GraphError("random graphs need at least 3 nodes")
    num_in = int(rng.integers(1, min(3, n - 2) + 1))
    num_out = int(rng.integers(1, min(2, n - num_in - 1) + 1))
    num_mid = n - num_in - num_out
    mid_types = [types[i] for i in rng.integers(0, len(types), size=num_mid)]
    topo = [T.IN] * num_in + mid_types + [T.OUT] * num_out
    edges: list[tuple[int, int]] = []
    for v in range(num_in, n):
        is_out = v >= num_in + num_mid
        pool = v if not is_out else num_in + num_mid
        r = rng.random()
        fan_in = 0 if (r < 0.05 and not is_out) else (1 if r < 0.7 else 2)
        for _ in range(fan_in):
            edges.append((int(rng.integers(0, pool)), v))
    perm = rng.permutation(n) if shuffle else np.arange(n)
    # perm[new] = topo position
    position = np.empty(n, dtype=np.int64)
    position[perm] = np.arange(n)
    g = Graph()
    for new in range(n):
        g.add(topo[perm[new]])
    for s, d in edges:
        g.connect(int(position[s]), int(position[d]))
    return g


def random_params(node_types, rng: np.random.Generator, sample_rate: int = DEFAULT_SAMPLE_RATE) -> ParamStore:
    """Random parameters inside every processor's legal range."""
    store = ParamStore.defaults(node_types, sample_rate)
    for t in store.types():
        n = store[t].shape[0]
        store[t] = np.stack([_random_row(t, rng, sample_rate) for _ in range(n)]) if n else store[t]
    return store


def _random_row(t: NodeType, rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    if t == T.GAIN:
        return rng.uniform(-1.0, 1.0, 2)
    if t == T.IMAGER:
        return rng.uniform(-1.0, 1.0, 1)
    if t == T.EQ:
        return np.cumsum(rng.normal(0.0, 0.05, PARAM_WIDTHS[t])).clip(-2, 2)
    if t == T.REVERB:
        init = rng.uniform(-7.0, -4.0, (2, 1, 192)) + rng.normal(0, 0.2, (2, 1, 192))
        decay = rng.uniform(-0.4, -0.02, (2, 1, 1)) + rng.normal(0, 0.01, (2, 1, 192))
        return np.concatenate([init, np.minimum(decay, 0.0)], axis=1).reshape(-1)
    if t in (T.COMPRESSOR, T.NOISEGATE):
        return np.array(
            [rng.uniform(0.9, 0.999), rng.uniform(-8.0, 0.0), rng.uniform(0.1, 2.0), rng.uniform(1.0, 8.0)]
        )
    if t == T.DELAY:
        total, window = delay_geometry(sample_rate)
        taps = np.zeros((DELAY_CHANNELS, DELAY_TAPS, DELAY_TAP_WIDTH))
        lo = np.arange(DELAY_TAPS) * window
        d = lo + rng.integers(0, window, (DELAY_CHANNELS, DELAY_TAPS))
        z = rng.uniform(0.5, 1.0, d.shape) * np.exp(-2j * np.pi * d / total)
        taps[..., 0], taps[..., 1] = z.real, z.imag
        taps[..., 2:] = rng.normal(-1.5, 0.3, (DELAY_CHANNELS, DELAY_TAPS, DELAY_FIR_BINS))
        off = rng.random((DELAY_CHANNELS, DELAY_TAPS)) < 0.3
        taps[off, 2:] = -80.0
        return taps.reshape(-1)
    raise GraphError(f"{t.tag} has no parameters")
