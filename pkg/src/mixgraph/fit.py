"""Finite-difference parameter fitting for small-parameter processors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .graph import FlatGraph, NodeType, ParamStore
from .processors import Processor
from .render import render
from .schedule import compute_render_data, reorder_params

FITTABLE = (NodeType.GAIN, NodeType.IMAGER, NodeType.COMPRESSOR, NodeType.NOISEGATE)
FD_STEP = 1e-3


class FitError(ValueError):
    pass


@dataclass
class FitResult:
    params: ParamStore
    losses: list[float] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def project(params: ParamStore) -> ParamStore:
    """Clip dynamics parameters back into their legal ranges."""
    out = params.copy()
    for t in (NodeType.COMPRESSOR, NodeType.NOISEGATE):
        rows = out[t].copy()
        if rows.size:
            rows[:, 0] = np.clip(rows[:, 0], 1e-4, 1 - 1e-6)
            rows[:, 2] = np.maximum(rows[:, 2], 1e-3)
            rows[:, 3] = np.maximum(rows[:, 3], 1.0)
            out[t] = rows
    return out


def fit(
    fg: FlatGraph,
    processors: Mapping[NodeType, Processor],
    sources: np.ndarray,
    target: np.ndarray,
    trainable: Sequence = FITTABLE,
    steps: int = 200,
    lr: float = 0.5,
    params: ParamStore | None = None,
    strategy: str = "beam",
    callback: Callable[[int, float], None] | None = None,
) -> FitResult:
    """Gradient descent on the mean squared error between render and ``target``.

    Gradients come from central differences with a fixed step of 1e-3.
    ``params`` (original node order) defaults to the graph's own.
    """
    trainable = sorted({NodeType.parse(t) for t in trainable})
    wide = [t.tag for t in trainable if t not in FITTABLE]
    if wide:
        raise FitError(
            f"cannot fit {', '.join(wide)}: finite differences are limited to "
            "gain, imager, compressor and noisegate (at most 4 parameters per node)"
        )
    params = fg.params if params is None else params
    rd = compute_render_data(fg.with_params(project(params)), strategy)
    target = np.asarray(target, dtype=float)

    def loss(store: ParamStore) -> float:
        y = render(rd, processors, store, sources)
        return float(np.mean((y - target) ** 2))

    current = rd.graph.params
    x = current.flatten(trainable)
    losses = [loss(current)]
    for step in range(steps):
        grad = np.zeros_like(x)
        for i in range(len(x)):
            hi, lo = x.copy(), x.copy()
            hi[i] += FD_STEP
            lo[i] -= FD_STEP
            grad[i] = (
                loss(project(current.unflatten(hi, trainable)))
                - loss(project(current.unflatten(lo, trainable)))
            ) / (2 * FD_STEP)
        current = project(current.unflatten(x - lr * grad, trainable))
        x = current.flatten(trainable)
        losses.append(loss(current))
        if callback is not None:
            callback(step, losses[-1])
    inverse = np.empty_like(rd.sigma)
    inverse[rd.sigma] = np.arange(len(rd.sigma))
    fitted = reorder_params(rd.graph.node_types, current, inverse)
    return FitResult(fitted, losses)
