"""Graph files, float WAV files and DOT export."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .graph import (
    DEFAULT_SAMPLE_RATE,
    DELAY_TAP_WIDTH,
    PARAM_WIDTHS,
    PARAMETERIZED,
    Edge,
    Graph,
    GraphError,
    NodeType,
    ParamStore,
)

FORMAT_VERSION = 1


class GraphFileError(GraphError):
    pass


class WavFormatError(ValueError):
    pass


@dataclass
class AudioBuffer:
    """Samples of shape ``(C, L)`` or ``(B, C, L)`` at ``sample_rate`` Hz."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    @property
    def channels(self) -> int:
        return self.samples.shape[-2]

    @property
    def length(self) -> int:
        return self.samples.shape[-1]


# graph files


def graph_to_dict(g: Graph, params: ParamStore | None = None) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "nodes": [{"id": i, "type": t.tag} for i, t in enumerate(g.node_types)],
        "edges": [
            {"src": e.src, "dst": e.dst, "outlet": e.outlet, "inlet": e.inlet} for e in g.edges
        ],
    }
    if params is not None:
        doc["params"] = {
            t.tag: [_encode_row(t, row) for row in params[t]] for t in PARAMETERIZED if params[t].size
        }
    return doc


def _encode_row(t: NodeType, row: np.ndarray) -> list:
    values = [float(v) for v in row]
    if t != NodeType.DELAY:
        return values
    # complex tap frequencies as [re, im] pairs
    out: list = []
    for start in range(0, len(values), DELAY_TAP_WIDTH):
        tap = values[start:start + DELAY_TAP_WIDTH]
        out.append(tap[:2])
        out.extend(tap[2:])
    return out


def _decode_row(t: NodeType, row, where: str) -> list[float]:
    if not isinstance(row, list):
        raise GraphFileError(f"{where}: parameter row must be a list")
    flat: list[float] = []
    for item in row:
        if isinstance(item, list):
            if t != NodeType.DELAY or len(item) != 2:
                raise GraphFileError(f"{where}: nested values are only allowed as delay [re, im] pairs")
            flat.extend(item)
        else:
            flat.append(item)
    for v in flat:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise GraphFileError(f"{where}: non-numeric parameter value {v!r}")
    if len(flat) != PARAM_WIDTHS[t]:
        raise GraphFileError(f"{where}: {t.tag} row has width {len(flat)}, expected {PARAM_WIDTHS[t]}")
    return [float(v) for v in flat]


def graph_from_dict(doc: dict, sample_rate: int = DEFAULT_SAMPLE_RATE) -> tuple[Graph, ParamStore]:
    if not isinstance(doc, dict):
        raise GraphFileError("graph document must be an object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise GraphFileError(f"version: unsupported graph file version {version!r}")
    nodes = doc.get("nodes")
    if not isinstance(nodes, list):
        raise GraphFileError("nodes: missing or not a list")
    g = Graph()
    for i, node in enumerate(nodes):
        if not isinstance(node, dict) or "type" not in node:
            raise GraphFileError(f"nodes[{i}]: expected an object with a type")
        if node.get("id", i) != i:
            raise GraphFileError(f"nodes[{i}].id: ids must be dense and ordered, got {node.get('id')!r}")
        try:
            g.add(NodeType.parse(str(node["type"])))
        except GraphError:
            raise GraphFileError(f"nodes[{i}].type: unknown node type {node['type']!r}") from None
    for i, edge in enumerate(doc.get("edges", [])):
        try:
            e = Edge(int(edge["src"]), int(edge["dst"]), int(edge.get("outlet", 0)), int(edge.get("inlet", 0)))
        except (KeyError, TypeError, ValueError):
            raise GraphFileError(f"edges[{i}]: expected src, dst and optional outlet, inlet") from None
        for node in (e.src, e.dst):
            if not 0 <= node < g.num_nodes:
                raise GraphFileError(f"edges[{i}]: unknown node id {node}")
        g.edges.append(e)
    try:
        g.validate()
    except GraphError as exc:
        raise GraphFileError(f"edges: {exc}") from None
    params = ParamStore.defaults(g.node_types, sample_rate)
    for tag, rows in (doc.get("params") or {}).items():
        try:
            t = NodeType.parse(tag)
        except GraphError:
            raise GraphFileError(f"params.{tag}: unknown node type {tag!r}") from None
        if t.width == 0:
            raise GraphFileError(f"params.{tag}: {t.tag} nodes take no parameters")
        decoded = [_decode_row(t, row, f"params.{tag}[{j}]") for j, row in enumerate(rows)]
        count = len(g.nodes_of(t))
        if len(decoded) != count:
            raise GraphFileError(f"params.{tag}: {len(decoded)} rows for {count} nodes")
        params[t] = np.array(decoded).reshape(count, t.width)
    try:
        params.validate(g.node_types)
    except GraphError as exc:
        raise GraphFileError(f"params: {exc}") from None
    return g, params


def save_graph(g: Graph, params: ParamStore | None, path: str | os.PathLike) -> None:
    # json writes floats by shortest round-trip repr, exact for float64
    with open(path, "w") as f:
        json.dump(graph_to_dict(g, params), f, indent=1)
        f.write("\n")


def load_graph(path: str | os.PathLike, sample_rate: int = DEFAULT_SAMPLE_RATE) -> tuple[Graph, ParamStore]:
    with open(path) as f:
        text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return graph_from_dict(doc, sample_rate)


# wav


def write_wav(buf: AudioBuffer, path: str | os.PathLike) -> None:
    samples = np.asarray(buf.samples)
    if samples.ndim != 2 or samples.shape[0] != 2:
        raise WavFormatError(f"expected stereo samples of shape (2, L), got {samples.shape}")
    wavfile.write(path, int(buf.sample_rate), np.ascontiguousarray(samples.T, dtype="<f4"))


def read_wav(path: str | os.PathLike) -> AudioBuffer:
    with open(path, "rb") as f:
        header = f.read(12)
    if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from None
    if data.dtype != np.float32:
        raise WavFormatError(f"{path}: unsupported encoding {data.dtype}; expected 32-bit float PCM")
    if data.ndim != 2 or data.shape[1] != 2:
        channels = 1 if data.ndim == 1 else data.shape[1]
        raise WavFormatError(f"{path}: expected 2 channels, found {channels}")
    return AudioBuffer(np.ascontiguousarray(data.T), int(rate))


# dot


def export_dot(g: Graph, name: str = "G") -> str:
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for i, t in enumerate(g.node_types):
        lines.append(f'  n{i} [label="{t.code}", tooltip="{t.tag} {i}"];')
    for e in g.edges:
        attrs = f' [label="{e.outlet}:{e.inlet}"]' if (e.outlet or e.inlet) else ""
        lines.append(f"  n{e.src} -> n{e.dst}{attrs};")
    lines.append("}")
    return "\n".join(lines) + "\n"
