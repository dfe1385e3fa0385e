"""Audio processing graphs rendered in batched, homogeneous steps."""

from .graph import (
    Edge,
    FlatGraph,
    Graph,
    GraphError,
    NodeType,
    ParamStore,
    disjoint_union,
    union_params,
)
from .processors import default_processors
from .render import RenderError, render, render_graph, render_reference
from .schedule import (
    RenderData,
    Schedule,
    ScheduleError,
    compute_render_data,
    optimize_node_order,
    reorder,
    schedule,
    validate_schedule,
)
from .generators import generate_console, random_graph, random_params
from .io import AudioBuffer, export_dot, load_graph, read_wav, save_graph, write_wav

__all__ = [
    "AudioBuffer",
    "Edge",
    "FlatGraph",
    "Graph",
    "GraphError",
    "NodeType",
    "ParamStore",
    "RenderData",
    "RenderError",
    "Schedule",
    "ScheduleError",
    "compute_render_data",
    "default_processors",
    "disjoint_union",
    "export_dot",
    "generate_console",
    "load_graph",
    "optimize_node_order",
    "random_graph",
    "random_params",
    "read_wav",
    "render",
    "render_graph",
    "render_reference",
    "reorder",
    "save_graph",
    "schedule",
    "union_params",
    "validate_schedule",
    "write_wav",
]
