"""Command line interface: ``mixgraph {console,schedule,dot,render,bench,fit}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import bench
from .fit import FITTABLE, fit
from .generators import generate_console
from .graph import DEFAULT_SAMPLE_RATE, GraphError, NodeType
from .io import AudioBuffer, export_dot, load_graph, read_wav, save_graph, write_wav
from .processors import default_processors
from .render import render
from .schedule import OPTIMAL_NODE_CAP, STRATEGIES, compute_render_data

log = logging.getLogger("mixgraph")

CLI_STRATEGIES = [s.replace("_", "-") for s in STRATEGIES]


def _add_common(p: argparse.ArgumentParser, strategy: bool = True) -> None:
    p.add_argument("--sample-rate", type=int, default=DEFAULT_SAMPLE_RATE)
    p.add_argument("--seed", type=int, default=0)
    if strategy:
        p.add_argument("--strategy", choices=CLI_STRATEGIES, default="beam")
        p.add_argument("--beam-width", type=int, default=32)
        p.add_argument("--max-nodes", type=int, default=OPTIMAL_NODE_CAP,
                       help="node cap for the optimal strategy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixgraph", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("console", help="generate a mixing console graph file")
    p.add_argument("tracks", type=int)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--prune", type=float, default=0.0, help="probability of dropping each send")
    _add_common(p, strategy=False)

    p = sub.add_parser("schedule", help="print the batched processing schedule")
    p.add_argument("graph")
    _add_common(p)

    p = sub.add_parser("dot", help="export a graph as DOT")
    p.add_argument("graph")
    p.add_argument("-o", "--output")

    p = sub.add_parser("render", help="render a graph to WAV")
    p.add_argument("graph")
    p.add_argument("-i", "--input", action="append", default=[],
                   help="source WAV per input node, in input order")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--length", type=int, default=2**17,
                   help="length of random sources when no inputs are given")
    _add_common(p)

    p = sub.add_parser("bench", help="compare scheduling strategies on consoles")
    p.add_argument("--sizes", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--strategies", nargs="+", choices=CLI_STRATEGIES, default=CLI_STRATEGIES)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--prune", type=float, default=0.0)
    p.add_argument("--length", type=int, default=2**17)
    p.add_argument("--beam-width", type=int, default=32)
    p.add_argument("--csv", help="also write machine-readable rows here")
    _add_common(p, strategy=False)

    p = sub.add_parser("fit", help="fit small-parameter processors to a target by finite differences")
    p.add_argument("graph")
    p.add_argument("-i", "--input", action="append", default=[])
    p.add_argument("-t", "--target", required=True, help="target WAV (single output)")
    p.add_argument("-o", "--output", required=True, help="graph file with fitted parameters")
    p.add_argument("--trainable", nargs="+", default=[t.tag for t in FITTABLE])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    _add_common(p)
    return parser


def _load_sources(paths, num_inputs, length, sample_rate, seed) -> np.ndarray:
    if not paths:
        rng = np.random.default_rng(seed)
        return rng.uniform(-1.0, 1.0, (num_inputs, 2, length))
    if len(paths) != num_inputs:
        raise GraphError(f"graph has {num_inputs} inputs but {len(paths)} files were given")
    bufs = [read_wav(p) for p in paths]
    for p, b in zip(paths, bufs):
        if b.sample_rate != sample_rate:
            raise GraphError(f"{p}: sample rate {b.sample_rate} differs from {sample_rate}")
    n = min(b.length for b in bufs)
    return np.stack([b.samples[:, :n].astype(float) for b in bufs])


def _cmd_console(args) -> None:
    g = generate_console(args.tracks, args.prune, args.seed)
    fg = g.to_flat(args.sample_rate)
    save_graph(g, fg.params, args.output)
    print(f"{args.output}: {g.num_nodes} nodes, {len(g.edges)} edges")


def _cmd_schedule(args) -> None:
    g, params = load_graph(args.graph, args.sample_rate)
    rd = compute_render_data(g.to_flat(args.sample_rate, params), args.strategy, args.beam_width, args.max_nodes)
    print(f"type string: {rd.schedule.code}")
    print(f"processor calls: {rd.num_steps}")
    for n, (t, subset) in enumerate(zip(rd.schedule.type_string, rd.schedule.subsets)):
        original = [int(rd.sigma[v]) for v in subset]
        print(f"  V_{n} [{t.tag}]: {original}")


def _cmd_dot(args) -> None:
    g, _ = load_graph(args.graph)
    text = export_dot(g)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_render(args) -> None:
    g, params = load_graph(args.graph, args.sample_rate)
    fg = g.to_flat(args.sample_rate, params)
    sources = _load_sources(args.input, fg.num_inputs, args.length, args.sample_rate, args.seed)
    rd = compute_render_data(fg, args.strategy, args.beam_width, args.max_nodes)
    y = render(rd, default_processors(args.sample_rate, args.seed), None, sources)
    out = Path(args.output)
    paths = [out] if len(y) == 1 else [out.with_name(f"{out.stem}_{i}{out.suffix}") for i in range(len(y))]
    for path, row in zip(paths, y):
        write_wav(AudioBuffer(row, args.sample_rate), path)
        print(path)


def _cmd_bench(args) -> None:
    report = bench(
        sizes=args.sizes,
        strategies=args.strategies,
        repeats=args.repeats,
        prune=args.prune,
        length=args.length,
        seed=args.seed,
        beam_width=args.beam_width,
        sample_rate=args.sample_rate,
    )
    print(report.to_table())
    for line in report.ordering_violations():
        log.warning("ordering violated: %s", line)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())


def _cmd_fit(args) -> None:
    g, params = load_graph(args.graph, args.sample_rate)
    fg = g.to_flat(args.sample_rate, params)
    target = read_wav(args.target)
    sources = _load_sources(args.input, fg.num_inputs, target.length, args.sample_rate, args.seed)
    length = min(sources.shape[-1], target.length)
    if fg.num_outputs != 1:
        raise GraphError("fit needs a graph with exactly one output node")
    result = fit(
        fg,
        default_processors(args.sample_rate, args.seed),
        sources[..., :length],
        target.samples[None, :, :length].astype(float),
        trainable=[NodeType.parse(t) for t in args.trainable],
        steps=args.steps,
        lr=args.lr,
        strategy=args.strategy.replace("-", "_"),
        callback=lambda i, loss: log.info("step %d loss %.6g", i + 1, loss),
    )
    save_graph(g, result.params, args.output)
    print(f"loss {result.initial_loss:.6g} -> {result.final_loss:.6g}")


COMMANDS = {
    "console": _cmd_console,
    "schedule": _cmd_schedule,
    "dot": _cmd_dot,
    "render": _cmd_render,
    "bench": _cmd_bench,
    "fit": _cmd_fit,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"mixgraph: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
