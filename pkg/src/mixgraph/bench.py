"""Processor-call counts and render timings across scheduling strategies."""

from __future__ import annotations

import csv
import io
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .generators import generate_console
from .graph import DEFAULT_SAMPLE_RATE
from .processors import default_processors
from .render import render
from .schedule import STRATEGIES, compute_render_data

BENCH_OPTIMAL_CAP = 1024


@dataclass
class BenchRow:
    strategy: str
    K: int
    nodes: int
    N: int
    median_ms: float
    speedup: float


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def calls(self, strategy: str) -> dict[int, int]:
        return {r.K: r.N for r in self.rows if r.strategy == strategy}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(BenchRow.__dataclass_fields__))
        writer.writeheader()
        for r in self.rows:
            writer.writerow(asdict(r))
        return buf.getvalue()

    def to_table(self) -> str:
        head = f"{'strategy':<11} {'K':>4} {'nodes':>6} {'N':>5} {'median ms':>11} {'speedup':>8}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.strategy:<11} {r.K:>4} {r.nodes:>6} {r.N:>5} {r.median_ms:>11.2f} {r.speedup:>8.2f}"
            )
        return "\n".join(lines)

    def ordering_violations(self) -> list[str]:
        """Consoles where optimal <= beam <= greedy <= one_by_one fails."""
        chain = [s for s in ("optimal", "beam", "greedy", "one_by_one") if any(r.strategy == s for r in self.rows)]
        bad = []
        for k in sorted({r.K for r in self.rows}):
            ns = [self.calls(s).get(k) for s in chain]
            if any(a > b for a, b in zip(ns, ns[1:])):
                bad.append(f"K={k}: " + ", ".join(f"{s}={n}" for s, n in zip(chain, ns)))
        return bad


def bench(
    sizes: Sequence[int] = (1, 2, 4, 8),
    strategies: Sequence[str] = STRATEGIES,
    repeats: int = 3,
    prune: float = 0.0,
    length: int = 2**17,
    seed: int = 0,
    beam_width: int = 32,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    workers: int = 2,
) -> BenchReport:
    """Schedule and render consoles of each size with every strategy.

    Render data is prepared on worker threads; renders run sequentially.
    """
    strategies = [s.replace("-", "_") for s in strategies]
    processors = default_processors(sample_rate, seed)
    rng = np.random.default_rng(seed)
    graphs = {k: generate_console(k, prune, seed + k).to_flat(sample_rate) for k in sizes}
    jobs = [(k, s) for k in sizes for s in strategies]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {
            job: pool.submit(compute_render_data, graphs[job[0]], job[1], beam_width, BENCH_OPTIMAL_CAP)
            for job in jobs
        }
        render_data = {job: f.result() for job, f in futures.items()}
    rows = []
    for k in sizes:
        fg = graphs[k]
        sources = rng.random((fg.num_inputs, 2, length))
        times = {}
        for s in strategies:
            rd = render_data[(k, s)]
            samples = []
            for _ in range(max(1, repeats)):
                t0 = time.perf_counter()
                render(rd, processors, None, sources)
                samples.append(1e3 * (time.perf_counter() - t0))
            times[s] = statistics.median(samples)
        base = times.get("one_by_one")
        for s in strategies:
            speedup = base / times[s] if base is not None else float("nan")
            rows.append(BenchRow(s, k, fg.num_nodes, render_data[(k, s)].num_steps, times[s], speedup))
    return BenchReport(rows)
