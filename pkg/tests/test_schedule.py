import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixgraph import (
    Graph,
    NodeType,
    Schedule,
    ScheduleError,
    compute_render_data,
    generate_console,
    optimize_node_order,
    random_graph,
    reorder,
    schedule,
    validate_schedule,
)
from mixgraph.schedule import STRATEGIES

from .helpers import exhaustive_min_steps, three_track_graph

T = NodeType


def chain_graph():
    g = Graph()
    g.add_serial_chain([T.IN, T.GAIN, T.OUT])
    return g.to_flat()


def parallel_eq_graph():
    g = Graph()
    a, b = g.add(T.IN), g.add(T.IN)
    e1, e2 = g.add(T.EQ), g.add(T.EQ)
    m, o = g.add(T.MIX), g.add(T.OUT)
    for src, dst in ((a, e1), (b, e2), (e1, m), (e2, m), (m, o)):
        g.connect(src, dst)
    return g.to_flat()


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_chain_any_strategy(strategy):
    s = schedule(chain_graph(), strategy)
    assert s.subsets == ((0,), (1,), (2,))
    assert s.num_steps == 2
    assert str(s) == "igo"


def test_parallel_chains():
    fg = parallel_eq_graph()
    for strategy in ("greedy", "beam", "optimal"):
        s = schedule(fg, strategy)
        assert s.subsets == ((0, 1), (2, 3), (4,), (5,))
        assert s.num_steps == 3
    assert schedule(fg, "one_by_one").num_steps == 4


def test_strategy_alias_and_unknown():
    assert schedule(chain_graph(), "one-by-one").num_steps == 2
    with pytest.raises(ScheduleError):
        schedule(chain_graph(), "annealing")


def test_three_track_graph_schedules():
    fg = three_track_graph().to_flat()
    assert fg.num_nodes == 21
    opt = schedule(fg, "optimal")
    assert opt.num_steps == 9 and opt.code == "iecgmregro"
    assert schedule(fg, "beam").code == "iecgmregro"
    assert schedule(fg, "greedy").num_steps == 11
    # one singleton per non-input node, outputs merged
    assert schedule(fg, "one_by_one").num_steps == 21 - 3 - 1 + 1


def test_optimal_cap():
    fg = generate_console(40).to_flat()
    with pytest.raises(ScheduleError, match="beam"):
        schedule(fg, "optimal")
    assert schedule(fg, "optimal", max_nodes=None).num_steps == 13


def test_console_type_string():
    for k in (1, 2, 8):
        assert schedule(generate_console(k).to_flat(), "optimal").code == "iecnsgdrmecsgo"


def test_missing_inputs_or_outputs():
    with pytest.raises(ScheduleError):
        schedule(Graph([T.IN, T.GAIN]).to_flat(), "greedy")
    with pytest.raises(ScheduleError):
        schedule(Graph([T.GAIN, T.OUT]).to_flat(), "greedy")


def test_validate_causality_witness():
    fg = chain_graph()
    s = Schedule((T.IN, T.GAIN, T.GAIN, T.OUT), ((0,), (), (1,), (2,)))
    validate_schedule(fg, s)
    g = Graph()
    g.add_serial_chain([T.IN, T.GAIN, T.GAIN, T.OUT])
    fg = g.to_flat()
    bad = Schedule((T.IN, T.GAIN, T.GAIN, T.OUT), ((0,), (2,), (1,), (3,)))
    with pytest.raises(ScheduleError, match=r"causality: edge 1->2"):
        validate_schedule(fg, bad)


def test_validate_homogeneity():
    g = Graph()
    g.add_serial_chain([T.IN, T.EQ, T.OUT])
    i2, gn = g.add(T.IN), g.add(T.GAIN)
    g.connect(i2, gn)
    g.connect(gn, 2)
    fg = g.to_flat()
    bad = Schedule((T.IN, T.EQ, T.OUT), ((0, 3), (1, 4), (2,)))
    with pytest.raises(ScheduleError, match="homogeneity"):
        validate_schedule(fg, bad)


def test_validate_partition_and_ends():
    fg = chain_graph()
    with pytest.raises(ScheduleError, match="partition"):
        validate_schedule(fg, Schedule((T.IN, T.GAIN, T.OUT), ((0,), (1,), (1, 2))))
    with pytest.raises(ScheduleError, match="partition"):
        validate_schedule(fg, Schedule((T.IN, T.OUT), ((0,), (2,))))
    fg = parallel_eq_graph()
    s = Schedule((T.IN, T.IN, T.EQ, T.MIX, T.OUT), ((0,), (1,), (2, 3), (4,), (5,)))
    with pytest.raises(ScheduleError, match="first subset"):
        validate_schedule(fg, s)


def test_sigma_identity_on_sorted_graph():
    fg = parallel_eq_graph()
    sigma = optimize_node_order(fg, schedule(fg, "optimal"))
    assert sigma.tolist() == list(range(6))


def test_sigma_groups_interleaved_rows():
    fg = random_graph(np.random.default_rng(7), num_nodes=10).to_flat()
    s = schedule(fg, "beam")
    sigma = optimize_node_order(fg, s)
    steps = s.step_of(fg.num_nodes)[sigma]
    assert np.all(np.diff(steps) >= 0)
    inverse = np.argsort(sigma)
    assert np.array_equal(sigma[inverse], np.arange(10))
    again = reorder(reorder(fg, sigma), inverse)
    assert np.array_equal(again.node_types, fg.node_types)
    assert np.array_equal(again.edge_index, fg.edge_index)
    assert again.params == fg.params


def test_reorder_preserves_isomorphism():
    fg = random_graph(np.random.default_rng(11), num_nodes=25).to_flat()
    sigma = np.random.default_rng(0).permutation(fg.num_nodes)
    r = reorder(fg, sigma)
    assert sorted(r.node_types.tolist()) == sorted(fg.node_types.tolist())
    mapped = sorted((int(sigma[a]), int(sigma[b])) for a, b in r.edge_list())
    assert mapped == sorted(fg.edge_list())


def test_render_data_chain():
    rd = compute_render_data(chain_graph())
    assert [g.tolist() for g in rd.gather_idx] == [[0], [1]]
    assert rd.store_idx == (slice(1, 2), slice(2, 3))
    assert rd.param_idx[0] == slice(0, 1)
    assert rd.buffer_rows == 3


def test_render_data_mix_aggregation():
    g = Graph()
    a, b, m, o = (g.add(t) for t in (T.IN, T.IN, T.MIX, T.OUT))
    for src, dst in ((a, m), (b, m), (m, o)):
        g.connect(src, dst)
    rd = compute_render_data(g.to_flat())
    assert rd.aggregate_idx[0].tolist() == [0, 0]
    assert sorted(rd.gather_idx[0].tolist()) == [0, 1]


def check_render_data(rd):
    k = rd.num_inputs
    covered = list(range(k))
    written_before = set(range(k))
    touched = {}
    for t, g, a, p, s in zip(rd.step_types, rd.gather_idx, rd.aggregate_idx, rd.param_idx, rd.store_idx):
        assert isinstance(p, slice) and isinstance(s, slice)
        assert set(g.tolist()) <= written_before
        assert len(g) == len(a)
        if len(a):
            assert a.max() < s.stop - s.start
        covered.extend(range(s.start, s.stop))
        written_before |= set(range(s.start, s.stop))
        if t.width:
            touched[t] = touched.get(t, 0) + (p.stop - p.start)
            assert p.stop <= rd.graph.params[t].shape[0]
    assert covered == list(range(rd.buffer_rows))
    for t, n in touched.items():
        assert n == rd.graph.params[t].shape[0]


def test_console_render_data_contiguous():
    check_render_data(compute_render_data(generate_console(4).to_flat()))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(STRATEGIES))
def test_render_data_invariants(seed, strategy):
    fg = random_graph(np.random.default_rng(seed), max_nodes=30).to_flat()
    check_render_data(compute_render_data(fg, strategy))


def test_random_schedules_validate_and_order():
    rng = np.random.default_rng(3)
    for _ in range(100):
        fg = random_graph(rng).to_flat()
        lengths = {}
        for strategy in STRATEGIES:
            s = schedule(fg, strategy)
            validate_schedule(fg, s)
            assert sum(len(v) for v in s.subsets) == fg.num_nodes
            lengths[strategy] = s.num_steps
        assert lengths["optimal"] <= lengths["beam"] <= lengths["greedy"] <= lengths["one_by_one"]
        outs = fg.num_outputs
        assert lengths["one_by_one"] == fg.num_nodes - fg.num_inputs - outs + 1


def test_beam_width_monotone_and_greedy_at_one():
    rng = np.random.default_rng(5)
    for _ in range(40):
        fg = random_graph(rng).to_flat()
        widths = [schedule(fg, "beam", w).num_steps for w in (1, 2, 4, 8, 16, 32)]
        assert all(a >= b for a, b in zip(widths, widths[1:]))
        assert widths[-1] >= schedule(fg, "optimal").num_steps
        assert schedule(fg, "beam", 1).subsets == schedule(fg, "greedy").subsets


def test_optimal_matches_exhaustive_small():
    rng = np.random.default_rng(17)
    for _ in range(30):
        g = random_graph(rng, min_nodes=5, max_nodes=10)
        assert schedule(g.to_flat(), "optimal").num_steps == exhaustive_min_steps(g)
