import pytest

from mdacheck.explore import explore
from mdacheck.protocol import CtlPhase
from mdacheck.runtime import System, replay_choices, run_random
from mdacheck.synth import SynthParams, build_synthetic, build_venue_fixture
from mdacheck.verifier import check_bounded_termination, check_controller_correctness, check_operability

from oracles import ledger


def synth(*n, **flags):
    return build_synthetic(SynthParams(*n), **flags)


# small enough to expand every interleaving
AGREEMENT = {
    "1-0-1": lambda: synth(1, 0, 1),
    "1-1-1": lambda: synth(1, 1, 1),
    "2-0-0": lambda: synth(2, 0, 0),
    "venue": build_venue_fixture,
    "drop-minus-one": lambda: synth(1, 0, 1, fault_drop_minus_one=True),
    "announce-once": lambda: synth(1, 1, 1, announce_once=True),
    "relation-rules": lambda: build_synthetic(SynthParams(1, 1, 1, relation_rules=True)),
    "spawn-cap": lambda: build_synthetic(SynthParams(1, 0, 1, max_dynamic_agents=1), unbounded_spawn=True),
    "fine-grain": lambda: synth(1, 0, 1, fine_grain=True),
}


@pytest.fixture(scope="module", params=sorted(AGREEMENT))
def both(request):
    cfg = AGREEMENT[request.param]()
    full = explore(cfg, reduce=False)
    reduced = explore(cfg)
    assert full.complete and reduced.complete
    return full, reduced


def test_reduction_keeps_terminal_states(both):
    full, reduced = both
    # an aborted state freezes whatever the controller had not drained yet, so
    # those are compared by their diagnosis only
    ends = lambda g: {g.states[i] for i in g.terminal() if not g.states[i].aborted}  # noqa: E731
    aborts = lambda g: {g.states[i].aborted for i in g.aborted()}  # noqa: E731
    assert ends(full) == ends(reduced)
    assert aborts(full) == aborts(reduced)
    assert {full.states[i] for i in full.deadlocks()} == {reduced.states[i] for i in reduced.deadlocks()}
    assert len(reduced) <= len(full)


def test_reduction_keeps_verdicts(both):
    full, reduced = both
    for check in (check_controller_correctness, check_operability, check_bounded_termination):
        assert check(full).outcome == check(reduced).outcome


def test_reduced_states_are_reachable(both):
    full, reduced = both
    everything = set(full.states)
    assert {st for st in reduced.states if not st.aborted} <= everything


def test_paths_replay_to_their_states(both):
    _, reduced = both
    system = reduced.system
    for i in range(0, len(reduced), max(1, len(reduced) // 20)):
        assert replay_choices(system, reduced.path(i))[-1] == reduced.states[i]


def test_tiny_instance_only_graph():
    # [TRIVIAL] one instance, nothing to analyse: STOP reaches it on every path
    g = explore(synth(1, 0, 0))
    assert g.complete and len(g.deadlocks()) == 0
    for i in g.terminal():
        st = g.states[i]
        assert st.agents[0].phase is CtlPhase.STOPPED and g.system.all_stopped(st)


@pytest.mark.parametrize("n", [(1, 0, 1), (2, 1, 2)])
def test_faithful_graphs_have_no_deadlock_and_conserve_activity(n):
    g = explore(synth(*n))
    assert g.complete and not g.deadlocks() and not g.aborted()
    for st in g.states:
        a, o = ledger(st)
        assert a == o
    for i in g.terminal():
        st = g.states[i]
        assert st.agents[0].act == 0 and g.system.all_stopped(st)


def test_random_runs_end_in_explored_terminal_states():
    cfg = synth(2, 1, 2)
    g = explore(cfg)
    ends = {g.states[i] for i in g.terminal()}
    for seed in range(20):
        _, report = run_random(cfg, seed=seed)
        assert report.final_state in ends


def test_state_limit_marks_graph_incomplete():
    g = explore(synth(2, 1, 2), max_states=20)
    assert not g.complete and "max_states" in g.stop_reason and g.frontier
    assert len(g) <= 20


def test_depth_limit_marks_graph_incomplete():
    g = explore(synth(2, 1, 2), max_depth=5)
    assert not g.complete and "max_depth" in g.stop_reason
    assert all(g.depth[i] >= 5 for i in g.frontier)


def test_stop_at_finds_a_target_in_both_orders():
    cfg = synth(2, 1, 2)
    system = System(cfg)
    target = lambda st: st.agents[0].phase is CtlPhase.STOPPED  # noqa: E731
    for order in ("bfs", "dfs"):
        g = explore(system, stop_at=target, order=order)
        assert g.hit is not None and target(g.states[g.hit])
        assert not g.complete and g.stop_reason == "target state reached"
    with pytest.raises(ValueError):
        explore(system, order="sideways")


def test_visited_table_has_no_collisions():
    g = explore(synth(2, 1, 2))
    assert len(set(g.states)) == len(g.states)
    assert len({hash(s) for s in g.states}) > 0.99 * len(g.states)
