import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdacheck.config import ArgSlot, SystemConfig
from mdacheck.intervals import EMPTY, IntervalSet
from mdacheck.messages import (
    AGENT,
    ATTR,
    CONTROLLER,
    ActDelta,
    AgentIntro,
    Arg,
    ArgVector,
    AttrValue,
    RelNotice,
    RelUpdate,
    StopToken,
    is_work,
)
from mdacheck.model import AttributeSlot, RelationInstance
from mdacheck.protocol import (
    ControllerState,
    CtlPhase,
    InstanceAgentState,
    Phase,
    ProtocolViolation,
    RelationAgentState,
    RuleAgentState,
    TopologyError,
    controller_step,
    instance_handle,
    instance_initial_burst,
    make_arg,
    relation_handle,
    relation_initial_burst,
    rule_proc_input,
    rule_proc_result,
)
from mdacheck.synth import SynthParams, build_synthetic, make_res_imitation

from oracles import cross_product

CFG = SystemConfig()
P = IntervalSet.point


def deltas(out):
    return [m.delta for d, m in out if d == CONTROLLER]


def assert_notify_before_dispatch(out):
    """Every work message is covered by an earlier, not yet used up, positive delta."""
    credit = 0
    for dest, m in out:
        if isinstance(m, ActDelta):
            if m.delta > 0:
                credit += m.delta
        elif is_work(m):
            assert credit > 0, out
            credit -= 1


def instance(out_rules=(), attrs=(), **kw):
    return InstanceAgentState(1, 1, tuple(attrs), tuple(out_rules), **kw)


# -- instance agents -----------------------------------------------------------------


def test_burst_without_evaluated_attributes():
    # [TRIVIAL] +4, three introductions, -1
    s2, out = instance_initial_burst(instance((5, 6, 7)), CFG)
    assert out == [(0, ActDelta(4))] + [(r, AgentIntro(1, 1, EMPTY)) for r in (5, 6, 7)] + [(0, ActDelta(-1))]
    assert s2.phase is Phase.LISTENING


def test_burst_with_one_evaluated_attribute():
    # [DERIVED] +3, 2 intros, +2, 2 values, -1: net +4 for 4 work items
    a = AttributeSlot(0, frozenset({1}), (5, 6), P(3))
    s2, out = instance_initial_burst(instance((5, 6), [a, AttributeSlot(1, frozenset(), (5,))]), CFG)
    kinds = [type(m).__name__ for _, m in out]
    assert kinds == ["ActDelta", "AgentIntro", "AgentIntro", "ActDelta", "AttrValue", "AttrValue", "ActDelta"]
    assert deltas(out) == [3, 2, -1]
    assert sum(deltas(out)) == sum(is_work(m) for _, m in out)
    assert_notify_before_dispatch(out)


def test_burst_only_once():
    s2, _ = instance_initial_burst(instance(), CFG)
    with pytest.raises(ProtocolViolation):
        instance_initial_burst(s2, CFG)
    with pytest.raises(ProtocolViolation):
        instance_handle(instance(), StopToken(), CFG)


def test_born_agent_closes_its_creation_credit():
    s = instance(birth=True)
    _, out = instance_initial_burst(s, CFG)
    assert deltas(out) == [1, -1, -1]


def test_instance_stop_and_absorption():
    s = instance(phase=Phase.LISTENING)
    s2, out = instance_handle(s, StopToken(), CFG)
    assert s2.phase is Phase.STOPPED and out == []
    for m in (StopToken(), AttrValue(9, 1, 0, 1), RelNotice(3, 1, 1)):
        assert instance_handle(s2, m, CFG) == (s2, [])


def test_instance_attribute_update():
    # [DERIVED] value 7 at word 4 into attribute 1 feeding R3
    s = instance(attrs=[AttributeSlot(0), AttributeSlot(1, frozenset(), (3,))], phase=Phase.LISTENING)
    s2, out = instance_handle(s, AttrValue(3, 1, 1, 7, P(4)), CFG)
    assert 7 in s2.attrs[1].values and s2.attrs[1].pos == ((4, 4),)
    assert s2.pos == ((4, 4),) and s2.was_upd
    assert out == [(0, ActDelta(1)), (3, AttrValue(1, 1, 1, 7, P(4))), (0, ActDelta(-1))]


def test_instance_repeated_value_still_counts_as_update():
    s = instance(attrs=[AttributeSlot(0, frozenset({7}), (3,), P(4))], phase=Phase.LISTENING)
    s2, out = instance_handle(s, AttrValue(3, 1, 0, 7, P(4)), CFG)
    assert s2.was_upd and deltas(out) == [1, -1]


def test_instance_relation_notice():
    # [DERIVED] index 1 of relation agent 2 is recorded
    s = instance(rel=((2, ()),), phase=Phase.LISTENING)
    s2, out = instance_handle(s, RelNotice(2, 1, 1, 1, 4), CFG)
    assert s2.rel == ((2, (1,)),) and out == [(0, ActDelta(-1))]
    with pytest.raises(TopologyError):
        instance_handle(s, RelNotice(8, 1, 1), CFG)


def test_instance_unknown_attribute():
    with pytest.raises(TopologyError):
        instance_handle(instance(phase=Phase.LISTENING), AttrValue(3, 1, 5, 1), CFG)


# -- relation agents -------------------------------------------------------------------


def relation(instances=(), out_rules=(), **kw):
    return RelationAgentState(4, 1, tuple(instances), tuple(out_rules), max_instances=2, **kw)


def test_relation_burst_without_instances():
    # [TRIVIAL]
    _, out = relation_initial_burst(relation(), CFG)
    assert out == [(0, ActDelta(1)), (0, ActDelta(-1))]


def test_relation_burst_with_evaluated_instance():
    # [DERIVED] +1, +3, notices to both objects and the rule, -1
    inst = RelationInstance(1, 1, 2, P(1), P(2)).recomputed()
    _, out = relation_initial_burst(relation([inst], (9,)), CFG)
    assert deltas(out) == [1, 3, -1]
    assert [d for d, m in out if isinstance(m, RelNotice)] == [1, 2, 9]
    assert_notify_before_dispatch(out)


def test_relation_first_object_only():
    # [DERIVED] not evaluated yet: only the -1
    s2, out = relation_handle(relation(phase=Phase.LISTENING), RelUpdate(9, 1, "o1", 1, P(3)), CFG)
    assert out == [(0, ActDelta(-1))] and s2.was_upd
    assert s2.instances[0].o1 == 1 and not s2.instances[0].evaluated


def test_relation_second_object_announces():
    # [DERIVED] the instance becomes evaluated
    s = relation([RelationInstance(1, o1=1, o1_pos=P(3))], (9,), phase=Phase.LISTENING)
    s2, out = relation_handle(s, RelUpdate(9, 1, "o2", 2, P(5)), CFG)
    assert deltas(out) == [3, -1]
    inst = s2.instances[0]
    assert inst.evaluated and inst.pos == ((3, 3), (5, 5)) and s2.pos == inst.pos


def test_relation_reannounces_unless_announce_once():
    s = relation([RelationInstance(1, 1, 2, P(1), P(2)).recomputed()], phase=Phase.LISTENING)
    m = RelUpdate(9, 1, 3, 42, P(7))
    _, out = relation_handle(s, m, CFG)
    assert deltas(out) == [2, -1]
    _, out = relation_handle(s, m, CFG.with_flags(announce_once=True))
    assert deltas(out) == [-1]


def test_relation_creates_and_bounds_instances():
    s = relation(phase=Phase.LISTENING)
    s2, _ = relation_handle(s, RelUpdate(9, 2, "o1", 1), CFG)
    assert [i.index for i in s2.instances] == [2]
    with pytest.raises(TopologyError):
        relation_handle(s, RelUpdate(9, 3, "o1", 1), CFG)
    with pytest.raises(TopologyError):
        relation_handle(s, AttrValue(9, 1, 0, 1), CFG)


def test_relation_stop_absorbs():
    s2, out = relation_handle(relation(phase=Phase.LISTENING), StopToken(), CFG)
    assert s2.phase is Phase.STOPPED and out == []
    assert relation_handle(s2, RelUpdate(9, 1, "o1", 1), CFG) == (s2, [])


# -- make_arg ----------------------------------------------------------------------------


def a(n, kind=ATTR, cls=1):
    return Arg(kind, n, cls, 0, n, (), P(n))


SIG2 = (ArgSlot(frozenset({ATTR})), ArgSlot(frozenset({AGENT})))


def test_make_arg_other_slot_empty():
    # [TRIVIAL]
    k, pools, vecs = make_arg(SIG2, ((), ()), a(1))
    assert (k, vecs) == (0, []) and pools == ((a(1),), ())


def test_make_arg_pairs_with_pooled_items():
    # [DERIVED] cross product with {x, y}
    x, y = a(2, AGENT), a(3, AGENT)
    _, _, vecs = make_arg(SIG2, ((), (x, y)), a(1))
    assert vecs == [(a(1), x), (a(1), y)]


def test_make_arg_three_slots():
    # [DERIVED] 2 x 3 vectors
    sig = (ArgSlot(frozenset({ATTR}), 1), ArgSlot(frozenset({ATTR}), 2), ArgSlot(frozenset({AGENT})))
    pools = ((), (a(1, cls=2), a(2, cls=2)), (a(3, AGENT), a(4, AGENT), a(5, AGENT)))
    _, _, vecs = make_arg(sig, pools, a(9))
    assert len(vecs) == 6 and vecs == cross_product(3, 0, pools, a(9))


def test_make_arg_duplicate_forms_nothing():
    k, pools, vecs = make_arg(SIG2, ((a(1),), (a(2, AGENT),)), a(1))
    assert vecs == [] and pools == ((a(1),), (a(2, AGENT),))


def test_make_arg_unmatched():
    assert make_arg(SIG2[:1], ((),), a(2, AGENT)) == (None, ((),), [])
    with pytest.raises(TopologyError):
        make_arg(SIG2[1:], ((),), a(2))


@given(
    st.lists(st.integers(1, 4), min_size=1, max_size=4),
    st.lists(st.tuples(st.integers(0, 3), st.integers(1, 6)), max_size=12),
)
def test_make_arg_matches_cross_product_and_never_repeats(classes, arrivals):
    sig = tuple(ArgSlot(frozenset({ATTR}), c) for c in classes)
    pools = tuple(() for _ in sig)
    seen = set()
    for slot_pick, n in arrivals:
        cls = classes[slot_pick % len(classes)]
        incoming = a(n, cls=cls)
        k = next(i for i, s in enumerate(sig) if s.accepts(ATTR, cls))
        expected = [] if incoming in pools[k] else cross_product(len(sig), k, pools, incoming)
        _, pools, vecs = make_arg(sig, pools, incoming)
        assert vecs == expected
        assert not seen & set(vecs)
        seen |= set(vecs)


# -- rule agents ------------------------------------------------------------------------


def rule_state(pools=((), ())):
    return RuleAgentState(3, SIG2, pools)


def test_proc_input_no_vector():
    # [TRIVIAL] |args| = 0
    _, out, internal = rule_proc_input(rule_state(), AttrValue(1, 1, 0, 1, P(1)), CFG)
    assert out == [(0, ActDelta(-1))] and internal == []


def test_proc_input_two_vectors():
    # [DERIVED] |args| = 2
    pools = ((a(1), a(2)), ())
    _, out, internal = rule_proc_input(rule_state(pools), AgentIntro(7, 1, P(7)), CFG)
    assert out == [(0, ActDelta(1))] and len(internal) == 2
    assert all(isinstance(v, ArgVector) for v in internal)


def test_proc_input_intro_pairs_with_one_value():
    # [DERIVED] |args| = 1, net zero
    _, out, internal = rule_proc_input(rule_state(((a(1),), ())), AgentIntro(7, 1, P(7)), CFG)
    assert out == [(0, ActDelta(0))] and len(internal) == 1


def test_proc_input_stop_forwards():
    s2, out, internal = rule_proc_input(rule_state(), StopToken(), CFG)
    assert s2.input_phase is Phase.STOPPED and out == [] and internal == [StopToken()]
    assert rule_proc_input(s2, AttrValue(1, 1, 0, 1), CFG) == (s2, [], [])


def synth_rule():
    cfg = build_synthetic(SynthParams(1, 0, 1))
    return cfg, cfg.rules[0]


def test_proc_result_inconsistent_vector():
    # [TRIVIAL] wrong source attribute: empty result
    cfg, spec = synth_rule()
    v = ArgVector((Arg(ATTR, 1, 1, 1, 1, (), P(1)), Arg(AGENT, 1, 1, None, None, (), P(1))))
    s2, out, spawned = rule_proc_result(RuleAgentState(spec.id), v, cfg, spec)
    assert out == [(0, ActDelta(-1))] and spawned == [] and s2.gen == 0


def test_proc_result_one_update_and_one_spawn():
    # [DERIVED] value 1 from instance 1: update attribute 1 and create one agent
    cfg, spec = synth_rule()
    v = ArgVector((Arg(ATTR, 1, 1, 0, 1, (), P(1)), Arg(AGENT, 1, 1, None, None, (), P(1))))
    s2, out, spawned = rule_proc_result(RuleAgentState(spec.id), v, cfg, spec)
    assert deltas(out) == [2, -1]
    assert [m for _, m in out if isinstance(m, AttrValue)] == [AttrValue(spec.id, 1, 1, 1, P(1))]
    assert len(spawned) == 1 and s2.gen == 1 and s2.pnt == 1
    # the quota for this point is used up
    s3, out, spawned = rule_proc_result(s2, v, cfg, spec)
    assert spawned == [] and s3.gen == 1 and deltas(out) == [1, -1]


def test_proc_result_saturated_point_is_suppressed():
    # [DERIVED] count already at HomLim: no spawn, violation flagged
    cfg, spec = synth_rule()
    cfg = cfg.with_flags(unbounded_spawn=True, hom_lim=1)
    v = ArgVector((Arg(ATTR, 1, 1, 0, 1, (), P(1)), Arg(AGENT, 1, 1, None, None, (), P(1))))
    point = make_res_imitation(spec, v.args, cfg).spawns[0].point
    s = RuleAgentState(spec.id, gen=1, points=((point, 1),))
    s2, _, spawned = rule_proc_result(s, v, cfg, spec)
    assert spawned == [] and s2.bound_violation and s2.gen == 1


def test_proc_result_stop():
    cfg, spec = synth_rule()
    s2, out, spawned = rule_proc_result(RuleAgentState(spec.id), StopToken(), cfg, spec)
    assert s2.result_phase is Phase.STOPPED and out == [] and spawned == []
    assert rule_proc_result(s2, ArgVector(()), cfg, spec) == (s2, [], [])


# -- controller -------------------------------------------------------------------------


def test_controller_first_message():
    # [TRIVIAL]
    s2, out, m = controller_step(ControllerState(), (ActDelta(4),))
    assert (s2.act, s2.phase, s2.seen_first, out, m) == (4, CtlPhase.COUNTING, True, [], ActDelta(4))


def test_controller_reaches_zero_then_breaks():
    # [DERIVED] act 1, one -1 queued: drain, then STOP to everyone
    s = ControllerState(1, True, CtlPhase.COUNTING)
    s2, out, _ = controller_step(s, (ActDelta(-1),))
    assert s2.act == 0 and out == []
    s3, out, m = controller_step(s2, (), agent_ids=(1, 2))
    assert s3.phase is CtlPhase.STOPPED and m is None
    assert out == [(1, StopToken()), (2, StopToken())]


def test_controller_needs_both_conjuncts():
    # [TRIVIAL] act 0 with a queued delta: consume, do not stop
    s = ControllerState(0, True, CtlPhase.COUNTING)
    s2, out, m = controller_step(s, (ActDelta(2),))
    assert out == [] and s2.phase is CtlPhase.COUNTING
    with pytest.raises(ProtocolViolation):
        controller_step(ControllerState(), ())
    with pytest.raises(ProtocolViolation):
        controller_step(ControllerState(1, True, CtlPhase.COUNTING), ())
    with pytest.raises(ProtocolViolation):
        controller_step(ControllerState(0, True, CtlPhase.STOPPED), ())


def test_controller_flags_negative_act():
    s2, _, _ = controller_step(ControllerState(0, True, CtlPhase.COUNTING), (ActDelta(-1),))
    assert s2.act == -1 and s2.act_negative


def test_notify_after_fault_inverts_order():
    cfg = CFG.with_flags(fault_notify_after=True)
    _, out = instance_initial_burst(instance((5,)), cfg)
    assert isinstance(out[0][1], AgentIntro) and out[1] == (0, ActDelta(2))
