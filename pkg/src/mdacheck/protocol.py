"""Agent protocols as pure transition functions.

Every function takes an agent state (plus the message being consumed and the
system config) and returns the new state together with the messages it emits,
in protocol order. Emissions are ``(destination agent id, message)`` pairs;
the controller is agent 0. Nothing here touches channels: the runtime
delivers what these functions return.

Activity accounting: before dispatching a batch of ``k`` work messages an
agent reports ``ActDelta(k)``, and after finishing each received message it
reports ``ActDelta(-1)``. The initial ``+1`` of an instance or relation burst
stands for the agent itself and is closed by the burst's final ``-1``.
"""

from __future__ import annotations

import itertools
from enum import IntEnum
from typing import Optional

from .config import RuleSpec, SystemConfig
from .intervals import EMPTY, IntervalSet, interval_union
from .messages import (
    AGENT,
    CONTROLLER,
    ActDelta,
    AgentIntro,
    Arg,
    ArgVector,
    AttrValue,
    RelNotice,
    RelUpdate,
    StopToken,
    to_arg,
)
from .model import AttributeSlot, RelationInstance, record


class ProtocolViolation(RuntimeError):
    """A transition was requested in a phase where the protocol forbids it."""


class TopologyError(RuntimeError):
    """A message references an agent, attribute or slot the topology lacks."""


class Phase(IntEnum):
    INITIAL_BURST = 0
    LISTENING = 1
    STOPPED = 2


class CtlPhase(IntEnum):
    WAITING = 0
    COUNTING = 1
    STOPPED = 2


MINUS_ONE = ActDelta(-1)


@record
class InstanceAgentState:
    id: int
    class_id: int
    attrs: tuple = ()
    out_rules: tuple = ()
    pos: IntervalSet = EMPTY
    rel: tuple = ()  # ((relation agent id, (instance indices...)), ...)
    phase: Phase = Phase.INITIAL_BURST
    was_upd: bool = False
    birth: bool = False  # created by a rule; its start was announced by the creator
    parent: Optional[int] = None


@record
class RelationAgentState:
    id: int
    relation_id: int
    instances: tuple = ()  # RelationInstance, sorted by index
    out_rules: tuple = ()
    pos: IntervalSet = EMPTY
    phase: Phase = Phase.INITIAL_BURST
    was_upd: bool = False
    max_instances: int = 1


@record
class RuleAgentState:
    id: int
    signature: tuple = ()
    pools: tuple = ()  # per slot, args in arrival order
    unmatched: tuple = ()  # agent introductions no slot asked for
    input_phase: Phase = Phase.LISTENING
    result_phase: Phase = Phase.LISTENING
    gen: int = 0
    points: tuple = ()  # ((PositionPoint, spawns at that point), ...) sorted
    bound_violation: bool = False

    @property
    def pnt(self) -> int:
        return len(self.points)

    def point_count(self, point) -> int:
        for p, n in self.points:
            if p == point:
                return n
        return 0


@record
class ControllerState:
    act: int = 0
    seen_first: bool = False
    phase: CtlPhase = CtlPhase.WAITING
    act_negative: bool = False


def _announce(k: int, batch: list, cfg: SystemConfig) -> list:
    """``ActDelta(k)`` covering ``batch``; the fault flag inverts the order."""
    if cfg.fault_notify_after:
        return batch + [(CONTROLLER, ActDelta(k))]
    return [(CONTROLLER, ActDelta(k))] + batch


# -- instance agents ---------------------------------------------------------


def instance_initial_burst(s: InstanceAgentState, cfg: SystemConfig):
    if s.phase is not Phase.INITIAL_BURST:
        raise ProtocolViolation(f"instance {s.id}: initial burst in phase {s.phase.name}")
    intro = AgentIntro(s.id, s.class_id, s.pos)
    out = _announce(len(s.out_rules) + 1, [(r, intro) for r in s.out_rules], cfg)
    for a in s.attrs:
        if not a.evaluated:
            continue
        batch = [(r, AttrValue(s.id, s.class_id, a.attr_id, v, a.pos)) for v in sorted(a.values) for r in a.out_rules]
        out += _announce(len(batch), batch, cfg)
    out.append((CONTROLLER, MINUS_ONE))
    if s.birth:
        out.append((CONTROLLER, MINUS_ONE))  # the creator counted this agent as one work item
    return _replace_instance(s, phase=Phase.LISTENING, birth=False), out


def _replace_instance(s: InstanceAgentState, **kw) -> InstanceAgentState:
    d = dict(
        id=s.id,
        class_id=s.class_id,
        attrs=s.attrs,
        out_rules=s.out_rules,
        pos=s.pos,
        rel=s.rel,
        phase=s.phase,
        was_upd=s.was_upd,
        birth=s.birth,
        parent=s.parent,
    )
    d.update(kw)
    return InstanceAgentState(**d)


def instance_handle(s: InstanceAgentState, m, cfg: SystemConfig):
    if s.phase is Phase.STOPPED:
        return s, []
    if s.phase is not Phase.LISTENING:
        raise ProtocolViolation(f"instance {s.id}: message before initial burst")
    if isinstance(m, StopToken):
        return _replace_instance(s, phase=Phase.STOPPED), []
    if isinstance(m, RelNotice):
        return _replace_instance(s, rel=_add_rel(s, m.sender, m.index)), [(CONTROLLER, MINUS_ONE)]
    if isinstance(m, AttrValue):
        for k, a in enumerate(s.attrs):
            if a.attr_id == m.attr_id:
                break
        else:
            raise TopologyError(f"instance {s.id} has no attribute {m.attr_id}")
        merge = cfg.adjacency_merge
        new_pos = interval_union(a.pos, m.pos, merge)
        slot = AttributeSlot(a.attr_id, a.values | {m.value}, a.out_rules, new_pos)
        attrs = s.attrs[:k] + (slot,) + s.attrs[k + 1 :]
        s2 = _replace_instance(s, attrs=attrs, pos=interval_union(s.pos, m.pos, merge), was_upd=True)
        fresh = AttrValue(s.id, s.class_id, a.attr_id, m.value, new_pos)
        out = _announce(len(a.out_rules), [(r, fresh) for r in a.out_rules], cfg)
        out.append((CONTROLLER, MINUS_ONE))
        return s2, out
    raise TopologyError(f"instance {s.id} cannot handle {type(m).__name__}")


def _add_rel(s: InstanceAgentState, rel_agent: int, index: int) -> tuple:
    items = dict(s.rel)
    if rel_agent not in items:
        raise TopologyError(f"instance {s.id} is not connected to relation agent {rel_agent}")
    items[rel_agent] = tuple(sorted(set(items[rel_agent]) | {index}))
    return tuple(sorted(items.items()))


# -- relation agents ---------------------------------------------------------


def _notices(s: RelationAgentState, inst: RelationInstance, cfg: SystemConfig) -> list:
    note = RelNotice(s.id, s.relation_id, inst.index, inst.o1, inst.o2, inst.pos)
    batch = [(inst.o1, note), (inst.o2, note)] + [(r, note) for r in s.out_rules]
    return _announce(len(s.out_rules) + 2, batch, cfg)


def _replace_relation(s: RelationAgentState, **kw) -> RelationAgentState:
    d = dict(
        id=s.id,
        relation_id=s.relation_id,
        instances=s.instances,
        out_rules=s.out_rules,
        pos=s.pos,
        phase=s.phase,
        was_upd=s.was_upd,
        max_instances=s.max_instances,
    )
    d.update(kw)
    return RelationAgentState(**d)


def relation_initial_burst(s: RelationAgentState, cfg: SystemConfig):
    if s.phase is not Phase.INITIAL_BURST:
        raise ProtocolViolation(f"relation {s.id}: initial burst in phase {s.phase.name}")
    out = [(CONTROLLER, ActDelta(1))]
    for inst in s.instances:
        if inst.evaluated:
            out += _notices(s, inst, cfg)
    out.append((CONTROLLER, MINUS_ONE))
    return _replace_relation(s, phase=Phase.LISTENING), out


def relation_handle(s: RelationAgentState, m, cfg: SystemConfig):
    if s.phase is Phase.STOPPED:
        return s, []
    if s.phase is not Phase.LISTENING:
        raise ProtocolViolation(f"relation {s.id}: message before initial burst")
    if isinstance(m, StopToken):
        return _replace_relation(s, phase=Phase.STOPPED), []
    if not isinstance(m, RelUpdate):
        raise TopologyError(f"relation {s.id} cannot handle {type(m).__name__}")
    if not 1 <= m.index <= s.max_instances:
        raise TopologyError(f"relation {s.id}: instance index {m.index} outside 1..{s.max_instances}")
    merge = cfg.adjacency_merge
    insts = list(s.instances)
    for k, inst in enumerate(insts):
        if inst.index == m.index:
            break
    else:
        inst = RelationInstance(m.index)
        insts.append(inst)
        insts.sort(key=lambda i: i.index)
        k = insts.index(inst)
    was_evaluated = inst.evaluated
    o1, o2, o1_pos, o2_pos, attrs = inst.o1, inst.o2, inst.o1_pos, inst.o2_pos, inst.attrs
    if m.slot == "o1":
        o1_pos = interval_union(o1_pos, m.pos, merge) if o1 == m.value else m.pos
        o1 = m.value
    elif m.slot == "o2":
        o2_pos = interval_union(o2_pos, m.pos, merge) if o2 == m.value else m.pos
        o2 = m.value
    else:
        item = (int(m.slot), m.value, m.pos)
        if item not in attrs:
            attrs = tuple(sorted(attrs + (item,)))
    inst = RelationInstance(inst.index, o1, o2, o1_pos, o2_pos, attrs, inst.pos).recomputed(merge)
    insts[k] = inst
    s2 = _replace_relation(s, instances=tuple(insts), pos=interval_union(s.pos, inst.pos, merge), was_upd=True)
    out = []
    if inst.evaluated and not (cfg.announce_once and was_evaluated):
        out += _notices(s2, inst, cfg)
    out.append((CONTROLLER, MINUS_ONE))
    return s2, out


# -- rule agents ----------------------------------------------------------------


def make_arg(signature: tuple, pools: tuple, incoming: Arg):
    """Place ``incoming`` in its slot and form every new complete vector.

    Returns ``(slot index or None, new pools, vectors)``. Each vector holds
    the incoming argument in its slot and one pooled argument in every other
    slot; an argument already pooled forms nothing, so no vector repeats.
    """
    for k, slot in enumerate(signature):
        if slot.accepts(incoming.kind, incoming.cls):
            break
    else:
        if incoming.kind == AGENT:
            return None, pools, []
        raise TopologyError(f"no argument slot accepts {incoming.kind} of class {incoming.cls}")
    if incoming in pools[k]:
        return k, pools, []
    others = [pools[j] if j != k else (incoming,) for j in range(len(signature))]
    vectors = [tuple(combo) for combo in itertools.product(*others)]
    new_pools = pools[:k] + (pools[k] + (incoming,),) + pools[k + 1 :]
    return k, new_pools, vectors


def _replace_rule(s: RuleAgentState, **kw) -> RuleAgentState:
    d = dict(
        id=s.id,
        signature=s.signature,
        pools=s.pools,
        unmatched=s.unmatched,
        input_phase=s.input_phase,
        result_phase=s.result_phase,
        gen=s.gen,
        points=s.points,
        bound_violation=s.bound_violation,
    )
    d.update(kw)
    return RuleAgentState(**d)


def rule_proc_input(s: RuleAgentState, m, cfg: SystemConfig):
    """ProcInput: returns ``(state, emitted, internal)``.

    ``internal`` holds what goes to this rule's own ProcResult queue.
    """
    if s.input_phase is Phase.STOPPED:
        return s, [], []
    if isinstance(m, StopToken):
        return _replace_rule(s, input_phase=Phase.STOPPED), [], [StopToken()]
    arg = to_arg(m)
    slot, pools, vectors = make_arg(s.signature, s.pools, arg)
    if slot is None:
        s2 = s if arg in s.unmatched else _replace_rule(s, unmatched=s.unmatched + (arg,))
    else:
        s2 = s if pools is s.pools else _replace_rule(s, pools=pools)
    internal = [ArgVector(v) for v in vectors]
    return s2, [(CONTROLLER, ActDelta(len(internal) - 1))], internal


def rule_proc_result(s: RuleAgentState, v, cfg: SystemConfig, spec: RuleSpec):
    """ProcResult: returns ``(state, emitted, spawned)``.

    ``spawned`` lists :class:`SpawnRequest` objects the runtime turns into
    new instance agents before delivering ``emitted``.
    """
    from .synth import make_res_imitation

    if s.result_phase is Phase.STOPPED:
        return s, [], []
    if isinstance(v, StopToken):
        return _replace_rule(s, result_phase=Phase.STOPPED), [], []
    res = make_res_imitation(spec, v.args, cfg)
    points = dict(s.points)
    gen, violated = s.gen, s.bound_violation
    spawned = []
    for req in res.spawns:
        n = points.get(req.point, 0)
        if not cfg.unbounded_spawn and n >= spec.imitation.spawn_quota:
            continue
        if cfg.enforce_hom_lim and n >= cfg.hom_lim:
            violated = True
            continue
        points[req.point] = n + 1
        gen += 1
        spawned.append(req)
    out = []
    if res.sends or spawned:
        out += _announce(len(res.sends) + len(spawned), list(res.sends), cfg)
    out.append((CONTROLLER, MINUS_ONE))
    if gen != s.gen or violated != s.bound_violation:
        s = _replace_rule(s, gen=gen, points=tuple(sorted(points.items())), bound_violation=violated)
    return s, out, spawned


# -- controller --------------------------------------------------------------------


def controller_step(s: ControllerState, mailbox: tuple, agent_ids=()):
    """One controller transition: read one delta, or break and broadcast STOP.

    Returns ``(state, emitted, consumed message or None)``.
    """
    if s.phase is CtlPhase.STOPPED:
        raise ProtocolViolation("controller already stopped")
    if mailbox:
        m = mailbox[0]
        act = s.act + m.delta
        return (
            ControllerState(act, True, CtlPhase.COUNTING, s.act_negative or act < 0),
            [],
            m,
        )
    if s.phase is CtlPhase.COUNTING and s.act == 0:
        stop = StopToken()
        return ControllerState(0, True, CtlPhase.STOPPED, s.act_negative), [(a, stop) for a in agent_ids], None
    raise ProtocolViolation("controller is blocked: empty mailbox and no break condition")


def initial_state_of(spec, cfg: SystemConfig):
    """Agent state for a static agent spec from the config."""
    from .config import InstanceSpec, RelationSpec

    if isinstance(spec, InstanceSpec):
        attrs = tuple(AttributeSlot(a.attr_id, frozenset(a.values), a.out_rules, a.pos) for a in spec.attrs)
        pos = EMPTY
        for a in attrs:
            pos = interval_union(pos, a.pos, cfg.adjacency_merge)
        return InstanceAgentState(
            spec.id, spec.class_id, attrs, spec.out_rules, pos, tuple((r, ()) for r in sorted(spec.rel))
        )
    if isinstance(spec, RelationSpec):
        insts = tuple(
            RelationInstance(i.index, i.o1, i.o2, i.o1_pos, i.o2_pos).recomputed(cfg.adjacency_merge)
            for i in sorted(spec.instances, key=lambda i: i.index)
        )
        pos = EMPTY
        for i in insts:
            pos = interval_union(pos, i.pos, cfg.adjacency_merge)
        return RelationAgentState(spec.id, spec.relation_id, insts, spec.out_rules, pos, max_instances=spec.max_instances)
    return RuleAgentState(spec.id, spec.signature, tuple(() for _ in spec.signature))
