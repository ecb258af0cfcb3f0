"""Channels, agent lifecycle and the interleaving semantics.

A :class:`GlobalState` is an immutable snapshot of every agent and every
mailbox. Mailboxes are addressed by endpoint ``2 * agent_id + port``: port 0
is an agent's input channel, port 1 is the internal queue between a rule's
ProcInput and ProcResult. :meth:`System.step` performs one atomic transition
of one endpoint: an initial burst, one message consumption with all its
emissions, the controller's break, or (in fine-grained mode) one pending
send.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Optional

from .config import SystemConfig, topology, validate
from .messages import CONTROLLER, WORK_TYPES, ActDelta, ArgVector, StopToken, encode
from .model import record
from .protocol import (
    ControllerState,
    CtlPhase,
    InstanceAgentState,
    Phase,
    ProtocolViolation,
    RelationAgentState,
    RuleAgentState,
    TopologyError,
    controller_step,
    initial_state_of,
    instance_handle,
    instance_initial_burst,
    relation_handle,
    relation_initial_burst,
    rule_proc_input,
    rule_proc_result,
)

_WORK = frozenset(WORK_TYPES)

@record
class GlobalState:
    agents: tuple  # index = agent id, 0 is the controller
    mailboxes: tuple  # index = endpoint
    outboxes: tuple = ()  # index = endpoint; sends still owed by a fine-grained transition
    dropped: bool = False  # the drop-minus-one fault has fired
    aborted: Optional[str] = None


@dataclass
class TraceEvent:
    step: int
    agent: int
    port: int
    kind: str  # burst | consume | break | flush | abort
    consumed: Optional[dict]
    emitted: list
    act: int
    active: list

    def to_record(self) -> dict:
        return {
            "step": self.step,
            "agent": self.agent,
            "port": self.port,
            "kind": self.kind,
            "consumed": self.consumed,
            "emitted": self.emitted,
            "act": self.act,
            "active": self.active,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))


class SchedulingError(RuntimeError):
    pass


def _endpoint(agent: int, port: int = 0) -> int:
    return 2 * agent + port


class System:
    """A configuration bound to its derived topology; the transition relation."""

    def __init__(self, cfg: SystemConfig, check: bool = True):
        self.cfg = validate(cfg) if check else cfg
        self.edges = topology(cfg)
        self.n_static = cfg.max_static_id
        self.n_info_static = cfg.n_instance + cfg.n_relation
        self.fine = cfg.fine_grain or cfg.fault_notify_after

    # -- states -------------------------------------------------------------

    def initial_state(self) -> GlobalState:
        cfg = self.cfg
        agents = [ControllerState()]
        for spec in cfg.instances + cfg.relations + cfg.rules:
            agents.append(initial_state_of(spec, cfg))
        n_ep = 2 * len(agents)
        return GlobalState(tuple(agents), ((),) * n_ep, ((),) * n_ep)

    def kind(self, g: GlobalState, agent: int) -> str:
        st = g.agents[agent]
        if isinstance(st, ControllerState):
            return "controller"
        if isinstance(st, InstanceAgentState):
            return "instance"
        if isinstance(st, RelationAgentState):
            return "relation"
        return "rule"

    def launched(self, g: GlobalState) -> bool:
        """True once every static information agent has begun its initial burst."""
        agents = g.agents
        for a in range(1, self.n_info_static + 1):
            if agents[a].phase is Phase.INITIAL_BURST:
                return False
        return True

    # -- enabledness -----------------------------------------------------

    def enabled(self, g: GlobalState) -> list:
        if g.aborted:
            return []
        out = []
        mail, outbox, agents = g.mailboxes, g.outboxes, g.agents
        ctl = agents[0]
        if outbox[0]:
            out.append(0)
        elif ctl.phase is not CtlPhase.STOPPED:
            if mail[0] or (ctl.phase is CtlPhase.COUNTING and ctl.act == 0 and self.launched(g)):
                out.append(0)
        for a in range(1, len(agents)):
            st = agents[a]
            ep = 2 * a
            if type(st) is RuleAgentState:
                if outbox[ep] or (mail[ep] and st.input_phase is not Phase.STOPPED):
                    out.append(ep)
                if outbox[ep + 1] or (mail[ep + 1] and st.result_phase is not Phase.STOPPED):
                    out.append(ep + 1)
            elif outbox[ep] or st.phase is Phase.INITIAL_BURST or (mail[ep] and st.phase is Phase.LISTENING):
                out.append(ep)
        return out

    # -- topology --------------------------------------------------------------

    def connected(self, agents, a: int, b: int) -> bool:
        if a == b or a == CONTROLLER or b == CONTROLLER:
            return True
        if frozenset((a, b)) in self.edges:
            return True
        for x, y in ((a, b), (b, a)):
            if x > self.n_static:
                st = agents[x]
                if y == st.parent or y in st.out_rules or any(y in s.out_rules for s in st.attrs):
                    return True
        return False

    # -- transitions -------------------------------------------------------

    def step(self, g: GlobalState, choice: int, record: bool = True, step_index: int = 0, monitor=None):
        """Run one transition of endpoint ``choice``; returns ``(state, event)``."""
        cfg = self.cfg
        agent, port = divmod(choice, 2)
        if agent >= len(g.agents):
            raise SchedulingError(f"endpoint {choice} does not exist")
        agents = list(g.agents)
        mail = list(g.mailboxes)
        outbox = list(g.outboxes)
        consumed = None
        dropped = g.dropped
        aborted = None

        popped = (False, -1)  # (outbox?, endpoint) whose head this step removes
        if outbox[choice]:
            kind = "flush"
            popped = (True, choice)
            pending = outbox[choice]
            sends = [pending[0]]
            outbox[choice] = pending[1:]
        else:
            st = agents[agent]
            sends = []
            spawned = []
            if agent == CONTROLLER:
                if not mail[0] and not self.launched(g):
                    raise SchedulingError("controller may not break before every agent has started")
                ids = range(1, len(agents))
                try:
                    new, emitted, consumed = controller_step(st, mail[0], ids)
                except ProtocolViolation as exc:
                    raise SchedulingError(str(exc)) from exc
                if consumed is not None:
                    mail[0] = mail[0][1:]
                    popped = (False, 0)
                    kind = "consume"
                else:
                    kind = "break"
                agents[0] = new
                sends = [(_endpoint(d), m) for d, m in emitted]
            elif type(st) is RuleAgentState:
                if not mail[choice]:
                    raise SchedulingError(f"rule {agent} port {port} has an empty mailbox")
                consumed = mail[choice][0]
                mail[choice] = mail[choice][1:]
                popped = (False, choice)
                kind = "consume"
                if port == 0:
                    if st.input_phase is Phase.STOPPED:
                        raise SchedulingError(f"rule {agent} input is stopped")
                    new, emitted, internal = rule_proc_input(st, consumed, cfg)
                    sends = [(choice + 1, v) for v in internal] + [(_endpoint(d), m) for d, m in emitted]
                else:
                    if st.result_phase is Phase.STOPPED:
                        raise SchedulingError(f"rule {agent} result is stopped")
                    new, emitted, spawned = rule_proc_result(st, consumed, cfg, cfg.rule(agent))
                    sends = [(_endpoint(d), m) for d, m in emitted]
                agents[agent] = new
            else:
                is_inst = type(st) is InstanceAgentState
                if st.phase is Phase.INITIAL_BURST:
                    kind = "burst"
                    burst = instance_initial_burst if is_inst else relation_initial_burst
                    new, emitted = burst(st, cfg)
                elif st.phase is Phase.LISTENING and mail[choice]:
                    kind = "consume"
                    consumed = mail[choice][0]
                    mail[choice] = mail[choice][1:]
                    popped = (False, choice)
                    handle = instance_handle if is_inst else relation_handle
                    new, emitted = handle(st, consumed, cfg)
                else:
                    raise SchedulingError(f"agent {agent} is not enabled")
                agents[agent] = new
                sends = [(_endpoint(d), m) for d, m in emitted]

            if spawned:
                n_dynamic = len(agents) - 1 - self.n_static
                if n_dynamic + len(spawned) > cfg.max_dynamic_agents:
                    msg = (
                        f"rule {agent} would create agent #{n_dynamic + len(spawned)} "
                        f"beyond max_dynamic_agents={cfg.max_dynamic_agents}"
                    )
                    g2 = GlobalState(g.agents, g.mailboxes, g.outboxes, g.dropped, msg)
                    ev = None
                    if record:
                        ev = TraceEvent(step_index, agent, port, "abort", _enc(consumed), [], _act(g2), self.active_ids(g2))
                    return g2, ev
                for req in spawned:
                    new_id = len(agents)
                    agents.append(
                        InstanceAgentState(
                            new_id, req.class_id, req.attrs, req.out_rules, req.pos, (), Phase.INITIAL_BURST,
                            False, True, agent,
                        )
                    )
                    mail += [(), ()]
                    outbox += [(), ()]

            if self.fine and len(sends) > 1:
                outbox[choice] = tuple(sends[1:])
                sends = sends[:1]

        appended: dict = {}
        for dest, m in sends:
            d_agent = dest // 2
            if d_agent >= len(agents):
                raise TopologyError(f"agent {agent} sends to unknown agent {d_agent}")
            if not self.connected(agents, agent, d_agent):
                raise TopologyError(f"no channel between agents {agent} and {d_agent}")
            if (
                cfg.fault_drop_minus_one
                and not dropped
                and d_agent == CONTROLLER
                and type(m) is ActDelta
                and m.delta == -1
            ):
                dropped = True
                continue
            appended.setdefault(dest, []).append(m)
        for dest, ms in appended.items():
            mail[dest] = mail[dest] + tuple(ms)

        g2 = GlobalState(tuple(agents), tuple(mail), tuple(outbox), dropped, aborted)
        ev = None
        if record:
            ev = TraceEvent(
                step_index,
                agent,
                port,
                kind,
                _enc(consumed),
                [[dest // 2, dest % 2, encode(m)] for dest, m in sends],
                _act(g2),
                self.active_ids(g2) if monitor is None else monitor.update(g2, popped),
            )
        return g2, ev

    # -- monitors ---------------------------------------------------------------

    def is_active(self, g: GlobalState, a: int) -> bool:
        st = g.agents[a]
        ep = 2 * a
        if g.outboxes[ep] or g.outboxes[ep + 1]:
            return True
        if type(st) is RuleAgentState:
            if st.input_phase is not Phase.STOPPED and any(type(m) is not StopToken for m in g.mailboxes[ep]):
                return True
            if st.result_phase is not Phase.STOPPED and any(type(m) is ArgVector for m in g.mailboxes[ep + 1]):
                return True
            return False
        if st.phase is Phase.STOPPED:
            return False
        if st.phase is Phase.INITIAL_BURST:
            return True
        return any(type(m) is not StopToken for m in g.mailboxes[ep])

    def active_ids(self, g: GlobalState) -> list:
        return [a for a in range(1, len(g.agents)) if self.is_active(g, a)]

    def all_inactive(self, g: GlobalState) -> bool:
        return not any(self.is_active(g, a) for a in range(1, len(g.agents)))

    def ledger(self, g: GlobalState) -> tuple[int, int]:
        """``(announced, outstanding)``; equal whenever accounting is intact.

        announced: controller act plus every delta still on its way.
        outstanding: work messages in channels or owed, plus created agents
        that have not started yet.
        """
        announced = g.agents[0].act
        outstanding = 0
        for ep, box in enumerate(g.mailboxes):
            for m in box:
                if type(m) is ActDelta:
                    announced += m.delta
                elif type(m) in _WORK:
                    outstanding += 1
        for box in g.outboxes:
            for _, m in box:
                if type(m) is ActDelta:
                    announced += m.delta
                elif type(m) in _WORK:
                    outstanding += 1
        for st in g.agents:
            if type(st) is InstanceAgentState and st.birth:
                outstanding += 1
        return announced, outstanding

    def work_in_flight(self, g: GlobalState) -> bool:
        for box in g.mailboxes:
            for m in box:
                if type(m) in _WORK:
                    return True
        return any(type(m) in _WORK for box in g.outboxes for _, m in box)

    def break_state(self, g: GlobalState) -> bool:
        """The controller's break is enabled: counting, act 0, empty mailbox, all started."""
        c = g.agents[0]
        return c.phase is CtlPhase.COUNTING and c.act == 0 and not g.mailboxes[0] and self.launched(g)

    def deadlocked(self, g: GlobalState) -> bool:
        if g.aborted or self.enabled(g):
            return False
        return not self.all_stopped(g)

    def all_stopped(self, g: GlobalState) -> bool:
        for st in g.agents[1:]:
            if type(st) is RuleAgentState:
                if st.input_phase is not Phase.STOPPED or st.result_phase is not Phase.STOPPED:
                    return False
            elif st.phase is not Phase.STOPPED:
                return False
        return True


def _act(g: GlobalState) -> int:
    return g.agents[0].act


def _enc(m):
    return None if m is None else encode(m)


# -- random simulation -----------------------------------------------------------


def pick(seed: int, step: int, n: int) -> int:
    """Uniform index in ``range(n)`` from a counter-based generator keyed by (seed, step)."""
    counter = 0
    limit = (1 << 64) - ((1 << 64) % n)
    while True:
        h = hashlib.blake2b(struct.pack("<qqq", seed, step, counter), digest_size=8).digest()
        x = int.from_bytes(h, "little")
        if x < limit:
            return x % n
        counter += 1


@dataclass
class FinalReport:
    outcome: str  # Terminated | Deadlock | Timeout | Aborted
    steps: int
    stop_broadcast: bool
    ledger_violations: int = 0
    ledger_checks: int = 0
    quiescence_mismatches: int = 0
    act_negative: bool = False
    controller_violation_step: Optional[int] = None
    operability: bool = False
    trace_hash: str = ""
    diagnostic: str = ""
    final_state: Optional[GlobalState] = field(default=None, repr=False)

    @property
    def violated(self) -> bool:
        return self.controller_violation_step is not None or self.act_negative

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "steps": self.steps,
            "stop_broadcast": self.stop_broadcast,
            "ledger_violations": self.ledger_violations,
            "ledger_checks": self.ledger_checks,
            "quiescence_mismatches": self.quiescence_mismatches,
            "act_negative": self.act_negative,
            "controller_violation_step": self.controller_violation_step,
            "operability": self.operability,
            "trace_hash": self.trace_hash,
            "diagnostic": self.diagnostic,
        }


class Trace:
    """Recorded events; ``hash`` is 64 bits of BLAKE2b over the JSON lines."""

    def __init__(self, events=None):
        self.events = list(events or [])
        self._h = hashlib.blake2b(digest_size=8)
        for ev in self.events:
            self._h.update(ev.to_line().encode() + b"\n")

    def append(self, ev: TraceEvent) -> None:
        self.events.append(ev)
        self._h.update(ev.to_line().encode() + b"\n")

    @property
    def choices(self) -> list:
        return [2 * e.agent + e.port for e in self.events]

    @property
    def hash(self) -> str:
        return self._h.hexdigest()

    def lines(self):
        for ev in self.events:
            yield ev.to_line()

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line + "\n")


def load_trace_records(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


class Monitor:
    """Per-step ledger and quiescence bookkeeping over successive states.

    States are immutable, so a channel or agent that is the same object as in
    the previous state keeps its cached contribution; only the parts a step
    replaced are rescanned. The totals always equal ``System.ledger``.
    """

    def __init__(self, system: System):
        self.system = system
        self._mb: list = []  # (box, announced, work, stop tokens)
        self._ob: list = []
        self._ag: list = []  # (agent state, mb0, mb1, ob0, ob1, birth, active)
        self._state = None
        self.announced = 0  # deltas in channels and outboxes
        self.work = 0
        self.births = 0
        self.active = 0

    @staticmethod
    def _count(items, outbox: bool):
        announced = work = stops = 0
        for m in items:
            if outbox:
                m = m[1]
            t = type(m)
            if t is ActDelta:
                announced += m.delta
            elif t in _WORK:
                work += 1
            elif t is StopToken:
                stops += 1
        return announced, work, stops

    def _scan(self, box, old, outbox: bool, pop: bool):
        # channels are FIFO: a step pops at most the head and appends at the tail
        ob, oa, ow, os_ = old
        n = len(ob) - pop
        if n < 0 or len(box) < n:
            return (box,) + self._count(box, outbox)
        ha, hw, hs = self._count(ob[:1], outbox) if pop else (0, 0, 0)
        ta, tw, ts = self._count(box[n:], outbox)
        return box, oa - ha + ta, ow - hw + tw, os_ - hs + ts

    def _sync(self, cache, boxes, outbox, popped):
        for i, box in enumerate(boxes):
            if i >= len(cache):
                new = (box,) + self._count(box, outbox)
                cache.append(new)
            elif cache[i][0] is not box:
                old = cache[i]
                if popped is None:
                    new = (box,) + self._count(box, outbox)
                else:
                    new = self._scan(box, old, outbox, popped == (outbox, i))
                cache[i] = new
                self.announced -= old[1]
                self.work -= old[2]
            else:
                continue
            self.announced += new[1]
            self.work += new[2]

    def _active(self, st, ep: int) -> bool:
        if self._ob[ep][0] or self._ob[ep + 1][0]:
            return True
        box0 = self._mb[ep]
        pending = len(box0[0]) - box0[3]
        if type(st) is RuleAgentState:
            return (st.input_phase is not Phase.STOPPED and pending > 0) or (
                st.result_phase is not Phase.STOPPED and self._mb[ep + 1][2] > 0
            )
        if st.phase is Phase.STOPPED:
            return False
        return st.phase is Phase.INITIAL_BURST or pending > 0

    def update(self, g: GlobalState, popped=None) -> list:
        """Bring the caches up to ``g``; returns the active agent ids.

        ``popped`` is ``(outbox?, endpoint)`` when ``g`` is the successor of
        the previous state by one step that removed that channel's head;
        without it every changed channel is rescanned.
        """
        if g is self._state:
            return self.active_ids()
        self._state = g
        self._sync(self._mb, g.mailboxes, False, popped)
        self._sync(self._ob, g.outboxes, True, popped)
        cache = self._ag
        mbs, obs = g.mailboxes, g.outboxes
        for a, st in enumerate(g.agents):
            ep = 2 * a
            if a < len(cache):
                c = cache[a]
                if c[0] is st and c[1] is mbs[ep] and c[2] is mbs[ep + 1] and c[3] is obs[ep] and c[4] is obs[ep + 1]:
                    continue
                self.births -= c[5]
                self.active -= c[6]
            birth = type(st) is InstanceAgentState and st.birth
            entry = (st, mbs[ep], mbs[ep + 1], obs[ep], obs[ep + 1], birth, a > 0 and self._active(st, ep))
            if a < len(cache):
                cache[a] = entry
            else:
                cache.append(entry)
            self.births += birth
            self.active += entry[6]
        return self.active_ids()

    def active_ids(self) -> list:
        return [a for a, c in enumerate(self._ag) if c[6]]

    def ledger(self, g: GlobalState) -> tuple[int, int]:
        return g.agents[0].act + self.announced, self.work + self.births

    def all_inactive(self) -> bool:
        return self.active == 0


def run_random(cfg: SystemConfig, seed: int = 0, budget: Optional[int] = None, check_ledger: bool = True):
    """Seeded random interleaving until nothing is enabled or the budget runs out."""
    system = System(cfg)
    monitor = Monitor(system)
    budget = cfg.step_budget if budget is None else budget
    g = system.initial_state()
    trace = Trace()
    report = FinalReport("Timeout", 0, False)
    step = 0
    was_launched = False
    while True:
        monitor.update(g)
        if check_ledger:
            _check_ledger(monitor, g, report, was_launched and not system.fine)
        if system.break_state(g) and report.controller_violation_step is None and not monitor.all_inactive():
            report.controller_violation_step = step
        en = system.enabled(g)
        if not en:
            break
        if step >= budget:
            report.diagnostic = f"step budget {budget} exhausted"
            break
        choice = en[pick(seed, step, len(en))]
        g, ev = system.step(g, choice, record=True, step_index=step, monitor=monitor)
        trace.append(ev)
        step += 1
        was_launched = was_launched or system.launched(g)
    report.steps = step
    report.final_state = g
    report.act_negative = g.agents[0].act_negative
    report.stop_broadcast = g.agents[0].phase is CtlPhase.STOPPED
    report.operability = any(
        getattr(st, "was_upd", False) for st in g.agents[1:]
    )
    if monitor.ledger(g) != system.ledger(g) or monitor.all_inactive() != system.all_inactive(g):
        raise AssertionError("incremental monitor disagrees with a full rescan")
    if g.aborted:
        report.outcome = "Aborted"
        report.diagnostic = g.aborted
    elif not system.enabled(g):
        if system.all_stopped(g):
            report.outcome = "Terminated"
        else:
            report.outcome = "Deadlock"
            announced, outstanding = system.ledger(g)
            report.diagnostic = (
                f"nothing enabled; controller act={g.agents[0].act} "
                f"(announced {announced}, outstanding work {outstanding}); STOP never sent"
            )
    report.trace_hash = trace.hash
    return trace, report


def _check_ledger(monitor: Monitor, g: GlobalState, report: FinalReport, check_quiescence: bool) -> None:
    announced, outstanding = monitor.ledger(g)
    report.ledger_checks += 1
    if announced != outstanding:
        report.ledger_violations += 1
    elif check_quiescence:
        quiet = monitor.work == 0 and monitor.all_inactive()
        if (announced == 0) != quiet:
            report.quiescence_mismatches += 1


class ReplayDivergence(RuntimeError):
    def __init__(self, step: int, detail: str):
        super().__init__(f"replay diverges at step {step}: {detail}")
        self.step = step


def replay(cfg: SystemConfig, records: list):
    """Re-execute recorded choices and compare every event; returns the final state."""
    system = System(cfg)
    g = system.initial_state()
    for i, rec in enumerate(records):
        choice = 2 * rec["agent"] + rec["port"]
        if choice not in system.enabled(g):
            raise ReplayDivergence(i, f"agent {rec['agent']} port {rec['port']} is not enabled")
        try:
            g, ev = system.step(g, choice, record=True, step_index=rec["step"])
        except (ProtocolViolation, TopologyError, SchedulingError) as exc:
            raise ReplayDivergence(i, str(exc)) from exc
        got = json.loads(ev.to_line())
        if got != rec:
            fields_ = [k for k in rec if got.get(k) != rec[k]]
            raise ReplayDivergence(i, f"fields {fields_} differ")
    return g


def replay_choices(system: System, choices: list):
    """States visited by applying ``choices`` from the initial state."""
    g = system.initial_state()
    states = [g]
    for i, c in enumerate(choices):
        g, _ = system.step(g, c, record=False, step_index=i)
        states.append(g)
    return states
