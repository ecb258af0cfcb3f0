"""Exhaustive breadth-first exploration of the interleaving state space.

Every stored state is kept in an exact visited table, so a verdict over the
graph covers all reachable behaviour when ``complete`` is true. Exploration
stops early (``complete`` false) when ``max_states`` or ``max_depth`` is
reached.

With ``reduce`` (the default) two kinds of step are taken alone, without
branching on the other enabled steps:

* the controller consuming a delta. It pops a queue the others only append
  to, changes only the controller's counter and stays enabled whatever else
  runs, so it commutes with every other step. Any path can be reordered to
  drain the controller first without changing the states it reaches with an
  empty controller mailbox; break states, deadlocks and terminal states are
  all of that kind, and the deltas are still consumed in FIFO order.
* on configs without fault flags, a *local* agent step: it appends only to
  the agent's own internal queue and deltas to the controller, creates
  nobody, leaves ``was_upd``, ``gen``, the spawn points and the bound flag
  alone, and changes neither quiescence nor the break condition. It reads
  only its agent's state and mailbox head, which nobody else can change, and
  writes nothing anybody else reads. The controller cannot break before it
  because its message is still counted in ``act``.

Both are persistent-set conditions with the visibility and cycle provisos
(every such step removes a data message, turns one input into argument
vectors or consumes a delta, so no cycle is made of them alone). They keep
all deadlocks, terminal states and the truth of the stutter-insensitive
properties the verifier checks. Runs of such single steps are followed
without storing the intermediate states, whose labels equal those of the
state the run ends in.
"""

from __future__ import annotations

import time
from array import array
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .config import SystemConfig
from .messages import ArgVector, RelNotice, StopToken
from .protocol import CtlPhase, RuleAgentState
from .runtime import GlobalState, System


@dataclass
class StateGraph:
    """Reachable states (index 0 is initial) and transitions between them.

    An edge is ``(choices, j)``: the endpoint choices of one branching step
    followed by the forced steps leading to state ``j``.
    """

    system: System
    states: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    parent: array = field(default_factory=lambda: array("l"))
    parent_choices: list = field(default_factory=list)
    depth: array = field(default_factory=lambda: array("l"))
    complete: bool = True
    stop_reason: str = ""
    transitions: int = 0
    seconds: float = 0.0
    frontier: list = field(default_factory=list)  # unexpanded states when incomplete
    reduced: bool = False
    hit: Optional[int] = None  # first stored state satisfying ``stop_at``

    def __len__(self) -> int:
        return len(self.states)

    @property
    def max_depth(self) -> int:
        return max(self.depth) if len(self.depth) else 0

    def path(self, i: int) -> list:
        """Endpoint choices leading from the initial state to state ``i``."""
        parts = []
        while i > 0:
            parts.append(self.parent_choices[i])
            i = self.parent[i]
        return [c for part in reversed(parts) for c in part]

    def terminal(self) -> list:
        """Expanded states without successors."""
        frontier = set(self.frontier)
        return [i for i, e in enumerate(self.edges) if not e and i not in frontier]

    def deadlocks(self) -> list:
        sysm = self.system
        return [i for i in self.terminal() if sysm.deadlocked(self.states[i])]

    def aborted(self) -> list:
        return [i for i, g in enumerate(self.states) if g.aborted]


class _Reducer:
    def __init__(self, system: System, reduce: bool):
        cfg = system.cfg
        self.system = system
        self.reduce = reduce
        self.local_ok = reduce and not (
            system.fine or cfg.fault_drop_minus_one or cfg.announce_once or cfg.fault_notify_after
        )
        self.steps = 0

    def successors(self, g: GlobalState):
        """``(forced, pairs)``: whether one step was singled out, and ``(choice, state)`` pairs."""
        system = self.system
        if g.aborted:
            return False, []
        en = system.enabled(g)
        if not en:
            return False, []
        if self.reduce and en[0] == 0 and _controller_drains(g):
            self.steps += 1
            return True, [(0, system.step(g, 0, record=False)[0])]
        done = {}
        if self.local_ok:
            for choice in sorted(en, key=lambda c: _local_rank(g, c)):
                if choice < 2:
                    continue
                g2, _ = system.step(g, choice, record=False)
                self.steps += 1
                if _local(system, g, g2, choice):
                    return True, [(choice, g2)]
                done[choice] = g2
        pairs = []
        for choice in en:
            g2 = done.get(choice)
            if g2 is None:
                g2, _ = system.step(g, choice, record=False)
                self.steps += 1
            pairs.append((choice, g2))
        return False, pairs

    def follow(self, choice: int, g2: GlobalState):
        """Extend one step by the forced steps after it."""
        choices = [choice]
        while True:
            forced, pairs = self.successors(g2)
            if not forced:
                return tuple(choices), g2
            c, g2 = pairs[0]
            choices.append(c)


def explore(
    target: Union[SystemConfig, System],
    max_states: Optional[int] = None,
    max_depth: Optional[int] = None,
    reduce: bool = True,
    stop_at: Optional[Callable[[GlobalState], bool]] = None,
    order: str = "bfs",
) -> StateGraph:
    """Exploration from the initial state, breadth-first by default.

    ``stop_at`` ends the search at the first stored state it accepts; the
    graph is then incomplete and ``hit`` names that state. Breadth-first
    finds a shallowest such state; ``order="dfs"`` reaches deep ones sooner.
    """
    if order not in ("bfs", "dfs"):
        raise ValueError(f"unknown order {order!r}")
    take = deque.popleft if order == "bfs" else deque.pop
    system = target if isinstance(target, System) else System(target)
    t0 = time.perf_counter()
    red = _Reducer(system, reduce)
    graph = StateGraph(system, reduced=reduce)
    index: dict = {}

    def add(g, parent, choices, depth):
        j = len(graph.states)
        index[g] = j
        graph.states.append(g)
        graph.edges.append([])
        graph.parent.append(parent)
        graph.parent_choices.append(choices)
        graph.depth.append(depth)
        if stop_at is not None and graph.hit is None and stop_at(g):
            graph.hit = j
        return j

    g0 = system.initial_state()
    add(g0, -1, (), 0)
    queue = deque([0])
    forced, pairs = red.successors(g0)
    if reduce and forced:
        # the initial state starts a forced run: store where it ends
        choices, g1 = red.follow(*pairs[0])
        graph.edges[0].append((choices, add(g1, 0, choices, len(choices))))
        queue = deque([1])

    while queue and graph.hit is None:
        i = take(queue)
        g = graph.states[i]
        d = graph.depth[i]
        _, pairs = red.successors(g)
        if pairs and max_depth is not None and d >= max_depth:
            graph.complete = False
            graph.stop_reason = f"max_depth {max_depth} reached"
            graph.frontier.append(i)
            continue
        out = graph.edges[i]
        for choice, g2 in pairs:
            choices, g3 = red.follow(choice, g2) if reduce else ((choice,), g2)
            j = index.get(g3)
            if j is None:
                if max_states is not None and len(graph.states) >= max_states:
                    graph.complete = False
                    graph.stop_reason = f"max_states {max_states} reached"
                    graph.frontier.append(i)
                    graph.frontier.extend(queue)
                    queue.clear()
                    break
                j = add(g3, i, choices, d + len(choices))
                queue.append(j)
            out.append((choices, j))
    if graph.hit is not None:
        graph.complete = False
        graph.stop_reason = "target state reached"
        graph.frontier.extend(queue)
    graph.transitions = red.steps
    graph.seconds = time.perf_counter() - t0
    return graph


def _controller_drains(g: GlobalState) -> bool:
    """The controller's next step consumes a delta (not a break, flush or STOP)."""
    return bool(g.mailboxes[0]) and not g.outboxes[0] and g.agents[0].phase is not CtlPhase.STOPPED


def _local_rank(g: GlobalState, choice: int) -> int:
    """Try steps that are usually local first."""
    box = g.mailboxes[choice]
    if not box or g.outboxes[choice]:
        return 3
    head = type(box[0])
    if head in (StopToken, RelNotice) or (choice % 2 == 0 and type(g.agents[choice // 2]) is RuleAgentState):
        return 0
    if head is ArgVector:
        return 1
    return 2


def _break_pending(system: System, g: GlobalState) -> bool:
    """The controller's break is enabled once its mailbox drains."""
    c = g.agents[0]
    if c.phase is CtlPhase.STOPPED or not (c.phase is CtlPhase.COUNTING or g.mailboxes[0]):
        return False
    return c.act + sum(m.delta for m in g.mailboxes[0]) == 0 and system.launched(g)


def _local(system: System, g: GlobalState, g2: GlobalState, choice: int) -> bool:
    if g2.aborted or len(g2.agents) != len(g.agents) or g2.dropped != g.dropped:
        return False
    a = choice // 2
    own = (2 * a, 2 * a + 1)
    for e, (b1, b2) in enumerate(zip(g.mailboxes, g2.mailboxes)):
        if b1 is not b2 and e not in own and e != 0:
            return False
    st, st2 = g.agents[a], g2.agents[a]
    if type(st) is RuleAgentState:
        if (st.gen, st.points, st.bound_violation) != (st2.gen, st2.points, st2.bound_violation):
            return False
    elif st.was_upd != st2.was_upd:
        return False
    if _break_pending(system, g2) != _break_pending(system, g):
        return False
    return system.all_inactive(g2) == system.all_inactive(g)
