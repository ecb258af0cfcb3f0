"""Property monitors over explored state graphs and recorded traces.

Three fixed properties, each checked in the form that suits it:

* ControllerCorrectness, a safety property: every evaluated state where the
  controller sees ``act == 0`` with an empty mailbox is quiescent.
* Operability, a liveness property: every maximal path reaches a state where
  some information agent has recorded an update.
* BoundedTermination, an implication: every path on which each rule agent
  keeps ``gen < pnt * hom_lim`` reaches a state where no agent is active.

Liveness is decided on the graph by looking for terminal states and cycles
inside the region where the goal has not been reached yet.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Union

from .config import SystemConfig
from .explore import StateGraph, explore
from .protocol import CtlPhase, InstanceAgentState, RelationAgentState, RuleAgentState
from .runtime import GlobalState, System, Trace, replay_choices

CONTROLLER_CORRECTNESS = "ControllerCorrectness"
OPERABILITY = "Operability"
BOUNDED_TERMINATION = "BoundedTermination"
PROPERTIES = (CONTROLLER_CORRECTNESS, OPERABILITY, BOUNDED_TERMINATION)

HOLDS, VIOLATED, INCONCLUSIVE = "Holds", "Violated", "Inconclusive"

# which states count as the controller deciding
GUARDS = ("break", "seen_first", "none")


@dataclass
class PropertyVerdict:
    """Outcome of one property check.

    ``counterexample`` is the list of endpoint choices from the initial state;
    for a lasso, ``loop_start`` is the index in it where the repeated part begins.
    """

    name: str
    outcome: str
    counterexample: Optional[list] = None
    loop_start: Optional[int] = None
    diagnosis: str = ""
    states: int = 0
    depth: Optional[int] = None
    stats: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.outcome == HOLDS

    def to_dict(self) -> dict:
        return {
            "property": self.name,
            "outcome": self.outcome,
            "states": self.states,
            "depth": self.depth,
            "diagnosis": self.diagnosis,
            "counterexample_length": None if self.counterexample is None else len(self.counterexample),
            "loop_start": self.loop_start,
            "stats": self.stats,
        }


def render(v: PropertyVerdict, trace_path: Optional[str] = None) -> str:
    """One structured text record per verdict."""
    parts = [
        f"property={v.name}",
        f"outcome={v.outcome}",
        f"states={v.states}",
        f"depth={'-' if v.depth is None else v.depth}",
        f"trace={trace_path or '-'}",
    ]
    line = " ".join(parts)
    if v.diagnosis:
        line += f"\n  diagnosis: {v.diagnosis}"
    for k, val in v.stats.items():
        line += f"\n  {k}: {val}"
    return line


# -- state predicates ---------------------------------------------------------------


def quiescence_oracle(system: System, g: GlobalState) -> bool:
    """Every non-controller agent is inactive and no work message is in flight."""
    return system.all_inactive(g) and not system.work_in_flight(g)


def any_updated(g: GlobalState) -> bool:
    for st in g.agents[1:]:
        if type(st) in (InstanceAgentState, RelationAgentState) and st.was_upd:
            return True
    return False


def antecedent(g: GlobalState, hom_lim: int) -> bool:
    """Every rule agent has ``gen < pnt * hom_lim``; a rule with no point must not have generated."""
    for st in g.agents[1:]:
        if type(st) is RuleAgentState:
            if st.pnt == 0:
                if st.gen != 0:
                    return False
            elif st.gen >= st.pnt * hom_lim:
                return False
    return True


def decision_state(system: System, g: GlobalState, guard: str = "break") -> bool:
    """The controller would conclude quiescence here.

    ``break``: its break is enabled. ``seen_first``: it has read a delta,
    ``act == 0`` and its mailbox is empty. ``none``: ``act == 0`` and an
    empty mailbox, from the initial state on.
    """
    c = g.agents[0]
    if guard == "break":
        return system.break_state(g)
    if c.act != 0 or g.mailboxes[0] or c.phase is CtlPhase.STOPPED:
        return False
    if guard == "seen_first":
        return c.seen_first
    if guard == "none":
        return True
    raise ValueError(f"unknown guard {guard!r}")


def controller_violation(system: System, g: GlobalState, guard: str = "break") -> bool:
    return decision_state(system, g, guard) and not system.all_inactive(g)


# -- ControllerCorrectness -------------------------------------------------------------


def check_controller_correctness(
    target: Union[StateGraph, Trace, list],
    system: Optional[System] = None,
    guard: str = "break",
) -> PropertyVerdict:
    """Safety check over every stored graph state, or every state of a trace.

    For a trace (or a list of choices) ``system`` is required.
    """
    name = CONTROLLER_CORRECTNESS if guard == "break" else f"{CONTROLLER_CORRECTNESS}[{guard}]"
    if isinstance(target, StateGraph):
        system = target.system
        states = target.states
        path = target.path
        depth = lambda i: target.depth[i]  # noqa: E731
    else:
        if system is None:
            raise ValueError("checking a trace needs the system it ran on")
        choices = target.choices if isinstance(target, Trace) else list(target)
        states = replay_choices(system, choices)
        path = lambda i: choices[:i]  # noqa: E731
        depth = lambda i: i  # noqa: E731
    evaluated = disagreements = 0
    first = None
    for i, g in enumerate(states):
        if not decision_state(system, g, guard):
            continue
        evaluated += 1
        inactive = system.all_inactive(g)
        if inactive != quiescence_oracle(system, g):
            disagreements += 1
        if not inactive and first is None:
            first = i
    stats = {"evaluated_states": evaluated, "oracle_disagreements": disagreements}
    n = len(states)
    if first is not None:
        g = states[first]
        return PropertyVerdict(
            name,
            VIOLATED,
            path(first),
            diagnosis=(
                f"controller act=0 with an empty mailbox while agents {system.active_ids(g)} are active"
                + (" and work is in flight" if system.work_in_flight(g) else "")
            ),
            states=n,
            depth=depth(first),
            stats=stats,
        )
    if isinstance(target, StateGraph) and not target.complete:
        return PropertyVerdict(name, INCONCLUSIVE, diagnosis=target.stop_reason, states=n, stats=stats)
    return PropertyVerdict(name, HOLDS, states=n, stats=stats)


# -- liveness on graphs -------------------------------------------------------------------


def _find_cycle(graph: StateGraph, region) -> Optional[tuple]:
    """A cycle inside ``region`` reachable through it from index 0: ``(entry, cycle_edges)``."""
    if 0 not in region:
        return None
    colour = {0: 1}
    stack = [(0, iter(graph.edges[0]))]
    on_path = [0]
    via = []  # edge choices along on_path
    while stack:
        i, it = stack[-1]
        for choices, j in it:
            if j not in region:
                continue
            c = colour.get(j, 0)
            if c == 1:
                k = on_path.index(j)
                return j, [ch for part in via[k:] + [choices] for ch in part]
            if c == 0:
                colour[j] = 1
                stack.append((j, iter(graph.edges[j])))
                on_path.append(j)
                via.append(choices)
                break
        else:
            colour[i] = 2
            stack.pop()
            on_path.pop()
            if via:
                via.pop()
    return None


def _reachable(graph: StateGraph, inside) -> list:
    """States reachable from index 0 along states satisfying ``inside`` (in BFS order)."""
    if not inside(0):
        return []
    seen = {0}
    order = [0]
    for i in order:
        for _, j in graph.edges[i]:
            if j not in seen and inside(j):
                seen.add(j)
                order.append(j)
    return order


def _liveness(graph: StateGraph, name: str, inside, stuck_msg: str, extra: dict) -> PropertyVerdict:
    """Violated iff a maximal path stays ``inside`` forever (terminal state or cycle)."""
    region = _reachable(graph, inside)
    members = set(region)
    frontier = set(graph.frontier)
    n = len(graph)
    stats = dict(extra, region_states=len(region))
    system = graph.system
    for i in region:
        g = graph.states[i]
        if i in frontier:
            dead = g.aborted is not None or not system.enabled(g)
        else:
            dead = not graph.edges[i]
        if dead:
            why = f"aborted: {g.aborted}" if g.aborted else stuck_msg
            return PropertyVerdict(name, VIOLATED, graph.path(i), diagnosis=why, states=n, depth=graph.depth[i], stats=stats)
    cycle = _find_cycle(graph, members)
    if cycle is not None:
        entry, loop = cycle
        prefix = graph.path(entry)
        return PropertyVerdict(
            name,
            VIOLATED,
            prefix + loop,
            loop_start=len(prefix),
            diagnosis="a cycle stays in the region forever",
            states=n,
            depth=graph.depth[entry],
            stats=stats,
        )
    if members & frontier:
        return PropertyVerdict(name, INCONCLUSIVE, diagnosis=graph.stop_reason, states=n, stats=stats)
    return PropertyVerdict(name, HOLDS, states=n, stats=stats)


def check_operability(target: Union[StateGraph, Trace, list], system: Optional[System] = None) -> PropertyVerdict:
    """Some information agent eventually records an update.

    On a graph: on every maximal path. On a trace: on that run, which must be
    maximal for a Violated verdict to mean anything.
    """
    if isinstance(target, StateGraph):
        graph = target
        monotone = _monotone_violation(graph)
        verdict = _liveness(
            graph,
            OPERABILITY,
            lambda i: not any_updated(graph.states[i]),
            "run ended without any information agent recording an update",
            {"monotonicity_violations": monotone},
        )
        return verdict
    if system is None:
        raise ValueError("checking a trace needs the system it ran on")
    choices = target.choices if isinstance(target, Trace) else list(target)
    states = replay_choices(system, choices)
    for i, g in enumerate(states):
        if any_updated(g):
            return PropertyVerdict(OPERABILITY, HOLDS, states=len(states), depth=i)
    return PropertyVerdict(
        OPERABILITY,
        VIOLATED,
        choices,
        diagnosis="no event records an update",
        states=len(states),
        depth=len(choices),
    )


def check_bounded_termination(graph: StateGraph, hom_lim: Optional[int] = None) -> PropertyVerdict:
    """While every rule stays under its homonymic bound, activity must cease."""
    system = graph.system
    hom_lim = system.cfg.hom_lim if hom_lim is None else hom_lim
    states = graph.states
    ante = sum(1 for g in states if antecedent(g, hom_lim))
    return _liveness(
        graph,
        BOUNDED_TERMINATION,
        lambda i: antecedent(states[i], hom_lim) and not system.all_inactive(states[i]),
        "run stopped while agents were still active",
        {"hom_lim": hom_lim, "antecedent_states": ante},
    )


def _stuck(system: System, g: GlobalState, hom_lim: int) -> bool:
    """A dead end inside the antecedent with agents still active."""
    if not antecedent(g, hom_lim) or system.all_inactive(g):
        return False
    return g.aborted is not None or not system.enabled(g)


def _monotone_violation(graph: StateGraph) -> int:
    """Edges along which some ``was_upd``, ``gen`` or ``pnt`` decreases."""
    bad = 0
    for i, out in enumerate(graph.edges):
        a = graph.states[i].agents
        for _, j in out:
            b = graph.states[j].agents
            for x, y in zip(a[1:], b[1:]):
                if type(x) is RuleAgentState:
                    if y.gen < x.gen or y.pnt < x.pnt:
                        bad += 1
                elif x.was_upd and not y.was_upd:
                    bad += 1
    return bad


# -- ledger over a graph -----------------------------------------------------------------


def check_ledger(graph: StateGraph) -> dict:
    """Conservation identity and its zero test over every stored state.

    Returns counts of checked states, identity failures and states (after
    launch, faithful mode) where ``announced == 0`` disagrees with the oracle.
    """
    system = graph.system
    checks = violations = mismatches = 0
    for g in graph.states:
        announced, outstanding = system.ledger(g)
        checks += 1
        if announced != outstanding:
            violations += 1
        elif not system.fine and system.launched(g):
            if (announced == 0) != quiescence_oracle(system, g):
                mismatches += 1
    return {"checks": checks, "violations": violations, "mismatches": mismatches}


# -- one-call driver ---------------------------------------------------------------------


def verify(
    cfg: SystemConfig,
    prop: str,
    max_states: Optional[int] = None,
    max_depth: Optional[int] = None,
    hom_lim: Optional[int] = None,
    reduce: bool = True,
) -> tuple[PropertyVerdict, StateGraph]:
    """Explore ``cfg`` and check one property; safety searches stop at the first violation."""
    if prop not in PROPERTIES:
        raise ValueError(f"unknown property {prop!r}")
    system = System(cfg)
    if prop == CONTROLLER_CORRECTNESS:
        graph = explore(
            system,
            max_states=max_states,
            max_depth=max_depth,
            reduce=reduce,
            stop_at=lambda g: controller_violation(system, g),
        )
        verdict = check_controller_correctness(graph)
    elif prop == OPERABILITY:
        graph = explore(system, max_states=max_states, max_depth=max_depth, reduce=reduce)
        verdict = check_operability(graph)
    else:
        lim = cfg.hom_lim if hom_lim is None else hom_lim
        # depth first, so runaway generation hits its cap before the frontier explodes
        graph = explore(
            system,
            max_states=max_states,
            max_depth=max_depth,
            reduce=reduce,
            stop_at=lambda g: _stuck(system, g, lim),
            order="dfs",
        )
        verdict = check_bounded_termination(graph, lim)
    verdict.stats.setdefault("transitions", graph.transitions)
    return verdict, graph


def counterexample_trace(system: System, verdict: PropertyVerdict) -> Trace:
    """Re-run a verdict's counterexample with full event records."""
    trace = Trace()
    g = system.initial_state()
    for step, c in enumerate(verdict.counterexample or []):
        g, ev = system.step(g, c, record=True, step_index=step)
        trace.append(ev)
    return trace


def write_counterexample(system: System, verdict: PropertyVerdict, path: Union[str, os.PathLike]) -> str:
    counterexample_trace(system, verdict).dump(path)
    return os.fspath(path)
