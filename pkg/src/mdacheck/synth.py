"""Synthetic workloads: agent initialization, the ``make_res`` stand-in and
the Venue worked example.

Synthetic agents are initialized from their ordinal the way a model-checker
harness would do it from process ids: instance ``k`` has class ``k``, uses
rules ``1..k`` (wrapping around the rule count), owns ``2k`` attributes of
which the even-indexed ones start evaluated with value ``i//2 + 1``, and may
belong to relations ``1..k`` (wrapping). Ordinals are 1-based, attribute
indices 0-based.

Rule ``r`` reads attribute ``2(r-1)`` and writes attribute ``2r-1``, so
results cascade from the preset attributes into the empty ones. Rule 1 also
creates one new instance agent when it sees ``spawn_value`` from instance
``spawn_source``, which exercises dynamic creation under the homonymic limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .config import (
    ArgSlot,
    AttrSpec,
    ConfigError,
    ImitationSpec,
    InstanceSpec,
    RelationSpec,
    RuleSpec,
    SystemConfig,
    validate,
)
from .intervals import IntervalSet
from .messages import AGENT, ATTR, REL, AttrValue, RelUpdate
from .model import AttributeSlot, OntologySchema, PositionPoint, position_point

VALUE_TYPE = 1
VALUE_DOMAIN = (0, 1_000_000)
SPAWN_CLASS = 1000


@dataclass(frozen=True)
class SpawnRequest:
    """A new instance agent a rule wants to create, keyed by its position point."""

    point: PositionPoint
    class_id: int
    attrs: tuple
    out_rules: tuple = ()
    pos: IntervalSet = field(default_factory=IntervalSet)


@dataclass(frozen=True)
class Result:
    sends: tuple = ()
    spawns: tuple = ()

    @property
    def empty(self) -> bool:
        return not self.sends and not self.spawns


EMPTY_RESULT = Result()


def make_res_imitation(rule: RuleSpec, args: tuple, cfg: SystemConfig) -> Result:
    """Deterministic stand-in for a rule's result function.

    Linear in the number of arguments. Which vectors are consistent, which
    agents are updated and with what values depend only on the argument
    values and the rule's parameters.
    """
    im = rule.imitation
    if im.mode == "venue":
        return _venue_result(rule, args, cfg)
    data = next((a for a in args if a.kind in (ATTR, REL)), None)
    agent = next((a for a in args if a.kind == AGENT), None)
    if data is None or agent is None:
        return EMPTY_RESULT
    point = position_point(args, cfg.adjacency_merge)
    target = agent.source
    n_attrs = im.attr_count(target)
    sends = []
    spawns = []
    if data.kind == ATTR:
        if data.source != target:
            return EMPTY_RESULT
        if im.parity is not None and data.value % 2 != im.parity:
            return EMPTY_RESULT
        if im.source_attr is not None and data.key != im.source_attr:
            return EMPTY_RESULT
        attr = im.ordinal + 1 if im.target_attr is None else im.target_attr
        sends.append((target, AttrValue(rule.id, agent.cls, attr % n_attrs, data.value, point)))
        if im.rel_target is not None and (target + 1) // 2 <= im.max_rel_index:
            slot = "o1" if target % 2 else "o2"
            sends.append((im.rel_target, RelUpdate(rule.id, (target + 1) // 2, slot, target, agent.pos)))
        if cfg.unbounded_spawn:
            fresh = IntervalSet.point(point.max_word + 1)
            spawns.append(
                SpawnRequest(
                    point,
                    im.spawn_class,
                    (AttributeSlot(0, frozenset((data.value,)), (rule.id,), fresh),),
                    (rule.id,),
                    fresh,
                )
            )
        elif im.spawn_value is not None and data.value == im.spawn_value and im.spawn_source in (None, target):
            spawns.append(
                SpawnRequest(point, im.spawn_class, (AttributeSlot(0, frozenset((data.value,)), (), point),), (), point)
            )
    else:
        if target not in data.objects:
            return EMPTY_RESULT
        sends.append((target, AttrValue(rule.id, agent.cls, 1 % n_attrs, data.key, point)))
    return Result(tuple(sends), tuple(spawns))


def _venue_result(rule: RuleSpec, args: tuple, cfg: SystemConfig) -> Result:
    # The five caption/reference/sentence patterns of the real rule reduce to
    # one positional check: the event is mentioned before the place.
    event, place = args[0], args[1]
    if not event.pos or not place.pos or event.pos.max_word >= place.pos[0][0]:
        return EMPTY_RESULT
    im = rule.imitation
    return Result(
        (
            (im.rel_target, RelUpdate(rule.id, im.rel_index, "o1", event.source, event.pos)),
            (im.rel_target, RelUpdate(rule.id, im.rel_index, "o2", place.source, place.pos)),
        )
    )


# -- synthetic configurations ---------------------------------------------------


@dataclass(frozen=True)
class SynthParams:
    n_instance: int = 0
    n_relation: int = 0
    n_rule: int = 0
    n_words: Optional[int] = None  # default: exactly the words the agents need
    hom_lim: int = 2
    max_dynamic_agents: int = 16
    step_budget: int = 1_000_000
    relation_rules: bool = False  # relations also feed rules with their instances
    spawn_value: Optional[int] = 1  # rule 1 spawns on vectors carrying this value
    spawn_source: Optional[int] = 1  # ... coming from this instance only
    parity: Optional[int] = None


def _wrap(x: int, n: int) -> int:
    return (x - 1) % n + 1


def build_synthetic(params: SynthParams = SynthParams(), **flags) -> SystemConfig:
    """Turn a handful of counts into a full, linted configuration."""
    ni, nr, nrule = params.n_instance, params.n_relation, params.n_rule
    if min(ni, nr, nrule) < 0:
        raise ConfigError("agent counts must be >= 0")
    if nr and not ni:
        raise ConfigError("relation agents need at least one instance agent")
    rel_base, rule_base = ni, ni + nr

    def rule_id(ordinal):
        return rule_base + _wrap(ordinal, nrule)

    instances = []
    word = 0
    for k in range(1, ni + 1):
        out_rules = tuple(sorted({rule_id(j) for j in range(1, k + 1)})) if nrule else ()
        rel = tuple(sorted({rel_base + _wrap(j, nr) for j in range(1, k + 1)})) if nr else ()
        attrs = []
        for i in range(2 * k):
            rules = (rule_id(i // 2 + 1),) if nrule else ()
            if i % 2 == 0:
                word += 1
                attrs.append(AttrSpec(i, (i // 2 + 1,), rules, IntervalSet.point(word)))
            else:
                attrs.append(AttrSpec(i, (), rules))
        instances.append(InstanceSpec(k, k, tuple(attrs), out_rules, rel))
    n_words = word if params.n_words is None else params.n_words

    max_index = (ni + 1) // 2
    relations = []
    for j in range(1, nr + 1):
        out_rules = (rule_id(j),) if params.relation_rules and nrule else ()
        relations.append(RelationSpec(rel_base + j, j, out_rules, max(max_index, 1)))

    attr_counts = tuple((k, 2 * k) for k in range(1, ni + 1))
    rules = []
    for r in range(1, nrule + 1):
        kinds = frozenset((ATTR, REL)) if params.relation_rules else frozenset((ATTR,))
        spawn = params.spawn_value if r == 1 else None
        rules.append(
            RuleSpec(
                rule_base + r,
                (ArgSlot(kinds), ArgSlot(frozenset((AGENT,)))),
                ImitationSpec(
                    ordinal=r,
                    parity=params.parity,
                    source_attr=2 * (r - 1),
                    target_attr=2 * r - 1,
                    rel_target=rel_base + _wrap(r, nr) if nr else None,
                    max_rel_index=max_index if nr else 0,
                    attr_counts=attr_counts,
                    spawn_value=spawn,
                    spawn_source=params.spawn_source if spawn is not None else None,
                    spawn_quota=1 if spawn is not None else 0,
                    spawn_class=SPAWN_CLASS,
                ),
            )
        )

    classes = frozenset(range(1, ni + 1)) | {SPAWN_CLASS}
    attr_map = {k: tuple((i, VALUE_TYPE) for i in range(2 * k)) for k in range(1, ni + 1)}
    attr_map[SPAWN_CLASS] = ((0, VALUE_TYPE),)
    schema = OntologySchema(
        classes=classes,
        relations={j: (1, min(2, ni)) for j in range(1, nr + 1)},
        types={VALUE_TYPE: VALUE_DOMAIN},
        attr_map=attr_map,
        key_attrs=frozenset({0}) if ni else frozenset(),
    )
    cfg = SystemConfig(
        tuple(instances),
        tuple(relations),
        tuple(rules),
        schema,
        n_words=n_words,
        hom_lim=params.hom_lim,
        max_dynamic_agents=params.max_dynamic_agents,
        step_budget=params.step_budget,
        name=f"synthetic-{ni}-{nr}-{nrule}",
    )
    if flags:
        cfg = cfg.with_flags(**flags)
    return validate(cfg)


# -- the Venue worked example -------------------------------------------------------

SCI_EVENT, GEO_PLACE = 1, 2
VENUE = 1
ATTR_DATE, ATTR_NAME, ATTR_COUNTRY = 0, 1, 2


def build_venue_fixture(**flags) -> SystemConfig:
    """Two instance agents, the Venue relation agent and one rule linking them.

    Words 1..17 of the call-for-papers fragment: the workshop name covers
    words 1-10, the date 13-15, the town 16 and the country 17. Dates,
    names and countries are integer codes. The rule's third argument (verbs
    such as "hold") and its linguistic patterns are not modeled.
    """
    i1, i2, rl1, r_venue = 1, 2, 3, 4
    instances = (
        InstanceSpec(
            i1,
            SCI_EVENT,
            (
                AttrSpec(ATTR_DATE, (20140912,), (), IntervalSet([(13, 15)])),
                AttrSpec(ATTR_NAME, (1,), (), IntervalSet([(1, 10)])),
            ),
            (r_venue,),
            (rl1,),
        ),
        InstanceSpec(
            i2,
            GEO_PLACE,
            (
                AttrSpec(ATTR_NAME, (2,), (), IntervalSet.point(16)),
                AttrSpec(ATTR_COUNTRY, (39,), (), IntervalSet.point(17)),
            ),
            (r_venue,),
            (rl1,),
        ),
    )
    relations = (RelationSpec(rl1, VENUE, (), 1),)
    rules = (
        RuleSpec(
            r_venue,
            (ArgSlot(frozenset((AGENT,)), SCI_EVENT), ArgSlot(frozenset((AGENT,)), GEO_PLACE)),
            ImitationSpec(ordinal=1, mode="venue", rel_target=rl1, rel_index=1, max_rel_index=1),
        ),
    )
    schema = OntologySchema(
        classes=frozenset({SCI_EVENT, GEO_PLACE}),
        relations={VENUE: (SCI_EVENT, GEO_PLACE)},
        types={1: (19000101, 29991231), 2: (0, 10_000), 3: (1, 999)},
        attr_map={SCI_EVENT: ((ATTR_DATE, 1), (ATTR_NAME, 2)), GEO_PLACE: ((ATTR_NAME, 2), (ATTR_COUNTRY, 3))},
        key_attrs=frozenset({ATTR_NAME}),
    )
    cfg = SystemConfig(instances, relations, rules, schema, n_words=17, name="venue")
    if flags:
        cfg = cfg.with_flags(**flags)
    return validate(cfg)


FIXTURES = {"venue": build_venue_fixture}
