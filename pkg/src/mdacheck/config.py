"""System configuration: agents, topology, imitation parameters and flags.

Agent ids are global integers. The controller is 0, instance agents come
first (1..n), then relation agents, then rule agents. Agents created by rules
at run time get ids after the last static one, in creation order.

The text format is INI: a ``[system]`` section, a ``[schema]`` section and one
section per agent (plus one per attribute / relation instance), so that a
config can be read and edited by hand.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .intervals import EMPTY, IntervalSet
from .messages import ATTR, CONTROLLER, REL
from .model import OntologySchema, SchemaError


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AttrSpec:
    attr_id: int
    values: tuple[int, ...] = ()
    out_rules: tuple[int, ...] = ()
    pos: IntervalSet = EMPTY


@dataclass(frozen=True)
class InstanceSpec:
    id: int
    class_id: int
    attrs: tuple[AttrSpec, ...] = ()
    out_rules: tuple[int, ...] = ()
    rel: tuple[int, ...] = ()  # relation agents this instance may belong to


@dataclass(frozen=True)
class RelInstanceSpec:
    index: int
    o1: Optional[int] = None
    o2: Optional[int] = None
    o1_pos: IntervalSet = EMPTY
    o2_pos: IntervalSet = EMPTY


@dataclass(frozen=True)
class RelationSpec:
    id: int
    relation_id: int
    out_rules: tuple[int, ...] = ()
    max_instances: int = 1
    instances: tuple[RelInstanceSpec, ...] = ()


@dataclass(frozen=True)
class ArgSlot:
    """One argument position of a rule: accepted payload kinds and class filter."""

    kinds: frozenset
    cls: Optional[int] = None  # None accepts any class / relation

    def accepts(self, kind: str, cls: int) -> bool:
        return kind in self.kinds and (self.cls is None or self.cls == cls)

    def to_text(self) -> str:
        return "|".join(sorted(self.kinds)) + ":" + ("*" if self.cls is None else str(self.cls))

    @classmethod
    def from_text(cls, text: str) -> "ArgSlot":
        kinds, _, c = text.strip().partition(":")
        return cls(frozenset(kinds.split("|")), None if c in ("", "*") else int(c))


@dataclass(frozen=True)
class ImitationSpec:
    """Parameters of a rule's stand-in ``make_res``; no hidden state."""

    ordinal: int
    mode: str = "synthetic"  # "synthetic" or "venue"
    parity: Optional[int] = None  # attribute values of other parity are inconsistent
    source_attr: Optional[int] = None  # only this attribute id is consistent data (None: any)
    target_attr: Optional[int] = None  # attribute the result writes (None: ordinal + 1)
    rel_target: Optional[int] = None  # relation agent receiving object updates
    rel_index: int = 1  # venue mode: relation instance to fill
    max_rel_index: int = 0
    attr_counts: tuple[tuple[int, int], ...] = ()  # instance id -> number of attributes
    spawn_value: Optional[int] = None  # attribute value whose vectors spawn an agent
    spawn_source: Optional[int] = None  # ... when it comes from this instance (None: any)
    spawn_quota: int = 0  # scheduled spawns per position point
    spawn_class: int = 0

    def attr_count(self, instance_id: int) -> int:
        for i, n in self.attr_counts:
            if i == instance_id:
                return n
        return 1


@dataclass(frozen=True)
class RuleSpec:
    id: int
    signature: tuple[ArgSlot, ...]
    imitation: ImitationSpec


@dataclass(frozen=True)
class SystemConfig:
    instances: tuple[InstanceSpec, ...] = ()
    relations: tuple[RelationSpec, ...] = ()
    rules: tuple[RuleSpec, ...] = ()
    schema: OntologySchema = field(default_factory=lambda: OntologySchema(frozenset(), {}, {}))
    n_words: int = 32
    hom_lim: int = 2
    enforce_hom_lim: bool = True
    max_dynamic_agents: int = 16
    step_budget: int = 1_000_000
    fault_notify_after: bool = False
    fault_drop_minus_one: bool = False
    announce_once: bool = False
    unbounded_spawn: bool = False
    adjacency_merge: bool = True
    fine_grain: bool = False
    name: str = "custom"

    @property
    def n_instance(self) -> int:
        return len(self.instances)

    @property
    def n_relation(self) -> int:
        return len(self.relations)

    @property
    def n_rule(self) -> int:
        return len(self.rules)

    @property
    def max_static_id(self) -> int:
        return self.n_instance + self.n_relation + self.n_rule

    def kind_of(self, agent_id: int) -> str:
        if agent_id == CONTROLLER:
            return "controller"
        if agent_id <= self.n_instance:
            return "instance"
        if agent_id <= self.n_instance + self.n_relation:
            return "relation"
        if agent_id <= self.max_static_id:
            return "rule"
        return "instance"  # dynamically created information agents

    def rule(self, agent_id: int) -> RuleSpec:
        return self.rules[agent_id - self.n_instance - self.n_relation - 1]

    def with_flags(self, **flags) -> "SystemConfig":
        return replace(self, **flags)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()


# -- topology -------------------------------------------------------------


def topology(cfg: SystemConfig) -> frozenset:
    """Undirected (duplex) channel set, as frozensets of two agent ids."""
    edges = set()

    def link(a, b):
        edges.add(frozenset((a, b)))

    for spec in cfg.instances:
        link(CONTROLLER, spec.id)
        for r in spec.out_rules:
            link(spec.id, r)
        for a in spec.attrs:
            for r in a.out_rules:
                link(spec.id, r)
        for rl in spec.rel:
            link(spec.id, rl)
    for spec in cfg.relations:
        link(CONTROLLER, spec.id)
        for r in spec.out_rules:
            link(spec.id, r)
        for inst in spec.instances:
            for o in (inst.o1, inst.o2):
                if o is not None:
                    link(spec.id, o)
    for spec in cfg.rules:
        link(CONTROLLER, spec.id)
        if spec.imitation.rel_target is not None:
            link(spec.id, spec.imitation.rel_target)
    return frozenset(edges)


def lint(cfg: SystemConfig) -> list[str]:
    """Problems that would make some protocol send impossible or ill-typed."""
    problems = []
    ni, nr = cfg.n_instance, cfg.n_relation
    inst_ids = set(range(1, ni + 1))
    rel_ids = set(range(ni + 1, ni + nr + 1))
    rule_ids = set(range(ni + nr + 1, cfg.max_static_id + 1))

    for pos, spec in enumerate(cfg.instances, start=1):
        if spec.id != pos:
            problems.append(f"instance at position {pos} has id {spec.id}")
    for pos, spec in enumerate(cfg.relations, start=ni + 1):
        if spec.id != pos:
            problems.append(f"relation at position {pos} has id {spec.id}")
    for pos, spec in enumerate(cfg.rules, start=ni + nr + 1):
        if spec.id != pos:
            problems.append(f"rule at position {pos} has id {spec.id}")
    if cfg.hom_lim < 0:
        problems.append("hom_lim must be a natural number")
    if cfg.n_words < 0:
        problems.append("n_words must be a natural number")
    if cfg.max_dynamic_agents < 0 or cfg.step_budget <= 0:
        problems.append("max_dynamic_agents must be >= 0 and step_budget > 0")
    try:
        cfg.schema.validate()
    except SchemaError as exc:
        problems.append(f"schema: {exc}")

    def check_pos(where, p):
        if p and (p[0][0] < 1 or p[-1][1] > cfg.n_words):
            problems.append(f"{where}: position {p!r} outside words 1..{cfg.n_words}")

    def accepts(rule_id, kind, cls):
        return any(s.accepts(kind, cls) for s in cfg.rule(rule_id).signature)

    for spec in cfg.instances:
        where = f"instance {spec.id}"
        if spec.class_id not in cfg.schema.classes:
            problems.append(f"{where}: class {spec.class_id} not in schema")
        for r in spec.out_rules:
            if r not in rule_ids:
                problems.append(f"{where}: out rule {r} is not a rule agent")
        for rl in spec.rel:
            if rl not in rel_ids:
                problems.append(f"{where}: relation {rl} is not a relation agent")
        seen = set()
        for a in spec.attrs:
            if a.attr_id in seen:
                problems.append(f"{where}: duplicate attribute {a.attr_id}")
            seen.add(a.attr_id)
            check_pos(f"{where} attr {a.attr_id}", a.pos)
            if a.values and not a.pos:
                problems.append(f"{where} attr {a.attr_id}: evaluated without a position")
            for v in a.values:
                if not cfg.schema.in_domain(spec.class_id, a.attr_id, v):
                    problems.append(f"{where} attr {a.attr_id}: value {v} outside its type domain")
            for r in a.out_rules:
                if r not in rule_ids:
                    problems.append(f"{where} attr {a.attr_id}: out rule {r} is not a rule agent")
                elif not accepts(r, ATTR, spec.class_id):
                    problems.append(f"{where} attr {a.attr_id}: rule {r} has no slot for class {spec.class_id} attributes")
    for spec in cfg.relations:
        where = f"relation {spec.id}"
        if spec.relation_id not in cfg.schema.relations:
            problems.append(f"{where}: relation {spec.relation_id} not in schema")
        for r in spec.out_rules:
            if r not in rule_ids:
                problems.append(f"{where}: out rule {r} is not a rule agent")
            elif not accepts(r, REL, spec.relation_id):
                problems.append(f"{where}: rule {r} has no slot for relation {spec.relation_id}")
        for inst in spec.instances:
            if not 1 <= inst.index <= spec.max_instances:
                problems.append(f"{where}: instance index {inst.index} outside 1..{spec.max_instances}")
            for o in (inst.o1, inst.o2):
                if o is None:
                    continue
                if o not in inst_ids:
                    problems.append(f"{where}: object {o} is not an instance agent")
                elif spec.id not in cfg.instances[o - 1].rel:
                    problems.append(f"{where}: object {o} does not list this relation")
    feeders: dict[int, set] = {r: set() for r in rule_ids}
    for spec in cfg.instances:
        for r in set(spec.out_rules).union(*[a.out_rules for a in spec.attrs] or [()]):
            if r in feeders:
                feeders[r].add(spec.id)
    for spec in cfg.rules:
        where = f"rule {spec.id}"
        im = spec.imitation
        if not spec.signature:
            problems.append(f"{where}: empty signature")
        if im.rel_target is not None:
            if im.rel_target not in rel_ids:
                problems.append(f"{where}: relation target {im.rel_target} is not a relation agent")
            else:
                rel = cfg.relations[im.rel_target - ni - 1]
                bound = im.max_rel_index if im.mode == "synthetic" else im.rel_index
                if bound > rel.max_instances:
                    problems.append(f"{where}: relation index {bound} exceeds {rel.max_instances}")
                for i in sorted(feeders[spec.id]):
                    if im.rel_target not in cfg.instances[i - 1].rel:
                        problems.append(f"{where}: instance {i} cannot hear from relation {im.rel_target}")
        if not cfg.unbounded_spawn and im.spawn_quota > cfg.hom_lim:
            problems.append(f"{where}: spawn quota {im.spawn_quota} exceeds hom_lim {cfg.hom_lim}")
        if im.spawn_quota and im.spawn_class not in cfg.schema.classes:
            problems.append(f"{where}: spawn class {im.spawn_class} not in schema")
    return problems


def validate(cfg: SystemConfig) -> SystemConfig:
    problems = lint(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


# -- text format ------------------------------------------------------------


def _ints(xs: Iterable[int]) -> str:
    return ",".join(str(x) for x in xs)


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _opt(x: Optional[int]) -> str:
    return "" if x is None else str(x)


def _parse_opt(text: str) -> Optional[int]:
    return int(text) if text.strip() else None


_SYSTEM_INTS = ("n_words", "hom_lim", "max_dynamic_agents", "step_budget")
_SYSTEM_BOOLS = (
    "enforce_hom_lim",
    "fault_notify_after",
    "fault_drop_minus_one",
    "announce_once",
    "unbounded_spawn",
    "adjacency_merge",
    "fine_grain",
)


def dumps(cfg: SystemConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["system"] = {"name": cfg.name}
    for k in _SYSTEM_INTS:
        cp["system"][k] = str(getattr(cfg, k))
    for k in _SYSTEM_BOOLS:
        cp["system"][k] = "true" if getattr(cfg, k) else "false"

    sc = cfg.schema
    cp["schema"] = {
        "classes": _ints(sorted(sc.classes)),
        "relations": ",".join(f"{r}:{a}/{b}" for r, (a, b) in sorted(sc.relations.items())),
        "types": ",".join(f"{t}:{lo}/{hi}" for t, (lo, hi) in sorted(sc.types.items())),
        "key_attrs": _ints(sorted(sc.key_attrs)),
    }
    for owner, pairs in sorted(sc.attr_map.items()):
        cp["schema"][f"attrs.{owner}"] = ",".join(f"{a}:{t}" for a, t in pairs)

    for spec in cfg.instances:
        cp[f"instance.{spec.id}"] = {
            "class": str(spec.class_id),
            "out_rules": _ints(spec.out_rules),
            "rel": _ints(spec.rel),
        }
        for a in spec.attrs:
            cp[f"instance.{spec.id}.attr.{a.attr_id}"] = {
                "values": _ints(a.values),
                "out_rules": _ints(a.out_rules),
                "pos": a.pos.to_text(),
            }
    for spec in cfg.relations:
        cp[f"relation.{spec.id}"] = {
            "relation": str(spec.relation_id),
            "out_rules": _ints(spec.out_rules),
            "max_instances": str(spec.max_instances),
        }
        for inst in spec.instances:
            cp[f"relation.{spec.id}.instance.{inst.index}"] = {
                "o1": _opt(inst.o1),
                "o2": _opt(inst.o2),
                "o1_pos": inst.o1_pos.to_text(),
                "o2_pos": inst.o2_pos.to_text(),
            }
    for spec in cfg.rules:
        im = spec.imitation
        cp[f"rule.{spec.id}"] = {
            "signature": ", ".join(s.to_text() for s in spec.signature),
            "ordinal": str(im.ordinal),
            "mode": im.mode,
            "parity": _opt(im.parity),
            "source_attr": _opt(im.source_attr),
            "target_attr": _opt(im.target_attr),
            "rel_target": _opt(im.rel_target),
            "rel_index": str(im.rel_index),
            "max_rel_index": str(im.max_rel_index),
            "attr_counts": ",".join(f"{i}:{n}" for i, n in im.attr_counts),
            "spawn_value": _opt(im.spawn_value),
            "spawn_source": _opt(im.spawn_source),
            "spawn_quota": str(im.spawn_quota),
            "spawn_class": str(im.spawn_class),
        }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _pairs(text: str) -> list[tuple[str, str]]:
    return [tuple(p.split(":", 1)) for p in text.split(",") if p.strip()]


def loads(text: str) -> SystemConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    if "system" not in cp:
        raise ConfigError("config has no [system] section")
    try:
        return _from_parser(cp)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from exc


def _from_parser(cp: configparser.ConfigParser) -> SystemConfig:
    sysd = cp["system"]
    kwargs = {"name": sysd.get("name", "custom")}
    for k in _SYSTEM_INTS:
        kwargs[k] = int(sysd[k])
    for k in _SYSTEM_BOOLS:
        kwargs[k] = sysd.getboolean(k)

    sc = cp["schema"]
    attr_map = {}
    for key, val in sc.items():
        if key.startswith("attrs."):
            attr_map[int(key[6:])] = tuple((int(a), int(t)) for a, t in _pairs(val))
    schema = OntologySchema(
        classes=frozenset(_parse_ints(sc["classes"])),
        relations={int(r): tuple(int(x) for x in ab.split("/")) for r, ab in _pairs(sc["relations"])},
        types={int(t): tuple(int(x) for x in lh.split("/")) for t, lh in _pairs(sc["types"])},
        attr_map=attr_map,
        key_attrs=frozenset(_parse_ints(sc["key_attrs"])),
    )

    def sections(prefix):
        out = []
        for name in cp.sections():
            parts = name.split(".")
            if parts[0] == prefix and len(parts) == 2:
                out.append(int(parts[1]))
        return sorted(out)

    def subsections(prefix, agent_id, sub):
        out = []
        for name in cp.sections():
            parts = name.split(".")
            if len(parts) == 4 and parts[0] == prefix and int(parts[1]) == agent_id and parts[2] == sub:
                out.append((int(parts[3]), cp[name]))
        return sorted(out, key=lambda p: p[0])

    instances = []
    for i in sections("instance"):
        s = cp[f"instance.{i}"]
        attrs = tuple(
            AttrSpec(a, _parse_ints(sec["values"]), _parse_ints(sec["out_rules"]), IntervalSet.from_text(sec["pos"]))
            for a, sec in subsections("instance", i, "attr")
        )
        instances.append(InstanceSpec(i, int(s["class"]), attrs, _parse_ints(s["out_rules"]), _parse_ints(s["rel"])))
    relations = []
    for i in sections("relation"):
        s = cp[f"relation.{i}"]
        insts = tuple(
            RelInstanceSpec(
                idx,
                _parse_opt(sec["o1"]),
                _parse_opt(sec["o2"]),
                IntervalSet.from_text(sec["o1_pos"]),
                IntervalSet.from_text(sec["o2_pos"]),
            )
            for idx, sec in subsections("relation", i, "instance")
        )
        relations.append(RelationSpec(i, int(s["relation"]), _parse_ints(s["out_rules"]), int(s["max_instances"]), insts))
    rules = []
    for i in sections("rule"):
        s = cp[f"rule.{i}"]
        im = ImitationSpec(
            ordinal=int(s["ordinal"]),
            mode=s["mode"],
            parity=_parse_opt(s["parity"]),
            source_attr=_parse_opt(s["source_attr"]),
            target_attr=_parse_opt(s["target_attr"]),
            rel_target=_parse_opt(s["rel_target"]),
            rel_index=int(s["rel_index"]),
            max_rel_index=int(s["max_rel_index"]),
            attr_counts=tuple((int(a), int(n)) for a, n in _pairs(s["attr_counts"])),
            spawn_value=_parse_opt(s["spawn_value"]),
            spawn_source=_parse_opt(s["spawn_source"]),
            spawn_quota=int(s["spawn_quota"]),
            spawn_class=int(s["spawn_class"]),
        )
        sig = tuple(ArgSlot.from_text(t) for t in s["signature"].split(",") if t.strip())
        rules.append(RuleSpec(i, sig, im))
    return SystemConfig(tuple(instances), tuple(relations), tuple(rules), schema, **kwargs)


def save(cfg: SystemConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cfg))


def load(path) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
