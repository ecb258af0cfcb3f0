"""Ontology schema, information content records and position points."""

from __future__ import annotations

import operator
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional

from .intervals import EMPTY, IntervalSet, interval_union, union_all


def record(cls):
    """Frozen dataclass whose hash is computed once and cached.

    Agent states and messages are hashed over and over by the state-space
    explorer, and they never change after construction.
    """
    cls = dataclass(frozen=True)(cls)
    names = tuple(f.name for f in fields(cls))
    getter = operator.attrgetter(*names) if len(names) > 1 else (lambda self: (getattr(self, names[0]),))

    def __hash__(self):
        d = self.__dict__
        h = d.get("_h")
        if h is None:
            h = d["_h"] = hash((cls.__name__, getter(self)))
        return h

    cls.__hash__ = __hash__
    return cls


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class OntologySchema:
    """Classes, binary relations, finite integer types and attribute typing."""

    classes: frozenset[int]
    relations: dict[int, tuple[int, int]]
    types: dict[int, tuple[int, int]]  # type id -> inclusive value range
    attr_map: dict[int, tuple[tuple[int, int], ...]] = field(default_factory=dict)  # class/relation -> (attr, type)
    key_attrs: frozenset[int] = frozenset()

    def validate(self) -> None:
        for rel, (c1, c2) in self.relations.items():
            if c1 not in self.classes or c2 not in self.classes:
                raise SchemaError(f"relation {rel} connects unknown classes ({c1}, {c2})")
        all_attrs = set()
        for owner, pairs in self.attr_map.items():
            if owner not in self.classes and owner not in self.relations:
                raise SchemaError(f"attributes declared for unknown class/relation {owner}")
            for attr, type_id in pairs:
                if type_id not in self.types:
                    raise SchemaError(f"attribute {attr} of {owner} has unknown type {type_id}")
                all_attrs.add(attr)
        for lo, hi in self.types.values():
            if lo > hi:
                raise SchemaError(f"empty type domain [{lo},{hi}]")
        if not self.key_attrs <= all_attrs:
            raise SchemaError(f"key attributes {sorted(self.key_attrs - all_attrs)} are not declared")

    def attr_type(self, owner: int, attr: int) -> Optional[int]:
        for a, t in self.attr_map.get(owner, ()):
            if a == attr:
                return t
        return None

    def in_domain(self, owner: int, attr: int, value: int) -> bool:
        t = self.attr_type(owner, attr)
        if t is None:
            return False
        lo, hi = self.types[t]
        return lo <= value <= hi


@record
class AttributeSlot:
    """One attribute of an instance agent: values, interested rules, position."""

    attr_id: int
    values: frozenset = frozenset()
    out_rules: tuple[int, ...] = ()
    pos: IntervalSet = EMPTY

    @property
    def evaluated(self) -> bool:
        return bool(self.values)


@record
class RelationInstance:
    """One tuple of a relation agent; evaluated once both objects are known."""

    index: int
    o1: Optional[int] = None
    o2: Optional[int] = None
    o1_pos: IntervalSet = EMPTY
    o2_pos: IntervalSet = EMPTY
    attrs: tuple[tuple[int, int, IntervalSet], ...] = ()
    pos: IntervalSet = EMPTY

    @property
    def evaluated(self) -> bool:
        return self.o1 is not None and self.o2 is not None

    def recomputed(self, merge_adjacent: bool = True) -> "RelationInstance":
        parts = [self.o1_pos, self.o2_pos] + [p for _, _, p in self.attrs]
        pos = union_all(parts, merge_adjacent)
        if pos == self.pos:
            return self
        return RelationInstance(self.index, self.o1, self.o2, self.o1_pos, self.o2_pos, self.attrs, pos)


class PositionPoint(IntervalSet):
    """Union of the positions of one argument vector (canonical interval list)."""

    __slots__ = ()


def position_point(args: Iterable, merge_adjacent: bool = True) -> PositionPoint:
    """Canonical union of the ``pos`` of every argument in ``args``."""
    args = list(args)
    if not args:
        raise ValueError("an empty argument vector has no position point")
    acc = EMPTY
    for a in args:
        acc = interval_union(acc, a.pos, merge_adjacent)
    return tuple.__new__(PositionPoint, acc)
