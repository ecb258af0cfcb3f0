"""Wire payloads exchanged by agents, and rule argument payloads."""

from __future__ import annotations

from typing import Optional, Union

from .intervals import EMPTY, IntervalSet
from .model import record

CONTROLLER = 0

# argument kinds a rule slot may accept
ATTR = "attr"
AGENT = "agent"
REL = "rel"


@record
class ActDelta:
    """Activity change reported to the controller."""

    delta: int


@record
class AttrValue:
    """An attribute value with its position (instance <-> rule)."""

    sender: int
    cls: int
    attr_id: int
    value: int
    pos: IntervalSet = EMPTY


@record
class AgentIntro:
    """An instance agent introducing itself to a rule that uses it."""

    sender: int
    cls: int
    pos: IntervalSet = EMPTY


@record
class RelNotice:
    """A relation agent announcing one of its evaluated instances."""

    sender: int
    relation_id: int
    index: int
    o1: Optional[int] = None
    o2: Optional[int] = None
    pos: IntervalSet = EMPTY


@record
class RelUpdate:
    """A rule result for one relation instance: an object or an attribute value."""

    sender: int
    index: int
    slot: Union[str, int]  # "o1", "o2" or an attribute id
    value: int
    pos: IntervalSet = EMPTY


@record
class Arg:
    """One argument value of a rule, built from an incoming data message."""

    kind: str
    source: int  # instance id (attr/agent) or relation agent id (rel)
    cls: int  # class id, or relation id for relation instances
    key: Optional[int] = None  # attribute id or relation instance index
    value: Optional[int] = None
    objects: tuple = ()
    pos: IntervalSet = EMPTY


@record
class ArgVector:
    args: tuple


@record
class StopToken:
    sender: int = CONTROLLER


Message = Union[ActDelta, AttrValue, AgentIntro, RelNotice, RelUpdate, ArgVector, StopToken]

WORK_TYPES = (AttrValue, AgentIntro, RelNotice, RelUpdate, ArgVector)


def is_work(m) -> bool:
    """True for messages whose delivery was announced to the controller."""
    return isinstance(m, WORK_TYPES)


def to_arg(m) -> Arg:
    if isinstance(m, AttrValue):
        return Arg(ATTR, m.sender, m.cls, m.attr_id, m.value, (), m.pos)
    if isinstance(m, AgentIntro):
        return Arg(AGENT, m.sender, m.cls, None, None, (), m.pos)
    if isinstance(m, RelNotice):
        return Arg(REL, m.sender, m.relation_id, m.index, None, (m.o1, m.o2), m.pos)
    raise TypeError(f"{type(m).__name__} is not a rule argument payload")


def encode(m) -> dict:
    """Stable JSON-ready form of a message (type tag first)."""
    out = {"type": type(m).__name__}
    for name in m.__dataclass_fields__:
        v = getattr(m, name)
        if isinstance(v, IntervalSet):
            v = [list(p) for p in v]
        elif isinstance(v, tuple):
            v = [encode(x) if hasattr(x, "__dataclass_fields__") else x for x in v]
        out[name] = v
    return out


_TYPES = {t.__name__: t for t in (ActDelta, AttrValue, AgentIntro, RelNotice, RelUpdate, Arg, ArgVector, StopToken)}


def decode(d: dict):
    d = dict(d)
    t = _TYPES[d.pop("type")]
    kwargs = {}
    for name, v in d.items():
        if name == "pos":
            v = IntervalSet(tuple(p) for p in v)
        elif name == "args":
            v = tuple(decode(x) for x in v)
        elif name == "objects":
            v = tuple(v)
        kwargs[name] = v
    return t(**kwargs)
