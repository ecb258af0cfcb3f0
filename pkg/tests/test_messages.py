from hypothesis import given
from hypothesis import strategies as st

from mdacheck.intervals import IntervalSet
from mdacheck.messages import (
    AGENT,
    ATTR,
    REL,
    ActDelta,
    AgentIntro,
    Arg,
    ArgVector,
    AttrValue,
    RelNotice,
    RelUpdate,
    StopToken,
    decode,
    encode,
    is_work,
    to_arg,
)

pos = st.lists(st.tuples(st.integers(1, 30), st.integers(0, 3)), max_size=3).map(
    lambda xs: IntervalSet([(lo, lo + d) for lo, d in xs])
)
small = st.integers(0, 50)
attr_values = st.builds(AttrValue, small, small, small, small, pos)
intros = st.builds(AgentIntro, small, small, pos)
notices = st.builds(RelNotice, small, small, small, small, small, pos)
updates = st.builds(RelUpdate, small, small, st.sampled_from(["o1", "o2", 3]), small, pos)
payloads = st.one_of(attr_values, intros, notices)
vectors = st.lists(payloads.map(to_arg), min_size=1, max_size=3).map(lambda xs: ArgVector(tuple(xs)))
messages = st.one_of(st.builds(ActDelta, st.integers(-1, 9)), attr_values, intros, notices, updates, vectors, st.just(StopToken()))


@given(messages)
def test_encode_decode_round_trip(m):
    assert decode(encode(m)) == m
    assert list(encode(m))[0] == "type"


def test_work_classification():
    assert not is_work(ActDelta(3)) and not is_work(StopToken())
    assert is_work(AgentIntro(1, 1)) and is_work(ArgVector(()))


def test_to_arg_kinds():
    p = IntervalSet([(2, 2)])
    assert to_arg(AttrValue(1, 4, 0, 9, p)) == Arg(ATTR, 1, 4, 0, 9, (), p)
    assert to_arg(AgentIntro(2, 5, p)) == Arg(AGENT, 2, 5, None, None, (), p)
    assert to_arg(RelNotice(3, 7, 1, 1, 2, p)) == Arg(REL, 3, 7, 1, None, (1, 2), p)
