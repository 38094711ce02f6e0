import itertools
import json

import pytest
from hypothesis import given, strategies as st

from aothap.attributes import (
    AccessPolicy,
    ArityError,
    AttributeList,
    AttributeUniverse,
    DuplicateLabelError,
    EmptyValueSetError,
    UniverseMismatchError,
    UnknownLabelError,
    parse_list,
    parse_policy,
    parse_universe,
    satisfies,
)

U3 = {
    "attributes": [
        {"name": "A1", "values": ["v11", "v12", "v13"]},
        {"name": "A2", "values": ["v21", "v22"]},
        {"name": "A3", "values": ["v31", "v32", "v33"]},
    ]
}


def brute_satisfies(choice, allowed):
    ok = True
    for t, slot in zip(choice, allowed):
        if t not in slot:
            ok = False
    return ok


def test_worked_example_satisfied():
    u = parse_universe(U3)
    w = parse_policy(u, {"allow": [["v11", "v13"], ["v22"], ["v31", "v32", "v33"]]})
    assert satisfies(parse_list(u, {"choose": ["v11", "v22", "v31"]}), w)


def test_worked_example_not_satisfied():
    u = parse_universe(U3)
    w = parse_policy(u, {"allow": [["v11", "v13"], ["v22"], ["v31", "v32", "v33"]]})
    assert not satisfies(parse_list(u, {"choose": ["v12", "v22", "v33"]}), w)


def test_full_policy_accepts_everything():
    u = AttributeUniverse.from_sizes((2, 3))
    w = AccessPolicy.allow_all(u.sizes)
    for choice in itertools.product(range(2), range(3)):
        assert satisfies(AttributeList(u.sizes, choice), w)


def test_parse_universe_minimal():
    u = parse_universe(json.dumps({"attributes": [{"name": "dept", "values": ["a", "b"]}]}))
    assert u.n == 1 and u.sizes == (2,) and u.m == 2


def test_unknown_label():
    u = parse_universe({"attributes": [{"name": "dept", "values": ["a", "b"]}]})
    with pytest.raises(UnknownLabelError):
        parse_policy(u, {"allow": [["c"]]})


def test_two_values_for_one_attribute_is_arity_error():
    u = parse_universe({"attributes": [{"name": "dept", "values": ["a", "b"]}]})
    with pytest.raises(ArityError):
        parse_list(u, {"choose": [["a", "b"]]})


def test_wrong_slot_count():
    u = parse_universe(U3)
    with pytest.raises(ArityError):
        parse_list(u, {"choose": ["v11", "v22"]})


def test_duplicate_and_empty_rejected():
    with pytest.raises(DuplicateLabelError):
        parse_universe({"attributes": [{"name": "x", "values": ["a", "a"]}]})
    with pytest.raises(EmptyValueSetError):
        parse_universe({"attributes": [{"name": "x", "values": []}]})
    u = parse_universe(U3)
    with pytest.raises(EmptyValueSetError):
        parse_policy(u, {"allow": [[], ["v21"], ["v31"]]})


def test_universe_mismatch():
    a = AttributeList((2, 2), (0, 0))
    with pytest.raises(UniverseMismatchError):
        satisfies(a, AccessPolicy.allow_all((2, 3)))


def test_universe_json_round_trip():
    u = parse_universe(U3)
    assert parse_universe(u.to_json()) == u


policies = st.lists(st.integers(1, 4), min_size=1, max_size=4).flatmap(
    lambda sizes: st.tuples(
        st.just(tuple(sizes)),
        st.tuples(*[st.frozensets(st.integers(0, k - 1), min_size=1) for k in sizes]),
    )
)


@given(policies)
def test_count_of_satisfying_lists(sp):
    sizes, allowed = sp
    w = AccessPolicy(sizes, allowed)
    hits = 0
    for choice in itertools.product(*[range(k) for k in sizes]):
        lib = satisfies(AttributeList(sizes, choice), w)
        assert lib == brute_satisfies(choice, allowed)
        hits += lib
    want = 1
    for slot in allowed:
        want *= len(slot)
    assert hits == want
