import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtazrp.errors import StateError
from qtazrp.states import ZrpState, reachable_states


def test_parse_and_views():
    X = ZrpState.parse("0, 0,1")
    assert X.positions == (0, 0, 1)
    assert X.right_to_left == (1, 0, 0)
    assert X.x(1) == 1 and X.x(3) == 0
    assert X.occupancy == {0: 2, 1: 1}
    assert X.occupancy_form() == "((0)^2,(1)^1)"
    assert str(X) == "0,0,1"
    assert ZrpState.coerce([3]) == ZrpState((3,))


@pytest.mark.parametrize("bad", ["1,0", "", "a,b"])
def test_parse_rejects(bad):
    with pytest.raises(StateError):
        ZrpState.parse(bad)


def test_reachability():
    Y = ZrpState((0, 1))
    assert ZrpState((0, 3)).reachable_from(Y)
    assert not ZrpState((1, 1)).reachable_from((0, 0, 0))
    assert not ZrpState((-1, 5)).reachable_from(Y)
    assert ZrpState((2, 2)).displacement(Y) == 3


def _brute(Y, cutoff):
    # walk the jump graph breadth-first
    seen, frontier = {Y}, {Y}
    for _ in range(cutoff):
        nxt = set()
        for X in frontier:
            pos = list(X.positions)
            for site in set(pos):
                last = max(i for i, p in enumerate(pos) if p == site)
                new = pos.copy()
                new[last] += 1
                nxt.add(ZrpState(tuple(new)))
        frontier = nxt - seen
        seen |= nxt
    return sorted(seen)


@pytest.mark.parametrize("Y", [(0,), (0, 0), (0, 2), (0, 0, 0), (0, 1, 3)])
@pytest.mark.parametrize("cutoff", [0, 1, 4, 7])
def test_reachable_states_match_jump_graph(Y, cutoff):
    assert reachable_states(Y, cutoff) == _brute(ZrpState(Y), cutoff)


def test_reachable_count_two_particles():
    # pairs 0 <= a <= b with a + b <= c: sum_{a} (c - 2a + 1)
    c = 10
    expect = sum(c - 2 * a + 1 for a in range(c // 2 + 1))
    assert len(reachable_states((0, 0), c)) == expect


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=5))
def test_sorted_tuples_are_states(xs):
    X = ZrpState(tuple(sorted(xs)))
    assert sum(X.occupancy.values()) == len(xs)
    assert ZrpState.parse(str(X)) == X
