import math

import numpy as np
import pytest
from scipy.stats import poisson

from qtazrp.contour import ContourSpec
from qtazrp.errors import CostBudgetError, NumericalQualityError, OverflowGuardError, StateError
from qtazrp.transition import (
    TransitionQuery,
    checked_probability,
    distribution_at_time,
    evaluate_transition,
    jump_tail_bound,
    transition_probability,
)


def P(Y, X, t, q, **kw):
    return transition_probability(TransitionQuery.create(Y, X, t, q), **kw)


@pytest.mark.parametrize("k", [0, 1, 4, 9])
def test_single_particle_is_poisson(k):
    assert P((0,), (k,), 1.3, 0.5) == pytest.approx(poisson.pmf(k, 1.3), rel=1e-10)


def test_two_particles_closed_forms():
    # (0,0) leaves at rate [2]_q = 1.5; (0,1) leaves at rate 2
    t = 1.0
    assert P((0, 0), (0, 0), t, 0.5) == pytest.approx(math.exp(-1.5), abs=1e-12)
    assert P((0, 0), (0, 1), t, 0.5) == pytest.approx(3 * (math.exp(-1.5) - math.exp(-2)), abs=1e-12)
    t = 0.7
    assert P((0, 1), (0, 1), t, 0.5) == pytest.approx(0.2465969639416065, abs=1e-12)
    assert P((0, 1), (1, 1), t, 0.5) == pytest.approx(2 * (math.exp(-1.05) - math.exp(-1.4)), abs=1e-12)


def test_unreachable_is_exact_zero():
    res = evaluate_transition(TransitionQuery.create((0, 2), (1, 1), 1.0, 0.5))
    assert res.raw == 0 and res.M == 0


def test_fixed_nodes_and_radius():
    q = TransitionQuery((0, 0), (0, 1), 1.0, ContourSpec(0.3, 64, 0.5))
    res = evaluate_transition(q)
    assert res.M == 64 and res.delta is None
    assert res.probability == pytest.approx(3 * (math.exp(-1.5) - math.exp(-2)), abs=1e-12)


def test_radius_independence():
    vals = [
        evaluate_transition(TransitionQuery((0, 1), (1, 3), 0.8, ContourSpec(r, None, 0.3))).raw
        for r in (0.2, 0.45, 0.6)
    ]
    assert max(abs(v - vals[0]) for v in vals) < 1e-11


def test_complex_q_is_flagged():
    res = evaluate_transition(TransitionQuery.create((0, 0), (0, 1), 0.5, 0.3 + 0.2j))
    assert not res.probabilistic
    with pytest.raises(StateError):
        res.probability
    with pytest.raises(StateError):
        P((0, 0), (0, 1), 0.5, 0.3 + 0.2j)


def test_guards():
    with pytest.raises(StateError):
        TransitionQuery.create((0, 0), (0,), 1.0, 0.5)
    with pytest.raises(StateError):
        TransitionQuery.create((0,), (1,), -1.0, 0.5)
    with pytest.raises(OverflowGuardError):
        P((0,), (1,), 1000.0, 0.5)
    with pytest.raises(CostBudgetError):
        P((0, 0, 0), (0, 0, 1), 1.0, 0.5, budget=1000)


def test_output_policy():
    assert checked_probability(-1e-8) == 0.0
    assert checked_probability(1 + 1e-8) == 1.0
    assert checked_probability(0.25 + 1e-12j) == 0.25
    with pytest.raises(NumericalQualityError):
        checked_probability(0.5 + 1e-6j)
    with pytest.raises(NumericalQualityError):
        checked_probability(-0.01)


def test_jump_tail_bound():
    assert jump_tail_bound(2, 1.0, 0) == 1.0
    assert jump_tail_bound(2, 1.0, 3) == pytest.approx(poisson.sf(2, 2.0))


def test_distribution_matches_pointwise():
    d = distribution_at_time((0, 1), 0.7, q=0.5, support_cutoff=12)
    assert d.deficit < d.tail_bound + 1e-12
    for X in [(0, 1), (1, 1), (0, 4), (2, 3)]:
        assert d[X] == pytest.approx(P((0, 1), X, 0.7, 0.5), abs=1e-12)
    assert d[(9, 9)] == 0.0


def test_distribution_step_three_particles():
    d = distribution_at_time((0, 0, 0), 0.5, q=0.4, support_cutoff=14)
    assert abs(d.deficit) < 1e-10
    # P(no jump) = exp(-[3]_q t)
    assert d[(0, 0, 0)] == pytest.approx(math.exp(-(1 + 0.4 + 0.16) * 0.5), abs=1e-12)


def test_distribution_complex_q_raw_only():
    d = distribution_at_time((0, 0), 0.5, q=0.3 + 0.2j, support_cutoff=16)
    assert d.probabilities is None and not d.probabilistic
    # the q-weighted coefficients still sum to one
    assert abs(np.sum(d.raw) - 1) < 1e-6


def test_chapman_kolmogorov_two_particles():
    Y, s, t, q = (0, 0), 0.4, 0.6, 0.5
    first = distribution_at_time(Y, s, q=q, support_cutoff=16)
    direct = distribution_at_time(Y, s + t, q=q, support_cutoff=8)
    composed = {}
    for Z, pz in first.as_dict().items():
        room = 8 - Z.displacement(Y)
        if pz < 1e-12 or room < 0:
            continue
        second = distribution_at_time(Z, t, q=q, support_cutoff=room)
        for X, px in second.as_dict().items():
            composed[X] = composed.get(X, 0.0) + pz * px
    worst = max(abs(composed.get(X, 0.0) - p) for X, p in direct.as_dict().items())
    assert worst < 1e-7
