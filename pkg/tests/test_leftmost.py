import math

import numpy as np
import pytest
from scipy.stats import poisson

from qtazrp.errors import StateError
from qtazrp.leftmost import (
    LeftmostQuery,
    cauchy_kernel_det_check,
    f_sigma,
    leftmost_cdf_distribution,
    leftmost_cdf_step,
    leftmost_distribution,
    leftmost_pmf,
    leftmost_tail_bound,
    step_prefactor,
)
from qtazrp.transition import distribution_at_time


def test_single_particle():
    for x in range(0, 8):
        q = LeftmostQuery.create((0,), x, 2.0, 0.5)
        assert leftmost_pmf(q) == pytest.approx(poisson.pmf(x, 2.0), rel=1e-10)
        if x:
            assert leftmost_cdf_step(0, 1, x, 2.0, 0.5) == pytest.approx(poisson.sf(x - 1, 2.0), rel=1e-10)


def test_two_particle_step_closed_form():
    # x_2 stays at 0 until it is alone on the site and then jumps at rate 1
    t = 1.0
    p0 = math.exp(-1.5 * t) + 3 * (math.exp(-t) - math.exp(-1.5 * t))
    assert leftmost_pmf(LeftmostQuery.create((0, 0), 0, t, 0.5)) == pytest.approx(p0, abs=1e-12)
    assert leftmost_cdf_step(0, 2, 1, t, 0.5) == pytest.approx(1 - p0, abs=1e-12)


def test_pmf_is_marginal_of_transition():
    Y, t, q = (0, 1), 0.9, 0.3
    d = distribution_at_time(Y, t, q=q, support_cutoff=24)
    xs = np.arange(0, 6)
    res = leftmost_distribution(Y, xs, t, q=q)
    for x, v in zip(xs, res.values):
        marg = math.fsum(p for s, p in d.as_dict().items() if s.positions[0] == x)
        assert v == pytest.approx(marg, abs=1e-12)


def test_sites_left_of_start_are_zero():
    res = leftmost_distribution((2, 3), [0, 1, 2], 0.5, q=0.5)
    assert res.values[0] == 0 and res.values[1] == 0
    assert res.values[2] > 0


def test_cdf_equals_tail_of_pmf():
    t, q = 0.8, 0.6
    xs = np.arange(0, 25)
    pmf = leftmost_distribution((0, 0, 0), xs, t, q=q).values
    cdf = leftmost_cdf_distribution(0, 3, xs[:6], t, q=q).values
    for k in range(6):
        assert cdf[k] == pytest.approx(math.fsum(pmf[k:]), abs=1e-12)
    assert cdf[0] == 1.0


def test_step_prefactor_one_particle():
    assert step_prefactor(1, 0.5) == pytest.approx(0.5)


def test_tail_bound():
    assert leftmost_tail_bound((0, 0), 0, 1.0) == 1.0
    assert leftmost_tail_bound((0, 0), 2, 1.0) == pytest.approx(poisson.sf(3, 2.0))


def test_complex_q_flagged():
    res = leftmost_distribution((0, 0), [0, 1], 0.5, q=0.3 + 0.2j)
    assert not res.probabilistic
    with pytest.raises(StateError):
        res.values
    assert res.max_imag > 1e-6


def test_f_sigma_small_cases():
    q = 0.5
    z = (0.3 + 0.1j,)
    assert f_sigma((0,), z, q) == pytest.approx(1 / (1 - z[0]))
    w1, w2 = 0.2 - 0.1j, -0.4j
    expect = (1 / (1 + q) + w1 / (1 - w1)) / (1 - w1 * w2)
    assert f_sigma((0, 1), (w1, w2), q) == pytest.approx(expect)
    with pytest.raises(StateError):
        f_sigma((0, 1), (w1,), q)


def test_cauchy_det_two_by_two():
    z, q = np.array([0.3 + 0.2j, -0.1 + 0.4j]), 0.5
    D = lambda a, b: a - q * b - (1 - q) * a * b
    lhs = 1 / (D(z[0], z[0]) * D(z[1], z[1])) - 1 / (D(z[0], z[1]) * D(z[1], z[0]))
    res, got_lhs, rhs = cauchy_kernel_det_check(z, q)
    assert got_lhs == pytest.approx(lhs, rel=1e-13)
    assert res <= 1e-12


def test_cauchy_det_five_random():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        z = 0.8 * np.sqrt(rng.random(5)) * np.exp(2j * np.pi * rng.random(5))
        q = rng.uniform(0.1, 0.9) * np.exp(1j * rng.uniform(-1, 1))
        worst = max(worst, cauchy_kernel_det_check(z, q)[0])
    assert worst <= 1e-9
