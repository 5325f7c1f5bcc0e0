import json

import numpy as np
import pytest

from qtazrp import identities as ident
from qtazrp.bethe import BetheContext
from qtazrp.errors import StateError
from qtazrp.qcalc import Permutation


def test_residual_scales():
    assert ident.residual(1.0, 1.0 + 1e-9) == pytest.approx(1e-9, rel=1e-6)
    assert ident.residual(0.0, 0.0) == 0.0
    # both sides tiny: an absolute gap of 1e-12 lands exactly on the threshold
    assert ident.residual(1e-8, 1e-8 + 1e-12) == pytest.approx(ident.THRESHOLD, rel=1e-3)


def test_report_pass_flag_and_json():
    rep = ident.IdentityReport("x", 2, 1, 1e-9)
    assert rep.passed
    assert not ident.IdentityReport("x", 2, 1, 1e-7).passed
    data = json.loads(rep.to_json())
    assert data["name"] == "x" and data["passed"] is True
    merged = ident.IdentityReport.merge("x", 3, [rep, ident.IdentityReport("x", 3, 4, 2e-9)])
    assert merged.trials == 5 and merged.residual == 2e-9


def test_pole_locations():
    ok, zj, zi = ident.check_pole_locations(0.3, 0.5, 0.3)
    assert ok and abs(zj) > 0.3 > abs(zi)
    # outside r_max the z_j pole has moved inside the circle
    assert not ident.check_pole_locations(-0.9, -0.5, 0.9)[0]
    assert ident.pole_sweep(200).residual == 0


@pytest.mark.parametrize("n,q", [(1, 0.5), (2, 0.5), (3, 0.3 + 0.2j)])
def test_q_factorial_integral(n, q):
    assert ident.check_q_factorial_integral(n, q).passed


def test_vandermonde_small_by_hand():
    z, q = (0.3 + 0.1j, -0.2j), 0.4
    lhs, rhs = ident.vandermonde_sides(z, q)
    D = lambda a, b: a - q * b - (1 - q) * a * b
    assert lhs == pytest.approx(D(z[1], z[0]) - D(z[0], z[1]))
    assert rhs == pytest.approx((1 + q) * (z[1] - z[0]))


def test_antisym_two_points():
    rng = np.random.default_rng(0)
    for _ in range(10):
        q = ident.random_q(rng)
        rep = ident.check_antisym_F(2, ident.random_points(rng, 2, q), q)
        assert rep.residual <= 1e-11


def test_extended_precision_kicks_in():
    # this draw cancels badly enough that plain doubles miss the threshold
    rng = np.random.default_rng(61)
    q = ident.random_q(rng)
    z = ident.random_points(rng, 6, q)
    lhs, rhs, _ = ident._vandermonde([complex(v) for v in z], complex(q), 1 + 0j)
    assert ident.residual(lhs, rhs) > ident.THRESHOLD
    assert ident.check_vandermonde_identity(6, z, q).passed


def test_recursion_and_guards():
    rng = np.random.default_rng(1)
    q = ident.random_q(rng)
    z = ident.random_points(rng, 4, q)
    rep = ident.check_f_recursion(4, Permutation((2, 0, 3, 1)), z, q)
    assert rep.residual <= 1e-10
    with pytest.raises(StateError):
        ident.check_f_recursion(4, (0, 1), z, q)
    with pytest.raises(StateError):
        ident.check_vandermonde_identity(3, z, q)


def test_boundary_two_particles():
    z = (0.3 * np.exp(0.4j), 0.3 * np.exp(2.1j))
    rep = ident.check_boundary_terms(2, (4, 4), z, 0.5)
    assert rep.residual <= 1e-12
    a, b = ident.boundary_sides([4, 3], 0, BetheContext(0.5, z))
    assert abs(a - b) <= 1e-12 * max(abs(a), 1)


def test_free_equation_is_time_independent():
    rng = np.random.default_rng(2)
    q = 0.4
    z = 0.3 * np.exp(2j * np.pi * rng.random(3))
    r1 = ident.check_free_equation(3, (0, 2, 2), z, q, 0.1)
    r2 = ident.check_free_equation(3, (0, 2, 2), z, q, 3.0)
    assert r1.residual <= 1e-11 and r2.residual <= 1e-11


def test_fault_injection_flips_results():
    with ident.injected_fault():
        reps = ident.run_battery(["poles", "recursion"])
    assert not any(r.passed for r in reps)
    assert all(r.passed for r in ident.run_battery(["poles", "recursion"]))


def test_unknown_identity():
    with pytest.raises(StateError):
        ident.run_battery(["nope"])
