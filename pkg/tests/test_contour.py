import numpy as np
import pytest

from qtazrp.contour import (
    ContourSpec,
    QuadratureGrid,
    adaptive_node_count,
    check_budget,
    default_radius,
    integrate_1d,
    integrate_nd,
    overflow_guard,
    refine_nodes,
)
from qtazrp.errors import ContourPlacementError, ConvergenceError, CostBudgetError, OverflowGuardError


@pytest.mark.parametrize("k", range(-5, 6))
def test_monomials(k):
    grid = QuadratureGrid(0.4, 16)
    val = integrate_1d(lambda z: z ** (k - 1), grid)
    assert abs(val - (1.0 if k == 0 else 0.0)) < 1e-14 * max(1.0, 0.4**k)


def test_aliasing_at_lag_M():
    # z^(M-1) aliases onto the residue term: the rule returns r^M
    grid = QuadratureGrid(0.5, 8)
    assert integrate_1d(lambda z: z ** 7, grid) == pytest.approx(0.5**8)


def test_exponential_residue():
    # (1/2 pi i) oint z^k e^(t/z) dz = t^(k+1) / (k+1)!
    grid = QuadratureGrid(0.3, 64)
    t = 1.3
    val = integrate_1d(lambda z: z**3 * np.exp(t / z), grid)
    assert val == pytest.approx(t**4 / 24, rel=1e-13)


def test_power_table_matches_powers():
    grid = QuadratureGrid(0.7, 12)
    e = np.array([-3, 0, 2, 25])
    tab = grid.power_table(e)
    assert np.allclose(tab, grid.nodes[:, None] ** e[None, :], rtol=1e-12)


def test_radius_bounds():
    assert default_radius(0.5) == pytest.approx(0.5)
    with pytest.raises(ContourPlacementError):
        ContourSpec(1.0, None, 0.5)
    with pytest.raises(ContourPlacementError):
        ContourSpec(0.0)
    with pytest.raises(ContourPlacementError):
        ContourSpec(0.3, 7, 0.5)
    with pytest.raises(ValueError):
        ContourSpec(0.3, None, 0.5).grid()


def test_overflow_guard():
    overflow_guard(1.0, 0.5)
    with pytest.raises(OverflowGuardError):
        overflow_guard(100.0, 0.1)


def test_budget():
    check_budget(64, 3, 10**6)
    with pytest.raises(CostBudgetError):
        check_budget(128, 3, 10**6)
    check_budget(10**4, 4, None)


def _f(*zs):
    out = 1.0
    for z in zs:
        out = out * np.exp(0.5 / z)
    return out


def test_nd_factorizes_and_ignores_threads():
    grid = QuadratureGrid(0.4, 16)
    one = integrate_1d(lambda z: np.exp(0.5 / z), grid)
    a = integrate_nd(_f, grid, 3, parallelism=1)
    b = integrate_nd(_f, grid, 3, parallelism=4)
    assert a == b
    assert a == pytest.approx(one**3, rel=1e-13)


def test_nd_chunked_path():
    # 80^3 tuples exceeds one block, so the leading axis is split
    grid = QuadratureGrid(0.4, 80)
    val = integrate_nd(lambda a, b, c: 1 / (a * b * c), grid, 3, parallelism=2)
    assert val == pytest.approx(1.0, abs=1e-13)


def test_refine_nodes_stops_at_first_settled_M():
    calls = []

    def ev(M):
        calls.append(M)
        return 2.0 ** (-M)

    ref = refine_nodes(ev, 1e-8)
    assert ref.M == 32 and calls == [16, 32, 64]
    assert ref.delta < 1e-8
    assert ref.refined == 2.0**-64


def test_refine_nodes_failure_carries_estimates():
    with pytest.raises(ConvergenceError) as info:
        refine_nodes(lambda M: float(M), 1e-3, m_max=64)
    assert info.value.current == 64.0


def test_adaptive_node_count():
    spec = ContourSpec(0.5, None, 0.5)
    assert adaptive_node_count(lambda a, b: 1 / (a * b), spec, 2) == 16
