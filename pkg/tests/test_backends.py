import json
import os
import subprocess
import sys

import numpy as np
import pytest

from qtazrp._accel import HAVE_NUMBA
from qtazrp.contour import QuadratureGrid
from qtazrp.leftmost import cdf_step_values, pmf_values
from qtazrp.transition import coefficient_tensor, direct_sum

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not importable")

GRID = QuadratureGrid(0.4, 16)


@pytest.mark.parametrize("x,y", [((3,), (1,)), ((2, 0), (0, 0)), ((5, 2, 2), (3, 1, 0)), ((1, 4, 0, 2), (2, 2, 0, 0))])
def test_direct(x, y):
    a = direct_sum(np.array(x), np.array(y), 0.7, 0.3 + 0.1j, GRID, "numba")
    b = direct_sum(np.array(x), np.array(y), 0.7, 0.3 + 0.1j, GRID, "numpy")
    assert abs(a - b) <= 1e-14 * max(1.0, abs(a))


@pytest.mark.parametrize("y", [(0,), (1, 0), (3, 1, 0)])
def test_batch(y):
    a = coefficient_tensor(np.array(y), 0.9, 0.5, GRID, 0, 8, "numba")
    b = coefficient_tensor(np.array(y), 0.9, 0.5, GRID, 0, 8, "numpy")
    assert np.max(np.abs(a - b)) < 1e-14


def test_leftmost_and_det():
    xs = np.arange(0, 6)
    a = pmf_values(np.array([2, 0, 0]), xs, 0.6, 0.5, GRID, "numba")
    b = pmf_values(np.array([2, 0, 0]), xs, 0.6, 0.5, GRID, "numpy")
    assert np.max(np.abs(a - b)) < 1e-14
    a = cdf_step_values(3, xs + 1, 0.6, 0.5, GRID, "numba")
    b = cdf_step_values(3, xs + 1, 0.6, 0.5, GRID, "numpy")
    assert np.max(np.abs(a - b)) < 1e-14


def test_env_flag_selects_numpy():
    code = (
        "import json\n"
        "from qtazrp._accel import backend_name\n"
        "from qtazrp import TransitionQuery, evaluate_transition\n"
        "r = evaluate_transition(TransitionQuery.create((0, 0), (1, 2), 1.0, 0.5))\n"
        "print(json.dumps([backend_name(), r.raw.real]))\n"
    )
    outs = {}
    for flag in ("1", "0"):
        env = dict(os.environ, QTAZRP_NO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs[flag] = json.loads(res.stdout)
    assert outs["1"][0] == "numpy" and outs["0"][0] == "numba"
    assert outs["1"][1] == pytest.approx(outs["0"][1], abs=1e-14)
