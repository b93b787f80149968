import numpy as np
import pytest

from blowlab.discretization import Grid
from blowlab.sources import forcing, from_spec, initial


def test_gaussian_bump_values():
    f = forcing("gaussian-bump", 0.3)
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert np.allclose(f(x), [0.3, 0.3 * np.exp(-2.0)])


def test_power_tail_is_capped():
    f = forcing("power-tail", 2.0, lam=2.0)
    r = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
    assert np.allclose(f.profile(r), [2.0, 2.0, 2.0, 0.5, 0.125])
    assert f.radial_breaks == (1.0,)


def test_plateau_support():
    f = forcing("plateau", 1.0)
    assert f.profile(np.array([0.5]))[0] == 1.0
    assert f.profile(np.array([1.5]))[0] == 0.0


def test_initial_kinds():
    assert np.allclose(initial("constant", 2.0).profile(np.array([0.0, 5.0])), 2.0)
    g = initial("gaussian", 1.0, width=2.0)
    assert g.profile(np.array([2.0]))[0] == pytest.approx(np.exp(-1.0))


def test_on_grid_and_from_spec():
    grid = Grid((2.0,), (5,))
    f = from_spec({"kind": "power-tail", "eps": 0.1, "lambda": 2}, "forcing")
    # nodes sit strictly inside the box: 0, +-2/3, +-4/3
    assert f.on(grid).values.tolist() == pytest.approx([0.05625, 0.1, 0.1, 0.1, 0.05625])
    assert from_spec(None, "forcing").on(grid).sup_norm() == 0.0
    assert from_spec({"kind": "gaussian", "amplitude": 0.5}, "initial").amplitude == 0.5


def test_bad_specs():
    with pytest.raises(ValueError):
        forcing("power-tail", 1.0)
    with pytest.raises(ValueError):
        forcing("unknown", 1.0)
    with pytest.raises(ValueError):
        initial("power-tail", 1.0)
    with pytest.raises(ValueError):
        from_spec({"kind": "zero"}, "boundary")
