import numpy as np
import pytest
import scipy.linalg

from inekf import SO3
from inekf.integrate import integrate_group_flow, integrate_ode, rk4_step, \
    time_grid


def test_rk4_linear_ode_against_expm():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4))
    y0 = rng.standard_normal(4)
    y = integrate_ode(lambda t, y: A @ y, y0, 0.0, 1.0, 1e-3)
    assert np.allclose(y, scipy.linalg.expm(A) @ y0, atol=1e-9)


def test_rk4_scalar_order():
    # Local error of a single step is O(dt^5) for dy/dt = y.
    errs = []
    for dt in (1e-1, 5e-2):
        y = rk4_step(lambda t, y: y, 0.0, 1.0, dt)
        errs.append(abs(y - np.exp(dt)))
    assert errs[0] / errs[1] > 2 ** 4.5


def test_time_grid():
    n, h = time_grid(0.0, 1.0, 1e-3)
    assert n == 1000 and np.isclose(h, 1e-3)
    n, h = time_grid(0.0, 0.0, 1e-3)
    assert n == 0
    # Non-divisible spans land exactly on the endpoint.
    n, h = time_grid(0.0, 1.0, 0.3)
    assert np.isclose(n * h, 1.0)
    with pytest.raises(ValueError):
        time_grid(1.0, 0.0, 1e-3)
    with pytest.raises(ValueError):
        time_grid(0.0, 1.0, 0.0)


def test_group_flow_stays_on_manifold():
    w = np.array([0.3, -0.2, 0.5])

    def rhs(t, X):
        return X @ SO3.hat(w)

    X = integrate_group_flow(SO3, rhs, np.eye(3), 0.0, 50.0, 1e-2)
    assert np.linalg.norm(X.T @ X - np.eye(3)) < 1e-12
    assert np.allclose(X, SO3.exp(50.0 * w), atol=1e-8)


def test_group_flow_observer_and_stack():
    w = np.array([0.0, 0.0, 1.0])
    x0 = np.stack([np.eye(3), SO3.exp(np.array([0.1, 0.0, 0.0]))])
    seen = []

    def rhs(t, X):
        return X @ SO3.hat(w)

    out = integrate_group_flow(SO3, rhs, x0, 0.0, 0.1, 1e-2,
                               observer=lambda t, X: seen.append(t))
    assert out.shape == (2, 3, 3)
    assert len(seen) == 11
    assert np.allclose(out[0], SO3.exp(0.1 * w), atol=1e-10)
