import numpy as np
import pytest
import scipy.linalg

from inekf import SE2, car
from inekf.errordyn import ErrorSide, linearize
from inekf.errors import NumericalFailureError, UpdateSkippedError
from inekf.filters import (
    FilterState,
    NoiseSchedule,
    gain,
    innovation,
    joseph_update,
    lyapunov_value,
    propagate,
    symmetrize,
    update,
)


def translation_dynamics():
    # Planar translation at a constant body-frame rate; heading frozen.
    from inekf.errordyn import Dynamics

    def f(u, X):
        out = np.zeros_like(X)
        out[..., :2, 2] = X[..., :2, :2] @ u
        return out

    return Dynamics(group=SE2, f=f, input_dim=2)


def gps_setup(P0=None):
    fs = FilterState(x=np.eye(3),
                     P=np.eye(3) if P0 is None else P0.copy())
    obs = car.gps_observation(np.eye(2))
    return fs, obs


def test_riccati_zero_A_constant_Q():
    # With A = 0 and Qhat = qI the covariance grows linearly in time.
    dyn = translation_dynamics()
    lin = linearize(dyn, ErrorSide.LEFT)
    q = 0.3
    noise = NoiseSchedule(qhat=lambda fs, u: q * np.eye(3))
    fs = FilterState(x=np.eye(3), P=np.diag([1.0, 2.0, 3.0]))
    out = propagate(fs, dyn, lin, noise, lambda t: np.zeros(2), 0.7, 1e-3)
    assert np.allclose(out.P, fs.P + q * 0.7 * np.eye(3), atol=1e-10)
    assert np.isclose(out.t, 0.7)


def test_riccati_constant_A_zero_Q_expm_oracle():
    dyn = car.dynamics()
    lin = linearize(dyn, ErrorSide.LEFT)
    u = np.array([1.0, 0.4])
    A = lin.A(u)
    noise = NoiseSchedule(qhat=lambda fs, u: np.zeros((3, 3)))
    P0 = np.diag([0.5, 1.0, 2.0])
    fs = FilterState(x=np.eye(3), P=P0.copy())
    out = propagate(fs, dyn, lin, noise, lambda t: u, 1.0, 1e-3)
    Phi = scipy.linalg.expm(A)
    assert np.allclose(out.P, Phi @ P0 @ Phi.T, atol=1e-8)


def test_propagate_moves_state_along_flow():
    dyn = car.dynamics()
    lin = linearize(dyn, ErrorSide.LEFT)
    noise = NoiseSchedule(qhat=lambda fs, u: np.zeros((3, 3)))
    fs = FilterState(x=np.eye(3), P=np.eye(3))
    u = np.array([1.0, 0.0])
    out = propagate(fs, dyn, lin, noise, lambda t: u, 2.0, 1e-3)
    th, xy = car.extract(out.x)
    assert abs(th) < 1e-12
    assert np.allclose(xy, [2.0, 0.0], atol=1e-9)
    assert SE2.check_membership(out.x, tol=1e-9)


def test_propagate_rejects_nonpositive_duration():
    dyn = car.dynamics()
    lin = linearize(dyn, ErrorSide.LEFT)
    noise = NoiseSchedule(qhat=lambda fs, u: np.zeros((3, 3)))
    fs = FilterState(x=np.eye(3), P=np.eye(3))
    with pytest.raises(ValueError):
        propagate(fs, dyn, lin, noise, lambda t: np.zeros(2), 0.0, 1e-3)


def test_propagate_flags_nonfinite():
    dyn = translation_dynamics()
    lin = linearize(dyn, ErrorSide.LEFT)
    noise = NoiseSchedule(qhat=lambda fs, u: np.full((3, 3), np.nan))
    fs = FilterState(x=np.eye(3), P=np.eye(3))
    with pytest.raises(NumericalFailureError):
        propagate(fs, dyn, lin, noise, lambda t: np.zeros(2), 0.1, 1e-2)


def test_innovation_zero_at_truth():
    fs, obs = gps_setup()
    fs.x = car.embed(0.4, np.array([1.0, -2.0]))
    ys = obs.synthesize(fs.x)
    assert np.allclose(innovation(fs, obs, ys), 0.0, atol=1e-12)


def test_innovation_counts_observations():
    fs, obs = gps_setup()
    with pytest.raises(ValueError):
        innovation(fs, obs, [])


def test_innovation_linearization_sign():
    # First order in the error coordinates the innovation is -H xi.
    fs, obs = gps_setup()
    truth = car.embed(0.3, np.array([2.0, 1.0]))
    H = obs.H(fs)
    rng = np.random.default_rng(0)
    for _ in range(20):
        xi = rng.standard_normal(3) * 1e-5
        fs.x = truth @ SE2.exp(xi)   # left error exp(xi)
        z = innovation(fs, obs, obs.synthesize(truth))
        assert np.allclose(z, -H @ xi, atol=1e-9)


def test_synthesize_noise_padding():
    fs, obs = gps_setup()
    chi = car.embed(0.2, np.array([1.0, 2.0]))
    ys = obs.synthesize(chi, noises=[np.array([0.1, -0.2])])
    clean = obs.synthesize(chi)
    assert np.allclose(ys[0][:2] - clean[0][:2], [0.1, -0.2])
    assert ys[0][2] == clean[0][2]


def test_gain_matches_direct_formula():
    rng = np.random.default_rng(1)
    for _ in range(20):
        M = rng.standard_normal((3, 3))
        P = M @ M.T + 0.1 * np.eye(3)
        H = rng.standard_normal((2, 3))
        N = np.diag(rng.uniform(0.1, 1.0, size=2))
        L, P_plus = gain(P, H, N)
        S = H @ P @ H.T + N
        assert np.allclose(L, P @ H.T @ np.linalg.inv(S), atol=1e-10)
        ref = (np.eye(3) - L @ H) @ P
        assert np.allclose(P_plus, symmetrize(ref), atol=1e-10)
        assert np.allclose(P_plus, P_plus.T)


def test_gain_skips_singular_innovation():
    P = np.zeros((3, 3))
    H = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(UpdateSkippedError):
        gain(P, H, np.zeros((2, 2)))


def test_joseph_equals_standard_for_optimal_gain():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((3, 3))
    P = M @ M.T + 0.5 * np.eye(3)
    H = rng.standard_normal((2, 3))
    N = np.eye(2)
    L, P_plus = gain(P, H, N)
    assert np.allclose(joseph_update(P, H, N, L), P_plus, atol=1e-10)


def test_update_corrects_left_error():
    # A noise-free position measurement pulls the estimate toward truth.
    truth = car.embed(0.5, np.array([3.0, -1.0]))
    obs = car.gps_observation(1e-6 * np.eye(2))
    fs = FilterState(x=truth @ SE2.exp(np.array([0.0, 0.4, -0.3])),
                     P=np.eye(3))
    ys = obs.synthesize(truth)
    out = update(fs, obs, ys)
    before = np.linalg.norm(SE2.log(np.linalg.solve(truth, fs.x)))
    after = np.linalg.norm(SE2.log(np.linalg.solve(truth, out.x)))
    assert after < 1e-3 * before
    assert SE2.check_membership(out.x, tol=1e-9)


def test_update_right_side_multiplies_left():
    obs = car.landmark_observation([np.array([2.0, 0.0])])
    truth = car.embed(0.2, np.array([0.5, 0.5]))
    fs = FilterState(x=SE2.exp(np.array([0.01, 0.0, 0.0])) @ truth,
                     P=1e-4 * np.eye(3))
    out = update(fs, obs, obs.synthesize(truth))
    # With one landmark the update cannot diverge and P must contract.
    assert np.trace(out.P) < np.trace(fs.P) + 1e-12


def test_lyapunov_value():
    fs = FilterState(x=np.eye(3), P=np.diag([2.0, 1.0, 0.5]))
    xi = np.array([1.0, 1.0, 1.0])
    assert np.isclose(lyapunov_value(fs, xi), 0.5 + 1.0 + 2.0)


def test_update_joseph_variant():
    truth = car.embed(0.1, np.array([1.0, 1.0]))
    obs = car.gps_observation(np.eye(2))
    fs = FilterState(x=truth @ SE2.exp(np.array([0.0, 0.1, 0.1])),
                     P=np.eye(3))
    a = update(fs, obs, obs.synthesize(truth), joseph=False)
    b = update(fs, obs, obs.synthesize(truth), joseph=True)
    assert np.allclose(a.x, b.x, atol=1e-12)
    assert np.allclose(a.P, b.P, atol=1e-10)
