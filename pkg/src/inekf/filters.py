"""Generic left/right invariant extended Kalman filter.

The estimate lives on the group; the covariance P rides on the tangent
coordinates of the invariant error.  Propagation integrates the state
flow and the Riccati ODE dP/dt = A P + P A^T + Qhat on the same RK4
grid; the discrete update applies the gain through the exponential map,
multiplying on the right (left-invariant observations) or on the left
(right-invariant observations).
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errordyn import ErrorSide
from .errors import NumericalFailureError, UpdateSkippedError
from .groups import MatrixLieGroup
from .integrate import rk4_step, time_grid

# Condition-number ceiling for the innovation covariance.
MAX_S_CONDITION = 1e12


def symmetrize(P):
    return 0.5 * (P + P.T)


@dataclass
class FilterState:
    """Group-valued estimate with tangent-space covariance."""

    x: np.ndarray       # (n, n) group element
    P: np.ndarray       # (dof, dof) symmetric PSD
    t: float = 0.0

    def copy(self):
        return FilterState(self.x.copy(), self.P.copy(), self.t)


@dataclass(frozen=True)
class ObservationModel:
    """Family of invariant vector observations Y^i = chi d^i (left) or
    Y^i = chi^-1 d^i (right), with the structurally-zero rows of each
    innovation block dropped before gains are formed."""

    side: ErrorSide
    group: MatrixLieGroup
    d_list: Sequence[np.ndarray]
    keep_rows: Sequence[int]
    H: Callable[[FilterState], np.ndarray]
    nhat: Callable[[FilterState], np.ndarray]

    @property
    def rows_per_obs(self):
        return len(self.keep_rows)

    def synthesize(self, chi, noises=None):
        """Noisy measurement list at the true state chi.

        noises, when given, is one reduced-dimension vector per d^i,
        padded into the informative rows.
        """
        if self.side is ErrorSide.LEFT:
            ys = [chi @ d for d in self.d_list]
        else:
            inv = np.linalg.inv(chi)
            ys = [inv @ d for d in self.d_list]
        if noises is not None:
            for y, v in zip(ys, noises):
                y[list(self.keep_rows)] += v
        return ys


@dataclass(frozen=True)
class NoiseSchedule:
    """Tangent-space process noise density builder."""

    qhat: Callable[[FilterState, np.ndarray], np.ndarray]


def innovation(fs, obs, y_list):
    """Stacked reduced innovation; zero when the estimate is exact and
    the measurements are noise-free.  First-order expansion in the error
    coordinates is -H xi."""
    if len(y_list) != len(obs.d_list):
        raise ValueError("expected %d observations, got %d"
                         % (len(obs.d_list), len(y_list)))
    rows = list(obs.keep_rows)
    if obs.side is ErrorSide.LEFT:
        x_inv = np.linalg.inv(fs.x)
        blocks = [(x_inv @ y - d)[rows] for y, d in zip(y_list, obs.d_list)]
    else:
        blocks = [(fs.x @ y - d)[rows] for y, d in zip(y_list, obs.d_list)]
    return np.concatenate(blocks)


def gain(P, H, N):
    """Kalman gain and covariance update from the Riccati recursion.

    Returns (L, P_plus) with S = H P H^T + N factored as symmetric
    positive definite; raises UpdateSkippedError when S is singular or
    its condition number exceeds MAX_S_CONDITION.
    """
    S = symmetrize(H @ P @ H.T + N)
    eig = np.linalg.eigvalsh(S)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_S_CONDITION:
        raise UpdateSkippedError(
            "innovation covariance ill-conditioned (eigs %.3g..%.3g)"
            % (eig[0], eig[-1]))
    c = np.linalg.cholesky(S)
    # L = P H^T S^-1 via two triangular solves.
    tmp = np.linalg.solve(c, H @ P.T)
    L = np.linalg.solve(c.T, tmp).T
    P_plus = symmetrize((np.eye(P.shape[0]) - L @ H) @ P)
    return L, P_plus


def joseph_update(P, H, N, L):
    """Joseph-form covariance update, for conditioning experiments."""
    I_LH = np.eye(P.shape[0]) - L @ H
    return symmetrize(I_LH @ P @ I_LH.T + L @ N @ L.T)


def propagate(fs, dyn, lin, noise, u_signal, duration, dt):
    """Integrate estimate and covariance forward by duration.

    The state follows dX/dt = f_u(X) with per-step manifold projection;
    P follows the Riccati ODE with A evaluated along the input signal
    and Qhat frozen at the step start (it varies only through the slowly
    moving estimate).
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    n, h = time_grid(fs.t, fs.t + duration, dt)
    x, P, t = fs.x.copy(), fs.P.copy(), fs.t

    def rhs_x(tau, X):
        return dyn.f(u_signal(tau), X)

    for _ in range(n):
        qh = noise.qhat(FilterState(x, P, t), u_signal(t))

        def rhs_P(tau, Pm):
            A = lin.A(u_signal(tau))
            return A @ Pm + Pm @ A.T + qh

        x = dyn.group.project(rk4_step(rhs_x, t, x, h))
        P = symmetrize(rk4_step(rhs_P, t, P, h))
        t += h
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
        raise NumericalFailureError("non-finite values during propagation")
    return FilterState(x, P, t)


def update(fs, obs, y_list, joseph=False):
    """Discrete invariant update; the correction enters multiplicatively
    through the exponential map on the side matching the observations."""
    z = innovation(fs, obs, y_list)
    H = obs.H(fs)
    N = obs.nhat(fs)
    L, P_plus = gain(fs.P, H, N)
    if joseph:
        P_plus = joseph_update(fs.P, H, N, L)
    delta = obs.group.exp(L @ z)
    if obs.side is ErrorSide.LEFT:
        x_plus = fs.x @ delta
    else:
        x_plus = delta @ fs.x
    if not np.all(np.isfinite(x_plus)):
        raise NumericalFailureError("non-finite values during update")
    return FilterState(x_plus, P_plus, fs.t)


def lyapunov_value(fs, xi):
    """Quadratic diagnostic xi^T P^-1 xi monitored across update epochs."""
    return float(xi @ np.linalg.solve(fs.P, xi))
