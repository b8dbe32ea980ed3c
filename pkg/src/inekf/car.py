"""Unicycle robot on SE(2): dynamics, GPS and landmark observation
models, and the conventional EKF baseline.

State: heading theta and planar position x, embedded as a homogeneous
3x3 matrix.  Input: odometer speed v and steering coefficient u with
d theta/dt = u * v.  The GPS observation is left-invariant; the
range-and-bearing landmark observations are right-invariant.
"""

from dataclasses import dataclass

import numpy as np

from .errordyn import Dynamics, ErrorSide
from .filters import NoiseSchedule, ObservationModel, gain, symmetrize
from .groups import SE2, rot2
from .integrate import rk4_step, time_grid


def embed(theta, xy):
    """SE(2) matrix for a heading and position."""
    g = np.eye(3)
    g[:2, :2] = rot2(theta)
    g[:2, 2] = xy
    return g


def extract(g):
    """(theta, xy) from an SE(2) matrix; theta in (-pi, pi]."""
    return np.arctan2(g[1, 0], g[0, 0]), g[:2, 2].copy()


def body_twist(u):
    """Algebra element of the noise-free motion for input (v, steer)."""
    v, steer = u
    return SE2.hat(np.array([steer * v, v, 0.0]))


def left_A(u):
    """Linearized left-error propagation matrix for input (v, steer)."""
    v, steer = u
    w = steer * v
    return np.array([
        [0.0, 0.0, 0.0],
        [0.0, 0.0, w],
        [v, -w, 0.0],
    ])


def dynamics():
    """SE(2) unicycle dynamics dX/dt = X nu(u); group-affine."""
    def f(u, X):
        return X @ body_twist(u)

    return Dynamics(
        group=SE2, f=f, input_dim=2,
        analytic_A={
            ErrorSide.LEFT: left_A,
            ErrorSide.RIGHT: lambda u: np.zeros((3, 3)),
        })


def gps_observation(gps_cov=None):
    """Left-invariant position observation Y = chi (0, 0, 1)^T + noise.

    The measurement-noise covariance is rotated into the body frame,
    matching the frame of the reduced innovation.
    """
    if gps_cov is None:
        gps_cov = np.eye(2)
    gps_cov = np.asarray(gps_cov, dtype=float)
    H = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    def nhat(fs):
        R = fs.x[:2, :2]
        return R.T @ gps_cov @ R

    return ObservationModel(
        side=ErrorSide.LEFT, group=SE2,
        d_list=[np.array([0.0, 0.0, 1.0])],
        keep_rows=(0, 1),
        H=lambda fs: H,
        nhat=nhat)


def landmark_observation(p_list, cov_list=None):
    """Right-invariant range-and-bearing observations of fixed landmarks.

    Each landmark p contributes Y = chi^-1 d with d = -(p, 1) and a
    2-row analytic H block [[-p2, 1, 0], [p1, 0, 1]].
    """
    p_list = [np.asarray(p, dtype=float) for p in p_list]
    if not p_list:
        raise ValueError("need at least one landmark")
    if cov_list is None:
        cov_list = [np.eye(2) for _ in p_list]
    H = np.vstack([
        np.array([[-p[1], 1.0, 0.0], [p[0], 0.0, 1.0]]) for p in p_list])

    def nhat(fs):
        R = fs.x[:2, :2]
        blocks = [R @ c @ R.T for c in cov_list]
        out = np.zeros((2 * len(blocks), 2 * len(blocks)))
        for i, b in enumerate(blocks):
            out[2 * i:2 * i + 2, 2 * i:2 * i + 2] = b
        return out

    return ObservationModel(
        side=ErrorSide.RIGHT, group=SE2,
        d_list=[-np.append(p, 1.0) for p in p_list],
        keep_rows=(0, 1),
        H=lambda fs: H,
        nhat=nhat)


def noise_schedule(Q, side):
    """Process-noise density in the error frame.

    Left filters use the body-frame covariance directly; right filters
    conjugate it by the adjoint of the current estimate.
    """
    Q = np.asarray(Q, dtype=float)
    if side is ErrorSide.LEFT:
        return NoiseSchedule(qhat=lambda fs, u: Q)

    def qhat(fs, u):
        Ad = SE2.adjoint(fs.x)
        return Ad @ Q @ Ad.T

    return NoiseSchedule(qhat=qhat)


def ekf_F(theta_hat, u):
    """Linearization of the (theta, x) dynamics about the estimate."""
    v = u[0]
    return np.array([
        [0.0, 0.0, 0.0],
        [-np.sin(theta_hat) * v, 0.0, 0.0],
        [np.cos(theta_hat) * v, 0.0, 0.0],
    ])


EKF_H = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass
class CarEKF:
    """Conventional EKF on the linear error (theta, x1, x2) with a GPS
    position observation."""

    theta: float
    xy: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    N: np.ndarray
    t: float = 0.0

    def propagate(self, u_signal, duration, dt):
        n, h = time_grid(self.t, self.t + duration, dt)

        def rhs_state(tau, s):
            v, steer = u_signal(tau)
            return np.array([steer * v, np.cos(s[0]) * v, np.sin(s[0]) * v])

        s = np.array([self.theta, self.xy[0], self.xy[1]])
        t = self.t
        for _ in range(n):
            F = ekf_F(s[0], u_signal(t))
            G = np.eye(3)
            G[1:, 1:] = rot2(s[0])
            Qe = G @ self.Q @ G.T

            def rhs_P(tau, P):
                return F @ P + P @ F.T + Qe

            s = rk4_step(rhs_state, t, s, h)
            self.P = symmetrize(rk4_step(rhs_P, t, self.P, h))
            t += h
        self.theta, self.xy = s[0], s[1:]
        self.t = t

    def update(self, y):
        z = np.asarray(y, dtype=float) - self.xy
        K, self.P = gain(self.P, EKF_H, self.N)
        corr = K @ z
        self.theta += corr[0]
        self.xy = self.xy + corr[1:]
