"""Inertial navigation with landmark position observations.

State: attitude R, velocity v, position x, embedded as a 5x5 matrix.
Input: body angular rate omega and specific force a (6-vector).  The
landmark observations Y_j = R^T (p_j - x) + noise are right-invariant;
the right-error propagation matrix is constant, so the error flow is
exactly log-linear regardless of the trajectory.

A multiplicative EKF (attitude error as a rotation vector, additive
velocity/position errors, all linearized about the estimate) is
provided as the conventional baseline.
"""

from dataclasses import dataclass, field

import numpy as np

from .errordyn import Dynamics, ErrorSide
from .filters import NoiseSchedule, ObservationModel, gain, symmetrize
from .groups import SE23, skew
from .integrate import rk4_step, time_grid

GRAVITY = np.array([0.0, 0.0, -9.81])


def embed(R, v, x):
    """5x5 matrix for attitude, velocity, position."""
    g = np.eye(5)
    g[:3, :3] = R
    g[:3, 3] = v
    g[:3, 4] = x
    return g


def extract(g):
    """(R, v, x) blocks of the embedded state."""
    return g[:3, :3].copy(), g[:3, 3].copy(), g[:3, 4].copy()


def dynamics(gravity=GRAVITY):
    """Kinematics dR/dt = R (omega)x, dv/dt = g + R a, dx/dt = v.

    Group-affine for any input; the field broadcasts over stacked
    matrices.
    """
    gravity = np.asarray(gravity, dtype=float)

    def f(u, X):
        omega, a = u[:3], u[3:6]
        out = np.zeros_like(X)
        R = X[..., :3, :3]
        out[..., :3, :3] = R @ skew(omega)
        out[..., :3, 3] = gravity + R @ a
        out[..., :3, 4] = X[..., :3, 3]
        return out

    def right_A(u):
        return constant_A(gravity)

    return Dynamics(
        group=SE23, f=f, input_dim=6,
        analytic_A={ErrorSide.RIGHT: right_A})


def constant_A(gravity=GRAVITY):
    """Right-error propagation matrix; constant, nilpotent (A^3 = 0)."""
    A = np.zeros((9, 9))
    A[3:6, :3] = skew(gravity)
    A[6:9, 3:6] = np.eye(3)
    return A


def transition_closed_form(t, gravity=GRAVITY):
    """exp(A t) of the constant right-error matrix, in closed form."""
    G = skew(gravity)
    Phi = np.eye(9)
    Phi[3:6, :3] = t * G
    Phi[6:9, :3] = 0.5 * t * t * G
    Phi[6:9, 3:6] = t * np.eye(3)
    return Phi


def landmark_observation(p_list, cov_list=None):
    """Body-frame observations Y_j = R^T (p_j - x) + noise of known
    landmarks; right-invariant with d_j = (p_j, 0, 1)."""
    p_list = [np.asarray(p, dtype=float) for p in p_list]
    if not p_list:
        raise ValueError("need at least one landmark")
    if cov_list is None:
        cov_list = [1e-2 * np.eye(3) for _ in p_list]
    blocks = []
    for p in p_list:
        Hb = np.zeros((3, 9))
        Hb[:, :3] = skew(p)
        Hb[:, 6:9] = -np.eye(3)
        blocks.append(Hb)
    H = np.vstack(blocks)

    def nhat(fs):
        R = fs.x[:3, :3]
        out = np.zeros((3 * len(cov_list), 3 * len(cov_list)))
        for i, c in enumerate(cov_list):
            out[3 * i:3 * i + 3, 3 * i:3 * i + 3] = R @ c @ R.T
        return out

    return ObservationModel(
        side=ErrorSide.RIGHT, group=SE23,
        d_list=[np.concatenate([p, [0.0, 1.0]]) for p in p_list],
        keep_rows=(0, 1, 2),
        H=lambda fs: H,
        nhat=nhat)


def adjoint_matrix(g):
    """Closed-form adjoint of an embedded state in (rot, vel, pos)
    coordinates."""
    R, v, x = extract(g)
    Ad = np.zeros((9, 9))
    Ad[:3, :3] = R
    Ad[3:6, :3] = skew(v) @ R
    Ad[3:6, 3:6] = R
    Ad[6:9, :3] = skew(x) @ R
    Ad[6:9, 6:9] = R
    return Ad


def noise_schedule(Q):
    """Body-frame process noise conjugated into the right-error frame."""
    Q = np.asarray(Q, dtype=float)

    def qhat(fs, u):
        Ad = adjoint_matrix(fs.x)
        return Ad @ Q @ Ad.T

    return NoiseSchedule(qhat=qhat)


def _polar(M):
    """Orientation-preserving polar factor; tolerant of the large
    first-order corrections the baseline makes at big initial errors."""
    U, _, Vt = np.linalg.svd(M)
    U[:, -1] *= np.sign(np.linalg.det(U @ Vt))
    return U @ Vt


@dataclass
class NavMEKF:
    """Multiplicative EKF baseline.

    Error state (zeta, dv, dx): attitude error R_hat = exp((zeta)x) R
    to first order, dv = v_hat - v, dx = x_hat - x.  Jacobians are
    evaluated at the current estimate, so they depend on the trajectory.
    """

    R: np.ndarray
    v: np.ndarray
    x: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    N_block: np.ndarray
    p_list: list
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    t: float = 0.0

    def propagate(self, u_signal, duration, dt):
        n, h = time_grid(self.t, self.t + duration, dt)
        g = embed(self.R, self.v, self.x)
        t = self.t
        for _ in range(n):
            u = u_signal(t)
            F = np.zeros((9, 9))
            F[3:6, :3] = -skew(self.R_of(g) @ u[3:6])
            F[6:9, 3:6] = np.eye(3)
            C = np.zeros((9, 9))
            Rh = self.R_of(g)
            C[:3, :3] = Rh
            C[3:6, 3:6] = Rh
            C[6:9, 6:9] = Rh
            Qm = C @ self.Q @ C.T

            def rhs_x(tau, X):
                omega, a = u_signal(tau)[:3], u_signal(tau)[3:6]
                out = np.zeros_like(X)
                out[:3, :3] = X[:3, :3] @ skew(omega)
                out[:3, 3] = self.gravity + X[:3, :3] @ a
                out[:3, 4] = X[:3, 3]
                return out

            def rhs_P(tau, P):
                return F @ P + P @ F.T + Qm

            g = SE23.project(rk4_step(rhs_x, t, g, h))
            self.P = symmetrize(rk4_step(rhs_P, t, self.P, h))
            t += h
        self.R, self.v, self.x = extract(g)
        self.t = t

    @staticmethod
    def R_of(g):
        return g[:3, :3]

    def update(self, y_list):
        if len(y_list) != len(self.p_list):
            raise ValueError("expected %d observations, got %d"
                             % (len(self.p_list), len(y_list)))
        H_blocks, z_blocks = [], []
        for p, y in zip(self.p_list, y_list):
            rel = self.R.T @ (np.asarray(p, dtype=float) - self.x)
            z_blocks.append(np.asarray(y, dtype=float) - rel)
            Hb = np.zeros((3, 9))
            Hb[:, :3] = -self.R.T @ skew(np.asarray(p, dtype=float) - self.x)
            Hb[:, 6:9] = self.R.T
            H_blocks.append(Hb)
        H = np.vstack(H_blocks)
        z = np.concatenate(z_blocks)
        N = np.zeros((3 * len(self.p_list), 3 * len(self.p_list)))
        for i in range(len(self.p_list)):
            N[3 * i:3 * i + 3, 3 * i:3 * i + 3] = self.N_block
        K, self.P = gain(self.P, H, N)
        delta = K @ z
        # First-order multiplicative attitude correction, re-orthonormalized
        # through the polar factor (exact exp is deliberately not used).
        self.R = _polar((np.eye(3) - skew(delta[:3])) @ self.R)
        self.v = self.v - delta[3:6]
        self.x = self.x - delta[6:9]
