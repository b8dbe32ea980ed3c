"""Discrete-time health checks for the error-system Riccati recursion.

Over a window of update epochs the checks bound the state-transition
matrices, verify noise floors, and compute the reachability and
observability Gramians whose two-sided bounds guarantee the covariance
stays bounded away from zero and infinity.  A rank test on the stacked
observation matrices detects unobservable landmark geometry.
"""

from dataclasses import dataclass

import numpy as np

from .integrate import rk4_step, time_grid

RANK_RTOL = 1e-8

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

# Default floors for the boundedness conditions.
DEFAULT_FLOORS = {
    "phi_eig_min": 1e-8,
    "qhat_eig_min": 1e-8,
    "nhat_eig_min": 1e-8,
    "gramian_min": 1e-12,
    "obs_min": 1e-12,
}


def transition_matrix(lin, u_signal, t0, t1, dt):
    """State-transition matrix of d xi/dt = A(u_t) xi over [t0, t1]."""
    def rhs(t, Phi):
        return lin.A(u_signal(t)) @ Phi

    n, h = time_grid(t0, t1, dt)
    dof = lin.group.dof
    Phi = np.eye(dof)
    t = t0
    for _ in range(n):
        Phi = rk4_step(rhs, t, Phi, h)
        t += h
    return Phi


def numerical_rank(M, rtol=RANK_RTOL):
    """Rank by singular values above rtol times the largest."""
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def rank_H_HPhi(H, Phi, rtol=RANK_RTOL):
    """Rank of the two-epoch stacked observation matrix [H; H Phi]."""
    return numerical_rank(np.vstack([H, H @ Phi]), rtol)


@dataclass
class WindowReport:
    """Per-window summary of the boundedness conditions."""

    t0: float
    t1: float
    phi_eig_bounds: tuple      # min/max eigenvalue of Phi^T Phi per epoch
    qhat_eig_bounds: tuple     # min positive / max eigenvalue of Qhat
    nhat_eig_bounds: tuple
    gramian_bounds: tuple      # reachability Gramian eigenvalue range
    obs_bounds: tuple          # observability sum eigenvalue range
    rank_HPhi: int
    conditions_met: dict

    @property
    def all_met(self):
        return all(self.conditions_met.values())


def check_deyst_price(lin, H, qhat_signal, nhat_signal, u_signal,
                      window=5, t0=0.0, obs_dt=1.0, dt=1e-2,
                      floors=None):
    """Evaluate the boundedness conditions over one window of epochs.

    lin supplies A(u); H is the (constant) stacked observation matrix;
    qhat_signal(t) and nhat_signal(t) give the tangent-frame noise
    matrices along the nominal trajectory.  The window spans
    [t0, t0 + window * obs_dt] with updates every obs_dt.

    Conditions checked: transition matrices bounded and uniformly
    invertible per epoch; Qhat bounded below on its column space; Nhat
    bounded below; reachability Gramian of the window positive definite;
    observability Gramian of the window positive definite.
    """
    fl = dict(DEFAULT_FLOORS)
    if floors:
        fl.update(floors)
    dof = lin.group.dof
    t1 = t0 + window * obs_dt

    # Transition matrix from t0 to each grid point of the window.
    n, h = time_grid(t0, t1, dt)

    def rhs(t, Phi):
        return lin.A(u_signal(t)) @ Phi

    grid_t = [t0]
    grid_Phi = [np.eye(dof)]
    Phi = np.eye(dof)
    t = t0
    for _ in range(n):
        Phi = rk4_step(rhs, t, Phi, h)
        t += h
        grid_t.append(t)
        grid_Phi.append(Phi)
    grid_t = np.array(grid_t)
    grid_Phi = np.array(grid_Phi)
    Phi_end = grid_Phi[-1]
    Phi_end_from = Phi_end @ np.linalg.inv(grid_Phi)  # Phi from t_s to t1

    # Per-epoch transition matrices Phi_{t_i}^{t_{i+1}}.
    epoch_idx = [int(round((t0 + k * obs_dt - t0) / h)) for k in
                 range(window + 1)]
    phi_lo, phi_hi = np.inf, 0.0
    for a, b in zip(epoch_idx[:-1], epoch_idx[1:]):
        step = grid_Phi[b] @ np.linalg.inv(grid_Phi[a])
        eig = np.linalg.eigvalsh(step.T @ step)
        phi_lo = min(phi_lo, eig[0])
        phi_hi = max(phi_hi, eig[-1])

    # Noise floors along the window.
    q_lo, q_hi = np.inf, 0.0
    for tk in grid_t:
        eig = np.linalg.eigvalsh(0.5 * (qhat_signal(tk) + qhat_signal(tk).T))
        q_hi = max(q_hi, eig[-1])
        # Floor applies on the column space only; zero rows are allowed.
        positive = eig[eig > RANK_RTOL * max(eig[-1], 1.0)]
        if positive.size:
            q_lo = min(q_lo, positive[0])
    n_lo, n_hi = np.inf, 0.0
    for k in epoch_idx[1:]:
        eig = np.linalg.eigvalsh(nhat_signal(grid_t[k]))
        n_lo = min(n_lo, eig[0])
        n_hi = max(n_hi, eig[-1])

    # Reachability Gramian over the window (trapezoid on the RK4 grid).
    integrand = np.array([
        Phi_end_from[k] @ qhat_signal(grid_t[k]) @ Phi_end_from[k].T
        for k in range(len(grid_t))])
    W = _trapezoid(integrand, grid_t, axis=0)
    w_eig = np.linalg.eigvalsh(0.5 * (W + W.T))

    # Observability sum over the update epochs of the window.
    O = np.zeros((dof, dof))
    for k in epoch_idx[1:]:
        Pk = Phi_end_from[k]
        Ninv = np.linalg.inv(nhat_signal(grid_t[k]))
        O += Pk.T @ H.T @ Ninv @ H @ Pk
    o_eig = np.linalg.eigvalsh(0.5 * (O + O.T))

    rank = rank_H_HPhi(H, grid_Phi[epoch_idx[1]])

    conditions = {
        "phi_bounded": phi_lo >= fl["phi_eig_min"] and np.isfinite(phi_hi),
        "qhat_floor": q_lo >= fl["qhat_eig_min"],
        "nhat_floor": n_lo >= fl["nhat_eig_min"],
        "reachable": w_eig[0] >= fl["gramian_min"],
        "observable": o_eig[0] >= fl["obs_min"],
    }
    return WindowReport(
        t0=t0, t1=t1,
        phi_eig_bounds=(phi_lo, phi_hi),
        qhat_eig_bounds=(q_lo, q_hi),
        nhat_eig_bounds=(n_lo, n_hi),
        gramian_bounds=(w_eig[0], w_eig[-1]),
        obs_bounds=(o_eig[0], o_eig[-1]),
        rank_HPhi=rank,
        conditions_met=conditions)
