"""Invariant error construction and propagation for group-affine dynamics.

A dynamics object carries a vector field f(u, X) on one of the embedded
matrix groups.  When f satisfies the group-affine identity

    f_u(a b) = f_u(a) b + a f_u(b) - a f_u(I) b

the left/right invariant error between any two trajectories evolves
autonomously, and its logarithm follows an exactly linear ODE.  This
module provides the numerical certification of that identity, the error
vector fields, their linearization at the identity, and the dual
integration used to verify the log-linear correspondence.
"""

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ModelInconsistencyError
from .groups import MatrixLieGroup, rot2, _half_cot, _J2
from .integrate import integrate_group_flow, rk4_step, time_grid

# Step for central-difference Jacobians (truncation vs. roundoff balance).
JACOBIAN_STEP = 1e-6


class ErrorSide(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class Dynamics:
    """Vector field on a matrix Lie group, dX/dt = f(u, X)."""

    group: MatrixLieGroup
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    input_dim: int
    # Optional analytic linearizations, keyed by ErrorSide; each maps an
    # input vector to the dof x dof matrix of the linearized error ODE.
    analytic_A: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LinearizedDynamics:
    """First-order error propagation matrix builder, d xi/dt = A(u) xi."""

    A: Callable[[np.ndarray], np.ndarray]
    side: ErrorSide
    group: MatrixLieGroup


def _check_same_shape(chi, chi_hat):
    if chi.shape != chi_hat.shape:
        raise ValueError("group elements of mismatched shape: %s vs %s"
                         % (chi.shape, chi_hat.shape))


def left_error(chi, chi_hat):
    """Left-invariant error chi^-1 chi_hat; identity iff both coincide."""
    chi = np.asarray(chi, dtype=float)
    chi_hat = np.asarray(chi_hat, dtype=float)
    _check_same_shape(chi, chi_hat)
    return np.linalg.solve(chi, chi_hat)


def right_error(chi, chi_hat):
    """Right-invariant error chi_hat chi^-1."""
    chi = np.asarray(chi, dtype=float)
    chi_hat = np.asarray(chi_hat, dtype=float)
    _check_same_shape(chi, chi_hat)
    return chi_hat @ np.linalg.inv(chi)


def check_group_affine(dyn, sample_count=100, seed=0, tol=1e-9):
    """Certify the group-affine identity on random (u, a, b) triples.

    a, b are exponentials of tangent vectors with norm <= 2; the residual
    is relative to the magnitude of f_u(ab).  Returns a dict with keys
    'holds' and 'max_residual'.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    g = dyn.group
    ident = g.identity
    worst = 0.0
    for _ in range(sample_count):
        u = rng.standard_normal(dyn.input_dim)
        a = g.exp(_random_tangent(rng, g.dof, 2.0))
        b = g.exp(_random_tangent(rng, g.dof, 2.0))
        lhs = dyn.f(u, a @ b)
        rhs = dyn.f(u, a) @ b + a @ dyn.f(u, b) - a @ dyn.f(u, ident) @ b
        scale = max(1.0, np.linalg.norm(lhs))
        worst = max(worst, np.linalg.norm(lhs - rhs) / scale)
    return {"holds": worst < tol, "max_residual": worst}


def _random_tangent(rng, dof, max_norm):
    v = rng.standard_normal(dof)
    n = np.linalg.norm(v)
    scale = rng.uniform(0.0, max_norm)
    return v * (scale / n) if n > 0 else v


def error_dynamics(dyn, side):
    """Autonomous error vector field g_u(eta) for the given side.

    Left:  g_u(eta) = f_u(eta) - f_u(I) eta
    Right: g_u(eta) = f_u(eta) - eta f_u(I)
    """
    ident = dyn.group.identity
    if side is ErrorSide.LEFT:
        def g(u, eta):
            return dyn.f(u, eta) - dyn.f(u, ident) @ eta
    else:
        def g(u, eta):
            return dyn.f(u, eta) - eta @ dyn.f(u, ident)
    return g


def numeric_error_jacobian(dyn, side, u, h=JACOBIAN_STEP):
    """Central-difference Jacobian at xi = 0 of xi -> vee(g_u(exp(xi)))."""
    g = error_dynamics(dyn, side)
    grp = dyn.group
    cols = []
    for j in range(grp.dof):
        e = np.zeros(grp.dof)
        e[j] = h
        diff = (g(u, grp.exp(e)) - g(u, grp.exp(-e))) / (2.0 * h)
        cols.append(grp._vee_raw(diff))
    return np.column_stack(cols)


def linearize(dyn, side, check_inputs=None, check_tol=1e-5):
    """Linearized error dynamics builder.

    Uses the model's analytic matrix when supplied, otherwise central
    differences.  check_inputs, when given, is an iterable of inputs on
    which an analytic matrix is verified against the numeric Jacobian;
    a disagreement beyond check_tol raises ModelInconsistencyError.
    """
    analytic = dyn.analytic_A.get(side)
    if analytic is not None and check_inputs is not None:
        for u in check_inputs:
            err = np.max(np.abs(analytic(u) - numeric_error_jacobian(dyn, side, u)))
            if err > check_tol:
                raise ModelInconsistencyError(
                    "analytic A disagrees with numeric Jacobian by %.3g" % err)
    if analytic is not None:
        A = analytic
    else:
        def A(u):
            return numeric_error_jacobian(dyn, side, u)
    return LinearizedDynamics(A=A, side=side, group=dyn.group)


def propagate_error_exact(dyn, side, eta0, u_signal, t_span, dt,
                          observer=None):
    """RK4 integration of d eta/dt = g_u(eta) with per-step projection.

    eta0 may be a stack of matrices (..., n, n); the flow broadcasts.
    """
    g = error_dynamics(dyn, side)

    def rhs(t, eta):
        return g(u_signal(t), eta)

    t0, t1 = t_span
    return integrate_group_flow(dyn.group, rhs, eta0, t0, t1, dt,
                                observer=observer)


def propagate_log_linear(lin, xi0, u_signal, t_span, dt, observer=None):
    """RK4 integration of the linear ODE d xi/dt = A(u_t) xi."""
    def rhs(t, xi):
        return xi @ lin.A(u_signal(t)).T

    t0, t1 = t_span
    n, h = time_grid(t0, t1, dt)
    xi = np.asarray(xi0, dtype=float)
    t = t0
    if observer is not None:
        observer(t, xi)
    for _ in range(n):
        xi = rk4_step(rhs, t, xi, h)
        t += h
        if observer is not None:
            observer(t, xi)
    return xi


def verify_log_linear(dyn, side, xi0, u_signal, t_span, dt,
                      save_every=100):
    """Max deviation ||log(eta_t) - xi_t|| over the integration horizon.

    eta is integrated exactly from exp(xi0) while xi follows the linear
    ODE; both are sampled every save_every steps.  xi0 may be a stack
    (m, dof).  Raises BranchCutError if the exact error leaves the
    logarithm's principal branch (verification infeasible there).
    """
    grp = dyn.group
    xi0 = np.atleast_2d(np.asarray(xi0, dtype=float))
    eta = np.stack([grp.exp(v) for v in xi0])
    lin = linearize(dyn, side)
    t0, t1 = t_span
    n_steps, h = time_grid(t0, t1, dt)
    g = error_dynamics(dyn, side)
    worst = 0.0

    def rhs_eta(t, e):
        return g(u_signal(t), e)

    def rhs_xi(t, x):
        return x @ lin.A(u_signal(t)).T

    xi = xi0
    t = t0
    for k in range(n_steps):
        eta = grp.project(rk4_step(rhs_eta, t, eta, h))
        xi = rk4_step(rhs_xi, t, xi, h)
        t += h
        if (k + 1) % save_every == 0 or k == n_steps - 1:
            for e, x in zip(eta, xi):
                worst = max(worst, np.linalg.norm(grp.log(e) - x))
    return worst


def check_flow_homomorphism(dyn, side, eta0, eta0_prime, u_signal, t, dt):
    """Frobenius residual of Phi_t(eta eta') - Phi_t(eta) Phi_t(eta')."""
    prod = propagate_error_exact(dyn, side, eta0 @ eta0_prime, u_signal,
                                 (0.0, t), dt)
    a = propagate_error_exact(dyn, side, eta0, u_signal, (0.0, t), dt)
    b = propagate_error_exact(dyn, side, eta0_prime, u_signal, (0.0, t), dt)
    return np.linalg.norm(prod - a @ b)


def intro_example_xi(theta, x, theta_ref, x_ref):
    """Closed-form log-error coordinates for two planar poses.

    Returns (theta - theta_ref, J^-1(theta - theta_ref) R(-theta_ref)
    (x - x_ref)), the SE(2) logarithm of the reference-relative error.
    The 0/0 limit at coincident headings is taken by series expansion.
    """
    s = theta - theta_ref
    dx = rot2(-theta_ref) @ (np.asarray(x, dtype=float)
                             - np.asarray(x_ref, dtype=float))
    coeff = _half_cot(s) * np.eye(2) - 0.5 * s * _J2
    return np.concatenate(([s], coeff @ dx))


def intro_example_matrix(velocity, yaw_rate):
    """Coefficient matrix of the linear ODE obeyed by intro_example_xi
    along two unicycle trajectories driven by the same inputs."""
    return np.array([
        [0.0, 0.0, 0.0],
        [0.0, 0.0, yaw_rate],
        [velocity, -yaw_rate, 0.0],
    ])
