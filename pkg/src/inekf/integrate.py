"""Fixed-step RK4 integrators.

Everything in the package integrates on the same deterministic RK4 grid;
group-valued flows are re-projected onto the manifold after every step.
"""

import numpy as np


def rk4_step(f, t, y, dt):
    """One classical Runge-Kutta step for dy/dt = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def time_grid(t0, t1, dt):
    """Number of steps and actual step size covering [t0, t1]."""
    span = t1 - t0
    if span < 0 or dt <= 0:
        raise ValueError("need t1 >= t0 and dt > 0")
    n = max(1, int(round(span / dt))) if span > 0 else 0
    return n, (span / n if n else dt)


def integrate_ode(f, y0, t0, t1, dt):
    """Integrate dy/dt = f(t, y) over [t0, t1]; returns the final value."""
    n, h = time_grid(t0, t1, dt)
    y = np.asarray(y0, dtype=float)
    t = t0
    for _ in range(n):
        y = rk4_step(f, t, y, h)
        t += h
    return y


def integrate_group_flow(group, f, x0, t0, t1, dt, observer=None):
    """Integrate a group-valued flow dX/dt = f(t, X) with per-step
    re-projection onto the manifold.

    f may broadcast over a stack of matrices (..., n, n).  If observer is
    given it is called as observer(t, X) after every step.
    """
    n, h = time_grid(t0, t1, dt)
    x = np.asarray(x0, dtype=float)
    t = t0
    if observer is not None:
        observer(t, x)
    for _ in range(n):
        x = rk4_step(f, t, x, h)
        x = group.project(x)
        t += h
        if observer is not None:
            observer(t, x)
    return x
