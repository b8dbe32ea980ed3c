"""Closed-loop simulation harness.

Builds analytic circular reference trajectories for the planar car and
the inertial navigation model, synthesizes measurements along them,
runs the invariant filter next to its conventional baseline on the same
data, and records per-step error metrics.  All randomness flows from a
single seeded generator, so a scenario is reproducible byte for byte.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from . import car, nav
from .errordyn import ErrorSide, left_error, linearize, right_error
from .errors import BranchCutError, NumericalFailureError
from .filters import FilterState, propagate, update, lyapunov_value
from .groups import SE2, SE23, SO3, rot2

DEG = np.pi / 180.0

CAR_Q_DEFAULT = np.diag([DEG ** 2, 1e-4, 1e-4])
CAR_N_DEFAULT = np.eye(2)
CAR_LANDMARKS_DEFAULT = ((10.0, 0.0), (0.0, 10.0))

NAV_Q_DEFAULT = np.diag([1e-8] * 3 + [1e-8] * 3 + [0.0] * 3)
NAV_N_BLOCK_DEFAULT = 1e-2 * np.eye(3)
NAV_LANDMARKS_DEFAULT = ((0.0, 0.0, 5.0), (10.0, 0.0, 0.0), (0.0, 10.0, 2.0))


@dataclass
class Scenario:
    """Complete description of one simulation run."""

    model: str                         # "car" or "nav"
    observation: str = "gps"           # car only: "gps" or "landmarks"
    filters: tuple = None              # defaults per model
    diameter_m: float = 10.0
    duration_s: float = 40.0
    imu_hz: int = 100
    obs_hz: int = 1
    seed: int = 0
    inject_noise: bool = False
    heading_error_deg: float = 45.0    # car initial estimate offset
    attitude_error_deg: float = 15.0   # nav initial attitude offset
    position_error_m: float = 1.0      # nav initial position offset
    Q: np.ndarray = None
    N: np.ndarray = None               # gps cov / landmark block cov
    landmarks: tuple = None
    gravity: np.ndarray = None

    def __post_init__(self):
        if self.model not in ("car", "nav"):
            raise ValueError("model must be 'car' or 'nav'")
        if self.model == "car" and self.observation not in (
                "gps", "landmarks"):
            raise ValueError("car observation must be 'gps' or 'landmarks'")
        if self.filters is None:
            self.filters = ("iekf", "ekf") if self.model == "car" \
                else ("iekf", "mekf")
        self.filters = tuple(self.filters)
        if self.Q is None:
            self.Q = CAR_Q_DEFAULT.copy() if self.model == "car" \
                else NAV_Q_DEFAULT.copy()
        self.Q = np.asarray(self.Q, dtype=float)
        if self.N is None:
            self.N = CAR_N_DEFAULT.copy() if self.model == "car" \
                else NAV_N_BLOCK_DEFAULT.copy()
        self.N = np.asarray(self.N, dtype=float)
        if self.landmarks is None:
            self.landmarks = CAR_LANDMARKS_DEFAULT if self.model == "car" \
                else NAV_LANDMARKS_DEFAULT
        self.landmarks = tuple(tuple(float(c) for c in p)
                               for p in self.landmarks)
        if self.gravity is None:
            self.gravity = nav.GRAVITY.copy()
        self.gravity = np.asarray(self.gravity, dtype=float)
        if self.imu_hz % self.obs_hz != 0:
            raise ValueError("imu_hz must be a multiple of obs_hz")
        if self.duration_s <= 0 or self.diameter_m <= 0:
            raise ValueError("duration and diameter must be positive")


def car_truth(scn):
    """Closed-form circle: returns (u_signal, state_fn) with
    state_fn(t) -> (theta, xy)."""
    r = 0.5 * scn.diameter_m
    omega = 2.0 * np.pi / scn.duration_s
    v = r * omega

    def u_signal(t):
        return np.array([v, omega / v])

    def state_fn(t):
        theta = omega * t
        xy = r * np.array([np.sin(omega * t), 1.0 - np.cos(omega * t)])
        return theta, xy

    return u_signal, state_fn


def nav_truth(scn):
    """Closed-form horizontal circle with yaw aligned to travel:
    state_fn(t) -> (R, v, x)."""
    r = 0.5 * scn.diameter_m
    omega = 2.0 * np.pi / scn.duration_s
    g = scn.gravity

    def state_fn(t):
        a = omega * t
        R = SO3.exp(np.array([0.0, 0.0, a]))
        x = r * np.array([np.sin(a), 1.0 - np.cos(a), 0.0])
        v = r * omega * np.array([np.cos(a), np.sin(a), 0.0])
        return R, v, x

    def u_signal(t):
        a = omega * t
        R, _, _ = state_fn(t)
        accel = r * omega * omega * np.array([-np.sin(a), np.cos(a), 0.0])
        return np.concatenate([[0.0, 0.0, omega], R.T @ (accel - g)])

    return u_signal, state_fn


class InvariantAdapter:
    """Runs the generic invariant filter against raw measurements."""

    def __init__(self, name, fs, dyn, lin, noise, obs, to_y_list):
        self.name = name
        self.fs = fs
        self.dyn = dyn
        self.lin = lin
        self.noise = noise
        self.obs = obs
        self.to_y_list = to_y_list
        self.failed = False

    def propagate(self, u_signal, dt):
        if self.failed:
            return
        try:
            self.fs = propagate(self.fs, self.dyn, self.lin, self.noise,
                                u_signal, dt, dt)
        except NumericalFailureError:
            self.failed = True

    def update(self, raw):
        if self.failed:
            return
        try:
            self.fs = update(self.fs, self.obs, self.to_y_list(raw))
        except (NumericalFailureError, RuntimeError):
            self.failed = True

    def estimate_matrix(self):
        return self.fs.x

    def trace_P(self):
        return float(np.trace(self.fs.P))

    def min_eig_P(self):
        return float(np.linalg.eigvalsh(self.fs.P)[0])

    def lyapunov(self, truth_matrix):
        if self.obs.side is ErrorSide.LEFT:
            eta = left_error(truth_matrix, self.fs.x)
        else:
            eta = right_error(truth_matrix, self.fs.x)
        try:
            xi = self.obs.group.log(eta)
        except BranchCutError:
            return np.nan
        return lyapunov_value(self.fs, xi)


class CarEKFAdapter:
    """Conventional EKF on the car with GPS observations."""

    def __init__(self, name, ekf):
        self.name = name
        self.ekf = ekf
        self.failed = False

    def propagate(self, u_signal, dt):
        if self.failed:
            return
        self.ekf.propagate(u_signal, dt, dt)
        if not (np.isfinite(self.ekf.theta)
                and np.all(np.isfinite(self.ekf.xy))):
            self.failed = True

    def update(self, raw):
        if self.failed:
            return
        try:
            self.ekf.update(raw)
        except RuntimeError:
            self.failed = True

    def estimate_matrix(self):
        return car.embed(self.ekf.theta, self.ekf.xy)

    def trace_P(self):
        return float(np.trace(self.ekf.P))

    def min_eig_P(self):
        return float(np.linalg.eigvalsh(self.ekf.P)[0])

    def lyapunov(self, truth_matrix):
        return np.nan


class NavMEKFAdapter:
    """Multiplicative EKF baseline on the navigation model."""

    def __init__(self, name, mekf):
        self.name = name
        self.mekf = mekf
        self.failed = False

    def propagate(self, u_signal, dt):
        if self.failed:
            return
        self.mekf.propagate(u_signal, dt, dt)
        if not np.all(np.isfinite(self.mekf.x)):
            self.failed = True

    def update(self, raw):
        if self.failed:
            return
        try:
            self.mekf.update(raw)
        except RuntimeError:
            self.failed = True

    def estimate_matrix(self):
        return nav.embed(self.mekf.R, self.mekf.v, self.mekf.x)

    def trace_P(self):
        return float(np.trace(self.mekf.P))

    def min_eig_P(self):
        return float(np.linalg.eigvalsh(self.mekf.P)[0])

    def lyapunov(self, truth_matrix):
        return np.nan


def _car_initial(scn, rng):
    theta0, xy0 = car_truth(scn)[1](0.0)
    err = scn.heading_error_deg * DEG
    est = car.embed(theta0 + err, xy0)
    P0 = np.diag([err ** 2 if err != 0 else (1.0 * DEG) ** 2, 0.01, 0.01])
    return est, P0


def _nav_initial(scn, rng):
    R0, v0, x0 = nav_truth(scn)[1](0.0)
    sig_att = scn.attitude_error_deg * DEG
    sig_vel = 0.1
    sig_pos = scn.position_error_m
    zeta = rng.normal(scale=sig_att, size=3) if sig_att > 0 else np.zeros(3)
    dv = rng.normal(scale=sig_vel, size=3)
    dx = rng.normal(scale=sig_pos, size=3) if sig_pos > 0 else np.zeros(3)
    R_est = SO3.project(SO3.exp(zeta) @ R0)
    P0 = np.diag([max(sig_att, DEG) ** 2] * 3 + [sig_vel ** 2] * 3
                 + [max(sig_pos, 0.1) ** 2] * 3)
    return R_est, v0 + dv, x0 + dx, P0


def build_adapters(scn, rng):
    """Instantiate the requested filters with a shared initial estimate."""
    adapters = []
    if scn.model == "car":
        est, P0 = _car_initial(scn, rng)
        dyn = car.dynamics()
        for name in scn.filters:
            if name == "iekf":
                if scn.observation == "gps":
                    side = ErrorSide.LEFT
                    obs = car.gps_observation(scn.N)

                    def to_y(raw):
                        return [np.append(raw, 1.0)]
                else:
                    side = ErrorSide.RIGHT
                    obs = car.landmark_observation(
                        [np.array(p) for p in scn.landmarks],
                        [scn.N for _ in scn.landmarks])

                    def to_y(raw):
                        return [np.append(y, -1.0) for y in raw]
                adapters.append(InvariantAdapter(
                    name, FilterState(est.copy(), P0.copy(), 0.0),
                    dyn, linearize(dyn, side),
                    car.noise_schedule(scn.Q, side), obs, to_y))
            elif name == "ekf":
                if scn.observation != "gps":
                    raise ValueError("car ekf baseline needs gps observations")
                theta0, xy0 = car.extract(est)
                adapters.append(CarEKFAdapter(name, car.CarEKF(
                    theta=theta0, xy=xy0, P=P0.copy(), Q=scn.Q.copy(),
                    N=scn.N.copy())))
            else:
                raise ValueError("unknown car filter %r" % name)
    else:
        R_est, v_est, x_est, P0 = _nav_initial(scn, rng)
        dyn = nav.dynamics(scn.gravity)
        p_list = [np.array(p) for p in scn.landmarks]
        for name in scn.filters:
            if name == "iekf":
                obs = nav.landmark_observation(
                    p_list, [scn.N for _ in p_list])

                def to_y(raw):
                    return [np.concatenate([y, [0.0, 1.0]]) for y in raw]
                adapters.append(InvariantAdapter(
                    name,
                    FilterState(nav.embed(R_est, v_est, x_est), P0.copy(), 0.0),
                    dyn, linearize(dyn, ErrorSide.RIGHT),
                    nav.noise_schedule(scn.Q), obs, to_y))
            elif name == "mekf":
                adapters.append(NavMEKFAdapter(name, nav.NavMEKF(
                    R=R_est.copy(), v=v_est.copy(), x=x_est.copy(),
                    P=P0.copy(), Q=scn.Q.copy(), N_block=scn.N.copy(),
                    p_list=p_list, gravity=scn.gravity.copy())))
            else:
                raise ValueError("unknown nav filter %r" % name)
    return adapters


def _measure(scn, state, rng):
    """Raw physical measurement at the true state, shared by all filters."""
    if scn.model == "car":
        theta, xy = state
        if scn.observation == "gps":
            y = xy.copy()
            if scn.inject_noise:
                y += rng.multivariate_normal(np.zeros(2), scn.N)
            return y
        R = rot2(theta)
        out = []
        for p in scn.landmarks:
            y = R.T @ (xy - np.array(p))
            if scn.inject_noise:
                y += rng.multivariate_normal(np.zeros(2), scn.N)
            out.append(y)
        return out
    R, v, x = state
    out = []
    for p in scn.landmarks:
        y = R.T @ (np.array(p) - x)
        if scn.inject_noise:
            y += rng.multivariate_normal(np.zeros(3), scn.N)
        out.append(y)
    return out


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _car_metrics(truth_state, est_matrix):
    theta, xy = truth_state
    th_hat, xy_hat = car.extract(est_matrix)
    att = abs(_wrap_angle(th_hat - theta)) / DEG
    pos = float(np.linalg.norm(xy_hat - xy))
    try:
        log_norm = float(np.linalg.norm(SE2.log(
            left_error(car.embed(theta, xy), est_matrix))))
    except BranchCutError:
        log_norm = np.nan
    return att, pos, log_norm


def _nav_metrics(truth_state, est_matrix):
    R, v, x = truth_state
    R_hat, v_hat, x_hat = nav.extract(est_matrix)
    cos_a = np.clip(0.5 * (np.trace(R_hat @ R.T) - 1.0), -1.0, 1.0)
    att = float(np.arccos(cos_a)) / DEG
    pos = float(np.linalg.norm(x_hat - x))
    try:
        log_norm = float(np.linalg.norm(SE23.log(
            right_error(nav.embed(R, v, x), est_matrix))))
    except BranchCutError:
        log_norm = np.nan
    return att, pos, log_norm


@dataclass
class RunLog:
    """Time series produced by run(); one row per propagation step."""

    scenario: Scenario
    t: np.ndarray
    truth: dict                 # column name -> array
    filters: dict               # filter name -> dict of metric arrays
    extra: dict = field(default_factory=dict)


def run(scn):
    """Simulate the scenario; deterministic in the seed."""
    rng = np.random.default_rng(scn.seed)
    adapters = build_adapters(scn, rng)
    u_signal, state_fn = (car_truth(scn) if scn.model == "car"
                          else nav_truth(scn))
    metrics = _car_metrics if scn.model == "car" else _nav_metrics

    dt = 1.0 / scn.imu_hz
    steps = int(round(scn.duration_s * scn.imu_hz))
    obs_every = scn.imu_hz // scn.obs_hz

    t_arr = np.empty(steps + 1)
    truth_cols = {}
    if scn.model == "car":
        truth_keys = ("theta", "x", "y")
    else:
        truth_keys = ("roll", "pitch", "yaw", "vx", "vy", "vz", "x", "y", "z")
    for k in truth_keys:
        truth_cols["true_" + k] = np.empty(steps + 1)
    cols = {}
    for a in adapters:
        cols[a.name] = {
            "err_att_deg": np.empty(steps + 1),
            "err_pos_m": np.empty(steps + 1),
            "err_log_norm": np.empty(steps + 1),
            "trace_P": np.empty(steps + 1),
            "updated": np.zeros(steps + 1),
        }
    lyap = {a.name: [] for a in adapters
            if isinstance(a, InvariantAdapter)}
    min_eig = {a.name: np.inf for a in adapters}

    def truth_matrix(state):
        if scn.model == "car":
            return car.embed(*state)
        return nav.embed(*state)

    def log_row(k, t, updated_names):
        state = state_fn(t)
        t_arr[k] = t
        if scn.model == "car":
            theta, xy = state
            vals = (theta, xy[0], xy[1])
        else:
            R, v, x = state
            roll = np.arctan2(R[2, 1], R[2, 2])
            pitch = np.arcsin(np.clip(-R[2, 0], -1.0, 1.0))
            yaw = np.arctan2(R[1, 0], R[0, 0])
            vals = (roll, pitch, yaw, v[0], v[1], v[2], x[0], x[1], x[2])
        for key, val in zip(truth_keys, vals):
            truth_cols["true_" + key][k] = val
        for a in adapters:
            att, pos, ln = metrics(state, a.estimate_matrix())
            c = cols[a.name]
            c["err_att_deg"][k] = att
            c["err_pos_m"][k] = pos
            c["err_log_norm"][k] = ln
            c["trace_P"][k] = a.trace_P()
            c["updated"][k] = 1.0 if a.name in updated_names else 0.0
            min_eig[a.name] = min(min_eig[a.name], a.min_eig_P())

    log_row(0, 0.0, set())
    for k in range(1, steps + 1):
        t = k * dt
        for a in adapters:
            a.propagate(u_signal, dt)
        updated = set()
        if k % obs_every == 0:
            state = state_fn(t)
            raw = _measure(scn, state, rng)
            tm = truth_matrix(state)
            for a in adapters:
                a.update(raw)
                if not a.failed:
                    updated.add(a.name)
                if a.name in lyap and not a.failed:
                    lyap[a.name].append((t, a.lyapunov(tm)))
        log_row(k, t, updated)

    return RunLog(
        scenario=scn, t=t_arr, truth=truth_cols, filters=cols,
        extra={
            "lyapunov": lyap,
            "min_eig_P": dict(min_eig),
            "failed": {a.name: a.failed for a in adapters},
        })


# Initial position errors below this floor (meters) do not shrink the
# divergence threshold; an exactly known initial position would
# otherwise flag every transient.
DIVERGENCE_FLOOR_M = 0.1
DIVERGENCE_FACTOR = 10.0


def diverged(log, name):
    """True when the position error blows past a multiple of its initial
    value at any point after the first update."""
    c = log.filters[name]
    if log.extra["failed"].get(name, False):
        return True
    upd = np.flatnonzero(c["updated"] > 0)
    if upd.size == 0:
        return False
    start = upd[0]
    thresh = DIVERGENCE_FACTOR * max(c["err_pos_m"][0], DIVERGENCE_FLOOR_M)
    tail = c["err_pos_m"][start:]
    return bool(np.any(~np.isfinite(tail)) or np.any(tail > thresh)
                or log.extra["failed"].get(name, False))


def convergence_time(log, name, att_deg):
    """Earliest time after which the attitude error stays below the
    threshold; inf if it never settles."""
    err = log.filters[name]["err_att_deg"]
    ok = err <= att_deg
    if not ok[-1]:
        return np.inf
    idx = len(ok) - 1
    while idx > 0 and ok[idx - 1]:
        idx -= 1
    return float(log.t[idx])


def summarize(log):
    """Per-filter end-state summary used by the CLI report."""
    out = {}
    for name, c in log.filters.items():
        out[name] = {
            "final_att_deg": float(c["err_att_deg"][-1]),
            "final_pos_m": float(c["err_pos_m"][-1]),
            "final_trace_P": float(c["trace_P"][-1]),
            "min_eig_P": float(log.extra["min_eig_P"][name]),
            "diverged": diverged(log, name),
            "failed": bool(log.extra["failed"][name]),
            "time_to_1deg_s": convergence_time(log, name, 1.0),
        }
    return out


def csv_columns(log):
    """Ordered (name, array) pairs matching the on-disk layout."""
    pairs = [("t", log.t)]
    pairs.extend(log.truth.items())
    for name in log.scenario.filters:
        c = log.filters[name]
        for key in ("err_att_deg", "err_pos_m", "err_log_norm",
                    "trace_P", "updated"):
            pairs.append(("%s_%s" % (name, key), c[key]))
    return pairs


def write_csv(log, path_or_buf):
    """Write the run log; floats via repr so a reload is lossless."""
    pairs = csv_columns(log)
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        f = open(path_or_buf, "w")
        close = True
    else:
        f = path_or_buf
    try:
        f.write(",".join(name for name, _ in pairs) + "\n")
        n = len(log.t)
        for i in range(n):
            f.write(",".join(repr(float(arr[i])) for _, arr in pairs) + "\n")
    finally:
        if close:
            f.close()


def csv_string(log):
    buf = io.StringIO()
    write_csv(log, buf)
    return buf.getvalue()
