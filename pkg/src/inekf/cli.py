"""Command-line front end: config-driven runs, model self-checks, and
covariance-boundedness reports.

Config documents are flat ``key = value`` lines with dotted section
prefixes; ``#`` starts a comment.  Unknown keys and malformed values are
reported with their line number.  Exit codes: 0 success, 1 config error,
2 filter numerical failure (outputs still written), 3 check failure.
"""

import argparse
import concurrent.futures
import os
import sys

import numpy as np

from . import car, nav, sim
from .errordyn import ErrorSide, check_group_affine, linearize, \
    numeric_error_jacobian, verify_log_linear
from .filters import FilterState
from .observability import check_deyst_price, numerical_rank, rank_H_HPhi


class ConfigError(Exception):
    """Malformed or inconsistent configuration document."""


def parse_config(text, source="<config>"):
    """Flat key/value parse; returns {key: (raw_value, line_number)}."""
    out = {}
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("%s:%d: expected 'key = value', got %r"
                              % (source, i, line.strip()))
        key, val = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError("%s:%d: empty key" % (source, i))
        if key in out:
            raise ConfigError("%s:%d: duplicate key %r" % (source, i, key))
        out[key] = (val.strip(), i)
    return out


def _floats(raw, source, line, count=None):
    try:
        vals = [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError("%s:%d: expected numbers, got %r"
                          % (source, line, raw))
    if count is not None and len(vals) != count:
        raise ConfigError("%s:%d: expected %d numbers, got %d"
                          % (source, line, count, len(vals)))
    return vals


def _bool(raw, source, line):
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError("%s:%d: expected boolean, got %r" % (source, line, raw))


_KNOWN_KEYS = {
    "model", "observation", "filters", "seed",
    "trajectory.diameter_m", "trajectory.duration_s",
    "rates.imu_hz", "rates.obs_hz",
    "init.heading_deg", "init.attitude_deg", "init.position_m",
    "noise.inject", "tuning.q_diag", "tuning.n_diag", "landmarks",
}


def build_scenario(cfg, source="<config>"):
    """Validate a parsed config and construct the Scenario."""
    for key, (_, line) in cfg.items():
        if key not in _KNOWN_KEYS:
            raise ConfigError("%s:%d: unknown key %r" % (source, line, key))
    if "model" not in cfg:
        raise ConfigError("%s: missing required key 'model'" % source)
    model_raw, model_line = cfg["model"]
    if model_raw not in ("car", "nav"):
        raise ConfigError("%s:%d: model must be 'car' or 'nav', got %r"
                          % (source, model_line, model_raw))
    kw = {"model": model_raw}

    def take(key, conv):
        if key in cfg:
            raw, line = cfg[key]
            return conv(raw, line)
        return None

    def number(raw, line):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError("%s:%d: expected a number, got %r"
                              % (source, line, raw))

    def integer(raw, line):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError("%s:%d: expected an integer, got %r"
                              % (source, line, raw))

    simple = {
        "observation": ("observation", lambda r, l: r),
        "trajectory.diameter_m": ("diameter_m", number),
        "trajectory.duration_s": ("duration_s", number),
        "rates.imu_hz": ("imu_hz", integer),
        "rates.obs_hz": ("obs_hz", integer),
        "seed": ("seed", integer),
        "init.heading_deg": ("heading_error_deg", number),
        "init.attitude_deg": ("attitude_error_deg", number),
        "init.position_m": ("position_error_m", number),
        "noise.inject": ("inject_noise",
                         lambda r, l: _bool(r, source, l)),
    }
    for key, (name, conv) in simple.items():
        val = take(key, conv)
        if val is not None:
            kw[name] = val
    if "filters" in cfg:
        raw, _ = cfg["filters"]
        kw["filters"] = tuple(
            f.strip() for f in raw.split(",") if f.strip())
    dof = 3 if model_raw == "car" else 9
    obs_dim = 2 if model_raw == "car" else 3
    if "tuning.q_diag" in cfg:
        raw, line = cfg["tuning.q_diag"]
        kw["Q"] = np.diag(_floats(raw, source, line, dof))
    if "tuning.n_diag" in cfg:
        raw, line = cfg["tuning.n_diag"]
        kw["N"] = np.diag(_floats(raw, source, line, obs_dim))
    if "landmarks" in cfg:
        raw, line = cfg["landmarks"]
        pts = []
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if chunk:
                pts.append(tuple(_floats(chunk, source, line, obs_dim)))
        kw["landmarks"] = tuple(pts)
    try:
        return sim.Scenario(**kw)
    except ValueError as exc:
        raise ConfigError("%s: %s" % (source, exc))


def load_scenario(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc))
    return build_scenario(parse_config(text, source=path), source=path)


def bundled_config_path(name):
    return os.path.join(os.path.dirname(__file__), "configs", name)


def _summary_text(log):
    lines = []
    s = sim.summarize(log)
    for name in log.scenario.filters:
        m = s[name]
        lines.append(
            "%s: final_att_deg=%r final_pos_m=%r final_trace_P=%r "
            "min_eig_P=%r time_to_1deg_s=%r diverged=%s failed=%s"
            % (name, m["final_att_deg"], m["final_pos_m"],
               m["final_trace_P"], m["min_eig_P"], m["time_to_1deg_s"],
               m["diverged"], m["failed"]))
    return "\n".join(lines) + "\n"


def _run_one(path, out_dir, seed, noise):
    scn = load_scenario(path)
    if seed is not None:
        scn.seed = seed
    if noise is not None:
        scn.inject_noise = noise
    log = sim.run(scn)
    stem = os.path.splitext(os.path.basename(path))[0]
    os.makedirs(out_dir, exist_ok=True)
    sim.write_csv(log, os.path.join(out_dir, stem + ".csv"))
    with open(os.path.join(out_dir, stem + "_summary.txt"), "w") as f:
        f.write(_summary_text(log))
    return any(log.extra["failed"].values())


def cmd_run(args):
    noise = None
    if args.noise is not None:
        noise = args.noise == "on"
    failed = False
    try:
        if args.jobs > 1 and len(args.config) > 1:
            with concurrent.futures.ProcessPoolExecutor(args.jobs) as ex:
                futs = [ex.submit(_run_one, p, args.out, args.seed, noise)
                        for p in args.config]
                for fut in futs:
                    failed = fut.result() or failed
        else:
            for path in args.config:
                failed = _run_one(path, args.out, args.seed, noise) or failed
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    return 2 if failed else 0


def _check_table(rows):
    ok = True
    for name, passed, detail in rows:
        print("%-38s %s  %s" % (name, "PASS" if passed else "FAIL", detail))
        ok = ok and passed
    return 0 if ok else 3


def cmd_check(args):
    rows = []
    if args.model == "car":
        dyn = car.dynamics()
        sides = (ErrorSide.LEFT, ErrorSide.RIGHT)
        u_test = [np.array([1.0, 0.5]), np.array([2.0, -0.3])]
        lms = args.landmarks or sim.CAR_LANDMARKS_DEFAULT
        H = car.landmark_observation([np.array(p) for p in lms]).H(None)
        rank_ok = numerical_rank(H) == 3
        rank_detail = "rank(H)=%d (need 3)" % numerical_rank(H)
    else:
        dyn = nav.dynamics()
        sides = (ErrorSide.RIGHT,)
        u_test = [np.concatenate([[0.1, -0.2, 0.3], [0.5, 0.0, -9.0]]),
                  np.ones(6)]
        lms = args.landmarks or sim.NAV_LANDMARKS_DEFAULT
        H = nav.landmark_observation([np.array(p) for p in lms]).H(None)
        Phi = nav.transition_closed_form(1.0)
        r = rank_H_HPhi(H, Phi)
        rank_ok = r == 9
        rank_detail = "rank([H;HPhi])=%d (need 9)" % r

    aff = check_group_affine(dyn, sample_count=100, seed=0)
    rows.append(("group-affine identity", aff["holds"],
                 "max residual %.3g" % aff["max_residual"]))

    worst = 0.0
    for side in sides:
        analytic = dyn.analytic_A.get(side)
        if analytic is None:
            continue
        for u in u_test:
            worst = max(worst, float(np.max(np.abs(
                analytic(u) - numeric_error_jacobian(dyn, side, u)))))
    rows.append(("analytic vs numeric linearization", worst < 1e-5,
                 "max deviation %.3g" % worst))

    rng = np.random.default_rng(0)
    xi0 = rng.standard_normal((5, dyn.group.dof))
    xi0 /= np.linalg.norm(xi0, axis=1, keepdims=True)
    u_const = u_test[0]
    dev = verify_log_linear(dyn, sides[0], xi0, lambda t: u_const,
                            (0.0, 2.0), 1e-3)
    rows.append(("log-linear error propagation", dev <= 1e-6,
                 "max deviation %.3g" % dev))

    rows.append(("landmark geometry rank", rank_ok, rank_detail))
    return _check_table(rows)


def cmd_observability(args):
    try:
        scn = load_scenario(args.config)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    if scn.model == "car":
        dyn = car.dynamics()
        side = ErrorSide.LEFT if scn.observation == "gps" else ErrorSide.RIGHT
        u_signal, state_fn = sim.car_truth(scn)
        if scn.observation == "gps":
            obs = car.gps_observation(scn.N)
        else:
            obs = car.landmark_observation(
                [np.array(p) for p in scn.landmarks],
                [scn.N for _ in scn.landmarks])
        noise_sched = car.noise_schedule(scn.Q, side)

        def state_matrix(t):
            return car.embed(*state_fn(t))
    else:
        dyn = nav.dynamics(scn.gravity)
        side = ErrorSide.RIGHT
        u_signal, state_fn = sim.nav_truth(scn)
        obs = nav.landmark_observation(
            [np.array(p) for p in scn.landmarks],
            [scn.N for _ in scn.landmarks])
        noise_sched = nav.noise_schedule(scn.Q)

        def state_matrix(t):
            return nav.embed(*state_fn(t))

    lin = linearize(dyn, side)
    H = obs.H(None)

    def fs_at(t):
        return FilterState(state_matrix(t), np.eye(dyn.group.dof), t)

    report = check_deyst_price(
        lin, H,
        qhat_signal=lambda t: noise_sched.qhat(fs_at(t), u_signal(t)),
        nhat_signal=lambda t: obs.nhat(fs_at(t)),
        u_signal=u_signal,
        window=args.window, t0=0.0, obs_dt=1.0 / scn.obs_hz)
    print("window [%g, %g] s" % (report.t0, report.t1))
    print("transition eig bounds   %.3e .. %.3e" % report.phi_eig_bounds)
    print("process noise bounds    %.3e .. %.3e" % report.qhat_eig_bounds)
    print("obs noise bounds        %.3e .. %.3e" % report.nhat_eig_bounds)
    print("reachability gramian    %.3e .. %.3e" % report.gramian_bounds)
    print("observability gramian   %.3e .. %.3e" % report.obs_bounds)
    print("rank [H; H Phi]         %d" % report.rank_HPhi)
    for name, met in report.conditions_met.items():
        print("%-24s%s" % (name, "PASS" if met else "FAIL"))
    return 0 if report.all_met else 3


def _landmark_list(raw, dim):
    pts = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if chunk:
            vals = [float(v) for v in chunk.replace(",", " ").split()]
            if len(vals) != dim:
                raise ValueError("landmark needs %d coordinates" % dim)
            pts.append(tuple(vals))
    return tuple(pts)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="inekf",
        description="Invariant filtering scenario runner and checker.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate configured scenarios")
    p_run.add_argument("config", nargs="+", help="config file paths")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--noise", choices=("on", "off"), default=None)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="model self-checks")
    p_check.add_argument("--model", choices=("car", "nav"), required=True)
    p_check.add_argument("--landmarks", default=None,
                         help="override, e.g. '0 0 1; 0 0 2; 0 0 3'")
    p_check.set_defaults(func=cmd_check)

    p_obs = sub.add_parser("observability",
                           help="covariance boundedness report")
    p_obs.add_argument("config")
    p_obs.add_argument("--window", type=int, default=5)
    p_obs.set_defaults(func=cmd_observability)

    args = parser.parse_args(argv)
    if getattr(args, "landmarks", None) is not None:
        dim = 2 if args.model == "car" else 3
        try:
            args.landmarks = _landmark_list(args.landmarks, dim)
        except ValueError as exc:
            print("bad --landmarks: %s" % exc, file=sys.stderr)
            return 1
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
