"""Command-line front end: ``rdlab <command> --config <file.toml> [--threads k] [--out dir]``.

Each run writes its result files plus ``manifest.json`` (config echo,
package versions, seeds, and the list of files written) into the output
directory.  Column contracts for every CSV are listed in the README.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from pathlib import Path

import numba
import numpy as np
import scipy
import tomli

from . import __version__
from .errors import ConfigError, NotConverged, RdlabError
from .model import PRESETS, Configuration, LocalRate, potential_minima, reaction_polynomials

# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

RATE_KEYS = {
    "preset": (str, None),
    "gamma": (float, None),
    "rate_table": (list, None),
    "rate_radius": (int, None),
}
COMMON = {"seed": (int, 0), "threads": (int, 1), "out": (str, None), "command": (str, None)}
PROFILE = {"rho_mean": (float, 0.5), "rho_amp": (float, 0.0), "rho_mode": (int, 1)}

SCHEMAS = {
    "potential": {"grid": (int, 10001)},
    "simulate": {"n": (int, ...), "T": (float, ...), "snapshots": (int, 10), "bins": (int, 16),
                 "initial": (str, "bernoulli"), "log_events": (bool, False), **PROFILE},
    "hydro": {"M": (int, 256), "T": (float, ...), "dt": (float, 1e-3), "times": (list, None),
              "n": (int, None), "replicas": (int, 8), "bins": (int, 16), **PROFILE},
    "mix-exact": {"n_list": (list, ...), "eps": (float, 0.25)},
    "mix-couple": {"n_list": (list, ...), "eps": (float, 0.25), "replicas": (int, 32)},
    "hit": {"n": (int, ...), "center": (float, 0.5), "radii": (list, [0.02, 0.05, 0.15]),
            "K": (int, 40), "samples": (int, 500), "start": (str, "alternating"),
            "t_max": (float, math.inf)},
    "sweep-mix": {"n_list": (list, ...), "eps": (float, 0.25), "mode": (str, "exact"),
                  "replicas": (int, 32)},
    "sweep-escape": {"n_list": (list, ...), "center": (float, 0.5),
                     "radii": (list, [0.02, 0.05, 0.15]), "K": (int, 40), "samples": (int, 200),
                     "start": (str, "alternating"), "t_max": (float, math.inf)},
    "action": {"mode": (str, "rate"), "M": (int, 128), "T": (float, 1.0), "dt": (float, 1e-3),
               "shift": (float, 0.0), "well": (float, 0.5), "target": (float, 0.75),
               "horizon": (float, 50.0), "steps": (int, 400), "radius": (float, 0.15),
               "hold": (float, 0.25), **PROFILE},
    "exact": {"n": (int, ...), "tv_times": (list, [0.0, 0.1, 0.5, 1.0, 2.0]),
              "start": (str, "zeros"), "target": (list, None), "eps": (float, 0.25)},
}

ACTION_MODES = ("rate", "holding", "quasipotential", "well-depth")


def _coerce(path, value, typ):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is float and isinstance(value, str) and value in ("inf", "+inf"):
        return math.inf
    if typ is int and isinstance(value, bool) or not isinstance(value, typ):
        raise ConfigError(path, f"expected {typ.__name__}, got {type(value).__name__}")
    return value


def validate(command: str, raw: dict) -> dict:
    """Check ``raw`` against the command schema; returns a dict with defaults
    filled in.  Unknown keys and type errors raise ConfigError naming the key."""
    if command not in SCHEMAS:
        raise ConfigError("command", f"unknown command {command!r}")
    schema = {**COMMON, **RATE_KEYS, **SCHEMAS[command]}
    for key in raw:
        if key not in schema:
            raise ConfigError(key, "unknown key")
    cfg = {}
    for key, (typ, default) in schema.items():
        if key in raw:
            cfg[key] = _coerce(key, raw[key], typ)
        elif default is ...:
            raise ConfigError(key, "required key missing")
        else:
            cfg[key] = default
    if cfg["command"] not in (None, command):
        raise ConfigError("command", f"config is for {cfg['command']!r}, not {command!r}")
    _check_rate_keys(cfg)
    if "radii" in cfg:
        r = cfg["radii"]
        if len(r) != 3 or not all(isinstance(x, (int, float)) for x in r):
            raise ConfigError("radii", "expected [alpha, beta, gamma]")
        a, b, g = map(float, r)
        if not (0 < a < b and 2 * b < g):
            raise ConfigError("radii", "need 0 < alpha < beta and 2 beta < gamma")
    for key in ("n_list", "tv_times", "times"):
        if cfg.get(key) is not None and not all(isinstance(x, (int, float)) for x in cfg[key]):
            raise ConfigError(key, "expected a list of numbers")
    if command == "exact" and cfg["target"] is not None and len(cfg["target"]) != 2:
        raise ConfigError("target", "expected [low, high] density window")
    if command == "action" and cfg["mode"] not in ACTION_MODES:
        raise ConfigError("mode", f"expected one of {ACTION_MODES}")
    if command == "sweep-mix" and cfg["mode"] not in ("exact", "coupling"):
        raise ConfigError("mode", "expected 'exact' or 'coupling'")
    if cfg["threads"] < 1:
        raise ConfigError("threads", "must be >= 1")
    return cfg


def _check_rate_keys(cfg):
    if cfg["rate_table"] is not None:
        if cfg["preset"] is not None:
            raise ConfigError("rate_table", "give either a preset or an explicit table")
        if cfg["rate_radius"] is None:
            raise ConfigError("rate_radius", "required with rate_table")
        return
    if cfg["preset"] is None:
        if cfg["gamma"] is None:
            raise ConfigError("preset", "give gamma (with an optional preset) or rate_table and rate_radius")
        cfg["preset"] = "example-2.1"
    if cfg["preset"] not in PRESETS:
        raise ConfigError("preset", f"unknown preset; choose from {sorted(PRESETS)}")
    if cfg["gamma"] is None:
        raise ConfigError("gamma", "required with a preset")


def build_rate(cfg) -> LocalRate:
    if cfg["rate_table"] is not None:
        try:
            return LocalRate(cfg["rate_radius"], np.asarray(cfg["rate_table"], dtype=float))
        except ValueError as exc:
            raise ConfigError("rate_table", str(exc)) from exc
    return PRESETS[cfg["preset"]](cfg["gamma"])


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


class Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def csv(self, name, header, rows):
        path = self.root / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
        self.files.append(name)

    def json(self, name, obj):
        (self.root / name).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
        self.files.append(name)

    def binary(self, name, writer):
        writer(self.root / name)
        self.files.append(name)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _profile(cfg):
    m, a, k = cfg["rho_mean"], cfg["rho_amp"], cfg["rho_mode"]
    if m - abs(a) < 0 or m + abs(a) > 1:
        raise ConfigError("rho_amp", "profile leaves [0, 1]")
    return lambda th: m + a * np.cos(2 * np.pi * k * np.asarray(th))


def _start(name, n, path):
    if name in ("alternating", "zeros", "ones"):
        return getattr(Configuration, name)(n)
    if set(name) <= {"0", "1"} and len(name) == n:
        return Configuration.from_string(name)
    raise ConfigError(path, "expected alternating, zeros, ones or a 0/1 string of length n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_potential(cfg, rate, out, threads):
    poly = reaction_polynomials(rate)
    prof = potential_minima(poly, grid=cfg["grid"])
    out.json("polynomials.json", poly.to_json())
    out.csv("minima.csv", ["rho_min", "V"], [[m, poly.V(m)] for m in prof.minima])
    return {"minima": list(prof.minima), "degenerate": prof.degenerate}


def cmd_simulate(cfg, rate, out, threads):
    from .simulator import EventLog, SimState, advance, empirical_profile, sample_profile_configuration

    n = cfg["n"]
    if cfg["initial"] == "bernoulli":
        start = sample_profile_configuration(_profile(cfg), n, np.random.SeedSequence(cfg["seed"]).spawn(1)[0])
    else:
        start = _start(cfg["initial"], n, "initial")
    st = SimState.create(rate, start, cfg["seed"])
    log = EventLog() if cfg["log_events"] else None
    times = np.linspace(0.0, cfg["T"], cfg["snapshots"] + 1)
    rows = []
    for t in times:
        advance(st, float(t), log)
        rows.append([t, *empirical_profile(st, cfg["bins"]).bins])
    out.csv("profiles.csv", ["t", *[f"bin_{j}" for j in range(cfg["bins"])]], rows)
    out.json("start.json", {"configuration": "".join(map(str, start.bits.tolist()))})
    if log is not None:
        out.binary("events.bin", log.write)
    return {"events": st.n_flips + st.n_exchanges}


def cmd_hydro(cfg, rate, out, threads):
    from .hydro import DensitySlice, bin_average, evolve, fourier_metric, l2_distance, sup_distance
    from .simulator import SimState, advance, map_replicas, sample_profile_configuration, spawn_rngs

    poly = reaction_polynomials(rate)
    rho0 = DensitySlice.from_function(_profile(cfg), cfg["M"])
    path = evolve(rho0, poly, cfg["T"], cfg["dt"])
    out.csv("pde.csv", ["t", *[f"rho_{j}" for j in range(cfg["M"])]], path.to_rows())
    if cfg["n"] is None:
        return {}
    times = cfg["times"] or [cfg["T"]]
    n, bins = cfg["n"], cfg["bins"]

    def replica(rng):
        st = SimState.create(rate, sample_profile_configuration(_profile(cfg), n, rng), rng)
        snaps = []
        for t in times:
            advance(st, float(t))
            snaps.append(st.eta.astype(float).reshape(bins, n // bins).mean(axis=1))
        return np.array(snaps)

    if n % bins:
        raise ConfigError("bins", f"{bins} bins do not divide n={n}")
    sims = np.mean(map_replicas(replica, spawn_rngs(cfg["seed"], cfg["replicas"]), threads), axis=0)
    rows = []
    for t, prof in zip(times, sims):
        pde = bin_average(path.at(float(t)), bins)
        rows.append([t, l2_distance(prof, pde), sup_distance(prof, pde),
                     fourier_metric(DensitySlice(prof), DensitySlice(pde)).value])
    out.csv("comparison.csv", ["t", "l2", "sup", "fourier"], rows)
    return {"max_l2": max(r[1] for r in rows)}


def cmd_mix_exact(cfg, rate, out, threads):
    from .exact import build_generator, mixing_time_exact

    rows = []
    for n in cfg["n_list"]:
        rows.append([int(n), cfg["gamma"], cfg["eps"], mixing_time_exact(build_generator(int(n), rate), cfg["eps"])])
    out.csv("mixing.csv", ["n", "gamma", "eps", "t_mix"], rows)
    return {}


def cmd_mix_couple(cfg, rate, out, threads):
    from .simulator import coalescence_times, tv_mixing_upper_estimate

    rows, trows = [], []
    seeds = np.random.SeedSequence(cfg["seed"]).spawn(len(cfg["n_list"]))
    for n, ss in zip(cfg["n_list"], seeds):
        n = int(n)
        times = coalescence_times(rate, n, cfg["replicas"], ss, threads)
        est = tv_mixing_upper_estimate(rate, n, cfg["eps"], cfg["replicas"], ss, times=times)
        rows.append([n, cfg["gamma"], cfg["eps"], est.time, est.time / math.log(n), est.replicas])
        trows += [[n, i, t] for i, t in enumerate(times)]
    out.csv("coupling.csv", ["n", "gamma", "eps", "t_mix", "t_over_log_n", "replicas"], rows)
    out.csv("coalescence_times.csv", ["n", "replica", "time"], trows)
    return {}


def _spec(cfg):
    from .hitting import NeighborhoodSpec

    a, b, g = map(float, cfg["radii"])
    return NeighborhoodSpec(cfg["center"], a, b, g, cfg["K"])


def cmd_hit(cfg, rate, out, threads):
    from .hitting import exp_law_test, hitting_experiment

    n = cfg["n"]
    samples = hitting_experiment(rate, n, _spec(cfg), _start(cfg["start"], n, "start"),
                                 cfg["samples"], cfg["seed"], threads, cfg["t_max"])
    out.csv("samples.csv", ["seed", "H", "nu", "num_excursions"],
            [[s.replica, s.H, s.nu, s.excursions] for s in samples])
    report = {"samples": len(samples)}
    if len(samples) >= 100 and all(s.escaped for s in samples):
        report.update(exp_law_test(samples).to_json())
    out.json("ks.json", report)
    return report


def cmd_sweep_mix(cfg, rate, out, threads):
    from .hitting import mixing_scaling_sweep

    fit = mixing_scaling_sweep(rate, [int(n) for n in cfg["n_list"]], cfg["eps"], cfg["mode"],
                               cfg["replicas"], cfg["seed"], threads)
    out.csv("sweep_mix.csv", ["n", "t_mix", "t_over_log_n"],
            [[r["n"], r["t_mix"], r["t_over_log_n"]] for r in fit.rows])
    out.json("fit.json", {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2, "mode": cfg["mode"]})
    return {}


def cmd_sweep_escape(cfg, rate, out, threads):
    from .hitting import escape_scaling_sweep

    spec = _spec(cfg)
    fit = escape_scaling_sweep(rate, spec, [int(n) for n in cfg["n_list"]], cfg["samples"], cfg["seed"],
                               lambda n: _start(cfg["start"], n, "start"), threads, cfg["t_max"])
    out.csv("sweep_escape.csv", ["n", "mean_H", "ci_low", "ci_high", "samples"],
            [[r["n"], r["mean_H"], r["ci_low"], r["ci_high"], r["samples"]] for r in fit.rows])
    out.json("fit.json", {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2})
    return {}


def cmd_action(cfg, rate, out, threads):
    from .hydro import DensityPath, DensitySlice, evolve
    from .ldp import (holding_cost, quasipotential_homogeneous, rate_function, well_depth_estimate,
                      well_depths)

    poly = reaction_polynomials(rate)
    mode = cfg["mode"]
    if mode == "rate":
        rho0 = DensitySlice.from_function(_profile(cfg), cfg["M"])
        path = evolve(rho0, poly, cfg["T"], cfg["dt"])
        if cfg["shift"]:
            shifted = path.values + cfg["shift"]
            if shifted.min() < 0 or shifted.max() > 1:
                raise ConfigError("shift", "shifted path leaves [0, 1]")
            path = DensityPath(path.times, shifted)
        res = rate_function(path, path.values[0], poly)
        out.json("action.json", res.to_json())
        out.csv("trace.csv", ["iteration", "value", "grad_norm"], res.trace)
        return {"value": res.value}
    if mode == "holding":
        M, steps = cfg["M"], int(round(cfg["T"] / cfg["dt"]))
        path = DensityPath.constant(cfg["hold"], M, cfg["T"], steps)
        res = rate_function(path, path.values[0], poly)
        result = {**res.to_json(), "oracle": cfg["T"] * holding_cost(poly, cfg["hold"])}
        out.json("action.json", result)
        return {"value": res.value}
    if mode == "quasipotential":
        q = quasipotential_homogeneous(poly, cfg["target"], cfg["well"], cfg["horizon"], cfg["steps"])
        out.json("action.json", q.to_json())
        out.csv("path.csv", ["t", "rho"], list(zip(q.times, q.path)))
        return {"value": q.value}
    kw = {"T": cfg["horizon"], "steps": cfg["steps"]}
    try:
        h0, per = well_depths(poly, cfg["radius"], **kw)
    except RdlabError:
        per = [well_depth_estimate(poly, m, cfg["radius"], **kw) for m in potential_minima(poly).minima]
        h0 = None
    out.json("action.json", {"h0": h0, "wells": [
        {"well": w.well, "estimate": w.estimate, "label": w.label,
         "sides": {str(k): v for k, v in w.sides.items()}} for w in per]})
    return {"h0": h0}


def cmd_exact(cfg, rate, out, threads):
    from .exact import (StateSet, build_generator, mean_hitting_exact, mixing_time_exact, rate_into_set,
                        stationary_distribution, tv_curve)

    n = cfg["n"]
    gen = build_generator(n, rate)
    mu = stationary_distribution(gen)
    states = range(gen.size)
    out.csv("stationary.csv", ["state", "configuration", "mu"],
            [[s, "".join(str((s >> x) & 1) for x in range(n)), mu[s]] for s in states])
    start = _start(cfg["start"], n, "start")
    tv = tv_curve(gen, start, cfg["tv_times"], mu)
    out.csv("tv.csv", ["t", "tv"], list(zip(cfg["tv_times"], tv)))
    summary = {"t_mix": mixing_time_exact(gen, cfg["eps"], mu), "eps": cfg["eps"]}
    if cfg["target"] is not None:
        A = StateSet.density_window(n, *map(float, cfg["target"]))
        E = mean_hitting_exact(gen, A)
        out.csv("hitting.csv", ["state", "mean_hitting_time"], [[s, E[s]] for s in states])
        r = rate_into_set(gen, mu, A)
        summary.update({"mu_A": r.mu_A, "rate_into_A": r.rate, "boundary_size": r.boundary.size,
                        "rate_bound": float(r.exact_bound), "within_bound": r.within_bound,
                        "mean_hitting_from_start": float(E[start.to_index()])})
    out.json("summary.json", summary)
    return summary


COMMANDS = {
    "potential": cmd_potential,
    "simulate": cmd_simulate,
    "hydro": cmd_hydro,
    "mix-exact": cmd_mix_exact,
    "mix-couple": cmd_mix_couple,
    "hit": cmd_hit,
    "sweep-mix": cmd_sweep_mix,
    "sweep-escape": cmd_sweep_escape,
    "action": cmd_action,
    "exact": cmd_exact,
}


def _versions():
    return {"rdlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def run(command: str, raw: dict, out_dir=None, threads=None) -> dict:
    cfg = validate(command, raw)
    if threads is not None:
        cfg["threads"] = threads
    root = Path(out_dir or cfg["out"] or f"rdlab-out/{command}")
    rate = build_rate(cfg)
    out = Outputs(root)
    summary = COMMANDS[command](cfg, rate, out, cfg["threads"])
    manifest = {"command": command, "config": raw, "resolved": cfg, "versions": _versions(),
                "seed": cfg["seed"], "threads": cfg["threads"], "rate": rate.to_json(),
                "outputs": list(out.files), "summary": summary}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return manifest


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="rdlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)
    try:
        with args.config.open("rb") as fh:
            raw = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        print(f"rdlab: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(args.command, raw, args.out, args.threads)
    except ConfigError as exc:
        print(f"rdlab: config error at '{exc.path}': {exc}", file=sys.stderr)
        return 2
    except NotConverged as exc:
        print(f"rdlab: not converged: {exc}", file=sys.stderr)
        return 3
    except RdlabError as exc:
        print(f"rdlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"outputs": manifest["outputs"], "summary": manifest["summary"]},
                     default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
