"""Config-driven experiment runner.

Usage: kuramoto-damping <subcommand> --config path.json [--out dir]

Subcommands: stability | kc-scan | linear | witness | nonlinear | finite-n |
compare.  Every experiment reads a strict JSON config (unknown keys are
rejected), writes deterministically named CSV/JSON artifacts into the output
directory, and drops a config.json sidecar carrying the resolved config and a
format-version field.  Time series go to CSV (floats printed with 17
significant digits so reruns are byte-identical), reports to JSON.

Exit codes: 0 success, 2 config/validation error (no artifacts), 3 numeric
failure (diagnostic error.json written when possible).  The environment
variable KD_THREADS caps worker parallelism for parameter scans.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dispersion, finiten, spectral, volterra
from .distributions import (
    bi_cauchy,
    build_grid,
    distribution_from_config,
    distribution_to_config,
)
from .exceptions import ConfigError, KuramotoDampingError, MismatchedConfigs

FORMAT_VERSION = 1

EXPERIMENTS = ("stability", "kc-scan", "linear", "witness", "nonlinear", "finite-n", "compare")


# ---------------------------------------------------------------------------
# config validation


def _check_keys(obj, required, optional, context):
    if not isinstance(obj, dict):
        raise ConfigError(f"{context}: expected an object, got {type(obj).__name__}")
    keys = set(obj)
    missing = set(required) - keys
    unknown = keys - set(required) - set(optional)
    if missing:
        raise ConfigError(f"{context}: missing keys {sorted(missing)}")
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")


def _positive(obj, key, context):
    val = obj[key]
    if not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0:
        raise ConfigError(f"{context}: {key} must be a positive number, got {val!r}")
    return float(val)


def _nonnegative(obj, key, context):
    val = obj[key]
    if not isinstance(val, (int, float)) or isinstance(val, bool) or val < 0:
        raise ConfigError(f"{context}: {key} must be a nonnegative number, got {val!r}")
    return float(val)


def _distribution(obj, context):
    try:
        return distribution_from_config(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{context}: bad distribution spec: {exc}") from exc


def _mode_profile(spec, context):
    """One initial-perturbation mode: h_k(omega) from its JSON description."""
    _check_keys(spec, {"mode", "kind"}, {"value", "amplitude", "width", "center", "phase_delay"}, context)
    kind = spec["kind"]
    mode = spec["mode"]
    if not isinstance(mode, int) or mode < 1:
        raise ConfigError(f"{context}: mode must be an integer >= 1, got {mode!r}")
    if kind == "constant":
        raw = spec.get("value", 1.0)
        value = complex(raw[0], raw[1]) if isinstance(raw, (list, tuple)) else complex(raw)
        return mode, lambda w: np.full(np.shape(w), value, dtype=complex)
    if kind == "gaussian":
        amp = float(spec.get("amplitude", 1.0))
        width = _positive(spec, "width", context) if "width" in spec else 1.0
        center = float(spec.get("center", 0.0))
        return mode, lambda w: amp * np.exp(-0.5 * ((np.asarray(w) - center) / width) ** 2) + 0j
    raise ConfigError(f"{context}: unknown mode kind {kind!r}")


def _perturbation_modes(obj, context):
    _check_keys(obj, {"modes"}, set(), context)
    if not isinstance(obj["modes"], list) or not obj["modes"]:
        raise ConfigError(f"{context}: modes must be a non-empty list")
    modes = {}
    for i, spec in enumerate(obj["modes"]):
        mode, profile = _mode_profile(spec, f"{context}.modes[{i}]")
        if mode in modes:
            raise ConfigError(f"{context}: duplicate mode {mode}")
        modes[mode] = profile
    return modes


# ---------------------------------------------------------------------------
# artifact writers


def _fmt(x):
    return f"{x:.17g}"


def _write_csv(path, header, columns):
    rows = zip(*columns)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_sidecar(outdir, experiment, config):
    _write_json(
        outdir / "config.json",
        {"formatVersion": FORMAT_VERSION, "experiment": experiment, "config": config},
    )


def _order_parameter_csv(path, times, values, weight_order):
    weighted = (1.0 + times) ** weight_order * np.abs(values)
    _write_csv(
        path,
        ["t", "Re(R)", "Im(R)", "abs(R)", f"(1+t)^{weight_order}*abs(R)"],
        [
            [float(t) for t in times],
            [float(v) for v in values.real],
            [float(v) for v in values.imag],
            [float(v) for v in np.abs(values)],
            [float(v) for v in weighted],
        ],
    )


def _max_workers():
    raw = os.environ.get("KD_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"KD_THREADS must be an integer, got {raw!r}")
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# experiments


def run_stability(config, outdir):
    _check_keys(config, {"distribution", "coupling"}, {"boundary_points"}, "stability")
    dist = _distribution(config["distribution"], "stability")
    coupling = _nonnegative(config, "coupling", "stability")
    points = int(config.get("boundary_points", 2001))
    report = dispersion.analyze_stability(dist, coupling, boundary_points=points)
    payload = {"formatVersion": FORMAT_VERSION, "config": config}
    payload.update(report.to_json_dict())
    _write_json(outdir / "stability_report.json", payload)
    return {"verdict": report.verdict}


def run_kc_scan(config, outdir):
    _check_keys(config, {"parameter", "values"}, {"delta", "omega0"}, "kc-scan")
    parameter = config["parameter"]
    values = config["values"]
    if parameter not in ("omega0", "delta"):
        raise ConfigError(f"kc-scan: parameter must be 'omega0' or 'delta', got {parameter!r}")
    if not isinstance(values, list) or not values:
        raise ConfigError("kc-scan: values must be a non-empty list")

    def family(value):
        if parameter == "omega0":
            return bi_cauchy(float(config.get("delta", 1.0)), float(value))
        return bi_cauchy(float(value), float(config.get("omega0", 0.0)))

    def solve_one(value):
        kc, crit = dispersion.critical_coupling(family(value))
        return float(value), kc, crit

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        rows = list(pool.map(solve_one, values))

    _write_csv(
        outdir / "kc_scan.csv",
        ["param", "K_c", "critical_omegas"],
        [
            [r[0] for r in rows],
            [float(r[1]) for r in rows],
            [";".join(_fmt(float(w)) for w in r[2]) for r in rows],
        ],
    )
    return {"rows": len(rows)}


def _linear_source(config, dist, context):
    spec = config["input"]
    _check_keys(
        spec, {"type"}, {"exponent", "modulation", "profile", "path", "grid_nodes", "mass_threshold"},
        f"{context}.input",
    )
    kind = spec["type"]
    if kind == "poly_decay":
        exponent = float(spec.get("exponent", 4.0))
        modulation = spec.get("modulation", "none")
        if modulation not in ("none", "cos", "exp_i"):
            raise ConfigError(f"{context}: unknown modulation {modulation!r}")

        def source(t):
            t = np.asarray(t, dtype=float)
            base = (1.0 + t) ** -exponent
            if modulation == "cos":
                return base * np.cos(t) + 0j
            if modulation == "exp_i":
                return base * np.exp(1j * t)
            return base + 0j

        return source
    if kind == "mode":
        mode, profile = _mode_profile({"mode": 1, **spec["profile"]}, f"{context}.input.profile")
        grid = build_grid(
            dist,
            int(spec.get("grid_nodes", 2048)),
            float(spec.get("mass_threshold", 1.0 - 1e-8)),
        )
        return volterra.mode_input_from_grid(grid, profile)
    if kind == "csv":
        path = Path(spec["path"])
        if not path.exists():
            raise ConfigError(f"{context}: input CSV {path} does not exist")
        data = np.genfromtxt(path, delimiter=",", names=True)
        t_ref = data["t"]
        f_ref = data["ReF"] + 1j * data["ImF"]

        def source(t):
            t = np.asarray(t, dtype=float)
            return np.interp(t, t_ref, f_ref.real) + 1j * np.interp(t, t_ref, f_ref.imag)

        return source
    raise ConfigError(f"{context}: unknown input type {kind!r}")


def run_linear(config, outdir):
    _check_keys(
        config,
        {"distribution", "coupling", "input", "dt", "horizon"},
        {"weight_order", "fit_window"},
        "linear",
    )
    dist = _distribution(config["distribution"], "linear")
    coupling = _nonnegative(config, "coupling", "linear")
    dt = _positive(config, "dt", "linear")
    horizon = _positive(config, "horizon", "linear")
    weight_order = int(config.get("weight_order", 4))
    source = _linear_source(config, dist, "linear")

    problem = volterra.VolterraProblem(
        volterra.kuramoto_kernel(dist, coupling), source, dt, horizon
    )
    solution = volterra.solve(problem)
    _order_parameter_csv(outdir / "R.csv", solution.times, solution.values, weight_order)

    window = tuple(config.get("fit_window", (0.25 * horizon, 0.9 * horizon)))
    noisy = False
    try:
        fit = volterra.fit_decay(solution, window=window)
    except KuramotoDampingError as exc:
        fit = getattr(exc, "fit", None)
        noisy = True
    payload = {
        "formatVersion": FORMAT_VERSION,
        "config": config,
        "windowTooNoisy": noisy,
        "fit": None
        if fit is None
        else {
            "exponent": fit.exponent,
            "amplitude": fit.amplitude,
            "window": list(fit.window),
            "residual": fit.residual,
        },
    }
    _write_json(outdir / "decay_fit.json", payload)
    return {"noisy": noisy}


def run_witness(config, outdir):
    _check_keys(
        config, {"distribution", "coupling", "dt", "horizon"}, {"amplitude"}, "witness"
    )
    dist = _distribution(config["distribution"], "witness")
    coupling = _nonnegative(config, "coupling", "witness")
    dt = _positive(config, "dt", "witness")
    horizon = _positive(config, "horizon", "witness")
    amplitude = float(config.get("amplitude", 1.0))

    source, rate = volterra.instability_witness(dist, coupling, amplitude)
    problem = volterra.VolterraProblem(
        volterra.kuramoto_kernel(dist, coupling), source, dt, horizon
    )
    solution = volterra.solve(problem)
    f_vals = np.asarray(source(solution.times))
    _write_csv(
        outdir / "witness_F.csv",
        ["t", "Re(F)", "Im(F)"],
        [
            [float(t) for t in solution.times],
            [float(v) for v in f_vals.real],
            [float(v) for v in f_vals.imag],
        ],
    )
    _order_parameter_csv(outdir / "R.csv", solution.times, solution.values, 0)

    predicted = np.abs(amplitude) * np.exp(rate * solution.times)
    deviation = float(np.max(np.abs(np.abs(solution.values) / predicted - 1.0)))
    payload = {
        "formatVersion": FORMAT_VERSION,
        "config": config,
        "predictedRate": rate,
        "maxRelativeDeviation": deviation,
        "verdict": "GrowthConfirmed" if deviation <= 0.02 else "GrowthMismatch",
    }
    _write_json(outdir / "witness_report.json", payload)
    return {"verdict": payload["verdict"]}


def run_nonlinear(config, outdir):
    _check_keys(
        config,
        {"distribution", "coupling", "epsilon", "k_max", "grid_nodes", "dt", "horizon",
         "initial_perturbation"},
        {"output_every", "weight_order", "snapshot_times", "mass_threshold"},
        "nonlinear",
    )
    dist = _distribution(config["distribution"], "nonlinear")
    coupling = _nonnegative(config, "coupling", "nonlinear")
    epsilon = _positive(config, "epsilon", "nonlinear")
    dt = _positive(config, "dt", "nonlinear")
    horizon = _positive(config, "horizon", "nonlinear")
    k_max = int(config["k_max"])
    nodes = int(config["grid_nodes"])
    output_every = int(config.get("output_every", 10))
    weight_order = int(config.get("weight_order", 4))
    snapshot_times = tuple(config.get("snapshot_times", ()))
    modes = _perturbation_modes(config["initial_perturbation"], "nonlinear.initial_perturbation")

    grid = build_grid(dist, nodes, float(config.get("mass_threshold", 1.0 - 1e-8)))
    state = spectral.initialize(dist, grid, k_max, epsilon, coupling, modes=modes)
    result = spectral.run(
        state,
        dt,
        horizon,
        output_every=output_every,
        weight_order=weight_order,
        snapshot_times=snapshot_times,
    )

    _order_parameter_csv(outdir / "R.csv", result.times, result.order_params, weight_order)
    _write_csv(
        outdir / "diagnostics.csv",
        ["t", f"(1+t)^{weight_order}*abs(R)", f"H{weight_order}/(1+t)", f"H{weight_order - 2}"],
        [
            [float(t) for t in result.times],
            [float(v) for v in result.diag_weighted],
            [float(v) for v in result.diag_norm_over_time],
            [float(v) for v in result.diag_norm_low],
        ],
    )

    initial_norm = state.initial_weighted_norm
    scattering = {
        "formatVersion": FORMAT_VERSION,
        "config": config,
        "recurrenceTime": result.recurrence_time,
        "initialWeightedNorm": initial_norm if np.isfinite(initial_norm) else None,
    }
    if len(result.snapshots) >= 3:
        report = spectral.scattering_profile(result, weight_order)
        scattering.update(
            {
                "snapshotTimes": report.snapshot_times,
                "pairwiseNorms": report.pairwise_norms,
                "converged": report.converged,
                "verdict": report.verdict,
            }
        )
    else:
        scattering.update({"verdict": "NotEvaluated", "converged": None})
    _write_json(outdir / "scattering.json", scattering)
    return {"recurrenceTime": result.recurrence_time}


def run_finite_n(config, outdir):
    _check_keys(
        config,
        {"distribution", "oscillators", "coupling", "epsilon", "dt", "horizon",
         "initial_perturbation"},
        {"sampling", "seed", "output_every", "continuum_dir"},
        "finite-n",
    )
    dist = _distribution(config["distribution"], "finite-n")
    count = int(config["oscillators"])
    coupling = _nonnegative(config, "coupling", "finite-n")
    epsilon = _nonnegative(config, "epsilon", "finite-n")
    dt = _positive(config, "dt", "finite-n")
    horizon = _positive(config, "horizon", "finite-n")
    sampling = config.get("sampling", "quantile")
    seed = config.get("seed")
    output_every = int(config.get("output_every", 10))
    modes = _perturbation_modes(config["initial_perturbation"], "finite-n.initial_perturbation")

    state = finiten.sample_oscillators(
        dist, count, coupling, epsilon=epsilon, modes=modes, sampling=sampling, seed=seed
    )
    times, orders = finiten.simulate(state, dt, horizon, output_every=output_every)
    _write_csv(
        outdir / "zn.csv",
        ["t", "Re(Z)", "Im(Z)", "abs(Z)"],
        [
            [float(t) for t in times],
            [float(v) for v in orders.real],
            [float(v) for v in orders.imag],
            [float(v) for v in np.abs(orders)],
        ],
    )
    summary = {"oscillators": count}
    if "continuum_dir" in config:
        cont_cfg, cont = _load_run(config["continuum_dir"], "nonlinear", "R.csv", "finite-n")
        for key in ("distribution", "coupling", "epsilon", "horizon"):
            if cont_cfg.get(key) != config.get(key):
                raise MismatchedConfigs(
                    f"finite-n: continuum run disagrees on {key}: "
                    f"{cont_cfg.get(key)!r} vs {config.get(key)!r}"
                )
        sup = _comparison_artifacts(
            outdir, config, epsilon, times, orders, cont[:, 0], cont[:, 1] + 1j * cont[:, 2]
        )
        summary["supDifference"] = sup
    return summary


def _load_run(run_dir, experiment, csv_name, context):
    run_dir = Path(run_dir)
    sidecar = run_dir / "config.json"
    series = run_dir / csv_name
    if not sidecar.exists() or not series.exists():
        raise ConfigError(f"{context}: {run_dir} is missing {csv_name} or config.json")
    with open(sidecar) as fh:
        meta = json.load(fh)
    if meta.get("experiment") != experiment:
        raise MismatchedConfigs(
            f"{context}: {run_dir} holds a {meta.get('experiment')!r} run, expected {experiment!r}"
        )
    data = np.genfromtxt(series, delimiter=",", skip_header=1)
    return meta["config"], data


def _comparison_artifacts(outdir, config, epsilon, t_fin, z, t_cont, r):
    """Time-aligned comparison table and sup-norm summary; returns the sup."""
    r_interp = np.interp(t_fin, t_cont, r.real) + 1j * np.interp(t_fin, t_cont, r.imag)
    # finite-N sums run over exp(+i theta); the continuum order parameter
    # weighs with exp(-i theta), so compare against the conjugate
    diff = np.abs(np.conj(z) - epsilon * r_interp)
    _write_csv(
        outdir / "comparison.csv",
        ["t", "abs(Z)", "eps*abs(R)", "abs(conj(Z)-eps*R)"],
        [
            [float(t) for t in t_fin],
            [float(v) for v in np.abs(z)],
            [float(v) for v in epsilon * np.abs(r_interp)],
            [float(v) for v in diff],
        ],
    )
    payload = {
        "formatVersion": FORMAT_VERSION,
        "config": config,
        "supDifference": float(diff.max()),
        "timeRange": [float(t_fin[0]), float(t_fin[-1])],
    }
    _write_json(outdir / "summary.json", payload)
    return float(diff.max())


def run_compare(config, outdir):
    _check_keys(config, {"continuum_dir", "finite_n_dir"}, set(), "compare")
    cont_cfg, cont = _load_run(config["continuum_dir"], "nonlinear", "R.csv", "compare")
    fin_cfg, fin = _load_run(config["finite_n_dir"], "finite-n", "zn.csv", "compare")

    for key in ("distribution", "coupling", "epsilon", "horizon"):
        if cont_cfg.get(key) != fin_cfg.get(key):
            raise MismatchedConfigs(
                f"compare: runs disagree on {key}: {cont_cfg.get(key)!r} vs {fin_cfg.get(key)!r}"
            )

    sup = _comparison_artifacts(
        outdir,
        config,
        float(cont_cfg["epsilon"]),
        fin[:, 0],
        fin[:, 1] + 1j * fin[:, 2],
        cont[:, 0],
        cont[:, 1] + 1j * cont[:, 2],
    )
    return {"supDifference": sup}


RUNNERS = {
    "stability": run_stability,
    "kc-scan": run_kc_scan,
    "linear": run_linear,
    "witness": run_witness,
    "nonlinear": run_nonlinear,
    "finite-n": run_finite_n,
    "compare": run_compare,
}


# ---------------------------------------------------------------------------
# entry point


def _load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path) as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="kuramoto-damping",
        description="Experiments on damping of the incoherent state in the mean-field "
        "oscillator ensemble",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory (default out-<experiment>)")
    args = parser.parse_args(argv)

    try:
        config = _load_config(args.config)
        # Validate fully before touching the output directory.
        outdir = Path(args.out) if args.out else Path(f"out-{args.experiment}")
        runner = RUNNERS[args.experiment]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    created = not outdir.exists()
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        summary = runner(config, outdir)
    except (ConfigError, MismatchedConfigs) as exc:
        # a rejected config must leave no artifacts behind
        if created and outdir.exists() and not any(outdir.iterdir()):
            outdir.rmdir()
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KuramotoDampingError as exc:
        payload = {
            "formatVersion": FORMAT_VERSION,
            "experiment": args.experiment,
            "error": type(exc).__name__,
            "message": str(exc),
        }
        try:
            _write_json(outdir / "error.json", payload)
        except OSError:
            pass
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    _write_sidecar(outdir, args.experiment, config)
    print(json.dumps({"experiment": args.experiment, **summary}, sort_keys=True))
    return 0


def console_entry():
    raise SystemExit(main())


if __name__ == "__main__":
    console_entry()
