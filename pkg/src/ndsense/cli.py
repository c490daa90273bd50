"""Command-line surface: reproducible simulation and analysis runs.

Commands read a JSON config with a versioned schema; unknown keys are
rejected so typos cannot silently change a run. All randomness flows
from one master seed through named substreams, and outputs use fixed
number formats so identical inputs give byte-identical files.

Exit codes: 1 for config/validation problems, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import chip, media, odmr, rheology, segmentation, tracker
from .seeding import substream
from .trajectory import Trajectory

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "seed", "medium", "simulate", "tracker",
             "odmr", "schedule", "analysis"}


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 1."""


def _check_keys(d: dict, allowed, path: str) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path}: {', '.join(sorted(unknown))}")


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"missing required key '{key}' in {path}")
    return d[key]


def load_config(path: str | None) -> dict:
    if path is None:
        return {"schema_version": SCHEMA_VERSION}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(cfg, _TOP_KEYS, "config")
    version = _need(cfg, "schema_version", "config")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} "
                          f"(expected {SCHEMA_VERSION})")
    return cfg


def _master_seed(cfg: dict, args) -> int:
    if args.seed is not None:
        return int(args.seed)
    if "seed" in cfg:
        return int(cfg["seed"])
    raise ConfigError("no seed: provide --seed or a 'seed' config key")


def _out_dir(args) -> str:
    out = args.out_dir or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(obj: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- simulate

def _build_schedule(cfg: dict):
    _check_keys(cfg, {"kind", "T_C", "start_C", "step_C", "dwell_s",
                      "n_levels", "base_C", "delta_C", "half_period_s",
                      "n_cycles", "tau_s"}, "schedule")
    kind = _need(cfg, "kind", "schedule")
    tau = cfg.get("tau_s", chip.DEFAULT_RAMP_TAU_S)
    if kind == "constant":
        return chip.TemperatureSchedule(steps=((0.0, _need(cfg, "T_C", "schedule")),),
                                        tau_s=tau)
    if kind == "staircase":
        return chip.staircase_schedule(
            start_C=_need(cfg, "start_C", "schedule"),
            step_C=cfg.get("step_C", 4.0),
            dwell_s=cfg.get("dwell_s", 900.0),
            n_levels=cfg.get("n_levels", 4),
            tau_s=tau)
    if kind == "alternating":
        return chip.alternating_schedule(
            base_C=_need(cfg, "base_C", "schedule"),
            delta_C=cfg.get("delta_C", 10.6),
            half_period_s=cfg.get("half_period_s", 1800.0),
            n_cycles=cfg.get("n_cycles", 2),
            tau_s=tau)
    raise ConfigError(f"unknown schedule kind: {kind}")


def _simulate_truth(cfg: dict, seed: int) -> Trajectory:
    med = _need(cfg, "medium", "config")
    sim = _need(cfg, "simulate", "config")
    _check_keys(med, {"kind", "D_nm2_per_s", "eta0_pa_s", "mu_pa_s_per_C",
                      "T_ref_C", "temperature_C", "radius_nm", "alpha",
                      "K_alpha"}, "medium")
    _check_keys(sim, {"duration_s", "dt_s", "directed"}, "simulate")
    duration = float(_need(sim, "duration_s", "simulate"))
    dt = float(sim.get("dt_s", 9.6e-3))
    if duration <= 0 or dt <= 0:
        raise ConfigError("simulate.duration_s and dt_s must be positive")
    n_steps = int(round(duration / dt))
    rng = substream(seed, "medium")
    kind = _need(med, "kind", "medium")
    meta = {"kind": kind}

    if kind == "brownian":
        d_val = float(_need(med, "D_nm2_per_s", "medium"))
        traj = media.simulate_brownian(d_val, n_steps, dt, rng)
        meta["D_nm2_per_s"] = d_val
    elif kind == "viscous":
        model = media.ViscousMediumModel(
            eta0=float(_need(med, "eta0_pa_s", "medium")),
            mu=float(_need(med, "mu_pa_s_per_C", "medium")),
            T_ref=float(_need(med, "T_ref_C", "medium")))
        temp = float(_need(med, "temperature_C", "medium"))
        radius = float(_need(med, "radius_nm", "medium"))
        eta = media.viscosity_at(model, temp)
        d_val = media.stokes_einstein_D(temp + 273.15, radius, eta)
        traj = media.simulate_brownian(d_val, n_steps, dt, rng)
        meta.update(D_nm2_per_s=d_val, temperature_C=temp, radius_nm=radius)
    elif kind == "viscoelastic":
        model = media.ViscoelasticModel(alpha=float(_need(med, "alpha", "medium")),
                                        K_alpha=float(_need(med, "K_alpha", "medium")))
        traj = media.simulate_viscoelastic(model, n_steps, dt, rng)
        meta.update(alpha=model.alpha, K_alpha=model.K_alpha)
    else:
        raise ConfigError(f"unknown medium kind: {kind}")

    for key, val in meta.items():
        traj.meta[key] = val

    directed = sim.get("directed", [])
    if directed:
        specs = []
        for i, d in enumerate(directed):
            _check_keys(d, {"start_step", "n_steps", "velocity_nm_per_s"},
                        f"simulate.directed[{i}]")
            specs.append(media.DirectedSegmentSpec(
                start=int(_need(d, "start_step", "directed")),
                duration=int(_need(d, "n_steps", "directed")),
                velocity=tuple(_need(d, "velocity_nm_per_s", "directed"))))
        traj = media.inject_directed(traj, specs)
    return traj


def _tracker_config(cfg: dict) -> tracker.TrackerConfig:
    _check_keys(cfg, {"enabled", "brightness_cps", "T_orbit_s", "R_xy_nm",
                      "w_xy_nm", "R_z_nm", "w_z_nm", "G", "gain"}, "tracker")
    return tracker.TrackerConfig(
        T_orbit=cfg.get("T_orbit_s", 9.6e-3),
        R_xy=cfg.get("R_xy_nm", 50.0),
        w_xy=cfg.get("w_xy_nm", 260.0),
        R_z=cfg.get("R_z_nm", 200.0),
        w_z=cfg.get("w_z_nm", 200.0),
        G=cfg.get("G", 0.0),
        gain=cfg.get("gain", 1.0))


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = _master_seed(cfg, args)
    out = _out_dir(args)

    truth = _simulate_truth(cfg, seed)

    tr_cfg = cfg.get("tracker", {})
    track_enabled = tr_cfg.get("enabled", False)
    tcfg = _tracker_config(tr_cfg) if tr_cfg else None

    od_cfg = cfg.get("odmr", {})
    _check_keys(od_cfg, {"enabled", "lam0", "kappa_khz_per_C",
                         "kappa_sigma_khz_per_C", "bin_s", "duration_s"},
                "odmr")
    odmr_enabled = od_cfg.get("enabled", False)

    schedule = _build_schedule(cfg["schedule"]) if "schedule" in cfg else None

    # validation done; now write outputs
    truth.to_csv(os.path.join(out, "truth.csv"))
    written = ["truth.csv"]

    if track_enabled:
        brightness = float(tr_cfg.get("brightness_cps", 2e6))
        est, diag = tracker.track(truth, tcfg, brightness,
                                  substream(seed, "tracker-photons"))
        est.to_csv(os.path.join(out, "estimate.csv"))
        diag.to_csv(os.path.join(out, "diagnostics.csv"))
        written += ["estimate.csv", "diagnostics.csv"]

    if schedule is not None:
        times, temps = chip.setpoint_series(
            schedule, dt=1.0, duration=float(cfg["simulate"]["duration_s"]))
        chip.setpoints_to_csv(times, temps,
                              os.path.join(out, "setpoints.csv"))
        events = chip.schedule_timeline(chip.DutyCycleSchedule(),
                                        duration=min(2.0, times[-1]))
        chip.timeline_to_csv(events, os.path.join(out, "timeline.csv"))
        written += ["setpoints.csv", "timeline.csv"]

    if odmr_enabled:
        kappa = float(od_cfg.get("kappa_khz_per_C",
                                 odmr.DEFAULT_KAPPA_KHZ_PER_C))
        kappa_sigma = float(od_cfg.get("kappa_sigma_khz_per_C", 0.4))
        lam0 = float(od_cfg.get("lam0", odmr.DEFAULT_PHOTON_BUDGET))
        duration = float(od_cfg.get("duration_s",
                                    cfg["simulate"]["duration_s"]))
        if schedule is not None:
            base = schedule.steps[0][1]
            times, temps = chip.setpoint_series(schedule, dt=0.4,
                                                duration=duration)

            def shift_of_t(t):
                return kappa * 1e3 * (np.interp(t, times, temps) - base)
        else:
            def shift_of_t(t):
                return 0.0
        shape = odmr.default_lineshape()
        series = odmr.simulate_shift_series(
            shape, lam0, duration, substream(seed, "odmr-photons"),
            delta_f_of_t=shift_of_t, bin_s=float(od_cfg.get("bin_s", 0.4)))
        with open(os.path.join(out, "shifts.csv"), "w", newline="") as fh:
            fh.write("t_s,delta_f_hz,sigma_hz\n")
            for t, df, sg in zip(series.times, series.delta_f, series.sigma):
                fh.write(f"{t:.6f},{df:.6f},{sg:.6f}\n")
        cal = odmr.KappaCalibration(kappa_khz_per_C=kappa,
                                    sigma_khz_per_C=kappa_sigma)
        temps_series = odmr.shift_series_to_temperature(series, cal)
        temps_series.to_csv(os.path.join(out, "temperature.csv"))
        written += ["shifts.csv", "temperature.csv"]

    print("wrote " + ", ".join(written))
    return 0


# ----------------------------------------------------------------- analyze

def _analysis_cfg(cfg: dict) -> dict:
    an = cfg.get("analysis", {})
    _check_keys(an, {"axes", "max_lag_s", "diffusion", "modulus", "psd",
                     "force", "segment", "radius_fit"}, "analysis")
    for sub, keys in (("diffusion", {"fit_range_s", "through_origin",
                                     "single_tau_s"}),
                      ("modulus", {"temperature_C", "radius_nm"}),
                      ("psd", {"window_s"}),
                      ("force", {"enabled"}),
                      ("segment", {"window_steps", "confidence",
                                   "min_length_nm"}),
                      ("radius_fit", {"temps_C"})):
        if sub in an:
            _check_keys(an[sub], keys, f"analysis.{sub}")
    return an


def _load_traj(path: str) -> Trajectory:
    try:
        return Trajectory.from_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _fit_D(traj: Trajectory, an: dict, axes: str):
    dcfg = an.get("diffusion", {})
    max_lag_s = an.get("max_lag_s", 50 * traj.dt)
    max_lag = max(int(max_lag_s / traj.dt), 2)
    lags = np.arange(1, min(max_lag, traj.points.shape[0] - 1) + 1)
    curve = rheology.msd(traj, axes=axes, lags=lags)
    fit_range = dcfg.get("fit_range_s")
    single = dcfg.get("single_tau_s")
    fit = rheology.fit_diffusion(
        curve,
        fit_range=tuple(fit_range) if fit_range else None,
        through_origin=dcfg.get("through_origin", False),
        single_tau=single)
    return curve, fit


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    an = _analysis_cfg(cfg)
    axes = an.get("axes", "xy")
    out = _out_dir(args)
    if not args.traj:
        raise ConfigError("analyze needs at least one --traj file")
    trajs = [_load_traj(p) for p in args.traj]

    summary: dict = {"n_trajectories": len(trajs)}
    traj = trajs[0]
    summary["n_points"] = int(traj.points.shape[0])
    summary["duration_s"] = round(traj.duration, 9)

    curve, dfit = _fit_D(traj, an, axes)
    curve.to_csv(os.path.join(out, "msd.csv"))
    summary["D_nm2_per_s"] = [dfit.D, dfit.sigma]
    if dfit.below_floor:
        summary["D_below_noise_floor"] = True
    try:
        afit = rheology.anomalous_exponent(curve)
        summary["alpha"] = [afit.alpha, afit.sigma]
    except ValueError:
        pass

    if "modulus" in an:
        mcfg = an["modulus"]
        t_k = float(_need(mcfg, "temperature_C", "analysis.modulus")) + 273.15
        r_nm = float(_need(mcfg, "radius_nm", "analysis.modulus"))
        mod = rheology.complex_modulus(curve, t_k, r_nm)
        mod.to_csv(os.path.join(out, "modulus.csv"))
        if "psd" in an or an.get("force", {}).get("enabled", False):
            window = an.get("psd", {}).get("window_s", 28.8)
            spec = rheology.psd(traj, axes=axes, window_s=window)
            spec.to_csv(os.path.join(out, "psd.csv"))
            summary["psd_at_40hz_nm2_per_hz"] = spec.value_at(40.0) \
                if spec.freqs.max() >= 40.0 else None
            if an.get("force", {}).get("enabled", False):
                force = rheology.external_force_spectrum(spec, mod, r_nm, t_k)
                force.to_csv(os.path.join(out, "force.csv"))
                summary["force_clipped_points"] = int(force.clipped.sum())
    elif "psd" in an:
        window = an["psd"].get("window_s", 28.8)
        spec = rheology.psd(traj, axes=axes, window_s=window)
        spec.to_csv(os.path.join(out, "psd.csv"))
        summary["psd_at_40hz_nm2_per_hz"] = spec.value_at(40.0) \
            if spec.freqs.max() >= 40.0 else None

    if "segment" in an:
        scfg = an["segment"]
        null = segmentation.gamma_null(
            N=scfg.get("window_steps", segmentation.DEFAULT_WINDOW_STEPS),
            M=len(axes),
            confidence=scfg.get("confidence", 0.95))
        labels = segmentation.segment(
            traj, null, axes=axes,
            min_length_nm=scfg.get("min_length_nm",
                                   segmentation.DEFAULT_MIN_LENGTH_NM))
        classes = segmentation.class_exponents(traj, labels, axes=axes)
        segmentation.labels_to_csv(labels,
                                   os.path.join(out, "labels.csv"))
        counts: dict = {}
        for lab in labels:
            counts[lab.cls] = counts.get(lab.cls, 0) + 1
        summary["segments"] = counts
        summary["critical_gamma"] = null.critical_gamma
        summary["class_alpha"] = {
            name: {"mean": st.mean, "sd": st.sd, "n": st.n_segments,
                   "degenerate": st.degenerate}
            for name, st in classes.classes.items()}

    if len(trajs) >= 3:
        temps = an.get("radius_fit", {}).get("temps_C")
        if temps is None:
            temps = [t.meta.get("temperature_C") for t in trajs]
        if all(t is not None for t in temps):
            med_cfg = cfg.get("medium", {})
            try:
                model = media.ViscousMediumModel(
                    eta0=float(_need(med_cfg, "eta0_pa_s", "medium")),
                    mu=float(_need(med_cfg, "mu_pa_s_per_C", "medium")),
                    T_ref=float(_need(med_cfg, "T_ref_C", "medium")))
            except ConfigError:
                model = None
            if model is not None:
                pairs = []
                sigmas = []
                for t, temp in zip(trajs, temps):
                    _, fit = _fit_D(t, an, axes)
                    pairs.append((float(temp), fit.D))
                    sigmas.append(fit.sigma if np.isfinite(fit.sigma)
                                  and fit.sigma > 0 else None)
                sig = None if any(s is None for s in sigmas) else sigmas
                rfit = rheology.fit_hydrodynamic_radius(pairs, model,
                                                        sigma_D=sig)
                summary["r_hydro_nm"] = [rfit.r_nm, rfit.sigma_nm]

    if args.temperature:
        series = odmr.TemperatureSeries.from_csv(args.temperature)
        dt_s = float(np.median(np.diff(series.times))) if series.times.size > 1 else 0.4
        taus, adev = odmr.allan_deviation(series.dT_C, dt_s)
        with open(os.path.join(out, "allan.csv"), "w", newline="") as fh:
            fh.write("tau_s,adev_C\n")
            for t, a in zip(taus, adev):
                fh.write(f"{t:.6f},{a:.6e}\n")
        if (adev > 0).any():
            summary["sensitivity_C_per_sqrtHz"] = odmr.allan_sensitivity(taus, adev)

    if args.shifts and args.setpoints:
        shift_rows = np.genfromtxt(args.shifts, delimiter=",", names=True)
        sp_rows = np.genfromtxt(args.setpoints, delimiter=",", names=True)
        levels = np.interp(shift_rows["t_s"], sp_rows["t_s"], sp_rows["T_C"])
        # snap to the nearest commanded level so scatter during ramps
        # does not smear the staircase groups
        targets = np.unique(np.round(sp_rows["T_C"], 1))
        snapped = targets[np.argmin(np.abs(levels[:, None] - targets[None, :]),
                                    axis=1)]
        cal = odmr.calibrate_kappa(snapped, shift_rows["delta_f_hz"],
                                   sigma_hz=shift_rows["sigma_hz"])
        summary["kappa_khz_per_C"] = [cal.kappa_khz_per_C, cal.sigma_khz_per_C]

    _write_json(summary, os.path.join(out, "summary.json"))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# ------------------------------------------------------- small subcommands

def cmd_crb(args) -> int:
    cfg = load_config(args.config)
    od = cfg.get("odmr", {})
    _check_keys(od, {"enabled", "lam0", "kappa_khz_per_C",
                     "kappa_sigma_khz_per_C", "bin_s", "duration_s"}, "odmr")
    lam0 = float(od.get("lam0", odmr.DEFAULT_PHOTON_BUDGET))
    kappa = float(od.get("kappa_khz_per_C", odmr.DEFAULT_KAPPA_KHZ_PER_C))
    shape = odmr.default_lineshape()
    sens = odmr.crb_temperature_sensitivity(shape, lam0, kappa)
    per_scan = odmr.shift_bound_per_scan(shape, lam0)
    out = _out_dir(args)
    result = {"sensitivity_C_per_sqrtHz": sens,
              "shift_sigma_hz_per_scan": per_scan,
              "lam0": lam0, "kappa_khz_per_C": kappa}
    _write_json(result, os.path.join(out, "crb.json"))
    print(f"CRB sensitivity: {sens:.3f} C/sqrt(Hz) "
          f"(shift bound {per_scan / 1e3:.1f} kHz/scan)")
    return 0


def cmd_allan(args) -> int:
    series = odmr.TemperatureSeries.from_csv(args.input)
    if series.times.size < 3:
        raise ConfigError("temperature series too short for Allan analysis")
    dt_s = float(np.median(np.diff(series.times)))
    taus, adev = odmr.allan_deviation(series.dT_C, dt_s)
    out = _out_dir(args)
    with open(os.path.join(out, "allan.csv"), "w", newline="") as fh:
        fh.write("tau_s,adev_C\n")
        for t, a in zip(taus, adev):
            fh.write(f"{t:.6f},{a:.6e}\n")
    if (adev > 0).all():
        sens = odmr.allan_sensitivity(taus, adev)
        print(f"Allan sensitivity: {sens:.3f} C/sqrt(Hz)")
    else:
        print("Allan deviation contains zeros (constant input?)")
    return 0


def cmd_gamma_null(args) -> int:
    null = segmentation.gamma_null(N=args.n, M=args.m,
                                   confidence=args.confidence)
    out = _out_dir(args)
    with open(os.path.join(out, "gamma_null.csv"), "w", newline="") as fh:
        fh.write("gamma,pdf\n")
        for g, p in zip(null.gammas, null.pdf):
            fh.write(f"{g:.6f},{p:.6e}\n")
    _write_json({"N": null.N, "M": null.M, "confidence": null.confidence,
                 "critical_gamma": null.critical_gamma},
                os.path.join(out, "gamma_null.json"))
    print(f"critical gamma = {null.critical_gamma:.4f} "
          f"(N={null.N}, M={null.M}, {100 * null.confidence:.0f}%)")
    return 0


# -------------------------------------------------------------------- main

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--out-dir", help="output directory (default: cwd)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ndsense",
        description="Dual-mode nanodiamond sensing simulator and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate truth/tracking/ODMR runs")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="MSD, moduli, spectra, segmentation")
    _add_common(p)
    p.add_argument("--traj", action="append",
                   help="trajectory CSV (repeatable)")
    p.add_argument("--temperature", help="temperature CSV for Allan analysis")
    p.add_argument("--shifts", help="fitted shift CSV for kappa calibration")
    p.add_argument("--setpoints", help="setpoint CSV for kappa calibration")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("crb", help="thermometry sensitivity bound")
    _add_common(p)
    p.set_defaults(func=cmd_crb)

    p = sub.add_parser("allan", help="Allan deviation of a temperature CSV")
    _add_common(p)
    p.add_argument("--input", required=True, help="temperature CSV")
    p.set_defaults(func=cmd_allan)

    p = sub.add_parser("gamma-null", help="directionality-ratio null")
    _add_common(p)
    p.add_argument("--n", type=int, default=75, help="steps per window")
    p.add_argument("--m", type=int, default=2, help="dimensions")
    p.add_argument("--confidence", type=float, default=0.95)
    p.set_defaults(func=cmd_gamma_null)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
