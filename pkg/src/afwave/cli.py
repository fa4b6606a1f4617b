"""Configuration, orchestration, persistence and report emission.

Runs are driven by a plain-text key-value config with dotted sections
(metric.*, grid.*, sim.*, experiment.*, output_dir, seed); see
demos/configs for worked files.  Every subcommand writes its artifacts
plus a run.json echoing the resolved configuration, and the same config
and seed always reproduce bit-identical manifests on one machine.  The
only environment override honoured is OUTPUT_DIR.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .dispersive import (
    dispersive_decay_fit,
    holder_tail_oracle,
    kernel_integral_oracle,
    remote_past_term,
)
from .evolve import (
    InstabilityError,
    SimConfig,
    Trajectory,
    evolve,
    load_trajectory,
    save_trajectory,
)
from .field import (
    ChecksumMismatchError,
    Grid3,
    StateSlice,
    gaussian_bump,
    power_tail,
    read_state,
    zero_field,
)
from .metric import MetricFamily, MetricSpec, validate_assumptions
from .morawetz import ledger, quiet_time_search
from .norms import (
    BoundInputs,
    MixedNormSpec,
    iled_ratio,
    mixed_norm,
    partition_by_l8,
    theorem_bound,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

_FAMILY_ALIASES = {
    "flat": MetricFamily.FLAT,
    "staticbump": MetricFamily.STATIC_BUMP,
    "static_bump": MetricFamily.STATIC_BUMP,
    "timemodulatedbump": MetricFamily.TIME_MODULATED_BUMP,
    "time_modulated_bump": MetricFamily.TIME_MODULATED_BUMP,
}


class ConfigError(ValueError):
    pass


def _coerce(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_text(text: str) -> dict:
    """Dotted key-value lines; '#' starts a comment; later keys win."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = _coerce(value)
    return out


@dataclass
class RunConfig:
    """Resolved configuration for one run."""

    raw: dict
    output_dir: str
    seed: int

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        out_dir = raw.get("output_dir", "afwave_out")
        seed = int(raw.get("seed", 0))
        return cls(raw=raw, output_dir=str(out_dir), seed=seed)

    def section(self, name: str) -> dict:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.raw.items() if k.startswith(prefix)}

    def metric_spec(self) -> MetricSpec:
        sec = self.section("metric")
        family = _FAMILY_ALIASES.get(str(sec.get("family", "flat")).lower())
        if family is None:
            raise ConfigError(f"unknown metric.family {sec.get('family')!r}")
        kwargs = dict(family=family)
        for key in ("epsilon", "gamma", "delta", "bump_radius",
                    "modulation_freq", "profile_decay"):
            if key in sec:
                kwargs[key] = float(sec[key])
        try:
            return MetricSpec(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"bad metric section: {exc}") from exc

    def grid(self) -> Grid3:
        sec = self.section("grid")
        try:
            return Grid3(int(sec["n"]), float(sec["dx"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad grid section: {exc}") from exc

    def sim_config(self) -> SimConfig:
        sec = self.section("sim")
        kwargs = {}
        for key in ("cfl", "t_end", "snapshot_dt", "duhamel_tau_dt"):
            if key in sec:
                kwargs[key] = float(sec[key])
        for key in ("nonlinear", "enforce_wrap_exclusion"):
            if key in sec:
                kwargs[key] = bool(sec[key])
        try:
            return SimConfig(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"bad sim section: {exc}") from exc

    def initial_state(self, grid: Grid3) -> StateSlice:
        sec = self.section("experiment")
        profile = str(sec.get("data_profile", "gaussian")).lower()
        amplitude = float(sec.get("data_amplitude", 1.0))
        radius = float(sec.get("data_radius", 1.5))
        zero = zero_field(grid)
        if profile == "zero":
            return StateSlice(zero, zero_field(grid), 0.0)
        if profile == "gaussian":
            return StateSlice(gaussian_bump(grid, amplitude, radius), zero, 0.0)
        if profile == "gaussian_velocity":
            return StateSlice(zero, gaussian_bump(grid, amplitude, radius), 0.0)
        if profile == "tail":
            return StateSlice(zero, power_tail(grid, amplitude, radius), 0.0)
        raise ConfigError(f"unknown experiment.data_profile {profile!r}")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

class OutputLock:
    """At most one writer per output directory, enforced by a lock file."""

    def __init__(self, directory: str):
        self.path = os.path.join(directory, ".lock")

    def __enter__(self):
        os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"output directory is locked by another writer ({self.path})"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        try:
            os.remove(self.path)
        except OSError:
            pass
        return False


def _write_run_json(out_dir: str, cfg: RunConfig, subcommand: str,
                    extra: dict | None = None) -> None:
    record = {
        "version": __version__,
        "subcommand": subcommand,
        "config": cfg.raw,
        "seed": cfg.seed,
        "units": {
            "length": "code units (wave speed 1)",
            "time": "code units (wave speed 1)",
            "fields": "dimensionless amplitudes; norms use node-sum quadrature",
        },
    }
    if extra:
        record.update(extra)
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_stored_trajectory(cfg: RunConfig) -> Trajectory:
    sec = cfg.section("experiment")
    path = sec.get("trajectory")
    if not path:
        raise ConfigError("experiment.trajectory must point at a simulate output dir")
    return load_trajectory(str(path))


def _parse_pairs(raw: str):
    pairs = []
    for chunk in str(raw).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        q, r = chunk.split(",")
        to_f = lambda s: np.inf if s.strip().lower() == "inf" else float(s)
        pairs.append(MixedNormSpec(to_f(q), to_f(r)))
    if not pairs:
        raise ConfigError("experiment.norms parsed to an empty list")
    return pairs


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out_dir: str) -> None:
    spec = cfg.metric_spec()
    grid = cfg.grid()
    sim = cfg.sim_config()
    initial = cfg.initial_state(grid)
    traj = evolve(initial, spec, sim)
    save_trajectory(traj, out_dir)
    _write_run_json(out_dir, cfg, "simulate",
                    {"dt": traj.dt, "snapshots": len(traj.slices)})
    print(f"simulate: {len(traj.slices)} snapshots, dt={traj.dt:.6g} -> {out_dir}")


def cmd_resume(cfg: RunConfig, out_dir: str, checkpoint: str) -> None:
    spec = cfg.metric_spec()
    grid = cfg.grid()
    sim = cfg.sim_config()
    state = read_state(checkpoint)
    if state.grid != grid:
        raise ChecksumMismatchError(
            f"checkpoint grid (n={state.grid.n}, dx={state.grid.dx}) does not "
            f"match config grid (n={grid.n}, dx={grid.dx})"
        )
    remaining = sim.t_end - state.t
    if remaining <= 1e-12:
        print("resume: checkpoint already at or past t_end; nothing to do")
        return
    # reproduce the original step lattice exactly
    from .evolve import timestep

    dt_max = timestep(spec, grid, sim.cfl)
    per_snap = max(1, math.ceil(sim.snapshot_dt / dt_max - 1e-12))
    dt = sim.snapshot_dt / per_snap
    snap_index = int(round(state.t / sim.snapshot_dt))
    rest = SimConfig(
        cfl=sim.cfl,
        t_end=remaining,
        snapshot_dt=sim.snapshot_dt,
        nonlinear=sim.nonlinear,
        duhamel_tau_dt=sim.duhamel_tau_dt,
        enforce_wrap_exclusion=False,  # checked by the original run
    )
    traj = evolve(state, spec, rest, step_origin=snap_index * per_snap, t_origin=0.0)

    import csv

    rows = []
    manifest = os.path.join(out_dir, "manifest.csv")
    if os.path.exists(manifest):
        with open(manifest, newline="") as fh:
            rows = [r for r in csv.reader(fh)][1:]
    rows = [r for r in rows if int(r[0]) < snap_index]
    for i, t in enumerate(traj.times):
        rows.append(
            [snap_index + i, repr(float(t))]
            + [repr(float(traj.scalars[k][i])) for k in ("energy", "l2", "l6", "linf")]
        )
    os.makedirs(out_dir, exist_ok=True)
    for i, slc in enumerate(traj.slices):
        from .field import write_state

        write_state(os.path.join(out_dir, f"snap_{snap_index + i:05d}.bin"), slc)
    _write_csv(manifest, ("step", "t", "energy", "l2", "l6", "linf"), rows)
    _write_run_json(out_dir, cfg, "resume",
                    {"resumed_from": checkpoint, "dt": traj.dt})
    print(f"resume: continued from t={state.t:.6g} to t={traj.t1:.6g} -> {out_dir}")


def cmd_validate_metric(cfg: RunConfig, out_dir: str) -> None:
    sec = cfg.section("experiment")
    report = validate_assumptions(
        cfg.metric_spec(),
        n_samples=int(sec.get("samples", 4096)),
        rng_seed=cfg.seed,
    )
    record = {
        "ratios": report.ratios(),
        "n_samples": report.n_samples,
        "rng_seed": report.rng_seed,
        "box_extent": report.box_extent,
        "passed": report.passed,
    }
    with open(os.path.join(out_dir, "validate.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_json(out_dir, cfg, "validate-metric")
    print(json.dumps(record["ratios"], sort_keys=True))
    print(f"validate-metric: passed={report.passed}")


def cmd_norms(cfg: RunConfig, out_dir: str) -> None:
    traj = _load_stored_trajectory(cfg)
    sec = cfg.section("experiment")
    specs = _parse_pairs(sec.get("norms", "8,8;4,12;5,10"))
    rows = []
    for ns in specs:
        value = mixed_norm(traj, ns)
        rows.append([ns.name, ns.q, ns.r, repr(value), traj.t0, traj.t1])
    _write_csv(os.path.join(out_dir, "norms.csv"),
               ("name", "q", "r", "value", "t_min", "t_max"), rows)
    _write_run_json(out_dir, cfg, "norms")
    for row in rows:
        print(f"{row[0]} = {row[3]}")


def cmd_iled(cfg: RunConfig, out_dir: str) -> None:
    traj = _load_stored_trajectory(cfg)
    spec = cfg.metric_spec()
    sec = cfg.section("experiment")
    gamma = float(sec.get("gamma", spec.gamma))
    ratio = iled_ratio(traj, spec, gamma)
    record = {"ratio": ratio, "gamma": gamma, "t1": traj.t0, "t2": traj.t1}
    with open(os.path.join(out_dir, "iled.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_json(out_dir, cfg, "iled")
    print(f"iled ratio = {ratio:.6g}")


def cmd_morawetz(cfg: RunConfig, out_dir: str) -> None:
    traj = _load_stored_trajectory(cfg)
    spec = cfg.metric_spec()
    sec = cfg.section("experiment")
    R = float(sec.get("r", sec.get("R", 4.0)))
    led = ledger(traj, spec, R)
    rows = [
        [t, m, dm, main, b, res, pos]
        for t, m, dm, main, b, res, pos in zip(
            led.times, led.m_r, led.dm_numeric, led.main_term,
            led.boundary_term, led.residual, led.positive_density,
        )
    ]
    _write_csv(
        os.path.join(out_dir, "morawetz.csv"),
        ("t", "M_R", "dM_numeric", "main_density", "boundary", "residual",
         "positive_density"),
        rows,
    )
    _write_run_json(out_dir, cfg, "morawetz",
                    {"R": R, "residual_constant": led.residual_constant})
    print(f"morawetz: R={R} residual_constant={led.residual_constant:.6g}")


def cmd_quiet(cfg: RunConfig, out_dir: str) -> None:
    traj = _load_stored_trajectory(cfg)
    spec = cfg.metric_spec()
    sim = cfg.sim_config()
    sec = cfg.section("experiment")
    T = float(sec.get("t_window", sec.get("T", 2.0)))
    interval = [float(v) for v in str(sec.get("interval", "")).split(",")]
    if len(interval) != 2:
        raise ConfigError("experiment.interval must be 'lo,hi'")
    window = sec.get("window")
    result = quiet_time_search(
        traj, spec, T, interval, sim,
        eval_window=float(window) if window is not None else None,
    )
    record = {"t0": result["t0"], "duhamel_l8": result["duhamel_l8"]}
    with open(os.path.join(out_dir, "quiet.jsonl"), "w") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    _write_run_json(out_dir, cfg, "quiet")
    print(json.dumps(record, sort_keys=True))


def cmd_remote_past(cfg: RunConfig, out_dir: str) -> None:
    traj = _load_stored_trajectory(cfg)
    spec = cfg.metric_spec()
    sim = cfg.sim_config()
    sec = cfg.section("experiment")
    t0 = float(sec["t0"])
    T = float(sec.get("t_window", sec.get("T", 2.0)))
    window = float(sec.get("window", 2.0))
    record = remote_past_term(traj, spec, t0, T, window, sim)
    with open(os.path.join(out_dir, "remote_past.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_json(out_dir, cfg, "remote-past")
    print(json.dumps(record, sort_keys=True))


def cmd_dispersive(cfg: RunConfig, out_dir: str) -> None:
    spec = cfg.metric_spec()
    grid = cfg.grid()
    sim = cfg.sim_config()
    sec = cfg.section("experiment")
    data = cfg.initial_state(grid)
    times = [float(v) for v in str(sec.get("times", "3,6,12,24")).split(",")]
    order = int(sec.get("order", 0))
    s = float(sec.get("s", 0.0))
    fit = dispersive_decay_fit(data, spec, s, times, order, config=sim)
    rows = [
        [t, v, v * math.sqrt(1.0 + (t - s) ** 2)]
        for t, v in zip(fit.times, fit.samples)
    ]
    _write_csv(os.path.join(out_dir, "dispersive.csv"),
               ("t", "sup_value", "product_with_t"), rows)
    record = {
        "exponent": fit.exponent,
        "constant": fit.constant,
        "fit_residual": fit.fit_residual,
        "data_sobolev": fit.data_sobolev,
        "data_w41": fit.data_w41,
        "derivative_order": order,
    }
    with open(os.path.join(out_dir, "dispersive.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_json(out_dir, cfg, "dispersive")
    print(f"dispersive: fitted exponent p = {fit.exponent:.4f}")


def cmd_oracle(cfg: RunConfig, out_dir: str) -> None:
    sec = cfg.section("experiment")
    kind = str(sec.get("kind", "kernel")).lower()
    if kind == "kernel":
        params = {
            "a": float(sec.get("a", 1.0)),
            "delta": float(sec.get("delta", 0.1)),
            "sign": int(sec.get("sign", 1)),
        }
        value = kernel_integral_oracle(**params)
    elif kind == "tail":
        r_max = float(sec.get("r_max", 2.0 * float(sec["t"])))
        r_count = int(sec.get("r_count", 64))
        params = {
            "t": float(sec["t"]),
            "t0": float(sec["t0"]),
            "T": float(sec.get("t_window", sec.get("T"))),
            "delta": float(sec.get("delta", 0.2)),
        }
        result = holder_tail_oracle(r_grid=np.linspace(0.0, r_max, r_count), **params)
        params.update({"r_max": r_max, "r_count": r_count})
        value = result.value
    else:
        raise ConfigError(f"unknown oracle kind {kind!r}")
    record = {"kind": kind, "params": params, "value": value}
    with open(os.path.join(out_dir, "oracle.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_json(out_dir, cfg, "oracle")
    print(json.dumps(record, sort_keys=True))


def cmd_partition(cfg: RunConfig, out_dir: str) -> None:
    traj = _load_stored_trajectory(cfg)
    sec = cfg.section("experiment")
    eta = float(sec.get("eta", 0.5))
    result = partition_by_l8(traj, eta)
    rows = [[k, t] for k, t in enumerate(result.endpoints, start=1)]
    _write_csv(os.path.join(out_dir, "partition.csv"), ("k", "t_k"), rows)
    record = {
        "M": result.M,
        "eta": eta,
        "total_l8": result.total_l8,
        "per_interval_l8": list(result.per_interval_l8),
    }
    with open(os.path.join(out_dir, "partition.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_json(out_dir, cfg, "partition")
    print(f"partition: M = {result.M}")


def cmd_bound(cfg: RunConfig, out_dir: str) -> None:
    sec = cfg.section("experiment")
    inputs = BoundInputs(
        E=float(sec.get("e", sec.get("E", 1.0))),
        A=float(sec.get("a", sec.get("A", 1.0))),
        C=float(sec.get("c", sec.get("C", 1.0))),
    )
    result = theorem_bound(inputs)
    record = {
        "E": inputs.E,
        "A": inputs.A,
        "C": inputs.C,
        "bound": None if result.overflow else result.value,
        "log_bound": result.log_value,
        "overflow": result.overflow,
    }
    with open(os.path.join(out_dir, "bound.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_json(out_dir, cfg, "bound")
    if result.overflow:
        print(f"bound overflows float64; log_bound={result.log_value!r}")
        raise _NumericalFailure("theorem bound overflow")
    print(f"{result.value!r} log_bound={result.log_value!r}")


class _NumericalFailure(RuntimeError):
    pass


_SUBCOMMANDS = {
    "simulate": cmd_simulate,
    "validate-metric": cmd_validate_metric,
    "norms": cmd_norms,
    "iled": cmd_iled,
    "morawetz": cmd_morawetz,
    "quiet": cmd_quiet,
    "remote-past": cmd_remote_past,
    "dispersive": cmd_dispersive,
    "oracle": cmd_oracle,
    "partition": cmd_partition,
    "bound": cmd_bound,
    "resume": None,  # handled separately (needs --checkpoint)
}


def run(subcommand: str, config_path: str, out_dir: str | None = None,
        threads: int | None = None, seed: int | None = None,
        checkpoint: str | None = None) -> int:
    """Execute one subcommand; returns the process exit status."""
    try:
        if subcommand not in _SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        cfg = RunConfig.load(config_path)
        if seed is not None:
            cfg.seed = seed
            cfg.raw["seed"] = seed
        if threads is not None and threads > 0:
            import numba

            numba.set_num_threads(threads)
        resolved_out = out_dir or os.environ.get("OUTPUT_DIR") or cfg.output_dir
        os.makedirs(resolved_out, exist_ok=True)
        with OutputLock(resolved_out):
            if subcommand == "resume":
                if not checkpoint:
                    raise ConfigError("resume needs --checkpoint PATH")
                cmd_resume(cfg, resolved_out, checkpoint)
            else:
                _SUBCOMMANDS[subcommand](cfg, resolved_out)
        return EXIT_OK
    except (InstabilityError, _NumericalFailure, FloatingPointError) as exc:
        diagnostic = {"error": type(exc).__name__, "message": str(exc)}
        try:
            target = out_dir or os.environ.get("OUTPUT_DIR") or "."
            with open(os.path.join(target, "failure.json"), "w") as fh:
                json.dump(diagnostic, fh, indent=2)
        except OSError:
            pass
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ChecksumMismatchError, KeyError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="afwave",
        description="numerical experiments for the quintic wave equation on "
                    "asymptotically flat backgrounds",
    )
    parser.add_argument("subcommand", choices=sorted(_SUBCOMMANDS))
    parser.add_argument("--config", required=True, help="path to the run config")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--threads", type=int, default=None,
                        help="stencil kernel threads (reductions stay deterministic)")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--checkpoint", default=None,
                        help="snapshot file to resume from (resume only)")
    args = parser.parse_args(argv)
    return run(args.subcommand, args.config, out_dir=args.out,
               threads=args.threads, seed=args.seed, checkpoint=args.checkpoint)


if __name__ == "__main__":
    sys.exit(main())
