"""Command-line interface.

Subcommands: validate, estimate-anomaly, simulate, sde.  All randomness flows
from --seed; workers default to the ROUGHWALK_THREADS environment variable.
Exit codes: 0 success, 1 model validation failure, 2 runtime numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine, sde
from .algebra import pair_indices
from .anomaly import estimate_constants
from .errors import NotIrreducible, NotStochastic, RoughwalkError
from .graph import (GraphPoint, builtin_model, cubic_cell_involution, load_model_file,
                    require_valid, step_second_moment, validate)
from .sampler import decompose_excursions, sample_trajectory, write_excursions_csv, write_trajectory_csv
from .stats import Histogram, MomentAccumulator


@dataclass
class RunConfig:
    command: str
    model_name: str | None = None
    model_file: str | None = None
    p: float | None = None
    u: float | None = None
    n_steps: int = 10_000
    n_trajectories: int = 1_000
    n_excursions: int = 100_000
    seed: int = 0
    workers: int = 1
    out: str = "."
    fmt: str = "csv"
    bins: int = 120
    hist_range: tuple[float, float] = (-6.0, 6.0)
    dump_paths: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if (self.model_name is None) == (self.model_file is None):
            raise ValueError("exactly one of --model / --model-file is required")


def _load_model(config: RunConfig):
    if config.model_file is not None:
        return load_model_file(config.model_file), None
    model = builtin_model(config.model_name, p=config.p, u=config.u)
    involution = cubic_cell_involution(model) if config.model_name == "cubic" else None
    return model, involution


def cmd_validate(config: RunConfig) -> int:
    model, involution = _load_model(config)
    report = validate(model, cell_involution=involution)
    payload = {
        "model": model.name,
        "is_stochastic": report.is_stochastic,
        "is_irreducible": report.is_irreducible,
        "has_central_symmetry": report.has_central_symmetry,
        "increment_bound_R": report.increment_bound_R,
        "messages": list(report.messages),
    }
    if config.fmt == "json":
        print(json.dumps(payload, indent=2))
    else:
        for key, value in payload.items():
            print(f"{key}: {value}")
    return 0 if report.ok else 1


def cmd_estimate_anomaly(config: RunConfig) -> int:
    model, _ = _load_model(config)
    report = estimate_constants(model, GraphPoint((0,) * model.rank, 0),
                                config.n_excursions, config.seed, workers=config.workers)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if config.fmt == "json":
        path = out / "anomaly_report.json"
        path.write_text(report.to_json())
    else:
        # appending rows lets parameter sweeps accumulate one summary table
        path = out / "anomaly_report.csv"
        fresh = not path.exists() or path.stat().st_size == 0
        with open(path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if fresh:
                writer.writerow(report.csv_row_header())
            writer.writerow(report.csv_row())
    pairs = pair_indices(model.dim_E)
    gammas = ", ".join(f"gamma[{i}][{j}] = {report.gamma[i, j]:+.6f}" for i, j in pairs)
    print(f"{model.name}: beta = {report.beta:.6f}, {gammas}")
    print(f"report written to {path}")
    return 0


def _write_headers_only(out: Path, dim: int) -> None:
    pairs = pair_indices(dim)
    for i in range(dim):
        (out / f"hist_coord_{i}.csv").write_text("bin_left,bin_right,count\r\n")
    for i, j in pairs:
        (out / f"hist_area_{i}_{j}.csv").write_text("bin_left,bin_right,count\r\n")
    (out / "moments.csv").write_text("name,coordinate,value,std_error\r\n")


def cmd_simulate(config: RunConfig) -> int:
    model, _ = _load_model(config)
    require_valid(model)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    d = model.dim_E
    pairs = pair_indices(d)
    n, R = config.n_steps, config.n_trajectories

    if n == 0 or R == 0:
        _write_headers_only(out, d)
        print(f"empty run; headers written to {out}")
        return 0

    if R < 4:
        # too few realizations for distributional outputs
        _write_headers_only(out, d)
    else:
        positions, areas = engine.sample_terminal_ensemble(model, 0, n, R, config.seed)
        coord_samples = positions / np.sqrt(n)
        acc = MomentAccumulator(d).accumulate(coord_samples)
        sigma = np.sqrt(acc.cumulants().variance)
        area_samples = areas / n

        lo, hi = config.hist_range
        summary = {"model": model.name, "n_steps": n, "n_trajectories": R, "seed": config.seed,
                   "coordinate_std_per_step": sigma.tolist()}
        for i in range(d):
            hist = Histogram(lo, hi, config.bins).accumulate(coord_samples[:, i] / sigma[i])
            hist.write_csv(out / f"hist_coord_{i}.csv")
        area_stats = {}
        for idx, (i, j) in enumerate(pairs):
            normalized = area_samples[:, idx] / (sigma[i] * sigma[j])
            hist = Histogram(lo, hi, config.bins).accumulate(normalized)
            hist.write_csv(out / f"hist_area_{i}_{j}.csv")
            area_stats[f"{i}{j}"] = {"mean": float(normalized.mean()),
                                     "std": float(normalized.std(ddof=1))}
        summary["normalized_area"] = area_stats
        acc.write_csv(out / "moments.csv")
        (out / "summary.json").write_text(json.dumps(summary, indent=2))

    if R == 1:
        traj = sample_trajectory(model, GraphPoint((0,) * model.rank, 0), n, config.seed)
        write_trajectory_csv(traj, out / "trajectory.csv")
        _, excursions, _ = decompose_excursions(traj)
        write_excursions_csv(excursions, out / "excursions.csv", d)

    print(f"simulation outputs written to {out}")
    return 0


def cmd_sde(config: RunConfig) -> int:
    """Compare the chain-driven difference scheme against the corrected Euler
    scheme (and against Euler with the anomaly term removed)."""
    model, _ = _load_model(config)
    if model.dim_E != 2:
        raise ValueError("the SDE comparison needs a 2-d model (use --model rotating)")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    report = estimate_constants(model, GraphPoint((0, 0), 0), config.n_excursions,
                                config.seed, workers=config.workers)
    if np.abs(report.v).max() > 10 * np.abs(report.std_errors["v"]).max():
        raise ValueError("the difference-scheme comparison assumes a driftless chain")
    c = report.scalar_c if report.scalar_c is not None else float(np.trace(report.C)) / 2
    sigma2 = c / report.beta
    k_eff, gamma_eff = sde.left_point_euler_constants(
        float(report.gamma[0, 1]), step_second_moment(model), sigma2)

    vf = sde.VectorField1D(f=lambda u: u, g=lambda u: np.ones_like(np.asarray(u, dtype=float)),
                           f_prime=lambda u: np.ones_like(np.asarray(u, dtype=float)),
                           g_prime=lambda u: np.zeros_like(np.asarray(u, dtype=float)))
    u0 = 1.0
    n_paths = config.n_trajectories
    discrete = sde.drive_difference_eq_ensemble(
        vf, u0, model, 0, config.n_steps, n_paths, config.seed,
        increment_scale=1.0 / np.sqrt(sigma2))
    dt = 1e-3
    euler_steps = int(round(1.0 / dt))
    euler = sde.corrected_euler_ensemble(vf, u0, euler_steps, dt, k_eff, gamma_eff,
                                         n_paths, config.seed)
    euler_nogamma = sde.corrected_euler_ensemble(vf, u0, euler_steps, dt, k_eff, 0.0,
                                                 n_paths, config.seed, base_stream=1 << 20)

    rows = []
    for name, values in [("discrete", discrete), ("corrected_euler", euler),
                         ("euler_gamma0", euler_nogamma)]:
        rows.append({
            "scheme": name,
            "n_paths": n_paths,
            "mean_U1": float(values.mean()),
            "std_U1": float(values.std(ddof=1)),
            "se_mean": float(values.std(ddof=1) / np.sqrt(n_paths)),
        })
    path = out / "sde_comparison.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    meta = {"K_eff": k_eff, "gamma_eff": gamma_eff, "sigma2_step": sigma2,
            "gamma_hat": float(report.gamma[0, 1]), "beta": report.beta, "u0": u0,
            "N": config.n_steps, "dt": dt}
    (out / "sde_summary.json").write_text(json.dumps(meta, indent=2))

    if config.dump_paths > 0:
        with open(out / "sde_paths.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path_id", "t", "U"])
            for pid in range(min(config.dump_paths, n_paths)):
                traj = sample_trajectory(model, GraphPoint((0, 0), 0), config.n_steps,
                                         config.seed, stream=pid)
                path_u = sde.drive_difference_eq(
                    vf, u0, traj.embedded / np.sqrt(sigma2), 1.0 / np.sqrt(config.n_steps))
                for step, value in enumerate(path_u):
                    writer.writerow([pid, step / config.n_steps, repr(float(value))])

    for row in rows:
        print(f"{row['scheme']}: mean U_1 = {row['mean_U1']:.5f} "
              f"(se {row['se_mean']:.5f}), std = {row['std_U1']:.5f}")
    print(f"comparison written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roughwalk",
                                     description="Markov chains on periodic graphs and their area anomaly")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [("validate", "check a model description"),
                           ("estimate-anomaly", "Monte Carlo estimate of the area anomaly"),
                           ("simulate", "trajectory/histogram/statistics outputs"),
                           ("sde", "difference scheme vs corrected Euler comparison")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model", help="built-in model name (rotating, cubic)")
        p.add_argument("--model-file", help="path to a JSON model description")
        p.add_argument("--p", type=float, default=None, help="rotating-model parameter")
        p.add_argument("--u", type=float, default=None, help="cubic-model parameter")
        p.add_argument("--steps", type=int, default=10_000)
        p.add_argument("--trajectories", type=int, default=1_000)
        p.add_argument("--excursions", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int,
                       default=int(os.environ.get("ROUGHWALK_THREADS", "1")))
        p.add_argument("--out", default=".")
        p.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
        p.add_argument("--bins", type=int, default=120)
        p.add_argument("--hist-range", type=float, nargs=2, default=(-6.0, 6.0))
        p.add_argument("--dump-paths", type=int, default=0,
                       help="number of full SDE paths to dump (sde command)")
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        model_name=args.model,
        model_file=args.model_file,
        p=args.p,
        u=args.u,
        n_steps=args.steps,
        n_trajectories=args.trajectories,
        n_excursions=args.excursions,
        seed=args.seed,
        workers=args.workers,
        out=args.out,
        fmt=args.fmt,
        bins=args.bins,
        hist_range=tuple(args.hist_range),
        dump_paths=args.dump_paths,
    )


_COMMANDS = {
    "validate": cmd_validate,
    "estimate-anomaly": cmd_estimate_anomaly,
    "simulate": cmd_simulate,
    "sde": cmd_sde,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        return _COMMANDS[config.command](config)
    except (NotStochastic, NotIrreducible) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (RoughwalkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
