"""Experiment runner: configuration parsing, studies, CSV emission.

Configuration lives in a flat JSON document; command-line flags mirror the
keys one-to-one and override file values.  Every study writes CSV files
with deterministic row order and 17-significant-digit floats, so reruns
with the same configuration are bitwise identical regardless of the
worker-thread count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .driver import PathError, StrainPath, cyclic_path, monotonic_path
from .randfield import ConfigError, MaterialLaw
from .solver import SolverSettings
from .stats import (
    DEFAULT_SYS_WINDOW,
    DEFAULT_VAR_WINDOW,
    ErrorTable,
    McEnsemble,
    fit_scaling_slopes,
    monte_carlo,
    systematic_error_study,
    systematic_reference,
    variance_reference,
)

EXPERIMENTS = ("cyclic", "monotonic", "error-study", "variance-study", "custom-path")

THREADS_ENV = "RVE_PLAST_THREADS"

TRAJECTORY_COLUMNS = ("sample_id", "l", "t", "F11", "s1", "s2", "s3", "R1", "R2", "R3", "energy")
ERROR_COLUMNS = ("L", "l", "t", "F11", "alpha", "e_sys", "variance", "reference_scaling")
SLOPE_COLUMNS = ("quantity", "t_label", "window", "slope")

# per-experiment defaults for the keys that vary between studies
_PRESETS = {
    "cyclic": {"L": 4, "M": 5},
    "monotonic": {"L": 30, "M": 40},
    "error-study": {"M": 25, "L_max": 42, "L_list": [6, 10, 14, 18, 22, 26, 30, 34, 38, 42]},
    "variance-study": {"M": 25, "L_max": 22, "L_list": [6, 10, 14, 18, 22]},
    "custom-path": {"L": 4, "M": 1},
}


@dataclass
class RunConfig:
    experiment: str
    L: int = 4
    L_list: list[int] | None = None
    L_max: int = 42
    M: int = 5
    N: int = 50
    T: float = 1.0
    seed: int = 20240
    amplitude: float = 3e-3
    frequency: float = 8.0
    rate: float = 0.0034
    a_lo: float = 1.0e6
    a_hi: float = 2.0e6
    h_lo: float = 1.25e6
    h_hi: float = 2.0e6
    sy_lo: float = 0.9e3
    sy_hi: float = 1.1e3
    tol_increment: float = 1e-10
    tol_energy: float = 1e-12
    tol_residual: float = 1e-9
    max_outer: int = 500
    sys_window: list[int] | None = None
    var_window: list[int] | None = None
    path: list[list[float]] | None = None  # custom-path rows (t, F11, F12, F22)
    out: str = "."
    threads: int = 0  # 0: take RVE_PLAST_THREADS or 1

    def law(self) -> MaterialLaw:
        return MaterialLaw((self.a_lo, self.a_hi), (self.h_lo, self.h_hi), (self.sy_lo, self.sy_hi))

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            tol_increment=self.tol_increment,
            tol_energy=self.tol_energy,
            tol_residual=self.tol_residual,
            max_outer=self.max_outer,
        )

    def effective_threads(self) -> int:
        if self.threads > 0:
            return self.threads
        env = os.environ.get(THREADS_ENV, "")
        return int(env) if env.strip() else 1

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for key in ("L", "L_max", "M", "N", "max_outer"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1, got {getattr(self, key)}")
        if self.T <= 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.L_list is not None:
            bad = [L for L in self.L_list if not 2 <= L <= self.L_max]
            if bad:
                raise ConfigError(f"L_list entries must lie in [2, L_max]: {bad}")
        self.law()  # validates the intervals
        self.solver_settings()
        if self.experiment == "custom-path" and not self.path:
            raise ConfigError("custom-path needs 'path' rows [t, F11, F12, F22] in the config")


def _config_keys() -> set[str]:
    return {f.name for f in fields(RunConfig)}


def parse_config(argv=None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus overriding flags."""
    parser = build_arg_parser()
    args = parser.parse_args(argv)

    values: dict = {"experiment": args.experiment}
    values.update(_PRESETS[args.experiment])
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config file {args.config}: {err}") from err
        unknown = set(raw) - _config_keys()
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    for key in _config_keys():
        flag_value = getattr(args, key, None)
        if flag_value is not None and key != "experiment":
            values[key] = flag_value

    config = RunConfig(**values)
    config.validate()
    return config


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rve-plast",
        description="Elastoplastic spring-network RVE studies (cyclic, monotonic, error scaling)",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON config file; flags override file values")
    parser.add_argument("--L", type=int, dest="L", help="cell side length")
    parser.add_argument("--L-list", type=_int_list, dest="L_list", help="comma-separated L values")
    parser.add_argument("--Lmax", type=int, dest="L_max", help="largest (reference) cell side")
    parser.add_argument("--M", type=int, dest="M", help="number of Monte-Carlo samples")
    parser.add_argument("--N", type=int, dest="N", help="number of time steps")
    parser.add_argument("--T", type=float, dest="T", help="final time")
    parser.add_argument("--seed", type=int, dest="seed", help="master seed")
    parser.add_argument("--amplitude", type=float, dest="amplitude")
    parser.add_argument("--frequency", type=float, dest="frequency")
    parser.add_argument("--rate", type=float, dest="rate")
    parser.add_argument("--a-lo", type=float, dest="a_lo")
    parser.add_argument("--a-hi", type=float, dest="a_hi")
    parser.add_argument("--h-lo", type=float, dest="h_lo")
    parser.add_argument("--h-hi", type=float, dest="h_hi")
    parser.add_argument("--sy-lo", type=float, dest="sy_lo")
    parser.add_argument("--sy-hi", type=float, dest="sy_hi")
    parser.add_argument("--tol-increment", type=float, dest="tol_increment")
    parser.add_argument("--tol-energy", type=float, dest="tol_energy")
    parser.add_argument("--tol-residual", type=float, dest="tol_residual")
    parser.add_argument("--max-outer", type=int, dest="max_outer")
    parser.add_argument("--sys-window", type=_int_list, dest="sys_window")
    parser.add_argument("--var-window", type=_int_list, dest="var_window")
    parser.add_argument("--out", dest="out", help="output directory")
    parser.add_argument(
        "--threads", type=int, dest="threads", help=f"worker threads (default ${THREADS_ENV} or 1)"
    )
    return parser


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_trajectories(path: Path, ensemble: McEnsemble) -> None:
    rows = []
    for i in range(ensemble.M):
        for l in range(ensemble.times.size):
            rows.append(
                (
                    i + 1,
                    l,
                    ensemble.times[l],
                    ensemble.f11[l],
                    *ensemble.stresses[i, l],
                    *ensemble.fractions[i, l],
                    ensemble.energies[i, l],
                )
            )
    _write_csv(path, TRAJECTORY_COLUMNS, rows)


def read_trajectories(path: Path) -> dict[str, np.ndarray]:
    """Re-read a trajectory CSV into column arrays (exact round trip)."""
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        data = list(zip(*[row for row in reader]))
    out = {}
    for name, col in zip(header, data):
        conv = int if name in ("sample_id", "l") else float
        out[name] = np.array([conv(v) for v in col])
    return out


def write_error_table(path: Path, table: ErrorTable, experiment: str) -> None:
    """Error-study rows; the reference column is the anchored rate curve.

    For error studies it overlays L^-2 (ln L)^2 on e_sys, for variance
    studies L^-2 on the variance, each anchored at the smallest L.
    """
    Ls = [L for L in sorted(set(table.Ls) | {table.L_max})]
    fit_Ls = np.array([L for L in Ls if L != table.L_max], dtype=float)
    rows = []
    n_times = table.times.size
    for l in range(n_times):
        for alpha in range(3):
            if experiment == "variance-study":
                anchor = table.variance[Ls[0]][l, alpha]
                ref = dict(zip(fit_Ls, variance_reference(fit_Ls, anchor)))
            else:
                anchor = table.e_sys[Ls[0]][l, alpha]
                ref = dict(zip(fit_Ls, systematic_reference(fit_Ls, anchor)))
            for L in Ls:
                rows.append(
                    (
                        L,
                        l,
                        table.times[l],
                        table.f11[l],
                        alpha + 1,
                        table.e_sys[L][l, alpha],
                        table.variance[L][l, alpha],
                        ref.get(L, 0.0),
                    )
                )
    # deterministic order: by L, then l, then alpha
    rows.sort(key=lambda row: (row[0], row[1], row[4]))
    _write_csv(path, ERROR_COLUMNS, rows)


def write_slopes(path: Path, slopes) -> None:
    rows = [
        (fit.quantity, fit.t_label, " ".join(str(L) for L in fit.window), fit.slope)
        for fit in slopes
    ]
    _write_csv(path, SLOPE_COLUMNS, rows)


def _make_path(config: RunConfig) -> StrainPath:
    if config.experiment == "cyclic":
        return cyclic_path(config.amplitude, config.frequency, config.N, config.T)
    if config.experiment == "custom-path":
        rows = np.asarray(config.path, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 4:
            raise ConfigError("path rows must be [t, F11, F12, F22]")
        return StrainPath(rows[:, 0], rows[:, 1:])
    return monotonic_path(config.rate, config.N, config.T)


def run(config: RunConfig) -> int:
    """Execute the configured study and write its CSV files."""
    config.validate()
    out_dir = Path(config.out)
    law = config.law()
    settings = config.solver_settings()
    threads = config.effective_threads()
    path = _make_path(config)

    if config.experiment in ("cyclic", "monotonic", "custom-path"):
        ensemble = monte_carlo(law, config.L, config.M, config.seed, path, settings, threads)
        out_file = out_dir / f"{config.experiment}_trajectories.csv"
        write_trajectories(out_file, ensemble)
        final = ensemble.mean[-1]
        print(
            f"{config.experiment}: L={config.L} M={config.M} N={config.N} "
            f"final mean stress s=({final[0]:.6g}, {final[1]:.6g}, {final[2]:.6g}) "
            f"max residual {ensemble.max_residual:.3e} -> {out_file}"
        )
        return 0

    Ls = config.L_list or _PRESETS[config.experiment]["L_list"]
    L_max = config.L_max if config.experiment == "error-study" else max(Ls)
    table = systematic_error_study(law, Ls, L_max, config.M, config.seed, path, settings, threads)
    sys_window = tuple(config.sys_window) if config.sys_window else DEFAULT_SYS_WINDOW
    var_window = tuple(config.var_window) if config.var_window else DEFAULT_VAR_WINDOW
    slopes = fit_scaling_slopes(table, sys_window, var_window)
    out_file = out_dir / f"{config.experiment}.csv"
    slope_file = out_dir / f"{config.experiment}_slopes.csv"
    write_error_table(out_file, table, config.experiment)
    write_slopes(slope_file, slopes)
    summary = ", ".join(f"{f.quantity}@{f.t_label}={f.slope:+.3f}" for f in slopes)
    print(
        f"{config.experiment}: Ls={list(table.Ls)} Lmax={table.L_max} M={config.M} "
        f"slopes [{summary}] max residual {table.max_residual:.3e} -> {out_file}"
    )
    return 0


def main(argv=None) -> int:
    try:
        config = parse_config(argv)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except PathError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 1
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
