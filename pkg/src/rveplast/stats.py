"""Monte-Carlo averaging of stress trajectories and error-scaling studies.

Sample runs are embarrassingly parallel; reductions always happen in
ascending sample-id order, so results are bitwise independent of the
worker count.  The error study follows the nested-restriction procedure:
realizations are drawn once on the largest box and restricted to each
smaller cell, which the position-keyed sampling makes exact.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .driver import PathError, StrainPath, run_path
from .lattice import K
from .randfield import MaterialLaw, Realization, restrict, sample
from .solver import SolverSettings


@dataclass(frozen=True)
class McEnsemble:
    """Per-sample stress trajectories of M independent realizations."""

    L: int
    M: int
    seed: int
    times: np.ndarray  # shape (N+1,)
    f11: np.ndarray  # shape (N+1,)
    stresses: np.ndarray  # shape (M, N+1, K)
    fractions: np.ndarray  # shape (M, N+1, K)
    energies: np.ndarray  # shape (M, N+1)
    mean: np.ndarray  # shape (N+1, K): arithmetic mean over samples
    max_residual: float  # worst optimality residual over all increments
    max_residual_rel: float  # worst residual / (1 + max|f|) over all increments
    energy_monotone: bool  # every solve's energy sequence was nonincreasing

    def variance(self) -> np.ndarray:
        """Biased (divide-by-M) sample variance per time step and component."""
        return np.mean((self.stresses - self.mean) ** 2, axis=0)


def _trajectory_arrays(records):
    stresses = np.array([rec.s for _, rec in records])
    fractions = np.array([rec.fractions for _, rec in records])
    energies = np.array([rec.energy for _, rec in records])
    return stresses, fractions, energies


def _run_one(real: Realization, path: StrainPath, settings: SolverSettings | None):
    reports = []
    try:
        records = run_path(real, path, settings=settings, reports=reports)
    except PathError as err:
        raise PathError(f"sample {real.sample_id}: {err}", err.step, err.cause) from err
    residual = max((rep.residual for rep in reports), default=0.0)
    residual_rel = max((rep.residual / (1.0 + rep.load_norm) for rep in reports), default=0.0)
    monotone = all(
        b <= a for rep in reports for a, b in zip(rep.energies, rep.energies[1:])
    )
    return (*_trajectory_arrays(records), residual, residual_rel, monotone)


def _ensemble_from_realizations(
    reals: list[Realization],
    path: StrainPath,
    seed: int,
    settings: SolverSettings | None,
    threads: int,
) -> McEnsemble:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _run_one(r, path, settings), reals))
    else:
        results = [_run_one(r, path, settings) for r in reals]
    stresses = np.array([res[0] for res in results])
    fractions = np.array([res[1] for res in results])
    energies = np.array([res[2] for res in results])
    return McEnsemble(
        L=reals[0].L,
        M=len(reals),
        seed=seed,
        times=path.times.copy(),
        f11=path.tensors[:, 0].copy(),
        stresses=stresses,
        fractions=fractions,
        energies=energies,
        mean=stresses.mean(axis=0),
        max_residual=max(res[3] for res in results),
        max_residual_rel=max(res[4] for res in results),
        energy_monotone=all(res[5] for res in results),
    )


def monte_carlo(
    law: MaterialLaw,
    L: int,
    M: int,
    seed: int,
    path: StrainPath,
    settings: SolverSettings | None = None,
    threads: int = 1,
) -> McEnsemble:
    """Run the path for sample ids 1..M and average the stress trajectories."""
    if M < 1:
        raise ValueError("need at least one sample")
    reals = [sample(law, seed, i, L) for i in range(1, M + 1)]
    return _ensemble_from_realizations(reals, path, seed, settings, threads)


def sample_variance(ens: McEnsemble, l: int, alpha: int) -> float:
    """Biased sample variance of stress component alpha at time step l."""
    return float(ens.variance()[l, alpha])


@dataclass(frozen=True)
class SlopeFit:
    quantity: str
    t_label: str
    window: tuple[int, ...]
    slope: float


@dataclass(frozen=True)
class ErrorTable:
    """Systematic errors and sample variances over a range of cell sizes."""

    Ls: tuple[int, ...]
    L_max: int
    M: int
    seed: int
    times: np.ndarray
    f11: np.ndarray
    mean: dict[int, np.ndarray]  # per L: (N+1, K) mean stress
    e_sys: dict[int, np.ndarray]  # per L: (N+1, K) |mean_L - mean_Lmax|
    variance: dict[int, np.ndarray]  # per L: (N+1, K) biased sample variance
    slopes: list[SlopeFit] = field(default_factory=list)
    max_residual: float = 0.0
    max_residual_rel: float = 0.0
    energy_monotone: bool = True


# pseudo times at which the system sits in the elastic, transitional and
# plastic regime of the monotonic loading experiment
REGIME_TIMES = {"t_elast": 0.08, "t_trans": 0.22, "t_plast": 1.0}

DEFAULT_SYS_WINDOW = (6, 26)  # the restriction estimate degrades past L=26
DEFAULT_VAR_WINDOW = (6, 22)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ValueError("need two equally long sequences of at least 2 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive data")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def numerical_slope(series, driver) -> np.ndarray:
    """Difference quotient of a time series against the loading component.

    Both arguments are sequences of (t, value) pairs on the same time
    grid; the driver values (the loading) must be strictly increasing.
    Returns (v_k - v_{k-1}) / (F_k - F_{k-1}) for k = 1..N.
    """
    series = np.asarray(series, dtype=float)
    driver = np.asarray(driver, dtype=float)
    if series.shape != driver.shape or series.ndim != 2 or series.shape[1] != 2:
        raise ValueError("need matching (t, value) pair sequences")
    if not np.array_equal(series[:, 0], driver[:, 0]):
        raise ValueError("series and driver are on different time grids")
    dF = np.diff(driver[:, 1])
    if np.any(dF <= 0):
        raise ValueError("the loading component must be strictly increasing")
    return np.diff(series[:, 1]) / dF


def _closest_step(times: np.ndarray, t: float) -> int:
    return int(np.argmin(np.abs(times - t)))


def fit_scaling_slopes(
    table: "ErrorTable",
    sys_window: tuple[int, int] = DEFAULT_SYS_WINDOW,
    var_window: tuple[int, int] = DEFAULT_VAR_WINDOW,
    component: int = 0,
) -> list[SlopeFit]:
    """Log-log slopes of e_sys and variance against L at the regime times."""
    fits = []
    for label, t in REGIME_TIMES.items():
        l = _closest_step(table.times, t)
        for quantity, data, (lo, hi) in (
            ("e_sys", table.e_sys, sys_window),
            ("variance", table.variance, var_window),
        ):
            window = tuple(L for L in table.Ls if lo <= L <= hi and L != table.L_max)
            vals = np.array([data[L][l, component] for L in window])
            if len(window) >= 2 and np.all(vals > 0):
                fits.append(SlopeFit(quantity, label, window, loglog_slope(window, vals)))
    return fits


def systematic_error_study(
    law: MaterialLaw,
    Ls,
    L_max: int,
    M: int,
    seed: int,
    path: StrainPath,
    settings: SolverSettings | None = None,
    threads: int = 1,
) -> ErrorTable:
    """Nested-restriction error study against the largest cell.

    Samples M realizations on the box of side L_max, restricts each to
    every requested L, runs the path and compares the Monte-Carlo means:
    e_sys(L) = |mean_L - mean_Lmax| componentwise, zero at L_max by
    construction.  The per-L biased sample variances come along for free.
    """
    Ls = sorted(set(int(L) for L in Ls))
    if any(L > L_max for L in Ls):
        raise ValueError(f"every L must be <= L_max={L_max}")
    bigs = [sample(law, seed, i, L_max) for i in range(1, M + 1)]
    mean, e_sys, variance = {}, {}, {}
    max_residual = 0.0
    max_residual_rel = 0.0
    monotone = True
    for L in sorted(set(Ls) | {L_max}):
        ens = _ensemble_from_realizations(
            [restrict(big, L) for big in bigs], path, seed, settings, threads
        )
        mean[L] = ens.mean
        variance[L] = ens.variance()
        max_residual = max(max_residual, ens.max_residual)
        max_residual_rel = max(max_residual_rel, ens.max_residual_rel)
        monotone = monotone and ens.energy_monotone
    for L in mean:
        e_sys[L] = np.abs(mean[L] - mean[L_max])
    table = ErrorTable(
        Ls=tuple(Ls),
        L_max=int(L_max),
        M=int(M),
        seed=int(seed),
        times=path.times.copy(),
        f11=path.tensors[:, 0].copy(),
        mean=mean,
        e_sys=e_sys,
        variance=variance,
        max_residual=max_residual,
        max_residual_rel=max_residual_rel,
        energy_monotone=monotone,
    )
    table.slopes.extend(fit_scaling_slopes(table))
    return table


def systematic_reference(Ls, anchor: float) -> np.ndarray:
    """L^-2 (ln L)^2 curve anchored at the first cell size."""
    Ls = np.asarray(Ls, dtype=float)
    ref = Ls**-2 * np.log(Ls) ** 2
    return anchor * ref / ref[0]


def variance_reference(Ls, anchor: float) -> np.ndarray:
    """L^-2 curve (squared random-error rate) anchored at the first size."""
    Ls = np.asarray(Ls, dtype=float)
    ref = Ls**-2.0
    return anchor * ref / ref[0]
