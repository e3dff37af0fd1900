"""Minimization of the nonsmooth convex increment functional.

The solver alternates an exact nonlinear Gauss-Seidel sweep (scalar prox
per plastic DOF, 1-D quadratic solve per displacement DOF) with a damped
Newton correction restricted to the currently smooth DOFs: the TNNMG
structure with the multigrid step replaced by an exact sparse direct
solve, which is cheap at the cell sizes handled here.  Plastic DOFs whose
value equals the previous plastic strain exactly are "at the kink" and
excluded from the correction; the correction direction is truncated so no
plastic DOF crosses its kink.

Every outer iteration is accepted only if the computed energy does not
increase, so the recorded energy sequence is nonincreasing by
construction.  Convergence requires a small relative step, energy
stagnation, and a certificate sweep that moves no DOF by more than the
step tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import IncrementProblem, RveState, increment_energy

_LINESEARCH_FLOOR = 1e-16


@dataclass(frozen=True)
class SolverSettings:
    tol_increment: float = 1e-10  # relative step norm
    tol_energy: float = 1e-12  # relative energy stagnation
    tol_residual: float = 1e-9  # optimality residual, relative to 1 + max|f|
    max_outer: int = 500
    kink_epsilon: float = 0.0  # plastic DOF counts as stuck iff |p - p_prev| <= this

    def __post_init__(self):
        if self.tol_increment <= 0 or self.tol_energy <= 0 or self.tol_residual <= 0:
            raise ValueError("tolerances must be positive")
        if self.kink_epsilon < 0:
            raise ValueError("kink_epsilon must be >= 0")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass
class SolveReport:
    iterations: int = 0
    energy: float = np.nan
    residual: float = np.nan
    load_norm: float = np.nan  # max |f|, the scale for residual tolerances
    converged: bool = False
    energies: list[float] = field(default_factory=list)
    newton_fallbacks: int = 0


class SolverError(RuntimeError):
    """Increment solve did not converge; carries the diagnostic report."""

    def __init__(self, message: str, report: SolveReport):
        super().__init__(message)
        self.report = report


def scalar_prox(c2: float, c1: float, w: float, anchor: float) -> float:
    """Minimizer of x -> c2/2 x^2 + c1 x + w |x - anchor|.

    Soft-thresholds the unconstrained minimizer -c1/c2 toward the anchor
    by w/c2; returns the anchor itself (bitwise) when the subgradient
    interval absorbs the slope there.
    """
    if c2 <= 0:
        raise ValueError(f"curvature must be positive, got {c2}")
    g = c2 * anchor + c1
    if abs(g) <= w:
        return anchor
    if g > w:
        return (w - c1) / c2
    return (-w - c1) / c2


def _sweep_kernel(indptr, indices, data, f, r, p_prev, n, y):
    """One ascending Gauss-Seidel sweep in place; returns max |change|.

    Plastic DOFs (index < n) minimize their scalar nonsmooth problem
    exactly, displacement DOFs solve their 1-D quadratic exactly.
    """
    max_change = 0.0
    for i in range(y.shape[0]):
        rowsum = 0.0
        diag = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j == i:
                diag = data[k]
            else:
                rowsum += data[k] * y[j]
        c1 = rowsum - f[i]
        if i < n:
            anchor = p_prev[i]
            g = diag * anchor + c1
            if abs(g) <= r[i]:
                new = anchor
            elif g > r[i]:
                new = (r[i] - c1) / diag
            else:
                new = (-r[i] - c1) / diag
        else:
            new = -c1 / diag
        change = abs(new - y[i])
        if change > max_change:
            max_change = change
        y[i] = new
    return max_change


try:  # pragma: no cover - exercised implicitly
    import numba

    _sweep_fast = numba.njit(cache=True, nogil=True)(_sweep_kernel)
except ImportError:  # pragma: no cover
    _sweep_fast = _sweep_kernel


def _sweep(prob: IncrementProblem, y: np.ndarray) -> float:
    A = prob.A
    return _sweep_fast(A.indptr, A.indices, A.data, prob.f, prob.r, prob.p_prev, prob.dofmap.n, y)


def gauss_seidel_sweep(prob: IncrementProblem, y):
    """Visit every free DOF once in ascending order, minimizing it exactly.

    Accepts and returns either an RveState or a flat DOF vector (the
    vector is updated in place).
    """
    if isinstance(y, RveState):
        yv = prob.dofmap.pack(y)
        _sweep(prob, yv)
        return prob.dofmap.unpack(yv)
    yv = np.asarray(y, dtype=float)
    _sweep(prob, yv)
    return yv


def _newton_correction(
    prob: IncrementProblem, y: np.ndarray, settings: SolverSettings
) -> tuple[np.ndarray, bool]:
    """Damped exact Newton step on the smooth active set.

    Returns (possibly unchanged y, fallback flag); the energy at the
    returned point never exceeds the energy at the input point.
    """
    n = prob.dofmap.n
    dp = y[:n] - prob.p_prev
    # a plastic DOF is nonsmooth only with positive dissipation weight
    kinked = prob.r > 0.0
    active_p = ~kinked | (np.abs(dp) > settings.kink_epsilon)
    active = np.concatenate([np.flatnonzero(active_p), np.arange(n, prob.dofmap.total)])
    if active.size == 0:
        return y, False

    grad = prob.A @ y - prob.f
    sub = active_p & kinked
    grad[:n][sub] += prob.r[sub] * np.sign(dp[sub])
    try:
        A_red = sp.csc_matrix(prob.A[active][:, active])
        direction_red = spla.splu(A_red).solve(-grad[active])
    except RuntimeError:
        return y, True
    if not np.all(np.isfinite(direction_red)):
        return y, True

    d = np.zeros_like(y)
    d[active] = direction_red
    # truncate kinked DOFs that would cross, and guard against roundoff
    # carrying a truncated DOF an ulp past the kink
    idx = np.flatnonzero(sub)
    crossing = (dp[idx] + d[idx]) * dp[idx] < 0.0
    d[idx[crossing]] = -dp[idx[crossing]]

    e0 = increment_energy(prob, y)
    step = 1.0
    while step >= _LINESEARCH_FLOOR:
        y_trial = y + step * d
        flipped = idx[(y_trial[idx] - prob.p_prev[idx]) * dp[idx] < 0.0]
        y_trial[flipped] = prob.p_prev[flipped]
        if increment_energy(prob, y_trial) < e0:
            return y_trial, False
        step *= 0.5
    return y, False


def truncated_newton_correction(prob: IncrementProblem, y, settings: SolverSettings | None = None):
    """Public wrapper around the Newton correction; preserves input type."""
    settings = settings or SolverSettings()
    if isinstance(y, RveState):
        yv, _ = _newton_correction(prob, prob.dofmap.pack(y), settings)
        return prob.dofmap.unpack(yv)
    yv, _ = _newton_correction(prob, np.asarray(y, dtype=float), settings)
    return yv


def optimality_residual(prob: IncrementProblem, y) -> float:
    """Max violation of the first-order conditions of the increment.

    Displacement DOFs: |(A y - f)_i|.  Plastic DOFs at the kink:
    excess of |(A y - f)_i| over the dissipation weight.  Plastic DOFs
    off the kink: |(A y - f)_i + r_i sign(p_i - p_prev_i)|.
    """
    yv = prob.as_vector(y)
    n = prob.dofmap.n
    g = prob.A @ yv - prob.f
    dp = yv[:n] - prob.p_prev
    at_kink = dp == 0.0
    viol_p = np.where(
        at_kink,
        np.maximum(np.abs(g[:n]) - prob.r, 0.0),
        np.abs(g[:n] + prob.r * np.sign(dp)),
    )
    viol_phi = np.abs(g[n:]) if prob.dofmap.m else np.zeros(1)
    return float(max(viol_p.max(initial=0.0), viol_phi.max(initial=0.0)))


def solve_increment(
    prob: IncrementProblem,
    warm_start: RveState | None = None,
    settings: SolverSettings | None = None,
) -> tuple[RveState, SolveReport]:
    """Minimize the increment functional to the configured tolerances.

    Warm starting with the previous time step's state is the intended
    use; the default start is the zero state.  Raises SolverError with
    the diagnostic report if max_outer iterations do not converge.
    """
    settings = settings or SolverSettings()
    dofmap = prob.dofmap
    y = dofmap.pack(warm_start) if warm_start is not None else np.zeros(dofmap.total)

    report = SolveReport()
    report.load_norm = float(np.max(np.abs(prob.f), initial=0.0))
    residual_gate = settings.tol_residual * (1.0 + report.load_norm)
    report.energies.append(increment_energy(prob, y))
    for it in range(1, settings.max_outer + 1):
        report.iterations = it
        y_try = y.copy()
        _sweep(prob, y_try)
        y_try, fallback = _newton_correction(prob, y_try, settings)
        report.newton_fallbacks += int(fallback)
        e_try = increment_energy(prob, y_try)

        if e_try <= report.energies[-1]:
            step_norm = float(np.max(np.abs(y_try - y), initial=0.0))
            drop = report.energies[-1] - e_try
            y = y_try
            report.energies.append(e_try)
        else:
            # changes are below evaluation roundoff: keep the old point
            step_norm = 0.0
            drop = 0.0

        scale_y = 1.0 + float(np.max(np.abs(y), initial=0.0))
        small_step = step_norm <= settings.tol_increment * scale_y
        stagnated = drop <= settings.tol_energy * (1.0 + abs(report.energies[-1]))
        if small_step and stagnated:
            y_cert = y.copy()
            cert_change = _sweep(prob, y_cert)
            e_cert = increment_energy(prob, y_cert)
            if e_cert <= report.energies[-1]:
                y = y_cert
                report.energies.append(e_cert)
            if (
                cert_change <= settings.tol_increment * scale_y
                and optimality_residual(prob, y) <= residual_gate
            ):
                report.converged = True
                break

    report.energy = report.energies[-1]
    report.residual = optimality_residual(prob, y)
    if not report.converged:
        raise SolverError(
            f"increment solve did not converge in {settings.max_outer} iterations "
            f"(residual {report.residual:.3e})",
            report,
        )
    return dofmap.unpack(y), report
