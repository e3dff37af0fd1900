"""Time-incremental evolution of one cell along a macroscopic strain path.

Starting from the trivial state, each time step assembles the load for the
current macro strain, solves the increment warm-started at the previous
state, and records the cell-averaged stress (the hysteresis-operator
output) together with the per-type plastic fractions.  Increments depend
on time only through the strain values, so the evolution is rate
independent: reparametrizing the time stamps leaves all outputs unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import DofMap, IncrementProblem, RveState, assemble_load, assemble_operator
from .lattice import D, K, SymTensor2, edge_strains, ps_adjoint, ps_map
from .randfield import Realization
from .solver import SolverError, SolveReport, SolverSettings, solve_increment


@dataclass(frozen=True)
class StrainPath:
    """Macroscopic strain trajectory sampled at increasing time stamps."""

    times: np.ndarray  # shape (N+1,), times[0] = 0
    tensors: np.ndarray  # shape (N+1, 3): rows (F11, F12, F22)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        tensors = np.asarray(self.tensors, dtype=float)
        if times.ndim != 1 or tensors.shape != (times.size, 3):
            raise ValueError("need times (N+1,) and tensors (N+1, 3)")
        if times.size < 1 or np.any(np.diff(times) <= 0):
            raise ValueError("time stamps must be strictly increasing")
        if np.any(tensors[0] != 0.0):
            raise ValueError("the path must start at zero strain")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "tensors", tensors)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def tensor(self, l: int) -> SymTensor2:
        f11, f12, f22 = self.tensors[l]
        return SymTensor2(f11, f12, f22)


def cyclic_path(
    amplitude: float = 3e-3, frequency: float = 8.0, n_steps: int = 50, t_end: float = 1.0
) -> StrainPath:
    """Uniaxial cyclic loading F11(t) = amplitude * sin(frequency * t)."""
    if n_steps < 1:
        raise ValueError("need at least one time step")
    t = np.linspace(0.0, t_end, n_steps + 1)
    tensors = np.zeros((n_steps + 1, 3))
    tensors[:, 0] = amplitude * np.sin(frequency * t)
    return StrainPath(t, tensors)


def monotonic_path(rate: float = 0.0034, n_steps: int = 50, t_end: float = 1.0) -> StrainPath:
    """Uniaxial monotonic loading F11(t) = rate * t."""
    if n_steps < 1:
        raise ValueError("need at least one time step")
    t = np.linspace(0.0, t_end, n_steps + 1)
    tensors = np.zeros((n_steps + 1, 3))
    tensors[:, 0] = rate * t
    return StrainPath(t, tensors)


@dataclass(frozen=True)
class StressRecord:
    """Cell-averaged response at one time step."""

    t: float
    F: SymTensor2
    s: np.ndarray  # stress vector, one longitudinal component per edge type
    sigma: SymTensor2  # ps_adjoint(s)
    fractions: np.ndarray  # plastic fraction per edge type
    energy: float  # reported (cell-averaged) increment energy


class PathError(RuntimeError):
    """Solver failure during a path run; carries the failing step index."""

    def __init__(self, message: str, step: int, cause: SolverError):
        super().__init__(message)
        self.step = step
        self.cause = cause


def stress_vector(real: Realization, state: RveState, F, L: int | None = None) -> np.ndarray:
    """Per-type average of a * (elastic strain): the stress operator output.

    s_alpha = L^-2 sum over type-alpha edges of
    a_e ((ps_map F)_alpha + g_e(phi) - p_e).
    """
    if L is not None and L != real.L:
        raise ValueError(f"L={L} does not match the realization's L={real.L}")
    L = real.L
    dofmap = DofMap(L)
    fhat = ps_map(F)
    g = edge_strains(state.phi, dofmap.lattice)
    p = state.p.reshape(K, L**2)
    a = real.by_type("a")
    return (a * (fhat[:, None] + g - p)).sum(axis=1) * float(L) ** (-D)


def plastic_fraction(state: RveState) -> np.ndarray:
    """Share of edges per type with nonzero plastic strain (exact nonzero)."""
    npt = state.phi.shape[0]
    return (state.p.reshape(K, npt) != 0.0).mean(axis=1)


def regime(fraction: float) -> str:
    """Classify a plastic fraction: elastic (0), plastic (1), else transitional."""
    if fraction <= 0.0:
        return "elastic"
    if fraction >= 1.0:
        return "plastic"
    return "transitional"


def run_path(
    real: Realization,
    path: StrainPath,
    L: int | None = None,
    settings: SolverSettings | None = None,
    reports: list[SolveReport] | None = None,
) -> list[tuple[RveState, StressRecord]]:
    """Evolve one realization along the strain path from the trivial state.

    Returns one (state, record) pair per time stamp, the first being the
    zero state at t=0.  Pass a list as ``reports`` to collect the solver
    report of every increment.
    """
    if L is not None and L != real.L:
        raise ValueError(f"L={L} does not match the realization's L={real.L}")
    L = real.L
    dofmap = DofMap(L)
    A = assemble_operator(real, dofmap=dofmap)
    state = RveState.zero(L)
    out = [
        (
            state,
            StressRecord(
                t=float(path.times[0]),
                F=path.tensor(0),
                s=np.zeros(K),
                sigma=SymTensor2.zero(),
                fractions=np.zeros(K),
                energy=0.0,
            ),
        )
    ]
    for l in range(1, path.n_steps + 1):
        F = path.tensor(l)
        prob = IncrementProblem(
            A=A,
            f=assemble_load(real, F, dofmap=dofmap),
            r=real.sy,
            p_prev=state.p,
            dofmap=dofmap,
        )
        try:
            state, report = solve_increment(prob, warm_start=state, settings=settings)
        except SolverError as err:
            raise PathError(f"solver failed at step {l} (t={path.times[l]})", l, err) from err
        if reports is not None:
            reports.append(report)
        s = stress_vector(real, state, F)
        out.append(
            (
                state,
                StressRecord(
                    t=float(path.times[l]),
                    F=F,
                    s=s,
                    sigma=ps_adjoint(s),
                    fractions=plastic_fraction(state),
                    energy=report.energy,
                ),
            )
        )
    return out
