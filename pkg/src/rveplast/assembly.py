"""Assembly of the quadratic increment functional on the periodic cell.

One load increment at macroscopic strain F minimizes

    J(p, phi) = sum_e [ a_e/2 (Fhat_a + g_e(phi) - p_e)^2 + h_e/2 p_e^2 ]
                + sum_e sy_e |p_e - p_prev_e|

over the plastic strains p (one scalar per edge) and the displacement
fluctuation phi (one 2-vector per node, clamped to zero at the cell
corners).  Here g_e(phi) is the projected edge derivative and
Fhat_a = (ps_map F)_alpha the longitudinal macro strain of the edge type.

The smooth part is carried as  1/2 y.A y - f.y  with A the Hessian
(independent of F) and f the load vector: this equals J's smooth part
minus the state-independent constant  sum_e a_e/2 Fhat_a^2.  The cell
average factor L^-2 is kept out of A, f and the dissipation weights (it
does not change minimizers) and applied only when reporting energies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lattice import D, EDGE_COEFF, K, PeriodicLattice, ps_map
from .randfield import Realization


def corner_nodes(L: int) -> np.ndarray:
    """Clamped nodes: the distinct cell corners (all nodes when L <= 2)."""
    lat = PeriodicLattice(L)
    corners = {lat.node_index(x, y) for x in (0, L - 1) for y in (0, L - 1)}
    return np.array(sorted(corners), dtype=np.intp)


@dataclass(frozen=True)
class RveState:
    """Plastic strain per edge and displacement fluctuation per node."""

    p: np.ndarray  # shape (K * L**2,)
    phi: np.ndarray  # shape (L**2, 2)

    @classmethod
    def zero(cls, L: int) -> "RveState":
        return cls(np.zeros(K * L**2), np.zeros((L**2, 2)))

    @property
    def L(self) -> int:
        return int(np.sqrt(self.phi.shape[0]))

    def copy(self) -> "RveState":
        return RveState(self.p.copy(), self.phi.copy())


class DofMap:
    """Flat numbering of the free degrees of freedom.

    Plastic DOFs come first (edge order), then the unclamped displacement
    components in node-major, component-minor order.
    """

    def __init__(self, L: int, clamped: bool = True):
        self.L = int(L)
        self.lattice = PeriodicLattice(L)
        self.n = K * L**2
        flat = np.arange(2 * L**2).reshape(L**2, 2)
        free = np.ones(2 * L**2, dtype=bool)
        self.clamped_nodes = corner_nodes(L) if clamped else np.empty(0, dtype=np.intp)
        free[flat[self.clamped_nodes].ravel()] = False
        self.m = int(free.sum())
        self.total = self.n + self.m
        # phi_dof[node, comp] -> global index, -1 where clamped
        self.phi_dof = np.full(2 * L**2, -1, dtype=np.intp)
        self.phi_dof[free] = self.n + np.arange(self.m)
        self.phi_dof = self.phi_dof.reshape(L**2, 2)
        self._free_mask = free.reshape(L**2, 2)

    def pack(self, state: RveState) -> np.ndarray:
        y = np.empty(self.total)
        y[: self.n] = state.p
        y[self.n :] = state.phi[self._free_mask]
        return y

    def unpack(self, y: np.ndarray) -> RveState:
        phi = np.zeros((self.L**2, 2))
        phi[self._free_mask] = y[self.n :]
        return RveState(y[: self.n].copy(), phi)


def _edge_stencil(dofmap: DofMap, alpha: int):
    """Per-edge (dof, coefficient) stencil of the elastic strain g - p.

    Five entries per edge: the plastic DOF with weight -1 and the four
    displacement components of head and tail weighted by the projected
    derivative; clamped components get dof -1 / weight 0.
    """
    lat = dofmap.lattice
    npt = lat.num_nodes
    tails = np.arange(npt)
    heads = lat.heads[alpha]
    c = EDGE_COEFF[alpha]
    dofs = np.empty((5, npt), dtype=np.intp)
    coef = np.empty((5, npt))
    dofs[0] = alpha * npt + tails
    coef[0] = -1.0
    for i in range(2):
        dofs[1 + i] = dofmap.phi_dof[heads, i]
        coef[1 + i] = c[i]
        dofs[3 + i] = dofmap.phi_dof[tails, i]
        coef[3 + i] = -c[i]
    coef[dofs < 0] = 0.0
    return dofs, coef


def assemble_operator(
    real: Realization, clamped: bool = True, dofmap: DofMap | None = None
) -> sp.csr_matrix:
    """Sparse symmetric Hessian A with y.A y = sum_e a (g - p)^2 + h p^2."""
    if dofmap is None:
        dofmap = DofMap(real.L, clamped=clamped)
    npt = real.L**2
    rows, cols, vals = [], [], []
    a = real.by_type("a")
    for alpha in range(K):
        dofs, coef = _edge_stencil(dofmap, alpha)
        for i in range(5):
            keep_i = dofs[i] >= 0
            for j in range(5):
                keep = keep_i & (dofs[j] >= 0)
                rows.append(dofs[i][keep])
                cols.append(dofs[j][keep])
                vals.append((a[alpha] * coef[i] * coef[j])[keep])
        # hardening acts on the plastic DOF alone
        rows.append(dofs[0])
        cols.append(dofs[0])
        vals.append(real.by_type("h")[alpha])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dofmap.total, dofmap.total),
    ).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def assemble_load(
    real: Realization, F, clamped: bool = True, dofmap: DofMap | None = None
) -> np.ndarray:
    """Load vector f with f.y = sum_e a_e Fhat_a (p_e - g_e(phi)).

    This makes 1/2 y.A y - f.y equal the stored energy at macro strain F
    up to the constant sum_e a_e/2 Fhat_a^2.  With spatially constant
    coefficients the displacement block of f telescopes to zero.
    """
    if dofmap is None:
        dofmap = DofMap(real.L, clamped=clamped)
    fhat = ps_map(F)
    f = np.zeros(dofmap.total)
    a = real.by_type("a")
    for alpha in range(K):
        dofs, coef = _edge_stencil(dofmap, alpha)
        w = -a[alpha] * fhat[alpha]
        for i in range(5):
            keep = dofs[i] >= 0
            np.add.at(f, dofs[i][keep], (w * coef[i])[keep])
    return f


@dataclass(frozen=True)
class IncrementProblem:
    """One time increment: Hessian, load, dissipation weights, previous state."""

    A: sp.csr_matrix = field(repr=False)
    f: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    p_prev: np.ndarray = field(repr=False)
    dofmap: DofMap = field(repr=False)

    @property
    def scale(self) -> float:
        """Cell-average prefactor applied when reporting energies."""
        return float(self.dofmap.L) ** (-D)

    def as_vector(self, y) -> np.ndarray:
        return self.dofmap.pack(y) if isinstance(y, RveState) else np.asarray(y, dtype=float)


def build_increment(
    real: Realization,
    F,
    p_prev: np.ndarray | None = None,
    A: sp.csr_matrix | None = None,
) -> IncrementProblem:
    """Assemble the increment problem for macro strain F.

    Pass the operator of a previous increment as ``A`` to reuse it: the
    Hessian does not depend on F or the plastic history.
    """
    if real.L < 2:
        raise ValueError(f"increment problems need L >= 2, got L={real.L}")
    dofmap = DofMap(real.L)
    if A is None:
        A = assemble_operator(real, dofmap=dofmap)
    if p_prev is None:
        p_prev = np.zeros(dofmap.n)
    return IncrementProblem(
        A=A,
        f=assemble_load(real, F, dofmap=dofmap),
        r=real.sy.copy(),
        p_prev=np.asarray(p_prev, dtype=float),
        dofmap=dofmap,
    )


def increment_energy(prob: IncrementProblem, y) -> float:
    """Cell-averaged increment functional value at state y.

    Returns scale * (1/2 y.A y - f.y + sum_e r_e |p_e - p_prev_e|); the
    offset to the full stored energy is independent of y.
    """
    yv = prob.as_vector(y)
    n = prob.dofmap.n
    smooth = 0.5 * yv @ (prob.A @ yv) - prob.f @ yv
    rough = prob.r @ np.abs(yv[:n] - prob.p_prev)
    return prob.scale * (smooth + rough)
