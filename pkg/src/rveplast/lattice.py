"""Periodic triangular lattice: geometry, discrete derivatives, strain conversion.

The cell is the integer box [0, L) x [0, L) with periodic wraparound.  Nodes
are indexed row-major (x fastest), edges are stored tail-centric: every node
is the tail of exactly one edge per type, so edge (node, alpha) gets the
index alpha * L**2 + node.  The three edge types of the triangular lattice
are horizontal (1,0), vertical (0,1) and diagonal (1,1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

D = 2  # spatial dimension
K = 3  # number of edge types


@dataclass(frozen=True)
class EdgeType:
    """One generating edge direction of the triangular lattice.

    ``index`` is the 1-based type label (used in output columns s1..s3,
    R1..R3); positional (0-based) indices are used everywhere in code.
    """

    index: int
    direction: tuple[int, int]

    @property
    def length(self) -> float:
        ex, ey = self.direction
        return float(np.hypot(ex, ey))

    @property
    def unit(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float) / self.length


EDGE_TYPES: tuple[EdgeType, ...] = (
    EdgeType(1, (1, 0)),
    EdgeType(2, (0, 1)),
    EdgeType(3, (1, 1)),
)

# unit(alpha) / length(alpha): per-component weights of the projected edge
# derivative, i.e. grad_s u(e) = EDGE_COEFF[alpha] . (u(head) - u(tail))
EDGE_COEFF = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])


@dataclass(frozen=True)
class SymTensor2:
    """Symmetric 2x2 tensor stored as its three independent entries."""

    a11: float
    a12: float
    a22: float

    @classmethod
    def zero(cls) -> "SymTensor2":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_matrix(cls, mat) -> "SymTensor2":
        m = np.asarray(mat, dtype=float)
        sym = 0.5 * (m + m.T)
        return cls(sym[0, 0], sym[0, 1], sym[1, 1])

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def __mul__(self, c: float) -> "SymTensor2":
        return SymTensor2(c * self.a11, c * self.a12, c * self.a22)

    __rmul__ = __mul__


class PeriodicLattice:
    """Node/edge indexing of the periodic triangular cell of side L."""

    def __init__(self, L: int):
        if L < 1:
            raise ValueError(f"lattice side must be >= 1, got {L}")
        self.L = int(L)
        self.num_nodes = self.L**2
        self.num_edges = K * self.num_nodes
        # head node index of edge (tail, alpha), vectorized over tails
        x, y = np.arange(self.L), np.arange(self.L)
        xx = np.tile(x, self.L)
        yy = np.repeat(y, self.L)
        self.heads = np.empty((K, self.num_nodes), dtype=np.intp)
        for alpha, et in enumerate(EDGE_TYPES):
            ex, ey = et.direction
            self.heads[alpha] = ((yy + ey) % self.L) * self.L + (xx + ex) % self.L
        self.node_x = xx
        self.node_y = yy

    def node_index(self, x: int, y: int) -> int:
        return (y % self.L) * self.L + (x % self.L)

    def node_xy(self, node: int) -> tuple[int, int]:
        return node % self.L, node // self.L

    def edge_index(self, node: int, alpha: int) -> int:
        return alpha * self.num_nodes + node

    def edge_tail_alpha(self, edge: int) -> tuple[int, int]:
        return edge % self.num_nodes, edge // self.num_nodes

    def head(self, node: int, alpha: int) -> int:
        return int(self.heads[alpha, node])


def wrap_node(xy, L: int) -> int:
    """Row-major index of a node position wrapped into the periodic cell."""
    if L < 1:
        raise ValueError(f"lattice side must be >= 1, got {L}")
    x, y = xy
    return (int(y) % L) * L + (int(x) % L)


def projected_edge_derivative(field, edge, L: int) -> float:
    """Longitudinal strain of one edge of a node-wise displacement field.

    ``field`` holds one 2-vector per node (shape (L*L, 2)), ``edge`` is the
    pair (tail node index, type index alpha in {0,1,2}).  Returns
    unit(alpha) . (field[head] - field[tail]) / |e_alpha| with the head
    taken periodically.  Vanishes on constant fields and equals
    unit . F unit for the linear field x -> F x.
    """
    field = np.asarray(field, dtype=float)
    tail, alpha = edge
    x, y = tail % L, tail // L
    ex, ey = EDGE_TYPES[alpha].direction
    head = wrap_node((x + ex, y + ey), L)
    return float(EDGE_COEFF[alpha] @ (field[head] - field[tail]))


def edge_strains(field, lattice: PeriodicLattice) -> np.ndarray:
    """Projected edge derivative on all edges at once, shape (K, L*L)."""
    field = np.asarray(field, dtype=float)
    out = np.empty((K, lattice.num_nodes))
    for alpha in range(K):
        diff = field[lattice.heads[alpha]] - field
        out[alpha] = diff @ EDGE_COEFF[alpha]
    return out


def ps_map(F) -> np.ndarray:
    """Tensor-to-vector conversion: longitudinal strain per edge type.

    Accepts a SymTensor2 or any 2x2 array-like; antisymmetric parts are
    annihilated.  For the triangular lattice the result is
    (F11, F22, (F11 + 2 F12 + F22) / 2).
    """
    if isinstance(F, SymTensor2):
        m = F.as_matrix()
    else:
        m = np.asarray(F, dtype=float)
    return np.array(
        [
            m[0, 0],
            m[1, 1],
            0.5 * (m[0, 0] + m[0, 1] + m[1, 0] + m[1, 1]),
        ]
    )


def ps_adjoint(s) -> SymTensor2:
    """Adjoint of ps_map: maps a per-type vector back to a symmetric tensor.

    Satisfies s . ps_map(F) == ps_adjoint(s) : F for all symmetric F.
    """
    s = np.asarray(s, dtype=float)
    return SymTensor2(s[0] + 0.5 * s[2], 0.5 * s[2], s[1] + 0.5 * s[2])
