"""Finite-difference discretization on rectangular boxes.

Builds the discrete bilaplacian / Laplacian / gradient operators for
the two boundary-condition families (clamped "dirichlet": u = u' = 0,
and "navier": u = Delta u = 0) together with the nodal quadrature used
by all energy integrals.

Grid convention: Omega = (0, L1) x ... with n interior nodes per axis,
spacing h = L/(n+1).  Fields store interior values only (boundary is
identically zero), row-major with x fastest in 2D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DomainSpec",
    "Field",
    "OperatorSet",
    "build_operators",
    "gradient_field",
    "integrate",
    "measure",
]


@dataclass(frozen=True)
class DomainSpec:
    """Geometry, boundary-condition kind and resolution of the box."""

    dimension: int
    extents: tuple[float, ...]
    bc: str  # "dirichlet" (clamped) or "navier"
    n: int   # interior nodes per axis

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        object.__setattr__(self, "extents", tuple(float(L) for L in self.extents))
        if len(self.extents) != self.dimension:
            raise ValueError("extents must have one entry per axis")
        if any(L <= 0 for L in self.extents):
            raise ValueError("extents must be positive")
        if self.bc not in ("dirichlet", "navier"):
            raise ValueError("bc must be 'dirichlet' or 'navier'")
        if self.n < 8:
            raise ValueError("need at least 8 interior nodes per axis")
        if self.dimension == 2 and self.bc != "navier":
            raise ValueError("2D supports Navier boundary conditions only")

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / (self.n + 1) for L in self.extents)

    @property
    def num_nodes(self) -> int:
        return self.n ** self.dimension

    def axis_nodes(self, axis: int = 0) -> np.ndarray:
        """Interior node coordinates along one axis."""
        h = self.h[axis]
        return h * np.arange(1, self.n + 1)

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        """Interior node coordinates, each flattened row-major (x fastest)."""
        axes = [self.axis_nodes(a) for a in range(self.dimension)]
        if self.dimension == 1:
            return (axes[0],)
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        return X.ravel(), Y.ravel()


@dataclass
class Field:
    """Discrete scalar function on the interior nodes (zero on the boundary)."""

    spec: DomainSpec
    values: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros(self.spec.num_nodes)
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.spec.num_nodes:
            raise ValueError(
                f"expected {self.spec.num_nodes} values, got {self.values.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def copy(self) -> "Field":
        return Field(self.spec, self.values.copy())

    @classmethod
    def from_function(cls, spec: DomainSpec, f) -> "Field":
        return cls(spec, f(*spec.meshgrid()))


def _laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    """Discrete -d^2/dx^2 with zero boundary values (SPD)."""
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


def _clamped_bilaplacian_1d(n: int, h: float) -> sp.csr_matrix:
    """d^4/dx^4 with u = u' = 0, ghost reflection u_{-1} = u_1."""
    A = sp.diags(
        [np.ones(n - 2), -4 * np.ones(n - 1), 6 * np.ones(n),
         -4 * np.ones(n - 1), np.ones(n - 2)],
        [-2, -1, 0, 1, 2], format="lil",
    )
    A[0, 0] = 7.0
    A[n - 1, n - 1] = 7.0
    return (A / h**4).tocsr()


def _edge_gradient_1d(n: int, h: float) -> sp.csr_matrix:
    """Forward differences at the n+1 edge midpoints; G^T G equals -Laplacian."""
    G = sp.lil_matrix((n + 1, n))
    for j in range(n + 1):
        if j >= 1:
            G[j, j - 1] = -1.0 / h
        if j <= n - 1:
            G[j, j] = 1.0 / h
    return G.tocsr()


def _cell_gradient_2d(n: int, h: tuple[float, float]) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Gradient at the (n+1)^2 cell centers, averaged forward differences.

    Both components are collocated, which the exponential nonlinearity
    needs; accuracy is O(h^2) at cell centers.
    """
    nc = n + 1
    # value-extraction operator: node (i,j) of the padded (n+2)^2 grid
    # from the interior vector (zero boundary).
    def node(i, j):
        # padded indices 0..n+1; interior index for 1..n
        if 1 <= i <= n and 1 <= j <= n:
            return (j - 1) * n + (i - 1)
        return None

    rows_x, cols_x, vals_x = [], [], []
    rows_y, cols_y, vals_y = [], [], []
    for cj in range(nc):
        for ci in range(nc):
            r = cj * nc + ci
            # cell corners in padded numbering
            corners = [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)]
            # d/dx: average of forward differences on the two x-edges
            for (i0, j0), (i1, j1), s in [
                (corners[0], corners[1], 1.0), (corners[2], corners[3], 1.0)
            ]:
                for (i, j), sgn in [((i1, j1), s), ((i0, j0), -s)]:
                    k = node(i, j)
                    if k is not None:
                        rows_x.append(r)
                        cols_x.append(k)
                        vals_x.append(sgn / (2 * h[0]))
            # d/dy likewise on the two y-edges
            for (i0, j0), (i1, j1), s in [
                (corners[0], corners[2], 1.0), (corners[1], corners[3], 1.0)
            ]:
                for (i, j), sgn in [((i1, j1), s), ((i0, j0), -s)]:
                    k = node(i, j)
                    if k is not None:
                        rows_y.append(r)
                        cols_y.append(k)
                        vals_y.append(sgn / (2 * h[1]))
    m = nc * nc
    Gx = sp.csr_matrix((vals_x, (rows_x, cols_x)), shape=(m, n * n))
    Gy = sp.csr_matrix((vals_y, (rows_y, cols_y)), shape=(m, n * n))
    return Gx, Gy


@dataclass
class OperatorSet:
    """Assembled discrete operators for one DomainSpec.

    A    : discrete bilaplacian under the BC (SPD)
    B    : discrete -Laplacian with zero boundary values (SPD)
    G    : per-axis first-derivative operators at the energy quadrature
           points (edge midpoints in 1D, where G^T G = B exactly; cell
           centers in 2D)
    w    : quadrature weight per point, h^dimension
    """

    spec: DomainSpec
    A: sp.csr_matrix
    B: sp.csr_matrix
    G: tuple[sp.csr_matrix, ...]
    h: tuple[float, ...]
    w: float

    def check_symmetry(self, rtol: float = 1e-12) -> None:
        for M, name in ((self.A, "A"), (self.B, "B")):
            gap = abs(M - M.T).max()
            scale = abs(M).max()
            if gap > rtol * scale:
                raise AssertionError(f"{name} not symmetric: {gap} > {rtol * scale}")


def build_operators(spec: DomainSpec) -> OperatorSet:
    """Assemble A, B and the quadrature-point gradient for a domain."""
    n = spec.n
    h = spec.h
    if spec.dimension == 1:
        B = _laplacian_1d(n, h[0])
        if spec.bc == "navier":
            A = (B @ B).tocsr()
        else:
            A = _clamped_bilaplacian_1d(n, h[0])
        G = (_edge_gradient_1d(n, h[0]),)
    else:
        B1x = _laplacian_1d(n, h[0])
        B1y = _laplacian_1d(n, h[1])
        eye = sp.identity(n, format="csr")
        # row-major, x fastest: global index = j*n + i
        B = (sp.kron(B1y, eye) + sp.kron(eye, B1x)).tocsr()
        A = (B @ B).tocsr()
        G = _cell_gradient_2d(n, (h[0], h[1]))
    ops = OperatorSet(spec=spec, A=A, B=B, G=tuple(G), h=h,
                      w=float(np.prod(h)))
    ops.check_symmetry()
    return ops


def gradient_field(u: Field) -> np.ndarray:
    """Nodal gradient by central differences, shape (dimension, num_nodes).

    Nodes adjacent to the boundary use the zero boundary value, so the
    formula (u_{i+1} - u_{i-1}) / (2h) applies everywhere.
    """
    spec = u.spec
    n, h = spec.n, spec.h
    if spec.dimension == 1:
        padded = np.concatenate(([0.0], u.values, [0.0]))
        g = (padded[2:] - padded[:-2]) / (2 * h[0])
        return g[np.newaxis, :]
    v = u.values.reshape(n, n)  # v[j, i] with x index i fastest
    padded = np.zeros((n + 2, n + 2))
    padded[1:-1, 1:-1] = v
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / (2 * h[0])
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / (2 * h[1])
    return np.stack([gx.ravel(), gy.ravel()])


def integrate(f: np.ndarray, spec: DomainSpec) -> float:
    """Nodal quadrature h^d * sum over interior nodes."""
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("integrand must be finite")
    return float(np.prod(spec.h)) * float(f.sum())


def measure(spec: DomainSpec) -> float:
    """Exact measure |Omega| of the box."""
    return float(np.prod(spec.extents))
