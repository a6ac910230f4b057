"""Discrete double de Rham complex on periodic structured grids.

Cells of degree k are indexed by an ordered axis subset ``S`` (``|S| = k``)
and a base vertex.  Straight k-cochains live on primal k-cells; twisted
j-cochains are stored on the dual cells, which are indexed by the primal
(n - j)-cell they cross.  With that indexing the Poincare pairing is a plain
dot product and every Hodge star is diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from math import comb, prod

import numpy as np
import scipy.sparse as sp

STRAIGHT = "straight"
TWISTED = "twisted"
_FLAVORS = (STRAIGHT, TWISTED)


@dataclass(frozen=True, eq=False)
class ComplexMesh:
    """Periodic structured mesh carrying incidence and diagonal Hodge data.

    Attributes
    ----------
    dimension : int
        Spatial dimension n.
    cells_per_axis : tuple of int
    extent_per_axis : tuple of float
    metric : tuple of float
        Uniform diagonal metric coefficients g_ii.
    incidence : tuple of scipy.sparse.csr_matrix
        ``incidence[k]`` maps k-cochains to (k+1)-cochains, integer entries.
    hodge : tuple of ndarray
        Diagonal of the mass matrix ``M_k`` taking straight k-cochains to
        twisted (n-k)-cochains.
    """

    dimension: int
    cells_per_axis: tuple
    extent_per_axis: tuple
    metric: tuple
    incidence: tuple
    hodge: tuple

    @property
    def n_vertices(self):
        return prod(self.cells_per_axis)

    @property
    def spacing(self):
        return tuple(L / N for L, N in zip(self.extent_per_axis, self.cells_per_axis))

    @property
    def lengths(self):
        """Metric edge length along each axis."""
        return tuple(h * np.sqrt(g) for h, g in zip(self.spacing, self.metric))

    @cached_property
    def cell_volume(self):
        return float(prod(self.lengths))

    def axis_blocks(self, k):
        return list(combinations(range(self.dimension), k))

    def n_cells(self, k):
        return comb(self.dimension, k) * self.n_vertices

    def block_slice(self, k, axes):
        """Slice of the k-cochain vector belonging to cells spanning ``axes``."""
        i = self.axis_blocks(k).index(tuple(axes))
        nv = self.n_vertices
        return slice(i * nv, (i + 1) * nv)

    def primal_measure(self, k):
        """Metric measure of every primal k-cell."""
        out = np.empty(self.n_cells(k))
        nv = self.n_vertices
        ell = self.lengths
        for i, S in enumerate(self.axis_blocks(k)):
            out[i * nv:(i + 1) * nv] = prod(ell[a] for a in S)
        return out

    def dual_measure(self, k):
        """Metric measure of the dual (n-k)-cell attached to each primal k-cell."""
        out = np.empty(self.n_cells(k))
        nv = self.n_vertices
        ell = self.lengths
        for i, S in enumerate(self.axis_blocks(k)):
            out[i * nv:(i + 1) * nv] = prod(ell[a] for a in range(self.dimension) if a not in S)
        return out

    def cell_centers(self, k, axes):
        """Coordinates (n, n_vertices) of the centres of k-cells spanning ``axes``."""
        h = self.spacing
        idx = np.indices(self.cells_per_axis).reshape(self.dimension, -1).astype(float)
        for a in range(self.dimension):
            idx[a] *= h[a]
            if a in axes:
                idx[a] += 0.5 * h[a]
        return idx

    def shift_index(self, axis, step=1):
        """Flat vertex index of ``base + step * e_axis`` for every base vertex."""
        grid = np.arange(self.n_vertices).reshape(self.cells_per_axis)
        return np.roll(grid, -step, axis=axis).ravel()

    def with_hodge(self, hodge):
        """Same topology with replaced Hodge diagonals (used for metric probes)."""
        return ComplexMesh(self.dimension, self.cells_per_axis, self.extent_per_axis,
                           self.metric, self.incidence, tuple(np.asarray(m, float) for m in hodge))

    def lift_to_3d(self):
        """Embed a 1D or 2D mesh in 3D by padding single-cell unit axes.

        Incidence along a one-cell periodic axis cancels, so the lifted
        complex carries exactly the reduced Maxwell operators.
        """
        if self.dimension == 3:
            return self
        pad = 3 - self.dimension
        return _assemble(3, tuple(self.cells_per_axis) + (1,) * pad,
                         tuple(self.extent_per_axis) + (1.0,) * pad,
                         tuple(self.metric) + (1.0,) * pad)

    @cached_property
    def _cache(self):
        return {}

    def operator(self, name, builder):
        """Memoise a derived operator on this mesh."""
        cache = self._cache
        if name not in cache:
            cache[name] = builder()
        return cache[name]


@dataclass(frozen=True)
class Cochain:
    """Degrees of freedom of a discrete form.

    Parameters
    ----------
    degree : int
    flavor : {"straight", "twisted"}
    values : ndarray
        One real entry per cell (integrated, not sampled).
    """

    degree: int
    flavor: str
    values: np.ndarray

    def __post_init__(self):
        if self.flavor not in _FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def with_values(self, values):
        return Cochain(self.degree, self.flavor, values)

    def __add__(self, other):
        _check_same_kind(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_same_kind(self, other)
        return self.with_values(self.values - other.values)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


def _check_same_kind(a, b):
    if a.degree != b.degree or a.flavor != b.flavor:
        raise ValueError(f"cochain mismatch: ({a.degree}, {a.flavor}) vs ({b.degree}, {b.flavor})")


def _incidence(n, counts, shifts, k):
    nv = prod(counts)
    src = {S: i for i, S in enumerate(combinations(range(n), k))}
    rows, cols, vals = [], [], []
    base = np.arange(nv)
    for bi, Sp in enumerate(combinations(range(n), k + 1)):
        r = bi * nv + base
        for pos, j in enumerate(Sp):
            bj = src[tuple(a for a in Sp if a != j)]
            sign = 1 if pos % 2 == 0 else -1
            rows += [r, r]
            cols += [bj * nv + shifts[j], bj * nv + base]
            vals += [np.full(nv, sign, np.int64), np.full(nv, -sign, np.int64)]
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(comb(n, k + 1) * nv, comb(n, k) * nv)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def _assemble(n, counts, extents, metric):
    nv = prod(counts)
    grid = np.arange(nv).reshape(counts)
    shifts = [np.roll(grid, -1, axis=a).ravel() for a in range(n)]
    incidence = tuple(_incidence(n, counts, shifts, k) for k in range(n))
    ell = [L / N * np.sqrt(g) for L, N, g in zip(extents, counts, metric)]
    vol = prod(ell)
    hodge = []
    for k in range(n + 1):
        diag = np.empty(comb(n, k) * nv)
        for i, S in enumerate(combinations(range(n), k)):
            diag[i * nv:(i + 1) * nv] = vol / prod(ell[a] ** 2 for a in S)
        hodge.append(diag)
    return ComplexMesh(n, tuple(int(c) for c in counts), tuple(float(L) for L in extents),
                       tuple(float(g) for g in metric), incidence, tuple(hodge))


def build_mesh(dimension, cells_per_axis, extent_per_axis=None, metric=None):
    """Assemble a periodic structured mesh.

    Parameters
    ----------
    dimension : int
        1, 2 or 3.
    cells_per_axis : sequence of int
        At least 2 cells per axis.
    extent_per_axis : sequence of float, optional
        Defaults to unit extents.
    metric : sequence of float, optional
        Diagonal metric coefficients; defaults to Euclidean.
    """
    if dimension not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {dimension}")
    counts = tuple(np.atleast_1d(cells_per_axis).tolist())
    extents = tuple(np.atleast_1d(1.0 if extent_per_axis is None else extent_per_axis).tolist())
    metric = tuple(np.atleast_1d(1.0 if metric is None else metric).tolist())
    if len(extents) == 1 and dimension > 1:
        extents = extents * dimension
    if len(metric) == 1 and dimension > 1:
        metric = metric * dimension
    if len(counts) == 1 and dimension > 1:
        counts = counts * dimension
    if not (len(counts) == len(extents) == len(metric) == dimension):
        raise ValueError("per-axis sequences must have length equal to the dimension")
    if any(int(c) != c or c < 2 for c in counts):
        raise ValueError(f"cells_per_axis must be integers >= 2, got {counts}")
    if any(not L > 0 for L in extents):
        raise ValueError(f"extents must be positive, got {extents}")
    if any(not g > 0 for g in metric):
        raise ValueError(f"metric coefficients must be positive, got {metric}")
    return _assemble(dimension, tuple(int(c) for c in counts), extents, metric)


def _check_cochain(mesh, w):
    if not 0 <= w.degree <= mesh.dimension:
        raise ValueError(f"degree {w.degree} outside 0..{mesh.dimension}")
    expected = mesh.n_cells(_cell_degree(mesh, w))
    if w.values.shape != (expected,):
        raise ValueError(f"cochain has {w.values.shape} values, mesh expects ({expected},)")


def _cell_degree(mesh, w):
    # primal cell degree indexing the storage
    return w.degree if w.flavor == STRAIGHT else mesh.dimension - w.degree


def derivative_matrix(mesh, degree, flavor=STRAIGHT):
    """Sparse matrix of the exterior derivative on cochains of ``degree``.

    Twisted derivatives are the signed transposes ``(-1)^(n-j) d_{n-j-1}^T``.
    """
    n = mesh.dimension
    if not 0 <= degree < n:
        raise ValueError(f"exterior derivative undefined on degree {degree} in dimension {n}")
    if flavor == STRAIGHT:
        return mesh.incidence[degree]
    sign = -1 if (n - degree) % 2 else 1
    return mesh.operator(("dtilde", degree),
                         lambda: (sign * mesh.incidence[n - degree - 1].T).tocsr())


def exterior_derivative(mesh, w):
    """Apply d to ``w``; the flavor is preserved."""
    _check_cochain(mesh, w)
    if w.degree >= mesh.dimension:
        raise ValueError(f"exterior derivative of a top-degree ({w.degree}) cochain")
    D = derivative_matrix(mesh, w.degree, w.flavor)
    return Cochain(w.degree + 1, w.flavor, D @ w.values)


def hodge_star(mesh, w):
    """Diagonal Hodge star; straight k goes to twisted n-k and back."""
    _check_cochain(mesh, w)
    n = mesh.dimension
    if w.flavor == STRAIGHT:
        return Cochain(n - w.degree, TWISTED, mesh.hodge[w.degree] * w.values)
    return Cochain(n - w.degree, STRAIGHT, w.values / mesh.hodge[n - w.degree])


def mass_diagonal(mesh, w):
    """Diagonal of the L2 Gram matrix for cochains shaped like ``w``."""
    if w.flavor == STRAIGHT:
        return mesh.hodge[w.degree]
    return 1.0 / mesh.hodge[mesh.dimension - w.degree]


def l2_inner(mesh, w, eta):
    """Discrete L2 inner product ``(w, eta)``."""
    _check_cochain(mesh, w)
    _check_cochain(mesh, eta)
    _check_same_kind(w, eta)
    return float(np.dot(w.values * mass_diagonal(mesh, w), eta.values))


def poincare_pair(mesh, w, eta):
    """Metric-free pairing of a k-cochain with a complementary (n-k)-cochain."""
    _check_cochain(mesh, w)
    _check_cochain(mesh, eta)
    if w.degree + eta.degree != mesh.dimension:
        raise ValueError(f"degrees {w.degree} and {eta.degree} are not complementary")
    if w.flavor == eta.flavor:
        raise ValueError("pairing needs one straight and one twisted cochain")
    return float(np.dot(w.values, eta.values))


def codifferential_matrix(mesh, degree, flavor=STRAIGHT):
    """Sparse ``M_{k-1}^{-1} d_{k-1}^T M_k`` for cochains of ``degree``."""
    if not 1 <= degree <= mesh.dimension:
        raise ValueError(f"codifferential undefined on degree {degree}")
    probe = Cochain(degree, flavor, np.zeros(0))
    lower = Cochain(degree - 1, flavor, np.zeros(0))

    def build():
        D = derivative_matrix(mesh, degree - 1, flavor)
        return (sp.diags(1.0 / mass_diagonal(mesh, lower)) @ D.T
                @ sp.diags(mass_diagonal(mesh, probe))).tocsr()

    return mesh.operator(("codiff", degree, flavor), build)


def codifferential(mesh, w):
    """L2 adjoint of the exterior derivative."""
    _check_cochain(mesh, w)
    if w.degree < 1:
        raise ValueError("codifferential of a degree-0 cochain")
    return Cochain(w.degree - 1, w.flavor, codifferential_matrix(mesh, w.degree, w.flavor) @ w.values)


def _gauss_points(order):
    x, wts = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * wts


def vector_proxy_to_forms(mesh, V, target, pseudo=False, order=1):
    """Convert a vector field to cochain degrees of freedom.

    Parameters
    ----------
    V : callable or ndarray
        Either ``V(x) -> (n, m)`` evaluated at points ``x`` of shape (n, m),
        or an array (n, n_vertices) holding component i sampled at the centres
        of the cells it integrates over (edges along i for ``one_form``,
        faces normal to i for ``two_form``).
    target : {"one_form", "two_form"}
        ``one_form`` is the flat map V^b (edge integrals); ``two_form`` is the
        flux form i_V vol (integrals over (n-1)-cells).
    pseudo : bool
        Pseudo-vectors give a twisted one-form and a straight two-form;
        ordinary vectors give the opposite flavors.
    order : int
        Gauss points per direction when ``V`` is callable.
    """
    n = mesh.dimension
    if target not in ("one_form", "two_form"):
        raise ValueError(f"target must be 'one_form' or 'two_form', got {target!r}")
    nv = mesh.n_vertices
    ell = mesh.lengths
    if callable(V):
        samples = [_integrate_component(mesh, V, target, pseudo, i, order) for i in range(n)]
    else:
        arr = np.asarray(V, dtype=float)
        if arr.shape != (n, nv):
            raise ValueError(f"samples must have shape ({n}, {nv}) at the target cell centres, got {arr.shape}")
        samples = list(arr)

    if target == "one_form":
        flavor = TWISTED if pseudo else STRAIGHT
        out = np.zeros(mesh.n_cells(1))
        for i in range(n):
            if flavor == STRAIGHT:
                out[mesh.block_slice(1, (i,))] = samples[i] * ell[i]
            else:
                S = tuple(a for a in range(n) if a != i)
                out[mesh.block_slice(n - 1, S)] = samples[i] * ell[i] * (-1) ** i
        return Cochain(1, flavor, out)

    flavor = STRAIGHT if pseudo else TWISTED
    area = [prod(ell[a] for a in range(n) if a != i) for i in range(n)]
    out = np.zeros(mesh.n_cells(n - 1) if flavor == STRAIGHT else mesh.n_cells(1))
    for i in range(n):
        if flavor == STRAIGHT:
            S = tuple(a for a in range(n) if a != i)
            out[mesh.block_slice(n - 1, S)] = samples[i] * area[i] * (-1) ** i
        else:
            out[mesh.block_slice(1, (i,))] = samples[i] * area[i]
    return Cochain(n - 1, flavor, out)


def _integrate_component(mesh, V, target, pseudo, i, order):
    n = mesh.dimension
    h = mesh.spacing
    # directions integrated over, and whether the cell is primal-centred on axis a
    if target == "one_form":
        span = (i,)
        primal = not pseudo
    else:
        span = tuple(a for a in range(n) if a != i)
        primal = pseudo
    if primal:
        axes = span
    else:
        axes = tuple(a for a in range(n) if a not in span)
    base = mesh.cell_centers(len(axes), axes)
    pts, wts = _gauss_points(order)
    acc = np.zeros(mesh.n_vertices)
    for offs in np.ndindex(*(order,) * len(span)):
        x = base.copy()
        w = 1.0
        for a, o in zip(span, offs):
            x[a] += (pts[o] - 0.5) * h[a]
            w *= wts[o]
        acc += w * np.asarray(V(x), dtype=float)[i]
    return acc


def edge_to_cell_average(mesh):
    """Per-axis sparse maps from 1-cochains to cell-centred vector components."""

    def build():
        n = mesh.dimension
        nv = mesh.n_vertices
        mats = []
        for i in range(n):
            others = [a for a in range(n) if a != i]
            cols, vals = [], []
            weight = 1.0 / (2 ** len(others) * mesh.lengths[i])
            off = mesh.block_slice(1, (i,)).start
            for corner in np.ndindex(*(2,) * len(others)):
                idx = np.arange(nv)
                for a, c in zip(others, corner):
                    if c:
                        idx = mesh.shift_index(a)[idx]
                cols.append(off + idx)
                vals.append(np.full(nv, weight))
            rows = np.tile(np.arange(nv), len(cols))
            A = sp.coo_matrix((np.concatenate(vals), (rows, np.concatenate(cols))),
                              shape=(nv, mesh.n_cells(1))).tocsr()
            A.sum_duplicates()
            mats.append(A)
        return tuple(mats)

    return mesh.operator("edge_avg", build)


def face_to_cell_average(mesh):
    """Per-axis sparse maps from straight (n-1)-cochains to cell-centred components."""

    def build():
        n = mesh.dimension
        nv = mesh.n_vertices
        mats = []
        for i in range(n):
            S = tuple(a for a in range(n) if a != i)
            area = prod(mesh.lengths[a] for a in S)
            off = mesh.block_slice(n - 1, S).start
            weight = (-1) ** i / (2.0 * area)
            idx = np.arange(nv)
            cols = np.concatenate([off + idx, off + mesh.shift_index(i)])
            rows = np.tile(idx, 2)
            A = sp.coo_matrix((np.full(2 * nv, weight), (rows, cols)),
                              shape=(nv, mesh.n_cells(n - 1))).tocsr()
            A.sum_duplicates()
            mats.append(A)
        return tuple(mats)

    return mesh.operator("face_avg", build)


def solve_graph_laplacian(L, rhs):
    """Solve a periodic Laplacian system with a constant null space.

    The right-hand side is projected to zero mean first; the returned
    potential has zero mean.
    """
    import scipy.sparse.linalg as spla

    n = L.shape[0]
    rhs = np.asarray(rhs, float)
    rhs = rhs - rhs.mean()
    # pin the null space with a rank-one shift
    A = sp.csc_matrix(L) + sp.csc_matrix(np.full((n, n), 1.0 / n)) if n <= 2048 else None
    if A is not None:
        phi = spla.spsolve(A, rhs)
    else:
        phi, _ = spla.cg(L, rhs, rtol=1e-14, maxiter=10 * n)
    return phi - phi.mean()


def divergence_cleaning(mesh, b):
    """Remove the gradient part of a straight (n-1)-cochain.

    Projects ``b`` in the L2 sense onto ``ker d_{n-1}``.
    """
    n = mesh.dimension
    if b.flavor != STRAIGHT or b.degree != n - 1:
        raise ValueError("divergence cleaning expects a straight (n-1)-cochain")
    D = mesh.incidence[n - 1]
    Minv = sp.diags(1.0 / mesh.hodge[n - 1])
    L = (D @ Minv @ D.T).tocsr()
    phi = solve_graph_laplacian(L, D @ b.values)
    return b.with_values(b.values - Minv @ (D.T @ phi))
