"""Structured-grid bilinear-quad finite elements.

Node and element numbering follow the 88-line convention: nodes and
elements are numbered column by column, starting in the top-left corner
and running downwards. Element ``e = ely + elx * nely`` has its four nodes
listed counterclockwise starting from the lower-left corner. Elastic dofs
interleave ``(ux, uy)`` per node; ``y`` points up.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

try:
    import cvxopt
    import cvxopt.cholmod
except ImportError:  # pragma: no cover - exercised only without cvxopt
    cvxopt = None

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8


class ParameterError(ValueError):
    """Invalid material or mesh parameter."""


class SolverError(RuntimeError):
    """Linear solve failed (singular or under-constrained system)."""


@dataclass(frozen=True)
class Mesh2D:
    """Regular ``nelx`` x ``nely`` grid of square elements."""

    nelx: int
    nely: int
    elem_size: float = 1.0
    node_ids: np.ndarray = field(init=False, repr=False, compare=False)
    elem_nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nelx < 1 or self.nely < 1:
            raise ParameterError(f"mesh needs nelx, nely >= 1, got {self.nelx}x{self.nely}")
        if self.elem_size <= 0:
            raise ParameterError("elem_size must be positive")
        node_ids = np.arange((self.nelx + 1) * (self.nely + 1)).reshape(self.nelx + 1, self.nely + 1)
        # node_ids[ix, iy] with iy counted from the top edge
        n1 = node_ids[:-1, :-1].ravel()  # upper-left of each element
        n2 = node_ids[1:, :-1].ravel()  # upper-right
        elem_nodes = np.column_stack([n1 + 1, n2 + 1, n2, n1])
        object.__setattr__(self, "node_ids", node_ids)
        object.__setattr__(self, "elem_nodes", elem_nodes)

    @property
    def n_elem(self) -> int:
        return self.nelx * self.nely

    @property
    def n_node(self) -> int:
        return (self.nelx + 1) * (self.nely + 1)

    def elem_dofs(self) -> np.ndarray:
        """(n_elem, 8) elastic dof indices per element."""
        nodes = self.elem_nodes
        dofs = np.empty((self.n_elem, 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * nodes
        dofs[:, 1::2] = 2 * nodes + 1
        return dofs

    def elem_centers(self) -> np.ndarray:
        """(n_elem, 2) element centroids in physical coordinates, y up."""
        ix, iy = np.divmod(np.arange(self.n_elem), self.nely)
        x = (ix + 0.5) * self.elem_size
        y = (self.nely - iy - 0.5) * self.elem_size
        return np.column_stack([x, y])

    def node_coords(self) -> np.ndarray:
        ix, iy = np.divmod(np.arange(self.n_node), self.nely + 1)
        return np.column_stack([ix * self.elem_size, (self.nely - iy) * self.elem_size])


def elasticity_matrix(E: float = 1.0, nu: float = 0.3) -> np.ndarray:
    """Plane-stress constitutive matrix for (sx, sy, txy)."""
    _check_material(E, nu)
    return E / (1.0 - nu**2) * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2.0]])


def _check_material(E, nu):
    if not E > 0:
        raise ParameterError(f"Young modulus must be positive, got {E}")
    if not -1.0 < nu < 0.5:
        raise ParameterError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")


def element_stiffness_elastic(E: float = 1.0, nu: float = 0.3) -> np.ndarray:
    """8x8 plane-stress stiffness of a unit-thickness square bilinear quad.

    Closed form (exact 2x2 Gauss integration); independent of element size.
    """
    _check_material(E, nu)
    k = np.array([
        1 / 2 - nu / 6, 1 / 8 + nu / 8, -1 / 4 - nu / 12, -1 / 8 + 3 * nu / 8,
        -1 / 4 + nu / 12, -1 / 8 - nu / 8, nu / 6, 1 / 8 - 3 * nu / 8,
    ])
    idx = np.array([
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ])
    return E / (1.0 - nu**2) * k[idx]


def element_conductivity(k: float = 1.0) -> np.ndarray:
    """4x4 conduction matrix of a square bilinear quad (size independent)."""
    if not k > 0:
        raise ParameterError(f"conductivity must be positive, got {k}")
    return k * np.array([
        [2 / 3, -1 / 6, -1 / 3, -1 / 6],
        [-1 / 6, 2 / 3, -1 / 6, -1 / 3],
        [-1 / 3, -1 / 6, 2 / 3, -1 / 6],
        [-1 / 6, -1 / 3, -1 / 6, 2 / 3],
    ])


def centroid_strain_matrix(elem_size: float = 1.0) -> np.ndarray:
    """3x8 strain-displacement matrix evaluated at the element centre."""
    dndx = np.array([-0.5, 0.5, 0.5, -0.5]) / elem_size
    dndy = np.array([-0.5, -0.5, 0.5, 0.5]) / elem_size
    B = np.zeros((3, 8))
    B[0, 0::2] = dndx
    B[1, 1::2] = dndy
    B[2, 0::2] = dndy
    B[2, 1::2] = dndx
    return B


class Assembler:
    """Sparse assembly and Dirichlet-reduced solves for one mesh and BC set.

    The sparsity pattern, the scatter map from element entries to the
    reduced CSC data array, and (lazily) the symbolic Cholesky factor are
    computed once; every solve only redoes the numeric factorization.
    """

    def __init__(self, elem_matrix: np.ndarray, elem_dofs: np.ndarray, n_dof: int,
                 fixed_dofs, fixed_values=None, backend: str | None = None):
        self.ke = np.asarray(elem_matrix, dtype=float)
        self.elem_dofs = np.asarray(elem_dofs, dtype=np.int64)
        self.n_dof = int(n_dof)
        fixed = np.unique(np.asarray(fixed_dofs, dtype=np.int64))
        if fixed.size == 0:
            raise SolverError("no Dirichlet dofs given; the stiffness matrix is singular")
        self.fixed = fixed
        self.fixed_values = np.zeros(fixed.size) if fixed_values is None else np.asarray(fixed_values, float)
        if self.fixed_values.shape != self.fixed.shape:
            raise ValueError("fixed_values must match fixed_dofs")
        free_mask = np.ones(self.n_dof, dtype=bool)
        free_mask[fixed] = False
        self.free = np.flatnonzero(free_mask)
        reduced = -np.ones(self.n_dof, dtype=np.int64)
        reduced[self.free] = np.arange(self.free.size)
        self.backend = backend or ("cholmod" if cvxopt is not None else "superlu")

        nloc = self.ke.shape[0]
        rows = np.repeat(self.elem_dofs, nloc, axis=1).ravel()
        cols = np.tile(self.elem_dofs, (1, nloc)).ravel()
        self._full_rows, self._full_cols = rows, cols
        r, c = reduced[rows], reduced[cols]
        keep = (r >= 0) & (c >= 0) & (r >= c)  # lower triangle of the free block
        self._keep = keep
        pattern = sp.coo_matrix((np.ones(keep.sum()), (r[keep], c[keep])),
                                shape=(self.free.size, self.free.size)).tocsc()
        pattern.sum_duplicates()
        pattern.sort_indices()
        self._indptr, self._indices = pattern.indptr, pattern.indices
        # locate each kept triplet in the CSC data array
        cr, cc = r[keep], c[keep]
        pos = np.empty(cr.size, dtype=np.int64)
        order = np.lexsort((cr, cc))
        key = cc[order] * self.free.size + cr[order]
        col_of_entry = np.repeat(np.arange(self.free.size), np.diff(self._indptr))
        csc_key = col_of_entry * self.free.size + self._indices
        pos[order] = np.searchsorted(csc_key, key)
        self._pos = pos
        self._nnz = self._indices.size
        self._ke_flat = self.ke.ravel()
        self._diag_pos = self._indptr[:-1]  # sorted lower-triangular columns start on the diagonal
        self._symbolic = None
        if self.backend == "cholmod":
            coo_r = self._indices.astype(np.int64)
            coo_c = col_of_entry.astype(np.int64)
            self._cv_rows = cvxopt.matrix(coo_r)
            self._cv_cols = cvxopt.matrix(coo_c)

    def global_matrix(self, scale) -> sp.csr_matrix:
        """Full (unreduced) global matrix, for residual checks and tests."""
        vals = (np.asarray(scale, float)[:, None] * self._ke_flat[None, :]).ravel()
        return sp.coo_matrix((vals, (self._full_rows, self._full_cols)), shape=(self.n_dof, self.n_dof)).tocsr()

    def _reduced_lower(self, scale) -> np.ndarray:
        vals = (np.asarray(scale, float)[:, None] * self._ke_flat[None, :]).ravel()[self._keep]
        return np.bincount(self._pos, weights=vals, minlength=self._nnz)

    def solve(self, scale, load, rhs_only: bool = False) -> np.ndarray:
        """Solve ``K(scale) u = load`` with the Dirichlet values imposed.

        ``load`` may be a vector of length ``n_dof`` or an ``(n_dof, k)``
        array of right-hand sides solved with one factorization.
        """
        scale = np.asarray(scale, float)
        if scale.shape != (self.elem_dofs.shape[0],):
            raise ValueError(f"scale must have length {self.elem_dofs.shape[0]}")
        if not np.all(scale > 0):
            raise ValueError("per-element scale must be strictly positive")
        load = np.asarray(load, float)
        single = load.ndim == 1
        F = load[:, None] if single else load
        u = np.zeros_like(F)
        u[self.fixed] = self.fixed_values[:, None]
        data = self._reduced_lower(scale)
        rhs = F[self.free]
        if np.any(self.fixed_values):
            K = self.global_matrix(scale)
            rhs = rhs - (K[self.free][:, self.fixed] @ self.fixed_values)[:, None]
        x = self._factor_solve(data, rhs)
        u[self.free] = x
        return u[:, 0] if single else u

    def _factor_solve(self, data, rhs):
        nf = self.free.size
        lower = sp.csc_matrix((data, self._indices, self._indptr), shape=(nf, nf))
        diag = data[self._diag_pos]

        def matvec(v):
            return lower @ v + lower.T @ v - diag[:, None] * v

        if self.backend == "cholmod":
            A = cvxopt.spmatrix(cvxopt.matrix(data), self._cv_rows, self._cv_cols, (nf, nf))
            try:
                if self._symbolic is None:
                    self._symbolic = cvxopt.cholmod.symbolic(A, uplo="L")
                factor = self._symbolic
                cvxopt.cholmod.numeric(A, factor)
            except ArithmeticError as exc:
                raise SolverError("reduced stiffness matrix is not positive definite; "
                                  "check that the Dirichlet dofs remove all rigid-body modes") from exc

            def backsolve(b):
                B = cvxopt.matrix(np.ascontiguousarray(b, dtype=float))
                cvxopt.cholmod.solve(factor, B)
                return np.array(B).reshape(b.shape)
        else:
            try:
                lu = spla.splu((lower + sp.tril(lower, -1).T).tocsc())
            except RuntimeError as exc:
                raise SolverError("reduced stiffness matrix is singular; "
                                  "check that the Dirichlet dofs remove all rigid-body modes") from exc

            def backsolve(b):
                return lu.solve(np.ascontiguousarray(b))

        x = backsolve(rhs)
        scale_r = max(1.0, np.abs(rhs).max())
        for _ in range(2):  # iterative refinement when roundoff is visible
            r = rhs - matvec(x)
            if np.abs(r).max() / scale_r <= 0.01 * RESIDUAL_TOL:
                break
            x = x + backsolve(r)
        if not np.all(np.isfinite(x)):
            raise SolverError("linear solve produced non-finite values (singular system?)")
        return x

    def residual(self, scale, u, load) -> float:
        """``||K u - f||_inf / max(1, ||f||_inf)`` over the free dofs."""
        K = self.global_matrix(scale)
        r = (K @ u - load)[self.free]
        return float(np.abs(r).max() / max(1.0, np.abs(load[self.free]).max()))


def assemble_and_solve(mesh: Mesh2D, scale, load, fixed_dofs, elem_matrix=None,
                       fixed_values=None) -> np.ndarray:
    """One-shot convenience wrapper around :class:`Assembler`.

    ``elem_matrix`` defaults to the elastic quad; a 4x4 matrix switches to
    one scalar dof per node.
    """
    ke = element_stiffness_elastic() if elem_matrix is None else np.asarray(elem_matrix)
    if ke.shape == (8, 8):
        dofs, n_dof = mesh.elem_dofs(), 2 * mesh.n_node
    elif ke.shape == (4, 4):
        dofs, n_dof = mesh.elem_nodes, mesh.n_node
    else:
        raise ParameterError(f"unsupported element matrix shape {ke.shape}")
    asm = Assembler(ke, dofs, n_dof, fixed_dofs, fixed_values)
    return asm.solve(scale, load)
