"""Assembly and eigendecomposition of the constrained Laplacian.

Lowest-order conforming elements on the tensor grid with consistent mass.
Stiffness and mass are Kronecker products of 1-D matrices, restricted to
free nodes (Dirichlet nodes eliminated).  Eigenpairs of A phi = lambda M phi
are M-orthonormal and define everything spectral downstream.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import BoundaryPartition, Mesh

__all__ = [
    "OperatorPair",
    "SpectralBasis",
    "assemble_operators",
    "eigendecompose",
    "first_eigenpair",
    "save_basis",
    "load_basis",
    "DofCapError",
]

DEFAULT_DOF_CAP = 3000
# largest eigenpair count served by the Lanczos path on big meshes
_ITERATIVE_MAX = 32


class DofCapError(RuntimeError):
    """Dense eigendecomposition refused; see message for alternatives."""


def _line_matrices(n: int, h: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """1-D P1 stiffness and consistent mass on n uniform cells."""
    e = np.ones(n + 1)
    a_main = 2.0 * e
    a_main[0] = a_main[-1] = 1.0
    a = sp.diags([-e[:-1], a_main, -e[:-1]], [-1, 0, 1]) / h
    m_main = 4.0 * e
    m_main[0] = m_main[-1] = 2.0
    m = sp.diags([e[:-1], m_main, e[:-1]], [-1, 0, 1]) * (h / 6.0)
    return a.tocsr(), m.tocsr()


@dataclass(frozen=True)
class OperatorPair:
    """Stiffness/mass pair restricted to free nodes.

    Attributes
    ----------
    A, M : scipy.sparse.csr_matrix
        Symmetric stiffness and consistent mass over free nodes.
    lumped : numpy.ndarray
        Full-mass row sums at the free nodes; the positive quadrature
        weights used for nodal p-norms.
    free : numpy.ndarray
        Flat node indices kept after Dirichlet elimination.
    mesh : Mesh
    partition : BoundaryPartition
    """

    A: sp.csr_matrix = field(repr=False)
    M: sp.csr_matrix = field(repr=False)
    lumped: np.ndarray = field(repr=False)
    free: np.ndarray = field(repr=False)
    mesh: Mesh
    partition: BoundaryPartition

    @property
    def n_free(self) -> int:
        return len(self.free)


@lru_cache(maxsize=64)
def _assemble_cached(partition: BoundaryPartition) -> OperatorPair:
    mesh = partition.mesh
    ones = [_line_matrices(nd, hd) for nd, hd in zip(mesh.n, mesh.spacing)]
    mats_a = [a for a, _ in ones]
    mats_m = [m for _, m in ones]

    def kron_all(mats):
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(out, m, format="csr")
        return out

    M_full = kron_all(mats_m)
    A_full = sp.csr_matrix(M_full.shape)
    for d in range(mesh.dim):
        factors = [mats_a[d] if k == d else mats_m[k] for k in range(mesh.dim)]
        A_full = A_full + kron_all(factors)

    free = partition.free_nodes
    lumped = np.asarray(M_full.sum(axis=1)).ravel()[free]
    A = A_full[free][:, free].tocsr()
    M = M_full[free][:, free].tocsr()
    return OperatorPair(A=A, M=M, lumped=lumped, free=free,
                        mesh=mesh, partition=partition)


def assemble_operators(mesh: Mesh, partition: BoundaryPartition) -> OperatorPair:
    """Assemble stiffness and consistent mass on the free nodes.

    Parameters
    ----------
    mesh : Mesh
    partition : BoundaryPartition
        Must belong to ``mesh``; its Dirichlet closure nodes are eliminated.

    Returns
    -------
    OperatorPair

    Notes
    -----
    Results are cached on the partition, so repeated calls are cheap.
    """
    if partition.mesh != mesh:
        raise ValueError("partition does not belong to this mesh")
    return _assemble_cached(partition)


@dataclass(frozen=True)
class SpectralBasis:
    """Ascending M-orthonormal eigenpairs of the constrained Laplacian.

    Attributes
    ----------
    lams : numpy.ndarray
        Eigenvalues, ascending, all positive.
    vecs : numpy.ndarray
        Eigenvectors over free nodes, shape (n_free, m), M-orthonormal.
        Each column is sign-normalized to be nonnegative at its node of
        largest magnitude.
    ops : OperatorPair
    complete : bool
        True when m equals the number of free nodes.
    """

    lams: np.ndarray = field(repr=False)
    vecs: np.ndarray = field(repr=False)
    ops: OperatorPair
    complete: bool

    def __post_init__(self) -> None:
        if self.lams.ndim != 1 or self.vecs.shape != (self.ops.n_free, len(self.lams)):
            raise ValueError("inconsistent basis shapes")
        if np.any(np.diff(self.lams) < 0):
            raise ValueError("eigenvalues must be ascending")
        if self.lams[0] <= 0:
            raise ValueError("first eigenvalue must be positive; "
                             "is the Dirichlet part empty?")

    @property
    def m(self) -> int:
        return len(self.lams)

    def eigenfunction(self, k: int) -> np.ndarray:
        """Eigenvector k scattered to all mesh nodes (zeros on Dirichlet).

        Modes are numbered from 1; k = 1 is the principal one.
        """
        if not 1 <= k <= self.vecs.shape[1]:
            raise IndexError(f"mode {k} not in 1..{self.vecs.shape[1]}")
        full = np.zeros(self.ops.mesh.n_nodes)
        full[self.ops.free] = self.vecs[:, k - 1]
        return full

    def coefficients(self, values_free: np.ndarray) -> np.ndarray:
        """M-inner products of a free-node vector with each eigenvector."""
        return self.vecs.T @ (self.ops.M @ values_free)


def _sign_normalize(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigendecompose(
    ops: OperatorPair,
    m: int | str = "all",
    dof_cap: int = DEFAULT_DOF_CAP,
) -> SpectralBasis:
    """Solve A phi = lambda M phi for the lowest m eigenpairs.

    Parameters
    ----------
    ops : OperatorPair
    m : int or "all"
        Number of eigenpairs.  "all" yields a complete basis.
    dof_cap : int
        Upper bound on the free-node count for the dense path.

    Returns
    -------
    SpectralBasis

    Raises
    ------
    DofCapError
        If a dense decomposition would exceed ``dof_cap``.  Use the
        extension route for spectrum-free work on large meshes, request a
        small ``m``, or raise the cap.
    """
    n = ops.n_free
    want_all = isinstance(m, str)
    if want_all:
        if m.lower() != "all":
            raise ValueError(f"m must be an integer or 'all', got {m!r}")
        k = n
    else:
        k = int(m)
        if not 1 <= k <= n:
            raise ValueError(f"m must be in [1, {n}], got {k}")

    if n <= dof_cap:
        if k == n:
            lams, vecs = scipy.linalg.eigh(ops.A.toarray(), ops.M.toarray())
        else:
            lams, vecs = scipy.linalg.eigh(
                ops.A.toarray(), ops.M.toarray(),
                subset_by_index=[0, k - 1], driver="gvx")
    elif not want_all and k <= _ITERATIVE_MAX:
        # deterministic start vector; shift-invert targets the low end
        v0 = np.full(n, 1.0 / np.sqrt(n))
        lams, vecs = spla.eigsh(ops.A, k=k, M=ops.M, sigma=0.0, v0=v0)
        order = np.argsort(lams)
        lams, vecs = lams[order], vecs[:, order]
        # eigsh returns M-orthonormal columns for the generalized problem
    else:
        raise DofCapError(
            f"{n} free nodes exceed the dense cap of {dof_cap}; use the "
            f"extension route, request m <= {_ITERATIVE_MAX}, or raise dof_cap")

    return SpectralBasis(
        lams=np.ascontiguousarray(lams),
        vecs=_sign_normalize(np.ascontiguousarray(vecs)),
        ops=ops,
        complete=(k == n),
    )


def first_eigenpair(ops: OperatorPair) -> tuple[float, np.ndarray]:
    """Lowest eigenvalue and eigenvector, scattered to all nodes.

    The eigenvector is M-normalized and sign-fixed to be nonnegative at its
    largest-magnitude node.  A sign change on interior free nodes indicates
    a discretization pathology and raises a warning, not an error.

    Returns
    -------
    (float, numpy.ndarray)
    """
    basis = eigendecompose(ops, m=1)
    lam1 = float(basis.lams[0])
    phi1 = basis.eigenfunction(1)
    interior = ops.mesh.interior_node_mask
    if np.any(phi1[interior] <= 0):
        warnings.warn(
            "first eigenvector is not strictly positive on interior nodes",
            RuntimeWarning, stacklevel=2)
    return lam1, phi1


def save_basis(path, basis: SpectralBasis) -> None:
    """Persist a basis keyed by the mesh and partition content hashes."""
    np.savez_compressed(
        path,
        lams=basis.lams,
        vecs=basis.vecs,
        free=basis.ops.free,
        complete=np.array([basis.complete]),
        mesh_key=np.array([basis.ops.mesh.key()]),
        partition_key=np.array([basis.ops.partition.key()]),
    )


def load_basis(path, mesh: Mesh, partition: BoundaryPartition) -> SpectralBasis:
    """Load a persisted basis, verifying it matches mesh and partition."""
    with np.load(path, allow_pickle=False) as data:
        if str(data["mesh_key"][0]) != mesh.key():
            raise ValueError("basis artifact was built on a different mesh")
        if str(data["partition_key"][0]) != partition.key():
            raise ValueError("basis artifact was built on a different partition")
        ops = assemble_operators(mesh, partition)
        return SpectralBasis(
            lams=data["lams"],
            vecs=data["vecs"],
            ops=ops,
            complete=bool(data["complete"][0]),
        )
