"""Tensor-product meshes on boxes with labeled boundary facets.

A mesh is an axis-aligned box split into a regular grid of cells.  Boundary
facets are whole cell faces; Dirichlet/Neumann labels are assigned per facet,
never per node, so a partition is always a union of facets.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Mesh",
    "Facet",
    "BoundaryPartition",
    "ConeDomain",
    "build_tensor_mesh",
    "partition_boundary",
    "moving_family",
    "cone_domain",
]

_AXIS_NAMES = "xyz"
_SIDE_NAMES = {"lo": 0, "hi": 1, "low": 0, "high": 1}


@dataclass(frozen=True)
class Facet:
    """One boundary cell face.

    Attributes
    ----------
    axis : int
        Coordinate axis the facet is orthogonal to.
    side : int
        0 for the low end of the axis, 1 for the high end.
    index : tuple of int
        Cell multi-index in the transverse axes (empty in 1-D).
    measure : float
        Surface measure of the facet.  Boundary points of an interval get
        measure 1 by convention.
    centroid : tuple of float
        Facet barycenter.
    """

    axis: int
    side: int
    index: tuple[int, ...]
    measure: float
    centroid: tuple[float, ...]

    @property
    def normal(self) -> np.ndarray:
        """Outward unit normal (axis-aligned, exact)."""
        nu = np.zeros(len(self.centroid))
        nu[self.axis] = -1.0 if self.side == 0 else 1.0
        return nu


@dataclass(frozen=True)
class Mesh:
    """Uniform tensor-product grid on a box in dimension 1, 2, or 3.

    Parameters
    ----------
    dim : int
        Spatial dimension, one of 1, 2, 3.
    extents : tuple of (float, float)
        Per-axis interval (a_d, b_d) with a_d < b_d.
    n : tuple of int
        Cells per axis, each at least 2.

    Notes
    -----
    Nodes are ordered C-style over the grid shape ``(n_0+1, ..., n_{dim-1}+1)``.
    """

    dim: int
    extents: tuple[tuple[float, float], ...]
    n: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2, or 3, got {self.dim}")
        if len(self.extents) != self.dim or len(self.n) != self.dim:
            raise ValueError("extents and n must have one entry per axis")
        for (a, b), nd in zip(self.extents, self.n):
            if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
                raise ValueError(f"degenerate extent ({a}, {b})")
            if nd < 2:
                raise ValueError(f"need at least 2 cells per axis, got {nd}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(nd + 1 for nd in self.n)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / nd for (a, b), nd in zip(self.extents, self.n))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.extents]))

    def axis_coords(self, axis: int) -> np.ndarray:
        a, b = self.extents[axis]
        return np.linspace(a, b, self.n[axis] + 1)

    @cached_property
    def node_coords(self) -> np.ndarray:
        """Array of node coordinates, shape (n_nodes, dim)."""
        axes = [self.axis_coords(d) for d in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def facets(self) -> tuple[Facet, ...]:
        """All boundary facets in canonical order (axis, side, C-order index)."""
        out: list[Facet] = []
        h = self.spacing
        for axis in range(self.dim):
            t_axes = [d for d in range(self.dim) if d != axis]
            measure = float(np.prod([h[d] for d in t_axes])) if t_axes else 1.0
            for side in (0, 1):
                coord = self.extents[axis][side]
                t_cells = [self.n[d] for d in t_axes]
                for idx in np.ndindex(*t_cells):
                    centroid = [0.0] * self.dim
                    centroid[axis] = coord
                    for d, j in zip(t_axes, idx):
                        a_d = self.extents[d][0]
                        centroid[d] = a_d + (j + 0.5) * h[d]
                    out.append(
                        Facet(axis, side, tuple(int(j) for j in idx), measure,
                              tuple(centroid))
                    )
        return tuple(out)

    @property
    def boundary_measure(self) -> float:
        return float(sum(f.measure for f in self.facets))

    def _facet_layer(self, facet: Facet, layer: int) -> np.ndarray:
        # corner nodes of the facet patch shifted `layer` cells inward;
        # ndindex enumeration is ascending in flat C-order
        t_axes = [d for d in range(self.dim) if d != facet.axis]
        if facet.side == 0:
            fixed = layer
        else:
            fixed = self.n[facet.axis] - layer
        corners = []
        for offs in np.ndindex(*([2] * len(t_axes))):
            multi = [0] * self.dim
            multi[facet.axis] = fixed
            for d, j, o in zip(t_axes, facet.index, offs):
                multi[d] = j + o
            corners.append(np.ravel_multi_index(multi, self.shape))
        return np.array(corners, dtype=np.intp)

    def facet_nodes(self, facet: Facet) -> np.ndarray:
        """Flat indices of the nodes spanning a facet (2**(dim-1) corners)."""
        return self._facet_layer(facet, 0)

    def facet_interior_neighbors(self, facet: Facet) -> np.ndarray:
        """Nodes one cell inward from ``facet_nodes``, in matching order."""
        return self._facet_layer(facet, 1)

    @cached_property
    def interior_node_mask(self) -> np.ndarray:
        """Boolean mask of nodes not on the box boundary."""
        mask = np.ones(self.shape, dtype=bool)
        for d in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[d] = 0
            mask[tuple(sl)] = False
            sl[d] = -1
            mask[tuple(sl)] = False
        return mask.ravel()

    def key(self) -> str:
        """Stable content hash for persistence and manifests."""
        payload = json.dumps(
            {"dim": self.dim, "extents": self.extents, "n": self.n},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def build_tensor_mesh(
    dim: int,
    extents: Sequence[Sequence[float]],
    n: Sequence[int],
) -> Mesh:
    """Build a uniform tensor-product mesh on a box.

    Parameters
    ----------
    dim : int
        Spatial dimension (1, 2, or 3).
    extents : sequence of (float, float)
        Interval per axis.
    n : sequence of int
        Cells per axis (minimum 2).

    Returns
    -------
    Mesh

    Examples
    --------
    >>> m = build_tensor_mesh(1, [(0.0, 1.0)], [4])
    >>> m.n_nodes, len(m.facets)
    (5, 2)
    """
    exts = tuple((float(a), float(b)) for a, b in extents)
    return Mesh(dim=int(dim), extents=exts, n=tuple(int(v) for v in n))


def _parse_face(face) -> tuple[int, int]:
    axis, side = face
    if isinstance(axis, str):
        axis = _AXIS_NAMES.index(axis.lower())
    if isinstance(side, str):
        side = _SIDE_NAMES[side.lower()]
    return int(axis), int(side)


@dataclass(frozen=True)
class BoundaryPartition:
    """Dirichlet/Neumann split of a mesh boundary into whole facets.

    Attributes
    ----------
    mesh : Mesh
    dirichlet : tuple of bool
        One flag per facet of ``mesh.facets``; True marks Dirichlet.
    """

    mesh: Mesh
    dirichlet: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.dirichlet) != len(self.mesh.facets):
            raise ValueError("label list length must match facet count")
        nd = sum(self.dirichlet)
        if nd == 0:
            raise ValueError("partition needs at least one Dirichlet facet")
        if nd == len(self.dirichlet):
            raise ValueError("partition needs at least one Neumann facet")

    @property
    def alpha(self) -> float:
        """Surface measure of the Dirichlet part."""
        return float(
            sum(f.measure for f, d in zip(self.mesh.facets, self.dirichlet) if d)
        )

    def dirichlet_facets(self) -> list[Facet]:
        return [f for f, d in zip(self.mesh.facets, self.dirichlet) if d]

    def neumann_facets(self) -> list[Facet]:
        return [f for f, d in zip(self.mesh.facets, self.dirichlet) if not d]

    @cached_property
    def dirichlet_node_mask(self) -> np.ndarray:
        """Nodes on the closure of the Dirichlet set (to be eliminated)."""
        mask = np.zeros(self.mesh.n_nodes, dtype=bool)
        for f in self.dirichlet_facets():
            mask[self.mesh.facet_nodes(f)] = True
        return mask

    @cached_property
    def free_nodes(self) -> np.ndarray:
        """Flat indices of nodes kept in the constrained function space."""
        return np.flatnonzero(~self.dirichlet_node_mask)

    def key(self) -> str:
        payload = self.mesh.key() + "".join("D" if d else "N" for d in self.dirichlet)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def partition_boundary(
    mesh: Mesh,
    dirichlet: Iterable | Callable[[Facet], bool],
) -> BoundaryPartition:
    """Label boundary facets as Dirichlet or Neumann.

    Parameters
    ----------
    mesh : Mesh
    dirichlet : iterable of faces or callable
        Either a list of whole faces, each as ``(axis, side)`` with axis an
        index or one of "xyz" and side 0/1 or "lo"/"hi", or a predicate
        called on each :class:`Facet`.

    Returns
    -------
    BoundaryPartition

    Raises
    ------
    ValueError
        If the Dirichlet or the Neumann part would be empty.
    """
    if callable(dirichlet):
        labels = tuple(bool(dirichlet(f)) for f in mesh.facets)
    else:
        faces = {_parse_face(f) for f in dirichlet}
        for axis, side in faces:
            if not (0 <= axis < mesh.dim and side in (0, 1)):
                raise ValueError(f"face ({axis}, {side}) not on this mesh")
        labels = tuple((f.axis, f.side) in faces for f in mesh.facets)
    return BoundaryPartition(mesh=mesh, dirichlet=labels)


def moving_family(
    mesh: Mesh,
    alphas: Sequence[float],
    faces: Sequence | None = None,
) -> list[BoundaryPartition]:
    """Nested Dirichlet partitions with prescribed surface measures.

    Facets are consumed in a fixed deterministic fill order (canonical facet
    order, optionally restricted to ``faces``), so smaller-alpha Dirichlet
    sets are subsets of larger ones.  Each requested alpha snaps DOWN to the
    nearest realizable facet-union measure; the snapped value is what the
    returned partition reports.

    Parameters
    ----------
    mesh : Mesh
    alphas : sequence of float
        Strictly decreasing target Dirichlet measures.
    faces : sequence of (axis, side), optional
        Restrict and order the fill; default is all faces in canonical order.

    Returns
    -------
    list of BoundaryPartition
        One partition per requested alpha, nested by construction.

    Raises
    ------
    ValueError
        If an alpha exceeds the total boundary measure, leaves no Neumann
        facet, or is too small to contain a single facet.
    """
    alphas = [float(a) for a in alphas]
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly decreasing")

    if faces is None:
        pool = list(range(len(mesh.facets)))
    else:
        order = [_parse_face(f) for f in faces]
        pool = []
        for axis, side in order:
            pool.extend(
                i for i, f in enumerate(mesh.facets)
                if f.axis == axis and f.side == side
            )
    measures = np.array([mesh.facets[i].measure for i in pool])
    cum = np.cumsum(measures)
    total_boundary = mesh.boundary_measure
    # absolute slack so 4 * 0.25 == 1.0 snaps to all four facets
    slack = 1e-12 * max(total_boundary, 1.0)

    out = []
    for alpha in alphas:
        if alpha > total_boundary + slack:
            raise ValueError(
                f"alpha={alpha} exceeds boundary measure {total_boundary}")
        k = int(np.searchsorted(cum, alpha + slack, side="right"))
        if k == 0:
            raise ValueError(
                f"alpha={alpha} smaller than the first facet "
                f"(measure {measures[0]}); refine the mesh or raise alpha")
        if k == len(mesh.facets):
            raise ValueError(
                f"alpha={alpha} would label the whole boundary Dirichlet")
        chosen = set(pool[:k])
        labels = tuple(i in chosen for i in range(len(mesh.facets)))
        out.append(BoundaryPartition(mesh=mesh, dirichlet=labels))
    return out


@dataclass(frozen=True)
class ConeDomain:
    """Box cone: apex at the origin corner, Dirichlet cap on the far faces.

    Every lateral face passes through the apex, so axis-aligned normals give
    <x - apex, nu> = 0 there exactly; the far faces have <x - apex, nu> = R.
    ``rho`` records an apex smoothing radius: facets whose centroid lies
    within rho of the apex are exempt from geometric sign checks.
    """

    mesh: Mesh
    partition: BoundaryPartition
    apex: tuple[float, ...]
    rho: float


def cone_domain(dim: int, radius: float, n: int, rho: float = 0.0) -> ConeDomain:
    """Build the axis-aligned cone domain [0, R]^dim with apex at the origin.

    Parameters
    ----------
    dim : int
    radius : float
        Side length R.
    n : int
        Cells per axis.
    rho : float, optional
        Apex regularization radius recorded for geometric checks.

    Returns
    -------
    ConeDomain
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    mesh = build_tensor_mesh(dim, [(0.0, float(radius))] * dim, [n] * dim)
    cap = [(d, 1) for d in range(dim)]
    part = partition_boundary(mesh, cap)
    return ConeDomain(mesh=mesh, partition=part, apex=(0.0,) * dim, rho=float(rho))
