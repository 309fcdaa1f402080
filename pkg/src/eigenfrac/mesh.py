"""Structured triangulations of a padded rectangular body.

The body is an axis-aligned rectangle Omega.  A Dirichlet collar of
width delta is attached to a chosen subset of its sides; displacement
data is imposed there instead of on the bare boundary, so jumps along
the boundary of Omega remain admissible.  The meshed box is the collar
hull optionally padded further so that distance neighborhoods of sets
inside the collar hull never reach the box edge.

Each grid cell of side (hx, hy) is split along its bottom-left to
top-right diagonal into a lower and an upper right triangle.  Simplex
ids are row-major: cell (i, j) owns simplices 2*(j*nx + i) (lower) and
2*(j*nx + i) + 1 (upper).
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import numpy as np

INTERIOR = 0
COLLAR = 1
EXTERIOR = 2

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the body and its Dirichlet collar.

    Parameters
    ----------
    omega : tuple
        (xmin, ymin, xmax, ymax) of the body rectangle.
    collar_width : float
        Width delta > 0 of the boundary-datum collar.
    dirichlet_sides : tuple of str
        Non-empty subset of {"left", "right", "bottom", "top"}.
    """

    omega: Tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    collar_width: float = 0.2
    dirichlet_sides: Tuple[str, ...] = ("left", "right")

    def __post_init__(self):
        x0, y0, x1, y1 = self.omega
        if not (x1 > x0 and y1 > y0):
            raise ValueError("omega rectangle must have positive side lengths")
        if not self.collar_width > 0.0:
            raise ValueError("collar width must be positive")
        sides = tuple(self.dirichlet_sides)
        if not sides:
            raise ValueError("at least one Dirichlet side is required")
        for s in sides:
            if s not in SIDES:
                raise ValueError(f"unknown side {s!r}")
        if len(set(sides)) != len(sides):
            raise ValueError("duplicate Dirichlet side")

    @property
    def omega_prime(self) -> Tuple[float, float, float, float]:
        """Collar hull: omega grown by the collar width on Dirichlet sides."""
        x0, y0, x1, y1 = self.omega
        d = self.collar_width
        if "left" in self.dirichlet_sides:
            x0 -= d
        if "right" in self.dirichlet_sides:
            x1 += d
        if "bottom" in self.dirichlet_sides:
            y0 -= d
        if "top" in self.dirichlet_sides:
            y1 += d
        return (x0, y0, x1, y1)


@dataclass(frozen=True)
class ResolutionCoupling:
    """Mesh size law h(eps) = scale * eps**exponent with exponent > 1."""

    scale: float = 1.0
    exponent: float = 1.5

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ValueError("coupling scale must be positive")
        if not self.exponent > 1.0:
            raise ValueError("coupling exponent must exceed 1 so h/eps -> 0")


def couple_resolution(eps: float, coupling: ResolutionCoupling) -> float:
    """Nominal mesh size for neighborhood radius eps."""
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    return coupling.scale * eps ** coupling.exponent


@dataclass
class TriangulationMesh:
    """Structured triangulation with region labels and P1 operators."""

    spec: DomainSpec
    h_nominal: float
    pad: float
    nx: int
    ny: int
    hx: float
    hy: float
    box: Tuple[float, float, float, float]
    verts: np.ndarray          # (n_vert, 2)
    tris: np.ndarray           # (n_tri, 3) vertex ids
    labels: np.ndarray         # (n_tri,) INTERIOR / COLLAR / EXTERIOR
    areas: np.ndarray          # (n_tri,)
    centroids: np.ndarray      # (n_tri, 2)
    tri_xy: np.ndarray         # (n_tri, 3, 2) vertex coordinates
    grad_mats: np.ndarray      # (n_tri, 2, 3) P1 gradient operators
    neighbors: np.ndarray      # (n_tri, 3) edge-adjacent ids, -1 = none
    _collar_vertex_mask: np.ndarray = field(default=None, repr=False)

    @property
    def n_vert(self) -> int:
        return self.verts.shape[0]

    @property
    def n_tri(self) -> int:
        return self.tris.shape[0]

    @property
    def diameter(self) -> float:
        """Largest simplex diameter (the cell hypotenuse)."""
        return float(np.hypot(self.hx, self.hy))

    @cached_property
    def interior_ids(self) -> np.ndarray:
        return np.flatnonzero(self.labels == INTERIOR).astype(np.int64)

    @cached_property
    def collar_ids(self) -> np.ndarray:
        return np.flatnonzero(self.labels == COLLAR).astype(np.int64)

    @property
    def collar_vertex_mask(self) -> np.ndarray:
        """Boolean mask of vertices incident to a collar simplex."""
        if self._collar_vertex_mask is None:
            m = np.zeros(self.n_vert, dtype=bool)
            m[self.tris[self.labels == COLLAR].ravel()] = True
            self._collar_vertex_mask = m
        return self._collar_vertex_mask

    def cell_tri_ids(self, i: int, j: int) -> Tuple[int, int]:
        """(lower, upper) simplex ids of grid cell (i, j)."""
        base = 2 * (j * self.nx + i)
        return base, base + 1

    def gradients(self, u: np.ndarray) -> np.ndarray:
        """Per-simplex gradient (n_tri, 2) of a nodal field."""
        return np.einsum("tds,ts->td", self.grad_mats, u[self.tris])

    def collar_side_masks(self) -> dict:
        """Boolean simplex masks of each Dirichlet side's collar band.

        Bands of adjacent sides overlap in the corner squares.
        """
        x0, y0, x1, y1 = self.spec.omega
        cx = self.centroids[:, 0]
        cy = self.centroids[:, 1]
        collar = self.labels == COLLAR
        out = {}
        for side in self.spec.dirichlet_sides:
            if side == "left":
                m = cx < x0
            elif side == "right":
                m = cx > x1
            elif side == "bottom":
                m = cy < y0
            else:
                m = cy > y1
            out[side] = collar & m
        return out


def build_structured_mesh(spec: DomainSpec, h: float,
                          pad: float = 0.0) -> TriangulationMesh:
    """Mesh the padded collar hull with uniform right triangles.

    The nominal size ``h`` is snapped per axis so an integer number of
    cells spans the collar hull exactly; the pad is then rounded up to
    whole cells, so interior plus collar simplices tile the collar hull.

    Parameters
    ----------
    spec : DomainSpec
    h : float
        Nominal cell side; the actual sides hx, hy satisfy hx, hy <= h
        and every simplex diameter is at most h * sqrt(2).
    pad : float
        Extra margin meshed beyond the collar hull on all four sides.
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    if pad < 0.0:
        raise ValueError("pad must be non-negative")
    px0, py0, px1, py1 = spec.omega_prime
    wp = px1 - px0
    hp = py1 - py0
    nxp = int(np.ceil(wp / h - 1e-12))
    nyp = int(np.ceil(hp / h - 1e-12))
    hx = wp / nxp
    hy = hp / nyp
    kx = int(np.ceil(pad / hx - 1e-12)) if pad > 0.0 else 0
    ky = int(np.ceil(pad / hy - 1e-12)) if pad > 0.0 else 0
    nx = nxp + 2 * kx
    ny = nyp + 2 * ky
    bx0 = px0 - kx * hx
    by0 = py0 - ky * hy
    box = (bx0, by0, bx0 + nx * hx, by0 + ny * hy)

    xs = bx0 + np.arange(nx + 1) * hx
    ys = by0 + np.arange(ny + 1) * hy
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii = ii.ravel()
    jj = jj.ravel()
    v00 = jj * (nx + 1) + ii
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1
    n_cell = nx * ny
    tris = np.empty((2 * n_cell, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])   # lower
    tris[1::2] = np.column_stack([v00, v11, v01])   # upper

    tri_xy = np.ascontiguousarray(verts[tris])
    centroids = tri_xy.mean(axis=1)
    areas = np.full(2 * n_cell, 0.5 * hx * hy)

    ox0, oy0, ox1, oy1 = spec.omega
    cx = centroids[:, 0]
    cy = centroids[:, 1]
    in_omega = (cx > ox0) & (cx < ox1) & (cy > oy0) & (cy < oy1)
    in_prime = (cx > px0) & (cx < px1) & (cy > py0) & (cy < py1)
    labels = np.where(in_omega, INTERIOR,
                      np.where(in_prime, COLLAR, EXTERIOR)).astype(np.int8)

    # P1 gradients: with b = p1 - p0, c = p2 - p0 and det = cross(b, c),
    # grad phi1 = (cy, -cx)/det, grad phi2 = (-by, bx)/det, phi0 closes the sum.
    b = tri_xy[:, 1, :] - tri_xy[:, 0, :]
    c = tri_xy[:, 2, :] - tri_xy[:, 0, :]
    det = b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0]
    grad = np.empty((2 * n_cell, 2, 3))
    grad[:, 0, 1] = c[:, 1] / det
    grad[:, 1, 1] = -c[:, 0] / det
    grad[:, 0, 2] = -b[:, 1] / det
    grad[:, 1, 2] = b[:, 0] / det
    grad[:, 0, 0] = -grad[:, 0, 1] - grad[:, 0, 2]
    grad[:, 1, 0] = -grad[:, 1, 1] - grad[:, 1, 2]

    # edge adjacency of the two-triangle cell split
    lower = np.arange(0, 2 * n_cell, 2)
    upper = lower + 1
    neighbors = np.full((2 * n_cell, 3), -1, dtype=np.int64)
    neighbors[lower, 0] = upper
    neighbors[lower, 1] = np.where(jj > 0, upper - 2 * nx, -1)       # below
    neighbors[lower, 2] = np.where(ii < nx - 1, upper + 2, -1)       # right
    neighbors[upper, 0] = lower
    neighbors[upper, 1] = np.where(jj < ny - 1, lower + 2 * nx, -1)  # above
    neighbors[upper, 2] = np.where(ii > 0, lower - 2, -1)            # left

    return TriangulationMesh(
        spec=spec, h_nominal=h, pad=pad, nx=nx, ny=ny, hx=hx, hy=hy,
        box=box, verts=verts, tris=tris, labels=labels, areas=areas,
        centroids=centroids, tri_xy=tri_xy, grad_mats=grad,
        neighbors=neighbors,
    )
