"""Scalar P1 finite elements for the cracked antiplane body.

Displacements are continuous piecewise-affine nodal fields; eigenstrain
fields are piecewise-constant per simplex.  Broken simplices carry no
stiffness (their eigenstrain absorbs the gradient), and the Dirichlet
datum acts by constraining every vertex of every collar simplex, so the
imposed field is attained on the whole collar closure.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components

from .mesh import COLLAR, INTERIOR, TriangulationMesh


class SolverFailure(RuntimeError):
    """Conjugate gradients failed to reach the residual target."""


def validate_elastic_tensor(c) -> np.ndarray:
    """Check symmetry and positive definiteness of the 2x2 tensor."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (2, 2):
        raise ValueError("elastic tensor must be 2x2")
    if c[0, 1] != c[1, 0]:
        raise ValueError("elastic tensor must be symmetric")
    if not (c[0, 0] > 0.0 and np.linalg.det(c) > 0.0):
        raise ValueError("elastic tensor must be positive definite")
    return c


@dataclass
class BoundaryLoad:
    """Time-dependent boundary datum g(t, x) = s(t) * (ax*x + ay*y + b).

    The time profile is s(t) = rate*t, plus an optional quadratic term
    for non-uniform loading histories.
    """

    ax: float
    ay: float
    b: float
    rate: float
    rate2: float = 0.0
    name: str = "affine-ramp"

    def profile(self, t: float) -> float:
        return self.rate * t + self.rate2 * t * t

    def profile_rate(self, t: float) -> float:
        return self.rate + 2.0 * self.rate2 * t

    def shape(self, pts: np.ndarray) -> np.ndarray:
        return self.ax * pts[..., 0] + self.ay * pts[..., 1] + self.b

    def __call__(self, t: float, pts: np.ndarray) -> np.ndarray:
        return self.profile(t) * self.shape(pts)

    def dt(self, t: float, pts: np.ndarray) -> np.ndarray:
        return self.profile_rate(t) * self.shape(pts)


def uniform_stretch(rate: float) -> BoundaryLoad:
    """Horizontal stretching ramp g = rate * t * x."""
    return BoundaryLoad(ax=1.0, ay=0.0, b=0.0, rate=rate, name="uniform-stretch")


def shear_ramp(rate: float) -> BoundaryLoad:
    """Vertical-coordinate ramp g = rate * t * y."""
    return BoundaryLoad(ax=0.0, ay=1.0, b=0.0, rate=rate, name="shear-ramp")


def affine_ramp(ax: float, ay: float, b: float, rate: float) -> BoundaryLoad:
    return BoundaryLoad(ax=ax, ay=ay, b=b, rate=rate)


def interpolate_boundary(load: BoundaryLoad, mesh: TriangulationMesh,
                         t: float) -> np.ndarray:
    """Nodal interpolant of the boundary datum at time t, on all vertices."""
    return load(t, mesh.verts)


def optimal_gamma(mesh: TriangulationMesh, u: np.ndarray,
                  crack_ids: Sequence[int]) -> np.ndarray:
    """Energy-optimal eigenstrain: the displacement gradient on the crack.

    Off the crack the eigenstrain must vanish, on it any deviation from
    the gradient only adds quadratic cost, so the minimizer copies the
    gradient exactly.
    """
    gamma = np.zeros((mesh.n_tri, 2))
    ids = np.asarray(crack_ids, dtype=np.int64)
    if ids.size:
        grads = np.einsum("tds,ts->td", mesh.grad_mats[ids], u[mesh.tris[ids]])
        gamma[ids] = grads
    return gamma


@dataclass
class SolveReport:
    u: np.ndarray
    iterations: int
    residual: float
    used_jacobi: bool


class ElasticModel:
    """Stiffness bookkeeping for a fixed mesh and elastic tensor.

    Local 3x3 simplex matrices are precomputed once; the global matrix
    for a crack state is maintained by subtracting the local matrices of
    newly broken simplices from a committed base state, so trial cuts
    cost only their own simplices.
    """

    def __init__(self, mesh: TriangulationMesh, c_tensor=np.eye(2)):
        self.mesh = mesh
        self.c = validate_elastic_tensor(c_tensor)
        g = mesh.grad_mats  # (n_tri, 2, 3)
        local = np.einsum("tia,ij,tjb->tab", g, self.c, g)
        # exact symmetry regardless of summation order
        local = 0.5 * (local + np.transpose(local, (0, 2, 1)))
        self.local = local * mesh.areas[:, None, None]
        self._rows = np.repeat(mesh.tris, 3, axis=1).ravel()
        self._cols = np.tile(mesh.tris, (1, 3)).ravel()
        self.base_mask = np.zeros(mesh.n_tri, dtype=bool)
        self.k_base = self._assemble(self.base_mask)

    def _assemble(self, crack_mask: np.ndarray) -> csr_matrix:
        keep = (self.mesh.labels == INTERIOR) & ~crack_mask
        idx = np.flatnonzero(keep)
        n = self.mesh.n_vert
        if idx.size == 0:
            return csr_matrix((n, n))
        sel = np.repeat(idx * 9, 9) + np.tile(np.arange(9), idx.size)
        k = coo_matrix((self.local.reshape(-1)[sel],
                        (self._rows[sel], self._cols[sel])),
                       shape=(n, n)).tocsr()
        k.sum_duplicates()
        return k

    def _delta(self, ids: np.ndarray) -> csr_matrix:
        n = self.mesh.n_vert
        sel = np.repeat(ids * 9, 9) + np.tile(np.arange(9), ids.size)
        d = coo_matrix((self.local.reshape(-1)[sel],
                        (self._rows[sel], self._cols[sel])),
                       shape=(n, n)).tocsr()
        d.sum_duplicates()
        return d

    def stiffness(self, crack_mask: np.ndarray) -> csr_matrix:
        """Stiffness for a crack state that contains the committed base."""
        new = crack_mask & ~self.base_mask
        if np.any(self.base_mask & ~crack_mask):
            return self._assemble(crack_mask)
        ids = np.flatnonzero(new & (self.mesh.labels == INTERIOR))
        if ids.size == 0:
            return self.k_base
        return self.k_base - self._delta(ids)

    def commit(self, crack_mask: np.ndarray) -> None:
        self.k_base = self.stiffness(crack_mask)
        self.base_mask = crack_mask.copy()


def _cg(k: csr_matrix, b: np.ndarray, x0: np.ndarray, rtol: float,
        maxiter: int, diag: Optional[np.ndarray] = None):
    """Plain/Jacobi CG; returns (x, iters, rel_residual)."""
    x = x0.copy()
    r = b - k @ x
    bnorm = float(np.linalg.norm(b))
    scale = bnorm if bnorm > 0.0 else max(float(np.linalg.norm(r)), 1e-300)
    target = rtol * scale
    rn = float(np.linalg.norm(r))
    if rn <= target:
        return x, 0, rn / scale
    if diag is not None:
        inv = np.where(diag > 0.0, 1.0 / np.where(diag > 0.0, diag, 1.0), 0.0)
        z = inv * r
    else:
        z = r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        kp = k @ p
        pkp = float(p @ kp)
        if pkp <= 0.0:
            break
        alpha = rz / pkp
        x += alpha * p
        r -= alpha * kp
        rn = float(np.linalg.norm(r))
        if rn <= target:
            return x, it, rn / scale
        z = inv * r if diag is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, rn / scale


def solve_displacement(model: ElasticModel, crack_mask: np.ndarray,
                       g_vals: np.ndarray, u0: Optional[np.ndarray] = None,
                       rtol: float = 1e-10) -> SolveReport:
    """Minimize the elastic energy at fixed crack and boundary datum.

    Collar vertices carry the datum exactly.  Free vertices connected to
    the collar through unbroken interior simplices are solved by CG
    (warm-started from ``u0`` when given, with a Jacobi-preconditioned
    retry before declaring failure).  Free components with no such
    connection feel no datum: they are set to the mean of ``u0`` over
    the component, or zero, mirroring their indifference to the energy.
    """
    mesh = model.mesh
    k = model.stiffness(crack_mask)
    fixed = mesh.collar_vertex_mask
    start = u0 if u0 is not None else np.zeros(mesh.n_vert)

    keep = (mesh.labels == INTERIOR) & ~crack_mask
    active = np.zeros(mesh.n_vert, dtype=bool)
    active[mesh.tris[keep].ravel()] = True

    # vertex components of the unbroken interior fabric
    tv = mesh.tris[keep]
    if tv.size:
        src = np.concatenate([tv[:, 0], tv[:, 1], tv[:, 2]])
        dst = np.concatenate([tv[:, 1], tv[:, 2], tv[:, 0]])
        g = csr_matrix((np.ones(src.size, dtype=np.int8), (src, dst)),
                       shape=(mesh.n_vert, mesh.n_vert))
        _, comp = connected_components(g, directed=False)
    else:
        comp = np.arange(mesh.n_vert)
    anchored_comps = np.unique(comp[fixed & active])
    anchored = np.isin(comp, anchored_comps) & active

    u = start.copy()
    u[fixed] = g_vals[fixed]

    free = anchored & ~fixed
    nf = int(free.sum())
    iters = 0
    res = 0.0
    used_jacobi = False
    if nf:
        kff = k[free][:, free].tocsr()
        b = -(k[free][:, fixed] @ g_vals[fixed])
        x0 = start[free]
        maxiter = max(100, int(50 * np.sqrt(nf)))
        x, iters, res = _cg(kff, b, x0, rtol, maxiter)
        if res > rtol:
            diag = kff.diagonal()
            x, it2, res = _cg(kff, b, x0, rtol, maxiter, diag=diag)
            iters += it2
            used_jacobi = True
            if res > rtol:
                raise SolverFailure(
                    f"CG stalled at relative residual {res:.3e} "
                    f"(target {rtol:.1e}, {nf} unknowns)")
        u[free] = x

    # floating components: constant fields of arbitrary level; pin them
    floating = active & ~anchored
    if np.any(floating):
        for c in np.unique(comp[floating]):
            m = floating & (comp == c)
            u[m] = float(np.mean(start[m]))
    return SolveReport(u=u, iterations=iters, residual=res,
                       used_jacobi=used_jacobi)
