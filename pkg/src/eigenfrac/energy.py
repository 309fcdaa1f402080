"""Energy bookkeeping: bulk, surface, external work, and reference values.

The total energy of a state (u, gamma) with crack neighborhood ledger L
is

    E = sum over interior simplices of area * (grad u - gamma)^T C (grad u - gamma)
      + kappa / (2 eps) * covered_area(L)

and the surface proxy lambda = covered_area / (2 eps) approximates the
crack length.  External work accrues through the moving boundary datum;
its increments and the time-gradient norms below feed the discrete
stability estimate and the energy-balance defect.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fem import BoundaryLoad
from .geometry import NeighborhoodLedger
from .mesh import INTERIOR, TriangulationMesh

# 4-point Gauss-Legendre rule on [-1, 1]
_GAUSS_X = np.array([-0.8611363115940526, -0.3399810435848563,
                     0.3399810435848563, 0.8611363115940526])
_GAUSS_W = np.array([0.3478548451374538, 0.6521451548625461,
                     0.6521451548625461, 0.3478548451374538])


@dataclass
class EnergyBreakdown:
    elastic: float
    surface: float
    total: float
    lam: float                      # surface proxy, covered area / (2 eps)
    griffith: Optional[float] = None


def elastic_energy(mesh: TriangulationMesh, c: np.ndarray, u: np.ndarray,
                   gamma: np.ndarray) -> float:
    """Bulk energy of the eigenstrain-corrected gradient over the body."""
    ids = mesh.interior_ids
    f = mesh.gradients(u)[ids] - gamma[ids]
    return float(np.sum(mesh.areas[ids] * np.einsum("td,de,te->t", f, c, f)))


def total_energy(mesh: TriangulationMesh, c: np.ndarray, kappa: float,
                 u: np.ndarray, gamma: np.ndarray,
                 ledger: NeighborhoodLedger) -> EnergyBreakdown:
    """Bulk plus surface energy of a state against its ledger.

    The eigenstrain must be supported on the ledger's broken set; a
    mismatch means the caller's crack bookkeeping diverged.
    """
    support = np.any(gamma != 0.0, axis=1)
    if np.any(support & ~ledger.broken_mask):
        raise ValueError("eigenstrain support escapes the ledger's crack set")
    el = elastic_energy(mesh, c, u, gamma)
    surf = kappa / (2.0 * ledger.eps) * ledger.covered_volume
    lam = ledger.covered_volume / (2.0 * ledger.eps)
    return EnergyBreakdown(elastic=el, surface=surf, total=el + surf, lam=lam)


def griffith_reference(mesh: TriangulationMesh, c: np.ndarray, kappa: float,
                       u: np.ndarray, crack_length: float) -> float:
    """Sharp-interface reference: bulk energy of u plus kappa * crack length."""
    ids = mesh.interior_ids
    f = mesh.gradients(u)[ids]
    bulk = float(np.sum(mesh.areas[ids] * np.einsum("td,de,te->t", f, c, f)))
    return bulk + kappa * crack_length


def boundary_rate_gradients(mesh: TriangulationMesh, load: BoundaryLoad,
                            t: float) -> np.ndarray:
    """Per-simplex gradient of the interpolated datum rate at time t."""
    rate_nodal = load.dt(t, mesh.verts)
    return mesh.gradients(rate_nodal)


def work_increment(mesh: TriangulationMesh, c: np.ndarray, u: np.ndarray,
                   gamma: np.ndarray, load: BoundaryLoad, t: float,
                   dt: float) -> float:
    """External work over [t, t + dt], frozen-state left-endpoint rule:

        2 * dt * sum area * (grad u - gamma)^T C (grad dt_g_h(t)).

    Exact in time for loads with a linear profile.
    """
    ids = mesh.interior_ids
    f = mesh.gradients(u)[ids] - gamma[ids]
    gdot = boundary_rate_gradients(mesh, load, t)[ids]
    return 2.0 * dt * float(np.sum(mesh.areas[ids]
                                   * np.einsum("td,de,te->t", f, c, gdot)))


def rate_gradient_norm(mesh: TriangulationMesh, c: np.ndarray,
                       load: BoundaryLoad, t: float) -> float:
    """Energy norm of the interpolated datum's gradient rate at time t."""
    ids = mesh.interior_ids
    g = boundary_rate_gradients(mesh, load, t)[ids]
    return float(np.sqrt(np.sum(mesh.areas[ids]
                                * np.einsum("td,de,te->t", g, c, g))))


def interval_rate_integrals(mesh: TriangulationMesh, c: np.ndarray,
                            load: BoundaryLoad,
                            nodes: np.ndarray) -> np.ndarray:
    """Per-interval integral of the rate-gradient norm, 4-point Gauss."""
    nodes = np.asarray(nodes, dtype=np.float64)
    out = np.empty(nodes.size - 1)
    for i in range(nodes.size - 1):
        a, b = nodes[i], nodes[i + 1]
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        acc = 0.0
        for x, w in zip(_GAUSS_X, _GAUSS_W):
            acc += w * rate_gradient_norm(mesh, c, load, mid + half * x)
        out[i] = half * acc
    return out


def e_of_m(mesh: TriangulationMesh, c: np.ndarray, load: BoundaryLoad,
           nodes: np.ndarray) -> float:
    """Largest per-interval rate-gradient integral: the grid fineness
    measure entering the discrete stability estimate."""
    return float(interval_rate_integrals(mesh, c, load, nodes).max())
