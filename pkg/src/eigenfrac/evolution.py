"""Quasi-static crack evolution on a dyadic time grid.

Marches the incremental problem node by node: each node inherits the
previous crack, descends the node energy, and logs energies, work, and
rupture state.  Verification helpers replay the logged trajectory
against the one-sided energy estimate and the work balance.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .energy import (EnergyBreakdown, elastic_energy, e_of_m,
                     interval_rate_integrals, total_energy, work_increment)
from .fem import (BoundaryLoad, ElasticModel, interpolate_boundary,
                  optimal_gamma, validate_elastic_tensor)
from .geometry import (NeighborhoodLedger, collar_disconnected, good_set)
from .mesh import TriangulationMesh
from .minimizer import MinimizeStrategy, minimize_step

COMPETITOR_SLACK = 1e-9


class InvariantViolation(AssertionError):
    """A structural guarantee of the evolution failed at runtime."""


@dataclass(frozen=True)
class TimeGrid:
    """Dyadic partition of [0, 1] with 2**level intervals."""

    level: int

    def __post_init__(self):
        if not 0 <= self.level <= 24:
            raise ValueError("time grid level out of range")

    @property
    def nodes(self) -> np.ndarray:
        n = 1 << self.level
        return np.arange(n + 1, dtype=np.float64) / n

    @property
    def dt(self) -> float:
        return 1.0 / (1 << self.level)

    def refine(self) -> "TimeGrid":
        return TimeGrid(self.level + 1)


@dataclass
class RunSetup:
    mesh: TriangulationMesh
    eps: float
    load: BoundaryLoad
    grid: TimeGrid
    kappa: float = 1.0
    c_tensor: np.ndarray = None
    strategy: MinimizeStrategy = field(default_factory=MinimizeStrategy)
    count_exterior: bool = True
    capture_nodes: Tuple[int, ...] = ()
    rtol: float = 1e-10

    def __post_init__(self):
        if self.c_tensor is None:
            self.c_tensor = np.eye(2)
        self.c_tensor = validate_elastic_tensor(self.c_tensor)
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass
class NodeRecord:
    index: int
    t: float
    elastic: float
    surface: float
    total: float
    lam: float
    work_cum: float
    balance_defect: float
    crack_size: int
    ruptured: bool
    solves: int
    flips: int
    cut: Optional[str]
    competitor_gap: float  # competitor energy minus accepted energy, >= -slack


@dataclass
class EvolutionResult:
    setup: RunSetup
    records: List[NodeRecord]
    totals: np.ndarray            # node energies
    works: np.ndarray             # per-interval work increments
    rate_integrals: np.ndarray    # per-interval loading-rate norms, integrated
    e_m: float                    # largest interval integral
    u: np.ndarray                 # final displacement
    gamma: np.ndarray             # final eigenstrain
    ledger: NeighborhoodLedger
    rupture_index: Optional[int]
    captured: dict                # node index -> (u, gamma, broken ids) copies

    @property
    def rupture_time(self) -> Optional[float]:
        if self.rupture_index is None:
            return None
        return float(self.setup.grid.nodes[self.rupture_index])

    @property
    def max_balance_defect(self) -> float:
        return max(r.balance_defect for r in self.records)


def evolve(setup: RunSetup) -> EvolutionResult:
    """Run the full incremental evolution for one configuration."""
    mesh, eps, load = setup.mesh, setup.eps, setup.load
    c, kappa = setup.c_tensor, setup.kappa
    model = ElasticModel(mesh, c)
    ledger = NeighborhoodLedger(mesh, eps, count_exterior=setup.count_exterior)
    nodes = setup.grid.nodes

    records: List[NodeRecord] = []
    captured = {}
    totals = np.empty(nodes.size)
    works = np.zeros(nodes.size - 1)
    work_cum = 0.0
    u_prev = None
    gamma_prev = None
    g_prev = None
    gs = None
    gs_version = -1
    rupture_index = None

    for i, t in enumerate(nodes):
        g_vals = interpolate_boundary(load, mesh, float(t))
        if i == 0:
            u_warm = None
            competitor = np.inf
        else:
            # translation competitor: carry the old field with the datum
            u_warm = u_prev + (g_vals - g_prev)
            vol_before = ledger.covered_volume
            competitor = (elastic_energy(mesh, c, u_warm, gamma_prev)
                          + kappa / (2.0 * eps) * vol_before)
            works[i - 1] = work_increment(mesh, c, u_prev, gamma_prev, load,
                                          float(nodes[i - 1]),
                                          float(t - nodes[i - 1]))
            work_cum += works[i - 1]

        n_broken_before = ledger.broken_mask.sum()
        step = minimize_step(model, ledger, kappa, g_vals,
                             strategy=setup.strategy, u0=u_warm,
                             rtol=setup.rtol)
        if ledger.broken_mask.sum() < n_broken_before:
            raise InvariantViolation("crack set shrank")
        gap = competitor - step.energy.total
        if gap < -COMPETITOR_SLACK:
            raise InvariantViolation(
                f"node {i}: energy {step.energy.total!r} exceeds the "
                f"translation competitor {competitor!r}")

        # eigenstrain must equal the displacement gradient on the crack
        ids_b = ledger.broken_ids
        grads_b = np.einsum("tds,ts->td", mesh.grad_mats[ids_b],
                            step.u[mesh.tris[ids_b]])
        if not np.array_equal(step.gamma[ids_b], grads_b):
            raise InvariantViolation("eigenstrain is not the gradient copy")
        off = np.ones(mesh.n_tri, dtype=bool)
        off[ids_b] = False
        if np.any(step.gamma[off]):
            raise InvariantViolation("eigenstrain leaks off the crack")

        if ledger.version != gs_version:
            gs = good_set(mesh, ledger.counts > 0)
            gs_version = ledger.version
        ruptured = collar_disconnected(mesh, gs)
        if ruptured and rupture_index is None:
            rupture_index = i

        totals[i] = step.energy.total
        defect = abs(step.energy.total - totals[0] - work_cum)
        records.append(NodeRecord(
            index=i, t=float(t), elastic=step.energy.elastic,
            surface=step.energy.surface, total=step.energy.total,
            lam=step.energy.lam, work_cum=work_cum, balance_defect=defect,
            crack_size=len(step.crack), ruptured=ruptured,
            solves=step.solves, flips=step.flips, cut=step.cut_applied,
            competitor_gap=(0.0 if i == 0 else gap)))
        if i in setup.capture_nodes:
            captured[i] = (step.u.copy(), step.gamma.copy(),
                           ledger.broken_ids.copy())

        if i > 0 and records[i].lam < records[i - 1].lam - 1e-15:
            raise InvariantViolation("surface proxy decreased")
        u_prev, gamma_prev, g_prev = step.u, step.gamma, g_vals

    ints = interval_rate_integrals(mesh, c, load, nodes)
    return EvolutionResult(setup=setup, records=records, totals=totals,
                           works=works, rate_integrals=ints,
                           e_m=float(ints.max()) if ints.size else 0.0,
                           u=u_prev, gamma=gamma_prev, ledger=ledger,
                           rupture_index=rupture_index, captured=captured)


@dataclass
class EstimateReport:
    n_pairs: int
    n_violations: int
    worst_overshoot: float      # most positive lhs - rhs observed (<= 0 is clean)
    worst_pair: Optional[Tuple[int, int]]

    @property
    def ok(self) -> bool:
        return self.n_violations == 0


def verify_discrete_estimate(result: EvolutionResult, slack: float = 1e-9,
                             n_random_pairs: int = 100,
                             seed: int = 0) -> EstimateReport:
    """Check the one-sided node-to-node energy estimate on a trajectory.

    For nodes i1 < i2 the accepted energies must satisfy
        E[i2] <= E[i1] + sum of work increments
                 + (max interval rate integral) * (sum of rate integrals)
                 + slack
    over the intervening intervals.  All adjacent pairs are checked,
    plus a seeded random sample of long-range pairs.
    """
    e = result.totals
    n = e.size
    cum_w = np.concatenate([[0.0], np.cumsum(result.works)])
    cum_i = np.concatenate([[0.0], np.cumsum(result.rate_integrals)])
    em = result.e_m

    pairs = [(i, i + 1) for i in range(n - 1)]
    rng = np.random.default_rng(seed)
    for _ in range(n_random_pairs):
        i1, i2 = sorted(rng.integers(0, n, size=2))
        if i1 != i2:
            pairs.append((int(i1), int(i2)))

    worst = -np.inf
    worst_pair = None
    bad = 0
    for i1, i2 in pairs:
        lhs = e[i2]
        rhs = e[i1] + (cum_w[i2] - cum_w[i1]) + em * (cum_i[i2] - cum_i[i1])
        over = lhs - rhs - slack
        if over > worst:
            worst, worst_pair = over, (i1, i2)
        if over > 0.0:
            bad += 1
    return EstimateReport(n_pairs=len(pairs), n_violations=bad,
                          worst_overshoot=float(worst), worst_pair=worst_pair)


def verify_energy_balance(result: EvolutionResult) -> float:
    """Largest deviation of E(t) - E(0) from accumulated external work."""
    return result.max_balance_defect
