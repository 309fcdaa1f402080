"""Single-node energy descent over crack states.

At each time node the state (u, gamma) minimizes bulk plus surface
energy subject to the current boundary datum, with the crack only
allowed to grow.  The default strategy combines

* greedy flips: break any simplex whose frozen-field energy content
  exceeds the exact surface increment it would cause — a certified
  one-simplex descent step, since re-solving only releases more; and
* nucleation cuts: trial full grid columns/rows (and completions and a
  few single-simplex trials), each evaluated by an exact re-solve,
  screened by cheap lower bounds and pruned branch-and-bound style.

An exhaustive reference minimizer enumerates every crack superset on
micro instances and is the correctness oracle for the strategy.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .energy import EnergyBreakdown, elastic_energy, total_energy
from .fem import ElasticModel, SolveReport, optimal_gamma, solve_displacement
from .geometry import CrackSet, NeighborhoodLedger
from .mesh import INTERIOR, TriangulationMesh

TIE_TOL = 1e-12


@dataclass
class MinimizeStrategy:
    """Knobs of the per-node descent."""

    variant: str = "greedy+nucleation"   # "greedy" | "greedy+nucleation"
    sweep_limit: int = 100
    cut_family: Tuple[str, ...] = ("columns", "completions", "singles")
    full_sweep: bool = False             # scan all unbroken interior simplices
    top_k: int = 32                      # global high-energy candidates per pass
    single_trials: int = 4               # exact trials of top single simplices
    exact_cutoff: int = 10               # enumerate exactly at most this many open ids

    def __post_init__(self):
        if self.variant not in ("greedy", "greedy+nucleation"):
            raise ValueError(f"unknown strategy variant {self.variant!r}")
        for f in self.cut_family:
            if f not in ("columns", "completions", "singles"):
                raise ValueError(f"unknown cut family member {f!r}")
        if not 0 <= self.exact_cutoff <= 16:
            raise ValueError("exact_cutoff must lie in [0, 16]")


@dataclass
class StepResult:
    u: np.ndarray
    gamma: np.ndarray
    crack: CrackSet
    energy: EnergyBreakdown
    flips: int = 0
    cut_trials: int = 0
    cut_applied: Optional[str] = None
    solves: int = 0
    notes: List[str] = field(default_factory=list)


def _release_bounds(mesh: TriangulationMesh, c: np.ndarray, u: np.ndarray,
                    ids: np.ndarray) -> np.ndarray:
    """Frozen-field energy content of each unbroken simplex."""
    g = np.einsum("tds,ts->td", mesh.grad_mats[ids], u[mesh.tris[ids]])
    return mesh.areas[ids] * np.einsum("td,de,te->t", g, c, g)


class _Cut:
    """A joint crack increment: member ids, optional exact rectangle hull."""

    __slots__ = ("label", "ids", "rect")

    def __init__(self, label: str, ids: np.ndarray, rect=None):
        self.label = label
        self.ids = ids
        self.rect = rect


def _column_cuts(mesh: TriangulationMesh, broken_mask: np.ndarray) -> List[_Cut]:
    """Maximal unbroken vertical/horizontal interior bands of the grid."""
    cuts = []
    interior = mesh.labels == INTERIOR
    ok = interior & ~broken_mask
    cell_i = (np.arange(mesh.n_tri) // 2) % mesh.nx
    cell_j = (np.arange(mesh.n_tri) // 2) // mesh.nx
    bx0, by0 = mesh.box[0], mesh.box[1]
    for axis, idx in (("col", cell_i), ("row", cell_j)):
        n = mesh.nx if axis == "col" else mesh.ny
        for k in range(n):
            ids = np.flatnonzero(ok & (idx == k))
            if ids.size == 0:
                continue
            other = cell_j[ids] if axis == "col" else cell_i[ids]
            span = int(other.max() - other.min() + 1)
            rect = None
            if ids.size == 2 * span and not np.any(broken_mask & interior & (idx == k)):
                # the members tile the cell band exactly
                if axis == "col":
                    rect = (bx0 + k * mesh.hx, by0 + other.min() * mesh.hy,
                            bx0 + (k + 1) * mesh.hx, by0 + (other.max() + 1) * mesh.hy)
                else:
                    rect = (bx0 + other.min() * mesh.hx, by0 + k * mesh.hy,
                            bx0 + (other.max() + 1) * mesh.hx, by0 + (k + 1) * mesh.hy)
            cuts.append(_Cut(f"{axis}{k}", ids, rect))
    return cuts


def _completion_cuts(mesh: TriangulationMesh, broken_mask: np.ndarray) -> List[_Cut]:
    """Unbroken remainders of the cell bands meeting the crack's bounding box."""
    ids_b = np.flatnonzero(broken_mask)
    if ids_b.size == 0:
        return []
    cell_i = (ids_b // 2) % mesh.nx
    cell_j = (ids_b // 2) // mesh.nx
    interior = mesh.labels == INTERIOR
    ok = interior & ~broken_mask
    all_i = (np.arange(mesh.n_tri) // 2) % mesh.nx
    all_j = (np.arange(mesh.n_tri) // 2) // mesh.nx
    cuts = []
    for k in range(int(cell_i.min()), int(cell_i.max()) + 1):
        ids = np.flatnonzero(ok & (all_i == k))
        if ids.size:
            cuts.append(_Cut(f"complete-col{k}", ids))
    for k in range(int(cell_j.min()), int(cell_j.max()) + 1):
        ids = np.flatnonzero(ok & (all_j == k))
        if ids.size:
            cuts.append(_Cut(f"complete-row{k}", ids))
    return cuts


def minimize_step(model: ElasticModel, ledger: NeighborhoodLedger,
                  kappa: float, g_vals: np.ndarray,
                  strategy: Optional[MinimizeStrategy] = None,
                  u0: Optional[np.ndarray] = None,
                  rtol: float = 1e-10) -> StepResult:
    """Descend the node energy from the inherited crack state.

    Mutates ``ledger`` (and the model's committed stiffness) with every
    accepted move; moves are never undone, matching irreversibility.
    The result's energy is recomputed from scratch at the end and must
    agree with the incrementally tracked value.
    """
    strategy = strategy or MinimizeStrategy()
    mesh = model.mesh
    c = model.c
    half_eps = kappa / (2.0 * ledger.eps)

    rep = solve_displacement(model, ledger.broken_mask, g_vals, u0=u0, rtol=rtol)
    solves = 1
    u = rep.u
    gamma = optimal_gamma(mesh, u, ledger.broken_ids)
    e_el = elastic_energy(mesh, c, u, gamma)
    e_surf = half_eps * ledger.covered_volume
    model.commit(ledger.broken_mask)

    flips = 0
    cut_trials = 0
    cut_applied = None
    notes = []
    ds_cache = {}

    def surf_increment(t: int) -> float:
        key = (t, ledger.version)
        if key not in ds_cache:
            ds_cache[key] = half_eps * ledger.preview_add(t)
        return ds_cache[key]

    def candidates() -> np.ndarray:
        interior = mesh.labels == INTERIOR
        ok = interior & ~ledger.broken_mask
        if strategy.full_sweep:
            return np.flatnonzero(ok)
        nb = mesh.neighbors
        nb_broken = np.zeros(mesh.n_tri, dtype=bool)
        nb_edge = np.zeros(mesh.n_tri, dtype=bool)
        for k in range(3):
            col = nb[:, k]
            valid = col >= 0
            nb_broken[valid] |= ledger.broken_mask[col[valid]]
            nb_edge[~valid] = True
            nb_edge[valid] |= ~interior[col[valid]]
        mask = ok & (nb_broken | nb_edge)
        ids = np.flatnonzero(mask)
        pool = np.flatnonzero(ok & ~mask)
        if pool.size and strategy.top_k > 0:
            rel = _release_bounds(mesh, c, u, pool)
            k = min(strategy.top_k, pool.size)
            top = pool[np.argpartition(-rel, k - 1)[:k]]
            ids = np.union1d(ids, top)
        return ids

    def greedy_pass() -> bool:
        nonlocal u, gamma, e_el, e_surf, solves, flips
        ids = candidates()
        if ids.size == 0:
            return False
        rel = _release_bounds(mesh, c, u, ids)
        accepted = []
        for t, r in zip(ids, rel):
            ds = surf_increment(int(t))
            if r > ds + TIE_TOL:
                dvol = ledger.add(int(t))
                e_surf += half_eps * dvol
                accepted.append(int(t))
        if not accepted:
            return False
        flips += len(accepted)
        rep = solve_displacement(model, ledger.broken_mask, g_vals, u0=u,
                                 rtol=rtol)
        solves += 1
        u = rep.u
        gamma[:] = optimal_gamma(mesh, u, ledger.broken_ids)
        e_el = elastic_energy(mesh, c, u, gamma)
        model.commit(ledger.broken_mask)
        return True

    def nucleation_pass() -> bool:
        nonlocal u, gamma, e_el, e_surf, solves, cut_trials, cut_applied
        family: List[_Cut] = []
        if "columns" in strategy.cut_family:
            family.extend(_column_cuts(mesh, ledger.broken_mask))
        if "completions" in strategy.cut_family:
            family.extend(_completion_cuts(mesh, ledger.broken_mask))
        if "singles" in strategy.cut_family and strategy.single_trials > 0:
            ok = np.flatnonzero((mesh.labels == INTERIOR) & ~ledger.broken_mask)
            if ok.size:
                rel = _release_bounds(mesh, c, u, ok)
                k = min(strategy.single_trials, ok.size)
                for t in sorted(ok[np.argpartition(-rel, k - 1)[:k]]):
                    family.append(_Cut(f"single{t}", np.array([t], dtype=np.int64)))
        if not family:
            return False

        gain_max = e_el  # a cut can release at most the current bulk energy
        # the continuum slab bound needs the whole tube to be countable
        pristine = (ledger.covered_volume == 0.0
                    and (ledger.count_exterior
                         or ledger.eps + max(mesh.hx, mesh.hy)
                         <= mesh.spec.collar_width))
        scored = []
        for cut in family:
            lb = half_eps * float(np.sum(
                mesh.areas[cut.ids][ledger.counts[cut.ids] == 0]))
            if pristine and cut.rect is not None:
                x0, y0, x1, y1 = cut.rect
                w, hgt = x1 - x0, y1 - y0
                slab = (min(w, hgt) + 2.0 * ledger.eps) * max(w, hgt)
                lb = max(lb, half_eps * slab)
            if lb < gain_max + TIE_TOL:
                scored.append((cut, lb))
        if not scored:
            return False
        exact = []
        for k, (cut, _) in enumerate(scored):
            ds = half_eps * ledger.preview_add_many(cut.ids, rect=cut.rect)
            if ds < gain_max + TIE_TOL:
                rel = float(np.sum(_release_bounds(mesh, c, u, cut.ids)))
                exact.append((ds - rel, ds, k, cut))
        # most promising first: a winner found early prunes the whole tail
        exact.sort(key=lambda p: p[:3])

        best_e = e_el + e_surf
        best = None
        for _, ds, _, cut in exact:
            if e_surf + ds >= best_e - TIE_TOL:
                continue  # even a full release cannot beat the incumbent
            trial_mask = ledger.broken_mask.copy()
            trial_mask[cut.ids] = True
            rep = solve_displacement(model, trial_mask, g_vals, u0=u, rtol=rtol)
            cut_trials += 1
            solves += 1
            g_trial = optimal_gamma(
                mesh, rep.u, np.flatnonzero(trial_mask))
            e_trial = elastic_energy(mesh, c, rep.u, g_trial) + e_surf + ds
            if e_trial < best_e - TIE_TOL:
                best_e = e_trial
                best = (cut, ds, rep.u, g_trial)
        if best is None:
            return False
        cut, ds, u_new, g_new = best
        dvol = ledger.add_many(cut.ids, rect=cut.rect)
        applied = half_eps * dvol
        if abs(applied - ds) > 1e-9 * max(1.0, abs(ds)):
            raise AssertionError("cut preview and application disagree")
        e_surf += applied
        u = u_new
        gamma[:] = g_new
        e_el = elastic_energy(mesh, c, u, gamma)
        model.commit(ledger.broken_mask)
        cut_applied = cut.label
        return True

    # Tiny open sets admit the literal global minimization: enumerate every
    # superset instead of trusting the heuristic families.  Production meshes
    # keep hundreds of open interior simplices and never take this branch.
    exact_done = False
    if strategy.variant == "greedy+nucleation" and strategy.exact_cutoff > 0:
        n_open = int(np.count_nonzero((mesh.labels == INTERIOR)
                                      & ~ledger.broken_mask))
        if 0 < n_open <= strategy.exact_cutoff:
            ex = exhaustive_minimize(model, ledger, kappa, g_vals,
                                     cap=strategy.exact_cutoff, rtol=rtol)
            solves += ex.n_states
            if ex.ids:
                add = np.asarray(ex.ids, dtype=np.int64)
                e_surf += half_eps * ledger.add_many(add)
                flips += add.size
                u = ex.u
                gamma = ex.gamma
                e_el = elastic_energy(mesh, c, u, gamma)
                model.commit(ledger.broken_mask)
                cut_applied = "exact"
            notes.append(f"exact enumeration over {n_open} open simplices")
            exact_done = True

    if not exact_done:
        for _ in range(strategy.sweep_limit):
            moved = greedy_pass()
            if strategy.variant == "greedy+nucleation":
                moved = nucleation_pass() or moved
            if not moved:
                break
        else:
            notes.append("sweep limit reached")

    crack = ledger.crack()
    bd = total_energy(mesh, c, kappa, u, gamma, ledger)
    tracked = e_el + e_surf
    if abs(bd.total - tracked) > 1e-10 * max(1.0, abs(bd.total)):
        raise AssertionError(
            f"energy drift: tracked {tracked!r} vs recomputed {bd.total!r}")
    return StepResult(u=u, gamma=gamma, crack=crack, energy=bd, flips=flips,
                      cut_trials=cut_trials, cut_applied=cut_applied,
                      solves=solves, notes=notes)


@dataclass
class ExhaustiveResult:
    ids: Tuple[int, ...]            # chosen increment, sorted
    energy: float
    u: np.ndarray
    gamma: np.ndarray
    n_states: int


def exhaustive_minimize(model: ElasticModel, ledger: NeighborhoodLedger,
                        kappa: float, g_vals: np.ndarray, cap: int = 16,
                        rtol: float = 1e-10) -> ExhaustiveResult:
    """Global minimum over every superset of the inherited crack.

    Enumerates all subsets of the unbroken interior simplices (at most
    ``cap`` of them), re-solving each.  Ties within 1e-12 go to the
    smaller increment, then lexicographic ids.  Pure: the ledger is only
    previewed, never mutated.
    """
    mesh = model.mesh
    c = model.c
    half_eps = kappa / (2.0 * ledger.eps)
    cand = np.flatnonzero((mesh.labels == INTERIOR) & ~ledger.broken_mask)
    if cand.size > cap:
        raise ValueError(f"{cand.size} candidates exceed the exhaustive cap {cap}")
    base_ids = ledger.broken_ids
    base_surf = half_eps * ledger.covered_volume

    best = None
    u_start = None
    for bits in range(1 << cand.size):
        subset = cand[[k for k in range(cand.size) if bits >> k & 1]]
        mask = ledger.broken_mask.copy()
        mask[subset] = True
        rep = solve_displacement(model, mask, g_vals, u0=u_start, rtol=rtol)
        if bits == 0:
            u_start = rep.u
        ids_all = np.concatenate([base_ids, subset])
        gam = optimal_gamma(mesh, rep.u, ids_all)
        ds = half_eps * ledger.preview_add_many(subset) if subset.size else 0.0
        e = elastic_energy(mesh, c, rep.u, gam) + base_surf + ds
        key = (e, subset.size, tuple(int(v) for v in subset))
        if best is None or e < best[0][0] - TIE_TOL or \
           (abs(e - best[0][0]) <= TIE_TOL and key[1:] < best[0][1:]):
            best = ((e, subset.size, key[2]), rep.u, gam)
    (e, _, ids), u, gamma = best
    return ExhaustiveResult(ids=ids, energy=e, u=u, gamma=gamma,
                            n_states=1 << cand.size)
