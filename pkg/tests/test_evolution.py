"""Evolution loop: balance bookkeeping, estimate checking, rupture logging."""

import dataclasses

import numpy as np
import pytest

from eigenfrac.evolution import (InvariantViolation, RunSetup, TimeGrid,
                                 evolve, verify_discrete_estimate,
                                 verify_energy_balance)
from eigenfrac.fem import uniform_stretch
from eigenfrac.mesh import (DomainSpec, ResolutionCoupling,
                            build_structured_mesh, couple_resolution)

import eigenfrac.evolution as evolution_mod


@pytest.fixture(scope="module")
def pristine_run():
    """Subcritical stretch on a coarse bar; stays crack-free throughout."""
    mesh = build_structured_mesh(DomainSpec(), 0.05, pad=0.08 + 1.5 * 0.05)
    setup = RunSetup(mesh=mesh, eps=0.08, load=uniform_stretch(rate=1.0),
                     grid=TimeGrid(3))
    return evolve(setup)


@pytest.fixture(scope="module")
def rupture_run():
    """Supercritical stretch on the resolution-coupled bar; snaps mid-ramp."""
    eps = 0.08
    h = couple_resolution(eps, ResolutionCoupling())
    mesh = build_structured_mesh(DomainSpec(), h, pad=eps + 1.5 * h)
    setup = RunSetup(mesh=mesh, eps=eps, load=uniform_stretch(rate=2.0),
                     grid=TimeGrid(4), capture_nodes=(0, 10, 16))
    return evolve(setup)


def test_time_grid_values_and_nesting():
    g = TimeGrid(2)
    assert np.array_equal(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert g.dt == 0.25
    fine = g.refine()
    assert fine.level == 3
    assert set(g.nodes) <= set(fine.nodes)
    for bad in (-1, 25):
        with pytest.raises(ValueError):
            TimeGrid(bad)


def test_run_setup_validation():
    mesh = build_structured_mesh(DomainSpec(), 0.25, pad=0.0)
    load = uniform_stretch(rate=1.0)
    with pytest.raises(ValueError):
        RunSetup(mesh=mesh, eps=0.1, load=load, grid=TimeGrid(1), kappa=0.0)
    with pytest.raises(ValueError):
        RunSetup(mesh=mesh, eps=-0.1, load=load, grid=TimeGrid(1))
    setup = RunSetup(mesh=mesh, eps=0.1, load=load, grid=TimeGrid(1))
    assert np.array_equal(setup.c_tensor, np.eye(2))


def test_pristine_balance_defect_is_the_censoring_error(pristine_run):
    res = pristine_run
    mesh = res.setup.mesh
    area = mesh.areas[mesh.interior_ids].sum()
    dt = res.setup.grid.dt
    # left-endpoint work censoring leaves exactly rate^2 * dt * t * area
    for rec in res.records:
        assert rec.balance_defect == pytest.approx(dt * rec.t * area,
                                                   abs=1e-12)
    assert res.max_balance_defect == pytest.approx(dt * area, rel=1e-12)
    assert verify_energy_balance(res) == res.max_balance_defect
    assert res.rupture_index is None
    assert res.rupture_time is None
    assert all(r.crack_size == 0 for r in res.records)


def test_estimate_holds_with_equality_for_linear_ramp(pristine_run):
    rep = verify_discrete_estimate(pristine_run)
    assert rep.ok
    assert rep.n_violations == 0
    # censoring defect == rate-integral majorant: every pair sits at -slack
    assert rep.worst_overshoot == pytest.approx(-1e-9, abs=1e-12)


def test_tampered_trajectories_are_flagged(pristine_run):
    res = pristine_run
    works = res.works.copy()
    works[3] -= 1e-3
    bad = dataclasses.replace(res, works=works)
    rep = verify_discrete_estimate(bad)
    assert not rep.ok and rep.n_violations >= 1
    assert rep.worst_overshoot == pytest.approx(1e-3, rel=1e-5)

    totals = res.totals.copy()
    totals[-1] += 1e-3
    bad = dataclasses.replace(res, totals=totals)
    assert not verify_discrete_estimate(bad).ok


def test_rupture_run_snaps_at_the_recorded_node(rupture_run):
    res = rupture_run
    assert res.rupture_index == 10
    assert res.rupture_time == 0.625
    final = res.records[-1]
    assert final.lam == pytest.approx(1.452060931899642, rel=1e-12)
    # after severing, the body is fully relaxed: all cost is surface
    assert final.elastic <= 1e-12
    assert final.total == pytest.approx(final.lam * res.setup.kappa,
                                        rel=1e-12)
    flags = [r.ruptured for r in res.records]
    assert flags == [False] * 10 + [True] * 7
    sizes = [r.crack_size for r in res.records]
    assert sizes == sorted(sizes)
    lams = [r.lam for r in res.records]
    assert lams == sorted(lams)
    rep = verify_discrete_estimate(res)
    assert rep.ok


def test_captured_snapshots_are_independent_copies(rupture_run):
    res = rupture_run
    assert sorted(res.captured) == [0, 10, 16]
    u0, gamma0, ids0 = res.captured[0]
    assert not np.any(u0) and not np.any(gamma0) and ids0.size == 0

    mesh = res.setup.mesh
    for node in (10, 16):
        u, gamma, ids = res.captured[node]
        grads = np.einsum("tds,ts->td", mesh.grad_mats[ids], u[mesh.tris[ids]])
        assert np.array_equal(gamma[ids], grads)
        off = np.ones(mesh.n_tri, dtype=bool)
        off[ids] = False
        assert not np.any(gamma[off])

    u_fin, gamma_fin, ids_fin = res.captured[16]
    assert u_fin is not res.u and gamma_fin is not res.gamma
    assert np.array_equal(u_fin, res.u)
    assert np.array_equal(ids_fin, res.ledger.broken_ids)
    assert set(res.captured[10][2]) <= set(ids_fin)


def test_leaky_eigenstrain_trips_the_runtime_invariant(monkeypatch):
    real_step = evolution_mod.minimize_step

    def corrupt(model, ledger, kappa, g_vals, **kw):
        step = real_step(model, ledger, kappa, g_vals, **kw)
        live = np.flatnonzero(~ledger.broken_mask)
        step.gamma[live[0]] = (1.0, 0.0)
        return step

    monkeypatch.setattr(evolution_mod, "minimize_step", corrupt)
    mesh = build_structured_mesh(DomainSpec(), 0.25, pad=0.1 + 0.5)
    setup = RunSetup(mesh=mesh, eps=0.1, load=uniform_stretch(rate=1.0),
                     grid=TimeGrid(1))
    with pytest.raises(InvariantViolation):
        evolve(setup)
