"""Shared fixtures and the session-wide trajectory registry.

Every evolution produced anywhere in this test session is recorded, so
the final sweep can re-check the discrete energy estimate on all of
them, not just the ones a particular test happened to build.
"""

import time

import numpy as np
import pytest

import eigenfrac
import eigenfrac.cli
import eigenfrac.evolution
import eigenfrac.experiments
from eigenfrac.evolution import RunSetup, TimeGrid
from eigenfrac.fem import affine_ramp
from eigenfrac.mesh import (DomainSpec, ResolutionCoupling,
                            build_structured_mesh, couple_resolution)

# -- trajectory registry ----------------------------------------------------

TRAJECTORIES = []

_evolve_inner = eigenfrac.evolution.evolve


def _recording_evolve(setup):
    res = _evolve_inner(setup)
    TRAJECTORIES.append(res)
    return res


# rebind every module-level alias so indirect callers are recorded too
for _mod in (eigenfrac, eigenfrac.evolution, eigenfrac.experiments,
             eigenfrac.cli):
    _mod.evolve = _recording_evolve


# -- small shared helpers -----------------------------------------------------

def coupled_mesh(eps, spec=None, coupling=None):
    """Mesh at the resolution coupled to eps, padded for the ledger."""
    coupling = coupling or ResolutionCoupling()
    h = couple_resolution(eps, coupling)
    spec = spec or DomainSpec()
    return build_structured_mesh(spec, h, pad=eps + 1.5 * h)


def random_run_setup(k):
    """Seeded random small configuration for the invariant battery."""
    rng = np.random.default_rng(1000 + k)
    eps = float(rng.uniform(0.09, 0.16))
    mesh = coupled_mesh(eps)
    ax, ay = (float(v) for v in rng.uniform(-1.0, 1.0, size=2))
    rate = float(rng.uniform(0.5, 3.0))
    load = affine_ramp(ax=ax, ay=ay, b=0.0, rate=rate)
    grid = TimeGrid(2)
    return RunSetup(mesh=mesh, eps=eps, load=load, grid=grid,
                    capture_nodes=tuple(range(grid.nodes.size)))


# -- expensive shared studies -------------------------------------------------

@pytest.fixture(scope="session")
def tube_acceptance():
    t0 = time.perf_counter()
    rep = eigenfrac.experiments.tube_convergence_study()
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="session")
def bar_acceptance():
    t0 = time.perf_counter()
    rep, results = eigenfrac.experiments.bar_rupture_study()
    return rep, results, time.perf_counter() - t0


@pytest.fixture(scope="session")
def balance_acceptance():
    return eigenfrac.experiments.balance_defect_study(
        levels=(6, 7), eps=0.08, t_max=1.0)


@pytest.fixture(scope="session")
def oracle_acceptance():
    t0 = time.perf_counter()
    instances = eigenfrac.experiments.build_oracle_corpus(n=50, seed=11)
    rep = eigenfrac.experiments.run_oracle_comparison(instances)
    return rep, instances, time.perf_counter() - t0


@pytest.fixture(scope="session")
def invariant_runs():
    """200 seeded random evolutions with every node captured."""
    out = []
    for k in range(200):
        out.append(eigenfrac.evolution.evolve(random_run_setup(k)))
    return out
