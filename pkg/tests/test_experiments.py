"""Study drivers: small frozen instances of each reported experiment."""

import csv

import numpy as np
import pytest

from eigenfrac.evolution import RunSetup, TimeGrid, evolve
from eigenfrac.experiments import (StudyReport, balance_defect_study,
                                   bar_rupture_study, build_oracle_corpus,
                                   crack_from_segment,
                                   goodset_convergence_study, growth_study,
                                   run_digest, run_oracle_comparison,
                                   simultaneous_study, tube_convergence_study)
from eigenfrac.fem import uniform_stretch
from eigenfrac.geometry import mc_tube_volume, tube_volume_exact
from eigenfrac.mesh import DomainSpec, build_structured_mesh

WIDE = DomainSpec(omega=(0.0, 0.0, 1.0, 1.0), collar_width=0.5,
                  dirichlet_sides=("left", "right"))


def test_report_csv_roundtrip(tmp_path):
    rep = StudyReport(kind="demo", rows=[{"a": 1, "b": 2.5}, {"a": 3, "b": -1.0}],
                      meta={"note": "x"})
    path = tmp_path / "rep.csv"
    rep.to_csv(str(path))
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert [r["a"] for r in rows] == ["1", "3"]
    assert [float(r["b"]) for r in rows] == [2.5, -1.0]
    assert "demo" in rep.summary() and "note" in rep.summary()
    with pytest.raises(ValueError):
        StudyReport(kind="empty", rows=[]).to_csv(str(path))


def test_crack_from_segment_on_a_hand_mesh():
    mesh = build_structured_mesh(WIDE, 0.5, pad=0.0)
    ids = crack_from_segment(mesh, (0.25, 0.5), (0.75, 0.5))
    assert ids.tolist() == [2, 3, 5, 10, 12, 13]
    # direction of traversal is irrelevant
    rev = crack_from_segment(mesh, (0.75, 0.5), (0.25, 0.5))
    assert np.array_equal(ids, rev)
    # every reported simplex actually touches the segment
    for i in ids:
        verts = mesh.verts[mesh.tris[i]]
        on_line = np.abs(verts[:, 1] - 0.5) < 1e-12
        in_span = (verts[:, 0] >= 0.25 - 1e-12) & (verts[:, 0] <= 0.75 + 1e-12)
        assert np.any(on_line & in_span)


def test_tube_study_single_width():
    rep = tube_convergence_study(eps_list=(0.08,))
    assert len(rep.rows) == 1
    row = rep.rows[0]
    assert set(row) >= {"eps", "h", "n_tri", "crack_size", "lam", "lam_ref",
                        "err_rel", "seconds"}
    assert row["lam_ref"] == pytest.approx(0.5 + np.pi * 0.08 / 2, rel=1e-12)
    # rasterized tube only ever over-covers the exact one
    assert row["lam"] >= row["lam_ref"]
    # the proxy can never fall below the slit length (up to mesh slop)
    assert row["lam"] >= 0.5 * (1.0 - 3.0 * row["h"] / row["eps"])
    assert row["err_rel"] == pytest.approx(
        abs(row["lam"] - row["lam_ref"]) / 0.5, rel=1e-12)
    assert rep.meta["max_err_rel"] == row["err_rel"]
    assert rep.meta["monotone"] is True


def test_worked_example_matches_closed_form_tube():
    # slit of length 0.5 at width 0.1: proxy should be L + pi*eps/2 = 0.657
    lam_ref = tube_volume_exact(0.5, 0.1) / 0.2
    assert lam_ref == pytest.approx(0.5 + np.pi * 0.05, rel=1e-12)
    vol = mc_tube_volume(np.array([[0.25, 0.5, 0.75, 0.5]]), 0.1,
                         n_samples=1_000_000, seed=3)
    lam_mc = float(np.asarray(vol).ravel()[0]) / 0.2
    assert abs(lam_mc - 0.657) / 0.657 <= 0.05


def test_bar_study_single_width_ruptures_at_frozen_node():
    rep, results = bar_rupture_study(eps_list=(0.08,), level=4)
    assert len(rep.rows) == 1 and len(results) == 1
    row = rep.rows[0]
    assert row["t_star"] == 0.625
    assert row["lam_final"] == pytest.approx(1.452060931899642, rel=1e-12)
    assert row["elastic_final"] <= 1e-12
    assert row["total_final"] == pytest.approx(row["lam_final"], rel=1e-12)
    assert rep.meta["t_stars"] == [0.625]
    assert results[0].rupture_index == 10


def test_balance_defect_halves_under_time_refinement():
    rep = balance_defect_study(levels=(3, 4))
    defects = rep.meta["defects"]
    assert defects[0] == pytest.approx(0.12419354838709695, rel=1e-9)
    assert defects[1] == pytest.approx(0.06209677419354864, rel=1e-9)
    assert rep.meta["refinement_ratios"][0] == pytest.approx(2.0, abs=1e-9)
    assert not any(r["ruptured"] for r in rep.rows)


def test_simultaneous_refinement_schedule():
    rep = simultaneous_study(schedule=((0.08, 3), (0.08, 4)))
    assert [r["t_star"] for r in rep.rows] == [0.625, 0.625]
    # the loading-rate majorant halves with the time step
    assert rep.rows[0]["e_m"] == pytest.approx(2 * rep.rows[1]["e_m"],
                                               rel=1e-12)
    series = rep.meta["lam_series"]
    assert [len(series[k]) for k in sorted(series)] == [9, 17]
    for vals in series.values():
        assert vals == sorted(vals)


def test_goodset_study_reaches_the_sharp_limit():
    rep = goodset_convergence_study(eps_list=(0.08,), level=4)
    row = rep.rows[0]
    assert row["ruptured"] is True
    assert row["t_pre"] == 0.25
    # pre-rupture the kept-region field is the boundary datum itself
    assert row["err_pre"] <= 1e-10
    # post-rupture it is piecewise constant up to an O(eps) boundary layer
    assert 0.0 < row["err_post"] < 0.01


def test_small_oracle_corpus_matches_exhaustive():
    corpus = build_oracle_corpus(n=6, seed=11)
    assert [i.kind for i in corpus] == ["bar"] * 3 + ["random"] * 3
    rep = run_oracle_comparison(corpus)
    assert rep.meta["bar_match_rate"] == 1.0
    assert rep.meta["random_match_rate"] == 1.0
    assert rep.meta["all_never_below"] is True
    assert rep.meta["min_gap"] >= -1e-9
    assert all(r["ids_match"] for r in rep.rows)


def test_growth_study_random_and_fixed_radii():
    rep = growth_study(n_clouds=12, seed=0)
    assert rep.meta["n_violations"] == 0
    assert rep.meta["worst_normalized"] <= rep.meta["constant"]
    assert all(r["ratio"] <= r["bound"] for r in rep.rows)

    paired = growth_study(n_clouds=4, seed=0,
                          pairs=((0.01, 0.02), (0.02, 0.02)))
    assert [(r["r"], r["r_prime"]) for r in paired.rows] == [
        (0.01, 0.02), (0.02, 0.02), (0.01, 0.02), (0.02, 0.02)]
    assert paired.meta["n_violations"] == 0


def test_run_digest_separates_trajectories():
    mesh = build_structured_mesh(DomainSpec(), 0.05, pad=0.08 + 1.5 * 0.05)

    def run(level):
        setup = RunSetup(mesh=mesh, eps=0.08, load=uniform_stretch(rate=1.0),
                         grid=TimeGrid(level))
        return evolve(setup)

    a1, a2, b = run(2), run(2), run(3)
    assert run_digest(a1) == run_digest(a2)
    assert run_digest(a1) != run_digest(b)
