"""Structured meshing: labeling, snapping, areas, P1 gradients."""

import numpy as np
import pytest

from eigenfrac.mesh import (COLLAR, EXTERIOR, INTERIOR, DomainSpec,
                            ResolutionCoupling, build_structured_mesh,
                            couple_resolution)

WIDE = DomainSpec(omega=(0.0, 0.0, 1.0, 1.0), collar_width=0.5,
                  dirichlet_sides=("left", "right"))


def test_micro_mesh_counts_and_areas():
    m = build_structured_mesh(WIDE, 0.5, pad=0.0)
    assert m.n_tri == 16
    assert m.n_vert == 15
    assert (m.hx, m.hy) == (0.5, 0.5)
    assert m.box == (-0.5, 0.0, 1.5, 1.0)
    assert (m.labels == INTERIOR).sum() == 8
    assert (m.labels == COLLAR).sum() == 8
    assert (m.labels == EXTERIOR).sum() == 0
    assert m.areas.sum() == pytest.approx(2.0, rel=0, abs=1e-12)
    assert m.areas[m.labels == INTERIOR].sum() == pytest.approx(
        1.0, rel=0, abs=1e-12)
    assert m.diameter == pytest.approx(np.hypot(m.hx, m.hy), rel=0, abs=0)


def test_pad_rounds_up_to_whole_cells():
    m = build_structured_mesh(WIDE, 0.5, pad=0.3)
    # 0.3 of margin needs a full 0.5 cell on every side
    assert m.box == (-1.0, -0.5, 2.0, 1.5)
    assert m.n_tri == 48
    assert (m.labels == EXTERIOR).sum() == 32
    # padding must not relabel the body
    assert (m.labels == INTERIOR).sum() == 8
    assert (m.labels == COLLAR).sum() == 8


def test_collar_extends_only_on_dirichlet_sides():
    assert WIDE.omega_prime == (-0.5, 0.0, 1.5, 1.0)
    four = DomainSpec(omega=(0.0, 0.0, 1.0, 1.0), collar_width=0.25,
                      dirichlet_sides=("left", "right", "bottom", "top"))
    assert four.omega_prime == (-0.25, -0.25, 1.25, 1.25)


def test_snapping_is_per_axis():
    m = build_structured_mesh(DomainSpec(), 0.3, pad=0.0)
    # hull is 1.4 x 1.0; 0.3 snaps to 1.4/5 horizontally, 1.0/4 vertically
    assert m.hx == pytest.approx(1.4 / 5, rel=0, abs=1e-15)
    assert m.hy == 0.25
    assert m.hx <= 0.3 and m.hy <= 0.3
    assert m.n_tri == 40


def test_labels_follow_centroid_membership():
    m = build_structured_mesh(WIDE, 0.5, pad=0.5)
    x0, y0, x1, y1 = WIDE.omega
    px0, py0, px1, py1 = WIDE.omega_prime
    cx, cy = m.centroids[:, 0], m.centroids[:, 1]
    inside = (cx > x0) & (cx < x1) & (cy > y0) & (cy < y1)
    in_hull = (cx > px0) & (cx < px1) & (cy > py0) & (cy < py1)
    assert np.array_equal(m.labels == INTERIOR, inside)
    assert np.array_equal(m.labels == COLLAR, in_hull & ~inside)
    assert np.array_equal(m.labels == EXTERIOR, ~in_hull)


def test_gradients_exact_on_affine_data():
    m = build_structured_mesh(DomainSpec(), 0.11, pad=0.2)
    u = 3.0 * m.verts[:, 0] - 2.0 * m.verts[:, 1] + 0.7
    g = m.gradients(u)
    assert np.allclose(g[:, 0], 3.0, rtol=0, atol=1e-12)
    assert np.allclose(g[:, 1], -2.0, rtol=0, atol=1e-12)


def test_neighbors_are_mutual_and_share_an_edge():
    m = build_structured_mesh(WIDE, 0.5, pad=0.0)
    for t in range(m.n_tri):
        for n in m.neighbors[t]:
            if n < 0:
                continue
            assert t in m.neighbors[n]
            shared = set(m.tris[t]) & set(m.tris[int(n)])
            assert len(shared) == 2


def test_collar_side_masks_cover_the_collar():
    m = build_structured_mesh(WIDE, 0.5, pad=0.0)
    sides = m.collar_side_masks()
    assert set(sides) == {"left", "right"}
    union = np.zeros(m.n_tri, dtype=bool)
    for mask in sides.values():
        union |= mask
    assert np.array_equal(union, m.labels == COLLAR)
    assert not np.any(sides["left"] & sides["right"])


def test_resolution_coupling_values_and_validation():
    assert couple_resolution(0.04, ResolutionCoupling()) == 0.008
    assert couple_resolution(0.09, ResolutionCoupling(scale=2.0, exponent=1.25)
                             ) == pytest.approx(2.0 * 0.09 ** 1.25, rel=1e-15)
    with pytest.raises(ValueError):
        ResolutionCoupling(scale=1.0, exponent=1.0)
    with pytest.raises(ValueError):
        ResolutionCoupling(scale=-1.0, exponent=1.5)
    with pytest.raises(ValueError):
        couple_resolution(-0.1, ResolutionCoupling())


def test_mesh_builder_validation():
    with pytest.raises(ValueError):
        build_structured_mesh(WIDE, 0.0)
    with pytest.raises(ValueError):
        build_structured_mesh(WIDE, 0.5, pad=-0.1)


def test_cell_tri_ids_cover_every_simplex_once():
    m = build_structured_mesh(WIDE, 0.5, pad=0.0)
    seen = []
    for j in range(m.ny):
        for i in range(m.nx):
            lo, hi = m.cell_tri_ids(i, j)
            seen += [lo, hi]
            # the two halves of a cell share the diagonal
            assert len(set(m.tris[lo]) & set(m.tris[hi])) == 2
    assert np.array_equal(np.sort(seen), np.arange(m.n_tri))
