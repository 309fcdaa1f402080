"""Exact planar distance kernels and rasterization primitives.

Every public routine exists in two functionally identical versions: a
scalar loop compiled by numba (``*_jit``) and a vectorized numpy
fallback (``*_numpy``).  The public module-level name is an alias for
the path selected by ``eigenfrac.jit.JIT_ENABLED``.  Both versions use
the same floating-point expressions so they agree bit-for-bit on every
input that avoids NaN.

Distances are Euclidean distances between closed point sets, so two
touching triangles have distance exactly 0.0.
"""

import numpy as np

from .jit import JIT_ENABLED, njit, prange


# ---------------------------------------------------------------------------
# scalar primitives (compiled when JIT is on)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _pt_seg_dist(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        ex = px - ax
        ey = py - ay
        return np.sqrt(ex * ex + ey * ey)
    t = ((px - ax) * dx + (py - ay) * dy) / l2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return np.sqrt(ex * ex + ey * ey)


@njit(cache=True)
def _seg_seg_dist(p0x, p0y, p1x, p1y, q0x, q0y, q1x, q1y):
    # proper crossing -> distance zero
    rx = p1x - p0x
    ry = p1y - p0y
    sx = q1x - q0x
    sy = q1y - q0y
    d1 = sx * (p0y - q0y) - sy * (p0x - q0x)
    d2 = sx * (p1y - q0y) - sy * (p1x - q0x)
    d3 = rx * (q0y - p0y) - ry * (q0x - p0x)
    d4 = rx * (q1y - p0y) - ry * (q1x - p0x)
    if ((d1 > 0.0 and d2 < 0.0) or (d1 < 0.0 and d2 > 0.0)) and \
       ((d3 > 0.0 and d4 < 0.0) or (d3 < 0.0 and d4 > 0.0)):
        return 0.0
    # otherwise the minimum is attained at an endpoint
    d = _pt_seg_dist(p0x, p0y, q0x, q0y, q1x, q1y)
    e = _pt_seg_dist(p1x, p1y, q0x, q0y, q1x, q1y)
    if e < d:
        d = e
    e = _pt_seg_dist(q0x, q0y, p0x, p0y, p1x, p1y)
    if e < d:
        d = e
    e = _pt_seg_dist(q1x, q1y, p0x, p0y, p1x, p1y)
    if e < d:
        d = e
    return d


@njit(cache=True)
def _pt_in_tri(px, py, ax, ay, bx, by, cx, cy):
    d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    d2 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
    d3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
    has_neg = (d1 < 0.0) or (d2 < 0.0) or (d3 < 0.0)
    has_pos = (d1 > 0.0) or (d2 > 0.0) or (d3 > 0.0)
    return not (has_neg and has_pos)


@njit(cache=True)
def _tri_tri_dist(a, b):
    # a, b: (3, 2) vertex arrays of closed triangles
    d = np.inf
    for i in range(3):
        i2 = (i + 1) % 3
        for j in range(3):
            j2 = (j + 1) % 3
            e = _seg_seg_dist(a[i, 0], a[i, 1], a[i2, 0], a[i2, 1],
                              b[j, 0], b[j, 1], b[j2, 0], b[j2, 1])
            if e < d:
                d = e
    if d > 0.0:
        # no boundary contact: containment is the only remaining overlap
        if _pt_in_tri(a[0, 0], a[0, 1], b[0, 0], b[0, 1],
                      b[1, 0], b[1, 1], b[2, 0], b[2, 1]):
            return 0.0
        if _pt_in_tri(b[0, 0], b[0, 1], a[0, 0], a[0, 1],
                      a[1, 0], a[1, 1], a[2, 0], a[2, 1]):
            return 0.0
    return d


@njit(cache=True)
def _tri_seg_dist(a, p0x, p0y, p1x, p1y):
    d = np.inf
    for i in range(3):
        i2 = (i + 1) % 3
        e = _seg_seg_dist(a[i, 0], a[i, 1], a[i2, 0], a[i2, 1],
                          p0x, p0y, p1x, p1y)
        if e < d:
            d = e
    if d > 0.0 and _pt_in_tri(p0x, p0y, a[0, 0], a[0, 1],
                              a[1, 0], a[1, 1], a[2, 0], a[2, 1]):
        return 0.0
    return d


# ---------------------------------------------------------------------------
# batch kernels, jit path
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _tri_dists_to_tri_jit(tri_xy, ids, target, out):
    for k in prange(ids.shape[0]):
        out[k] = _tri_tri_dist(tri_xy[ids[k]], target)


@njit(cache=True)
def _tri_dists_to_seg_jit(tri_xy, ids, p0x, p0y, p1x, p1y, out):
    for k in range(ids.shape[0]):
        out[k] = _tri_seg_dist(tri_xy[ids[k]], p0x, p0y, p1x, p1y)


@njit(cache=True)
def _raster_disks_jit(points, radius, x0, y0, cell, mask):
    ny, nx = mask.shape
    r2 = radius * radius
    for p in range(points.shape[0]):
        px = points[p, 0]
        py = points[p, 1]
        i_lo = max(0, int(np.floor((px - radius - x0) / cell)))
        i_hi = min(nx - 1, int(np.ceil((px + radius - x0) / cell)))
        j_lo = max(0, int(np.floor((py - radius - y0) / cell)))
        j_hi = min(ny - 1, int(np.ceil((py + radius - y0) / cell)))
        for j in range(j_lo, j_hi + 1):
            cy = y0 + (j + 0.5) * cell
            dy = cy - py
            for i in range(i_lo, i_hi + 1):
                if not mask[j, i]:
                    cx = x0 + (i + 0.5) * cell
                    dx = cx - px
                    if dx * dx + dy * dy <= r2:
                        mask[j, i] = True


@njit(cache=True)
def _points_near_segments_jit(points, segs, eps, out):
    for k in range(points.shape[0]):
        px = points[k, 0]
        py = points[k, 1]
        hit = False
        for s in range(segs.shape[0]):
            if _pt_seg_dist(px, py, segs[s, 0], segs[s, 1],
                            segs[s, 2], segs[s, 3]) <= eps:
                hit = True
                break
        out[k] = hit


# ---------------------------------------------------------------------------
# batch kernels, numpy fallback path
# ---------------------------------------------------------------------------

def _pt_seg_dist_np(p, a, b):
    # p, a, b broadcastable (..., 2) -> (...)
    d = b - a
    l2 = d[..., 0] ** 2 + d[..., 1] ** 2
    w = p - a
    t = np.where(l2 > 0.0, (w[..., 0] * d[..., 0] + w[..., 1] * d[..., 1])
                 / np.where(l2 > 0.0, l2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    e = p - (a + t[..., None] * d)
    return np.sqrt(e[..., 0] ** 2 + e[..., 1] ** 2)


def _seg_seg_dist_np(p0, p1, q0, q1):
    # all (..., 2); returns (...)
    r = p1 - p0
    s = q1 - q0
    d1 = s[..., 0] * (p0[..., 1] - q0[..., 1]) - s[..., 1] * (p0[..., 0] - q0[..., 0])
    d2 = s[..., 0] * (p1[..., 1] - q0[..., 1]) - s[..., 1] * (p1[..., 0] - q0[..., 0])
    d3 = r[..., 0] * (q0[..., 1] - p0[..., 1]) - r[..., 1] * (q0[..., 0] - p0[..., 0])
    d4 = r[..., 0] * (q1[..., 1] - p0[..., 1]) - r[..., 1] * (q1[..., 0] - p0[..., 0])
    proper = (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0))) & \
             (((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0)))
    d = np.minimum(
        np.minimum(_pt_seg_dist_np(p0, q0, q1), _pt_seg_dist_np(p1, q0, q1)),
        np.minimum(_pt_seg_dist_np(q0, p0, p1), _pt_seg_dist_np(q1, p0, p1)),
    )
    return np.where(proper, 0.0, d)


def _pt_in_tri_np(p, a, b, c):
    d1 = (b[..., 0] - a[..., 0]) * (p[..., 1] - a[..., 1]) - \
         (b[..., 1] - a[..., 1]) * (p[..., 0] - a[..., 0])
    d2 = (c[..., 0] - b[..., 0]) * (p[..., 1] - b[..., 1]) - \
         (c[..., 1] - b[..., 1]) * (p[..., 0] - b[..., 0])
    d3 = (a[..., 0] - c[..., 0]) * (p[..., 1] - c[..., 1]) - \
         (a[..., 1] - c[..., 1]) * (p[..., 0] - c[..., 0])
    has_neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
    has_pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
    return ~(has_neg & has_pos)


def _tri_dists_to_tri_numpy(tri_xy, ids, target, out):
    T = tri_xy[ids]  # (m, 3, 2)
    d = np.full(ids.shape[0], np.inf)
    for i in range(3):
        p0 = T[:, i, :]
        p1 = T[:, (i + 1) % 3, :]
        for j in range(3):
            q0 = target[j]
            q1 = target[(j + 1) % 3]
            d = np.minimum(d, _seg_seg_dist_np(p0, p1, q0[None, :], q1[None, :]))
    a_in_b = _pt_in_tri_np(T[:, 0, :], target[None, 0], target[None, 1],
                           target[None, 2])
    b_in_a = _pt_in_tri_np(target[None, 0], T[:, 0, :], T[:, 1, :], T[:, 2, :])
    d[(d > 0.0) & (a_in_b | b_in_a)] = 0.0
    out[:] = d


def _tri_dists_to_seg_numpy(tri_xy, ids, p0x, p0y, p1x, p1y, out):
    T = tri_xy[ids]
    q0 = np.array([p0x, p0y])
    q1 = np.array([p1x, p1y])
    d = np.full(ids.shape[0], np.inf)
    for i in range(3):
        d = np.minimum(d, _seg_seg_dist_np(T[:, i, :], T[:, (i + 1) % 3, :],
                                           q0[None, :], q1[None, :]))
    inside = _pt_in_tri_np(q0[None, :], T[:, 0, :], T[:, 1, :], T[:, 2, :])
    d[(d > 0.0) & inside] = 0.0
    out[:] = d


def _raster_disks_numpy(points, radius, x0, y0, cell, mask):
    ny, nx = mask.shape
    r2 = radius * radius
    for p in range(points.shape[0]):
        px = float(points[p, 0])
        py = float(points[p, 1])
        i_lo = max(0, int(np.floor((px - radius - x0) / cell)))
        i_hi = min(nx - 1, int(np.ceil((px + radius - x0) / cell)))
        j_lo = max(0, int(np.floor((py - radius - y0) / cell)))
        j_hi = min(ny - 1, int(np.ceil((py + radius - y0) / cell)))
        if i_hi < i_lo or j_hi < j_lo:
            continue
        cxs = x0 + (np.arange(i_lo, i_hi + 1) + 0.5) * cell
        cys = y0 + (np.arange(j_lo, j_hi + 1) + 0.5) * cell
        dx2 = (cxs - px) ** 2
        dy2 = (cys - py) ** 2
        mask[j_lo:j_hi + 1, i_lo:i_hi + 1] |= dy2[:, None] + dx2[None, :] <= r2


def _points_near_segments_numpy(points, segs, eps, out):
    hit = np.zeros(points.shape[0], dtype=bool)
    for s in range(segs.shape[0]):
        a = segs[s, 0:2][None, :]
        b = segs[s, 2:4][None, :]
        hit |= _pt_seg_dist_np(points, a, b) <= eps
    out[:] = hit


# ---------------------------------------------------------------------------
# public aliases
# ---------------------------------------------------------------------------

if JIT_ENABLED:
    _tri_dists_to_tri = _tri_dists_to_tri_jit
    _tri_dists_to_seg = _tri_dists_to_seg_jit
    _raster_disks = _raster_disks_jit
    _points_near_segments = _points_near_segments_jit
else:
    _tri_dists_to_tri = _tri_dists_to_tri_numpy
    _tri_dists_to_seg = _tri_dists_to_seg_numpy
    _raster_disks = _raster_disks_numpy
    _points_near_segments = _points_near_segments_numpy


def tri_tri_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two closed triangles given as (3, 2) arrays."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if JIT_ENABLED:
        return float(_tri_tri_dist(a, b))
    out = np.empty(1)
    _tri_dists_to_tri_numpy(a[None, :, :], np.zeros(1, dtype=np.int64), b, out)
    return float(out[0])


def tri_dists_to_tri(tri_xy: np.ndarray, ids: np.ndarray,
                     target: np.ndarray) -> np.ndarray:
    """Distances from the listed triangles to one target triangle."""
    out = np.empty(ids.shape[0])
    _tri_dists_to_tri(tri_xy, np.ascontiguousarray(ids, dtype=np.int64),
                      np.ascontiguousarray(target, dtype=np.float64), out)
    return out


def tri_dists_to_segment(tri_xy: np.ndarray, ids: np.ndarray,
                         p0, p1) -> np.ndarray:
    """Distances from the listed triangles to a closed segment p0-p1."""
    out = np.empty(ids.shape[0])
    _tri_dists_to_seg(tri_xy, np.ascontiguousarray(ids, dtype=np.int64),
                      float(p0[0]), float(p0[1]), float(p1[0]), float(p1[1]),
                      out)
    return out


def raster_union_of_disks(points: np.ndarray, radius: float, x0: float,
                          y0: float, cell: float, nx: int, ny: int) -> np.ndarray:
    """Boolean (ny, nx) grid of cells whose centers lie within ``radius`` of a point."""
    mask = np.zeros((ny, nx), dtype=np.bool_)
    _raster_disks(np.ascontiguousarray(points, dtype=np.float64),
                  float(radius), float(x0), float(y0), float(cell), mask)
    return mask


def points_near_segments(points: np.ndarray, segs: np.ndarray,
                         eps: float) -> np.ndarray:
    """Boolean mask of points within distance ``eps`` of any segment.

    ``segs`` has one row (x0, y0, x1, y1) per segment.
    """
    out = np.empty(points.shape[0], dtype=np.bool_)
    _points_near_segments(np.ascontiguousarray(points, dtype=np.float64),
                          np.ascontiguousarray(segs, dtype=np.float64),
                          float(eps), out)
    return out
