"""UV map to backward map conversion, boundary augmentation and resampling.

A UV map stores, for every pixel of the warped photo, the normalized texture
coordinate that pixel shows. A backward map is the inverse: for every pixel of
the flat texture it stores the normalized coordinate in the warped photo where
that texture point can be found. Converting one into the other swaps the roles
of positions and values and re-grids the resulting scattered samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree

from .core import as_raster, normalized_coords, pixel_grid


#: uniform subsampling cap applied to scatter sites before triangulation
SCATTER_CAP = 20_000
#: a UV sample is valid iff mask >= MASK_THRESHOLD and |uv| > ZERO_EPS
MASK_THRESHOLD = 0.5
ZERO_EPS = 1e-6
EDGE_FRACTIONS = (0.25, 0.5, 0.75)


class DegenerateGeometryError(ValueError):
    pass


class TooFewPointsError(ValueError):
    pass


class CornerDetectionError(ValueError):
    pass


class EmptyMaskError(ValueError):
    pass


@dataclass
class ScatterSet:
    """Scattered ``(position, value)`` samples.

    ``positions`` is ``(N, 2)`` in target pixel-index coordinates ``(x, y)``;
    ``values`` is ``(N, 2)``.
    """

    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1, 2)
        if len(self.positions) != len(self.values):
            raise ValueError("positions and values differ in length")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.values))):
            raise ValueError("scatter set contains non-finite entries")

    def __len__(self):
        return len(self.positions)

    def union(self, other: "ScatterSet") -> "ScatterSet":
        return ScatterSet(np.vstack([self.positions, other.positions]),
                          np.vstack([self.values, other.values]))


def subsample(s: ScatterSet, cap: int = SCATTER_CAP) -> ScatterSet:
    """Deterministic subsample of at most ``cap`` sites, keeping input order.

    Convex-hull vertices are always kept so the subsample spans the same region;
    the remaining budget is a uniform draw from the other sites.
    """
    if cap is None or len(s) <= cap:
        return s
    try:
        hull = np.unique(ConvexHull(s.positions).vertices)
    except QhullError:
        hull = np.empty(0, dtype=np.int64)
    hull = hull[:cap]
    rest = np.setdiff1d(np.arange(len(s)), hull)
    pick = np.random.default_rng(0).choice(len(rest), size=cap - len(hull), replace=False)
    idx = np.sort(np.concatenate([hull, rest[pick]]))
    return ScatterSet(s.positions[idx], s.values[idx])


def scattered_interpolate(s: ScatterSet, out_w: int, out_h: int) -> np.ndarray:
    """Grid scattered samples onto an ``out_w x out_h`` 2-channel raster.

    Linear over the Delaunay triangulation inside the convex hull, nearest site
    outside it. Duplicate positions keep the first value.
    """
    pos, val = s.positions, s.values
    if len(pos) < 3:
        raise DegenerateGeometryError(f"need at least 3 sites, got {len(pos)}")
    pos, first = np.unique(pos, axis=0, return_index=True)
    val = val[first]
    if len(pos) < 3 or np.linalg.matrix_rank(pos - pos.mean(axis=0), tol=1e-9) < 2:
        raise DegenerateGeometryError("scatter sites are collinear")
    try:
        tri = Delaunay(pos)
    except QhullError as exc:
        raise DegenerateGeometryError(str(exc)) from exc

    x, y = pixel_grid(out_w, out_h)
    q = np.column_stack([x.ravel(), y.ravel()])
    simplex = tri.find_simplex(q)
    out = np.empty((len(q), val.shape[1]), dtype=np.float64)

    inside = simplex >= 0
    if inside.any():
        t = tri.transform[simplex[inside]]
        b = np.einsum("nij,nj->ni", t[:, :2, :], q[inside] - t[:, 2, :])
        w = np.column_stack([b, 1.0 - b.sum(axis=1)])
        verts = tri.simplices[simplex[inside]]
        out[inside] = np.einsum("nk,nkc->nc", w, val[verts])
    if (~inside).any():
        _, nn = cKDTree(pos).query(q[~inside])
        out[~inside] = val[nn]
    return out.reshape(out_h, out_w, -1).astype(np.float32)


def _valid_uv(uv: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return (mask[:, :, 0] >= MASK_THRESHOLD) & (np.linalg.norm(uv, axis=2) > ZERO_EPS)


def uv_scatter(uv, mask, out_w: int, out_h: int) -> ScatterSet:
    """Role-swapped scatter set of a UV map: sites at UV values, values at own coordinates."""
    uv = as_raster(uv, 2, dtype=np.float64)
    mask = as_raster(mask, 1)
    if uv.shape[:2] != mask.shape[:2]:
        raise ValueError("uv and mask shapes differ")
    valid = _valid_uv(uv, mask)
    n = int(valid.sum())
    if n < 3:
        raise TooFewPointsError(f"only {n} valid UV pixels")
    h, w = uv.shape[:2]
    coords = normalized_coords(w, h)
    pos = uv[valid] * (out_w, out_h) - 0.5
    return ScatterSet(pos, coords[valid])


def uv_to_backward(uv, mask, out_w: int, out_h: int, cap: int = SCATTER_CAP) -> np.ndarray:
    return scattered_interpolate(subsample(uv_scatter(uv, mask, out_w, out_h), cap), out_w, out_h)


def backward_to_uv(b, out_w: int, out_h: int, cap: int = SCATTER_CAP) -> np.ndarray:
    """Inverse role swap: re-derive a dense UV map on an ``out_w x out_h`` photo grid."""
    b = as_raster(b, 2, dtype=np.float64)
    h, w = b.shape[:2]
    s = ScatterSet((b * (out_w, out_h) - 0.5).reshape(-1, 2),
                   normalized_coords(w, h).reshape(-1, 2))
    return scattered_interpolate(subsample(s, cap), out_w, out_h)


def uv_from_deformation(df, mask=None) -> np.ndarray:
    df = as_raster(df, 2, dtype=np.float64)
    h, w = df.shape[:2]
    out = normalized_coords(w, h) + df
    if mask is not None:
        m = as_raster(mask, 1)[:, :, 0] >= MASK_THRESHOLD
        out[~m] = 0.0
    return out.astype(np.float32)


def deformation_from_uv(uv, mask) -> np.ndarray:
    """Displacement form of a UV map: ``uv - own normalized coordinate`` on the mask, 0 elsewhere."""
    uv = as_raster(uv, 2, dtype=np.float64)
    h, w = uv.shape[:2]
    m = as_raster(mask, 1)[:, :, 0] >= MASK_THRESHOLD
    out = uv - normalized_coords(w, h)
    out[~m] = 0.0
    return out.astype(np.float32)


# --- contour corners ---------------------------------------------------------

def mask_contour(mask) -> np.ndarray:
    """Outer boundary pixels of the largest mask component, ``(N, 2)`` integer ``(x, y)``.

    The chain runs clockwise on screen (y pointing down).
    """
    m = (as_raster(mask, 1)[:, :, 0] >= MASK_THRESHOLD).astype(np.uint8)
    contours, _ = cv2.findContours(m, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    if not contours:
        raise CornerDetectionError("mask is empty")
    c = max(contours, key=lambda c: (cv2.contourArea(c), len(c)))[:, 0, :].astype(np.int64)
    x, y = c[:, 0].astype(np.float64), c[:, 1].astype(np.float64)
    if np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
        c = c[::-1]
    return c


def _chord_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    n = np.hypot(*d)
    if n == 0:
        return np.hypot(*(p - a).T)
    return np.abs(d[0] * (p[:, 1] - a[1]) - d[1] * (p[:, 0] - a[0])) / n


def _arc_range(i: int, j: int, n: int) -> np.ndarray:
    return np.arange(i, i + ((j - i) % n) + 1) % n


def _turning_angle(pts: np.ndarray, i: int, k: int) -> float:
    n = len(pts)
    a = pts[(i - k) % n].astype(float)
    b = pts[i].astype(float)
    c = pts[(i + k) % n].astype(float)
    u, v = b - a, c - b
    nu, nv = np.hypot(*u), np.hypot(*v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.degrees(np.arccos(np.clip(u @ v / (nu * nv), -1.0, 1.0))))


def quad_corners(contour: np.ndarray, min_turn_deg: float = 45.0,
                 max_mean_dev: float = 0.05) -> np.ndarray:
    """Indices into ``contour`` of 4 dominant corners, clockwise from the top-left-most.

    Corners come from iterative max-deviation selection: the two mutually far
    points first, then the farthest point from the chord on each side. The
    result is rejected if any corner turns by less than ``min_turn_deg`` over a
    window of 1/20 of the perimeter or the contour deviates from the quad by
    more than ``max_mean_dev`` of its diagonal on average.
    """
    p = contour.astype(np.float64)
    n = len(p)
    if n < 8:
        raise CornerDetectionError(f"contour too short ({n} points)")
    c = p.mean(axis=0)
    i0 = int(np.argmax(np.hypot(*(p - c).T)))
    i1 = int(np.argmax(np.hypot(*(p - p[i0]).T)))
    corners = [i0, i1]
    for a, b in ((i0, i1), (i1, i0)):
        arc = _arc_range(a, b, n)[1:-1]
        if len(arc) == 0:
            raise CornerDetectionError("degenerate contour")
        corners.append(int(arc[np.argmax(_chord_distance(p[arc], p[a], p[b]))]))
    idx = np.array(sorted(set(corners)))
    if len(idx) != 4:
        raise CornerDetectionError(f"found {len(idx)} distinct corners")

    # order clockwise on screen (y down) starting from min(x + y)
    q = p[idx]
    ang = np.arctan2(q[:, 1] - c[1], q[:, 0] - c[0])
    idx = idx[np.argsort(ang)]
    start = int(np.argmin(p[idx].sum(axis=1)))
    idx = np.roll(idx, -start)

    k = max(2, n // 20)
    turns = [_turning_angle(p, int(i), k) for i in idx]
    diag = max(np.hypot(*(p[idx[2]] - p[idx[0]])), np.hypot(*(p[idx[3]] - p[idx[1]])))
    devs = []
    for e in range(4):
        a, b = int(idx[e]), int(idx[(e + 1) % 4])
        arc = _arc_range(a, b, n)
        devs.append(_chord_distance(p[arc], p[a], p[b]))
    mean_dev = float(np.concatenate(devs).mean()) / max(diag, 1e-9)
    if min(turns) < min_turn_deg or mean_dev > max_mean_dev:
        raise CornerDetectionError(
            f"contour is not quadrilateral (min turn {min(turns):.1f} deg, "
            f"mean deviation {mean_dev:.3f})")
    return idx


def contour_edges(contour: np.ndarray, corner_idx: np.ndarray) -> list[np.ndarray]:
    """The 4 contour polylines between consecutive corners (inclusive endpoints)."""
    n = len(contour)
    return [contour[_arc_range(int(corner_idx[e]), int(corner_idx[(e + 1) % 4]), n)]
            for e in range(4)]


def arc_length_point(poly: np.ndarray, frac: float) -> int:
    """Index of the polyline vertex nearest to arc-length fraction ``frac``."""
    seg = np.hypot(*np.diff(poly.astype(np.float64), axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return 0
    return int(np.argmin(np.abs(s - frac * s[-1])))


def boundary_pixels(mask) -> np.ndarray:
    """The 16 boundary pixels ``(x, y)``: 4 corners then 3 arc-length points per edge."""
    contour = mask_contour(mask)
    idx = quad_corners(contour)
    pts = [contour[i] for i in idx]
    for poly in contour_edges(contour, idx):
        pts.extend(poly[arc_length_point(poly, f)] for f in EDGE_FRACTIONS)
    return np.array(pts, dtype=np.int64)


def boundary_points(uv_aug, mask, out_w: int | None = None, out_h: int | None = None) -> ScatterSet:
    """Boundary samples of an augmenting UV map, role-swapped into backward space."""
    uv_aug = as_raster(uv_aug, 2, dtype=np.float64)
    h, w = uv_aug.shape[:2]
    out_w = w if out_w is None else out_w
    out_h = h if out_h is None else out_h
    px = boundary_pixels(mask)
    vals = uv_aug[px[:, 1], px[:, 0]]
    coords = (px + 0.5) / (w, h)
    return ScatterSet(vals * (out_w, out_h) - 0.5, coords)


def merge_and_convert(uv, df, mask, out_w: int, out_h: int, cap: int = SCATTER_CAP,
                      interior_df: bool = False) -> np.ndarray:
    """Backward map from a UV map whose blanks are filled by deformation-map points.

    By default only the 16 boundary points of the deformation-derived UV map are
    mixed in, skipping those where ``df`` is zero (no information). ``interior_df`` additionally adds every deformation pixel that the
    UV map leaves blank (debugging aid).
    """
    mask = as_raster(mask, 1)
    df = as_raster(df, 2)
    uv_df = uv_from_deformation(df, mask)
    s = subsample(uv_scatter(uv, mask, out_w, out_h), cap)
    # zero displacement marks a blank deformation pixel, like a zero UV pixel
    px = boundary_pixels(mask)
    known = np.linalg.norm(df[px[:, 1], px[:, 0]], axis=1) > ZERO_EPS
    bp = boundary_points(uv_df, mask, out_w, out_h)
    s = s.union(ScatterSet(bp.positions[known], bp.values[known]))
    if interior_df:
        blanks = (mask[:, :, 0] >= MASK_THRESHOLD) & ~_valid_uv(as_raster(uv, 2), mask)
        if blanks.any():
            h, w = mask.shape[:2]
            extra = ScatterSet(uv_df[blanks].astype(np.float64) * (out_w, out_h) - 0.5,
                               normalized_coords(w, h)[blanks])
            s = s.union(subsample(extra, cap))
    return scattered_interpolate(s, out_w, out_h)


# --- resampling --------------------------------------------------------------

def bilinear_sample(src, xs, ys) -> np.ndarray:
    """Bilinear read of ``src`` at pixel-index coordinates, clamping to the edge."""
    src = as_raster(src, dtype=np.float64)
    h, w = src.shape[:2]
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def apply_backward(b, src) -> np.ndarray:
    """Dewarp ``src`` with backward map ``b``; output has the backward map's size."""
    b = as_raster(b, 2, dtype=np.float64)
    src = as_raster(src)
    h, w = src.shape[:2]
    out = bilinear_sample(src, b[:, :, 0] * w - 0.5, b[:, :, 1] * h - 0.5)
    return out.astype(np.float32)


def deshift(pred, gt, mask=None) -> np.ndarray:
    """Remove the per-channel mean of ``pred - gt`` over ``mask`` from ``pred``."""
    pred64 = as_raster(pred, dtype=np.float64)
    gt64 = as_raster(gt, dtype=np.float64)
    if pred64.shape != gt64.shape:
        raise ValueError(f"shape mismatch {pred64.shape} vs {gt64.shape}")
    if mask is None:
        m = np.ones(pred64.shape[:2], dtype=bool)
    else:
        m = as_raster(mask, 1)[:, :, 0] >= MASK_THRESHOLD
    if not m.any():
        raise EmptyMaskError("de-shift mask is empty")
    mu = (pred64[m] - gt64[m]).mean(axis=0)
    return (pred64 - mu).astype(np.float32)
