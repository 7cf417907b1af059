"""Non-learned map estimation from a bare photo.

The film region is segmented by an Otsu threshold on luminance and its
contour is reduced to four corners and four edge polylines. A Coons patch
over the arc-length parameterized edges (blended in the frame rectified by the
corner homography) maps texture coordinates to screen coordinates, and
inverting it per pixel gives a UV map. Illumination is
removed by dividing luminance by a mask-aware Gaussian blur of itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

from . import maptrans
from .core import as_raster, luminance, pixel_grid
from .maptrans import EmptyMaskError

CornerDetectionError = maptrans.CornerDetectionError


NEWTON_ITERS = 20
NEWTON_TOL = 1e-6
RETINEX_SIGMA = 15.0


class NoComponentError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class BoundaryQuad:
    """Four corners ``(x, y)`` clockwise from the top-left-most and the contour edges between them.

    ``edges[k]`` runs from ``corners[k]`` to ``corners[(k + 1) % 4]``, so the
    edges are top, right, bottom and left in that order.
    """

    corners: np.ndarray
    edges: list[np.ndarray]


@dataclass
class PipelineResult:
    mask: np.ndarray
    uv: np.ndarray
    df: np.ndarray
    backward: np.ndarray
    albedo: np.ndarray
    meta: dict = field(default_factory=dict)


def estimate_mask(image) -> np.ndarray:
    lum = luminance(image)[:, :, 0]
    q = np.floor(np.clip(lum, 0, 1) * 255 + 0.5).astype(np.uint8)
    if q.max() == q.min():
        raise NoComponentError("image has no contrast")
    thr, _ = cv2.threshold(q, 0, 255, cv2.THRESH_BINARY + cv2.THRESH_OTSU)
    fg = q > thr
    labels, n = ndimage.label(fg)
    if n == 0:
        raise NoComponentError("no pixel above the Otsu threshold")
    sizes = np.bincount(labels.ravel())[1:]
    keep = labels == (int(np.argmax(sizes)) + 1)
    keep = ndimage.binary_fill_holes(keep)
    return keep[:, :, None].astype(np.float32)


def extract_quad(mask) -> BoundaryQuad:
    contour = maptrans.mask_contour(mask)
    idx = maptrans.quad_corners(contour)
    return BoundaryQuad(contour[idx].astype(np.float64),
                        [e.astype(np.float64) for e in maptrans.contour_edges(contour, idx)])


class _Curve:
    """Arc-length parameterized polyline, evaluated at ``t`` in [0, 1]."""

    def __init__(self, pts: np.ndarray):
        pts = np.asarray(pts, dtype=np.float64)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        keep = np.concatenate([[True], seg > 0])
        self.s = s[keep] / max(s[-1], 1e-12)
        self.pts = pts[keep]

    def __call__(self, t):
        t = np.clip(t, 0.0, 1.0)
        return np.stack([np.interp(t, self.s, self.pts[:, 0]),
                         np.interp(t, self.s, self.pts[:, 1])], axis=-1)


def corner_homography(corners: np.ndarray) -> np.ndarray:
    """3x3 homography taking the unit square (TL, TR, BR, BL) onto ``corners``."""
    src = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.float32)
    return cv2.getPerspectiveTransform(src, np.asarray(corners, dtype=np.float32)).astype(np.float64)


def apply_homography(hm: np.ndarray, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    p = pts @ hm[:, :2].T + hm[:, 2]
    return p[..., :2] / p[..., 2:3]


class CoonsPatch:
    """Bilinearly blended patch ``(u, v) -> (x, y)`` over a quad's four edges.

    With ``rectify`` the edges are first mapped through the inverse of the
    corner homography and blended there, so straight edges under pure
    perspective reproduce the homography exactly. Without it the patch is
    blended directly in screen space.
    """

    def __init__(self, q: BoundaryQuad, rectify: bool = True):
        self.hm = corner_homography(q.corners) if rectify else None
        self.hm_inv = np.linalg.inv(self.hm) if rectify else None
        top, right, bottom, left = (self.to_domain(e) for e in q.edges)
        self.top = _Curve(top)              # corner 0 -> 1, v = 0
        self.right = _Curve(right)          # corner 1 -> 2, u = 1
        self.bottom = _Curve(bottom[::-1])  # corner 3 -> 2, v = 1
        self.left = _Curve(left[::-1])      # corner 0 -> 3, u = 0
        self.corners = self.to_domain(np.asarray(q.corners, dtype=np.float64))

    def to_domain(self, pts):
        return np.asarray(pts, dtype=np.float64) if self.hm is None else apply_homography(self.hm_inv, pts)

    def to_screen(self, pts):
        return pts if self.hm is None else apply_homography(self.hm, pts)

    def blend(self, u, v):
        """Patch point in the blending domain (screen space unless rectified)."""
        u = np.asarray(u, dtype=np.float64)[..., None]
        v = np.asarray(v, dtype=np.float64)[..., None]
        c0, c1, c2, c3 = self.corners
        ruled_v = (1 - v) * self.top(u[..., 0]) + v * self.bottom(u[..., 0])
        ruled_u = (1 - u) * self.left(v[..., 0]) + u * self.right(v[..., 0])
        bilin = (1 - u) * (1 - v) * c0 + u * (1 - v) * c1 + u * v * c2 + (1 - u) * v * c3
        return ruled_v + ruled_u - bilin

    def __call__(self, u, v):
        return self.to_screen(self.blend(u, v))


def inverse_bilinear(corners: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Closed-form ``(u, v)`` with ``bilinear(u, v) = (x, y)`` for quad corners TL, TR, BR, BL."""
    a, b, c, d = (np.asarray(p, dtype=np.float64) for p in corners)
    e = b - a
    f = d - a
    g = a - b + c - d
    hx = x - a[0]
    hy = y - a[1]

    def cross(px, py, qx, qy):
        return px * qy - py * qx

    k2 = cross(g[0], g[1], f[0], f[1])
    k1 = cross(e[0], e[1], f[0], f[1]) + cross(hx, hy, g[0], g[1])
    k0 = cross(hx, hy, e[0], e[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        if abs(k2) < 1e-9 * max(abs(cross(e[0], e[1], f[0], f[1])), 1e-12):
            v = -k0 / k1
        else:
            disc = np.sqrt(np.maximum(k1 * k1 - 4 * k0 * k2, 0.0))
            v1 = (-k1 - disc) / (2 * k2)
            v2 = (-k1 + disc) / (2 * k2)
            v = np.where(np.abs(v1 - 0.5) <= np.abs(v2 - 0.5), v1, v2)
        denx = e[0] + g[0] * v
        deny = e[1] + g[1] * v
        use_x = np.abs(denx) >= np.abs(deny)
        u = np.where(use_x, (hx - f[0] * v) / np.where(use_x, denx, 1.0),
                     (hy - f[1] * v) / np.where(use_x, 1.0, deny))
    return np.nan_to_num(u), np.nan_to_num(v)


def coons_uv(q: BoundaryQuad, out_w: int, out_h: int, mask=None, rectify: bool = True,
             return_info: bool = False):
    """UV map of a Coons patch over ``q`` by per-pixel Newton inversion.

    Newton starts from the closed-form bilinear inverse of the corners (in the
    rectified frame that is the unit square, so the start is the homography
    inverse) and pixels where it fails to converge keep that start. Off-mask
    pixels are 0; without a mask every pixel is solved.
    """
    patch = CoonsPatch(q, rectify)
    x, y = pixel_grid(out_w, out_h)
    if mask is None:
        sel = np.ones((out_h, out_w), dtype=bool)
    else:
        sel = as_raster(mask, 1)[:, :, 0] >= 0.5
    target = patch.to_domain(np.stack([x[sel], y[sel]], axis=-1))
    u0, v0 = inverse_bilinear(patch.corners, target[:, 0], target[:, 1])
    u0, v0 = np.clip(u0, 0, 1), np.clip(v0, 0, 1)
    u, v = u0.copy(), v0.copy()
    done = np.zeros(len(target), dtype=bool)
    h = 1e-4
    for _ in range(NEWTON_ITERS):
        act = np.flatnonzero(~done)
        if len(act) == 0:
            break
        ua, va = u[act], v[act]
        r = patch.blend(ua, va) - target[act]
        ju = (patch.blend(ua + h, va) - patch.blend(ua - h, va)) / (2 * h)
        jv = (patch.blend(ua, va + h) - patch.blend(ua, va - h)) / (2 * h)
        det = ju[:, 0] * jv[:, 1] - ju[:, 1] * jv[:, 0]
        safe = np.abs(det) > 1e-12
        det = np.where(safe, det, 1.0)
        du = np.where(safe, (jv[:, 1] * r[:, 0] - jv[:, 0] * r[:, 1]) / det, 0.0)
        dv = np.where(safe, (-ju[:, 1] * r[:, 0] + ju[:, 0] * r[:, 1]) / det, 0.0)
        u[act] = ua - du
        v[act] = va - dv
        done[act[safe & (np.hypot(du, dv) < NEWTON_TOL)]] = True
        # runaway iterates are abandoned early
        lost = act[(np.abs(u[act] - 0.5) > 2) | (np.abs(v[act] - 0.5) > 2)]
        u[lost], v[lost] = np.nan, np.nan
        done[lost] = True
    fallback = ~done | ~np.isfinite(u) | ~np.isfinite(v)
    u[fallback], v[fallback] = u0[fallback], v0[fallback]
    out = np.zeros((out_h, out_w, 2))
    out[sel] = np.clip(np.stack([u, v], axis=-1), 0.0, 1.0)
    out = out.astype(np.float32)
    if return_info:
        return out, {"newton_fallback": int(fallback.sum()), "solved": int(sel.sum())}
    return out


def deilluminate(image, mask, sigma: float = RETINEX_SIGMA) -> np.ndarray:
    """Retinex-style albedo estimate on the mask; 0 elsewhere."""
    lum = luminance(image)[:, :, 0].astype(np.float64)
    m = as_raster(mask, 1)[:, :, 0] >= 0.5
    if not m.any():
        raise EmptyMaskError("de-illumination mask is empty")
    mf = m.astype(np.float64)
    num = ndimage.gaussian_filter(lum * mf, sigma, mode="constant")
    den = ndimage.gaussian_filter(mf, sigma, mode="constant")
    illum = num / np.maximum(den, 1e-12)
    ratio = np.where(m, lum / np.maximum(illum, 1e-6), 0.0)
    target = lum[m].mean()
    scale = target / max(ratio[m].mean(), 1e-12)
    out = np.where(m, np.clip(ratio * scale, 0.0, 1.0), 0.0)
    return out[:, :, None].astype(np.float32)


def estimate_pipeline(image, res: int | None = None, oracle: dict | None = None) -> PipelineResult:
    """Mask, UV, deformation, backward and albedo estimates for one photo.

    ``oracle`` may hold ground-truth ``mask``, ``uv``, ``df`` or ``albedo``
    rasters; each one present replaces the corresponding estimate and feeds
    every downstream stage.
    """
    image = as_raster(image, 3)
    h, w = image.shape[:2]
    res_w = res_h = res
    if res is None:
        res_w, res_h = w, h
    oracle = oracle or {}
    timings: dict[str, float] = {}
    info: dict = {}

    def stage(name, fn):
        t = time.perf_counter()
        try:
            return fn()
        except Exception as exc:  # noqa: BLE001 - re-raised with stage label
            raise PipelineError(name, exc) from exc
        finally:
            timings[name] = time.perf_counter() - t

    mask = oracle.get("mask")
    if mask is None:
        mask = stage("mask", lambda: estimate_mask(image))
    uv = oracle.get("uv")
    if uv is None:
        quad = stage("quad", lambda: extract_quad(mask))
        uv, newton = stage("uv", lambda: coons_uv(quad, w, h, mask, return_info=True))
        info["newton"] = newton
        info["corners"] = quad.corners.tolist()
    df = oracle.get("df")
    if df is None:
        df = maptrans.deformation_from_uv(uv, mask)
    backward = stage("backward", lambda: maptrans.merge_and_convert(uv, df, mask, res_w, res_h))
    albedo = oracle.get("albedo")
    if albedo is None:
        albedo = stage("albedo", lambda: deilluminate(image, mask))
    info["timings"] = timings
    info["scatter_cap"] = maptrans.SCATTER_CAP
    info["oracle"] = sorted(oracle)
    return PipelineResult(as_raster(mask, 1), as_raster(uv, 2), as_raster(df, 2),
                          backward, as_raster(albedo, 1), info)
