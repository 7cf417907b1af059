"""PSNR, SSIM and MS-SSIM, plus evaluation of predicted backward maps.

SSIM uses a Gaussian window and averages the local index over the valid
region only (window fully inside the image). MS-SSIM follows the usual
product of contrast-structure terms at the finer scales and the full index at
the coarsest one, with 2x2 mean pooling between scales.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from . import maptrans
from .core import as_raster, luminance, normalized_coords

PSNR_CAP = 99.0
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


class ImageTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class MetricParams:
    window: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    msssim_weights: tuple[float, ...] = MSSSIM_WEIGHTS
    #: upper bound on the number of MS-SSIM scales actually used
    scales: int = 5

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd, got {self.window}")
        if abs(sum(self.msssim_weights) - 1.0) > 1e-4:
            raise ValueError("MS-SSIM weights must sum to 1")
        if not 1 <= self.scales <= len(self.msssim_weights):
            raise ValueError("scales must lie in [1, len(msssim_weights)]")


@dataclass
class EvalReport:
    psnr: float
    ssim: float
    msssim: float
    psnr_ds: float
    ssim_ds: float
    msssim_ds: float
    meta: dict = field(default_factory=dict)

    METRICS = ("psnr", "ssim", "msssim", "psnr_ds", "ssim_ds", "msssim_ds")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**{k: d[k] for k in cls.METRICS}, meta=dict(d.get("meta", {})))


def _pair(a, b):
    x = as_raster(a, dtype=np.float64)
    y = as_raster(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    return x, y


def psnr(a, b, dynamic_range: float = 1.0) -> float:
    x, y = _pair(a, b)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(dynamic_range ** 2 / mse)))


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable correlation of a 2-D image, cropped to the fully-overlapping region."""
    r = len(g) // 2
    out = ndimage.correlate1d(img, g, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, g, axis=1, mode="reflect")
    return out[r:img.shape[0] - r, r:img.shape[1] - r]


def _ssim_terms(x: np.ndarray, y: np.ndarray, p: MetricParams) -> tuple[float, float]:
    """Channel-averaged mean SSIM and mean contrast-structure term."""
    if min(x.shape[:2]) < p.window:
        raise ImageTooSmallError(f"image {x.shape[:2]} smaller than window {p.window}")
    g = gaussian_window(p.window, p.window_sigma)
    c1 = (p.k1 * p.dynamic_range) ** 2
    c2 = (p.k2 * p.dynamic_range) ** 2
    ssims, css = [], []
    for c in range(x.shape[2]):
        a, b = x[:, :, c], y[:, :, c]
        mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
        saa = _filter_valid(a * a, g) - mu_a ** 2
        sbb = _filter_valid(b * b, g) - mu_b ** 2
        sab = _filter_valid(a * b, g) - mu_a * mu_b
        cs = (2 * sab + c2) / (saa + sbb + c2)
        lum = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
        ssims.append(float(np.mean(lum * cs)))
        css.append(float(np.mean(cs)))
    return float(np.mean(ssims)), float(np.mean(css))


def ssim(a, b, p: MetricParams = MetricParams()) -> float:
    x, y = _pair(a, b)
    return _ssim_terms(x, y, p)[0]


def _downsample(x: np.ndarray) -> np.ndarray:
    h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def usable_scales(shape, p: MetricParams) -> int:
    n = min(shape[:2])
    s = 0
    while s < p.scales and n >= p.window:
        s += 1
        n //= 2
    return s


def ms_ssim(a, b, p: MetricParams = MetricParams()) -> float:
    """Multi-scale SSIM; scales that do not fit the window are dropped and weights renormalized."""
    x, y = _pair(a, b)
    n = usable_scales(x.shape, p)
    if n < 1:
        raise ImageTooSmallError(f"image {x.shape[:2]} smaller than window {p.window}")
    w = np.asarray(p.msssim_weights[:n], dtype=np.float64)
    w = w / w.sum()
    value = 1.0
    for s in range(n):
        full, cs = _ssim_terms(x, y, p)
        term = full if s == n - 1 else cs
        # negative terms would make fractional powers undefined
        value *= max(term, 0.0) ** w[s]
        if s < n - 1:
            x, y = _downsample(x), _downsample(y)
    return float(value)


def metric_triple(a, b, p: MetricParams = MetricParams()) -> tuple[float, float, float]:
    return psnr(a, b, p.dynamic_range), ssim(a, b, p), ms_ssim(a, b, p)


def _crop(r: np.ndarray, border: int) -> np.ndarray:
    if border <= 0:
        return r
    return r[border:-border, border:-border]


def evaluate_sample(pred_b, sample, p: MetricParams = MetricParams(), *, border: int = 0,
                    reference: str = "dewarped", source: str = "albedo",
                    texture=None, meta: dict | None = None) -> EvalReport:
    """Score a predicted backward map against a sample's ground truth.

    ``source`` picks the content that gets dewarped (``albedo`` or the image
    ``luminance``). The reference is that content dewarped with the
    ground-truth backward map (``reference="dewarped"``) or the pristine
    ``texture`` resampled to the backward-map grid (``reference="texture"``).
    ``border`` pixels are cropped from every side before scoring.
    """
    pred_b = as_raster(pred_b, 2)
    gt_b = as_raster(sample.backward_gt, 2)
    content = sample.albedo if source == "albedo" else luminance(sample.image)
    if reference == "dewarped":
        ref = maptrans.apply_backward(gt_b, content)
    elif reference == "texture":
        if texture is None:
            raise ValueError("texture reference needs the texture raster")
        h, w = gt_b.shape[:2]
        ref = maptrans.apply_backward(normalized_coords(w, h), texture)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    ds_b = maptrans.deshift(pred_b, gt_b)
    out = maptrans.apply_backward(pred_b, content)
    out_ds = maptrans.apply_backward(ds_b, content)
    ref, out, out_ds = (_crop(r, border) for r in (ref, out, out_ds))
    raw = metric_triple(out, ref, p)
    ds = metric_triple(out_ds, ref, p)
    params = dict(asdict(p), msssim_weights=list(p.msssim_weights))
    info = {"params": params, "border": border, "reference": reference, "source": source}
    info.update(meta or {})
    return EvalReport(*raw, *ds, meta=info)


def aggregate(reports: list[EvalReport]) -> dict:
    """Mean and population std per metric over a batch."""
    out = {"count": len(reports)}
    for k in EvalReport.METRICS:
        v = np.array([getattr(r, k) for r in reports], dtype=np.float64)
        out[k] = {"mean": float(v.mean()) if len(v) else None,
                  "std": float(v.std()) if len(v) else None}
    return out


def compare_map_routes(sample, pred_uv=None, pred_b=None, p: MetricParams = MetricParams(),
                       border: int = 0) -> dict:
    """Compare a backward map built from a UV map with a directly supplied one.

    Scores each backward map against the ground truth as a 2-channel raster
    and the content each one dewarps, raw and de-shifted. Defaults use the
    sample's own ground-truth maps, which isolates conversion error.
    """
    gt_b = as_raster(sample.backward_gt, 2)
    h, w = gt_b.shape[:2]
    uv = sample.uv if pred_uv is None else pred_uv
    routes = {
        "uv": maptrans.uv_to_backward(uv, sample.bgmask, w, h),
        "bw": gt_b if pred_b is None else as_raster(pred_b, 2),
    }
    ref = _crop(maptrans.apply_backward(gt_b, sample.albedo), border)
    result = {}
    for name, b in routes.items():
        ds = maptrans.deshift(b, gt_b)
        result[name] = {
            "map": metric_triple(_crop(b, border), _crop(gt_b, border), p),
            "dewarped": metric_triple(_crop(maptrans.apply_backward(b, sample.albedo), border), ref, p),
            "dewarped_ds": metric_triple(_crop(maptrans.apply_backward(ds, sample.albedo), border),
                                         ref, p),
        }
    return result
