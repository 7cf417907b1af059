"""Masked L1 map losses and the shift / disturbance / de-shifted difference terms.

For a predicted and a ground-truth 2-channel map the residual is
``delta = pred - gt``. Per channel, ``mu`` and ``sigma`` are its mean and
population standard deviation over the mask, and

* ``lshift = |mu_0| + |mu_1|``
* ``ldisturb = sigma_0 + sigma_1``
* ``ldiff`` averages, per channel, ``min(|delta|, |delta - mu|)`` over the masked
  elements where ``delta * (delta - mu) > 0`` (other elements count as 0), then
  sums the channel averages.

The combined map loss is ``lshift + alpha * ldisturb + beta * ldiff``.
All reductions run in float64.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .core import as_raster


class ShapeMismatchError(ValueError):
    pass


class EmptyMaskError(ValueError):
    pass


class MissingMapError(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"missing map {self.name!r}"


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 2.0
    beta: float = 2.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class DeformationStats:
    mu: tuple[float, ...]
    sigma: tuple[float, ...]


@dataclass
class LossReport:
    l3d: float
    lnor: float
    ldp: float
    lbg: float
    lab: float
    luv: float
    ldf: float
    lshift: float
    ldisturb: float
    ldiff: float
    lshape: float
    ltrans: float
    ltotal: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _pair(pred, gt, mask):
    p = as_raster(pred, dtype=np.float64)
    g = as_raster(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatchError(f"pred {p.shape} vs gt {g.shape}")
    if mask is None:
        m = np.ones(p.shape[:2], dtype=bool)
    else:
        m = as_raster(mask, 1)
        if m.shape[:2] != p.shape[:2]:
            raise ShapeMismatchError(f"mask {m.shape} vs maps {p.shape}")
        m = m[:, :, 0] >= 0.5
    if not m.any():
        raise EmptyMaskError("loss mask is empty")
    return p, g, m


def masked_l1(pred, gt, mask=None) -> float:
    """Mean absolute error over masked pixels and all channels."""
    p, g, m = _pair(pred, gt, mask)
    return float(np.abs(p[m] - g[m]).mean())


def deformation_stats(pred, gt, mask=None) -> DeformationStats:
    p, g, m = _pair(pred, gt, mask)
    d = p[m] - g[m]
    return DeformationStats(tuple(d.mean(axis=0).tolist()), tuple(d.std(axis=0).tolist()))


def deformation_losses(pred, gt, mask=None) -> tuple[float, float, float]:
    """``(lshift, ldisturb, ldiff)`` of ``pred`` against ``gt``."""
    p, g, m = _pair(pred, gt, mask)
    d = p[m] - g[m]
    mu = d.mean(axis=0)
    sigma = d.std(axis=0)
    dm = d - mu
    # equality branch (delta * (delta - mu) == 0) contributes nothing
    selected = d * dm > 0
    per = np.where(selected, np.minimum(np.abs(d), np.abs(dm)), 0.0)
    return float(np.abs(mu).sum()), float(sigma.sum()), float(per.mean(axis=0).sum())


def combine_df(lshift: float, ldisturb: float, ldiff: float, w: LossWeights = LossWeights()) -> float:
    return lshift + w.alpha * ldisturb + w.beta * ldiff


def df_loss(pred, gt, mask=None, w: LossWeights = LossWeights()) -> float:
    return combine_df(*deformation_losses(pred, gt, mask), w)


BUNDLE_MAPS = ("m3d", "normal", "depth", "bgmask", "albedo", "uv", "df")


def composite_losses(pred: dict, gt: dict, mask=None, w: LossWeights = LossWeights()) -> LossReport:
    """Full loss report for bundles of predicted and ground-truth maps.

    Both bundles map names in ``BUNDLE_MAPS`` to rasters. ``mask`` defaults to
    the ground-truth ``bgmask``; the background loss itself covers every pixel.
    """
    for bundle in (pred, gt):
        for name in BUNDLE_MAPS:
            if bundle.get(name) is None:
                raise MissingMapError(name)
    if mask is None:
        mask = gt["bgmask"]
    l3d = masked_l1(pred["m3d"], gt["m3d"], mask)
    lnor = masked_l1(pred["normal"], gt["normal"], mask)
    ldp = masked_l1(pred["depth"], gt["depth"], mask)
    lbg = masked_l1(pred["bgmask"], gt["bgmask"], None)
    lab = masked_l1(pred["albedo"], gt["albedo"], mask)
    luv = df_loss(pred["uv"], gt["uv"], mask, w)
    lshift, ldisturb, ldiff = deformation_losses(pred["df"], gt["df"], mask)
    ldf = combine_df(lshift, ldisturb, ldiff, w)
    lshape = l3d + lnor + ldp + lbg
    ltrans = ldf + luv + lab
    return LossReport(l3d=l3d, lnor=lnor, ldp=ldp, lbg=lbg, lab=lab, luv=luv, ldf=ldf,
                      lshift=lshift, ldisturb=ldisturb, ldiff=ldiff,
                      lshape=lshape, ltrans=ltrans, ltotal=lshape + ltrans)
