"""Acceptance criteria A1 to A10, each reported as one PASS/FAIL line."""

import hashlib
import time

import cv2
import numpy as np
import pytest

from filmrec import cli, core, estimator as est, losses as L, maptrans as mt, metrics as M
from filmrec import simulator as sim

RES = 256


def _endpoint_px(b, gt):
    return np.linalg.norm((b.astype(np.float64) - gt) * RES, axis=2)


def test_a1_oracle_recovery(criterion):
    psnrs, msssims, times = [], [], []
    for i in range(50):
        s = sim.generate_sample(101, i)
        t = time.perf_counter()
        df = mt.deformation_from_uv(s.uv, s.bgmask)
        b = mt.merge_and_convert(s.uv, df, s.bgmask, RES, RES)
        mt.apply_backward(b, s.albedo)
        times.append(time.perf_counter() - t)
        r = M.evaluate_sample(b, s, border=4)
        psnrs.append(r.psnr)
        msssims.append(r.msssim)
    p, ms, tmax = np.mean(psnrs), np.mean(msssims), max(times)
    criterion("A1", p >= 30 and ms >= 0.97 and tmax <= 2.0,
              f"mean PSNR {p:.2f} dB (>= 30), mean MS-SSIM {ms:.5f} (>= 0.97), "
              f"max recovery time {tmax:.2f} s (<= 2)")


def test_a2_identity_geometry(criterion):
    scene = sim.SceneConfig(coverage=1.0, ambient=1.0, diffuse=0.0, tint=(1.0, 1.0, 1.0),
                            shift_max=0.0)
    tex = sim.gen_texture(sim.TextureConfig(cell_px=60, border_px=8, seed=5))
    assert tex.shape[:2] == (RES, RES)
    s = sim.render_sample(tex, sim.flat_mesh(scene), scene)
    b = mt.uv_to_backward(s.uv, s.bgmask, RES, RES)
    g = core.normalized_coords(RES, RES)
    geo = np.abs(b - g).max() * RES
    img = mt.apply_backward(b, s.image)
    err = np.abs(img - tex).max()
    criterion("A2", geo <= 0.5 and err <= 1 / 255,
              f"max backward offset {geo:.4f} px (<= 0.5), max texture error {err * 255:.4f}/255 (<= 1)")


def test_a3_shift_algebra(criterion):
    rng = np.random.default_rng(3)
    gt = rng.uniform(-1, 1, (RES, RES, 2))
    mask = (rng.uniform(size=(RES, RES, 1)) > 0.3).astype(np.float64)
    worst = 0.0
    t = time.perf_counter()
    for _ in range(5):
        c = rng.uniform(-0.5, 0.5, 2)
        lshift, ldisturb, ldiff = L.deformation_losses(gt + c, gt, mask)
        worst = max(worst, abs(lshift - np.abs(c).sum()), ldisturb, ldiff)
    zero = L.deformation_losses(gt, gt, mask)
    elapsed = (time.perf_counter() - t) / 6
    criterion("A3", worst <= 1e-6 and zero == (0.0, 0.0, 0.0) and elapsed < 0.1,
              f"max constant-shift deviation {worst:.2e} (<= 1e-6), identity {zero}, "
              f"{elapsed * 1e3:.1f} ms per call (< 100)")


def test_a4_composite_identities(criterion):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        h, w = rng.integers(4, 24, 2)

        def bundle():
            ch = {"m3d": 3, "normal": 3, "depth": 1, "bgmask": 1, "albedo": 1, "uv": 2, "df": 2}
            return {k: rng.uniform(-1, 1, (h, w, c)) for k, c in ch.items()}

        mask = (rng.uniform(size=(h, w, 1)) > 0.2).astype(float)
        mask[0, 0] = 1
        r = L.composite_losses(bundle(), bundle(), mask, L.LossWeights(*rng.uniform(0, 3, 2)))
        worst = max(worst,
                    abs(r.lshape - (r.l3d + r.lnor + r.ldp + r.lbg)),
                    abs(r.ltrans - (r.ldf + r.luv + r.lab)),
                    abs(r.ltotal - (r.lshape + r.ltrans)))
    criterion("A4", worst <= 1e-9, f"max identity residual {worst:.2e} over 100 bundles (<= 1e-9)")


def test_a5_deshift_protocol(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(10):
        s = sim.generate_sample(105, i)
        base = M.evaluate_sample(s.backward_gt, s, border=4)
        c = rng.uniform(-0.03, 0.03, 2).astype(np.float32)
        shifted = M.evaluate_sample(s.backward_gt + c, s, border=4)
        worst = max(worst, abs(shifted.psnr_ds - base.psnr), abs(shifted.ssim_ds - base.ssim),
                    abs(shifted.msssim_ds - base.msssim))
    increases = 0
    for _ in range(100):
        gt = rng.uniform(0, 1, (32, 32, 2))
        pred = gt + rng.normal(rng.normal(0, 0.1, 2), rng.uniform(0.001, 0.2), gt.shape)
        m = (rng.uniform(size=(32, 32, 1)) > 0.5).astype(float)
        sel = m[..., 0] > 0.5
        before = np.mean((pred[sel] - gt[sel]) ** 2)
        after = np.mean((mt.deshift(pred, gt, m)[sel].astype(np.float64) - gt[sel]) ** 2)
        increases += after > before + 1e-12
    criterion("A5", worst <= 1e-6 and increases == 0,
              f"max shifted-vs-oracle metric gap {worst:.2e} (<= 1e-6), "
              f"MSE increases {increases}/100 (0)")


def test_a6_metric_units(criterion):
    a = np.full((32, 32, 1), 0.4)
    p = M.psnr(a, a + 0.1)
    rng = np.random.default_rng(6)
    x = rng.uniform(size=(48, 48, 1))
    y = np.clip(x + rng.normal(0, 0.1, x.shape), 0, 1)
    c1 = 0.01 ** 2
    const = M.ssim(np.full((20, 20, 1), 0.3), np.full((20, 20, 1), 0.7))
    closed = (2 * 0.3 * 0.7 + c1) / (0.3 ** 2 + 0.7 ** 2 + c1)
    single = M.MetricParams(msssim_weights=(1.0, 0, 0, 0, 0), scales=1)
    ms_gap = abs(M.ms_ssim(x, y, single) - M.ssim(x, y, single))
    checks = [abs(p - 20) <= 1e-3, M.ssim(x, x) == pytest.approx(1.0, abs=1e-12),
              abs(const - closed) <= 1e-6, ms_gap <= 1e-6]
    criterion("A6", all(checks),
              f"psnr(0.1 error) {p:.6f} dB, ssim(a,a) {M.ssim(x, x):.9f}, "
              f"constant ssim gap {abs(const - closed):.1e}, single-scale ms-ssim gap {ms_gap:.1e}")


def test_a7_merge_benefit(criterion):
    g = core.normalized_coords(RES, RES)
    band = np.any((g < 0.2) | (g > 0.8), axis=2)
    wins, gaps = 0, []
    for i in range(50):
        s = sim.generate_sample(107, i)
        m = s.bgmask[..., 0] > 0.5
        inner = m & np.all((s.uv >= 0.2) & (s.uv <= 0.8), axis=2)
        uvr = np.where(inner[..., None], s.uv, 0).astype(np.float32)
        df = mt.deformation_from_uv(s.uv, s.bgmask)
        plain = mt.uv_to_backward(uvr, inner[..., None].astype(np.float32), RES, RES)
        merged = mt.merge_and_convert(uvr, df, s.bgmask, RES, RES)
        e0 = _endpoint_px(plain, s.backward_gt)[band].mean()
        e1 = _endpoint_px(merged, s.backward_gt)[band].mean()
        wins += e1 < e0
        gaps.append((e0, e1))
    e0, e1 = np.mean(gaps, axis=0)
    criterion("A7", wins >= 45,
              f"merge lowers boundary-band error on {wins}/50 seeds (>= 45); "
              f"mean {e0:.2f} px without, {e1:.2f} px with")


def test_a8_duality(criterion):
    g = core.normalized_coords(RES, RES)
    inner = np.all((g > 0.05) & (g < 0.95), axis=2)
    worst = 0.0
    for i in range(20):
        s = sim.generate_sample(108, i)
        uv_at = mt.apply_backward(s.backward_gt, s.uv)
        m_at = mt.apply_backward(s.backward_gt, s.bgmask)[..., 0]
        sel = inner & (m_at > 0.999)
        worst = max(worst, float(np.abs(uv_at[sel] - g[sel]).max()))
    criterion("A8", worst <= 1.5 / RES,
              f"max |uv(backward(p)) - p| {worst * RES:.3f}/256 over 20 seeds (<= 1.5/256)")


def _input_crop(s):
    """Unrectified baseline: input luminance cropped to the film bounding box and resized."""
    lum = core.luminance(s.image)[..., 0]
    ys, xs = np.nonzero(s.bgmask[..., 0] > 0.5)
    crop = lum[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
    return cv2.resize(crop, (RES, RES), interpolation=cv2.INTER_LINEAR)[..., None]


def test_a9_estimator_sanity(criterion):
    persp = []
    for i in range(20):
        s = sim.generate_sample(109, i, tilt_deg_max=15, deform_amp=0.0)
        r = est.estimate_pipeline(s.image)
        persp.append(_endpoint_px(r.backward, s.backward_gt).mean())
    wins = 0
    for i in range(50):
        s = sim.generate_sample(209, i, tilt_deg_max=15, deform_amp=0.03, deform_modes=2)
        r = est.estimate_pipeline(s.image)
        ref = mt.apply_backward(s.backward_gt, s.albedo)
        ours = M.psnr(mt.apply_backward(r.backward, r.albedo), ref)
        wins += ours > M.psnr(_input_crop(s), ref)
    e = float(np.mean(persp))
    criterion("A9", e <= 2.0 and wins >= 45,
              f"perspective-only mean endpoint error {e:.3f} px (<= 2), "
              f"PSNR beats unrectified input on {wins}/50 (>= 45)")


def test_a10_determinism_and_formats(criterion, tmp_path):
    digests = []
    for run in ("a", "b"):
        assert cli.main(["gen", "--out", str(tmp_path / run), "--n", "3", "--seed", "1"]) == 0
        h = hashlib.sha256()
        for p in sorted((tmp_path / run).rglob("*.fmap")):
            h.update(p.relative_to(tmp_path / run).as_posix().encode() + p.read_bytes())
        digests.append(h.hexdigest())
    rng = np.random.default_rng(10)
    exact = 0
    for k in range(1000):
        h, w, c = int(rng.integers(1, 40)), int(rng.integers(1, 40)), int(rng.integers(1, 4))
        r = (rng.standard_normal((h, w, c)) * 10.0 ** rng.integers(-30, 30)).astype(np.float32)
        if k % 10 == 0:
            r.flat[0] = -0.0
            r.flat[-1] = np.float32(1e-45)
        p = tmp_path / "r.fmap"
        core.fmap_write(r, p)
        exact += core.fmap_read(p).tobytes() == r.tobytes()
    criterion("A10", digests[0] == digests[1] and exact == 1000,
              f"gen --seed 1 fmap digests equal: {digests[0] == digests[1]}, "
              f"bit-exact FMAP round-trips {exact}/1000")
