"""Flatten a photo with no ground truth at all.

The estimator thresholds the photo for the film mask, finds its four corners,
fills the inside with a Coons patch UV map and removes slow shading with a
retinex ratio. Warps that bend the film boundary are captured well; bulges
that leave the outline straight are not, which the second corpus shows.

    python demos/estimated_pipeline.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from filmrec import core, estimator, maptrans, metrics, simulator

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/estimated")
out.mkdir(parents=True, exist_ok=True)

corpora = {
    "boundary-dominant": dict(tilt_deg_max=15, deform_amp=0.03, deform_modes=2),
    "interior bulges": dict(tilt_deg_max=5, deform_amp=0.1, deform_modes=4),
}
for name, overrides in corpora.items():
    errs, psnrs = [], []
    for i in range(5):
        s = simulator.generate_sample(9, i, **overrides)
        r = estimator.estimate_pipeline(s.image)
        errs.append(np.linalg.norm((r.backward - s.backward_gt) * 256, axis=2).mean())
        ref = maptrans.apply_backward(s.backward_gt, s.albedo)
        psnrs.append(metrics.psnr(maptrans.apply_backward(r.backward, r.albedo), ref))
        if i == 0:
            core.image_write_png(s.image, out / f"{name.split()[0]}_photo.png")
            flat = np.clip(maptrans.apply_backward(r.backward, r.albedo), 0, 1)
            core.image_write_png(flat, out / f"{name.split()[0]}_albedo.png")
    print(f"{name:18s} endpoint error {np.mean(errs):5.2f} px   albedo PSNR {np.mean(psnrs):5.2f} dB")

t = r.meta["timings"]
print("stage timings (s):", {k: round(v, 3) for k, v in t.items()})
