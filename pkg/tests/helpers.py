"""Shared test helpers: random clips and a finite-difference gradient oracle."""

import numpy as np
import torch

from etsl.landmarks import NUM_POINTS, ClipSample, LandmarkFrame


def q9(a):
    """Round to the 9-significant-digit grid the landmark format stores."""
    return np.vectorize(lambda v: float(f"{v:.9g}"))(np.asarray(a, dtype=np.float64))


def random_frame(rng, frame_index=0, visible_frac=1.0, quantize=True):
    coords = rng.uniform(-1.0, 2.0, size=(NUM_POINTS, 3))
    if quantize:
        coords = q9(coords)
    visible = rng.random(NUM_POINTS) < visible_frac
    visible[5] = visible[6] = True
    return LandmarkFrame(frame_index, coords, visible)


def random_clip(rng, n_frames=4, clip_id="clip_0", split=None, transcript=""):
    frames = [random_frame(rng, i, visible_frac=0.9) for i in range(n_frames)]
    return ClipSample(clip_id, "signer_1", frames, transcript=transcript, split=split)


def central_diff(f, params, h=1e-5):
    """Central finite differences of scalar ``f()`` w.r.t. every entry of each tensor in ``params``."""
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat, gflat = p.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                up = f().item()
                flat[i] = orig - h
                down = f().item()
                flat[i] = orig
                gflat[i] = (up - down) / (2 * h)
            grads.append(g)
    return grads


REL_FLOOR = 1e-6


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = torch.clamp(torch.maximum(a.abs(), n.abs()), min=REL_FLOOR)
        worst = max(worst, float(((a - n).abs() / denom).max()))
    return worst
