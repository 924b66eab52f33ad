import numpy as np
import pytest

from etsl.errors import DegenerateFrame, ShouldersNotVisible
from etsl.landmarks import ClipSample, LandmarkFrame
from etsl.preprocess import (
    flatten_features,
    normalize_clip,
    normalize_frame,
    normalized_clip,
    NormalizedFrame,
)

from helpers import random_clip, random_frame


def frame_with(shoulders, extra=None, index=0):
    coords = np.zeros((53, 3))
    coords[5], coords[6] = shoulders
    if extra is not None:
        coords[20] = extra
    return LandmarkFrame(index, coords, np.ones(53, bool))


def test_formula_example():
    fr = frame_with(([0.2, 0.5, 0], [0.6, 0.5, 0]), extra=[0.4, 0.9, 0])
    nf = normalize_frame(fr)
    np.testing.assert_allclose(nf.points[20], [0.0, 1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(nf.points[5], [-0.5, 0, 0], atol=1e-12)
    np.testing.assert_allclose(nf.points[6], [0.5, 0, 0], atol=1e-12)


def test_similarity_invariance(rng):
    fr = random_frame(rng, quantize=False)
    t, s = rng.normal(size=3), 3.7
    moved = LandmarkFrame(0, fr.coords * s + t, fr.visible)
    np.testing.assert_allclose(normalize_frame(moved).points, normalize_frame(fr).points, atol=1e-9)


def test_degenerate_shoulders():
    with pytest.raises(DegenerateFrame):
        normalize_frame(frame_with(([0.3, 0.3, 0], [0.3, 0.3, 0])))


def test_shoulders_not_visible(rng):
    fr = random_frame(rng)
    fr.visible[6] = False
    with pytest.raises(ShouldersNotVisible):
        normalize_frame(fr)


def test_two_d_scale_ignores_z():
    fr = frame_with(([0, 0, 0], [3, 4, 12]), extra=[5, 0, 5])
    nf2 = normalize_frame(fr, coord_count=2)
    assert np.hypot(*(nf2.points[6] - nf2.points[5])[:2]) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(nf2.points[20], (np.array([5, 0, 5]) - [1.5, 2, 6]) / 5)
    nf3 = normalize_frame(fr, coord_count=3)
    assert np.linalg.norm(nf3.points[6] - nf3.points[5]) == pytest.approx(1.0, abs=1e-12)


def test_clip_length_preserved(rng):
    clip = random_clip(rng, 10)
    out = normalize_clip(clip)
    assert len(out) == 10
    for nf in out:
        np.testing.assert_allclose((nf.points[5] + nf.points[6]) / 2, 0, atol=1e-9)


def _clip_with_degenerate(k, n=8):
    frames = []
    for i in range(n):
        s = 1.0 + 0.1 * i
        sh = ([0, 0, 0], [0, 0, 0]) if i == k else ([0.1 * i, 0, 0], [0.1 * i + s, 0, 0])
        frames.append(frame_with(sh, extra=[1, 1, 1], index=i))
    return ClipSample("c", "s", frames)


def test_carry_forward_uses_previous_transform():
    clip = _clip_with_degenerate(5)
    out = normalize_clip(clip, policy="carry-forward")
    mid, scale = np.array([0.4 + 1.4 / 2, 0, 0]), 1.4  # frame 4's shoulders
    np.testing.assert_allclose(out[5].points[20], (np.array([1, 1, 1]) - mid) / scale)
    with pytest.raises(DegenerateFrame):
        normalize_clip(clip)


def test_carry_forward_needs_prior_frame():
    with pytest.raises(DegenerateFrame):
        normalize_clip(_clip_with_degenerate(0), policy="carry-forward")


def test_clip_normalization_is_per_clip(rng):
    a, b = random_clip(rng, 5, "a"), random_clip(rng, 5, "b")
    alone = normalize_clip(a)
    normalize_clip(b)
    again = normalize_clip(a)
    assert alone == again


def test_normalized_clip_flags_cache(rng):
    clip = normalized_clip(random_clip(rng, 3))
    assert clip.normalized
    assert normalized_clip(clip) is clip


@pytest.mark.parametrize("c,length", [(3, 159), (2, 106)])
def test_flatten_lengths(rng, c, length):
    nf = normalize_frame(random_frame(rng))
    v = flatten_features(nf, c)
    assert v.shape == (length,)
    np.testing.assert_array_equal(v.reshape(53, c), np.where(nf.mask[:, None], nf.points[:, :c], 0))


def test_flatten_all_masked():
    nf = NormalizedFrame(np.ones((53, 3)), np.zeros(53, bool))
    assert not flatten_features(nf).any()
