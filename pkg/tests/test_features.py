import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import disc, random_blob
from fingergeo.dataset import HandParams, draw_subject, synth_hand
from fingergeo.errors import EmptyShape, MissingFinger, TooFewRows
from fingergeo.features import (COLUMN_NAMES, FEATURE_NAMES, FeatureMatrix, NormalizationParams,
                                apply_minmax, build_feature_vector, centroid_distances,
                                convex_hull_area, ellipse_axes, extract_features, finger_features,
                                fit_minmax, phalanx_widths, read_matrix_csv, shape_scalars,
                                write_matrix_csv)
from fingergeo.imaging import FingerShape, drop_thumb, segment_hand, trace_boundary


def shape(mask, label="index"):
    mask = np.asarray(mask, bool)
    return FingerShape(label, mask, trace_boundary(mask), (0, 0))


def gift_wrap_area(points):
    """Jarvis march hull area (shoelace)."""
    pts = sorted(set(map(tuple, points)))
    start = pts[0]
    hull = [start]
    cur = start
    while True:
        cand = pts[0] if pts[0] != cur else pts[1]
        for p in pts:
            if p == cur:
                continue
            cross = (cand[0] - cur[0]) * (p[1] - cur[1]) - (cand[1] - cur[1]) * (p[0] - cur[0])
            if cross < 0 or (cross == 0 and math.dist(cur, p) > math.dist(cur, cand)):
                cand = p
        cur = cand
        if cur == start:
            break
        hull.append(cur)
    x = np.array([p[0] for p in hull])
    y = np.array([p[1] for p in hull])
    return 0.5 * abs(np.dot(x, np.roll(y, 1)) - np.dot(y, np.roll(x, 1)))


def corner_points(mask):
    rows, cols = np.nonzero(mask)
    return [(c + dx, r + dy) for r, c in zip(rows, cols) for dx in (-0.5, 0.5) for dy in (-0.5, 0.5)]


# --- shape scalars ---------------------------------------------------------------


def test_square_closed_forms():
    area, solidity, diameter = shape_scalars(shape(np.ones((10, 10))))
    assert area == 100 and solidity == pytest.approx(1.0)
    assert diameter == pytest.approx(11.2838, abs=1e-4)


def test_empty_mask_raises():
    with pytest.raises(EmptyShape):
        shape_scalars(np.zeros((4, 4), bool))


@pytest.mark.parametrize("radius", [3, 8, 20])
def test_convex_solidity_bounds(radius):
    m = disc(radius)
    area, solidity, _ = shape_scalars(m)
    assert 1 - 2 / math.sqrt(area) <= solidity <= 1.0


PENTOMINOES = [
    ["010", "111", "010"],  # plus
    ["11", "11", "10"],
    ["1111", "1000"],
    ["110", "011", "010"],
    ["111", "010", "010"],
]


@pytest.mark.parametrize("rows", PENTOMINOES)
def test_solidity_matches_gift_wrapping(rows):
    m = np.array([[c == "1" for c in r] for r in rows])
    m = np.pad(m, 2)
    hull = gift_wrap_area(corner_points(m))
    _, solidity, _ = shape_scalars(m)
    assert convex_hull_area(m) == pytest.approx(hull, abs=1e-9)
    assert solidity == pytest.approx(m.sum() / hull, abs=1e-6)


# --- ellipse axes -----------------------------------------------------------


def moment_axes(mask):
    """Direct double-sum over pixel squares (each square's own 1/12 included)."""
    rows, cols = np.nonzero(mask)
    n = rows.size
    xc, yc = cols.mean(), rows.mean()
    sxx = sum((c - xc) ** 2 + 1 / 12 for c in cols) / n
    syy = sum((r - yc) ** 2 + 1 / 12 for r in rows) / n
    sxy = sum((c - xc) * (r - yc) for r, c in zip(rows, cols)) / n
    vals = np.linalg.eigvalsh([[sxx, sxy], [sxy, syy]])
    return 4 * math.sqrt(vals[1]), 4 * math.sqrt(vals[0])


def test_disc_axes():
    major, minor = ellipse_axes(disc(30))
    assert major == pytest.approx(60, rel=0.02) and minor == pytest.approx(60, rel=0.02)


@pytest.mark.parametrize("w,h", [(5, 17), (12, 12), (30, 7), (1, 9)])
def test_rectangle_axes(w, h):
    m = np.ones((h, w), bool)
    major, minor = ellipse_axes(m)
    oracle = moment_axes(m)
    assert (major, minor) == pytest.approx(oracle, abs=1e-6)
    closed = sorted([4 * math.sqrt((w * w - 1) / 12 + 1 / 12), 4 * math.sqrt((h * h - 1) / 12 + 1 / 12)])
    assert (minor, major) == pytest.approx(closed, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(20, 200))
def test_major_not_below_minor(seed, n):
    m = random_blob(np.random.default_rng(seed), n_pixels=n)
    major, minor = ellipse_axes(m)
    assert major >= minor >= 0


# --- widths -----------------------------------------------------------------------


def test_rectangle_widths():
    assert phalanx_widths(np.ones((60, 20), bool)) == (20, 20, 20)


def test_trapezoid_widths():
    h = 90
    m = np.zeros((h, 40), bool)
    for r in range(h):
        w = int(round(12 + 12 * r / (h - 1)))
        left = 20 - w // 2
        m[r, left:left + w] = True
    widths = phalanx_widths(m)
    for frac, got in zip((1 / 6, 1 / 2, 5 / 6), widths):
        row = int(frac * h)
        assert got == pytest.approx(12 + 12 * row / (h - 1), abs=1.0)


def test_widths_positive_on_synthetic_fingers(default_segmentation):
    for f in drop_thumb(default_segmentation.fingers):
        assert min(phalanx_widths(f)) > 0


# --- centroid distances ---------------------------------------------------------


def test_disc_distances():
    r = 25
    for d in centroid_distances(shape(disc(r))):
        assert d == pytest.approx(r, abs=1.0)


def test_square_distances_analytic():
    # 21x21 square: pixel-center contour of length 80, start at the middle of
    # the top edge (0, 10), clockwise; samples at arc 0, 16, 32, 48, 64
    m = np.ones((21, 21), bool)
    got = centroid_distances(shape(m), window=1)
    expect = [10.0, math.hypot(4, 10), math.hypot(10, 8), math.hypot(10, 8), math.hypot(4, 10)]
    assert got == pytest.approx(expect, abs=1e-9)


def test_translation_invariance_exact(default_segmentation):
    f = drop_thumb(default_segmentation.fingers)[1]
    shifted = np.pad(f.mask, ((7, 0), (3, 0)))
    a = finger_features(f)
    b = finger_features(shape(shifted, f.label))
    assert np.array_equal(a, b)


@pytest.mark.xfail(strict=True, reason="at real finger size (~28 px wide) one pixel of extent "
                   "quantization moves width ratios by 2-4%")
def test_scaled_copy_consistency():
    """2x linear scale: area x4 and every length feature x2 within 2%."""
    def capsule(scale):
        h, w = int(120 * scale), int(40 * scale)
        yy, xx = np.mgrid[0:h, 0:w] + 0.5
        r = 14 * scale * (1 - 0.2 * yy / h)
        cx = w / 2 + 0.3  # off the pixel grid symmetry, so extents step by 1 px
        top = 16 * scale
        body = (yy >= top) & (np.abs(xx - cx) <= r)
        cap = (xx - cx) ** 2 + (yy - top) ** 2 <= (14 * scale) ** 2
        return body | cap

    a = finger_features(shape(capsule(1)))
    b = finger_features(shape(capsule(2)))
    ratio = b / a
    assert ratio[0] == pytest.approx(4, rel=0.02)
    assert ratio[1] == pytest.approx(1, rel=0.02)
    assert ratio[2:] == pytest.approx(np.full(11, 2.0), rel=0.02)


def test_scaled_copy_area_and_moments():
    """The moment-based part of the 2x check, which quantization does not disturb."""
    yy, xx = np.mgrid[0:240, 0:80] + 0.5
    small = (np.abs(xx[::2, ::2] / 2 - 20.3) <= 14) & (yy[::2, ::2] / 2 >= 10)
    big = np.kron(small, np.ones((2, 2), bool))  # exact 2x pixel replication
    a, b = finger_features(shape(small)), finger_features(shape(big))
    assert b[0] == 4 * a[0]
    assert b[2] == pytest.approx(2 * a[2], rel=1e-12)
    assert b[3:5] == pytest.approx(2 * a[3:5], rel=0.02)


# --- vector assembly ------------------------------------------------------------


def test_vector_length_and_order(default_segmentation):
    four = drop_thumb(default_segmentation.fingers)
    v = build_feature_vector(four)
    assert v.shape == (52,) and len(COLUMN_NAMES) == 52
    assert np.array_equal(v, build_feature_vector(four[::-1]))
    assert COLUMN_NAMES[0] == "area_index" and COLUMN_NAMES[13] == "area_middle"
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
    per = v.reshape(4, 13)
    assert np.all(per[:, FEATURE_NAMES.index("solidity")] <= 1)
    assert np.all(per[:, 3] >= per[:, 4])


def test_missing_finger(default_segmentation):
    with pytest.raises(MissingFinger):
        build_feature_vector(drop_thumb(default_segmentation.fingers)[:3])


def test_zero_noise_samples_identical():
    p = replace(draw_subject(np.random.default_rng(5)), noise=0.0)
    a = extract_features(synth_hand(p, seed=1))
    b = extract_features(synth_hand(p, seed=2))
    # only the background and hand intensity level differ between the two
    assert np.array_equal(a, b)


@pytest.mark.xfail(strict=True, reason="width and centroid-distance features move by up to "
                   "~5-10% between 0 and 20 degree renderings at 45 dpi pixel scale")
def test_rotation_robustness_under_three_percent():
    rng = np.random.default_rng(3)
    worst = np.zeros(13)
    for _ in range(8):
        p = replace(draw_subject(rng), noise=0.0)
        a = extract_features(synth_hand(p, seed=1)).reshape(4, 13)
        b = extract_features(synth_hand(replace(p, rotation=20.0), seed=2)).reshape(4, 13)
        worst = np.maximum(worst, (np.abs(a - b) / np.abs(a)).max(axis=0))
    assert np.all(worst < 0.03), dict(zip(FEATURE_NAMES, worst.round(3)))


# --- matrix, CSV and min-max -----------------------------------------------------


def test_minmax_examples():
    X = np.array([[3.0, 4.0], [7.0, 4.0], [5.0, 4.0]])
    p = fit_minmax(X)
    out = apply_minmax(X, p)
    assert out[:, 0].tolist() == [0, 1, 0.5] and out[:, 1].tolist() == [0, 0, 0]


def test_minmax_needs_two_rows():
    with pytest.raises(TooFewRows):
        fit_minmax(np.ones((1, 3)))


def test_minmax_training_span_and_clamp(rng):
    X = rng.normal(size=(100, 52))
    p = fit_minmax(X)
    out = apply_minmax(X, p)
    assert np.all(out.min(axis=0) == 0) and np.all(out.max(axis=0) == 1)
    test = apply_minmax(X * 3, p)
    assert test.min() >= 0 and test.max() <= 1 and not np.isnan(test).any()


def test_normalization_json_roundtrip(rng):
    p = fit_minmax(rng.normal(size=(5, 52)))
    q = NormalizationParams.from_json(p.to_json())
    assert np.array_equal(p.mins, q.mins) and np.array_equal(p.maxs, q.maxs)


def test_csv_roundtrip(tmp_path, rng):
    vals = np.array([[float(format(v, ".9g")) for v in row] for row in rng.normal(size=(6, 52)) * 100])
    m = FeatureMatrix(["a", "a", "b", "b", "c", "c"], [1, 2, 1, 2, 1, 2], vals)
    path = tmp_path / "m.csv"
    write_matrix_csv(m, path)
    back = read_matrix_csv(path)
    assert back.subjects == m.subjects and back.samples == m.samples
    assert np.array_equal(back.values, m.values)
    assert path.read_text().splitlines()[0].startswith("subject_id,sample_id,f1,f2")
    assert back.labels.tolist() == [0, 0, 1, 1, 2, 2]


def test_matrix_rejects_nan():
    with pytest.raises(ValueError):
        FeatureMatrix(["a"], [1], np.array([[np.nan]]))
