import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from conftest import random_blob
from fingergeo.dataset import HandParams, hand_silhouette, synth_hand
from fingergeo.errors import (AllBackground, CutAboveFingers, DegenerateOrientation,
                              MissingFinger, SegmentationError)
from fingergeo.imaging import (EIGHT, FINGER_LABELS, FingerShape, binarize_hand, drop_thumb,
                               extract_fingers, fingers_point_down, gradient_mask, hand_moments, normalize_hand,
                               orientation_angle, otsu_threshold_from_histogram, raw_profiles,
                               rotate_about, rotate_upright, split_profiles, tilt_from_vertical,
                               to_gray, trace_boundary, trim_wrist, write_stages)


def brute_force_otsu(hist):
    """Exhaustive between-class variance maximizer, smallest t on ties."""
    hist = [int(h) for h in hist]
    total = sum(hist)
    best, best_t = None, 0
    for t in range(255):
        n0 = sum(hist[: t + 1])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        s0 = sum(i * hist[i] for i in range(t + 1))
        s1 = sum(i * hist[i] for i in range(t + 1, 256))
        # n0 n1 (mu0 - mu1)^2 * total^2, as an exact rational comparison
        from fractions import Fraction
        score = Fraction(n0 * n1) * (Fraction(s0, n0) - Fraction(s1, n1)) ** 2
        if best is None or score > best:
            best, best_t = score, t
    return best_t


# --- binarize_hand ---------------------------------------------------------


def test_all_zero_image_is_background():
    with pytest.raises(AllBackground):
        binarize_hand(np.zeros((20, 20), np.uint8))


def test_two_level_image_marks_bright_half():
    img = np.full((20, 20), 10, np.uint8)
    img[:, 10:] = 240
    mask = binarize_hand(img)
    assert np.array_equal(mask, img == 240)


def test_largest_component_kept():
    img = np.zeros((30, 30), np.uint8)
    img[2:20, 2:20] = 200
    img[25:28, 25:28] = 200
    mask = binarize_hand(img, median_window=1)
    assert mask.sum() == 18 * 18 and not mask[26, 26]


def test_even_median_window_rejected():
    with pytest.raises(ValueError):
        binarize_hand(np.zeros((5, 5), np.uint8), median_window=2)


def test_otsu_matches_brute_force_small(rng):
    for _ in range(25):
        hist = rng.integers(0, 50, 256) * (rng.random(256) < 0.3)
        if np.count_nonzero(hist) < 2:
            continue
        assert otsu_threshold_from_histogram(hist) == brute_force_otsu(hist)


@settings(max_examples=40, deadline=None)
@given(arrays(np.int64, 256, elements=st.integers(0, 20)))
def test_otsu_property(hist):
    if np.count_nonzero(hist) < 2:
        return
    assert otsu_threshold_from_histogram(hist) == brute_force_otsu(hist)


def test_rgb_luma():
    rgb = np.zeros((1, 3, 3), np.uint8)
    rgb[0, 0] = (255, 0, 0)
    rgb[0, 1] = (0, 255, 0)
    rgb[0, 2] = (0, 0, 255)
    assert to_gray(rgb).tolist() == [[76, 150, 29]]


# --- moments and orientation ----------------------------------------------


def test_single_pixel_moments():
    mask = np.zeros((10, 10), bool)
    mask[7, 5] = True  # x = 5, y = 7
    m = hand_moments(mask)
    assert m.m00 == 1 and m.centroid == (5.0, 7.0)


def test_block_centroid():
    mask = np.zeros((4, 4), bool)
    mask[:2, :2] = True
    assert hand_moments(mask).centroid == (0.5, 0.5)


def test_empty_moments():
    with pytest.raises(AllBackground):
        hand_moments(np.zeros((3, 3), bool))


def test_blob_centroid_is_coordinate_mean(rng):
    for _ in range(20):
        mask = random_blob(rng)
        rows, cols = np.nonzero(mask)
        xc, yc = hand_moments(mask).centroid
        assert abs(xc - cols.mean()) < 1e-9 and abs(yc - rows.mean()) < 1e-9


def test_horizontal_bar_is_zero():
    mask = np.zeros((11, 31), bool)
    mask[5, 5:26] = True
    mask[4:7, 10:21] = True
    assert orientation_angle(hand_moments(mask)) == 0.0


def test_diagonal_line_is_45():
    mask = np.eye(20, dtype=bool)  # y = x with y down
    assert orientation_angle(hand_moments(mask)) == pytest.approx(45.0)


def test_isotropic_blob_is_degenerate():
    mask = np.zeros((5, 5), bool)
    mask[1:4, 1:4] = True
    with pytest.raises(DegenerateOrientation):
        orientation_angle(hand_moments(mask))


def principal_axis_angle(mask):
    rows, cols = np.nonzero(mask)
    cov = np.cov(np.vstack([cols, rows]).astype(float), bias=True)
    vals, vecs = np.linalg.eigh(cov)
    vx, vy = vecs[:, np.argmax(vals)]
    ang = math.degrees(math.atan2(vy, vx))
    while ang <= -90:
        ang += 180
    while ang > 90:
        ang -= 180
    return ang


def _axis_diff(a, b):
    d = (a - b) % 180.0
    return min(d, 180.0 - d)


def test_rotated_asymmetric_blob_17_degrees():
    mask = np.zeros((80, 80), bool)
    mask[35:45, 10:70] = True
    mask[30:35, 10:25] = True  # asymmetric foot
    rot, _ = rotate_about(mask, 17.0, order=0)
    theta = orientation_angle(hand_moments(rot))
    assert _axis_diff(theta, principal_axis_angle(rot)) <= 1.0


def test_angle_range():
    rng = np.random.default_rng(4)
    for _ in range(20):
        theta = orientation_angle(hand_moments(random_blob(rng)))
        assert -90.0 < theta <= 90.0


# --- rotation ---------------------------------------------------------------


def test_zero_rotation_is_identity(rng):
    img = rng.integers(0, 256, (17, 23)).astype(np.uint8)
    out, _ = rotate_about(img, 0.0, order=1)
    assert np.array_equal(out, img)
    mask = img > 128
    assert np.array_equal(rotate_about(mask, 0.0, order=0)[0], mask)


def test_rotate_and_back_overlap():
    mask = hand_silhouette(HandParams())
    center = hand_moments(mask).centroid
    fwd, c1 = rotate_about(mask, 23.0, center, order=0)
    back, c2 = rotate_about(fwd, -23.0, c1, order=0)
    # re-register the two canvases on the rotation center
    dy, dx = int(round(c2[1] - center[1])), int(round(c2[0] - center[0]))
    crop = back[dy:dy + mask.shape[0], dx:dx + mask.shape[1]]
    inter = (crop & mask).sum()
    union = (crop | mask).sum()
    assert inter / union >= 0.98


@pytest.mark.parametrize("rotation", [-35.0, -20.0, 0.0, 12.0, 20.0, 160.0])
def test_upright_residual_tilt(rotation):
    mask = hand_silhouette(HandParams(rotation=rotation))
    gray = mask.astype(np.uint8) * 200
    theta = orientation_angle(hand_moments(mask))
    _, up = rotate_upright(gray, mask, theta)
    residual = tilt_from_vertical(orientation_angle(hand_moments(up)))
    assert abs(residual) <= 0.5
    # fingers point up: four separate runs somewhere in the top 80 rows
    rows = np.nonzero(up.any(axis=1))[0]
    top = np.pad(up[rows[0]:rows[0] + 80], ((0, 0), (1, 0)))
    runs = (np.diff(top.astype(int), axis=1) == 1).sum(axis=1)
    assert runs.max() >= 4
    assert not fingers_point_down(up)


def test_nearest_neighbor_mask_mode():
    mask = hand_silhouette(HandParams(rotation=10))
    gray = mask.astype(np.uint8) * 200
    theta = orientation_angle(hand_moments(mask))
    _, up = rotate_upright(gray, mask, theta, mask_order=0)
    assert up.dtype == bool
    assert abs(tilt_from_vertical(orientation_angle(hand_moments(up)))) <= 0.5


# --- gradient and profiles ----------------------------------------------------


def test_constant_image_has_no_edges():
    assert not gradient_mask(np.full((9, 9), 77, np.uint8)).any()


def test_step_edge_gives_one_column():
    img = np.zeros((6, 10), np.uint8)
    img[:, :4] = 200
    edges = gradient_mask(img)
    assert np.array_equal(np.nonzero(edges.any(axis=0))[0], [3])
    assert edges[:, 3].all()


def test_gradient_sign_modes():
    img = np.zeros((3, 9), np.uint8)
    img[:, 3:6] = 200
    pos = gradient_mask(img, sign="positive")
    both = gradient_mask(img, sign="both")
    assert np.nonzero(pos[0])[0].tolist() == [5]
    assert np.nonzero(both[0])[0].tolist() == [2, 5]


def test_eta_truncation():
    img = np.array([[3, 2, 2]], np.uint8)  # difference 1 -> 0.5 -> truncated to 0
    assert not gradient_mask(img, eta=0.5).any()
    assert gradient_mask(img, eta=1.0)[0, 0]


def test_edges_hug_right_contour_on_clean_hand():
    mask = hand_silhouette(HandParams())
    img = np.where(mask, 200, 20).astype(np.uint8)
    n = normalize_hand(img)
    contour = n.contour
    right_side = contour & ~np.pad(n.rotated_mask, ((0, 0), (0, 1)))[:, 1:]
    near = ndimage.binary_dilation(right_side, iterations=2, structure=EIGHT)
    edges = n.edges
    assert near[edges].mean() >= 0.90


def test_no_edges_means_all_left():
    contour = np.zeros((5, 5), bool)
    contour[1, 1:4] = contour[3, 1:4] = contour[1:4, 1] = contour[1:4, 3] = True
    left, right = raw_profiles(contour, np.zeros_like(contour))
    assert np.array_equal(left, contour) and not right.any()


@settings(max_examples=50, deadline=None)
@given(arrays(bool, (12, 12)), arrays(bool, (12, 12)))
def test_xor_identity_property(contour, edges):
    left, right = raw_profiles(contour, edges)
    assert np.array_equal(left ^ right, contour)
    assert not (left & right).any()


def test_profiles_on_synthetic_hand_have_five_segments(default_segmentation):
    st = default_segmentation.stages
    for name in ("08_left_trimmed", "09_right_trimmed"):
        labels, n = ndimage.label(st[name], structure=EIGHT)
        sizes = np.bincount(labels.ravel())[1:]
        assert (sizes >= 8).sum() == 5


# --- wrist trimming and extraction ----------------------------------------------


def _profiles(default_segmentation):
    st = default_segmentation.stages
    return st["06_left_profile"], st["07_right_profile"]


def test_cut_below_everything_is_noop(default_segmentation):
    left, right = _profiles(default_segmentation)
    out = trim_wrist((left, right), left.shape[0] - 1, n_fingers=1)
    assert np.array_equal(out[0], left) and np.array_equal(out[1], right)


def test_cut_above_everything_raises(default_segmentation):
    left, right = _profiles(default_segmentation)
    with pytest.raises(CutAboveFingers):
        trim_wrist((left, right), 0)


def test_segments_order_and_labels(default_segmentation):
    fingers = default_segmentation.fingers
    assert [f.label for f in fingers] == list(FINGER_LABELS)
    xs = [f.centroid[0] for f in fingers]
    assert all(a < b for a, b in zip(xs, xs[1:]))
    for f in fingers:
        _, n = ndimage.label(f.mask, structure=EIGHT)
        assert n == 1
        c = f.contour
        steps = np.abs(np.diff(np.vstack([c, c[:1]]), axis=0)).max(axis=1)
        assert steps.max() == 1  # closed 8-connected loop


def test_fingers_pairwise_disjoint(default_segmentation):
    st = default_segmentation.stages
    masks = [st[k] for k in st if "_finger_" in k]
    total = np.sum(masks, axis=0)
    assert total.max() == 1


def test_four_components_is_segmentation_error(default_segmentation):
    st = default_segmentation.stages
    left, right = st["08_left_trimmed"].copy(), st["09_right_trimmed"].copy()
    for prof in (left, right):
        labels, _ = ndimage.label(prof, structure=EIGHT)
        sizes = np.bincount(labels.ravel())
        sizes[0] = 0
        prof[labels == np.argmax(sizes)] = False
    with pytest.raises(SegmentationError) as info:
        extract_fingers(left, right, min_size=8)
    assert info.value.count == 4


def test_left_hand_labels_are_mirrored(default_segmentation):
    st = default_segmentation.stages
    fingers = extract_fingers(st["08_left_trimmed"], st["09_right_trimmed"], hand="left",
                              min_size=8, rel_size=0.1)
    by_x = sorted(fingers, key=lambda f: f.centroid[0])
    assert [f.label for f in by_x] == list(FINGER_LABELS[::-1])


def test_drop_thumb(default_segmentation):
    four = drop_thumb(default_segmentation.fingers)
    assert [f.label for f in four] == ["index", "middle", "ring", "little"]


def test_drop_thumb_duplicate_label():
    m = np.ones((2, 2), bool)
    shapes = [FingerShape(lab, m, trace_boundary(m), (0, 0))
              for lab in ("thumb", "index", "index", "ring", "little")]
    with pytest.raises(MissingFinger):
        drop_thumb(shapes)


def test_split_profiles_morphology_keeps_left_inside_closure():
    contour = np.zeros((9, 9), bool)
    contour[1, 1:8] = contour[7, 1:8] = contour[1:8, 1] = contour[1:8, 7] = True
    edges = np.zeros_like(contour)
    edges[:, 7] = True
    left, right = split_profiles(contour, edges, repair=0)
    assert left[1:8, 1].all() and right[1:8, 7].all()


def test_write_stages(tmp_path, default_segmentation):
    write_stages(default_segmentation, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names[0] == "01_gray.png" and "14_finger_little.png" in names
