"""Hand normalization and four-finger segmentation.

Images are plain numpy arrays: grayscale images are 2-D ``uint8`` arrays
indexed ``[row, col]`` and binary images are 2-D ``bool`` arrays.  Pixel
coordinates follow the image convention: ``x`` is the column, ``y`` is the
row and grows downward.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    AllBackground,
    CutAboveFingers,
    DegenerateOrientation,
    MissingFinger,
    SegmentationError,
)

FINGER_LABELS = ("thumb", "index", "middle", "ring", "little")
FOUR_FINGERS = ("index", "middle", "ring", "little")

EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class MomentSet:
    m00: float
    m10: float
    m01: float
    m11: float
    m20: float
    m02: float

    @property
    def centroid(self):
        return (self.m10 / self.m00, self.m01 / self.m00)

    @property
    def central(self):
        """Central second moments ``(mu20, mu02, mu11)`` about the centroid."""
        xc, yc = self.centroid
        mu20 = self.m20 - xc * self.m10
        mu02 = self.m02 - yc * self.m01
        mu11 = self.m11 - xc * self.m01
        return mu20, mu02, mu11


@dataclass
class FingerShape:
    label: str
    mask: np.ndarray
    contour: np.ndarray
    origin: tuple[int, int]

    @property
    def centroid(self):
        rows, cols = np.nonzero(self.mask)
        return (cols.mean() + self.origin[1], rows.mean() + self.origin[0])


@dataclass
class ImagingConfig:
    median_window: int = 3
    eta_exponent: int = 1
    gradient_sign: str = "positive"
    wrist_offset: float = 0.10
    min_segment_px: int = 8
    fragment_ratio: float = 0.1
    profile_repair: int = 5
    mask_order: int = 1
    hand: str = "right"

    @property
    def eta(self):
        return 1.0 / 2 ** self.eta_exponent


@dataclass
class Segmentation:
    fingers: list[FingerShape]
    stages: dict[str, np.ndarray] = field(default_factory=dict)
    theta: float = 0.0
    cut_row: int = 0


# ---------------------------------------------------------------------------
# I/O


def to_gray(rgb):
    rgb = np.asarray(rgb, dtype=float)
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def load_image(path):
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I", "F", "1", "P"):
            if im.mode == "P":
                return to_gray(np.asarray(im.convert("RGB")))
            return np.asarray(im.convert("L"), dtype=np.uint8)
        return to_gray(np.asarray(im.convert("RGB")))


def save_png(path, image):
    from PIL import Image

    arr = np.asarray(image)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    Image.fromarray(arr.astype(np.uint8)).save(path)


# ---------------------------------------------------------------------------
# thresholding and moments


def otsu_threshold(image):
    """Return the Otsu threshold ``t``: foreground is ``image > t``.

    Maximizes the between-class variance over ``t`` in ``0..254``; the
    smallest maximizer wins ties.  The criterion is evaluated on integer
    counts so equal splits compare exactly.
    """
    hist = np.bincount(np.asarray(image, dtype=np.uint8).ravel(), minlength=256)
    return otsu_threshold_from_histogram(hist)


def otsu_threshold_from_histogram(hist):
    hist = np.asarray(hist, dtype=np.int64)
    levels = np.arange(256, dtype=np.int64)
    n0 = np.cumsum(hist)[:-1]
    s0 = np.cumsum(hist * levels)[:-1]
    total = int(hist.sum())
    grand = int((hist * levels).sum())
    n1 = total - n0
    # between-class variance * total**2 == (total*s0 - n0*grand)**2 / (n0*n1)
    num = (total * s0 - n0 * grand).astype(float) ** 2
    den = (n0 * n1).astype(float)
    score = np.where(den > 0, num / np.where(den > 0, den, 1.0), -1.0)
    return int(np.argmax(score))


def largest_component(mask):
    labels, n = ndimage.label(mask, structure=EIGHT)
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def binarize_hand(image, median_window=3):
    """Median filter, Otsu threshold and keep the largest 8-connected blob."""
    if median_window < 1 or median_window % 2 == 0:
        raise ValueError("median_window must be odd and >= 1")
    image = np.asarray(image, dtype=np.uint8)
    if image.size == 0:
        raise AllBackground("empty image")
    smooth = image
    if median_window > 1:
        smooth = ndimage.median_filter(image, size=median_window, mode="nearest")
    mask = smooth > otsu_threshold(smooth)
    if not mask.any():
        raise AllBackground("no foreground pixel after thresholding")
    return largest_component(mask)


def hand_moments(mask):
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise AllBackground("moments of an empty mask")
    x = cols.astype(float)
    y = rows.astype(float)
    return MomentSet(
        m00=float(rows.size),
        m10=float(x.sum()),
        m01=float(y.sum()),
        m11=float((x * y).sum()),
        m20=float((x * x).sum()),
        m02=float((y * y).sum()),
    )


def orientation_angle(moments):
    """Major-axis angle in degrees, in ``(-90, 90]``, measured from the x axis.

    Image coordinates (y down), so a positive angle tilts the axis toward the
    bottom-right.
    """
    mu20, mu02, mu11 = moments.central
    scale = max(abs(mu20), abs(mu02), abs(mu11), 1.0)
    if abs(mu11) <= 1e-12 * scale and abs(mu20 - mu02) <= 1e-12 * scale:
        raise DegenerateOrientation("isotropic second moments")
    theta = 0.5 * math.degrees(math.atan2(2.0 * mu11, mu20 - mu02))
    if theta <= -90.0:
        theta += 180.0
    return theta


def tilt_from_vertical(theta):
    """Signed deviation of an axis at ``theta`` degrees from the vertical."""
    tilt = theta - 90.0
    while tilt <= -90.0:
        tilt += 180.0
    while tilt > 90.0:
        tilt -= 180.0
    return tilt


# ---------------------------------------------------------------------------
# rotation


def rotate_about(image, angle, center=None, order=1, cval=0):
    """Rotate ``image`` by ``angle`` degrees (clockwise on screen) about ``center``.

    The canvas grows so nothing is clipped.  Returns ``(rotated, new_center)``
    where ``new_center`` is the ``(x, y)`` position ``center`` maps to.
    ``order=0`` gives nearest-neighbor sampling and keeps masks binary.
    """
    image = np.asarray(image)
    h, w = image.shape
    if center is None:
        center = ((w - 1) / 2.0, (h - 1) / 2.0)
    cx, cy = center
    rad = math.radians(angle)
    c, s = math.cos(rad), math.sin(rad)
    if abs(s) < 1e-15:
        s = 0.0
    if abs(c) < 1e-15:
        c = 0.0

    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], float)
    rel = corners - (cx, cy)
    qx = c * rel[:, 0] - s * rel[:, 1]
    qy = s * rel[:, 0] + c * rel[:, 1]
    new_w = int(math.ceil(qx.max() - qx.min() - 1e-9)) + 1
    new_h = int(math.ceil(qy.max() - qy.min() - 1e-9)) + 1
    ncx, ncy = -qx.min(), -qy.min()

    # inverse map in (row, col) order: in = M @ out + offset
    matrix = np.array([[c, -s], [s, c]])
    offset = np.array([cy, cx]) - matrix @ np.array([ncy, ncx])
    is_bool = image.dtype == bool
    src = image.astype(float) if (is_bool or order > 0) else image
    out = ndimage.affine_transform(
        src, matrix, offset=offset, output_shape=(new_h, new_w),
        order=order, mode="constant", cval=float(cval), prefilter=False,
    )
    if is_bool:
        out = out > 0.5
    elif image.dtype == np.uint8:
        out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out, (ncx, ncy)


def _mean_runs_per_row(mask):
    padded = np.pad(mask, ((0, 0), (1, 0)))
    starts = padded[:, 1:] & ~padded[:, :-1]
    runs = starts.sum(axis=1)
    occupied = runs > 0
    return runs[occupied].mean() if occupied.any() else 0.0


def fingers_point_down(mask):
    """True when the half below the centroid holds more separate horizontal runs."""
    _, yc = hand_moments(mask).centroid
    cut = int(round(yc))
    return _mean_runs_per_row(mask[cut:]) > _mean_runs_per_row(mask[:cut])


def upright_rotation(theta):
    """Smallest rotation (degrees) that takes an axis at ``theta`` to vertical."""
    return -tilt_from_vertical(theta)


def rotate_mask(mask, angle, center, order=1):
    """Rotate a binary mask; ``order=1`` samples bilinearly and re-thresholds at 0.5."""
    if order == 0:
        return rotate_about(mask, angle, center, order=0)[0]
    out, _ = rotate_about(np.asarray(mask, dtype=float), angle, center, order=order)
    return out > 0.5


def rotate_upright(gray, binary, theta, mask_order=1):
    """Rotate both images about the mask centroid so the major axis is vertical.

    A further half turn is applied when the fingers would end up pointing down.
    Grayscale uses bilinear sampling.  The mask is sampled bilinearly and
    re-thresholded (``mask_order=1``), or nearest-neighbor with ``mask_order=0``.
    """
    center = hand_moments(binary).centroid
    angle = upright_rotation(theta)
    mask = rotate_mask(binary, angle, center, mask_order)
    if mask.any() and fingers_point_down(mask):
        angle += 180.0
        mask = rotate_mask(binary, angle, center, mask_order)
    # pad with the background level so the canvas border is not an edge
    outside = np.asarray(gray)[~np.asarray(binary, dtype=bool)]
    fill = float(np.median(outside)) if outside.size else 0.0
    rotated, _ = rotate_about(gray, angle, center, order=1, cval=fill)
    return rotated, mask


# ---------------------------------------------------------------------------
# contours

# clockwise on screen, starting west
_MOORE = [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)]


def trace_boundary(mask):
    """Moore-neighbor trace of the outer boundary of the component that owns the
    topmost-leftmost foreground pixel.

    Returns an ``(n, 2)`` int array of ``(row, col)`` pixels ordered clockwise
    on screen, starting at that pixel.  The loop is closed implicitly.
    """
    mask = np.asarray(mask, dtype=bool)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return np.zeros((0, 2), dtype=int)
    padded = np.pad(mask, 1)
    r0, c0 = int(rows[0]) + 1, int(cols[0]) + 1
    start = (r0, c0)
    out = [start]
    # entered from the west, which is background by construction
    cur, back_dir = start, 0
    first_move = None
    limit = 4 * mask.size + 8
    for _ in range(limit):
        found = None
        for k in range(1, 9):
            d = (back_dir + k) % 8
            nr, nc = cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1]
            if padded[nr, nc]:
                found = (nr, nc, d)
                break
        if found is None:
            break  # isolated pixel
        nr, nc, d = found
        move = (cur, (nr, nc))
        if first_move is None:
            first_move = move
        elif move == first_move:
            out.pop()  # start pixel re-appended just before this move
            break
        # backtrack = the background neighbor checked just before d, seen from new pixel
        prev = (d - 1) % 8
        br, bc = cur[0] + _MOORE[prev][0], cur[1] + _MOORE[prev][1]
        back_dir = _MOORE.index((br - nr, bc - nc))
        cur = (nr, nc)
        out.append(cur)
    return np.array(out, dtype=int) - 1


def contour_image(mask):
    """1-px closed boundary of the largest component as a binary image."""
    comp = largest_component(mask)
    img = np.zeros_like(comp, dtype=bool)
    pts = trace_boundary(comp)
    if len(pts):
        img[pts[:, 0], pts[:, 1]] = True
    return img


def contour_length(contour):
    if len(contour) < 2:
        return 0.0
    steps = np.diff(np.vstack([contour, contour[:1]]), axis=0)
    return float(np.hypot(steps[:, 0], steps[:, 1]).sum())


# ---------------------------------------------------------------------------
# profiles


def gradient_mask(gray, eta=0.5, sign="positive"):
    """Binarized first-order horizontal difference ``eta * (L[p, q] - L[p, q+1])``.

    Values are integer-truncated as in 8-bit image arithmetic.  With
    ``sign="positive"`` negative differences saturate to zero, so only
    bright-to-dark transitions (the right side of a bright finger) survive;
    ``sign="both"`` keeps both polarities.  The last column has no right
    neighbor and is always false.
    """
    g = np.asarray(gray).astype(np.int32)
    diff = np.zeros_like(g)
    diff[:, :-1] = g[:, :-1] - g[:, 1:]
    if sign == "positive":
        diff = np.maximum(diff, 0)
    elif sign != "both":
        raise ValueError(f"unknown gradient sign {sign!r}")
    scaled = np.trunc(eta * diff)
    return scaled != 0


def _bridge_table():
    ring = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    table = np.zeros(256, dtype=bool)
    for code in range(256):
        on = [i for i in range(8) if code >> i & 1]
        parent = {i: i for i in on}

        def find(i):
            while parent[i] != i:
                i = parent[i]
            return i

        for a in on:
            for b in on:
                if a < b and max(abs(ring[a][0] - ring[b][0]), abs(ring[a][1] - ring[b][1])) <= 1:
                    parent[find(a)] = find(b)
        table[code] = len({find(i) for i in on}) >= 2
    return ring, table


_RING, _BRIDGE = _bridge_table()


def bridge(mask):
    """Set background pixels that join two otherwise unconnected neighbors."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1)
    h, w = mask.shape
    code = np.zeros((h, w), dtype=np.int32)
    for bit, (dr, dc) in enumerate(_RING):
        code |= padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w].astype(np.int32) << bit
    return mask | _BRIDGE[code]


def close_and_bridge(mask):
    padded = np.pad(np.asarray(mask, dtype=bool), 2)
    closed = ndimage.binary_closing(padded, structure=EIGHT)
    return bridge(closed[2:-2, 2:-2])


def raw_profiles(contour, edges):
    """Left/right profiles before any morphology: ``L_R - L_BW`` and the xor rest."""
    left = contour & ~edges
    right = contour ^ left
    return left, right


def repair_right_profile(contour, right, size=5):
    """Absorb short left-profile runs into the right profile.

    Shallow edges mark only the last pixel of each row run, so the right
    side of a sloped finger can come out interrupted by runs of a few
    left-labelled pixels.  On a closed contour every such run borders the
    right profile; runs shorter than ``size`` pixels are reassigned.
    """
    left = contour & ~right
    labels, n = ndimage.label(left, structure=EIGHT)
    if n == 0:
        return right.copy()
    sizes = np.bincount(labels.ravel())
    short = sizes < size
    short[0] = False
    return right | short[labels]


def split_profiles(contour, edges, repair=5):
    """Left and right finger profiles after morphological correction."""
    left, right = raw_profiles(contour, edges)
    if repair:
        right = repair_right_profile(contour, right, repair)
        left = contour & ~right
    return close_and_bridge(left), close_and_bridge(right)


def _components(mask, min_size=1, rel_size=0.0):
    """8-connected components as ``(slices, submask)`` pairs.

    Components smaller than ``min_size`` pixels, or than ``rel_size`` times the
    median size of the five largest, are dropped as fragments.
    """
    labels, n = ndimage.label(mask, structure=EIGHT)
    if n == 0:
        return []
    sizes = np.bincount(labels.ravel())
    floor = float(min_size)
    if rel_size > 0:
        top = np.sort(sizes[1:])[::-1][:5]
        floor = max(floor, rel_size * float(np.median(top)))
    out = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is not None and sizes[i] >= floor:
            out.append((sl, labels[sl] == i))
    return out


def default_cut_row(silhouette, offset=0.10):
    rows = np.nonzero(silhouette.any(axis=1))[0]
    _, yc = hand_moments(silhouette).centroid
    height = rows[-1] - rows[0] + 1
    return int(round(yc + offset * height))


def trim_wrist(profiles, cut_row, n_fingers=5, min_size=1, rel_size=0.0):
    """Clear every profile pixel below ``cut_row``.

    Raises CutAboveFingers if fewer than ``n_fingers`` segments survive on
    either side.
    """
    out = []
    for prof in profiles:
        if not 0 <= cut_row < prof.shape[0]:
            raise CutAboveFingers(f"cut row {cut_row} outside image")
        trimmed = prof.copy()
        trimmed[cut_row + 1:] = False
        if len(_components(trimmed, min_size, rel_size)) < n_fingers:
            raise CutAboveFingers(
                f"cut row {cut_row} leaves fewer than {n_fingers} profile segments"
            )
        out.append(trimmed)
    return tuple(out)


def _topmost(comp):
    sl, sub = comp
    rows, cols = np.nonzero(sub)
    r = rows.min()
    return r + sl[0].start, cols[rows == r].min() + sl[1].start


def _line(canvas, p, q):
    (r0, c0), (r1, c1) = p, q
    n = int(max(abs(r1 - r0), abs(c1 - c0))) + 1
    rr = np.rint(np.linspace(r0, r1, n)).astype(int)
    cc = np.rint(np.linspace(c0, c1, n)).astype(int)
    canvas[rr, cc] = True


def _pair_to_mask(left, right, shape, silhouette=None):
    """Close a left/right segment pair into a filled finger mask.

    Both segments are cut at the higher of their two lowest rows (the finger
    base); the base and tip gaps are bridged with straight lines before
    filling.  Returns ``(mask, (row0, col0))`` in a local window.
    """
    (lsl, lsub), (rsl, rsub) = left, right
    r0 = min(lsl[0].start, rsl[0].start)
    c0 = min(lsl[1].start, rsl[1].start)
    r1 = max(lsl[0].stop, rsl[0].stop)
    c1 = max(lsl[1].stop, rsl[1].stop)
    lrow, lcol = np.nonzero(lsub)
    lrow, lcol = lrow + lsl[0].start - r0, lcol + lsl[1].start - c0
    rrow, rcol = np.nonzero(rsub)
    rrow, rcol = rrow + rsl[0].start - r0, rcol + rsl[1].start - c0

    base = min(lrow.max(), rrow.max())
    keep = lrow <= base
    lrow, lcol = lrow[keep], lcol[keep]
    keep = rrow <= base
    rrow, rcol = rrow[keep], rcol[keep]

    outline = np.zeros((r1 - r0, c1 - c0), dtype=bool)
    outline[lrow, lcol] = True
    outline[rrow, rcol] = True
    lb, rb = lrow.max(), rrow.max()
    lt, rt = lrow.min(), rrow.min()
    _line(outline, (lb, lcol[lrow == lb].max()), (rb, rcol[rrow == rb].min()))
    _line(outline, (lt, lcol[lrow == lt].max()), (rt, rcol[rrow == rt].min()))
    filled = ndimage.binary_fill_holes(outline)
    filled[base + 1:] = False
    if silhouette is not None:
        filled &= silhouette[r0:r1, c0:c1]
    # valley runs carried by the profiles leave 1-px spurs at the base
    filled = ndimage.binary_opening(filled, structure=EIGHT)
    return largest_component(filled), (r0, c0)


def _crop(mask, offset, label):
    rows, cols = np.nonzero(mask)
    r0, r1 = rows.min(), rows.max() + 1
    c0, c1 = cols.min(), cols.max() + 1
    sub = mask[r0:r1, c0:c1].copy()
    origin = (int(r0 + offset[0]), int(c0 + offset[1]))
    return FingerShape(label=label, mask=sub, contour=trace_boundary(sub), origin=origin)


def extract_fingers(left_profiles, right_profiles, silhouette=None, hand="right",
                    min_size=1, rel_size=0.0):
    """Pair left/right profile segments and fill each pair into a finger mask.

    Segments are ordered by the column of their topmost pixel; labels run
    thumb to little left-to-right for a right hand and mirrored for a left.
    """
    left = _components(left_profiles, min_size, rel_size)
    right = _components(right_profiles, min_size, rel_size)
    if len(left) != 5 or len(right) != 5:
        bad = len(left) if len(left) != 5 else len(right)
        raise SegmentationError(bad)
    left.sort(key=lambda c: _topmost(c)[1])
    right.sort(key=lambda c: _topmost(c)[1])
    labels = FINGER_LABELS if hand == "right" else FINGER_LABELS[::-1]
    fingers = []
    for lab, lc, rc in zip(labels, left, right):
        mask, offset = _pair_to_mask(lc, rc, left_profiles.shape, silhouette)
        if not mask.any():
            raise SegmentationError(5, f"empty mask while pairing {lab}")
        fingers.append(_crop(mask, offset, lab))
    return sorted(fingers, key=lambda f: FINGER_LABELS.index(f.label))


def drop_thumb(fingers):
    labels = [f.label for f in fingers]
    if len(fingers) != 5 or sorted(labels) != sorted(FINGER_LABELS):
        raise MissingFinger(f"expected one of each finger label, got {labels}")
    by_label = {f.label: f for f in fingers}
    return [by_label[lab] for lab in FOUR_FINGERS]


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class NormalizedHand:
    gray: np.ndarray
    binary: np.ndarray
    theta: float
    rotated_gray: np.ndarray
    rotated_mask: np.ndarray
    contour: np.ndarray  # L_R, binary contour image
    edges: np.ndarray  # L_BW


def normalize_hand(image, config=None):
    """Denoise, binarize, rotate upright, and compute the contour and edge images."""
    cfg = config or ImagingConfig()
    image = np.asarray(image)
    if image.ndim == 3:
        image = to_gray(image)
    gray = ndimage.median_filter(image.astype(np.uint8), size=cfg.median_window, mode="nearest")
    binary = binarize_hand(gray, median_window=1)
    silhouette = ndimage.binary_fill_holes(binary)
    try:
        theta = orientation_angle(hand_moments(silhouette))
    except DegenerateOrientation:
        theta = 90.0  # already upright as far as moments can tell
    rotated_gray, rotated_mask = rotate_upright(gray, silhouette, theta, cfg.mask_order)
    rotated_mask = ndimage.binary_fill_holes(largest_component(rotated_mask))
    contour = contour_image(rotated_mask)
    edges = gradient_mask(rotated_gray, cfg.eta, cfg.gradient_sign)
    return NormalizedHand(gray, binary, theta, rotated_gray, rotated_mask, contour, edges)


def segment_hand(image, config=None, keep_stages=False):
    """Run the whole normalization pipeline on a grayscale (or RGB) image."""
    cfg = config or ImagingConfig()
    n = normalize_hand(image, cfg)
    gray, binary, rotated_gray, rotated_mask = n.gray, n.binary, n.rotated_gray, n.rotated_mask
    contour, edges, theta = n.contour, n.edges, n.theta
    left, right = split_profiles(contour, edges, cfg.profile_repair)
    cut = default_cut_row(rotated_mask, cfg.wrist_offset)
    cut = min(max(cut, 0), rotated_mask.shape[0] - 1)
    left_t, right_t = trim_wrist((left, right), cut, min_size=cfg.min_segment_px,
                                rel_size=cfg.fragment_ratio)
    fingers = extract_fingers(left_t, right_t, rotated_mask, hand=cfg.hand,
                              min_size=cfg.min_segment_px, rel_size=cfg.fragment_ratio)
    stages = {}
    if keep_stages:
        stages = {
            "01_gray": gray,
            "02_binary": binary,
            "03_rotated_gray": rotated_gray,
            "04_contour": contour,
            "05_edges": edges,
            "06_left_profile": left,
            "07_right_profile": right,
            "08_left_trimmed": left_t,
            "09_right_trimmed": right_t,
        }
        for i, f in enumerate(fingers):
            full = np.zeros_like(rotated_mask)
            r0, c0 = f.origin
            h, w = f.mask.shape
            full[r0:r0 + h, c0:c0 + w] = f.mask
            stages[f"{10 + i:02d}_finger_{f.label}"] = full
    return Segmentation(fingers=fingers, stages=stages, theta=theta, cut_row=cut)


def write_stages(segmentation, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, img in segmentation.stages.items():
        save_png(directory / f"{name}.png", img)
