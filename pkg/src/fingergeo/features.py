"""Thirteen geometric features per finger and the 52-column feature matrix."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull

from .errors import EmptyShape, MissingFinger, TooFewRows
from .imaging import FOUR_FINGERS, FingerShape, trace_boundary

FEATURE_NAMES = (
    "area",
    "solidity",
    "equiv_diameter",
    "major_axis",
    "minor_axis",
    "width_distal",
    "width_middle",
    "width_proximal",
    "cdist_1",
    "cdist_2",
    "cdist_3",
    "cdist_4",
    "cdist_5",
)
N_PER_FINGER = len(FEATURE_NAMES)
N_FEATURES = N_PER_FINGER * len(FOUR_FINGERS)
COLUMN_NAMES = tuple(f"{feat}_{finger}" for finger in FOUR_FINGERS for feat in FEATURE_NAMES)
PHALANX_ROWS = (1 / 6, 1 / 2, 5 / 6)
SMOOTH_WINDOW = 5
WIDTH_BAND = 2


def _mask_of(finger):
    mask = finger.mask if hasattr(finger, "mask") else finger
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyShape("finger mask has no foreground pixels")
    return mask


def convex_hull_area(mask):
    """Area of the convex hull of the mask's pixel squares (corner points)."""
    edge = mask & ~ndimage.binary_erosion(mask, border_value=0)
    rows, cols = np.nonzero(edge)
    pts = np.concatenate([
        np.column_stack([cols + dx, rows + dy])
        for dx in (-0.5, 0.5) for dy in (-0.5, 0.5)
    ])
    pts = np.unique(pts, axis=0)
    return float(ConvexHull(pts).volume)


def shape_scalars(finger):
    """``(area, solidity, equivalent_diameter)``."""
    mask = _mask_of(finger)
    area = float(mask.sum())
    solidity = area / convex_hull_area(mask)
    return area, solidity, math.sqrt(4.0 * area / math.pi)


def ellipse_axes(finger):
    """Major and minor axis lengths of the moment-equivalent ellipse.

    Pixels are treated as unit squares, which adds 1/12 to each normalized
    second moment.
    """
    mask = _mask_of(finger)
    rows, cols = np.nonzero(mask)
    x = cols - cols.mean()
    y = rows - rows.mean()
    a = (x * x).mean() + 1 / 12
    c = (y * y).mean() + 1 / 12
    b = (x * y).mean()
    root = math.sqrt(((a - c) / 2) ** 2 + b * b)
    lam1 = (a + c) / 2 + root
    lam2 = max((a + c) / 2 - root, 0.0)
    return 4 * math.sqrt(lam1), 4 * math.sqrt(lam2)


def phalanx_widths(finger):
    """Horizontal extents at 1/6, 1/2 and 5/6 of the height below the tip."""
    mask = _mask_of(finger)
    occupied = np.nonzero(mask.any(axis=1))[0]
    top, height = occupied[0], occupied[-1] - occupied[0] + 1
    occupied_rows = mask.any(axis=1)
    first = np.argmax(mask, axis=1)
    last = mask.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)
    extent = np.where(occupied_rows, last - first + 1, 0).astype(float)
    widths = []
    for frac in PHALANX_ROWS:
        row = top + min(int(frac * height), height - 1)
        lo, hi = max(row - WIDTH_BAND, top), min(row + WIDTH_BAND, top + height - 1)
        widths.append(float(extent[lo:hi + 1].mean()))
    return tuple(widths)


def smooth_contour(contour, window=SMOOTH_WINDOW):
    """Circular moving average of the contour coordinates."""
    contour = np.asarray(contour, dtype=float)
    if window <= 1 or len(contour) < window:
        return contour
    half = window // 2
    padded = np.concatenate([contour[-half:], contour, contour[:half]])
    kernel = np.ones(window) / window
    return np.column_stack([np.convolve(padded[:, i], kernel, mode="valid") for i in (0, 1)])


def tip_start(contour):
    """Roll the contour so it starts at the middle pixel of its topmost run."""
    contour = np.asarray(contour)
    top = contour[:, 0].min()
    on_top = np.nonzero(contour[:, 0] == top)[0]
    cols = np.sort(contour[on_top, 1])
    target = cols[(len(cols) - 1) // 2]
    start = on_top[np.nonzero(contour[on_top, 1] == target)[0][0]]
    return np.roll(contour, -start, axis=0)


def arc_points(contour, n=5, window=SMOOTH_WINDOW):
    """``n`` points equally spaced in arc length along the smoothed contour.

    Position 0 is the first contour pixel.  Points are interpolated linearly
    between smoothed contour vertices, so they carry sub-pixel positions.
    Returns an ``(n, 2)`` array of ``(row, col)``.
    """
    smooth = smooth_contour(contour, window)
    closed = np.vstack([smooth, smooth[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.arange(n) * cum[-1] / n
    rows = np.interp(targets, cum, closed[:, 0])
    cols = np.interp(targets, cum, closed[:, 1])
    return np.column_stack([rows, cols])


def centroid_distances(finger, n=5, window=SMOOTH_WINDOW):
    """Distances from the finger centroid to ``n`` equidistant contour points.

    The contour starts at the fingertip (middle of the topmost pixel run) and
    runs clockwise on screen.
    """
    mask = _mask_of(finger)
    contour = getattr(finger, "contour", None)
    if contour is None or len(contour) == 0:
        contour = trace_boundary(mask)
    rows, cols = np.nonzero(mask)
    cy, cx = rows.mean(), cols.mean()
    pts = arc_points(tip_start(contour), n, window)
    return tuple(float(math.hypot(r - cy, c - cx)) for r, c in pts)


def _canonical(finger):
    """Crop to the bounding box so every feature sees the same integer coordinates
    wherever the finger sits (translation invariance is then exact)."""
    mask = _mask_of(finger)
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    r0, c0 = rows[0], cols[0]
    sub = mask[r0:rows[-1] + 1, c0:cols[-1] + 1]
    contour = getattr(finger, "contour", None)
    if contour is None or len(contour) == 0:
        contour = trace_boundary(sub)
    else:
        contour = np.asarray(contour) - (r0, c0)
    label = getattr(finger, "label", "")
    return FingerShape(label, sub, contour, (0, 0))


def finger_features(finger):
    finger = _canonical(finger)
    area, solidity, diameter = shape_scalars(finger)
    major, minor = ellipse_axes(finger)
    return np.array(
        [area, solidity, diameter, major, minor, *phalanx_widths(finger),
         *centroid_distances(finger)],
        dtype=float,
    )


def build_feature_vector(fingers):
    """52 values, finger-major: index, middle, ring, little."""
    by_label = {f.label: f for f in fingers}
    if len(fingers) != 4 or set(by_label) != set(FOUR_FINGERS):
        raise MissingFinger(f"need exactly {FOUR_FINGERS}, got {[f.label for f in fingers]}")
    return np.concatenate([finger_features(by_label[lab]) for lab in FOUR_FINGERS])


def extract_features(image, config=None):
    """Image -> 52-value feature vector through the full segmentation pipeline."""
    from .imaging import drop_thumb, segment_hand

    seg = segment_hand(image, config)
    return build_feature_vector(drop_thumb(seg.fingers))


# ---------------------------------------------------------------------------
# feature matrix


@dataclass
class FeatureMatrix:
    subjects: list
    samples: list
    values: np.ndarray
    column_names: tuple = COLUMN_NAMES

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.subjects):
            raise ValueError("values must be rows x columns with one subject per row")
        if len(self.samples) != len(self.subjects):
            raise ValueError("one sample index per row required")
        if len(self.column_names) != self.values.shape[1]:
            self.column_names = tuple(f"f{i + 1}" for i in range(self.values.shape[1]))
        if np.isnan(self.values).any():
            raise ValueError("feature matrix contains NaN")

    def __len__(self):
        return self.values.shape[0]

    @property
    def labels(self):
        """Integer class ids in order of first appearance of each subject."""
        index = {}
        return np.array([index.setdefault(s, len(index)) for s in self.subjects])

    def take(self, rows):
        rows = np.asarray(rows)
        return FeatureMatrix([self.subjects[i] for i in rows], [self.samples[i] for i in rows],
                             self.values[rows], self.column_names)

    def columns(self, cols):
        cols = list(cols)
        return FeatureMatrix(list(self.subjects), list(self.samples), self.values[:, cols],
                             tuple(self.column_names[c] for c in cols))

    def with_values(self, values):
        return FeatureMatrix(list(self.subjects), list(self.samples), values, self.column_names)


def write_matrix_csv(matrix, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "sample_id"] + [f"f{i + 1}" for i in range(matrix.values.shape[1])])
        for subj, samp, row in zip(matrix.subjects, matrix.samples, matrix.values):
            w.writerow([subj, samp] + [format(v, ".9g") for v in row])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["subject_id", "sample_id"]:
        raise ValueError(f"{path}: missing subject_id,sample_id header")
    body = rows[1:]
    values = np.array([[float(v) for v in r[2:]] for r in body], dtype=float)
    if not body:
        values = np.zeros((0, len(rows[0]) - 2))
    names = COLUMN_NAMES if values.shape[1] == N_FEATURES else ()
    return FeatureMatrix([r[0] for r in body], [int(r[1]) for r in body], values, names)


# ---------------------------------------------------------------------------
# min-max normalization


@dataclass(frozen=True)
class NormalizationParams:
    mins: np.ndarray = field(repr=False)
    maxs: np.ndarray = field(repr=False)

    def to_json(self):
        return json.dumps({"min": [float(v) for v in self.mins],
                           "max": [float(v) for v in self.maxs]})

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(np.array(doc["min"], dtype=float), np.array(doc["max"], dtype=float))


def fit_minmax(training):
    values = training.values if isinstance(training, FeatureMatrix) else np.asarray(training, float)
    if values.shape[0] < 2:
        raise TooFewRows("min-max fitting needs at least 2 rows")
    return NormalizationParams(values.min(axis=0), values.max(axis=0))


def apply_minmax(matrix, params):
    """Scale columns to [0, 1] with training extremes; constant columns map to 0.

    Values outside the training range are clamped.
    """
    values = matrix.values if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, float)
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (values - params.mins) / safe, 0.0)
    out = np.clip(out, 0.0, 1.0)
    if isinstance(matrix, FeatureMatrix):
        return matrix.with_values(out)
    return out
