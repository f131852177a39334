"""Corpus loading, subject-level splits and synthetic hands."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import LayoutError, ParamsOutOfRange, TooFewSubjects

log = logging.getLogger(__name__)

IMAGE_SHAPE = (526, 383)  # rows, cols: 383x526 px at 45 dpi

DEFAULT_LENGTHS = (85.0, 115.0, 130.0, 120.0, 95.0)  # thumb..little
DEFAULT_WIDTHS = (38.0, 32.0, 33.0, 31.0, 27.0)
DEFAULT_TAPER = (0.80, 0.80, 0.80, 0.80, 0.80)
DEFAULT_SPLAY = (-50.0, -8.0, -2.0, 4.0, 10.0)  # degrees from vertical, + leans right


@dataclass(frozen=True)
class HandParams:
    finger_lengths: tuple = DEFAULT_LENGTHS
    finger_widths: tuple = DEFAULT_WIDTHS
    taper: tuple = DEFAULT_TAPER
    splay: tuple = DEFAULT_SPLAY
    palm_width: float = 150.0
    palm_height: float = 150.0
    rotation: float = 0.0
    noise: float = 0.015

    def validate(self):
        for name in ("finger_lengths", "finger_widths", "taper", "splay"):
            if len(getattr(self, name)) != 5:
                raise ParamsOutOfRange(f"{name} needs 5 values")
        if min(self.finger_lengths) <= 0 or min(self.finger_widths) <= 0:
            raise ParamsOutOfRange("finger lengths and widths must be positive")
        if not all(0.3 <= t <= 1.0 for t in self.taper):
            raise ParamsOutOfRange("taper ratios must lie in [0.3, 1]")
        if self.palm_width <= 0 or self.palm_height <= 0:
            raise ParamsOutOfRange("palm dimensions must be positive")
        if not 0.0 <= self.noise <= 0.2:
            raise ParamsOutOfRange("noise scale must lie in [0, 0.2]")
        return self


# ---------------------------------------------------------------------------
# rendering


def _capsule(px, py, base, angle, length, width, taper, extend=25.0):
    """Tapered capsule growing from ``base`` along ``angle`` (deg from up)."""
    a = np.radians(angle)
    ux, uy = np.sin(a), -np.cos(a)
    dx, dy = px - base[0], py - base[1]
    t = dx * ux + dy * uy
    s = dx * -uy + dy * ux
    w0 = width / 2.0
    w1 = w0 * taper
    shaft = max(length - w1, 1.0)
    frac = np.clip(t / shaft, 0.0, 1.0)
    half = w0 + (w1 - w0) * frac
    body = (t >= -extend) & (t <= shaft) & (np.abs(s) <= half)
    tip = (t - shaft) ** 2 + s ** 2 <= w1 ** 2
    return body | tip


def _round_rect(px, py, x0, y0, x1, y1, radius):
    cx = np.clip(px, x0 + radius, x1 - radius)
    cy = np.clip(py, y0 + radius, y1 - radius)
    return (px - cx) ** 2 + (py - cy) ** 2 <= radius ** 2


def hand_silhouette(params, shape=IMAGE_SHAPE):
    """Binary silhouette of an upright hand rotated by ``params.rotation``."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    # pixel -> hand frame (inverse rotation about the image center)
    a = np.radians(params.rotation)
    c, s = np.cos(a), np.sin(a)
    hx = c * (xx - cx) + s * (yy - cy)
    hy = -s * (xx - cx) + c * (yy - cy)

    pw, ph = params.palm_width, params.palm_height
    lengths = params.finger_lengths
    reach = max(lengths[1:]) + ph + 0.5 * ph
    top = -reach / 2.0 + max(lengths[1:])  # palm top in hand frame
    left = -pw / 2.0
    mask = _round_rect(hx, hy, left, top, left + pw, top + ph, 14.0)
    wrist_w = 0.72 * pw
    mask |= _round_rect(hx, hy, -wrist_w / 2.0, top + ph - 20.0,
                        wrist_w / 2.0, top + 1.5 * ph, 6.0)
    for i in range(1, 5):
        bx = left + (i - 0.5) * pw / 4.0
        by = top + (12.0 if i == 4 else 0.0)
        mask |= _capsule(hx, hy, (bx, by), params.splay[i], lengths[i],
                         params.finger_widths[i], params.taper[i])
    thumb_base = (left + 0.5 * params.finger_widths[0] * 0.5, top + 0.62 * ph)
    mask |= _capsule(hx, hy, thumb_base, params.splay[0], lengths[0],
                     params.finger_widths[0], params.taper[0], extend=35.0)
    return mask


def jitter(params, rng):
    """Per-sample perturbation of a subject's hand, scaled by ``params.noise``."""
    n = params.noise
    if n == 0:
        return params

    def scale(values):
        return tuple(float(v * (1.0 + n * np.clip(rng.standard_normal(), -2.5, 2.5)))
                     for v in values)

    splay = tuple(float(v + 30.0 * n * np.clip(rng.standard_normal(), -2.5, 2.5))
                  for v in params.splay)
    taper = tuple(float(np.clip(v, 0.3, 1.0)) for v in scale(params.taper))
    return replace(
        params,
        finger_lengths=scale(params.finger_lengths),
        finger_widths=scale(params.finger_widths),
        taper=taper,
        splay=splay,
        palm_width=scale([params.palm_width])[0],
        palm_height=scale([params.palm_height])[0],
    )


def synth_hand(params=None, seed=0, shape=IMAGE_SHAPE):
    """Render a bright hand on a dark noisy background as a ``uint8`` image.

    Deterministic for a given ``(params, seed)``; the seed drives the
    per-sample jitter, the hand intensity level and the background noise.
    """
    params = (params or HandParams()).validate()
    rng = np.random.default_rng(seed)
    sample = jitter(params, rng)
    mask = hand_silhouette(sample, shape)
    level = int(rng.integers(190, 211))
    image = rng.integers(0, 41, size=shape).astype(np.uint8)
    image[mask] = level
    return image


def draw_subject(rng):
    """Subject-level hand parameters drawn from the documented ranges."""
    def around(values, lo=0.85, hi=1.15):
        return tuple(float(v * rng.uniform(lo, hi)) for v in values)

    return HandParams(
        finger_lengths=around(DEFAULT_LENGTHS),
        finger_widths=around(DEFAULT_WIDTHS),
        taper=tuple(float(rng.uniform(0.7, 0.9)) for _ in range(5)),
        splay=tuple(float(v + rng.uniform(-3.0, 3.0)) for v in DEFAULT_SPLAY),
        palm_width=float(rng.uniform(135.0, 165.0)),
        palm_height=float(rng.uniform(135.0, 165.0)),
    )


# ---------------------------------------------------------------------------
# corpus


@dataclass(frozen=True)
class CorpusEntry:
    subject: str
    session: int
    path: Path | None = None
    params: HandParams | None = None
    seed: int | None = None

    def load(self):
        if self.path is not None:
            from .imaging import load_image

            return load_image(self.path)
        return synth_hand(self.params, self.seed)


@dataclass(frozen=True)
class Corpus:
    entries: tuple = ()
    hand: str = "right"
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def subjects(self):
        return sorted({e.subject for e in self.entries})

    def __len__(self):
        return len(self.entries)

    def restrict(self, subjects, **meta):
        keep = set(subjects)
        return Corpus(tuple(e for e in self.entries if e.subject in keep), self.hand,
                      {**self.metadata, **meta})


def synth_corpus(n_subjects, samples_per_subject=3, seed=0, noise=0.015, max_rotation=20.0):
    if n_subjects < 2:
        raise TooFewSubjects("need at least 2 subjects")
    rng = np.random.default_rng(seed)
    entries = []
    for s in range(n_subjects):
        subject = replace(draw_subject(rng), noise=noise)
        for k in range(samples_per_subject):
            rotation = float(rng.uniform(-max_rotation, max_rotation))
            entries.append(CorpusEntry(
                subject=f"s{s:03d}",
                session=k + 1,
                params=replace(subject, rotation=rotation),
                seed=int(rng.integers(0, 2**31 - 1)),
            ))
    return Corpus(tuple(entries), "right", {"synthetic": True, "seed": seed})


def _pattern_regex(pattern):
    parts = re.split(r"(<subject>|<session>)", pattern)
    out = []
    for p in parts:
        if p == "<subject>":
            out.append(r"(?P<subject>[A-Za-z0-9-]+?)")
        elif p == "<session>":
            out.append(r"(?P<session>\d+)")
        else:
            out.append(re.escape(p))
    return re.compile("^" + "".join(out) + "$")


def read_layout(path):
    with open(path) as fh:
        layout = json.load(fh)
    return {"pattern": layout.get("pattern", "<subject>_<session>.png"),
            "hand": layout.get("hand", "right")}


def load_corpus(root, layout=None, max_sessions=3):
    """Index image files under ``root`` whose names follow ``layout["pattern"]``.

    ``layout`` defaults to ``root/layout.json`` when present.  Files with an
    image extension that do not match raise LayoutError.
    """
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(root, f"corpus directory not found: {root}")
    if layout is None:
        candidate = root / "layout.json"
        layout = read_layout(candidate) if candidate.exists() else {}
    pattern = layout.get("pattern", "<subject>_<session>.png")
    regex = _pattern_regex(pattern)
    entries = []
    for path in sorted(p for p in root.iterdir() if p.is_file()):
        if path.suffix.lower() not in (".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff"):
            continue
        m = regex.match(path.name)
        if not m:
            raise LayoutError(path)
        entries.append(CorpusEntry(m["subject"], int(m["session"]), path=path))
    if not entries:
        log.warning("no images found under %s", root)
    sessions = {}
    for e in entries:
        sessions.setdefault(e.subject, []).append(e.session)
    incomplete = sorted(s for s, v in sessions.items() if len(v) < max_sessions)
    too_many = sorted(s for s, v in sessions.items() if len(v) > max_sessions)
    if too_many:
        raise LayoutError(root, f"subjects with more than {max_sessions} sessions: {too_many}")
    if incomplete:
        log.warning("%d subjects with missing sessions: %s", len(incomplete), incomplete[:10])
    return Corpus(tuple(entries), layout.get("hand", "right"),
                  {"root": str(root), "incomplete_subjects": incomplete})


def split_subjects(corpus, ratio=(2, 3), seed=0):
    """Random subject-level split into ``ratio[0] : ratio[1]`` train/test parts."""
    subjects = corpus.subjects
    if len(subjects) < 2:
        raise TooFewSubjects("need at least 2 subjects to split")
    frac = Fraction(ratio[0], ratio[0] + ratio[1])
    n_train = int(round(len(subjects) * frac))
    n_train = min(max(n_train, 1), len(subjects) - 1)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(subjects))
    train = sorted(subjects[i] for i in order[:n_train])
    test = sorted(subjects[i] for i in order[n_train:])
    meta = {"split_seed": seed, "ratio": list(ratio)}
    return (corpus.restrict(train, split="train", **meta),
            corpus.restrict(test, split="test", **meta))


def write_corpus(corpus, directory, pattern="<subject>_<session>.png"):
    """Materialize a corpus as PNG files plus ``layout.json``."""
    from .imaging import save_png

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for e in corpus.entries:
        name = pattern.replace("<subject>", e.subject).replace("<session>", str(e.session))
        save_png(directory / name, e.load())
    with open(directory / "layout.json", "w") as fh:
        json.dump({"pattern": pattern, "hand": corpus.hand}, fh)
    return directory


# ---------------------------------------------------------------------------
# feature-level synthetic data for selection experiments


def synth_feature_matrix(n_subjects=20, samples=3, n_features=52, informative=None,
                         separation=1.0, noise=1.0, seed=0):
    """Gaussian class clusters where only ``informative`` columns carry identity.

    Returns ``(X, y)``.  Uninformative columns are pure per-sample noise.
    """
    rng = np.random.default_rng(seed)
    if informative is None:
        informative = range(n_features)
    informative = list(informative)
    centers = np.zeros((n_subjects, n_features))
    centers[:, informative] = separation * rng.standard_normal((n_subjects, len(informative)))
    y = np.repeat(np.arange(n_subjects), samples)
    X = centers[y] + noise * rng.standard_normal((len(y), n_features))
    return X, y
