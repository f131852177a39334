"""Generator-noise oracle: expected identification accuracy and EER of the synthetic corpus.

The oracle never renders an image.  It draws subjects and samples exactly as
:func:`fingergeo.dataset.synth_corpus` does, reads off the per-finger shape
parameters that the four-finger features can see (length, base width and tip
width of index..little), adds a fixed pixel-measurement floor, and runs the
enrolment protocol with a nearest-template matcher that knows the true
intra-class spread.  Its numbers are what an ideal measurement of the hand
geometry would achieve; the imaging pipeline loses information on top of that.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import draw_subject, jitter
from .eval import ScoreSets, roc_and_eer

# standard deviation (px) of one length/width measurement: two boundary
# positions, each quantized to the grid twice (render, then upright rotation)
PIXEL_FLOOR = 1.0


@dataclass(frozen=True)
class OracleResult:
    accuracy: float
    accuracy_se: float
    eer: float
    eer_se: float
    trials: int

    def to_dict(self):
        return {"accuracy": self.accuracy, "accuracy_se": self.accuracy_se,
                "eer": self.eer, "eer_se": self.eer_se, "trials": self.trials}


def shape_parameters(params):
    """Length, base width and tip width of the four fingers (12 values, px)."""
    out = []
    for i in range(1, 5):
        w = params.finger_widths[i]
        out += [params.finger_lengths[i], w, w * params.taper[i]]
    return np.array(out)


def _intra_sd(values, noise, floor):
    # lengths and base widths scale by (1 + noise z); the tip width is the
    # product of two independently scaled factors
    rel = np.tile([noise, noise, noise * np.sqrt(2.0)], 4)
    return np.sqrt((rel * values) ** 2 + floor ** 2)


def _trial(rng, n_subjects, n_enrolled, noise, floor):
    subjects = [draw_subject(rng) for _ in range(n_subjects)]
    enrol, probe, sd = [], [], []
    for p in subjects:
        p = p.__class__(**{**p.__dict__, "noise": noise})
        base = shape_parameters(p)
        sd.append(_intra_sd(base, noise, floor))
        samples = []
        for _ in range(n_enrolled + 1):
            s = shape_parameters(jitter(p, rng))
            samples.append(s + floor * rng.standard_normal(s.shape))
        enrol.append(samples[:n_enrolled])
        probe.append(samples[n_enrolled])
    sd = np.mean(sd, axis=0)
    E = np.array(enrol) / sd  # subjects x enrolled x 12
    P = np.array(probe) / sd
    d = np.abs(P[:, None, None, :] - E[None, :, :, :]).sum(axis=-1)  # probe x subject x enrolled
    pred = np.argmin(d.min(axis=2), axis=1)
    same = np.eye(n_subjects, dtype=bool)[:, :, None].repeat(n_enrolled, axis=2)
    return float(np.mean(pred == np.arange(n_subjects))), d[same], d[~same]


def generator_oracle(n_subjects=30, n_enrolled=2, noise=0.015, trials=200, seed=12345,
                     floor=PIXEL_FLOOR):
    """Monte-Carlo accuracy and EER of ideal parameter-space matching."""
    rng = np.random.default_rng(seed)
    accs, eers = [], []
    for _ in range(trials):
        acc, g, i = _trial(rng, n_subjects, n_enrolled, noise, floor)
        accs.append(acc)
        eers.append(roc_and_eer(ScoreSets(g, i, np.empty((0, 2)), np.empty((0, 2)))).eer)
    accs, eers = np.array(accs), np.array(eers)
    return OracleResult(float(accs.mean()), float(accs.std(ddof=1)), float(eers.mean()),
                        float(eers.std(ddof=1)), trials)
