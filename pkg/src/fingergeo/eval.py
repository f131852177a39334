"""Identification accuracy, verification scores and ROC / EER."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .classify import ClassifierConfig, fit_predict
from .errors import EmptyScores, LengthMismatch, UnknownSubject, ZeroMean

MEAN_FLOOR = 1e-6
N_THRESHOLDS = 2000


# ---------------------------------------------------------------------------
# identification


@dataclass(frozen=True)
class IdentificationReport:
    accuracy: float
    predictions: tuple
    truth: tuple

    @property
    def n_probes(self):
        return len(self.truth)

    def to_dict(self):
        return {"accuracy": self.accuracy, "n_probes": self.n_probes,
                "n_correct": int(round(self.accuracy * self.n_probes))}


def identify(enrolled, probes, config=ClassifierConfig()):
    """Classify every probe row against the enrolled rows (one class per subject)."""
    known = set(enrolled.subjects)
    missing = sorted(set(probes.subjects) - known)
    if missing:
        raise UnknownSubject(f"probe subjects without enrollment: {missing[:5]}")
    if enrolled.values.shape[1] != probes.values.shape[1]:
        raise LengthMismatch("enrolled and probe matrices have different columns")
    pred = fit_predict(config, enrolled.values, np.asarray(enrolled.subjects), probes.values)
    truth = np.asarray(probes.subjects)
    return IdentificationReport(float(np.mean(pred == truth)), tuple(pred.tolist()), tuple(truth.tolist()))


# ---------------------------------------------------------------------------
# verification scores


def feature_means(raw_training, floor=MEAN_FLOOR):
    """Column means of the raw training values, floored away from zero."""
    values = np.asarray(getattr(raw_training, "values", raw_training), dtype=float)
    means = values.mean(axis=0)
    return np.where(np.abs(means) < floor, floor, means)


def verification_score(alpha, beta, weights, means, per_term=True):
    """T = Σ_q |α_q - β_q| w_q / mean_q.

    With ``per_term=False`` the weighted sum is divided once by the mean of the
    enrolled template ``α`` instead.
    """
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    w = np.asarray(weights, dtype=float)
    m = np.asarray(means, dtype=float)
    if not (a.shape == b.shape == w.shape == m.shape):
        raise LengthMismatch("alpha, beta, weights and means need equal lengths")
    if per_term:
        if np.any(m == 0):
            raise ZeroMean("a feature mean is zero")
        return float(np.sum(np.abs(a - b) * w / m))
    if a.mean() == 0:
        raise ZeroMean("template mean is zero")
    return float(np.sum(np.abs(a - b) * w) / a.mean())


@dataclass(frozen=True)
class ScoreSets:
    genuine: np.ndarray
    imposter: np.ndarray
    genuine_pairs: np.ndarray  # (probe row, enrolled row)
    imposter_pairs: np.ndarray

    @property
    def total(self):
        return len(self.genuine) + len(self.imposter)


def build_score_sets(enrolled, probes, weights, means, per_term=True):
    """Score every probe against every enrolled template.

    Pairs with the same subject id are genuine, all others imposter.
    """
    E = np.asarray(enrolled.values, dtype=float)
    P = np.asarray(probes.values, dtype=float)
    w = np.asarray(weights, dtype=float)
    m = np.asarray(means, dtype=float)
    if not (E.shape[1] == P.shape[1] == len(w) == len(m)):
        raise LengthMismatch("score inputs have inconsistent column counts")
    if per_term and np.any(m == 0):
        raise ZeroMean("a feature mean is zero")
    scale = w / m if per_term else w
    T = np.empty((len(P), len(E)))
    for i, row in enumerate(P):  # row-wise keeps memory at |E| x d
        T[i] = np.abs(E - row) @ scale
    if not per_term:
        T /= E.mean(axis=1)[None, :]
    same = np.asarray(probes.subjects, dtype=object)[:, None] == np.asarray(enrolled.subjects, dtype=object)[None, :]
    gp = np.argwhere(same)
    ip = np.argwhere(~same)
    return ScoreSets(T[same], T[~same], gp, ip)


# ---------------------------------------------------------------------------
# ROC and EER


@dataclass(frozen=True)
class Roc:
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray
    eer: float
    eer_threshold: float

    @property
    def gar(self):
        return 1.0 - self.frr

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "far", "frr", "gar"])
            for t, a, r, g in zip(self.thresholds, self.far, self.frr, self.gar):
                w.writerow([format(t, ".9g"), format(a, ".9g"), format(r, ".9g"), format(g, ".9g")])

    def write_logx_csv(self, path):
        """log10(FAR) against GAR for points with FAR > 0."""
        keep = self.far > 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["log10_far", "gar"])
            for a, g in zip(np.log10(self.far[keep]), self.gar[keep]):
                w.writerow([format(a, ".9g"), format(g, ".9g")])

    def operating_point(self, far_target):
        """Highest GAR with FAR at or below ``far_target``."""
        ok = self.far <= far_target
        if not ok.any():
            return {"far": far_target, "gar": 0.0, "threshold": None}
        i = np.nonzero(ok)[0][-1]
        return {"far": float(self.far[i]), "gar": float(self.gar[i]), "threshold": float(self.thresholds[i])}


def rates(genuine, imposter, thresholds):
    """FAR and FRR with acceptance ``T <= threshold``."""
    g = np.sort(np.asarray(genuine, dtype=float))
    i = np.sort(np.asarray(imposter, dtype=float))
    far = np.searchsorted(i, thresholds, side="right") / len(i)
    frr = 1.0 - np.searchsorted(g, thresholds, side="right") / len(g)
    return far, frr


def crossing(thresholds, far, frr):
    """EER by linear interpolation at the first sweep point where FAR >= FRR."""
    d = far - frr
    hit = np.nonzero(d >= 0)[0]
    if hit.size == 0:  # unreachable when the sweep covers the pooled range
        j = len(d) - 1
        return float((far[j] + frr[j]) / 2), float(thresholds[j])
    j = hit[0]
    if d[j] == 0:
        return float(far[j]), float(thresholds[j])
    if j == 0:
        return float((far[0] + frr[0]) / 2), float(thresholds[0])
    s = -d[j - 1] / (d[j] - d[j - 1])
    eer = far[j - 1] + s * (far[j] - far[j - 1])
    return float(eer), float(thresholds[j - 1] + s * (thresholds[j] - thresholds[j - 1]))


def sweep_thresholds(genuine, imposter, n_thresholds=N_THRESHOLDS):
    pooled = np.concatenate([genuine, imposter])
    grid = np.linspace(pooled.min(), pooled.max(), n_thresholds)
    extra = [np.max(genuine)]
    if pooled.size < n_thresholds:
        extra = np.concatenate([extra, pooled])
    return np.unique(np.concatenate([grid, extra]))


def roc_and_eer(scores, n_thresholds=N_THRESHOLDS):
    g = np.asarray(scores.genuine, dtype=float)
    i = np.asarray(scores.imposter, dtype=float)
    if g.size == 0 or i.size == 0:
        raise EmptyScores("both genuine and imposter scores are required")
    th = sweep_thresholds(g, i, n_thresholds)
    far, frr = rates(g, i, th)
    eer, at = crossing(th, far, frr)
    return Roc(th, far, frr, eer, at)


def summary(scores, roc, far_targets=(0.001, 0.01, 0.1)):
    return {
        "genuine": int(len(scores.genuine)),
        "imposter": int(len(scores.imposter)),
        "total": int(scores.total),
        "eer": roc.eer,
        "eer_threshold": roc.eer_threshold,
        "operating_points": [roc.operating_point(f) for f in far_targets],
    }


def write_summary(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
