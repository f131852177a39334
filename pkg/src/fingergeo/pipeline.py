"""Corpus-level orchestration: batch extraction and the enrolment protocol."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classify import ClassifierConfig, ForestConfig
from .errors import FingerGeoError, TooFewSubjects
from .eval import build_score_sets, feature_means, identify, roc_and_eer, summary
from .features import FeatureMatrix, apply_minmax, extract_features, fit_minmax
from .imaging import ImagingConfig
from .selection import SelectionConfig, foba

log = logging.getLogger(__name__)


def resolve_jobs(jobs=None):
    """``jobs`` if given, else ``$FINGERGEO_JOBS``, else 1."""
    if jobs is None:
        jobs = os.environ.get("FINGERGEO_JOBS", "1")
    jobs = int(jobs)
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    return jobs


def _extract_one(args):
    entry, config = args
    try:
        return entry, extract_features(entry.load(), config), None
    except FingerGeoError as exc:
        return entry, None, {"subject": entry.subject, "session": entry.session,
                             "error": type(exc).__name__, "message": str(exc)}


def extract_corpus(corpus, config=None, jobs=1):
    """Feature matrix for every entry, plus a list of per-image failures."""
    config = config or ImagingConfig(hand=corpus.hand)
    tasks = [(e, config) for e in corpus.entries]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_extract_one, tasks, chunksize=4))
    else:
        results = [_extract_one(t) for t in tasks]
    rows, subjects, samples, failures = [], [], [], []
    for entry, vec, err in results:  # results keep corpus order
        if err is not None:
            failures.append(err)
            continue
        rows.append(vec)
        subjects.append(entry.subject)
        samples.append(entry.session)
    values = np.array(rows) if rows else np.zeros((0, 52))
    return FeatureMatrix(subjects, samples, values), failures


def enrolment_split(matrix, n_enrolled=2, n_probes=1):
    """Per subject: the first ``n_enrolled`` sessions enrol, the next ``n_probes`` probe.

    Subjects with too few sessions are dropped.
    """
    by_subject = {}
    for i, (s, k) in enumerate(zip(matrix.subjects, matrix.samples)):
        by_subject.setdefault(s, []).append((k, i))
    enrol, probe = [], []
    for s in sorted(by_subject):
        rows = [i for _, i in sorted(by_subject[s])]
        if len(rows) < n_enrolled + n_probes:
            log.warning("subject %s has %d samples, skipped", s, len(rows))
            continue
        enrol += rows[:n_enrolled]
        probe += rows[n_enrolled:n_enrolled + n_probes]
    if not enrol:
        raise TooFewSubjects("no subject has enough samples for the enrolment protocol")
    return matrix.take(enrol), matrix.take(probe)


@dataclass(frozen=True)
class ProtocolConfig:
    selection: SelectionConfig = SelectionConfig()
    classifier: ClassifierConfig = ClassifierConfig(kind="forest", forest=ForestConfig())
    n_enrolled: int = 2
    n_probes: int = 1
    n_thresholds: int = 2000


@dataclass
class ProtocolResult:
    selection: object
    identification: object
    scores: object
    roc: object
    normalization: object
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "selected": list(self.selection.to_dict()["selected"]),
            "cardinality": self.selection.cardinality,
            "selection_accuracy": self.selection.final_accuracy,
            "identification": self.identification.to_dict(),
            "verification": summary(self.scores, self.roc),
            **self.extra,
        }


def run_protocol(train, test, config=ProtocolConfig()):
    """Normalize, select on ``train``, then identify and verify on ``test``.

    ``train`` and ``test`` are raw feature matrices over disjoint subjects.
    """
    params = fit_minmax(train)
    train_n = apply_minmax(train, params)
    test_n = apply_minmax(test, params)
    sel = foba(train_n, train_n.labels, config.selection)
    cols = list(sel.selected)
    enrol_n, probe_n = enrolment_split(test_n.columns(cols), config.n_enrolled, config.n_probes)
    ident = identify(enrol_n, probe_n, config.classifier)
    enrol_raw, probe_raw = enrolment_split(test.columns(cols), config.n_enrolled, config.n_probes)
    means = feature_means(train.values[:, cols])
    scores = build_score_sets(enrol_raw, probe_raw, np.asarray(sel.weights), means)
    roc = roc_and_eer(scores, config.n_thresholds)
    return ProtocolResult(sel, ident, scores, roc, params)
