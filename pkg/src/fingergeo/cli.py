"""Command-line driver: ``fingergeo {extract,select,evaluate,roc,synth}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .classify import ClassifierConfig, ForestConfig
from .dataset import load_corpus, read_layout, synth_corpus, write_corpus
from .errors import ConfigError, FingerGeoError
from .eval import (ScoreSets, build_score_sets, feature_means, identify, roc_and_eer, summary,
                   write_summary)
from .features import apply_minmax, fit_minmax, read_matrix_csv, write_matrix_csv
from .imaging import ImagingConfig
from .pipeline import enrolment_split, extract_corpus, resolve_jobs
from .selection import SelectionConfig, foba, load_selection

log = logging.getLogger("fingergeo")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclasses.dataclass
class RunConfig:
    imaging: ImagingConfig = dataclasses.field(default_factory=ImagingConfig)
    selection: SelectionConfig = SelectionConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    n_thresholds: int = 2000

    def snapshot(self):
        sel = dataclasses.asdict(dataclasses.replace(self.selection, evaluator=None))
        sel.pop("evaluator")
        return {"imaging": dataclasses.asdict(self.imaging), "selection": sel,
                "classifier": dataclasses.asdict(self.classifier),
                "n_thresholds": self.n_thresholds}


def _override(obj, values, section):
    names = {f.name for f in dataclasses.fields(obj)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
    return dataclasses.replace(obj, **values)


def load_config(path=None):
    """Defaults, optionally overridden by a JSON file.

    Recognized sections: ``imaging``, ``selection``, ``classifier``, ``forest``
    and the top-level key ``n_thresholds``.
    """
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - {"imaging", "selection", "classifier", "forest", "n_thresholds"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        cfg.imaging = _override(cfg.imaging, doc.get("imaging", {}), "imaging")
        cfg.selection = _override(cfg.selection, doc.get("selection", {}), "selection")
        forest = _override(cfg.classifier.forest, doc.get("forest", {}), "forest")
        cls = dict(doc.get("classifier", {}))
        if "weights" in cls:
            raise ConfigError("classifier weights come from the selection file")
        cfg.classifier = _override(cfg.classifier, cls, "classifier")
        cfg.classifier = dataclasses.replace(cfg.classifier, forest=forest)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.n_thresholds = int(doc.get("n_thresholds", cfg.n_thresholds))
    cfg.selection.validate()
    cfg.classifier.validate()
    if cfg.imaging.median_window < 1 or cfg.imaging.eta_exponent < 0:
        raise ConfigError("median_window must be >= 1 and eta_exponent >= 0")
    if not 0.0 <= cfg.imaging.wrist_offset < 0.5:
        raise ConfigError("wrist_offset out of range [0, 0.5)")
    if cfg.n_thresholds < 2:
        raise ConfigError("n_thresholds must be at least 2")
    return cfg


# ---------------------------------------------------------------------------
# manifest


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    def __init__(self, command, argv, config, seed=None):
        self.doc = {"command": command, "argv": list(argv), "version": __version__,
                    "config": config, "seed": seed, "inputs": [], "outputs": {}, "timings": {}}
        self._t0 = time.perf_counter()

    def input(self, path):
        self.doc["inputs"].append(str(path))

    def output(self, path):
        self.doc["outputs"][str(path)] = None

    def timing(self, name, start):
        self.doc["timings"][name] = round(time.perf_counter() - start, 4)

    def write(self, path):
        for out in self.doc["outputs"]:
            if Path(out).is_file():
                self.doc["outputs"][out] = _sha256(out)
        self.doc["timings"]["total"] = round(time.perf_counter() - self._t0, 4)
        with open(path, "w") as fh:
            json.dump(self.doc, fh, indent=2)


def _require(path, kind="file"):
    p = Path(path)
    ok = p.is_file() if kind == "file" else p.is_dir()
    if not ok:
        raise UsageError(f"input {kind} not found: {path}")
    return p


# ---------------------------------------------------------------------------
# commands


_SYNTH = re.compile(r"^(\d+)x(\d+)$")


def cmd_extract(args, cfg, man):
    out = Path(args.output)
    if args.synthetic:
        m = _SYNTH.match(args.synthetic)
        if not m:
            raise UsageError("--synthetic expects SUBJECTSxSAMPLES, e.g. 10x3")
        corpus = synth_corpus(int(m[1]), int(m[2]), seed=args.seed)
        man.input(f"synthetic:{args.synthetic}:seed={args.seed}")
    else:
        if not args.corpus:
            raise UsageError("give a corpus directory or --synthetic")
        root = _require(args.corpus, "dir")
        layout = read_layout(_require(args.layout)) if args.layout else None
        corpus = load_corpus(root, layout)
        man.input(root)
    imaging = dataclasses.replace(cfg.imaging, hand=corpus.hand)
    t = time.perf_counter()
    matrix, failures = extract_corpus(corpus, imaging, resolve_jobs(args.jobs))
    man.timing("extract", t)
    write_matrix_csv(matrix, out)
    side = out.with_suffix(".failures.json")
    with open(side, "w") as fh:
        json.dump(failures, fh, indent=2)
    man.output(out)
    man.output(side)
    print(f"{len(matrix)} rows, {len(failures)} failures -> {out}")
    return EXIT_OK


def _selection_config(args, cfg):
    sel = cfg.selection
    over = {k: getattr(args, k) for k in ("granularity", "ordering", "delta", "epsilon", "seed")
            if getattr(args, k) is not None}
    return dataclasses.replace(sel, **over).validate()


def cmd_select(args, cfg, man):
    sel_cfg = _selection_config(args, cfg)
    man.doc["config"]["selection"].update({k: getattr(sel_cfg, k) for k in
                                          ("granularity", "ordering", "delta", "epsilon", "seed")})
    man.doc["seed"] = sel_cfg.seed
    path = _require(args.matrix)
    man.input(path)
    matrix = read_matrix_csv(path)
    normed = apply_minmax(matrix, fit_minmax(matrix))
    t = time.perf_counter()
    result = foba(normed, normed.labels, sel_cfg)
    man.timing("select", t)
    out = Path(args.output)
    doc = result.to_dict()
    doc["column_names"] = [f"f{i + 1}" for i in range(matrix.values.shape[1])]
    doc["selected"] = [doc["column_names"][i] for i in result.selected]
    doc["feature_names"] = [matrix.column_names[i] for i in result.selected]
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=2)
    trace = out.with_suffix(".trace.txt")
    with open(trace, "w") as fh:
        fh.write(f"{'step':>4}  {'phase':<8}  {'columns':<24}  {'accuracy':>8}\n")
        for i, e in enumerate(result.phase_log):
            cols = ",".join(f"f{c + 1}" for c in e["columns"])
            fh.write(f"{i:>4}  {e['phase']:<8}  {cols:<24}  {e['accuracy']:>8.4f}\n")
    man.output(out)
    man.output(trace)
    print(f"selected {result.cardinality} columns, training accuracy {result.final_accuracy:.4f}")
    return EXIT_OK


def _write_scores(path, scores):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "probe", "template", "score"])
        for kind, vals, pairs in (("genuine", scores.genuine, scores.genuine_pairs),
                                  ("imposter", scores.imposter, scores.imposter_pairs)):
            for v, (p, e) in zip(vals, pairs):
                w.writerow([kind, int(p), int(e), format(v, ".9g")])


def _read_scores(path):
    g, i = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            (g if row["kind"] == "genuine" else i).append(float(row["score"]))
    empty = np.empty((0, 2), dtype=int)
    return ScoreSets(np.array(g), np.array(i), empty, empty)


def _write_roc(outdir, scores, n_thresholds, man, extra=None):
    roc = roc_and_eer(scores, n_thresholds)
    roc.write_csv(outdir / "roc.csv")
    roc.write_logx_csv(outdir / "roc_logfar.csv")
    doc = summary(scores, roc)
    doc.update(extra or {})
    write_summary(outdir / "summary.json", doc)
    for name in ("roc.csv", "roc_logfar.csv", "summary.json"):
        man.output(outdir / name)
    return doc


def cmd_evaluate(args, cfg, man):
    train = read_matrix_csv(_require(args.train))
    test = read_matrix_csv(_require(args.test))
    cols, weights, sel_doc = load_selection(_require(args.selection))
    for p in (args.train, args.test, args.selection):
        man.input(p)
    if train.values.shape[1] != test.values.shape[1] or max(cols, default=-1) >= train.values.shape[1]:
        raise UsageError("train, test and selection refer to different column layouts")
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    cls_cfg = cfg.classifier
    if args.classifier:
        cls_cfg = dataclasses.replace(cls_cfg, kind=args.classifier)
    if cls_cfg.kind == "wknn":
        cls_cfg = dataclasses.replace(cls_cfg, weights=tuple(weights))
    man.doc["seed"] = cls_cfg.forest.seed
    t = time.perf_counter()
    if args.mode == "identify":
        params = fit_minmax(train)
        test_n = apply_minmax(test, params).columns(cols)
        enrol, probe = enrolment_split(test_n, args.enrolled, args.probes)
        report = identify(enrol, probe, cls_cfg)
        doc = {"mode": "identify", "classifier": cls_cfg.kind, **report.to_dict(),
               "n_enrolled_rows": len(enrol), "selected": sel_doc["selected"]}
        write_summary(outdir / "summary.json", doc)
        man.output(outdir / "summary.json")
        print(f"identification accuracy {report.accuracy:.4f} over {report.n_probes} probes")
    else:
        enrol, probe = enrolment_split(test.columns(cols), args.enrolled, args.probes)
        means = feature_means(train.values[:, cols])
        scores = build_score_sets(enrol, probe, weights, means)
        _write_scores(outdir / "scores.csv", scores)
        man.output(outdir / "scores.csv")
        doc = _write_roc(outdir, scores, cfg.n_thresholds, man, {"mode": "verify"})
        print(f"{doc['genuine']} genuine, {doc['imposter']} imposter comparisons, EER {doc['eer']:.4f}")
    man.timing("evaluate", t)
    return EXIT_OK


def cmd_roc(args, cfg, man):
    path = _require(args.scores)
    man.input(path)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    n = args.thresholds or cfg.n_thresholds
    doc = _write_roc(outdir, _read_scores(path), n, man)
    print(f"EER {doc['eer']:.4f}")
    return EXIT_OK


def cmd_synth(args, cfg, man):
    if args.subjects < 2 or args.samples < 1:
        raise UsageError("need at least 2 subjects and 1 sample each")
    corpus = synth_corpus(args.subjects, args.samples, seed=args.seed, noise=args.noise,
                          max_rotation=args.max_rotation)
    out = write_corpus(corpus, args.output)
    man.output(out / "layout.json")
    for e in corpus.entries:
        man.output(out / f"{e.subject}_{e.session}.png")
    print(f"{len(corpus)} images -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="fingergeo", description="Finger-geometry biometric pipeline.")
    p.add_argument("--config", help="JSON file overriding defaults")
    p.add_argument("--jobs", type=int, help="worker processes (default $FINGERGEO_JOBS or 1)")
    p.add_argument("--manifest", help="manifest path (default: next to the main output)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", help="images -> feature matrix CSV")
    e.add_argument("corpus", nargs="?", help="corpus directory")
    e.add_argument("--layout", help="layout JSON (default: corpus/layout.json)")
    e.add_argument("--synthetic", metavar="NxS", help="render N subjects x S samples instead")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("-o", "--output", required=True)
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("select", help="forward-backward feature selection")
    s.add_argument("matrix")
    s.add_argument("--granularity", choices=("local", "global"))
    s.add_argument("--ordering", choices=("rank", "random"))
    s.add_argument("--delta", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_select)

    v = sub.add_parser("evaluate", help="identification or verification on a test matrix")
    v.add_argument("--train", required=True)
    v.add_argument("--test", required=True)
    v.add_argument("--selection", required=True)
    v.add_argument("--classifier", choices=("wknn", "forest"))
    v.add_argument("--mode", choices=("identify", "verify"), default="identify")
    v.add_argument("--enrolled", type=int, default=2)
    v.add_argument("--probes", type=int, default=1)
    v.add_argument("-o", "--output", required=True, help="output directory")
    v.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("roc", help="ROC curve and EER from a scores CSV")
    r.add_argument("scores")
    r.add_argument("--thresholds", type=int)
    r.add_argument("-o", "--output", required=True, help="output directory")
    r.set_defaults(func=cmd_roc)

    y = sub.add_parser("synth", help="write a synthetic corpus to disk")
    y.add_argument("--subjects", type=int, default=10)
    y.add_argument("--samples", type=int, default=3)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--noise", type=float, default=0.015)
    y.add_argument("--max-rotation", type=float, default=20.0)
    y.add_argument("-o", "--output", required=True, help="output directory")
    y.set_defaults(func=cmd_synth)
    return p


def _fail(code, exc):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def _manifest_path(args):
    if args.manifest:
        return Path(args.manifest)
    out = Path(args.output)
    if args.command in ("evaluate", "roc", "synth"):
        return out / "manifest.json"
    return out.with_suffix(".manifest.json")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        resolve_jobs(args.jobs)
        man = Manifest(args.command, argv, cfg.snapshot(), getattr(args, "seed", None))
        code = args.func(args, cfg, man)
        man.write(_manifest_path(args))
        return code
    except (UsageError, ConfigError, ValueError) as exc:
        return _fail(EXIT_USAGE, exc)
    except FingerGeoError as exc:
        return _fail(EXIT_RUNTIME, exc)
    except OSError as exc:
        return _fail(EXIT_RUNTIME, exc)


if __name__ == "__main__":
    sys.exit(main())
