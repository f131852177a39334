"""End-to-end run on a synthetic corpus, compared with the generator-noise oracle.

    python3 scripts/synthetic_experiment.py --subjects 50 --seed 0 -o results/synthetic

Writes ``report.json`` with the oracle target, the protocol result for the
selected subset and, for reference, the same protocol with every column kept.
"""
import argparse
import dataclasses
import json
import time
from pathlib import Path

import numpy as np

from fingergeo.classify import ClassifierConfig, ForestConfig
from fingergeo.dataset import split_subjects, synth_corpus
from fingergeo.eval import build_score_sets, feature_means, identify, roc_and_eer
from fingergeo.features import apply_minmax, fit_minmax
from fingergeo.oracle import generator_oracle
from fingergeo.pipeline import ProtocolConfig, enrolment_split, extract_corpus, resolve_jobs, run_protocol
from fingergeo.selection import SelectionConfig


def all_columns(train, test, classifier):
    """Protocol without selection: uniform weights over every column."""
    test_n = apply_minmax(test, fit_minmax(train))
    enrol, probe = enrolment_split(test_n)
    ident = identify(enrol, probe, classifier)
    d = train.values.shape[1]
    enrol_raw, probe_raw = enrolment_split(test)
    scores = build_score_sets(enrol_raw, probe_raw, np.full(d, 1.0 / d), feature_means(train))
    return {"accuracy": ident.accuracy, "eer": roc_and_eer(scores).eer}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--subjects", type=int, default=50)
    ap.add_argument("--samples", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ordering", choices=("rank", "random"), default="rank")
    ap.add_argument("--granularity", choices=("local", "global"), default="local")
    ap.add_argument("--classifier", choices=("forest", "wknn"), default="forest")
    ap.add_argument("--trials", type=int, default=200, help="oracle Monte-Carlo trials")
    ap.add_argument("--jobs", type=int)
    ap.add_argument("-o", "--output", default="results/synthetic")
    args = ap.parse_args()

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    corpus = synth_corpus(args.subjects, args.samples, seed=args.seed)
    train_c, test_c = split_subjects(corpus, (2, 3), seed=args.seed)

    oracle = generator_oracle(n_subjects=len(test_c.subjects), trials=args.trials)
    target = oracle.accuracy - 3 * oracle.accuracy_se
    ceiling = oracle.eer + 3 * oracle.eer_se
    print(f"oracle accuracy {oracle.accuracy:.4f} -> target {target:.4f}; "
          f"oracle EER {oracle.eer:.4f} -> ceiling {ceiling:.4f}")

    jobs = resolve_jobs(args.jobs)
    train, f1 = extract_corpus(train_c, jobs=jobs)
    test, f2 = extract_corpus(test_c, jobs=jobs)
    print(f"extracted {len(train)} + {len(test)} rows, {len(f1) + len(f2)} failures")

    classifier = ClassifierConfig(kind=args.classifier, forest=ForestConfig(seed=args.seed))
    cfg = ProtocolConfig(selection=SelectionConfig(ordering=args.ordering, granularity=args.granularity,
                                                   seed=args.seed),
                         classifier=classifier)
    result = run_protocol(train, test, cfg)
    full = all_columns(train, test, classifier)
    doc = {
        "settings": vars(args),
        "oracle": {**oracle.to_dict(), "accuracy_target": target, "eer_ceiling": ceiling},
        "selected": result.to_dict(),
        "all_columns": full,
        "failures": f1 + f2,
        "seconds": round(time.perf_counter() - t0, 1),
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2, default=float))
    ident, eer = result.identification.accuracy, result.roc.eer
    print(f"selected {result.selection.cardinality} columns: accuracy {ident:.4f}, EER {eer:.4f}")
    print(f"all 52 columns: accuracy {full['accuracy']:.4f}, EER {full['eer']:.4f}")
    print(f"meets oracle: accuracy {ident >= target}, EER {eer <= ceiling}")


if __name__ == "__main__":
    main()
