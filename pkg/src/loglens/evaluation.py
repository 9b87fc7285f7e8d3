"""Confusion counting, precision/recall/F1, and report emission.

The anomalous class is the positive class throughout. Degenerate 0/0
ratios are defined as 0, so a constant predictor scores worst rather than
being undefined.
"""

import json
from dataclasses import dataclass

import numpy as np

from .corpus import ANOMALOUS, NORMAL
from .encoding import encode_line
from .errors import LabelMissingError, ShapeError
from .model import classify_batch, config_digest


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    run_id: str
    dataset: str
    split: str
    config_digest: str
    seed: int


def confusion(predictions, labels):
    """Exact counts for binary sequences with 1 = anomalous."""
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise ShapeError(f"{len(predictions)} predictions vs {len(labels)} labels")
    tp = fp = fn = tn = 0
    for p, y in zip(predictions, labels):
        if p == 1 and y == 1:
            tp += 1
        elif p == 1 and y == 0:
            fp += 1
        elif p == 0 and y == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def prf1(counts):
    """(precision, recall, f1); any 0/0 is 0 by convention."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


def evaluate(
    params,
    records,
    vocab,
    run_id="eval",
    dataset="",
    split="",
    seed=0,
    batch_size=64,
    threshold=None,
):
    """Score every record and assemble a MetricsReport.

    Predictions use argmax (equivalently p_anomalous > 0.5); pass a float
    `threshold` to explore other operating points. Records must all be
    labeled normal or anomalous.
    """
    labels = []
    for r in records:
        if r.label == ANOMALOUS:
            labels.append(1)
        elif r.label == NORMAL:
            labels.append(0)
        else:
            raise LabelMissingError(
                f"record {r.index} from {r.source} is unlabeled; evaluation needs ground truth"
            )
    max_len = params.config.max_len
    preds = []
    for start in range(0, len(records), batch_size):
        chunk = records[start : start + batch_size]
        seqs = [encode_line(r.line, vocab, max_len) for r in chunk]
        probs = classify_batch(params, seqs)
        if threshold is None:
            preds.extend(int(c) for c in probs.argmax(axis=1))
        else:
            preds.extend(int(p) for p in (probs[:, 1] > threshold))
    counts = confusion(preds, labels)
    precision, recall, f1 = prf1(counts)
    return MetricsReport(
        counts=counts,
        precision=precision,
        recall=recall,
        f1=f1,
        run_id=run_id,
        dataset=dataset,
        split=split,
        config_digest=config_digest(params.config),
        seed=seed,
    )


_CSV_COLUMNS = "run_id,dataset,split,precision,recall,f1,tp,fp,fn,tn,seed"


def _report_row(r):
    return {
        "run_id": r.run_id,
        "dataset": r.dataset,
        "split": r.split,
        "precision": r.precision,
        "recall": r.recall,
        "f1": r.f1,
        "tp": r.counts.tp,
        "fp": r.counts.fp,
        "fn": r.counts.fn,
        "tn": r.counts.tn,
        "seed": r.seed,
    }


def emit_report(reports, path, fmt="csv"):
    """Write reports as CSV (fixed column order, 6-decimal reals) or JSON."""
    if not reports:
        raise ValueError("emit_report needs at least one report")
    if fmt == "csv":
        with open(path, "w", newline="\n") as fh:
            fh.write(_CSV_COLUMNS + "\n")
            for r in reports:
                fh.write(
                    f"{r.run_id},{r.dataset},{r.split},"
                    f"{r.precision:.6f},{r.recall:.6f},{r.f1:.6f},"
                    f"{r.counts.tp},{r.counts.fp},{r.counts.fn},{r.counts.tn},{r.seed}\n"
                )
    elif fmt == "json":
        with open(path, "w", newline="\n") as fh:
            json.dump([_report_row(r) for r in reports], fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}; expected csv or json")
