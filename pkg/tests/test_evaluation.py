import json

import numpy as np
import pytest

from loglens.corpus import ANOMALOUS, NORMAL, UNLABELED, LogRecord
from loglens.encoding import build_fixed_vocab
from loglens.errors import LabelMissingError, ShapeError
from loglens.evaluation import ConfusionCounts, confusion, emit_report, evaluate, prf1
from loglens.model import ModelConfig, init_params

VOCAB = build_fixed_vocab()


def test_confusion_hand_tally():
    c = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (c.tp, c.fp, c.fn, c.tn) == (2, 1, 1, 1)
    assert c.total == 5


def test_confusion_all_correct():
    c = confusion([1, 0, 1], [1, 0, 1])
    assert c.fp == 0 and c.fn == 0


def test_confusion_empty():
    c = confusion([], [])
    assert (c.tp, c.fp, c.fn, c.tn) == (0, 0, 0, 0)


def test_confusion_length_mismatch():
    with pytest.raises(ShapeError):
        confusion([1], [1, 0])


def test_confusion_permutation_equivariant():
    rng = np.random.default_rng(0)
    preds = rng.integers(0, 2, size=50).tolist()
    labels = rng.integers(0, 2, size=50).tolist()
    c1 = confusion(preds, labels)
    order = rng.permutation(50)
    c2 = confusion([preds[i] for i in order], [labels[i] for i in order])
    assert c1 == c2


def test_prf1_perfect():
    assert prf1(ConfusionCounts(5, 0, 0, 0)) == (1.0, 1.0, 1.0)


def test_prf1_hand_case():
    p, r, f1 = prf1(ConfusionCounts(tp=3, fp=1, fn=2, tn=0))
    assert p == pytest.approx(0.75)
    assert r == pytest.approx(0.6)
    assert f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)
    assert f1 == pytest.approx(0.666667, abs=1e-6)


def test_prf1_zero_conventions():
    assert prf1(ConfusionCounts(0, 0, 0, 0)) == (0.0, 0.0, 0.0)
    assert prf1(ConfusionCounts(0, 0, 0, 10)) == (0.0, 0.0, 0.0)


def test_prf1_f1_between_precision_and_recall():
    rng = np.random.default_rng(1)
    for _ in range(100):
        tp, fp, fn, tn = (int(x) for x in rng.integers(1, 30, size=4))
        p, r, f1 = prf1(ConfusionCounts(tp, fp, fn, tn))
        assert 0.0 <= p <= 1.0 and 0.0 <= r <= 1.0 and 0.0 <= f1 <= 1.0
        assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12


def _records(labels):
    return [LogRecord(f"log line number {i}", lab, i, "t") for i, lab in enumerate(labels)]


def _uniform_model():
    params = init_params(
        ModelConfig(d_model=16, n_heads=2, d_ff=24, max_len=32, dropout_rate=0.0, classifier_hidden=8),
        seed=0,
    )
    for p in params.classifier_params():
        p.value[...] = 0.0  # logits 0 -> (0.5, 0.5) -> argmax picks class 0 (normal)
    return params


def test_evaluate_constant_normal_predictor():
    params = _uniform_model()
    report = evaluate(params, _records([NORMAL] * 7), VOCAB)
    assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)
    assert report.counts.tn == 7
    assert report.counts.total == 7


def test_evaluate_is_deterministic_and_pure():
    params = init_params(
        ModelConfig(d_model=16, n_heads=2, d_ff=24, max_len=32, dropout_rate=0.0, classifier_hidden=8),
        seed=3,
    )
    snapshot = [p.value.tobytes() for p in params.all_params()]
    records = _records([NORMAL, ANOMALOUS] * 10)
    r1 = evaluate(params, records, VOCAB, run_id="x", dataset="d", split="s", seed=1)
    r2 = evaluate(params, records, VOCAB, run_id="x", dataset="d", split="s", seed=1)
    assert r1 == r2
    assert [p.value.tobytes() for p in params.all_params()] == snapshot
    assert r1.config_digest
    assert r1.counts.total == 20


def test_evaluate_rejects_unlabeled():
    params = _uniform_model()
    with pytest.raises(LabelMissingError):
        evaluate(params, _records([NORMAL, UNLABELED]), VOCAB)


def test_evaluate_threshold_flag():
    params = _uniform_model()  # p_anomalous == 0.5 exactly
    records = _records([ANOMALOUS] * 4)
    by_argmax = evaluate(params, records, VOCAB)
    assert by_argmax.counts.fn == 4
    sensitive = evaluate(params, records, VOCAB, threshold=0.4)
    assert sensitive.counts.tp == 4


def _report(**kw):
    base = dict(
        counts=ConfusionCounts(3, 1, 2, 4),
        precision=0.75,
        recall=0.6,
        f1=2 * 0.75 * 0.6 / 1.35,
        run_id="r1",
        dataset="synth",
        split="test",
        config_digest="abc123",
        seed=7,
    )
    base.update(kw)
    from loglens.evaluation import MetricsReport

    return MetricsReport(**base)


def test_emit_csv_exact_format(tmp_path):
    path = tmp_path / "report.csv"
    emit_report([_report()], path, fmt="csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0] == "run_id,dataset,split,precision,recall,f1,tp,fp,fn,tn,seed"
    assert lines[1] == "r1,synth,test,0.750000,0.600000,0.666667,3,1,2,4,7"


def test_emit_csv_renders_perfect_f1(tmp_path):
    path = tmp_path / "report.csv"
    emit_report([_report(precision=1.0, recall=1.0, f1=1.0)], path, fmt="csv")
    assert ",1.000000,1.000000,1.000000," in path.read_text().splitlines()[1]


def test_emit_json_round_trip(tmp_path):
    path = tmp_path / "report.json"
    r = _report()
    emit_report([r], path, fmt="json")
    (row,) = json.loads(path.read_text())
    assert row["run_id"] == "r1"
    assert row["dataset"] == "synth"
    assert row["split"] == "test"
    assert row["precision"] == r.precision
    assert row["recall"] == r.recall
    assert row["f1"] == r.f1
    assert (row["tp"], row["fp"], row["fn"], row["tn"]) == (3, 1, 2, 4)
    assert row["seed"] == 7


def test_emit_rejects_empty_and_bad_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path / "x.csv", fmt="csv")
    with pytest.raises(ValueError):
        emit_report([_report()], tmp_path / "x.yaml", fmt="yaml")
