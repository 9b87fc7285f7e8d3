import math

import numpy as np
import pytest

from loglens.augment import PerturbationSpec
from loglens.autodiff import Param
from loglens.corpus import ANOMALOUS, NORMAL, LogRecord, default_synth_config, synth_generate
from loglens.errors import ConfigError, ContaminationError, DivergenceError
from loglens.model import ModelConfig, init_params
from loglens.training import (
    TrainConfig,
    UpdateItem,
    UpdateSet,
    build_update_set,
    cross_entropy,
    make_optimizer,
    train_selfsup,
    update_with_labels,
    write_history,
)

SMALL = ModelConfig(
    vocab_size=97, d_model=16, n_heads=2, d_ff=24, n_layers=2, max_len=96,
    dropout_rate=0.1, classifier_hidden=8,
)


def small_train_config(**kw):
    base = dict(epochs=2, seed=1, batch_size=16, perturbation=PerturbationSpec(seed=5))
    base.update(kw)
    return TrainConfig(**base)


def normals(n, seed=0):
    return synth_generate(default_synth_config(count=n, anomaly_rate=0.0, seed=seed))


def anomalies(n, seed=1):
    recs = synth_generate(default_synth_config(count=n, anomaly_rate=1.0, seed=seed))
    assert all(r.label == ANOMALOUS for r in recs)
    return recs


def test_cross_entropy_values():
    assert cross_entropy((1.0, 0.0), 0) == 0.0
    assert cross_entropy((0.5, 0.5), 1) == pytest.approx(math.log(2.0), abs=1e-9)
    assert cross_entropy((0.5, 0.5), 1) == pytest.approx(0.693147, abs=1e-6)
    v = cross_entropy((1.0, 0.0), 1)
    assert math.isfinite(v)
    assert v == pytest.approx(-math.log(1e-12), abs=1e-6)  # ~27.63


def test_train_config_validation():
    with pytest.raises(ConfigError):
        small_train_config(learning_rate=0.0)
    with pytest.raises(ConfigError):
        small_train_config(epochs=0)
    with pytest.raises(ConfigError):
        small_train_config(optimizer="lbfgs")


def test_sgd_step_is_exactly_minus_lr_times_grad():
    p = Param(np.array([[1.0, -2.0]]))
    p.grad[...] = np.array([[0.25, 4.0]])
    opt = make_optimizer("sgd", [p], lr=0.1)
    opt.step()
    assert np.array_equal(p.value, np.array([[1.0 - 0.1 * 0.25, -2.0 - 0.1 * 4.0]]))


def test_adam_first_step_size_is_lr():
    # with m-hat = g and v-hat = g^2 the first step is lr * g/|g| (up to eps)
    p = Param(np.array([[2.0]]))
    p.grad[...] = np.array([[0.5]])
    opt = make_optimizer("adam", [p], lr=0.01)
    opt.step()
    assert p.value[0, 0] == pytest.approx(2.0 - 0.01, abs=1e-6)


def test_selfsup_loss_decreases_on_separable_corpus():
    recs = normals(120, seed=3)
    params = init_params(SMALL, seed=0)
    params, hist = train_selfsup(params, recs, small_train_config(epochs=5))
    assert len(hist.mean_losses) == 5
    assert len(hist.accuracies) == 5
    assert hist.mean_losses[-1] < hist.mean_losses[0]


def test_selfsup_is_deterministic():
    recs = normals(40, seed=4)
    runs = []
    for _ in range(2):
        params = init_params(SMALL, seed=2)
        params, hist = train_selfsup(params, recs, small_train_config())
        runs.append((params, hist))
    a, b = runs
    assert a[1] == b[1]
    for (_, pa), (_, pb) in zip(a[0].named_params(), b[0].named_params()):
        assert pa.value.tobytes() == pb.value.tobytes()


def test_selfsup_rejects_anomalous_records():
    recs = normals(5) + [LogRecord("bad line", ANOMALOUS, 5, "t")]
    with pytest.raises(ContaminationError):
        train_selfsup(init_params(SMALL, 0), recs, small_train_config())


def test_selfsup_divergence_is_reported():
    recs = normals(20, seed=6)
    cfg = small_train_config(learning_rate=1e12, optimizer="sgd", epochs=1)
    with np.errstate(all="ignore"), pytest.raises(DivergenceError) as exc:
        train_selfsup(init_params(SMALL, 0), recs, cfg)
    assert "epoch" in str(exc.value) and "batch" in str(exc.value)


def test_write_history(tmp_path):
    recs = normals(16, seed=7)
    params, hist = train_selfsup(init_params(SMALL, 0), recs, small_train_config(epochs=2))
    path = tmp_path / "hist.csv"
    write_history(hist, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,mean_loss,accuracy"
    assert len(lines) == 3
    assert lines[1].startswith("1,")


# --- update set ----------------------------------------------------------------


def test_update_set_cycles_scarce_anomalies():
    uset = build_update_set(normals(10), anomalies(4), PerturbationSpec(seed=1))
    counts = uset.category_counts()
    assert counts == {"normal": 10, "labeled_anomalous": 10, "perturbed_normal": 10}
    anom_lines = [it.line for it in uset.items if it.category == "labeled_anomalous"]
    uniq = anomalies(4)
    # cycled in order: 4 + 4 + 2
    assert anom_lines == [uniq[i % 4].line for i in range(10)]


def test_update_set_subsamples_plentiful_anomalies():
    uset = build_update_set(normals(10), anomalies(25), PerturbationSpec(seed=2))
    counts = uset.category_counts()
    assert counts == {"normal": 10, "labeled_anomalous": 10, "perturbed_normal": 10}
    pool = {r.line for r in anomalies(25)}
    chosen = [it.line for it in uset.items if it.category == "labeled_anomalous"]
    assert len(set(chosen)) == 10
    assert set(chosen) <= pool


def test_update_set_class_mapping():
    uset = build_update_set(normals(3), anomalies(3), PerturbationSpec(seed=3))
    for it in uset.items:
        assert it.cls == (0 if it.category == "normal" else 1)


def test_update_set_requires_anomalies():
    with pytest.raises(ValueError):
        build_update_set(normals(3), [], PerturbationSpec())


def test_update_set_rejects_mislabeled_inputs():
    with pytest.raises(ValueError):
        build_update_set(normals(3), normals(2), PerturbationSpec())
    with pytest.raises(ValueError):
        build_update_set(anomalies(3), anomalies(2), PerturbationSpec())


def test_update_set_invariant_enforced():
    items = (
        UpdateItem("a", 0, "normal"),
        UpdateItem("b", 1, "labeled_anomalous"),
    )
    with pytest.raises(ConfigError):
        UpdateSet(items)
    with pytest.raises(ConfigError):
        UpdateSet((UpdateItem("a", 1, "normal"),))


# --- stage-2 update --------------------------------------------------------------


def _trained_model(seed=0):
    params = init_params(SMALL, seed=seed)
    params, _ = train_selfsup(params, normals(30, seed=8), small_train_config(epochs=1))
    return params


def test_update_freezes_encoder_and_moves_classifier():
    params = _trained_model()
    before = {n: p.value.tobytes() for n, p in params.named_params()}
    uset = build_update_set(normals(12, seed=9), anomalies(5, seed=10), PerturbationSpec(seed=4))
    params, hist = update_with_labels(params, uset, small_train_config(epochs=2))
    classifier = {"classifier.wc1", "classifier.bc1", "classifier.wc2", "classifier.bc2"}
    changed = {n for n, p in params.named_params() if p.value.tobytes() != before[n]}
    assert changed <= classifier
    assert "classifier.wc1" in changed and "classifier.wc2" in changed
    assert len(hist.mean_losses) == 2
    assert hist.rewards == tuple(-l for l in hist.mean_losses)


def test_update_is_deterministic():
    uset = build_update_set(normals(8, seed=11), anomalies(3, seed=12), PerturbationSpec(seed=6))
    outs = []
    for _ in range(2):
        params = _trained_model(seed=3)
        params, hist = update_with_labels(params, uset, small_train_config(epochs=2))
        outs.append((hist, [p.value.tobytes() for p in params.classifier_params()]))
    assert outs[0] == outs[1]
