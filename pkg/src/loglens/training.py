"""Training loops.

Stage 1 (self-supervised): all parameters are trained to separate normal
lines from perturbed copies of them; fresh perturbations are drawn every
epoch. Stage 2 (label-driven update): only the classifier head is trained,
against a three-way balanced set of normals, human-labeled anomalies and
perturbed normals; the encoder stays frozen, so its pooled features are
computed once and reused across epochs.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .augment import PerturbationSpec, build_balanced_pairs, perturb_record_line
from .autodiff import CE_CLAMP, backward
from .corpus import ANOMALOUS
from .encoding import build_fixed_vocab, encode_line
from .errors import ConfigError, ContaminationError, DivergenceError
from .model import _classifier_graph, _classify_graph, pack_sequences, pooled_features
from .seeding import make_rng, mix_seed

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 5
    seed: int = 0
    perturbation: PerturbationSpec = PerturbationSpec()
    optimizer: str = "adam"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")


@dataclass(frozen=True)
class TrainHistory:
    mean_losses: tuple
    accuracies: tuple

    @property
    def rewards(self):
        """Per-epoch mean reward; the update stage maximizes -loss."""
        return tuple(-l for l in self.mean_losses)


def write_history(history, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("epoch,mean_loss,accuracy\n")
        for i, (loss, acc) in enumerate(zip(history.mean_losses, history.accuracies), 1):
            fh.write(f"{i},{loss:.6f},{acc:.6f}\n")


def cross_entropy(probs, cls):
    """-ln(p_class), clamped at 1e-12 so the loss stays finite."""
    return -math.log(max(probs[cls], CE_CLAMP))


class _Sgd:
    def __init__(self, params, lr):
        self.params = params
        self.lr = lr

    def step(self):
        for p in self.params:
            p.value -= self.lr * p.grad


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad**2
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name, params, lr):
    if name == "sgd":
        return _Sgd(params, lr)
    if name == "adam":
        return _Adam(params, lr)
    raise ConfigError(f"unknown optimizer {name!r}")


def _batches(n, size):
    for start in range(0, n, size):
        yield start, min(start + size, n)


def _check_finite(loss, epoch, batch):
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss at epoch {epoch} batch {batch}")


def train_selfsup(params, normals, config):
    """Stage 1: train all parameters on balanced (normal, perturbed) pairs."""
    for r in normals:
        if r.label == ANOMALOUS:
            raise ContaminationError(
                f"record {r.index} from {r.source} is labeled anomalous; "
                "stage-1 training uses normal lines only"
            )
    vocab = build_fixed_vocab()
    cfg = params.config
    opt = make_optimizer(config.optimizer, params.all_params(), config.learning_rate)
    losses, accs = [], []
    for epoch in range(1, config.epochs + 1):
        epoch_spec = replace(
            config.perturbation, seed=mix_seed(config.perturbation.seed, "epoch", epoch)
        )
        pairs = build_balanced_pairs(normals, epoch_spec)
        total_loss = 0.0
        correct = 0
        for bi, (start, stop) in enumerate(_batches(len(pairs), config.batch_size), 1):
            chunk = pairs[start:stop]
            seqs = [encode_line(line, vocab, cfg.max_len) for line, _ in chunk]
            classes = np.array([c for _, c in chunk], dtype=np.int64)
            ids, lengths = pack_sequences(seqs)
            params.zero_grad()
            probs = _classify_graph(
                params, ids, lengths, training=True,
                rng=make_rng(config.seed, "dropout", epoch, bi),
            )
            loss = ad.cross_entropy_mean(probs, classes)
            _check_finite(loss.value, epoch, bi)
            backward(loss)
            opt.step()
            total_loss += float(loss.value) * len(chunk)
            correct += int((probs.value.argmax(axis=1) == classes).sum())
        losses.append(total_loss / len(pairs))
        accs.append(correct / len(pairs))
    return params, TrainHistory(tuple(losses), tuple(accs))


# --- stage 2 ------------------------------------------------------------------

CATEGORIES = ("normal", "labeled_anomalous", "perturbed_normal")


@dataclass(frozen=True)
class UpdateItem:
    line: str
    cls: int
    category: str


@dataclass(frozen=True)
class UpdateSet:
    items: tuple

    def __post_init__(self):
        counts = {c: 0 for c in CATEGORIES}
        for it in self.items:
            if it.category not in CATEGORIES:
                raise ConfigError(f"unknown update category {it.category!r}")
            expected_cls = 0 if it.category == "normal" else 1
            if it.cls != expected_cls:
                raise ConfigError(
                    f"category {it.category} must carry class {expected_cls}, got {it.cls}"
                )
            counts[it.category] += 1
        if len(set(counts.values())) != 1:
            raise ConfigError(f"update categories must be balanced, got {counts}")

    def category_counts(self):
        return {c: sum(1 for it in self.items if it.category == c) for c in CATEGORIES}


def build_update_set(normals, labeled_anomalies, spec):
    """Three equal categories of size N = |normals|: the normals themselves,
    the human-labeled anomalies (cycled up / subsampled down to N), and one
    perturbation per normal line."""
    if not normals:
        raise ValueError("build_update_set needs at least one normal record")
    if not labeled_anomalies:
        raise ValueError("stage 2 requires at least one human-labeled anomaly")
    for r in normals:
        if r.label == ANOMALOUS:
            raise ValueError(f"record {r.index} passed as normal is labeled anomalous")
    for r in labeled_anomalies:
        if r.label != ANOMALOUS:
            raise ValueError(f"record {r.index} passed as anomaly is labeled {r.label}")

    n = len(normals)
    if len(labeled_anomalies) < n:
        anomalies = [labeled_anomalies[i % len(labeled_anomalies)] for i in range(n)]
    elif len(labeled_anomalies) > n:
        rng = make_rng(spec.seed, "anomaly-subsample")
        idx = sorted(rng.choice(len(labeled_anomalies), size=n, replace=False))
        anomalies = [labeled_anomalies[i] for i in idx]
    else:
        anomalies = list(labeled_anomalies)

    items = [UpdateItem(r.line, 0, "normal") for r in normals]
    items += [UpdateItem(r.line, 1, "labeled_anomalous") for r in anomalies]
    items += [
        UpdateItem(perturb_record_line(r.line, spec, i), 1, "perturbed_normal")
        for i, r in enumerate(normals)
    ]
    return UpdateSet(tuple(items))


def update_with_labels(params, update_set, config):
    """Stage 2: gradient steps on the classifier head only.

    The encoder is frozen, so its mean-pooled features are computed once
    (inference mode, no dropout) and the per-epoch loop trains just the
    classifier on them. Non-classifier parameters are untouched by
    construction.
    """
    vocab = build_fixed_vocab()
    cfg = params.config
    seqs = [encode_line(it.line, vocab, cfg.max_len) for it in update_set.items]
    classes = np.array([it.cls for it in update_set.items], dtype=np.int64)
    features = pooled_features(params, seqs)

    head = params.classifier_params()
    opt = make_optimizer(config.optimizer, head, config.learning_rate)
    n = len(update_set.items)
    losses, accs = [], []
    for epoch in range(1, config.epochs + 1):
        order = make_rng(config.seed, "update-shuffle", epoch).permutation(n)
        total_loss = 0.0
        correct = 0
        for bi, (start, stop) in enumerate(_batches(n, config.batch_size), 1):
            idx = order[start:stop]
            for p in head:
                p.zero_grad()
            probs = _classifier_graph(params, ad.Tensor(features[idx]))
            loss = ad.cross_entropy_mean(probs, classes[idx])
            _check_finite(loss.value, epoch, bi)
            backward(loss)
            opt.step()
            total_loss += float(loss.value) * len(idx)
            correct += int((probs.value.argmax(axis=1) == classes[idx]).sum())
        losses.append(total_loss / n)
        accs.append(correct / n)
    return params, TrainHistory(tuple(losses), tuple(accs))
