"""Two-layer Transformer encoder with a mean-pool MLP/softmax classifier.

The forward pass is built on the autodiff tape so the same code serves
inference and training. Sequences are processed in batches of shape
(B, L, d_model); pad key positions are masked out of attention and out of
the mean pool, which makes outputs independent of padding (verified by the
pad-invariance tests). Batches may therefore be cropped to their longest
true length.
"""

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Param
from .encoding import build_fixed_vocab, sinusoidal_pe
from .errors import (
    ConfigError,
    CorruptCheckpointError,
    CorruptInputError,
    EmptyInputError,
    IncompatibleCheckpointError,
    ShapeError,
    VocabularyMismatchError,
)
from .matrix import as_matrix
from .seeding import make_rng

CHECKPOINT_MAGIC = b"LGLN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 97
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 256
    n_layers: int = 2
    max_len: int = 256
    n_classes: int = 2
    dropout_rate: float = 0.1
    classifier_hidden: int = 64

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.d_model < 2 or self.d_model % 2 != 0:
            raise ConfigError(f"d_model must be a positive even number, got {self.d_model}")
        if self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"n_heads must divide d_model, got n_heads={self.n_heads} d_model={self.d_model}"
            )
        if self.d_ff < 1 or self.n_layers < 1 or self.max_len < 1 or self.classifier_hidden < 1:
            raise ConfigError("d_ff, n_layers, max_len and classifier_hidden must be >= 1")
        if self.n_classes != 2:
            raise ConfigError(f"this is a binary classifier; n_classes must be 2, got {self.n_classes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class LayerParams:
    wq: Param
    wk: Param
    wv: Param
    wo: Param
    w1: Param
    b1: Param
    w2: Param
    b2: Param
    ln1_gamma: Param
    ln1_beta: Param
    ln2_gamma: Param
    ln2_beta: Param


@dataclass
class ModelParams:
    config: ModelConfig
    embedding: Param
    layers: list
    wc1: Param
    bc1: Param
    wc2: Param
    bc2: Param

    def named_params(self):
        """(name, Param) pairs in the canonical checkpoint order."""
        out = [("embedding", self.embedding)]
        for i, layer in enumerate(self.layers):
            for name in (
                "wq", "wk", "wv", "wo",
                "w1", "b1", "w2", "b2",
                "ln1_gamma", "ln1_beta", "ln2_gamma", "ln2_beta",
            ):
                out.append((f"layer{i}.{name}", getattr(layer, name)))
        out += [
            ("classifier.wc1", self.wc1),
            ("classifier.bc1", self.bc1),
            ("classifier.wc2", self.wc2),
            ("classifier.bc2", self.bc2),
        ]
        return out

    def all_params(self):
        return [p for _, p in self.named_params()]

    def classifier_params(self):
        return [self.wc1, self.bc1, self.wc2, self.bc2]

    def encoder_params(self):
        classifier = {id(p) for p in self.classifier_params()}
        return [p for p in self.all_params() if id(p) not in classifier]

    def zero_grad(self):
        for p in self.all_params():
            p.zero_grad()


def init_params(config, seed):
    """Scaled uniform (Glorot) weights, zero biases, identity layer norms."""
    rng = make_rng(seed, "init")

    def glorot(fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return Param(rng.uniform(-bound, bound, size=(fan_in, fan_out)))

    d, f, h = config.d_model, config.d_ff, config.classifier_hidden
    embedding = glorot(config.vocab_size, d)
    layers = []
    for _ in range(config.n_layers):
        layers.append(
            LayerParams(
                wq=glorot(d, d),
                wk=glorot(d, d),
                wv=glorot(d, d),
                wo=glorot(d, d),
                w1=glorot(d, f),
                b1=Param(np.zeros((1, f))),
                w2=glorot(f, d),
                b2=Param(np.zeros((1, d))),
                ln1_gamma=Param(np.ones((1, d))),
                ln1_beta=Param(np.zeros((1, d))),
                ln2_gamma=Param(np.ones((1, d))),
                ln2_beta=Param(np.zeros((1, d))),
            )
        )
    return ModelParams(
        config=config,
        embedding=embedding,
        layers=layers,
        wc1=glorot(d, h),
        bc1=Param(np.zeros((1, h))),
        wc2=glorot(h, config.n_classes),
        bc2=Param(np.zeros((1, config.n_classes))),
    )


# --- forward passes ---------------------------------------------------------


@lru_cache(maxsize=8)
def _cached_pe(max_len, d_model):
    pe = sinusoidal_pe(max_len, d_model)
    pe.setflags(write=False)
    return pe


def attention(q, k, v, key_mask):
    """Scaled dot-product attention over one sequence.

    key_mask[i] is True where position i is a real (non-pad) key; masked
    keys get weight exactly zero. Output has V's shape.
    """
    q = as_matrix(q, "Q")
    k = as_matrix(k, "K")
    v = as_matrix(v, "V")
    if not (q.shape[0] == k.shape[0] == v.shape[0]):
        raise ShapeError(f"Q/K/V row counts differ: {q.shape} {k.shape} {v.shape}")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"Q and K widths differ: {q.shape} vs {k.shape}")
    key_mask = np.asarray(key_mask, dtype=bool)
    if key_mask.shape != (q.shape[0],):
        raise ShapeError(f"mask length {key_mask.shape} != row count {q.shape[0]}")
    scores = (q @ k.T) / math.sqrt(q.shape[1])
    scores = scores + np.where(key_mask, 0.0, -np.inf)[None, :]
    return kernels.softmax_rows(scores) @ v


def _mask_bias(valid):
    return np.where(valid, 0.0, -np.inf)[:, None, None, :]


def _mha_graph(x, layer, n_heads, mask_bias):
    dk = x.value.shape[-1] // n_heads
    q = ad.split_heads(ad.matmul(x, layer.wq), n_heads)
    k = ad.split_heads(ad.matmul(x, layer.wk), n_heads)
    v = ad.split_heads(ad.matmul(x, layer.wv), n_heads)
    scores = ad.mul_const(ad.matmul(q, ad.swap_last2(k)), 1.0 / math.sqrt(dk))
    weights = ad.softmax_last(ad.add_const(scores, mask_bias))
    ctx = ad.merge_heads(ad.matmul(weights, v))
    return ad.matmul(ctx, layer.wo)


def _ffn_graph(x, layer):
    hidden = ad.relu(ad.add(ad.matmul(x, layer.w1), layer.b1))
    return ad.add(ad.matmul(hidden, layer.w2), layer.b2)


def _encoder_graph(params, ids, lengths, training, rng):
    cfg = params.config
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise CorruptInputError(
            f"token ids must be in [0, {cfg.vocab_size}), got range "
            f"[{ids.min()}, {ids.max()}]"
        )
    b, length = ids.shape
    if length > cfg.max_len:
        raise ShapeError(f"sequence length {length} exceeds config.max_len {cfg.max_len}")
    drop = cfg.dropout_rate if training else 0.0
    if drop > 0 and rng is None:
        raise ValueError("training forward with dropout needs an rng")

    x = ad.mul_const(ad.embedding(params.embedding, ids), math.sqrt(cfg.d_model))
    x = ad.add_const(x, _cached_pe(cfg.max_len, cfg.d_model)[:length])
    valid = np.arange(length)[None, :] < np.asarray(lengths)[:, None]
    bias = _mask_bias(valid)
    for layer in params.layers:
        attn = _mha_graph(x, layer, cfg.n_heads, bias)
        if drop > 0:
            attn = ad.dropout(attn, drop, rng)
        x = ad.layer_norm_last(ad.add(x, attn), layer.ln1_gamma, layer.ln1_beta)
        ffn = _ffn_graph(x, layer)
        if drop > 0:
            ffn = ad.dropout(ffn, drop, rng)
        x = ad.layer_norm_last(ad.add(x, ffn), layer.ln2_gamma, layer.ln2_beta)
    return x, valid


def _classifier_graph(params, pooled):
    hidden = ad.relu(ad.add(ad.matmul(pooled, params.wc1), params.bc1))
    logits = ad.add(ad.matmul(hidden, params.wc2), params.bc2)
    return ad.softmax_last(logits)


def _classify_graph(params, ids, lengths, training=False, rng=None):
    x, valid = _encoder_graph(params, ids, lengths, training, rng)
    pooled = ad.masked_mean_rows(x, valid)
    return _classifier_graph(params, pooled)


def pack_sequences(seqs, crop=True):
    """Stack TokenSequences into (ids, lengths), optionally cropped to the
    longest true length in the batch (pad invariance makes this safe)."""
    if not seqs:
        raise ValueError("empty batch")
    max_len = seqs[0].max_len
    for s in seqs:
        if s.max_len != max_len:
            raise ShapeError("all sequences in a batch must share max_len")
    lengths = np.array([s.true_len for s in seqs], dtype=np.int64)
    if lengths.min() == 0:
        raise EmptyInputError("batch contains a sequence with no non-pad tokens")
    width = int(lengths.max()) if crop else max_len
    ids = np.stack([s.ids[:width] for s in seqs])
    return ids, lengths


def multi_head_attention(x, layer, n_heads, key_mask):
    """Multi-head self-attention over one (len x d_model) matrix."""
    x = as_matrix(x, "x")
    key_mask = np.asarray(key_mask, dtype=bool)
    if key_mask.shape != (x.shape[0],):
        raise ShapeError(f"mask length {key_mask.shape} != row count {x.shape[0]}")
    if x.shape[1] % n_heads != 0:
        raise ConfigError(f"n_heads {n_heads} must divide width {x.shape[1]}")
    out = _mha_graph(ad.Tensor(x[None]), layer, n_heads, _mask_bias(key_mask[None]))
    return out.value[0]


def feed_forward(x, layer):
    """Position-wise two-layer ReLU network over one (len x d_model) matrix."""
    x = as_matrix(x, "x")
    if x.shape[1] != layer.w1.value.shape[0]:
        raise ShapeError(f"width {x.shape[1]} != W1 rows {layer.w1.value.shape[0]}")
    return _ffn_graph(ad.Tensor(x[None]), layer).value[0]


def encoder_forward(params, seq, training=False, rng=None):
    """Run the encoder stack over one TokenSequence -> (max_len, d_model)."""
    if seq.max_len != params.config.max_len:
        raise ShapeError(
            f"sequence max_len {seq.max_len} != config.max_len {params.config.max_len}"
        )
    x, _ = _encoder_graph(
        params, seq.ids[None, :], np.array([seq.true_len]), training, rng
    )
    return x.value[0]


def classify(params, seq, training=False, rng=None):
    """Probability pair (p_normal, p_anomalous) for one TokenSequence."""
    if seq.true_len == 0:
        raise EmptyInputError("cannot classify a sequence with no non-pad tokens")
    ids, lengths = pack_sequences([seq])
    probs = _classify_graph(params, ids, lengths, training, rng)
    return float(probs.value[0, 0]), float(probs.value[0, 1])


def classify_batch(params, seqs, training=False, rng=None):
    """(B, 2) probability array for a list of TokenSequences."""
    ids, lengths = pack_sequences(seqs)
    return _classify_graph(params, ids, lengths, training, rng).value


def pooled_features(params, seqs, batch_size=64):
    """Mean-pooled encoder features (N, d_model), inference mode, chunked to
    bound the attention-score memory."""
    out = []
    for start in range(0, len(seqs), batch_size):
        ids, lengths = pack_sequences(seqs[start : start + batch_size])
        x, valid = _encoder_graph(params, ids, lengths, False, None)
        out.append(ad.masked_mean_rows(x, valid).value)
    return np.concatenate(out)


def config_digest(config):
    """Stable hash of a ModelConfig, recorded in metrics reports."""
    blob = json.dumps(asdict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# --- checkpoints -------------------------------------------------------------


@dataclass(frozen=True)
class Checkpoint:
    format_version: int
    config: ModelConfig
    vocab_digest: str
    params: ModelParams
    training_provenance: str


def _default_digest():
    return build_fixed_vocab().digest()


def save_checkpoint(params, path, vocab_digest=None, provenance=""):
    """Binary layout: magic, u32 version, u32 header length, JSON header,
    then each parameter array raw little-endian in the header's order."""
    digest = vocab_digest if vocab_digest is not None else _default_digest()
    named = params.named_params()
    header = {
        "config": asdict(params.config),
        "dtype": "<f8",
        "params": [{"name": n, "shape": list(p.value.shape)} for n, p in named],
        "provenance": provenance,
        "vocab_digest": digest,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, p in named:
            fh.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())


def load_checkpoint(path, expected_vocab_digest=None):
    """Load and validate a checkpoint; round trip is bit-exact."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 12 or buf[:4] != CHECKPOINT_MAGIC:
        raise CorruptCheckpointError(f"{path}: missing {CHECKPOINT_MAGIC!r} magic bytes")
    version = struct.unpack_from("<I", buf, 4)[0]
    if version != CHECKPOINT_VERSION:
        raise IncompatibleCheckpointError(
            f"{path}: format version {version}, supported {CHECKPOINT_VERSION}"
        )
    header_len = struct.unpack_from("<I", buf, 8)[0]
    if len(buf) < 12 + header_len:
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(buf[12 : 12 + header_len].decode("utf-8"))
        config = ModelConfig(**header["config"])
        declared = header["params"]
        dtype = np.dtype(header["dtype"])
        digest = header["vocab_digest"]
        provenance = header.get("provenance", "")
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpointError(f"{path}: bad header ({exc})") from exc
    if dtype.kind != "f" or dtype.itemsize not in (4, 8):
        raise CorruptCheckpointError(f"{path}: unsupported dtype {header['dtype']}")

    expected = expected_vocab_digest if expected_vocab_digest is not None else _default_digest()
    if digest != expected:
        raise VocabularyMismatchError(
            f"{path}: checkpoint vocabulary digest {digest[:12]}… does not match "
            f"expected {expected[:12]}…"
        )

    params = init_params(config, seed=0)
    by_name = dict(params.named_params())
    if [d["name"] for d in declared] != [n for n, _ in params.named_params()]:
        raise CorruptCheckpointError(f"{path}: parameter list does not match config")
    offset = 12 + header_len
    for decl in declared:
        p = by_name[decl["name"]]
        shape = tuple(decl["shape"])
        if shape != p.value.shape:
            raise CorruptCheckpointError(
                f"{path}: {decl['name']} has shape {shape}, expected {p.value.shape}"
            )
        nbytes = int(np.prod(shape)) * dtype.itemsize
        if offset + nbytes > len(buf):
            raise CorruptCheckpointError(f"{path}: truncated at {decl['name']}")
        arr = np.frombuffer(buf, dtype=dtype, count=int(np.prod(shape)), offset=offset)
        p.value[...] = arr.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(buf):
        raise CorruptCheckpointError(f"{path}: {len(buf) - offset} trailing bytes")
    params.zero_grad()
    return Checkpoint(
        format_version=version,
        config=config,
        vocab_digest=digest,
        params=params,
        training_provenance=provenance,
    )
