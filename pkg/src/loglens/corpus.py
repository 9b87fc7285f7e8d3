"""Labeled log corpora: loading, chronological splitting, test-set
balancing, synthetic generation, and counting.

Input files are read as bytes and decoded latin-1 so every byte survives
untouched; anything outside printable ASCII becomes UNK downstream. Two
on-disk layouts are understood:

* "alert": the BGL/Thunderbird convention, where a line whose first
  whitespace-delimited field is "-" is normal and any other first field
  marks an alert (anomalous).
* "tsv": two columns, label TAB line, label in {normal, anomalous,
  unlabeled}; used for synthetic and custom corpora.
"""

import logging
import re
from dataclasses import dataclass

from .errors import ConfigError, CorpusError, EmptyCorpusError
from .seeding import make_rng

log = logging.getLogger(__name__)

NORMAL = "normal"
ANOMALOUS = "anomalous"
UNLABELED = "unlabeled"
LABELS = (NORMAL, ANOMALOUS, UNLABELED)


@dataclass(frozen=True)
class LogRecord:
    line: str
    label: str
    index: int
    source: str


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    update_fraction: float
    test_fraction: float

    def __post_init__(self):
        for name, f in (
            ("train_fraction", self.train_fraction),
            ("update_fraction", self.update_fraction),
            ("test_fraction", self.test_fraction),
        ):
            if not 0.0 <= f <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {f}")
        total = self.train_fraction + self.update_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1.0, got {total}")


def _read_lines(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read log file {path}: {exc}") from exc
    text = raw.decode("latin-1")
    return [ln.rstrip("\r") for ln in text.split("\n") if ln.rstrip("\r")]


def _label_from_alert_field(line):
    first = line.split(None, 1)[0]
    return NORMAL if first == "-" else ANOMALOUS


def _parse_tsv(line, path, lineno):
    parts = line.split("\t", 1)
    if len(parts) != 2 or parts[0] not in LABELS:
        raise CorpusError(f"{path}:{lineno}: expected 'label<TAB>line' with label in {LABELS}")
    return parts[0], parts[1]


def detect_format(path):
    """Guess "tsv" vs "alert" from the first nonempty line."""
    lines = _read_lines(path)
    if not lines:
        raise EmptyCorpusError(f"{path} contains no log lines")
    head = lines[0]
    if "\t" in head and head.split("\t", 1)[0] in LABELS:
        return "tsv"
    return "alert"


def load_labeled_log(path, source_id, fmt="auto"):
    """One LogRecord per nonempty line, indexed in file order."""
    if fmt == "auto":
        fmt = detect_format(path)
    if fmt not in ("alert", "tsv"):
        raise ConfigError(f"unknown corpus format {fmt!r}; expected alert, tsv or auto")
    lines = _read_lines(path)
    if not lines:
        raise EmptyCorpusError(f"{path} contains no log lines")
    records = []
    for i, ln in enumerate(lines):
        if fmt == "tsv":
            label, text = _parse_tsv(ln, path, i + 1)
        else:
            label, text = _label_from_alert_field(ln), ln
        records.append(LogRecord(line=text, label=label, index=i, source=source_id))
    return records


def write_tsv(records, path):
    with open(path, "w", encoding="latin-1", newline="\n") as fh:
        for r in records:
            fh.write(f"{r.label}\t{r.line}\n")


def chronological_split(records, spec):
    """Contiguous prefix/middle/suffix split; floor() sizes, remainder to test."""
    if not records:
        raise EmptyCorpusError("cannot split an empty corpus")
    n = len(records)
    n_train = int(n * spec.train_fraction)
    n_update = int(n * spec.update_fraction)
    train = list(records[:n_train])
    update = list(records[n_train : n_train + n_update])
    test = list(records[n_train + n_update :])
    return train, update, test


def balance_test_set(test_records, seed):
    """Every anomalous record plus an equal count of seed-sampled normals.

    Chronological order is preserved. Unlabeled records are dropped (they
    cannot be scored against ground truth). If there are fewer normals than
    anomalies, all normals are kept and the imbalance is logged.
    """
    anomalies = [r for r in test_records if r.label == ANOMALOUS]
    normals = [r for r in test_records if r.label == NORMAL]
    if not anomalies:
        raise CorpusError("balance_test_set requires at least one anomalous record")
    if not normals:
        raise CorpusError("balance_test_set requires at least one normal record")
    if len(normals) <= len(anomalies):
        if len(normals) < len(anomalies):
            log.warning(
                "balance_test_set: only %d normals for %d anomalies; keeping all normals",
                len(normals),
                len(anomalies),
            )
        chosen = normals
    else:
        rng = make_rng(seed)
        idx = rng.choice(len(normals), size=len(anomalies), replace=False)
        chosen = [normals[i] for i in sorted(idx)]
    return sorted(anomalies + chosen, key=lambda r: r.index)


@dataclass(frozen=True)
class CorpusStats:
    total: int
    normal: int
    anomalous: int
    unlabeled: int
    min_len: int
    mean_len: float
    max_len: int


def corpus_stats(records):
    if not records:
        return CorpusStats(0, 0, 0, 0, 0, 0.0, 0)
    lengths = [len(r.line) for r in records]
    labels = [r.label for r in records]
    return CorpusStats(
        total=len(records),
        normal=labels.count(NORMAL),
        anomalous=labels.count(ANOMALOUS),
        unlabeled=labels.count(UNLABELED),
        min_len=min(lengths),
        mean_len=sum(lengths) / len(lengths),
        max_len=max(lengths),
    )


# --- synthetic corpora -----------------------------------------------------

DEFAULT_NORMAL_TEMPLATES = [
    "{ts} {node} ciod: generated core.{int} for program {hex}",
    "{ts} {node} kernel: {int} L3 EDRAM error(s) detected and corrected",
    "{ts} {node} sshd[{int}]: session opened for user {user} from {ip}",
    "{ts} {node} ntpd[{int}]: synchronized to {ip}, stratum 2 offset {float} ms",
    "{ts} {node} mmfs: disk lease renewed for cluster {hex}",
    "{ts} {node} monitor: fan speed {int} rpm within nominal range",
    "{ts} {node} sched: job {hex} finished rc=0 elapsed {int}s",
]

DEFAULT_ANOMALY_TEMPLATES = [
    "{ts} {node} kernel: data TLB error interrupt PANIC at {hex}",
    "{ts} {node} mmfs: FATAL unable to mount filesystem code={int}",
    "{ts} {node} sshd[{int}]: FAILED password for invalid user {user} from {ip}",
    "{ts} {node} machinecheck: uncorrectable ECC error at address {hex}",
]

_USERS = ["alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi"]
_FIELD_RE = re.compile(r"\{(ts|node|hex|int|ip|user|float)\}")


@dataclass(frozen=True)
class SynthConfig:
    normal_templates: tuple
    anomaly_templates: tuple
    count: int
    anomaly_rate: float
    seed: int

    def __post_init__(self):
        if not self.normal_templates:
            raise ConfigError("synth_generate needs at least one normal template")
        if not 0.0 <= self.anomaly_rate <= 1.0:
            raise ConfigError(f"anomaly_rate must be in [0, 1], got {self.anomaly_rate}")
        if self.anomaly_rate > 0 and not self.anomaly_templates:
            raise ConfigError("anomaly_rate > 0 requires anomaly templates")
        if self.count < 0:
            raise ConfigError(f"count must be >= 0, got {self.count}")


def default_synth_config(count, anomaly_rate, seed):
    return SynthConfig(
        normal_templates=tuple(DEFAULT_NORMAL_TEMPLATES),
        anomaly_templates=tuple(DEFAULT_ANOMALY_TEMPLATES),
        count=count,
        anomaly_rate=anomaly_rate,
        seed=seed,
    )


def _fill_template(template, rng):
    def sub(match):
        kind = match.group(1)
        if kind == "ts":
            return str(int(rng.integers(1_117_000_000, 1_200_000_000)))
        if kind == "node":
            return f"R{int(rng.integers(0, 64)):02d}-M{int(rng.integers(0, 2))}-N{int(rng.integers(0, 16))}"
        if kind == "hex":
            return "".join(rng.choice(list("0123456789abcdef"), size=8))
        if kind == "int":
            return str(int(rng.integers(0, 100_000)))
        if kind == "ip":
            return ".".join(str(int(o)) for o in rng.integers(1, 255, size=4))
        if kind == "user":
            return str(rng.choice(_USERS))
        if kind == "float":
            return f"{rng.uniform(0, 100):.2f}"
        raise AssertionError(kind)

    return _FIELD_RE.sub(sub, template)


def synth_generate(config, source_id="synth"):
    """Instantiate `count` lines from the template families, labeled by family."""
    rng = make_rng(config.seed, "synth")
    records = []
    for i in range(config.count):
        anomalous = config.anomaly_rate > 0 and rng.random() < config.anomaly_rate
        pool = config.anomaly_templates if anomalous else config.normal_templates
        template = pool[int(rng.integers(0, len(pool)))]
        line = _fill_template(template, rng)
        records.append(
            LogRecord(line=line, label=ANOMALOUS if anomalous else NORMAL, index=i, source=source_id)
        )
    return records
