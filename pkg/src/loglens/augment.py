"""Stochastic perturbation of log lines.

Perturbed copies of normal lines act as synthetic anomalies: an edit
budget is derived from the perturbation rate, then random insert /
substitute / swap / delete edits are applied at character or word
granularity. A perturbed line is guaranteed to differ from its source.
"""

from dataclasses import dataclass

from .corpus import ANOMALOUS
from .encoding import PRINTABLE_ASCII
from .errors import ConfigError, ContaminationError
from .seeding import make_rng

OPERATIONS = ("insert", "substitute", "swap", "delete")
GRANULARITIES = ("character", "word")
RATE_MIN = 0.005
RATE_MAX = 0.20
_MAX_ATTEMPTS = 8


@dataclass(frozen=True)
class PerturbationSpec:
    operations: tuple = OPERATIONS
    granularities: tuple = GRANULARITIES
    rate: object = (RATE_MIN, RATE_MAX)  # fixed float, or (lo, hi) sampled per line
    seed: int = 0

    def __post_init__(self):
        if not self.operations or any(op not in OPERATIONS for op in self.operations):
            raise ConfigError(f"operations must be a nonempty subset of {OPERATIONS}")
        if not self.granularities or any(g not in GRANULARITIES for g in self.granularities):
            raise ConfigError(f"granularities must be a nonempty subset of {GRANULARITIES}")
        bounds = self.rate if isinstance(self.rate, tuple) else (self.rate, self.rate)
        if len(bounds) != 2 or bounds[0] > bounds[1]:
            raise ConfigError(f"rate range must be (lo, hi) with lo <= hi, got {self.rate}")
        for r in bounds:
            if not RATE_MIN <= r <= RATE_MAX:
                raise ConfigError(f"rate must be within [{RATE_MIN}, {RATE_MAX}], got {r}")

    def draw_rate(self, rng):
        if isinstance(self.rate, tuple):
            lo, hi = self.rate
            return lo if lo == hi else rng.uniform(lo, hi)
        return self.rate


def edit_count(unit_count, rate):
    """Edit budget: max(1, round(rate * unit_count)), so a perturbed line
    always differs even at the lowest rate on short lines."""
    if unit_count < 1:
        raise ValueError(f"unit_count must be >= 1, got {unit_count}")
    return max(1, round(rate * unit_count))


def _random_char(rng):
    return PRINTABLE_ASCII[int(rng.integers(0, len(PRINTABLE_ASCII)))]


def _apply_edit(units, op, rng, char_mode, source_words):
    n = len(units)
    if op == "insert":
        if char_mode:
            new = _random_char(rng)
        else:
            new = source_words[int(rng.integers(0, len(source_words)))]
        units.insert(int(rng.integers(0, n + 1)), new)
        return True
    if n == 0:
        return False
    if op == "substitute":
        idx = int(rng.integers(0, n))
        if char_mode:
            units[idx] = _random_char(rng)
        else:
            units[idx] = source_words[int(rng.integers(0, len(source_words)))]
        return True
    if op == "swap":
        if n < 2:
            return False
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n - 1))
        if j >= i:
            j += 1
        units[i], units[j] = units[j], units[i]
        return True
    if op == "delete":
        del units[int(rng.integers(0, n))]
        return True
    raise AssertionError(op)


def perturb_line(line, spec, rng, trace=None):
    """Return a perturbed copy of `line`, always different from the input.

    The whole procedure is re-drawn up to 8 times if the edits happen to
    reproduce the input (e.g. a swap of equal characters); after that one
    character is substituted with a guaranteed-different one. When `trace`
    is a list, the names of the applied edit operations are appended to it
    (used by the operation-frequency checks).
    """
    if not line:
        raise ValueError("cannot perturb an empty line")

    for _ in range(_MAX_ATTEMPTS):
        granularity = spec.granularities[int(rng.integers(0, len(spec.granularities)))]
        words = line.split()
        char_mode = granularity == "character" or not words
        units = list(line) if char_mode else list(words)
        source_words = words if words else None
        rate = spec.draw_rate(rng)
        k = edit_count(len(units), rate)
        applied = []
        for _ in range(k):
            op = spec.operations[int(rng.integers(0, len(spec.operations)))]
            if _apply_edit(units, op, rng, char_mode, source_words):
                applied.append(op)
        result = "".join(units) if char_mode else " ".join(units)
        if result != line:
            if trace is not None:
                trace.extend(applied)
            return result

    idx = int(rng.integers(0, len(line)))
    choices = [c for c in PRINTABLE_ASCII if c != line[idx]]
    ch = choices[int(rng.integers(0, len(choices)))]
    if trace is not None:
        trace.append("substitute")
    return line[:idx] + ch + line[idx + 1 :]


def perturb_record_line(record_line, spec, line_index):
    """Perturb with the per-line stream derived from (spec.seed, line_index)."""
    return perturb_line(record_line, spec, make_rng(spec.seed, line_index))


def build_balanced_pairs(normals, spec):
    """Each normal line once as class 0 plus one perturbation as class 1.

    2n (line, class) items, interleaved then shuffled by spec.seed. Inputs
    must carry no anomalous labels: this feeds the normals-only training
    stage.
    """
    if not normals:
        raise ValueError("build_balanced_pairs needs at least one normal record")
    for r in normals:
        if r.label == ANOMALOUS:
            raise ContaminationError(
                f"record {r.index} from {r.source} is labeled anomalous; "
                "normals-only training must not see it"
            )
    items = []
    for i, r in enumerate(normals):
        items.append((r.line, 0))
        items.append((perturb_record_line(r.line, spec, i), 1))
    rng = make_rng(spec.seed, "pair-shuffle")
    return [items[j] for j in rng.permutation(len(items))]
