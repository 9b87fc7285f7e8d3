"""Command-line surface for the whole pipeline.

Subcommands: synth, split, train, update, eval, score, augment-preview,
stats. Configuration comes from one JSON file (--config) merged over
built-in defaults, with command-line flags winning over both. Unknown
config keys are rejected by name. Every randomized behavior derives from
the single `seed` value.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error. Each
subcommand prints a machine-parsable `key=value` summary as its final
stdout line.
"""

import argparse
import copy
import json
import os
import sys

from .augment import GRANULARITIES, OPERATIONS, PerturbationSpec, perturb_record_line
from .corpus import (
    ANOMALOUS,
    DEFAULT_ANOMALY_TEMPLATES,
    DEFAULT_NORMAL_TEMPLATES,
    NORMAL,
    SplitSpec,
    SynthConfig,
    balance_test_set,
    chronological_split,
    corpus_stats,
    load_labeled_log,
    synth_generate,
    write_tsv,
)
from .encoding import build_fixed_vocab, encode_line
from .errors import ConfigError, LoglensError
from .evaluation import emit_report, evaluate
from .model import ModelConfig, classify_batch, init_params, load_checkpoint, save_checkpoint
from .training import (
    TrainConfig,
    build_update_set,
    train_selfsup,
    update_with_labels,
    write_history,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


DEFAULT_CONFIG = {
    "seed": 0,
    "model": {
        "d_model": 64,
        "n_heads": 4,
        "d_ff": 256,
        "n_layers": 2,
        "max_len": 256,
        "dropout_rate": 0.1,
        "classifier_hidden": 64,
    },
    "train": {"learning_rate": 1e-3, "batch_size": 32, "epochs": 5, "optimizer": "adam"},
    "update": {"learning_rate": 1e-4, "batch_size": 32, "epochs": 3, "optimizer": "adam"},
    "perturbation": {
        "operations": list(OPERATIONS),
        "granularities": list(GRANULARITIES),
        "rate": [0.005, 0.20],
    },
    "split": {"train_fraction": 0.6, "update_fraction": 0.2, "test_fraction": 0.2},
    "synth": {
        "count": 1000,
        "anomaly_rate": 0.0,
        "normal_templates": list(DEFAULT_NORMAL_TEMPLATES),
        "anomaly_templates": list(DEFAULT_ANOMALY_TEMPLATES),
    },
}


def _merge(base, user, path=""):
    for key, value in user.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path + key!r} must be an object")
            _merge(base[key], value, path + key + ".")
        else:
            base[key] = value


def load_run_config(path=None):
    """Built-in defaults, optionally overlaid by a JSON config file."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        _merge(cfg, user)
    return cfg


def _model_config(cfg):
    return ModelConfig(vocab_size=build_fixed_vocab().size, **cfg["model"])


def _perturbation_spec(cfg, seed):
    p = cfg["perturbation"]
    rate = p["rate"]
    if isinstance(rate, list):
        rate = tuple(rate)
    return PerturbationSpec(
        operations=tuple(p["operations"]),
        granularities=tuple(p["granularities"]),
        rate=rate,
        seed=seed,
    )


def _train_config(cfg, section, seed):
    t = cfg[section]
    return TrainConfig(
        learning_rate=t["learning_rate"],
        batch_size=t["batch_size"],
        epochs=t["epochs"],
        seed=seed,
        perturbation=_perturbation_spec(cfg, seed),
        optimizer=t["optimizer"],
    )


def _override(cfg, section, key, value):
    if value is not None:
        cfg[section][key] = value


def _summary(**pairs):
    print(" ".join(f"{k}={v}" for k, v in pairs.items()))


def _fmt(x):
    return f"{x:.6f}"


def _load_records(args):
    return load_labeled_log(args.data, os.path.basename(args.data), fmt=args.format)


# --- subcommands -------------------------------------------------------------


def _cmd_synth(args, cfg):
    seed = cfg["seed"]
    syn = cfg["synth"]
    config = SynthConfig(
        normal_templates=tuple(syn["normal_templates"]),
        anomaly_templates=tuple(syn["anomaly_templates"]),
        count=syn["count"],
        anomaly_rate=syn["anomaly_rate"],
        seed=seed,
    )
    records = synth_generate(config)
    write_tsv(records, args.out)
    stats = corpus_stats(records)
    _summary(
        command="synth",
        out=args.out,
        count=stats.total,
        normal=stats.normal,
        anomalous=stats.anomalous,
        seed=seed,
    )
    return 0


def _cmd_split(args, cfg):
    records = _load_records(args)
    spec = SplitSpec(**cfg["split"])
    train, update, test = chronological_split(records, spec)
    os.makedirs(args.out_dir, exist_ok=True)
    written = {}
    for name, part in (("train", train), ("update", update), ("test", test)):
        if part:
            path = os.path.join(args.out_dir, f"{name}.tsv")
            write_tsv(part, path)
            written[name] = path
    _summary(
        command="split",
        data=args.data,
        out_dir=args.out_dir,
        train=len(train),
        update=len(update),
        test=len(test),
    )
    return 0


def _cmd_train(args, cfg):
    seed = cfg["seed"]
    records = _load_records(args)
    normals = [r for r in records if r.label != ANOMALOUS]
    dropped = len(records) - len(normals)
    params = init_params(_model_config(cfg), seed)
    tconf = _train_config(cfg, "train", seed)
    params, history = train_selfsup(params, normals, tconf)
    provenance = (
        f"stage=selfsup data={os.path.basename(args.data)} seed={seed} "
        f"epochs={tconf.epochs} records={len(normals)}"
    )
    save_checkpoint(params, args.checkpoint, provenance=provenance)
    if args.history:
        write_history(history, args.history)
    _summary(
        command="train",
        checkpoint=args.checkpoint,
        records=len(records),
        used=len(normals),
        dropped_anomalous=dropped,
        epochs=tconf.epochs,
        final_loss=_fmt(history.mean_losses[-1]),
        final_accuracy=_fmt(history.accuracies[-1]),
        seed=seed,
    )
    return 0


def _cmd_update(args, cfg):
    seed = cfg["seed"]
    ck = load_checkpoint(args.checkpoint)
    records = _load_records(args)
    normals = [r for r in records if r.label == NORMAL]
    anomalies = [r for r in records if r.label == ANOMALOUS]
    spec = _perturbation_spec(cfg, seed)
    update_set = build_update_set(normals, anomalies, spec)
    tconf = _train_config(cfg, "update", seed)
    params, history = update_with_labels(ck.params, update_set, tconf)
    provenance = (
        f"{ck.training_provenance} | stage=update data={os.path.basename(args.data)} "
        f"seed={seed} epochs={tconf.epochs} items={len(update_set.items)}"
    )
    save_checkpoint(params, args.out, provenance=provenance)
    if args.history:
        write_history(history, args.history)
    _summary(
        command="update",
        out=args.out,
        items=len(update_set.items),
        epochs=tconf.epochs,
        final_loss=_fmt(history.mean_losses[-1]),
        final_reward=_fmt(history.rewards[-1]),
        final_accuracy=_fmt(history.accuracies[-1]),
        seed=seed,
    )
    return 0


def _cmd_eval(args, cfg):
    seed = cfg["seed"]
    ck = load_checkpoint(args.checkpoint)
    records = _load_records(args)
    if args.balanced:
        records = balance_test_set(records, seed)
    vocab = build_fixed_vocab()
    dataset = args.dataset or os.path.basename(args.data)
    report = evaluate(
        ck.params,
        records,
        vocab,
        run_id=args.run_id,
        dataset=dataset,
        split=args.split_name,
        seed=seed,
        threshold=args.threshold,
    )
    if args.report:
        emit_report([report], args.report, fmt=args.report_format)
    _summary(
        command="eval",
        dataset=dataset,
        records=len(records),
        precision=_fmt(report.precision),
        recall=_fmt(report.recall),
        f1=_fmt(report.f1),
        tp=report.counts.tp,
        fp=report.counts.fp,
        fn=report.counts.fn,
        tn=report.counts.tn,
        seed=seed,
    )
    return 0


def _cmd_score(args, cfg):
    ck = load_checkpoint(args.checkpoint)
    vocab = build_fixed_vocab()
    max_len = ck.params.config.max_len
    total = anomalous = 0
    batch = []

    def flush():
        nonlocal total, anomalous
        if not batch:
            return
        seqs = [encode_line(line, vocab, max_len) for line in batch]
        probs = classify_batch(ck.params, seqs)
        for line, p in zip(batch, probs[:, 1]):
            label = ANOMALOUS if p > 0.5 else NORMAL
            anomalous += label == ANOMALOUS
            print(f"{p:.6f}\t{label}\t{line}")
        total += len(batch)
        batch.clear()

    for raw in sys.stdin:
        line = raw.rstrip("\r\n")
        if not line:
            continue
        batch.append(line)
        if len(batch) >= 64:
            flush()
    flush()
    _summary(command="score", lines=total, anomalous=anomalous)
    return 0


def _cmd_augment_preview(args, cfg):
    seed = cfg["seed"]
    records = _load_records(args)[: args.limit]
    spec = _perturbation_spec(cfg, seed)
    for i, r in enumerate(records):
        print(f"{r.line}\t{perturb_record_line(r.line, spec, i)}")
    _summary(command="augment-preview", data=args.data, lines=len(records), seed=seed)
    return 0


def _cmd_stats(args, cfg):
    stats = corpus_stats(_load_records(args))
    _summary(
        command="stats",
        data=args.data,
        total=stats.total,
        normal=stats.normal,
        anomalous=stats.anomalous,
        unlabeled=stats.unlabeled,
        min_len=stats.min_len,
        mean_len=f"{stats.mean_len:.2f}",
        max_len=stats.max_len,
    )
    return 0


# --- argument parsing ---------------------------------------------------------


def _add_data_arg(p):
    p.add_argument("--data", required=True, help="input corpus file")
    p.add_argument(
        "--format",
        choices=["auto", "alert", "tsv"],
        default="auto",
        help="corpus layout; auto sniffs the first line",
    )


def build_parser():
    parser = _Parser(prog="loglens", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run-config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_parser(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    p = add_parser("synth", help="generate a synthetic labeled corpus (TSV)")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int)
    p.add_argument("--anomaly-rate", type=float)

    p = add_parser("split", help="chronological train/update/test split")
    _add_data_arg(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--update-fraction", type=float)
    p.add_argument("--test-fraction", type=float)

    p = add_parser("train", help="stage-1 self-supervised training")
    _add_data_arg(p)
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.add_argument("--history", help="write per-epoch loss/accuracy CSV here")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--optimizer", choices=["sgd", "adam"])

    p = add_parser("update", help="stage-2 classifier update from labels")
    _add_data_arg(p)
    p.add_argument("--checkpoint", required=True, help="input checkpoint path")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--history")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--optimizer", choices=["sgd", "adam"])

    p = add_parser("eval", help="metrics report over a labeled test set")
    _add_data_arg(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", help="write the report here")
    p.add_argument("--report-format", choices=["csv", "json"], default="csv")
    p.add_argument("--balanced", action="store_true", help="balance the test set first")
    p.add_argument("--threshold", type=float, help="p_anomalous decision threshold (default argmax)")
    p.add_argument("--run-id", default="eval")
    p.add_argument("--dataset", help="dataset name for the report (default: data file name)")
    p.add_argument("--split-name", default="test")

    p = add_parser("score", help="read lines from stdin, write p_anomalous<TAB>label<TAB>line")
    p.add_argument("--checkpoint", required=True)

    p = add_parser("augment-preview", help="show (original, perturbed) pairs as TSV")
    _add_data_arg(p)
    p.add_argument("--limit", type=int, default=10)

    p = add_parser("stats", help="corpus label/length statistics")
    _add_data_arg(p)

    return parser


_COMMANDS = {
    "synth": _cmd_synth,
    "split": _cmd_split,
    "train": _cmd_train,
    "update": _cmd_update,
    "eval": _cmd_eval,
    "score": _cmd_score,
    "augment-preview": _cmd_augment_preview,
    "stats": _cmd_stats,
}

_FLAG_OVERRIDES = {
    "synth": [("count", "synth", "count"), ("anomaly_rate", "synth", "anomaly_rate")],
    "split": [
        ("train_fraction", "split", "train_fraction"),
        ("update_fraction", "split", "update_fraction"),
        ("test_fraction", "split", "test_fraction"),
    ],
    "train": [
        ("epochs", "train", "epochs"),
        ("batch_size", "train", "batch_size"),
        ("learning_rate", "train", "learning_rate"),
        ("optimizer", "train", "optimizer"),
    ],
    "update": [
        ("epochs", "update", "epochs"),
        ("batch_size", "update", "batch_size"),
        ("learning_rate", "update", "learning_rate"),
        ("optimizer", "update", "optimizer"),
    ],
}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        for attr, section, key in _FLAG_OVERRIDES.get(args.command, []):
            _override(cfg, section, key, getattr(args, attr, None))
        return _COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (LoglensError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
