"""Command-line experiment runner: data preparation, training with one of
the pruning methods, per-epoch metrics CSV and a JSON summary line."""

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from dataclasses import dataclass

import numpy as np

from . import encoder as enc
from .data import (
    apply_imbalance,
    generate_synthetic,
    inject_noise,
    labels_of,
    load_tu_dataset,
    minority_class,
    parse_synthetic,
    split_dataset,
)
from .estimator import METHODS, MODES, PrunedGraphClassifier
from .exceptions import ConfigError, EmptyClass, InconsistentIndicator, ParseError, ProtoPruneError
from .metrics import accuracy, best_permutation, f1_macro
from .prototypes import assign_class

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "epoch",
    "wall_time_s",
    "train_acc",
    "val_acc",
    "test_acc",
    "f1_macro",
    "loss_task",
    "loss_comp",
    "loss_sepa",
    "loss_contra",
    "loss_total",
    "minority_frac_selected",
    "outlier_frac_selected",
    "budget",
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAIN = 4


@dataclass
class RunConfig:
    method: str = "gder"
    dataset: str = "synthetic"
    remain_ratio: float = 0.5
    epochs: int = 100
    seed: int = 0
    hidden_dim: int = 64
    n_layers: int = 3
    embed_dim: int = 32
    protos_per_class: int = 2
    tau: float = 1e-4
    kappa: float = 1.0
    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 0.0
    varsigma: float = 0.7
    decay: float = 2.0
    epsilon: float = 1e-6
    ridge: float = 1e-3
    lr: float = 0.01
    proto_lr: float | None = None
    optimizer: str = "sgd"
    prototype_init: str = "auto"
    batch_size: int = 32
    imbalance: tuple | None = None
    minority_class: int = 0
    noise_frac: float = 0.0
    noise_sigma: float = 1.0
    mode: str = "supervised"
    virtual_classes: int | None = None
    split: tuple = (0.8, 0.1, 0.1)
    eval_every: int = 1
    wall_time: bool = True
    out: str | None = None
    baseline_csv: str | None = None

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError("--method", f"must be one of {', '.join(METHODS)}")
        if self.mode not in MODES:
            raise ConfigError("--mode", f"must be one of {', '.join(MODES)}")
        if not 0 < self.remain_ratio <= 1:
            raise ConfigError("--remain-ratio", f"must be in (0, 1], got {self.remain_ratio}")
        if self.epochs < 1:
            raise ConfigError("--epochs", "must be positive")
        if self.protos_per_class < 1:
            raise ConfigError("--protos-per-class", "must be positive")
        for flag, value in (("--tau", self.tau), ("--kappa", self.kappa), ("--epsilon", self.epsilon),
                            ("--ridge", self.ridge), ("--lr", self.lr)):
            if not value > 0:
                raise ConfigError(flag, f"must be positive, got {value}")
        for flag, value in (("--lambda1", self.lambda1), ("--lambda2", self.lambda2),
                            ("--lambda3", self.lambda3), ("--decay", self.decay)):
            if not value >= 0:
                raise ConfigError(flag, f"must be >= 0, got {value}")
        if not 0 < self.varsigma <= 1:
            raise ConfigError("--varsigma", f"must be in (0, 1], got {self.varsigma}")
        if not 0 <= self.noise_frac < 1:
            raise ConfigError("--noise-frac", f"must be in [0, 1), got {self.noise_frac}")
        if self.noise_sigma < 0:
            raise ConfigError("--noise-sigma", "must be >= 0")
        if abs(sum(self.split) - 1) > 1e-9 or any(f < 0 for f in self.split):
            raise ConfigError("--split", f"fractions must be non-negative and sum to 1, got {self.split}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError("--optimizer", f"must be sgd or adam, got {self.optimizer!r}")
        if self.prototype_init not in ("auto", "random", "kmeans"):
            raise ConfigError("--prototype-init", f"must be auto, random or kmeans, got {self.prototype_init!r}")
        if self.eval_every < 1:
            raise ConfigError("--eval-every", "must be positive")
        return self


def _ratio(text):
    a, sep, b = str(text).partition(":")
    try:
        pair = (float(a), float(b))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b, got {text!r}") from None
    if not sep or pair[0] < 0 or pair[1] < 0 or sum(pair) == 0:
        raise argparse.ArgumentTypeError(f"expected a:b with non-negative parts, got {text!r}")
    return pair


def _split(text):
    try:
        parts = tuple(float(p) for p in str(text).split("/"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected train/val/test, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three fractions, got {text!r}")
    return parts


def _bool(text):
    lowered = str(text).lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _optional_float(text):
    return None if str(text).lower() in ("", "none") else float(text)


def _optional_int(text):
    return None if str(text).lower() in ("", "none") else int(text)


# flag name -> (RunConfig field, converter, help)
OPTIONS = {
    "method": ("method", str, f"one of {', '.join(METHODS)}"),
    "dataset": ("dataset", str, "TU directory or synthetic[:n=50/50,gap=4,...]"),
    "remain-ratio": ("remain_ratio", float, "fraction of the training set kept per epoch"),
    "epochs": ("epochs", int, "training epochs T"),
    "seed": ("seed", int, "seed for splitting, corruption and training"),
    "hidden-dim": ("hidden_dim", int, "GCN width"),
    "layers": ("n_layers", int, "message-passing layers"),
    "embed-dim": ("embed_dim", int, "hypersphere dimension"),
    "protos-per-class": ("protos_per_class", int, "prototypes per class K"),
    "tau": ("tau", float, "softmax temperature"),
    "kappa": ("kappa", float, "vMF concentration used by the familiarity score"),
    "lambda1": ("lambda1", float, "compactness loss weight"),
    "lambda2": ("lambda2", float, "separation loss weight"),
    "lambda3": ("lambda3", float, "contrastive loss weight (unsupervised mode)"),
    "varsigma": ("varsigma", float, "scheduler initial ratio"),
    "decay": ("decay", float, "scheduler decay exponent"),
    "epsilon": ("epsilon", float, "sampling-weight guard"),
    "ridge": ("ridge", float, "covariance ridge"),
    "lr": ("lr", float, "learning rate"),
    "proto-lr": ("proto_lr", _optional_float, "prototype learning rate (default: --lr)"),
    "optimizer": ("optimizer", str, "sgd or adam"),
    "prototype-init": ("prototype_init", str, "auto, random or kmeans"),
    "batch-size": ("batch_size", int, "minibatch size"),
    "imbalance": ("imbalance", _ratio, "minority:majority ratio applied to the training split"),
    "minority-class": ("minority_class", int, "class designated by --imbalance"),
    "noise-frac": ("noise_frac", float, "fraction of training graphs given feature noise"),
    "noise-sigma": ("noise_sigma", float, "feature noise standard deviation"),
    "mode": ("mode", str, "supervised or unsupervised"),
    "virtual-classes": ("virtual_classes", _optional_int, "virtual classes in unsupervised mode"),
    "split": ("split", _split, "train/val/test fractions"),
    "eval-every": ("eval_every", int, "evaluate metrics every N epochs"),
    "wall-time": ("wall_time", _bool, "record wall time (off writes 0 for reproducible CSVs)"),
    "out": ("out", str, "metrics CSV path (default: stdout)"),
    "baseline-csv": ("baseline_csv", str, "full-training CSV to compute speedup against"),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="protoprune",
        description="Train a GCN on a dynamically pruned training set and log per-epoch metrics.",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("--config", help="flat key=value file; flags override it")
    for flag, (dest, conv, text) in OPTIONS.items():
        parser.add_argument(f"--{flag}", dest=dest, type=conv, help=text)
    return parser


def read_config_file(path):
    """Parse ``key = value`` lines (``#`` comments allowed)."""
    by_key = {flag: (dest, conv) for flag, (dest, conv, _) in OPTIONS.items()}
    by_key.update({dest: (dest, conv) for dest, conv, _ in OPTIONS.values()})
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().lstrip("-")
            if not sep:
                raise ConfigError(f"{path}:{lineno}", f"expected key=value, got {line!r}")
            if key not in by_key and key.replace("_", "-") not in by_key:
                raise ConfigError(key, f"unknown config key ({path}:{lineno})")
            dest, conv = by_key.get(key) or by_key[key.replace("_", "-")]
            try:
                values[dest] = conv(value.strip())
            except (ValueError, argparse.ArgumentTypeError) as err:
                raise ConfigError(key, str(err)) from None
    return values


def parse_config(argv=None):
    """Defaults, then the ``--config`` file, then command-line flags."""
    args = vars(build_parser().parse_args(argv))
    values = {}
    if "config" in args:
        values.update(read_config_file(args.pop("config")))
    values.update(args)
    return RunConfig(**values).validate()


# -------------------------------------------------------------------- run


def load_dataset(cfg):
    if cfg.dataset.startswith("synthetic"):
        kwargs = parse_synthetic(cfg.dataset)
        kwargs.setdefault("seed", cfg.seed)
        return generate_synthetic(**kwargs)
    return load_tu_dataset(cfg.dataset)


def prepare_splits(cfg):
    graphs = load_dataset(cfg)
    train, val, test = split_dataset(graphs, cfg.split, seed=cfg.seed)
    if cfg.imbalance is not None:
        train = apply_imbalance(train, cfg.minority_class, cfg.imbalance, seed=cfg.seed)
    if cfg.noise_frac > 0:
        train = inject_noise(train, cfg.noise_frac, cfg.noise_sigma, seed=cfg.seed)
    return train, val, test


def make_estimator(cfg, n_classes, callback=None):
    return PrunedGraphClassifier(
        method=cfg.method,
        remain_ratio=1.0 if cfg.method == "full" else cfg.remain_ratio,
        epochs=cfg.epochs,
        hidden_dim=cfg.hidden_dim,
        n_layers=cfg.n_layers,
        embed_dim=cfg.embed_dim,
        protos_per_class=cfg.protos_per_class,
        tau=cfg.tau,
        kappa=cfg.kappa,
        lambda1=cfg.lambda1,
        lambda2=cfg.lambda2,
        lambda3=cfg.lambda3,
        varsigma=cfg.varsigma,
        decay=cfg.decay,
        epsilon=cfg.epsilon,
        ridge=cfg.ridge,
        lr=cfg.lr,
        proto_lr=cfg.proto_lr,
        optimizer=cfg.optimizer,
        prototype_init=cfg.prototype_init,
        batch_size=cfg.batch_size,
        mode=cfg.mode,
        n_virtual_classes=cfg.virtual_classes or n_classes,
        random_state=cfg.seed,
        epoch_callback=callback,
    )


class _Evaluator:
    """Computes one CSV row per epoch from the estimator's current state."""

    def __init__(self, cfg, train, val, test, n_classes):
        self.cfg = cfg
        self.n_classes = n_classes
        self.parts = {}
        for name, graphs in (("train", train), ("val", val), ("test", test)):
            batch = enc.GraphStore(graphs).batch() if graphs else None
            self.parts[name] = (batch, labels_of(graphs))
        train_labels = labels_of(train)
        self.minority = minority_class(train_labels, n_classes)
        self.is_minority = train_labels == self.minority
        self.is_outlier = np.array([g.is_outlier for g in train])
        self.rows = []
        self.last = {"train": float("nan"), "val": float("nan"), "test": float("nan"), "f1": float("nan")}

    def _predict(self, est, batch):
        cache = enc.forward(batch, est.params_)
        if est.mode == "unsupervised":
            return assign_class(cache.z, est.bank_, est.hcfg_)
        return np.argmax(cache.logits, axis=1)

    def __call__(self, est, info):
        if info.epoch % self.cfg.eval_every == 0 or info.epoch == self.cfg.epochs - 1:
            preds = {}
            for name, (batch, labels) in self.parts.items():
                preds[name] = self._predict(est, batch) if batch is not None else np.zeros(0, int)
            if est.mode == "unsupervised":
                # score clusters under the relabeling that best fits the training split
                mapping = best_permutation(preds["train"], self.parts["train"][1], self.n_classes)
                preds = {k: mapping[v] for k, v in preds.items()}
            self.last = {name: accuracy(preds[name], self.parts[name][1]) for name in preds}
            self.last["f1"] = f1_macro(preds["test"], self.parts["test"][1], self.n_classes)
        sel = info.selected
        losses = info.losses
        self.rows.append(
            (
                info.epoch,
                info.train_time if self.cfg.wall_time else 0.0,
                self.last["train"],
                self.last["val"],
                self.last["test"],
                self.last["f1"],
                losses.task,
                losses.compactness,
                losses.separation,
                losses.contrastive,
                losses.total,
                float(np.mean(self.is_minority[sel])),
                float(np.mean(self.is_outlier[sel])),
                len(sel),
            )
        )


def format_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([v if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row])
    return buf.getvalue()


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class RunResult:
    config: RunConfig
    rows: list
    csv_text: str
    summary: dict
    estimator: PrunedGraphClassifier = dataclasses.field(repr=False, default=None)


def run(cfg):
    """Train per ``cfg``; returns a ``RunResult`` and writes ``cfg.out``."""
    cfg.validate()
    train, val, test = prepare_splits(cfg)
    all_labels = np.concatenate([labels_of(p) for p in (train, val, test) if p])
    n_classes = int(all_labels.max()) + 1
    evaluator = _Evaluator(cfg, train, val, test, n_classes)
    est = make_estimator(cfg, n_classes, callback=evaluator)
    if cfg.mode == "supervised":
        est.fit(train, labels_of(train))
    else:
        est.fit(train)

    csv_text = format_csv(evaluator.rows)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(csv_text)

    total_time = float(sum(r[1] for r in evaluator.rows))
    last = evaluator.rows[-1]
    summary = {
        "method": cfg.method,
        "final_test_acc": last[4],
        "final_f1_macro": last[5],
        "total_wall_time_s": total_time,
        "epochs": cfg.epochs,
        "budget": last[-1],
    }
    if cfg.baseline_csv:
        base = sum(float(r["wall_time_s"]) for r in read_metrics_csv(cfg.baseline_csv))
        summary["speedup_vs_baseline"] = base / total_time if total_time > 0 else float("nan")
    return RunResult(cfg, evaluator.rows, csv_text, summary, est)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except ConfigError as err:
        print(f"protoprune: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except (ParseError, InconsistentIndicator, EmptyClass, OSError) as err:
        print(f"protoprune: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (ProtoPruneError, ValueError) as err:
        print(f"protoprune: training failed: {err}", file=sys.stderr)
        return EXIT_TRAIN
    if not cfg.out:
        sys.stdout.write(result.csv_text)
    print(json.dumps(result.summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
