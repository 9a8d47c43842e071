"""Seeded training runs and paired cross-entropy vs adaptive comparisons.

Seeding: trial ``k`` draws from ``Rng(base_seed).child(k)``, which is split
into independent streams for weight init, batch order and augmentation. Both
losses use the same trial streams, so trial ``k`` of each loss starts from
identical weights and sees batches in the identical order. The synthetic
dataset comes from a separate stream of the base seed.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .losses import (LOSS_NAMES, adaptive_cross_entropy, batch_loss, cross_entropy,
                     gradient_scale_factor, softmax)
from .metrics import (Aggregate, EpochRecord, TrialReport, accuracy, aggregate_trials,
                      default_window, top_k_error)
from .network import MlpModel, init_model
from .numeric import U64_MAX, Rng
from .optim import SgdConfig, SgdState, sgd_step, step_lr

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epoch", "lr", "train_loss", "test_top1_acc", "test_top5_err")
LOSS_LABELS = {"cross_entropy": "cross entropy", "adaptive": "linearly adaptive loss"}

DATA_STREAM = 2**32
INIT_STREAM, ORDER_STREAM, AUGMENT_STREAM = 0, 1, 2


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "blobs"
    num_classes: int = 10
    per_class: int = 200
    test_per_class: int = 100
    dim: int = 32
    spread: float = 0.8
    train_path: str | None = None
    test_path: str | None = None
    augment: bool = True
    mean_subtract: bool = True

    def __post_init__(self):
        if self.kind == "blobs":
            if self.num_classes < 2 or self.per_class < 1 or self.test_per_class < 1 or self.dim < 1:
                raise ValueError("blobs need num_classes >= 2, per_class >= 1, "
                                 "test_per_class >= 1, dim >= 1")
            if not self.spread > 0:
                raise ValueError("blobs spread must be positive")
        elif self.kind == "cifar100":
            if not (self.train_path and self.test_path):
                raise ValueError("cifar100 needs train_path and test_path")
        else:
            raise ValueError(f"unknown dataset kind {self.kind!r} (expected blobs or cifar100)")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model_dims: tuple[int, ...] = (32, 64, 10)
    loss: str = "cross_entropy"
    epochs: int = 200
    batch_size: int = 100
    sgd: SgdConfig = field(default_factory=SgdConfig)
    trials: int = 5
    base_seed: int = 0
    window: tuple[int, int] | None = None
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSS_NAMES}")
        if len(self.model_dims) < 2 or any(d < 1 for d in self.model_dims):
            raise ValueError(f"model_dims must list >= 2 positive sizes, got {self.model_dims}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.base_seed <= U64_MAX:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        if self.window is not None:
            start, stop = self.window
            if not 0 <= start < stop <= self.epochs:
                raise ValueError(f"window {self.window} is outside epochs [0, {self.epochs})")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.dataset.kind == "blobs":
            if self.model_dims[0] != self.dataset.dim:
                raise ValueError(f"model input width {self.model_dims[0]} != blob dim {self.dataset.dim}")
            if self.model_dims[-1] != self.dataset.num_classes:
                raise ValueError(f"model output width {self.model_dims[-1]} != "
                                 f"{self.dataset.num_classes} classes")
        else:
            if self.model_dims[0] != data_mod.IMAGE_FEATURES or self.model_dims[-1] != data_mod.CIFAR100_CLASSES:
                raise ValueError(f"cifar100 models need dims [{data_mod.IMAGE_FEATURES}, ..., "
                                 f"{data_mod.CIFAR100_CLASSES}]")

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        raw = dict(raw)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" in raw:
            raw["dataset"] = _sub_config(DatasetConfig, raw["dataset"], "dataset")
        if "sgd" in raw:
            raw["sgd"] = _sub_config(SgdConfig, raw["sgd"], "sgd")
        if "model_dims" in raw:
            raw["model_dims"] = tuple(raw["model_dims"])
        if raw.get("window") is not None:
            raw["window"] = tuple(raw["window"])
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> ExperimentConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def aggregation_window(self) -> tuple[int, int]:
        return self.window if self.window is not None else default_window(self.epochs)


def _sub_config(cls, raw: dict, name: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown {name} config keys: {sorted(unknown)}")
    return cls(**raw)


@dataclass(frozen=True)
class PreparedData:
    train: data_mod.Dataset
    test: data_mod.Dataset
    # training features ready for batching; mean already removed unless augmenting
    train_input: data_mod.Dataset
    mean: data_mod.MeanImage | None
    augment: bool


def prepare_data(cfg: ExperimentConfig) -> PreparedData:
    d = cfg.dataset
    if d.kind == "blobs":
        rng = Rng(cfg.base_seed).child(DATA_STREAM)
        train, test = data_mod.synthetic_blob_splits(
            rng, d.num_classes, d.per_class, d.dim, d.spread, d.test_per_class)
    else:
        train, test = data_mod.load_cifar100(d.train_path, d.test_path)
    augment = d.augment and train.kind == "image"
    mean = data_mod.compute_mean(train) if d.mean_subtract else None
    train_input = train
    if mean is not None:
        test = data_mod.subtract_mean(test, mean)
        if not augment:
            train_input = data_mod.subtract_mean(train, mean)
    return PreparedData(train, test, train_input, mean, augment)


def _checksum(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def evaluate(model: MlpModel, ds: data_mod.Dataset, batch_size: int) -> tuple[float, float]:
    """(top-1 accuracy, top-k error) on ``ds`` with k = min(5, C)."""
    logits = np.concatenate([
        model.predict(ds.features[s:s + batch_size]) for s in range(0, len(ds), batch_size)
    ])
    k = min(5, ds.num_classes)
    return accuracy(logits, ds.labels), top_k_error(logits, ds.labels, k)


def run_trial(cfg: ExperimentConfig, loss_name: str | None = None, trial: int = 0,
              data: PreparedData | None = None, csv_path: str | Path | None = None) -> TrialReport:
    """Train one seeded model; optionally write its per-epoch CSV."""
    loss_name = loss_name or cfg.loss
    if loss_name not in LOSS_NAMES:
        raise ValueError(f"unknown loss {loss_name!r}")
    data = data or prepare_data(cfg)
    if data.train.dim != cfg.model_dims[0] or data.train.num_classes != cfg.model_dims[-1]:
        raise ValueError(
            f"model dims {list(cfg.model_dims)} do not fit data with {data.train.dim} "
            f"features and {data.train.num_classes} classes"
        )

    trial_rng = Rng(cfg.base_seed).child(trial)
    model = init_model(list(cfg.model_dims), trial_rng.child(INIT_STREAM))
    order_rng = trial_rng.child(ORDER_STREAM)
    aug_rng = trial_rng.child(AUGMENT_STREAM)
    params = model.parameters()
    state = SgdState(params)
    report = TrialReport(cfg.base_seed, loss_name, trial, init_checksum=_checksum(params))
    epoch0_order = []

    for epoch in range(cfg.epochs):
        lr = step_lr(cfg.sgd, epoch)
        total, seen = 0.0, 0
        for b, batch in enumerate(data_mod.batches(data.train_input, cfg.batch_size, order_rng)):
            if epoch == 0:
                epoch0_order.append(batch.indices)
            x = batch.features
            if data.augment:
                x = data_mod.augment_batch(x, aug_rng)
                if data.mean is not None:
                    x = x - data.mean.values
            with np.errstate(over="ignore", invalid="ignore"):
                logits = model.forward(x)
            if not np.all(np.isfinite(logits)):
                raise TrainingDiverged(
                    f"non-finite logits at epoch {epoch}, batch {b} ({loss_name}, trial {trial})")
            out = batch_loss(loss_name, logits, batch.labels)
            if not np.isfinite(out.value):
                raise TrainingDiverged(
                    f"non-finite {loss_name} loss at epoch {epoch}, batch {b} (trial {trial})")
            sgd_step(params, model.backward(out.grad_logits), state, cfg.sgd, lr)
            total += out.value * len(batch.labels)
            seen += len(batch.labels)
        top1, top5 = evaluate(model, data.test, cfg.batch_size)
        report.records.append(EpochRecord(epoch, lr, total / seen, top1, top5))
        log.debug("%s trial %d epoch %d: loss %.4f top1 %.4f", loss_name, trial, epoch,
                  total / seen, top1)
        if epoch == 0:
            report.order_checksum = _checksum(epoch0_order)

    if csv_path is not None:
        write_csv(report, csv_path)
    return report


def csv_text(report: TrialReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.records:
        w.writerow([r.epoch, repr(r.lr), repr(r.train_loss), repr(r.test_top1_acc),
                    repr(r.test_top5_err)])
    return buf.getvalue()


def write_csv(report: TrialReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(report))
    return path


def trial_csv_name(loss_name: str, trial: int) -> str:
    return f"{loss_name}_trial{trial}.csv"


# -- commands --------------------------------------------------------------


def cmd_train(cfg: ExperimentConfig, trial: int = 0) -> TrialReport:
    csv_path = None
    if cfg.out_dir is not None:
        csv_path = Path(cfg.out_dir) / trial_csv_name(cfg.loss, trial)
    return run_trial(cfg, cfg.loss, trial, csv_path=csv_path)


@dataclass
class CompareResult:
    reports: dict[str, list[TrialReport]]
    top5: dict[str, Aggregate]
    top1: dict[str, Aggregate]
    window: tuple[int, int]
    num_classes: int
    table: str = ""

    @property
    def paired(self) -> bool:
        ce, adp = self.reports["cross_entropy"], self.reports["adaptive"]
        return all(a.order_checksum == b.order_checksum and a.init_checksum == b.init_checksum
                   for a, b in zip(ce, adp))

    @property
    def adaptive_not_worse(self) -> bool:
        return self.top5["adaptive"].mean <= self.top5["cross_entropy"].mean


def _trial_job(args):
    cfg, loss_name, trial = args
    csv_path = Path(cfg.out_dir) / trial_csv_name(loss_name, trial) if cfg.out_dir else None
    return run_trial(cfg, loss_name, trial, csv_path=csv_path)


def cmd_compare(cfg: ExperimentConfig) -> CompareResult:
    """Run ``trials`` paired trials for each loss and aggregate them."""
    if cfg.trials < 2:
        raise ValueError("compare needs at least 2 trials")
    window = cfg.aggregation_window()
    jobs = [(cfg, name, t) for name in LOSS_NAMES for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        data = prepare_data(cfg)
        results = []
        for c, name, t in jobs:
            csv_path = Path(c.out_dir) / trial_csv_name(name, t) if c.out_dir else None
            results.append(run_trial(c, name, t, data=data, csv_path=csv_path))

    reports = {name: [r for r in results if r.loss_name == name] for name in LOSS_NAMES}
    top5 = {n: aggregate_trials(reports[n], window, "test_top5_err") for n in LOSS_NAMES}
    top1 = {n: aggregate_trials(reports[n], window, "test_top1_acc") for n in LOSS_NAMES}
    result = CompareResult(reports, top5, top1, window, cfg.model_dims[-1])
    result.table = format_table(result)
    if cfg.out_dir is not None:
        _write_summary(result, Path(cfg.out_dir))
    return result


def format_table(res: CompareResult) -> str:
    start, stop = res.window
    k = min(5, res.num_classes)
    lines = [
        f"mean over epochs [{start}, {stop}) of each trial",
        f"{'loss function':<26}{f'top-{k} error (%)':<20}{'trial no.':<16}{'order / init checksum'}",
        "-" * 96,
    ]
    for name in LOSS_NAMES:
        agg = res.top5[name]
        lines.append(f"{LOSS_LABELS[name]:<26}"
                     f"{f'{100 * agg.mean:.2f} ± {100 * agg.std:.2f}':<20}{'mean and std.':<16}")
        for t, (v, rep) in enumerate(zip(agg.per_trial, res.reports[name])):
            lines.append(f"{'':<26}{f'{100 * v:.2f}':<20}{f'trial {t + 1}':<16}"
                         f"{rep.order_checksum} / {rep.init_checksum}")
    lines.append("-" * 96)
    for name in LOSS_NAMES:
        agg = res.top1[name]
        lines.append(f"top-1 accuracy (%) {LOSS_LABELS[name]:<24}"
                     f"{100 * agg.mean:.2f} ± {100 * agg.std:.2f}")
    lines.append(f"paired seeds (identical init and data order per trial): "
                 f"{'yes' if res.paired else 'NO'}")
    lines.append(f"adaptive mean top-5 error <= cross entropy mean: "
                 f"{'yes' if res.adaptive_not_worse else 'no'}")
    return "\n".join(lines)


def _write_summary(res: CompareResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["loss", "trial", "window_top5_err", "window_top1_acc", "order_checksum", "init_checksum"])
    for name in LOSS_NAMES:
        for t, rep in enumerate(res.reports[name]):
            w.writerow([name, t, repr(res.top5[name].per_trial[t]), repr(res.top1[name].per_trial[t]),
                        rep.order_checksum, rep.init_checksum])
    (out / "summary.csv").write_text(buf.getvalue())
    summary = {
        "window": list(res.window),
        "paired": res.paired,
        "adaptive_not_worse": res.adaptive_not_worse,
        "top5_err": {n: dataclasses.asdict(a) for n, a in res.top5.items()},
        "top1_acc": {n: dataclasses.asdict(a) for n, a in res.top1.items()},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    (out / "summary.txt").write_text(res.table + "\n")


def eval_loss_text(logits, c: int) -> str:
    """Human-readable dump of both losses for one logit vector."""
    z = np.asarray(logits, dtype=np.float64)
    ce = cross_entropy(z, c)
    adp = adaptive_cross_entropy(z, c)
    q = softmax(z)
    fmt = lambda v: "[" + ", ".join(f"{x:.6f}" for x in v) + "]"
    return "\n".join([
        f"q                 = {fmt(q)}",
        f"cross_entropy     = {ce.value:.6f}",
        f"  grad            = {fmt(ce.grad_logits)}  (sum {ce.grad_logits.sum():.1e})",
        f"adaptive          = {adp.value:.6f}",
        f"  grad            = {fmt(adp.grad_logits)}  (sum {adp.grad_logits.sum():.1e})",
        f"k(q_c)            = {gradient_scale_factor(max(q[c], 1e-12)):.6f}",
    ])


def inspect_text(cfg: ExperimentConfig) -> str:
    data = prepare_data(cfg)
    lines = []
    for split, ds in (("train", data.train), ("test", data.test)):
        counts = np.bincount(ds.labels, minlength=ds.num_classes)
        lines.append(f"{split}: n={len(ds)} features={ds.dim} classes={ds.num_classes} kind={ds.kind} "
                     f"per-class min/max={counts.min()}/{counts.max()}")
    lines.append(f"train feature range [{data.train.features.min():.4f}, {data.train.features.max():.4f}]")
    if data.mean is not None:
        lines.append(f"mean image range [{data.mean.values.min():.4f}, {data.mean.values.max():.4f}]")
    return "\n".join(lines)
