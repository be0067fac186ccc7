"""
Training machinery: schedules, smoothed cross-entropy, the training loop and
macro-averaged evaluation.

All schedules are epoch-granular. ``t`` runs over ``0..epochs``.
"""

from __future__ import annotations

import copy
import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch
import torch.nn.functional as F

from .augment import AugPolicy, augment
from .dataio import atomic_write
from .encoder import PainModel, images_to_tensor, save_checkpoint
from .errors import ConfigError, DivergenceError, InvalidInputError, InvalidParameterError

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "lr", "eps", "p", "train_loss", "val_loss", "val_acc", "val_prec", "val_f1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    warmup_epochs: int = 10
    cooldown_epochs: int = 0
    base_lr: float = 1e-4
    lr_floor_ratio: float = 0.01
    batch_size: int = 32
    ls_start: float = 0.1
    ls_end: float = 0.1
    do_start: float = 0.5
    do_end: float = 0.5
    # "drop": scheduled value is the drop probability; "keep": it is the keep probability
    dropout_mode: str = "drop"
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    augment: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.warmup_epochs < 0 or self.cooldown_epochs < 0:
            raise ConfigError("warmup/cooldown must be non-negative")
        if self.warmup_epochs + self.cooldown_epochs > self.epochs:
            raise ConfigError("warmup + cooldown exceeds the number of epochs")
        for name in ("ls_start", "ls_end", "do_start", "do_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.dropout_mode not in ("drop", "keep"):
            raise ConfigError(f"dropout_mode must be 'drop' or 'keep', got {self.dropout_mode!r}")
        if self.batch_size < 1 or self.base_lr <= 0:
            raise ConfigError("batch_size and base_lr must be positive")


def parse_schedule(text: str) -> tuple[float, float]:
    """``"70-10"`` -> ``(0.70, 0.10)`` (percent endpoints)."""
    try:
        a, b = text.split("-")
        return int(a) / 100.0, int(b) / 100.0
    except ValueError:
        raise ConfigError(f"schedule must look like '70-10', got {text!r}") from None


def _preset(epochs, warmup, lr, ls, do) -> TrainConfig:
    ls0, ls1 = parse_schedule(ls)
    do0, do1 = parse_schedule(do)
    return TrainConfig(epochs=epochs, warmup_epochs=warmup, base_lr=lr,
                       ls_start=ls0, ls_end=ls1, do_start=do0, do_end=do1)


_GRID = [
    (300, 50, 1e-4, "10-10", "50-50"),
    (300, 50, 1e-4, "30-30", "50-50"),
    (300, 50, 1e-4, "70-70", "50-50"),
    (300, 50, 1e-4, "70-10", "50-50"),
    (300, 50, 1e-4, "70-70", "90-10"),
    (300, 50, 1e-4, "70-10", "70-10"),
    (300, 50, 1e-5, "70-10", "50-50"),
    (300, 50, 1e-5, "70-70", "90-10"),
    (300, 50, 1e-5, "70-10", "70-10"),
    (300, 150, 1e-5, "70-10", "50-50"),
    (300, 150, 1e-5, "70-70", "90-10"),
    (300, 150, 1e-5, "70-10", "70-10"),
    (300, 150, 1e-4, "70-10", "50-50"),
    (300, 150, 1e-4, "70-70", "90-10"),
    (300, 150, 1e-4, "70-10", "70-10"),
    (2000, 10, 1e-6, "70-10", "90-50"),
]

PRESETS: dict[str, TrainConfig] = {
    f"e{e}-w{w}-lr{lr:g}-ls{ls}-do{do}": _preset(e, w, lr, ls, do) for e, w, lr, ls, do in _GRID
}
PRESETS["baseline"] = PRESETS["e300-w50-lr0.0001-ls10-10-do50-50"]
PRESETS["best"] = PRESETS["e300-w50-lr0.0001-ls70-10-do70-10"]
PRESETS["stable"] = PRESETS["e2000-w10-lr1e-06-ls70-10-do90-50"]
# from-scratch toy encoder on ~100 windows: larger steps, smaller batches
# (more updates per epoch) and no augmentation, which stalls learning here
PRESETS["desk"] = TrainConfig(epochs=100, warmup_epochs=5, base_lr=5e-4, batch_size=8,
                              ls_start=0.1, ls_end=0.0, do_start=0.3, do_end=0.1, augment=False)


def linear_schedule(t: float, start: float, end: float, total: int) -> float:
    if not 0 <= t <= total:
        raise InvalidParameterError(f"epoch {t} outside [0, {total}]")
    if total == 0:
        return start
    return start + (t / total) * (end - start)


def dropout_p(t: float, cfg: TrainConfig) -> float:
    """Scheduled dropout quantity (drop or keep probability per ``dropout_mode``)."""
    return linear_schedule(t, cfg.do_start, cfg.do_end, cfg.epochs)


def drop_probability(t: float, cfg: TrainConfig) -> float:
    p = dropout_p(t, cfg)
    return p if cfg.dropout_mode == "drop" else 1.0 - p


def label_smoothing_eps(t: float, cfg: TrainConfig) -> float:
    return linear_schedule(t, cfg.ls_start, cfg.ls_end, cfg.epochs)


def lr_at(t: float, cfg: TrainConfig) -> float:
    """Linear warmup, cosine decay to ``lr_floor_ratio * base_lr``, then a flat cooldown."""
    if not 0 <= t <= cfg.epochs:
        raise InvalidParameterError(f"epoch {t} outside [0, {cfg.epochs}]")
    base = cfg.base_lr
    floor = cfg.lr_floor_ratio * base
    w, c = cfg.warmup_epochs, cfg.cooldown_epochs
    if t < w:
        return base * t / w
    if c > 0 and t >= cfg.epochs - c:
        return floor
    decay = cfg.epochs - w - c
    if decay <= 0:
        return base
    frac = min((t - w) / decay, 1.0)
    return floor + (base - floor) * 0.5 * (1.0 + math.cos(math.pi * frac))


def smoothed_ce(logits: torch.Tensor, labels, eps: float) -> torch.Tensor:
    """Mean cross-entropy against ``(1 - eps) * onehot + eps / C``."""
    if not 0.0 <= eps <= 1.0:
        raise InvalidParameterError(f"label smoothing {eps} outside [0, 1]")
    if logits.dim() == 1:
        logits = logits.unsqueeze(0)
    labels = torch.as_tensor(labels, dtype=torch.long).reshape(-1)
    n_classes = logits.shape[-1]
    if labels.numel() and (labels.min() < 0 or labels.max() >= n_classes):
        raise InvalidParameterError(f"label outside 0..{n_classes - 1}")
    target = torch.full_like(logits, eps / n_classes)
    target += (1.0 - eps) * F.one_hot(labels, n_classes).to(logits.dtype)
    return -(target * F.log_softmax(logits, dim=-1)).sum(dim=-1).mean()


def macro_metrics(y_true, y_pred, n_classes: int = 3) -> dict:
    """Unweighted per-class recall / precision / F1 averages.

    Undefined per-class precision (class never predicted) counts as 0; so
    does recall for a class absent from ``y_true``.
    """
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return metrics_from_confusion(cm)


def metrics_from_confusion(cm) -> dict:
    cm = np.asarray(cm, dtype=float)
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return {
        "macro_accuracy": float(recall.mean()),
        "macro_precision": float(precision.mean()),
        "macro_f1": float(f1.mean()),
    }


@dataclass(eq=False)
class ImageDataset:
    """uint8 views ``(N, k, H, W)`` with integer labels ``(N,)``."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[0] != self.labels.shape[0]:
            raise InvalidInputError("images must be (N, k, H, W) with one label per sample")

    def __len__(self):
        return int(self.labels.shape[0])

    def subset(self, idx) -> "ImageDataset":
        return ImageDataset(self.images[idx], self.labels[idx])


def predict(model: PainModel, data: ImageDataset, batch_size: int = 64) -> tuple[np.ndarray, float]:
    """Return (predicted labels, mean plain cross-entropy)."""
    model.eval()
    dtype = next(model.parameters()).dtype
    preds, total = [], 0.0
    with torch.no_grad():
        for s in range(0, len(data), batch_size):
            x = images_to_tensor(data.images[s:s + batch_size], dtype)
            y = torch.as_tensor(data.labels[s:s + batch_size])
            logits = model(x)
            total += float(F.cross_entropy(logits, y, reduction="sum"))
            preds.append(logits.argmax(dim=-1).numpy())
    return np.concatenate(preds), total / len(data)


def evaluate(model: PainModel, data: ImageDataset) -> dict:
    if len(data) == 0:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    pred, loss = predict(model, data)
    out = macro_metrics(data.labels, pred, model.cfg.n_classes)
    out["loss"] = loss
    return out


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_acc: float = -1.0
    best_state: dict | None = None


def metrics_csv(history: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for row in history:
        writer.writerow([row["epoch"]] + [repr(float(row[c])) for c in METRIC_COLUMNS[1:]])
    return buf.getvalue()


def _augment_batch(images: np.ndarray, policy: AugPolicy, rng) -> np.ndarray:
    out = np.empty_like(images)
    for i in range(images.shape[0]):
        for v in range(images.shape[1]):
            out[i, v] = augment(images[i, v], policy, rng)
    return out


def train(model: PainModel, train_data: ImageDataset, val_data: ImageDataset | None,
          cfg: TrainConfig, policy: AugPolicy | None = None, out_dir=None,
          extra: dict | None = None) -> TrainResult:
    """Mini-batch Adam training with per-epoch schedules.

    When ``out_dir`` is given, ``metrics.csv`` is rewritten after every epoch
    and the best-validation-accuracy weights are saved under ``out_dir/best``
    (``extra`` is stored in the checkpoint manifest alongside the epoch).
    """
    if len(train_data) == 0:
        raise InvalidInputError("training set is empty")
    policy = policy if policy is not None else AugPolicy()
    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    dtype = next(model.parameters()).dtype
    opt = torch.optim.Adam(model.parameters(), lr=lr_at(0, cfg), betas=(cfg.beta1, cfg.beta2),
                           weight_decay=cfg.weight_decay)
    result = TrainResult()
    n = len(train_data)
    for epoch in range(cfg.epochs):
        lr, eps, p = lr_at(epoch, cfg), label_smoothing_eps(epoch, cfg), drop_probability(epoch, cfg)
        for group in opt.param_groups:
            group["lr"] = lr
        model.set_dropout(p)
        model.train()
        perm = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = perm[s:s + cfg.batch_size]
            imgs = train_data.images[idx]
            if cfg.augment:
                imgs = _augment_batch(imgs, policy, rng)
            x = images_to_tensor(imgs, dtype)
            loss = smoothed_ce(model(x), train_data.labels[idx], eps)
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}, batch starting {s}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        row = {"epoch": epoch, "lr": lr, "eps": eps, "p": p, "train_loss": total / n}
        if val_data is not None and len(val_data):
            m = evaluate(model, val_data)
            row.update(val_loss=m["loss"], val_acc=m["macro_accuracy"], val_prec=m["macro_precision"],
                       val_f1=m["macro_f1"])
        else:
            row.update(val_loss=float("nan"), val_acc=float("nan"), val_prec=float("nan"),
                       val_f1=float("nan"))
        result.history.append(row)
        score = row["val_acc"] if not math.isnan(row["val_acc"]) else -row["train_loss"]
        if result.best_state is None or score > result.best_val_acc:
            result.best_val_acc = score
            result.best_epoch = epoch
            result.best_state = copy.deepcopy(model.state_dict())
            if out_dir is not None:
                save_checkpoint(model, f"{out_dir}/best", extra={**(extra or {}), "epoch": epoch, "val_acc": row["val_acc"]})
        log.info("epoch %d lr=%.3g eps=%.3f p=%.3f train=%.4f val_acc=%.4f",
                 epoch, lr, eps, p, row["train_loss"], row["val_acc"])
        if out_dir is not None:
            atomic_write(f"{out_dir}/metrics.csv", metrics_csv(result.history).encode())
    return result


def with_overrides(cfg: TrainConfig, **kw) -> TrainConfig:
    return replace(cfg, **kw)
