import math

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from hypothesis import given, strategies as st

from edamrd.augment import AugPolicy
from edamrd.encoder import EncoderConfig, PainModel, load_checkpoint
from edamrd.errors import ConfigError, DivergenceError, InvalidInputError, InvalidParameterError
from edamrd.trainer import (METRIC_COLUMNS, PRESETS, ImageDataset, TrainConfig, drop_probability, dropout_p,
                            evaluate, label_smoothing_eps, lr_at, macro_metrics, metrics_csv,
                            metrics_from_confusion, parse_schedule, smoothed_ce, train, with_overrides)

from oracles import hand_metrics, smoothed_ce_by_hand

TOY = EncoderConfig(image_size=32, patch_size=16, embed_dim=8, n_blocks=1, n_heads=2)


def toy_data(n, seed=0, n_classes=3):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_classes
    imgs = np.full((n, 1, 32, 32), 255, np.uint8)
    for i, c in enumerate(labels):
        imgs[i, 0, 8 * c:8 * c + 8] = rng.integers(0, 80, size=(8, 32))
    return ImageDataset(imgs, labels)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=10, warmup_epochs=8, cooldown_epochs=3)
    with pytest.raises(ConfigError):
        TrainConfig(ls_start=1.2)
    with pytest.raises(ConfigError):
        TrainConfig(dropout_mode="maybe")


def test_parse_schedule_and_presets():
    assert parse_schedule("70-10") == (0.70, 0.10)
    assert parse_schedule("90-50") == (0.90, 0.50)
    with pytest.raises(ConfigError):
        parse_schedule("70/10")
    stable = PRESETS["stable"]
    assert (stable.epochs, stable.warmup_epochs, stable.base_lr) == (2000, 10, 1e-6)
    assert (stable.do_start, stable.do_end, stable.ls_start, stable.ls_end) == (0.9, 0.5, 0.7, 0.1)
    assert PRESETS["baseline"].batch_size == 32
    assert len([k for k in PRESETS if k.startswith("e")]) == 16


def test_dropout_schedule_endpoints():
    cfg = TrainConfig(epochs=2000, warmup_epochs=10, do_start=0.9, do_end=0.5)
    assert dropout_p(0, cfg) == 0.9
    assert dropout_p(2000, cfg) == 0.5
    assert dropout_p(1000, cfg) == pytest.approx(0.70, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        dropout_p(2001, cfg)
    keep = with_overrides(cfg, dropout_mode="keep")
    assert drop_probability(0, keep) == pytest.approx(0.1)
    assert drop_probability(0, cfg) == 0.9


def test_label_smoothing_schedule():
    cfg = PRESETS["best"]
    assert label_smoothing_eps(0, cfg) == 0.7
    assert label_smoothing_eps(cfg.epochs, cfg) == pytest.approx(0.1, abs=1e-12)


def test_lr_schedule_points():
    cfg = TrainConfig(epochs=100, warmup_epochs=10, cooldown_epochs=10, base_lr=1e-3)
    assert lr_at(0, cfg) == 0.0
    assert lr_at(10, cfg) == 1e-3
    floor = 1e-5
    mid = 10 + 80 / 2
    assert abs(lr_at(mid, cfg) - (floor + (1e-3 - floor) * 0.5 * (1 + math.cos(math.pi / 2)))) < 1e-12
    assert lr_at(90, cfg) == floor and lr_at(100, cfg) == floor
    assert lr_at(5, cfg) == pytest.approx(5e-4)


@given(st.integers(1, 300), st.data())
def test_lr_bounds(epochs, data):
    w = data.draw(st.integers(0, epochs))
    c = data.draw(st.integers(0, epochs - w))
    cfg = TrainConfig(epochs=epochs, warmup_epochs=w, cooldown_epochs=c, base_lr=1e-3)
    for t in range(epochs + 1):
        assert 0 <= lr_at(t, cfg) <= 1e-3 + 1e-18


def test_smoothed_ce_examples():
    logits = torch.tensor([[1.0, 0.0, 0.0]], dtype=torch.double)
    got = smoothed_ce(logits, [0], 0.3).item()
    assert abs(got - smoothed_ce_by_hand([1.0, 0.0, 0.0], 0, 0.3)) < 1e-10
    z = torch.randn(5, 3, dtype=torch.double)
    y = torch.tensor([0, 1, 2, 1, 0])
    assert abs(smoothed_ce(z, y, 0.0).item() - F.cross_entropy(z, y).item()) < 1e-12
    a = smoothed_ce(z, torch.zeros(5, dtype=torch.long), 1.0).item()
    b = smoothed_ce(z, torch.full((5,), 2), 1.0).item()
    assert a == pytest.approx(b, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        smoothed_ce(z, [0, 1, 2, 3, 0], 0.1)


def test_metrics_confusion_matrix():
    cm = [[5, 1, 0], [1, 4, 1], [0, 2, 6]]
    m = metrics_from_confusion(cm)
    acc, prec, f1 = hand_metrics(cm)
    assert m["macro_accuracy"] == pytest.approx(acc, abs=1e-12)
    assert m["macro_precision"] == pytest.approx(prec, abs=1e-12)
    assert m["macro_f1"] == pytest.approx(f1, abs=1e-12)
    assert acc == pytest.approx((5 / 6 + 4 / 6 + 6 / 8) / 3)
    y_true = [i for i, row in enumerate(cm) for j, n in enumerate(row) for _ in range(n)]
    y_pred = [j for i, row in enumerate(cm) for j, n in enumerate(row) for _ in range(n)]
    assert macro_metrics(y_true, y_pred) == m


def test_metrics_perfect_and_constant():
    y = [0, 1, 2] * 4
    assert macro_metrics(y, y) == {"macro_accuracy": 1.0, "macro_precision": 1.0, "macro_f1": 1.0}
    assert macro_metrics(y, [1] * 12)["macro_accuracy"] == pytest.approx(1 / 3)


@given(st.permutations(list(range(12))))
def test_metrics_order_invariant(perm):
    y = np.array([0, 1, 2] * 4)
    p = np.array([0, 1, 1, 2, 2, 0, 0, 1, 2, 1, 1, 1])
    assert macro_metrics(y[perm], p[perm]) == macro_metrics(y, p)


def test_dataset_validation():
    with pytest.raises(InvalidInputError):
        ImageDataset(np.zeros((3, 32, 32)), [0, 1, 2])
    with pytest.raises(InvalidInputError):
        train(PainModel(TOY), ImageDataset(np.zeros((0, 1, 32, 32)), []), None, TrainConfig(epochs=1, warmup_epochs=0))


def test_memorise_two_samples():
    torch.manual_seed(0)
    data = toy_data(2)
    cfg = TrainConfig(epochs=50, warmup_epochs=0, base_lr=3e-3, batch_size=2, ls_start=0.0, ls_end=0.0,
                      do_start=0.0, do_end=0.0, augment=False)
    res = train(PainModel(TOY), data, None, cfg)
    losses = [r["train_loss"] for r in res.history]
    assert losses[-1] < 0.05
    assert np.mean(losses[-10:]) < np.mean(losses[:10])


def _run(tmp_path, name, policy=None, augment_on=False):
    torch.manual_seed(0)
    cfg = TrainConfig(epochs=4, warmup_epochs=1, base_lr=1e-3, batch_size=4, augment=augment_on, seed=5)
    out = tmp_path / name
    res = train(PainModel(TOY), toy_data(12), toy_data(6, seed=1), cfg, policy, out_dir=out)
    return res, out


def test_determinism_and_artifacts(tmp_path):
    r1, o1 = _run(tmp_path, "a", AugPolicy.cutout_only((1,)), augment_on=True)
    r2, o2 = _run(tmp_path, "b", AugPolicy.cutout_only((1,)), augment_on=True)
    assert (o1 / "metrics.csv").read_bytes() == (o2 / "metrics.csv").read_bytes()
    for f in ("weights.bin", "manifest.json"):
        assert (o1 / "best" / f).read_bytes() == (o2 / "best" / f).read_bytes()
    lines = (o1 / "metrics.csv").read_text().splitlines()
    assert lines[0] == ",".join(METRIC_COLUMNS) and len(lines) == 5
    model, manifest = load_checkpoint(o1 / "best")
    assert manifest["extra"]["epoch"] == r1.best_epoch
    assert evaluate(model, toy_data(6, seed=1))["macro_accuracy"] == pytest.approx(r1.best_val_acc)


def test_metrics_csv_rows():
    rows = [{c: float(i) for c in METRIC_COLUMNS} for i in range(3)]
    for r in rows:
        r["epoch"] = int(r["epoch"])
    assert len(metrics_csv(rows).splitlines()) == 4


def test_divergence_detected():
    torch.manual_seed(0)
    model = PainModel(TOY)
    with torch.no_grad():
        model.head.bias.fill_(float("nan"))
    cfg = TrainConfig(epochs=2, warmup_epochs=0, augment=False)
    with pytest.raises(DivergenceError):
        train(model, toy_data(4), None, cfg)
