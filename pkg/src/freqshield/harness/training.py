"""Training and evaluation loops over manifest-backed splits."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import EmptyTestSet, EmptyTrainSet, ImageIOError
from ..fsnet import FsnetConfig, FsnetModel, make_optimizer, predict_batch, train_step
from ..image_core import bilinear_matrix
from ..prng import DetRng
from .dataset import DatasetManifest, ImageCache
from .metrics import EvalReport, write_predictions_csv
from .splits import SplitPlan


@dataclass(frozen=True)
class AugmentConfig:
    """Optional robustness augmentation; both knobs at zero means off."""
    crop_fraction: float = 0.0  # max share of each side removed before resizing back
    requant_levels: int = 0  # re-quantize to this many levels per channel

    @property
    def enabled(self) -> bool:
        return self.crop_fraction > 0 or self.requant_levels > 0


def augment_batch(x: np.ndarray, cfg: AugmentConfig, rng: DetRng) -> np.ndarray:
    if not cfg.enabled:
        return x
    out = x.copy()
    n, _, h, w = x.shape
    for i in range(n):
        if cfg.crop_fraction > 0:
            ch = h - int(rng.uniform_f64() * cfg.crop_fraction * h)
            cw = w - int(rng.uniform_f64() * cfg.crop_fraction * w)
            y0, x0 = rng.randbelow(h - ch + 1), rng.randbelow(w - cw + 1)
            crop = x[i, :, y0:y0 + ch, x0:x0 + cw]
            ah, aw = bilinear_matrix(ch, h), bilinear_matrix(cw, w)
            out[i] = np.einsum("hy,cyx,wx->chw", ah, crop, aw)
        if cfg.requant_levels > 0:
            q = cfg.requant_levels - 1
            out[i] = np.round(np.clip(out[i], 0.0, 1.0) * q) / q
    return out.astype(x.dtype, copy=False)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.01
    mask_lr_scale: float = 30.0  # the gate needs to travel ~2 units; other weights far less
    seed: int = 0
    augment: AugmentConfig = AugmentConfig()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = "constant"
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        obj.pop("schedule", None)
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown training keys: {sorted(unknown)}")
        if isinstance(obj.get("augment"), dict):
            obj["augment"] = AugmentConfig(**obj["augment"])
        return cls(**obj)


@dataclass
class TrainResult:
    model: FsnetModel
    losses: list[float]
    epoch_means: list[float]


def batch_slices(n: int, batch_size: int) -> list[np.ndarray]:
    """``ceil(n / batch_size)`` balanced index chunks, so no chunk has a single sample."""
    n_batches = -(-n // batch_size)
    return np.array_split(np.arange(n), n_batches)


def run_training(
    plan: SplitPlan,
    manifest: DatasetManifest,
    model_cfg: FsnetConfig | None = None,
    train_cfg: TrainConfig | None = None,
    out_dir=None,
    cache: ImageCache | None = None,
    log=None,
) -> TrainResult:
    """Train a fresh model on ``plan.train_ids``.

    Each epoch reshuffles with a DetRng seeded from the training seed. When
    ``out_dir`` is given, writes ``loss.csv`` (step,loss), one checkpoint per
    epoch and ``model.fsn`` for the final weights.
    """
    model_cfg = model_cfg or FsnetConfig()
    train_cfg = train_cfg or TrainConfig()
    ids = list(plan.train_ids)
    if not ids:
        raise EmptyTrainSet("split has no training records")
    cache = cache or ImageCache(manifest, model_cfg.input_size)
    model = FsnetModel(model_cfg)
    opt = make_optimizer(model, lr=train_cfg.lr, weight_decay=train_cfg.weight_decay,
                         mask_lr_scale=train_cfg.mask_lr_scale)
    rng = DetRng(train_cfg.seed)
    aug_rng = rng.spawn(0xA06)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ImageIOError(f"cannot create {out}: {exc}") from exc
    x_all, y_all = cache.batch(ids)
    losses: list[float] = []
    epoch_means: list[float] = []
    meta = {"train_config": train_cfg.to_dict(), "held_out": plan.held_out, "n_train": len(ids)}
    for epoch in range(train_cfg.epochs):
        order = np.asarray(rng.permutation(len(ids)))
        epoch_losses = []
        for chunk in batch_slices(len(ids), train_cfg.batch_size):
            idx = order[chunk]
            xb = augment_batch(x_all[idx], train_cfg.augment, aug_rng)
            epoch_losses.append(train_step(model, opt, xb, y_all[idx]))
        losses += epoch_losses
        epoch_means.append(float(np.mean(epoch_losses)))
        if log is not None:
            log(f"epoch {epoch + 1}/{train_cfg.epochs} loss {epoch_means[-1]:.4f}")
        if out is not None:
            model.save(out / f"checkpoint_epoch{epoch + 1:03d}.fsn", {**meta, "epoch": epoch + 1})
    if out is not None:
        model.save(out / "model.fsn", {**meta, "epoch": train_cfg.epochs})
        write_loss_csv(losses, out / "loss.csv")
    return TrainResult(model, losses, epoch_means)


def write_loss_csv(losses, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "loss"])
            for i, v in enumerate(losses):
                w.writerow([i, f"{v:.6f}"])
    except OSError as exc:
        raise ImageIOError(f"cannot write loss curve {path}: {exc}") from exc


def evaluate(
    model: FsnetModel,
    manifest: DatasetManifest,
    ids,
    out_dir=None,
    cache: ImageCache | None = None,
    batch_size: int = 64,
) -> tuple[EvalReport, list[tuple[str, int, int, float]]]:
    """Score ``ids`` in eval mode; optionally write predictions.csv and report.json."""
    ids = list(ids.test_ids if isinstance(ids, SplitPlan) else ids)
    if not ids:
        raise EmptyTestSet("no records to evaluate")
    cache = cache or ImageCache(manifest, model.cfg.input_size)
    rows = []
    for start in range(0, len(ids), batch_size):
        chunk = ids[start:start + batch_size]
        x, y = cache.batch(chunk)
        pred, probs = predict_batch(model, x)
        rows += [(rid, int(lab), int(p), float(pr[1])) for rid, lab, p, pr in zip(chunk, y, pred, probs)]
    report = EvalReport.from_predictions([r[1] for r in rows], [r[2] for r in rows])
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_predictions_csv(rows, out / "predictions.csv")
        report.save(out / "report.json")
    return report, rows


def save_json(obj, path) -> None:
    try:
        Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc
