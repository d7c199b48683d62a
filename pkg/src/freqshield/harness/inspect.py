"""Gate heatmap and attention-profile exports for trained models."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import Tensor, functional as F
from ..errors import ImageIOError
from ..fsnet import FsnetModel
from ..residual import save_heatmap_pgm


@dataclass(frozen=True)
class GateHeatmap:
    values: np.ndarray
    low_mean: float  # top-left (low-frequency) quadrant
    rest_mean: float

    @property
    def low_suppressed(self) -> bool:
        return self.low_mean < self.rest_mean

    def to_dict(self) -> dict:
        return {"shape": list(self.values.shape), "low_quadrant_mean": self.low_mean,
                "rest_mean": self.rest_mean, "low_suppressed": self.low_suppressed}


def gate_quadrant_stats(mask: np.ndarray) -> tuple[float, float]:
    h, w = mask.shape
    low = np.zeros(mask.shape, dtype=bool)
    low[: h // 2, : w // 2] = True
    m = mask.astype(np.float64)
    return float(m[low].mean()), float(m[~low].mean())


def export_gate_heatmap(model: FsnetModel, prefix) -> GateHeatmap:
    """Write ``<prefix>.pgm`` (min-max scaled) and ``<prefix>.csv`` (raw values, one row per mask row)."""
    mask = np.array(model.mask_values, dtype=np.float64)
    prefix = Path(prefix)
    save_heatmap_pgm(mask, prefix.with_suffix(".pgm"))
    try:
        with open(prefix.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in mask:
                w.writerow([f"{v:.6g}" for v in row])
    except OSError as exc:
        raise ImageIOError(f"cannot write {prefix}.csv: {exc}") from exc
    low, rest = gate_quadrant_stats(mask)
    return GateHeatmap(mask, low, rest)


@dataclass(frozen=True)
class AttnProfile:
    ids: list[str]
    labels: np.ndarray
    branch: np.ndarray  # N x K, per-branch attention averaged over channels
    v_total: np.ndarray  # N x C, channel attention of the full model

    def peak(self) -> np.ndarray:
        """Per-sample max over channels of v_total."""
        return self.v_total.max(axis=1)

    def class_means(self) -> dict[int, np.ndarray]:
        return {lab: np.concatenate([self.branch[self.labels == lab].mean(axis=0),
                                     self.v_total[self.labels == lab].mean(axis=0)])
                for lab in (0, 1) if np.any(self.labels == lab)}


def attention_profile(model: FsnetModel, batch: np.ndarray, labels, ids=None) -> AttnProfile:
    """Eval-mode attention statistics.

    ``v_total`` is the DMSA output on the batch. The branch profile runs each
    frequency branch's descriptor alone through the excitation MLP (as if the
    pooled vector were that branch's projection) and averages the resulting
    sigmoid over channels.
    """
    dmsa = model.dmsa
    x = Tensor(np.asarray(batch, dtype=np.float32))
    feats = model.backbone(model.aspm(x), training=False)
    v_total = dmsa.attention(feats).data.astype(np.float64)
    s = dmsa.spectral_descriptors(feats).data  # N x C x K
    branch = np.empty((s.shape[0], s.shape[2]))
    for k in range(s.shape[2]):
        a = F.sigmoid(dmsa.fc2(F.relu(dmsa.fc1(Tensor(s[:, :, k]))))).data
        branch[:, k] = a.mean(axis=1)
    n = len(v_total)
    ids = list(ids) if ids is not None else [f"sample_{i:04d}" for i in range(n)]
    return AttnProfile(ids, np.asarray(labels, dtype=np.int64), branch, v_total)


def export_attention_profile(model: FsnetModel, batch: np.ndarray, labels, path, ids=None) -> AttnProfile:
    """CSV with one row per sample plus ``mean_clean`` and ``mean_watermarked`` summary rows."""
    prof = attention_profile(model, batch, labels, ids)
    k, c = prof.branch.shape[1], prof.v_total.shape[1]
    header = ["id", "label"] + [f"branch{i:02d}" for i in range(k)] + [f"vtotal{j:02d}" for j in range(c)]
    means = prof.class_means()
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for rid, lab, b, v in zip(prof.ids, prof.labels, prof.branch, prof.v_total):
                w.writerow([rid, int(lab)] + [f"{x:.6f}" for x in b] + [f"{x:.6f}" for x in v])
            for lab, name in ((0, "mean_clean"), (1, "mean_watermarked")):
                row = means.get(lab)
                vals = [f"{x:.6f}" for x in row] if row is not None else [""] * (k + c)
                w.writerow([name, lab] + vals)
    except OSError as exc:
        raise ImageIOError(f"cannot write attention profile {path}: {exc}") from exc
    return prof
