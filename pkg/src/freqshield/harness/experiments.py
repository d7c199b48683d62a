"""End-to-end desk-scale experiment drivers.

Each driver lays out ``workdir`` as::

    data/      images + manifest.json
    split.json
    train/     loss.csv, per-epoch checkpoints, model.fsn
    eval/      predictions.csv, report.json
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..fsnet import FsnetConfig, FsnetModel
from .dataset import DatasetManifest, GenerationRecipe, ImageCache, generate_dataset
from .metrics import EvalReport
from .splits import SplitPlan, ablate_algorithms, make_loao_split, make_random_split, subsample_fraction
from .training import TrainConfig, evaluate, run_training

# density-preserving Patchwork at 64x64: 6 pairs/bit touch ~9% of pixels, as 100 do at 256x256
PATCHWORK_64 = {"patchwork": {"pairs_per_bit": 6}}
# hard checker edges swamp the weak spread-spectrum residual and stall zero-shot training
SMOOTH_FAMILIES = ("gradient", "blobs")


@dataclass
class ExperimentResult:
    manifest: DatasetManifest
    plan: SplitPlan
    model: FsnetModel
    losses: list[float]
    report: EvalReport
    workdir: Path


def _train_and_score(manifest, plan, workdir, model_cfg, train_cfg, log):
    plan.save(workdir / "split.json")
    cache = ImageCache(manifest, model_cfg.input_size)
    res = run_training(plan, manifest, model_cfg, train_cfg, workdir / "train", cache, log)
    report, _ = evaluate(res.model, manifest, plan.test_ids, workdir / "eval", cache)
    return ExperimentResult(manifest, plan, res.model, res.losses, report, workdir)


def in_distribution(workdir, seed: int = 7, n_per_algo: int = 400, epochs: int = 12,
                    test_fraction: float = 0.2, size: int = 64, log=None) -> ExperimentResult:
    """DCT + DWT positives with matched clean images, random held-out split."""
    workdir = Path(workdir)
    recipe = GenerationRecipe({"dct": n_per_algo, "dwt": n_per_algo}, size=size, seed=seed)
    manifest = generate_dataset(recipe, workdir / "data")
    plan = make_random_split(manifest, test_fraction, seed=seed + 1)
    return _train_and_score(manifest, plan, workdir, FsnetConfig(input_size=size, seed=seed),
                            TrainConfig(epochs=epochs, seed=seed + 2), log)


def leave_one_out(workdir, held_out: str = "dwt", seed: int = 11, n_per_algo: int = 250,
                  epochs: int = 8, size: int = 64, log=None) -> ExperimentResult:
    """All four classical embedders; train without ``held_out`` and score on its fold."""
    workdir = Path(workdir)
    recipe = GenerationRecipe({a: n_per_algo for a in ("dct", "patchwork", "lsb", "dwt")},
                              size=size, seed=seed, families=SMOOTH_FAMILIES,
                              embed=dict(PATCHWORK_64))
    manifest = generate_dataset(recipe, workdir / "data")
    plan = make_loao_split(manifest, held_out, seed=seed + 1)
    return _train_and_score(manifest, plan, workdir, FsnetConfig(input_size=size, seed=seed),
                            TrainConfig(epochs=epochs, seed=seed + 2), log)


def fraction_sweep(manifest: DatasetManifest, plan: SplitPlan, workdir, fractions=(0.1, 0.3, 0.5, 0.8, 1.0),
                   model_cfg: FsnetConfig | None = None, train_cfg: TrainConfig | None = None,
                   log=None) -> dict[float, EvalReport]:
    """Retrain on stratified fractions of the training list; the test list is fixed."""
    model_cfg = model_cfg or FsnetConfig()
    train_cfg = train_cfg or TrainConfig()
    out = {}
    for frac in fractions:
        sub = subsample_fraction(plan, frac, seed=train_cfg.seed, manifest=manifest)
        res = _train_and_score(manifest, sub, Path(workdir) / f"frac_{frac:.1f}", model_cfg, train_cfg, log)
        out[frac] = res.report
    return out


def ablation_sweep(manifest: DatasetManifest, held_out: str, removed_sets, workdir,
                   model_cfg: FsnetConfig | None = None, train_cfg: TrainConfig | None = None,
                   log=None) -> dict[str, EvalReport]:
    """Drop algorithm families from training, always scoring the full manifest's held-out fold."""
    model_cfg = model_cfg or FsnetConfig()
    train_cfg = train_cfg or TrainConfig()
    test_ids = make_loao_split(manifest, held_out, seed=train_cfg.seed).test_ids
    out = {}
    for removed in removed_sets:
        tag = "+".join(sorted(removed)) or "none"
        view = ablate_algorithms(manifest, set(removed) | {held_out})
        train_ids = [r.id for r in view.records]
        plan = SplitPlan(held_out, train_ids, list(test_ids), train_cfg.seed)
        res = _train_and_score(manifest, plan, Path(workdir) / f"ablate_{tag}", model_cfg, train_cfg, log)
        out[tag] = res.report
    return out
