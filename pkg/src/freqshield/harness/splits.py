"""Leave-one-algorithm-out splits, random splits, fractions and ablations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import EmptyTrainSet, FormatError, ImageIOError, UnknownAlgorithm
from ..prng import DetRng
from .dataset import DatasetManifest, SampleRecord

FRACTIONS = (0.1, 0.3, 0.5, 0.8, 1.0)


@dataclass
class SplitPlan:
    held_out: str | None
    train_ids: list[str]
    test_ids: list[str]
    seed: int = 0

    def to_dict(self) -> dict:
        return {"held_out": self.held_out, "seed": self.seed,
                "train_ids": list(self.train_ids), "test_ids": list(self.test_ids)}

    @classmethod
    def from_dict(cls, obj: dict) -> "SplitPlan":
        unknown = set(obj) - {"held_out", "seed", "train_ids", "test_ids"}
        if unknown:
            raise FormatError(f"unknown split keys: {sorted(unknown)}")
        return cls(obj["held_out"], list(obj["train_ids"]), list(obj["test_ids"]), obj.get("seed", 0))

    def save(self, path) -> None:
        try:
            Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        except OSError as exc:
            raise ImageIOError(f"cannot write split {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SplitPlan":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except OSError as exc:
            raise ImageIOError(f"cannot read split {path}: {exc}") from exc


def _shuffled(records: list[SampleRecord], rng: DetRng) -> list[SampleRecord]:
    return rng.shuffle(sorted(records, key=lambda r: r.id))


def _draw(pool: list[SampleRecord], spare: list[SampleRecord], n: int, what: str) -> list[SampleRecord]:
    """Take ``n`` from ``pool`` first, then from ``spare`` (consumed in place)."""
    out = pool[:n]
    while len(out) < n and spare:
        out.append(spare.pop(0))
    if len(out) < n:
        raise ValueError(f"not enough clean images to match {n} positives for {what}")
    return out


def make_loao_split(manifest: DatasetManifest, held_out: str, seed: int = 0) -> SplitPlan:
    """Hold out every positive of one algorithm plus an equal number of negatives.

    Negatives come from each algorithm's reserved clean pool in seeded-shuffle
    order. Unpooled clean records, if any, top up short pools.
    """
    held_out = held_out.lower()
    algos = manifest.algorithms()
    if held_out not in algos:
        raise UnknownAlgorithm(held_out)
    rng = DetRng(seed)
    spare = _shuffled([r for r in manifest.negatives() if r.pool not in algos], rng)

    test_pos = manifest.positives(held_out)
    test_neg = _draw(_shuffled(manifest.negatives(held_out), rng), spare, len(test_pos), held_out)
    train_pos, train_neg = [], []
    for algo in algos:
        if algo == held_out:
            continue
        pos = manifest.positives(algo)
        train_pos += pos
        train_neg += _draw(_shuffled(manifest.negatives(algo), rng), spare, len(pos), algo)
    return SplitPlan(
        held_out,
        [r.id for r in train_pos + train_neg],
        [r.id for r in test_pos + test_neg],
        seed,
    )


def make_random_split(manifest: DatasetManifest, test_fraction: float = 0.2, seed: int = 0) -> SplitPlan:
    """In-distribution split: per algorithm, the same share of positives and matched negatives."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = DetRng(seed)
    algos = manifest.algorithms()
    spare = _shuffled([r for r in manifest.negatives() if r.pool not in algos], rng)
    train, test = [], []
    for algo in algos:
        pos = _shuffled(manifest.positives(algo), rng)
        neg = _draw(_shuffled(manifest.negatives(algo), rng), spare, len(pos), algo)
        n_test = int(round(test_fraction * len(pos)))
        test += [r.id for r in pos[:n_test] + neg[:n_test]]
        train += [r.id for r in pos[n_test:] + neg[n_test:]]
    return SplitPlan(None, train, test, seed)


def _stratified(records: list[SampleRecord], fraction: float, rng: DetRng) -> list[str]:
    strata: dict[tuple[int, str], list[SampleRecord]] = {}
    for r in records:
        strata.setdefault((r.label, r.group), []).append(r)
    keep = set()
    for key in sorted(strata):
        members = _shuffled(strata[key], rng)
        n = max(1, int(fraction * len(members) + 1e-9))
        keep.update(r.id for r in members[:n])
    # preserve the caller's ordering
    return [r.id for r in records if r.id in keep]


def subsample_fraction(source, fraction: float, seed: int = 0, manifest: DatasetManifest | None = None):
    """Keep ``floor(fraction * n)`` (at least one) of every (label, algorithm) stratum.

    ``source`` is either a :class:`DatasetManifest`, which yields a reduced
    manifest, or a :class:`SplitPlan` plus its ``manifest``, which yields a
    plan with a reduced training list and the same test list. Negatives are
    stratified by the pool they are matched to.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    rng = DetRng(seed)
    if isinstance(source, DatasetManifest):
        return source.subset(_stratified(source.records, fraction, rng))
    if manifest is None:
        raise ValueError("subsampling a SplitPlan needs its manifest")
    train = _stratified([manifest[i] for i in source.train_ids], fraction, rng)
    return SplitPlan(source.held_out, train, list(source.test_ids), source.seed)


def ablate_algorithms(manifest: DatasetManifest, removed) -> DatasetManifest:
    """Manifest view without the removed algorithms' positives and their matched negatives."""
    removed = {a.lower() for a in removed}
    algos = manifest.algorithms()
    for a in sorted(removed):
        if a not in algos:
            raise UnknownAlgorithm(a)
    if removed and removed >= set(algos):
        raise EmptyTrainSet(f"removing {sorted(removed)} leaves no training positives")
    keep = [r.id for r in manifest.records if r.group not in removed]
    return manifest.subset(keep)


def check_plan(plan: SplitPlan, manifest: DatasetManifest) -> list[str]:
    """Return a list of violated split invariants (empty when the plan is valid)."""
    problems = []
    train = [manifest[i] for i in plan.train_ids]
    test = [manifest[i] for i in plan.test_ids]
    test_pos = [r for r in test if r.label == 1]
    train_pos = [r for r in train if r.label == 1]
    if plan.held_out is not None:
        if any(r.algorithm != plan.held_out for r in test_pos):
            problems.append("test positives include other algorithms")
        if any(r.algorithm == plan.held_out for r in train_pos):
            problems.append("train positives include the held-out algorithm")
    if len(test) - len(test_pos) != len(test_pos):
        problems.append("test negatives do not match test positives")
    if len(train) - len(train_pos) != len(train_pos):
        problems.append("train negatives do not match train positives")
    if set(plan.train_ids) & set(plan.test_ids):
        problems.append("train and test overlap")
    return problems
