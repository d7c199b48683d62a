"""Dataset generation and the manifest format.

``manifest.json`` layout::

    {"version": 1,
     "recipe": {...generation recipe, including the global seed...},
     "records": [{"id", "path", "label", "algorithm", "family", "seed",
                  "pool", "payload"}, ...]}

``path`` is relative to the manifest directory. Clean records carry
``algorithm == "clean"`` and ``pool`` names the algorithm whose positives
they are matched to. Positives carry their payload as a 32-char bit string.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, ImageIOError, UnknownAlgorithm
from ..image_core import RasterImage, load_png, save_png
from ..prng import DetRng, parse_seed
from ..watermark import ALGORITHMS, EmbedConfig, Payload32, embed
from .carriers import FAMILIES, directory_carriers, make_carrier

MANIFEST_VERSION = 1
CLEAN = "clean"


@dataclass(frozen=True)
class SampleRecord:
    id: str
    path: str
    label: int
    algorithm: str
    family: str
    seed: int
    pool: str | None = None
    payload: str | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"{self.id}: label must be 0 or 1")
        if (self.label == 1) != (self.algorithm != CLEAN):
            raise ValueError(f"{self.id}: label {self.label} inconsistent with algorithm {self.algorithm!r}")

    @property
    def group(self) -> str:
        """Algorithm tag for positives, pool tag for negatives."""
        return self.algorithm if self.label == 1 else (self.pool or CLEAN)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GenerationRecipe:
    counts: dict[str, int]
    size: int = 64
    families: tuple[str, ...] = ("gradient", "checker", "blobs")
    seed: int = 0
    embed: dict[str, dict] = field(default_factory=dict)
    carrier_dir: str | None = None

    def __post_init__(self):
        self.counts = {k.lower(): int(v) for k, v in self.counts.items()}
        for algo in list(self.counts) + list(self.embed):
            if algo not in ALGORITHMS:
                raise UnknownAlgorithm(algo)
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be non-negative")
        if self.size < 8:
            raise ValueError("image size must be at least 8")
        self.families = tuple(self.families)
        bad = [f for f in self.families if f not in FAMILIES]
        if bad or not self.families:
            raise ValueError(f"unknown carrier families {bad}; choose from {FAMILIES}")
        self.seed = parse_seed(self.seed)

    def embed_config(self, algo: str, seed: int) -> EmbedConfig:
        return EmbedConfig.from_dict({**self.embed.get(algo, {}), "algo": algo, "seed": seed})

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts), "size": self.size, "families": list(self.families),
            "seed": self.seed, "embed": {k: dict(v) for k, v in self.embed.items()},
            "carrier_dir": self.carrier_dir,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GenerationRecipe":
        known = {"counts", "size", "families", "seed", "embed", "carrier_dir"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown recipe keys: {sorted(unknown)}")
        return cls(**obj)


class DatasetManifest:
    def __init__(self, records: list[SampleRecord], recipe: dict, root=None, version: int = MANIFEST_VERSION):
        self.records = list(records)
        self.recipe = dict(recipe)
        self.root = Path(root) if root is not None else None
        self.version = version
        self._by_id = {r.id: r for r in self.records}
        if len(self._by_id) != len(self.records):
            raise FormatError("manifest ids are not unique")

    def __len__(self):
        return len(self.records)

    def __getitem__(self, rid: str) -> SampleRecord:
        return self._by_id[rid]

    def __contains__(self, rid: str) -> bool:
        return rid in self._by_id

    def algorithms(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.label == 1 and r.algorithm not in seen:
                seen.append(r.algorithm)
        return seen

    def positives(self, algo: str | None = None) -> list[SampleRecord]:
        return [r for r in self.records if r.label == 1 and (algo is None or r.algorithm == algo)]

    def negatives(self, pool: str | None = None) -> list[SampleRecord]:
        return [r for r in self.records if r.label == 0 and (pool is None or r.pool == pool)]

    def check(self):
        """Raise FormatError unless every algorithm has a matched clean pool."""
        for algo in self.algorithms():
            n_pos, n_neg = len(self.positives(algo)), len(self.negatives(algo))
            if n_pos != n_neg:
                raise FormatError(f"{algo}: {n_pos} positives but {n_neg} matched negatives")

    def subset(self, ids) -> "DatasetManifest":
        keep = set(ids)
        return DatasetManifest([r for r in self.records if r.id in keep], self.recipe, self.root, self.version)

    def to_dict(self) -> dict:
        return {"version": self.version, "recipe": self.recipe,
                "records": [r.to_dict() for r in self.records]}

    def save(self, path) -> None:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise ImageIOError(f"cannot write manifest {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        try:
            obj = json.loads(path.read_text())
        except OSError as exc:
            raise ImageIOError(f"cannot read manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        if obj.get("version") != MANIFEST_VERSION:
            raise FormatError(f"{path}: unsupported manifest version {obj.get('version')!r}")
        records = [SampleRecord(**r) for r in obj["records"]]
        return cls(records, obj.get("recipe", {}), root=path.parent, version=obj["version"])

    def image_path(self, rec: SampleRecord) -> Path:
        return (self.root or Path(".")) / rec.path

    def load_image(self, rec: SampleRecord) -> RasterImage:
        return load_png(self.image_path(rec))


def generate_dataset(recipe: GenerationRecipe, out_dir) -> DatasetManifest:
    """Write positives, matched clean images and ``manifest.json`` under ``out_dir``.

    Sample ``k`` (counted across algorithms in recipe order) uses seed
    ``global ^ 2k`` for the positive and ``global ^ (2k+1)`` for its matched
    negative. The positive's seed also keys its embedder.
    """
    out = Path(out_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ImageIOError(f"cannot create {out}: {exc}") from exc
    size = recipe.size
    user = directory_carriers(recipe.carrier_dir, size, size) if recipe.carrier_dir else None
    if user is not None and not user:
        raise ImageIOError(f"no PNG files in {recipe.carrier_dir}")

    def carrier(k: int, rng: DetRng) -> tuple[RasterImage, str]:
        if user:
            return user[k % len(user)], "user"
        family = recipe.families[(k // 2) % len(recipe.families)]
        return make_carrier(family, rng, size, size), family

    records = []
    k = 0
    for algo, n in recipe.counts.items():
        for j in range(n):
            pos_seed, neg_seed = recipe.seed ^ (2 * k), recipe.seed ^ (2 * k + 1)
            rng = DetRng(pos_seed)
            img, family = carrier(2 * k, rng)
            payload = Payload32.random(rng)
            marked = embed(recipe.embed_config(algo, pos_seed), img, payload)
            rid = f"{algo}_{j:05d}"
            save_png(marked, out / "images" / f"{rid}.png")
            records.append(SampleRecord(rid, f"images/{rid}.png", 1, algo, family, pos_seed,
                                        payload=payload.to_bitstring()))

            clean, family = carrier(2 * k + 1, DetRng(neg_seed))
            cid = f"clean_{algo}_{j:05d}"
            save_png(clean, out / "images" / f"{cid}.png")
            records.append(SampleRecord(cid, f"images/{cid}.png", 0, CLEAN, family, neg_seed, pool=algo))
            k += 1
    manifest = DatasetManifest(records, recipe.to_dict(), root=out)
    manifest.save(out / "manifest.json")
    return manifest


class ImageCache:
    """Loads manifest images once and serves network-ready float32 CHW arrays."""

    def __init__(self, manifest: DatasetManifest, size: int):
        self.manifest = manifest
        self.size = size
        self._arrays: dict[str, np.ndarray] = {}

    def array(self, rid: str) -> np.ndarray:
        from ..fsnet import image_to_array
        a = self._arrays.get(rid)
        if a is None:
            a = image_to_array(self.manifest.load_image(self.manifest[rid]), self.size)
            self._arrays[rid] = a
        return a

    def batch(self, ids) -> tuple[np.ndarray, np.ndarray]:
        x = np.stack([self.array(i) for i in ids])
        y = np.array([self.manifest[i].label for i in ids], dtype=np.int64)
        return x, y
