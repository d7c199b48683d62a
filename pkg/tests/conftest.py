import numpy as np
import pytest

from freqshield.image_core import RasterImage


def random_image(seed: int, h: int = 64, w: int = 64) -> RasterImage:
    rng = np.random.default_rng(seed)
    return RasterImage(rng.integers(0, 256, (h, w, 3), dtype=np.uint8), "RGB")


def flat_image(value: int, h: int = 64, w: int = 64) -> RasterImage:
    return RasterImage(np.full((h, w, 3), value, dtype=np.uint8), "RGB")


@pytest.fixture
def rand_img():
    return random_image(0)


def synthetic_manifest(rng: np.random.Generator, algos=("dct", "dwt", "lsb", "patchwork"), min_algos=1):
    """Image-less manifest with random per-algorithm counts and matched clean pools."""
    from freqshield.harness import DatasetManifest, SampleRecord

    records = []
    chosen = [a for a in algos if rng.random() < 0.8]
    for a in algos:
        if len(chosen) < min_algos and a not in chosen:
            chosen.append(a)
    for algo in chosen:
        n = int(rng.integers(1, 30))
        extra = int(rng.integers(0, 4))
        for j in range(n):
            records.append(SampleRecord(f"{algo}_{j:05d}", "", 1, algo, "noise", j))
        for j in range(n + extra):
            records.append(SampleRecord(f"clean_{algo}_{j:05d}", "", 0, "clean", "noise", j, pool=algo))
    return DatasetManifest(records, {})


# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
