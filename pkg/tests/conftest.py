import json
import time

import numpy as np
import pytest

from sonoangle.config import PipelineConfig
from sonoangle.phantom import PhantomConfig, speckle_canvas


def small_config(**kw):
    """A 128x128, three-cycle phantom trial that runs in a few seconds."""
    base = dict(
        width_px=128,
        height_px=128,
        n_speckles=400,
        amplitudes_deg=(10.0, 20.0),
        n_cycles=3,
        trim_head_cycles=0,
        trim_tail_cycles=0,
        period_s=2.0,
    )
    base.update(kw)
    return PipelineConfig(**base)


@pytest.fixture
def speckle():
    """Noise-free float speckle canvas (128 rows x 192 columns) in [0, 1]."""
    cfg = PhantomConfig(width_px=128, height_px=128, n_speckles=600, rng_seed=7)
    return speckle_canvas(cfg)


def quantize(img):
    return np.rint(np.clip(img, 0, 1) * 255).astype(np.uint8)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """The default seeded phantom trial, run once per session as a one-trial batch."""
    from sonoangle.pipeline import run_batch

    out = tmp_path_factory.mktemp("default_run")
    t0 = time.perf_counter()
    rows, failed = run_batch([PipelineConfig()], str(out))
    wall_s = time.perf_counter() - t0
    assert failed == 0, rows[0]["error"]
    with open(out / "trial_01" / "report.json") as fh:
        report = json.load(fh)
    return {"report": report, "out": out, "wall_s": wall_s}
