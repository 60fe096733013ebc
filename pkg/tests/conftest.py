import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qrphase.pipeline import SweepConfig, run_experiment


def _slice_cfg(delta, mode, out_dir, cache_dir, **overrides):
    base = dict(L=12, delta_list=[delta], mode=mode,
                out_dir=str(out_dir), cache_dir=str(cache_dir))
    base.update(overrides)
    return SweepConfig(**base)


@pytest.fixture(scope="session")
def acceptance_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def slice05(acceptance_dir):
    """Two-phase slice (delta=0.5, DTC) with wall-clock timing attached."""
    cfg = _slice_cfg(0.5, "DTC", acceptance_dir / "d05", acceptance_dir / "cache05")
    t0 = time.time()
    bundle = run_experiment(cfg)
    bundle.elapsed_seconds = time.time() - t0
    return bundle


@pytest.fixture(scope="session")
def slice05_identity(acceptance_dir):
    cfg = _slice_cfg(0.5, "IDENTITY", acceptance_dir / "d05_id",
                     acceptance_dir / "cache05")
    return run_experiment(cfg)


@pytest.fixture(scope="session")
def slice30(acceptance_dir):
    cfg = _slice_cfg(3.0, "DTC", acceptance_dir / "d30", acceptance_dir / "cache30")
    return run_experiment(cfg)


@pytest.fixture(scope="session")
def slice30_identity(acceptance_dir):
    cfg = _slice_cfg(3.0, "IDENTITY", acceptance_dir / "d30_id",
                     acceptance_dir / "cache30")
    return run_experiment(cfg)


@pytest.fixture(scope="session")
def slice30_thermal(acceptance_dir):
    cfg = _slice_cfg(3.0, "THERMAL", acceptance_dir / "d30_th",
                     acceptance_dir / "cache30")
    return run_experiment(cfg)
