import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from pmelab.dataset import Dataset, compute_standardization  # noqa: E402
from pmelab.shapegen import default_config  # noqa: E402


def affine_dataset(S=512, M=6, n_g=30, seed=0):
    """Dataset from the affine generator g = B u + g0 (rank M)."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n_g, M))
    U = rng.uniform(size=(S, M))
    D = U @ B.T
    return Dataset(U=U, D=D, g0=rng.standard_normal(n_g), stats=compute_standardization(D),
                   u_mean=U.mean(axis=0), manifest={"dataset_hash": "affine"}), B


@pytest.fixture
def affine():
    return affine_dataset()


@pytest.fixture(scope="session")
def small_cfg():
    """Coarse discretization of the default wing: n_g = 3 * 12 * 6 = 216."""
    return default_config(pts_per_section=12, n_span=6)


_ACCEPTANCE = pytest.StashKey()


@pytest.fixture
def criterion(request):
    """``criterion(k, ok, detail)`` records one acceptance line and asserts ``ok``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(k, ok, detail):
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[k] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
