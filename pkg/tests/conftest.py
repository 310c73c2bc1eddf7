import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_dataset():
    from voxgrad.geometry import synth_dataset

    return synth_dataset(per_class=3, resolution=8, seed=5, n_points=32)


@pytest.fixture(scope="session")
def tiny_voxnet():
    from voxgrad.models import build_model

    return build_model("voxnet", 5, seed=3, resolution=8, channels=(2, 3), hidden=6)


@pytest.fixture(scope="session")
def tiny_pointnet():
    from voxgrad.models import build_model

    return build_model("pointnet", 5, seed=3, num_points=32, point_features=(4, 6), hidden=5)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"acceptance criterion {n}: {'PASS' if ok else 'FAIL'}: {detail}")
