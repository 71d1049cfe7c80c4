import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus():
    from ecgssl.synth import SyntheticSpec, generate_synthetic_corpus

    return generate_synthetic_corpus(SyntheticSpec(n_patients_per_class=5, duration_s=60, seed=7))


@pytest.fixture(scope="session")
def small_table(small_corpus):
    from ecgssl.sigproc import build_segment_table

    return build_segment_table(small_corpus)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(LINES):
            terminalreporter.write_line(line)
