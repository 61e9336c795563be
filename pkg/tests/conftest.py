import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def flipped_population(n_benign=7, n_flipped=3, d=50, noise=0.01, seed=0):
    """Near-identical benign vectors plus sign-flipped copies (flipped last)."""
    r = np.random.default_rng(seed)
    base = r.standard_normal(d)
    benign = [base + noise * r.standard_normal(d) for _ in range(n_benign)]
    flipped = [-(base + noise * r.standard_normal(d)) for _ in range(n_flipped)]
    return benign + flipped


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
