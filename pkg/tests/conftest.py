import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lehybrid.censor import complete_sample, generate_sample, parse_scheme  # noqa: E402
from lehybrid.datasets import guinea_pigs  # noqa: E402
from lehybrid.dist import Params  # noqa: E402

TRUTH = Params(1.5, 0.75)


@pytest.fixture(scope="session")
def guinea():
    return guinea_pigs()


@pytest.fixture(scope="session")
def guinea_sample(guinea):
    return complete_sample(guinea)


def draw(scheme_text, n, m, T, seed, min_D=2, truth=TRUTH):
    """First sample with at least ``min_D`` failures from a seeded stream."""
    scheme = parse_scheme(scheme_text, n, m, T)
    rng = np.random.default_rng(seed)
    while True:
        s = generate_sample(scheme, truth, rng)
        if s.D >= min_D:
            return s


def pytest_terminal_summary(terminalreporter):
    """Collect the one-line verdicts recorded by the acceptance tests."""
    lines = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            for name, value in getattr(rep, "user_properties", []):
                if name == "acceptance":
                    lines.append(value)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
