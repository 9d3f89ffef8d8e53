import numpy as np
import pytest
from scipy import stats

from restartkit import DiscreteFinite


def point_mass(x):
    return DiscreteFinite(((x, 1.0),))


def chi2_pvalue(observed, probs):
    """Chi-square goodness of fit; bins with small expectation are pooled into the last bin."""
    observed = np.asarray(observed, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = observed.sum()
    exp = probs * n
    keep = np.cumsum(exp[::-1])[::-1] >= 5
    k = max(int(keep.sum()), 2)
    obs_p = np.append(observed[: k - 1], observed[k - 1:].sum())
    exp_p = np.append(exp[: k - 1], n - exp[: k - 1].sum())
    return stats.chisquare(obs_p, exp_p).pvalue


@pytest.fixture
def pm():
    return point_mass


# sleeps this long when the flaky script "hangs"; the odd value makes
# leftover processes easy to find in the process table
HANG_SECONDS = "10.0137"

FLAKY_TEMPLATE = """#!/bin/sh
r=$(od -An -N1 -tu1 /dev/urandom)
if [ $((r % 4)) -eq 0 ]; then
  sleep 0.05
  exit 0
fi
sleep {hang}
"""


@pytest.fixture
def flaky_script(tmp_path):
    path = tmp_path / "flaky.sh"
    path.write_text(FLAKY_TEMPLATE.format(hang=HANG_SECONDS))
    path.chmod(0o755)
    return path


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
