import numpy as np
import pytest
from hypothesis import settings

from impstab import _kernels as K

settings.register_profile("impstab", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("impstab")


def assert_same_roots(a, b, rtol=1e-6):
    """Multisets equal up to ``rtol * max(1, |z|)`` per root."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    assert a.size == b.size, f"sizes differ: {a.size} vs {b.size}\n{np.sort_complex(a)}\n{np.sort_complex(b)}"
    ia, ib = K.greedy_match_numpy(a, b, rtol)
    assert ia.size == a.size, f"unmatched roots:\n{np.sort_complex(a)}\n{np.sort_complex(b)}"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_pair(rng, max_order=8):
    """Stable grid impedance and converter admittance with a random loop gain.

    The gain is log-uniform over three decades so that roughly half of the
    closed loops are unstable.
    """
    from impstab.statespace import StateSpace, random_stable

    zg = random_stable(rng, int(rng.integers(1, max_order + 1)))
    yc = random_stable(rng, int(rng.integers(1, max_order + 1)))
    k = 10 ** rng.uniform(-1.5, 1.5)
    yc = StateSpace(yc.A, yc.B, k * yc.C, k * yc.D)
    return zg, yc


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion
# ---------------------------------------------------------------------------

ACCEPTANCE_CRITERIA = range(1, 11)
_acceptance_results = {}


@pytest.fixture
def record():
    """``record(n, ok, detail)`` stores and prints the outcome of criterion ``n``."""
    def _record(n, ok, detail=""):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _acceptance_results[n] = line
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for n in ACCEPTANCE_CRITERIA:
        terminalreporter.write_line(_acceptance_results.get(n, f"criterion {n}: not run"))
