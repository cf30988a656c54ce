import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tvcs import structure as st

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_jumpset(rng, n, n_jumps=None):
    if n_jumps is None:
        n_jumps = int(rng.integers(1, max(2, n // 4)))
    jumps = np.sort(rng.choice(np.arange(1, n), size=n_jumps, replace=False))
    return st.JumpSet(n, tuple(jumps.tolist()))


def staircase(rng, js):
    """Piecewise-constant signal on ``js`` whose every jump is nonzero."""
    vals = np.cumsum(rng.choice([-1, 1], js.n_blocks) * rng.uniform(0.5, 2.0, js.n_blocks))
    return js.signal(vals)


def random_blocky_image(rng, n, n_rects=4):
    x = np.zeros((n, n))
    for _ in range(n_rects):
        a, b = np.sort(rng.integers(0, n, 2))
        c, d = np.sort(rng.integers(0, n, 2))
        x[a:b + 1, c:d + 1] += rng.uniform(0.5, 1.5)
    return np.round(x, 12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ------------------------------------------------------- acceptance ledger

ACCEPTANCE = {}


class criterion:
    """Record one part of an acceptance criterion as PASS or FAIL.

    The outcome is printed immediately and gathered for the terminal
    summary; exceptions propagate so pytest reports them as usual.
    """

    def __init__(self, number, part):
        self.number, self.part = number, part

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        ACCEPTANCE.setdefault(self.number, []).append((self.part, ok))
        print(f"CRITERION {self.number} [{self.part}]: {'PASS' if ok else 'FAIL'}")
        return False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p for _, p in parts)
        failed = ", ".join(name for name, p in parts if not p)
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(line + (f" (failing: {failed})" if failed else ""))
