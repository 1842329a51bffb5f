import numpy as np
import pytest

from sawlab.lattice import STEPS


def random_saw(n_steps, rng, constraint="full", max_tries=100_000):
    """Rejection-sampled SAW (small n only): grow a random non-reversing walk, retry on collision."""
    for _ in range(max_tries):
        walk = [(0, 0, 0)]
        seen = {walk[0]}
        last = -1
        for _ in range(n_steps):
            if last < 0:
                j = rng.integers(6)
            else:
                j = rng.integers(5)
                j += j >= (last ^ 1)  # skip the immediate reversal
            last = j
            step = STEPS[j]
            site = tuple(int(c) for c in np.add(walk[-1], step))
            if site in seen or (constraint == "half" and site[2] < 1):
                break
            seen.add(site)
            walk.append(site)
        else:
            return np.array(walk, dtype=np.int64)
    raise RuntimeError("no SAW found")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance bookkeeping: criterion number -> (passed, detail)
ACCEPTANCE: dict = {}
_ACCEPTANCE_RAN = []


@pytest.fixture
def record():
    _ACCEPTANCE_RAN.append(True)

    def _record(n, ok, detail):
        ACCEPTANCE[n] = (bool(ok), detail)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RAN:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in range(1, 11):
        ok, detail = ACCEPTANCE.get(n, (False, "no result (errored or not run)"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
