import numpy as np
import pytest
from hypothesis import settings, HealthCheck

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_walk_loop(rng, n, start=(0, 0)):
    """A closed lattice walk of length 2n: n random steps and their reversal in random order."""
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    half = [steps[i] for i in rng.integers(0, 4, n)]
    seq = half + [(-a, -b) for a, b in half]
    seq = [seq[i] for i in rng.permutation(len(seq))]
    v = start
    out = [v]
    for a, b in seq:
        v = (v[0] + a, v[1] + b)
        out.append(v)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def poisson_gof(counts, mean, min_expected=5.0):
    """Chi-square p-value of integer counts against Poisson(mean), pooling sparse bins."""
    from scipy import stats

    counts = np.asarray(counts)
    n = len(counts)
    kmax = int(counts.max()) + 1
    probs = stats.poisson.pmf(np.arange(kmax), mean)
    obs = np.bincount(counts, minlength=kmax)[:kmax].astype(float)
    probs = np.append(probs, max(0.0, 1.0 - probs.sum()))
    obs = np.append(obs, 0.0)
    # pool bins from the right until expectations are large enough
    e_bins, o_bins = [], []
    e_acc = o_acc = 0.0
    for p, o in zip(probs[::-1], obs[::-1]):
        e_acc += n * p
        o_acc += o
        if e_acc >= min_expected:
            e_bins.append(e_acc)
            o_bins.append(o_acc)
            e_acc = o_acc = 0.0
    if e_bins:
        e_bins[-1] += e_acc
        o_bins[-1] += o_acc
    if len(e_bins) < 2:
        return 1.0
    return float(stats.chisquare(o_bins, e_bins).pvalue)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, ok, detail)."""
    def rec(n, ok, detail=""):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        _CRITERIA.append((n, line))
        print(line)
        return ok
    return rec


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA, key=lambda t: t[0]):
            terminalreporter.write_line(line)
