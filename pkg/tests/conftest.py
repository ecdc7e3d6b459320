import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy import integrate, optimize

from laplace_deconv.measures import DiscreteMeasure, make_discrete

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def lp_wasserstein(G: DiscreteMeasure, H: DiscreteMeasure, k: float) -> float:
    """W_k by linear programming over the full coupling polytope."""
    m, n = len(G), len(H)
    cost = np.abs(G.atoms[:, None] - H.atoms[None, :]) ** k
    A = []
    for i in range(m):
        row = np.zeros((m, n))
        row[i, :] = 1
        A.append(row.ravel())
    for j in range(n):
        col = np.zeros((m, n))
        col[:, j] = 1
        A.append(col.ravel())
    b = np.concatenate([G.weights, H.weights])
    res = optimize.linprog(cost.ravel(), A_eq=np.array(A), b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return max(res.fun, 0.0) ** (1.0 / k)


def quad_integral(fn, lo, hi, breakpoints=()):
    """Reference integral with scipy's adaptive QUADPACK, split at breakpoints."""
    pts = np.unique(np.concatenate([[lo, hi], np.asarray(breakpoints, float)]))
    pts = pts[(pts >= lo) & (pts <= hi)]
    total = 0.0
    for u, v in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(fn, u, v, limit=200, epsabs=1e-13, epsrel=1e-12)
        total += val
    return total


def rand_measure(rng, max_atoms=12, a=1.0):
    m = int(rng.integers(1, max_atoms + 1))
    return make_discrete(rng.uniform(-a, a, m), rng.dirichlet(np.ones(m)), a)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
