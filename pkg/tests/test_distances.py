import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import lp_wasserstein, quad_integral, rand_measure
from laplace_deconv import calibration, quadrature
from laplace_deconv.distances import (
    contraction_discrepancy,
    coupling_bound,
    discrepancy_from_wasserstein,
    distance_report,
    hellinger,
    hellinger_squared,
    kl_divergences,
    lq_distance,
    nearest_atom_pairing,
    smoothing_bound,
    smoothing_constant,
    smoothing_schedule,
    wasserstein_1d,
)
from laplace_deconv.kernels import MixtureDensity, gaussian, laplace
from laplace_deconv.measures import make_discrete, point_mass, random_pair

L = laplace()


def mix(G, kern=L):
    return MixtureDensity(kern, G)


def shifted(theta):
    return mix(point_mass(0.0, 2.0)), mix(point_mass(theta, 2.0))


# --- Wasserstein


def test_wasserstein_examples():
    G = make_discrete([-0.3, 0.2, 0.9], [0.2, 0.5, 0.3], 1)
    for k in (1, 2, 4):
        assert wasserstein_1d(G, G, k) == 0
    assert wasserstein_1d(point_mass(0, 1), point_mass(1, 1), 1) == 1.0
    with pytest.raises(ValueError):
        wasserstein_1d(G, G, 0.5)


def test_wasserstein_matches_lp_ten_atoms():
    rng = np.random.default_rng(101)
    for _ in range(40):
        G = make_discrete(rng.uniform(-1, 1, 10), rng.dirichlet(np.ones(10)), 1)
        H = make_discrete(rng.uniform(-1, 1, 10), rng.dirichlet(np.ones(10)), 1)
        for k in (1, 2, 4):
            assert abs(wasserstein_1d(G, H, k) - lp_wasserstein(G, H, k)) < 1e-8


def test_wasserstein_cdf_formula_k1():
    # W_1 = integral |F - F'|
    rng = np.random.default_rng(102)
    for _ in range(20):
        G, H = rand_measure(rng), rand_measure(rng)
        pts = np.unique(np.concatenate([G.atoms, H.atoms]))
        ref = float(np.sum(np.abs(G.cdf(pts[:-1]) - H.cdf(pts[:-1])) * np.diff(pts)))
        assert wasserstein_1d(G, H, 1) == pytest.approx(ref, abs=1e-13)


@given(st.integers(0, 100_000))
def test_wasserstein_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    A, B, C = rand_measure(rng), rand_measure(rng), rand_measure(rng)
    for k in (1, 2, 4):
        ab, ba = wasserstein_1d(A, B, k), wasserstein_1d(B, A, k)
        assert abs(ab - ba) < 1e-12
        assert ab <= wasserstein_1d(A, C, k) + wasserstein_1d(C, B, k) + 1e-10
        assert ab >= 0
    assert wasserstein_1d(A, B, 1) <= wasserstein_1d(A, B, 2) + 1e-12 <= wasserstein_1d(A, B, 4) + 2e-12


# --- coupling bound


def test_coupling_bound_examples():
    G = make_discrete([-0.5, 0.1, 0.7], [0.2, 0.3, 0.5], 1)
    ident = [(i, i) for i in range(3)]
    assert coupling_bound(G, G, ident, 1, 2) == 0
    for x, y in [(-0.3, 0.4), (0.9, -1.0)]:
        b = coupling_bound(point_mass(x, 1), point_mass(y, 1), [(0, 0)], 2, 2)
        assert b == pytest.approx(abs(x - y)) and b == pytest.approx(wasserstein_1d(point_mass(x, 1), point_mass(y, 1), 2))


def test_coupling_bound_rejects_non_bijection():
    G = make_discrete([0, 0.5], [0.5, 0.5], 1)
    with pytest.raises(ValueError):
        coupling_bound(G, G, [(0, 0), (1, 0)], 1, 2)
    with pytest.raises(ValueError):
        coupling_bound(G, point_mass(0, 1), [(0, 0)], 1, 2)


def test_coupling_bound_dominates_lp():
    rng = np.random.default_rng(103)
    for _ in range(100):
        G, H = rand_measure(rng, 8), rand_measure(rng, 8)
        Gp, Hp, pairs = nearest_atom_pairing(G, H)
        for k in (1, 2):
            assert coupling_bound(Gp, Hp, pairs, k, 2.0) >= lp_wasserstein(G, H, k) - 1e-10


# --- Hellinger


def test_hellinger_identity_and_range():
    rng = np.random.default_rng(104)
    G = rand_measure(rng)
    assert hellinger(mix(G), mix(G)) == 0
    far = hellinger(mix(point_mass(-1, 1)), mix(point_mass(1, 1)))
    assert 0 < far <= math.sqrt(2)


@pytest.mark.parametrize("theta", [0.1, 0.5, 1.0, 2.0])
def test_hellinger_shift_closed_form(theta):
    p, q = shifted(theta)
    closed = 2 - 2 * math.exp(-theta / 2) * (1 + theta / 2)
    assert abs(hellinger_squared(p, q) - closed) < 1e-8
    assert hellinger_squared(p, q) <= 2 * theta**2
    # and the sharper theta/2 bound used by the mixture nets
    assert hellinger(p, q) <= theta / 2


def test_hellinger_shift_one():
    assert hellinger_squared(*shifted(1.0)) == pytest.approx(2 - 3 * math.exp(-0.5), abs=1e-12)
    assert 2 - 3 * math.exp(-0.5) == pytest.approx(0.18041, abs=1e-5)


def test_hellinger_matches_quadpack():
    rng = np.random.default_rng(105)
    for kern in (L, gaussian(0.5)):
        G, H = rand_measure(rng), rand_measure(rng)
        p, q = mix(G, kern), mix(H, kern)
        lo, hi = p.window()
        ref = quad_integral(
            lambda x: (math.sqrt(p(x)) - math.sqrt(q(x))) ** 2, lo, hi, np.concatenate([G.atoms, H.atoms])
        )
        assert hellinger_squared(p, q) == pytest.approx(ref, abs=1e-10)


# --- L_q


@pytest.mark.parametrize("order", [1.0, 2.0, 3.0, math.inf])
def test_lq_zero_on_identity(order):
    G = rand_measure(np.random.default_rng(106))
    assert lq_distance(mix(G), mix(G), order) == 0


@pytest.mark.parametrize("order", [1.0, 1.5, 2.0, 4.0])
def test_lq_matches_quadpack(order):
    rng = np.random.default_rng(107)
    G, H = rand_measure(rng), rand_measure(rng)
    p, q = mix(G), mix(H)
    lo, hi = p.window()
    ref = quad_integral(lambda x: abs(p(x) - q(x)) ** order, lo, hi, np.concatenate([G.atoms, H.atoms]))
    assert lq_distance(p, q, order) == pytest.approx(ref ** (1 / order), rel=1e-7)


def test_linf_matches_dense_grid():
    rng = np.random.default_rng(108)
    for _ in range(5):
        G, H = rand_measure(rng), rand_measure(rng)
        p, q = mix(G), mix(H)
        x = np.concatenate([np.linspace(-6, 6, 600001), G.atoms, H.atoms])
        dense = np.max(np.abs(p(x) - q(x)))
        val = lq_distance(p, q, math.inf)
        assert val >= dense - 1e-12 and val == pytest.approx(dense, rel=1e-6)


@pytest.mark.parametrize("order", [1.0, 2.0, 3.0, math.inf])
@pytest.mark.parametrize("theta", [0.05, 0.3, 1.0])
def test_lq_shift_bound(order, theta):
    p, q = shifted(theta)
    assert lq_distance(p, q, order) <= L.derivative_lq_norm(order) * theta + 1e-12
    assert L.derivative_lq_norm(1.0) == pytest.approx(1.0)


def test_hellinger_l1_sandwich():
    rng = np.random.default_rng(109)
    for _ in range(50):
        G, H = random_pair(rng)
        p, q = mix(G), mix(H)
        h = hellinger(p, q)
        l1 = lq_distance(p, q, 1.0)
        assert h**2 <= l1 + 1e-10 and l1 <= 2 * h + 1e-10


def test_l2_le_hellinger_times_sup():
    rng = np.random.default_rng(110)
    for _ in range(50):
        G, H = random_pair(rng)
        p, q = mix(G), mix(H)
        assert lq_distance(p, q, 2.0) <= 2 * math.sqrt(0.5) * hellinger(p, q) + 1e-10


def test_lq_rejects_small_order():
    G = point_mass(0, 1)
    with pytest.raises(ValueError):
        lq_distance(mix(G), mix(G), 0.5)


# --- KL


def test_kl_identity():
    G = rand_measure(np.random.default_rng(111))
    K, K2 = kl_divergences(mix(G), mix(G))
    assert K == 0 and K2 == 0


def test_kl_rejects_mismatched_support():
    with pytest.raises(ValueError, match="halfwidth"):
        kl_divergences(mix(point_mass(0, 1)), mix(point_mass(0, 2)))


def test_kl_shift_closed_form():
    # K(f, f(. - t)) = e^{-t} + t - 1 for the Laplace kernel
    for t in (0.2, 1.0):
        p, q = shifted(t)
        K, _ = kl_divergences(p, q)
        assert K == pytest.approx(math.exp(-t) + t - 1, abs=1e-10)


def test_log_ratio_bounded_by_2a():
    rng = np.random.default_rng(112)
    for a in (0.5, 1.0, 2.0):
        for _ in range(10):
            G, H = rand_measure(rng, a=a), rand_measure(rng, a=a)
            x = np.linspace(-a - 40, a + 40, 1000)
            assert np.all(np.log(mix(G)(x) / mix(H)(x)) <= 2 * a + 1e-12)


def test_kl_finite_and_nonnegative():
    rng = np.random.default_rng(113)
    for _ in range(20):
        G, H = random_pair(rng)
        K, K2 = kl_divergences(mix(G), mix(H))
        assert np.isfinite(K) and np.isfinite(K2) and K >= 0 and K2 >= 0


# --- smoothing bound


def test_smoothing_zero():
    G = rand_measure(np.random.default_rng(114))
    assert smoothing_bound(mix(G), mix(G), 1, 2)[0] == 0


def test_smoothing_schedule_values():
    eps, k, beta = 1e-3, 1.0, 2.0
    bound, M, delta = smoothing_schedule(eps, k, beta)
    Ck = 2 * math.exp(1.5)
    assert M == pytest.approx(k / (k + beta) * math.log(Ck / eps), rel=1e-15)
    assert delta == pytest.approx((M**1.5 * eps) ** (1 / 3), rel=1e-15)
    assert bound == pytest.approx(M**1.5 * eps * delta**-2 + math.exp(-M) + delta, rel=1e-15)


@pytest.mark.parametrize("k", [1.0, 2.0, 3.0])
def test_smoothing_constant_monotone(k):
    Ck = smoothing_constant(k)
    e = np.linspace(1e-9, 2, 200001)
    g = e * np.log(Ck / e) ** (k + 0.5)
    assert np.all(np.diff(g) > 0)


def test_smoothing_slope():
    eps = np.logspace(-2, -6, 9)
    vals = np.array([smoothing_schedule(e, 1.0, 2.0)[0] for e in eps])
    slope = np.polyfit(np.log(eps), np.log(vals), 1)[0]
    assert abs(slope - 1 / 3) <= 0.05


def test_smoothing_rejects_supersmooth():
    G = point_mass(0, 1)
    with pytest.raises(ValueError, match="cf"):
        smoothing_bound(mix(G, gaussian(1.0)), mix(G, gaussian(1.0)), 1, 2)
    with pytest.raises(ValueError):
        smoothing_bound(mix(G), mix(G), 1, 1.0)


def test_smoothing_frozen_constant_fresh_pairs():
    c = calibration.constant(calibration.SMOOTHING_W1)
    rng = np.random.default_rng(115)
    for _ in range(50):
        G, H = random_pair(rng)
        bound, _, _ = smoothing_bound(mix(G), mix(H), 1.0, 2.0)
        assert c * bound >= wasserstein_1d(G, H, 1.0)


# --- discrepancy


def test_discrepancy_examples():
    G = rand_measure(np.random.default_rng(116))
    assert contraction_discrepancy(mix(G), mix(G), 1) == 0
    d = discrepancy_from_wasserstein(0.1, 1)
    assert d == pytest.approx(1e-3 * math.log(10) ** -1.5, rel=1e-14)
    assert d == pytest.approx(2.8620e-4, rel=1e-4)
    with pytest.raises(ValueError):
        discrepancy_from_wasserstein(0.4, 1)


def test_discrepancy_monotone_along_translation():
    G = make_discrete([-0.2, 0.1], [0.4, 0.6], 1)
    vals = []
    for t in np.linspace(0.001, 0.3, 40):
        H = make_discrete(G.atoms + t, G.weights, 1)
        vals.append(contraction_discrepancy(mix(G), mix(H), 1))
    assert np.all(np.diff(vals) > 0)


# --- report


def test_distance_report_tags():
    G, H = point_mass(0, 1), point_mass(1, 1)
    assert distance_report("w1", G, H, L).value == 1.0
    assert distance_report("W2", G, H, L).method == "quantile"
    assert distance_report("hellinger", G, H, L).method == "quadrature"
    assert distance_report("l2", G, H, L).value == pytest.approx(lq_distance(mix(G), mix(H), 2))
    assert distance_report("linf", G, H, L).value > 0
    assert distance_report("kl", G, H, L).value > 0
    assert distance_report("k2", G, H, L).value > 0
    H2 = point_mass(0.1, 1)
    assert distance_report("d1", G, H2, L).value == pytest.approx(discrepancy_from_wasserstein(0.1, 1))
    with pytest.raises(ValueError):
        distance_report("zz", G, H, L)


def test_quadrature_failure_reports_partial_value():
    pieces = quadrature.make_pieces([], 0.0, 1.0, 1.0)
    with pytest.raises(quadrature.QuadratureError) as exc:
        quadrature.integrate_pieces(lambda x: np.where(x > 0.5, 1e12, 0.0) * np.sin(1e5 * x), pieces, max_rounds=2)
    assert np.isfinite(exc.value.value) and exc.value.error > quadrature.FAIL_TOL
