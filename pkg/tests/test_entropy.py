import math

import numpy as np
import pytest

from laplace_deconv.distances import wasserstein_1d
from laplace_deconv.entropy import (
    LOG_SIZE_GUARD,
    ExplicitNet,
    NetSizeError,
    SimplexLattice,
    growth_exponent,
    measure_probes,
    mixture_log_scale,
    mixture_net,
    probes_for,
    simplex_net,
    simplex_probes,
    verify_cover,
    wasserstein_log_scale,
    wasserstein_net,
)
from laplace_deconv.kernels import gaussian, laplace
from laplace_deconv.measures import point_mass

L = laplace()


# --- lattice


def test_lattice_count_and_rounding():
    lat = SimplexLattice(3, 6)
    pts = lat.points()
    assert pts.shape[0] == math.comb(6 + 2, 2) == round(math.exp(lat.log_count()))
    assert np.allclose(pts.sum(axis=1), 1) and np.allclose(pts * 6, np.round(pts * 6))
    rng = np.random.default_rng(301)
    for p in rng.dirichlet(np.ones(3), 200):
        c = lat.round(p)
        assert c.sum() == 6 and np.all(c >= 0)
        # largest-remainder rounding is the l1-nearest lattice point
        d = np.abs(pts - p).sum(axis=1)
        assert np.abs(c / 6 - p).sum() == pytest.approx(d.min(), abs=1e-12)


# --- simplex nets


def test_simplex_n1():
    net = simplex_net(1, 0.3)
    elems = list(net.elements())
    assert len(elems) == 1 and np.array_equal(elems[0], np.ones(1))
    assert math.exp(net.log_size) == pytest.approx(1)


def test_simplex_n2_cover_10k():
    net = simplex_net(2, 0.5)
    rep = verify_cover(net, simplex_probes(np.random.default_rng(302), 2, 10_000))
    assert rep.passed and rep.max_distance <= 0.5


@pytest.mark.parametrize("N", [2, 3, 4])
@pytest.mark.parametrize("eps", [0.5, 0.25])
def test_simplex_size_bound(N, eps):
    net = simplex_net(N, eps)
    assert net.size <= (5 / eps) ** N * (1 + 1e-9)
    # every element lies on the simplex
    for e in net.elements():
        assert abs(e.sum() - 1) < 1e-12 and np.all(e >= 0)


def test_simplex_nearest_is_exhaustive():
    net = simplex_net(3, 0.25)
    rng = np.random.default_rng(303)
    pts = np.array(list(net.elements()))
    for p in simplex_probes(rng, 3, 300):
        _, d, _ = net.nearest(p)
        assert d == pytest.approx(np.abs(pts - p).sum(axis=1).min(), abs=1e-12)


def test_simplex_guard():
    with pytest.raises(NetSizeError):
        simplex_net(20, 0.01)
    with pytest.raises(ValueError):
        simplex_net(0, 0.5)
    with pytest.raises(ValueError):
        simplex_net(2, 1.5)


def test_cover_identity_and_negative_control():
    net = simplex_net(2, 0.5)
    elems = list(net.elements())
    rep = verify_cover(net, [elems[0]])
    assert rep.max_distance == 0
    # keep the first half of the elements: the far end of the simplex is uncovered
    kept = elems[: len(elems) // 2]
    assert len(kept) >= 1
    half = ExplicitNet("l1-simplex", 0.5, {}, math.log(len(kept)), items=kept)
    probes = simplex_probes(np.random.default_rng(304), 2, 1000)
    bad = verify_cover(half, probes)
    assert not bad.passed and bad.witnesses.size > 0
    assert np.all(bad.distances[bad.witnesses] > 0.5)


def test_cover_report_histogram():
    net = simplex_net(3, 0.5)
    rep = verify_cover(net, simplex_probes(np.random.default_rng(305), 3, 100))
    counts, edges = rep.histogram
    assert sum(counts) == 100 and len(edges) == 11


# --- Wasserstein nets


def test_wasserstein_trivial_net():
    net = wasserstein_net(1.0, 1.0, 2.5)
    assert net.log_size == 0
    probes = measure_probes(np.random.default_rng(306), 1.0, 20, 4)
    assert verify_cover(net, probes).passed


@pytest.mark.parametrize("k", [1.0, 2.0])
def test_wasserstein_cover(k):
    net = wasserstein_net(1.0, k, 0.4)
    assert net.radius == pytest.approx(0.8)
    rep = verify_cover(net, probes_for(net, np.random.default_rng(307), 200))
    assert rep.passed
    # the coupling certificate dominates the exact distance and stays within the radius
    assert np.all(rep.certified >= rep.distances - 1e-10)
    assert np.all(rep.certified <= net.radius + 1e-10)


def test_wasserstein_nearest_is_in_net():
    net = wasserstein_net(1.0, 1.0, 0.6)
    elems = list(net.elements())
    assert len(elems) == round(net.size)
    for probe in measure_probes(np.random.default_rng(308), 1.0, 20, 5):
        e, d, _ = net.nearest(probe)
        assert e in elems
        assert d == wasserstein_1d(probe, e, 1.0)


def test_wasserstein_count_bound_and_growth():
    eps = [0.4, 0.2, 0.1]
    sizes = []
    for e in eps:
        net = wasserstein_net(1.0, 1.0, e)
        assert net.log_size <= net.construction_params["log_count_bound"]
        sizes.append(net.log_size)
    gamma = growth_exponent(eps, sizes, wasserstein_log_scale(1.0))
    assert 0.8 <= gamma <= 1.2


def test_guard_at_enumeration_only():
    net = wasserstein_net(1.0, 1.0, 0.05)
    assert net.log_size > LOG_SIZE_GUARD
    with pytest.raises(NetSizeError):
        next(net.elements())
    # nearest-element search never enumerates
    probe = measure_probes(np.random.default_rng(309), 1.0, 1, 6)[0]
    _, d, cert = net.nearest(probe)
    assert d <= net.radius and cert <= net.radius + 1e-12


# --- mixture nets


@pytest.mark.parametrize("eps", [0.3, 0.2])
def test_mixture_hellinger_cover(eps):
    net = mixture_net(1.0, L, "hellinger", eps)
    rep = verify_cover(net, probes_for(net, np.random.default_rng(310), 60))
    assert rep.passed
    assert np.all(rep.certified >= rep.distances - 1e-9)


def test_mixture_single_atom_probe():
    net = mixture_net(1.0, L, "hellinger", 0.3)
    _, d, _ = net.nearest(point_mass(0.123, 1.0))
    assert d <= 0.3


@pytest.mark.parametrize("kern", [laplace(), gaussian(1.0)])
def test_mixture_lq_cover(kern):
    net = mixture_net(1.0, kern, "lq", 0.1, q=2.0)
    rep = verify_cover(net, probes_for(net, np.random.default_rng(311), 40))
    assert rep.passed


def test_mixture_growth_and_exponents_recorded():
    eps = [0.1, 0.05, 0.025]
    sizes = [mixture_net(1.0, L, "hellinger", e).log_size for e in eps]
    assert 0.5 <= growth_exponent(eps, sizes, mixture_log_scale(1.0)) <= 0.85
    params = mixture_net(1.0, L, "hellinger", 0.1).construction_params
    assert params["budget_exponent"] == pytest.approx(2 / 3) and params["displayed_exponent"] == pytest.approx(3 / 8)


def test_mixture_rejections():
    with pytest.raises(ValueError):
        mixture_net(1.0, gaussian(1.0), "hellinger", 0.2)
    with pytest.raises(ValueError):
        mixture_net(1.0, L, "tv", 0.2)
    net = mixture_net(1.0, L, "hellinger", 0.3)
    too_many = measure_probes(np.random.default_rng(312), 1.0, 1, net.n_support + 1)[0]
    with pytest.raises(ValueError):
        net.nearest(too_many)


def test_growth_exponent_exact_power():
    eps = np.array([0.4, 0.2, 0.1])
    sizes = (1 / eps) ** 0.9 * np.log(3 / eps)
    assert growth_exponent(eps, sizes, 3.0) == pytest.approx(0.9, abs=1e-12)
