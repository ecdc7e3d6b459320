"""Distances between mixing measures and between mixture densities."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import quadrature
from .kernels import LAPLACE, ORDINARY_SMOOTH, Kernel, MixtureDensity
from .measures import DiscreteMeasure, make_discrete

QUANTILE = "quantile"
QUADRATURE = "quadrature"
FOURIER = "fourier"
COUPLING_BOUND = "coupling-bound"
SMOOTHING_BOUND = "smoothing-bound"


@dataclass(frozen=True)
class DistanceReport:
    value: float
    method: str
    tolerance: float
    metric: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Wasserstein distances between discrete measures


def wasserstein_1d(G: DiscreteMeasure, H: DiscreteMeasure, k: float = 1.0) -> float:
    """W_k via the quantile coupling, integrated exactly over merged CDF levels."""
    if not k >= 1:
        raise ValueError(f"Wasserstein order must be >= 1, got {k}")
    cu = np.cumsum(G.weights)
    cv = np.cumsum(H.weights)
    levels = np.unique(np.concatenate([[0.0], cu[:-1], cv[:-1], [1.0]]))
    levels = levels[(levels >= 0.0) & (levels <= 1.0)]
    du = np.diff(levels)
    mid = 0.5 * (levels[:-1] + levels[1:])
    x = G.atoms[np.minimum(np.searchsorted(cu, mid, side="left"), len(G) - 1)]
    y = H.atoms[np.minimum(np.searchsorted(cv, mid, side="left"), len(H) - 1)]
    wk = float(np.dot(du, np.abs(x - y) ** k))
    return wk ** (1.0 / k)


def coupling_bound(
    G: DiscreteMeasure, H: DiscreteMeasure, pairing, k: float, diam: float
) -> float:
    """Upper bound on W_k(G, H) from an atom pairing.

    ``max rho + diam * ||p - p'||_1^{1/k}``, where the maximum runs over
    pairs that share mass; pairs with no common mass are paid for by the
    second term.
    """
    pairs = np.asarray(pairing, dtype=int).reshape(-1, 2)
    n = len(G)
    if len(H) != n or pairs.shape[0] != n:
        raise ValueError("pairing must be a bijection between atom index sets of equal size")
    if not (np.array_equal(np.sort(pairs[:, 0]), np.arange(n)) and np.array_equal(np.sort(pairs[:, 1]), np.arange(n))):
        raise ValueError("pairing is not a bijection")
    if not k >= 1:
        raise ValueError(f"Wasserstein order must be >= 1, got {k}")
    p = G.weights[pairs[:, 0]]
    q = H.weights[pairs[:, 1]]
    rho = np.abs(G.atoms[pairs[:, 0]] - H.atoms[pairs[:, 1]])
    shared = np.minimum(p, q) > 0
    move = float(rho[shared].max()) if shared.any() else 0.0
    l1 = float(np.abs(p - q).sum())
    return move + diam * l1 ** (1.0 / k)


def nearest_atom_pairing(G: DiscreteMeasure, H: DiscreteMeasure):
    """Pad both measures with zero-weight atoms and pair nearest atoms greedily.

    Returns ``(G_padded, H_padded, pairs)`` usable with :func:`coupling_bound`.
    Unmatched atoms are paired with a zero-weight copy of themselves.
    """
    dist = np.abs(G.atoms[:, None] - H.atoms[None, :])
    order = np.argsort(dist, axis=None, kind="stable")
    used_g = np.zeros(len(G), bool)
    used_h = np.zeros(len(H), bool)
    matches = []
    for flat in order:
        i, j = divmod(int(flat), len(H))
        if not used_g[i] and not used_h[j]:
            used_g[i] = used_h[j] = True
            matches.append((G.atoms[i], H.atoms[j]))
            if len(matches) == min(len(G), len(H)):
                break
    g_loc = list(G.atoms)
    g_w = list(G.weights)
    h_loc = list(H.atoms)
    h_w = list(H.weights)
    for i in np.flatnonzero(~used_g):
        matches.append((G.atoms[i], G.atoms[i]))
        h_loc.append(G.atoms[i])
        h_w.append(0.0)
    for j in np.flatnonzero(~used_h):
        matches.append((H.atoms[j], H.atoms[j]))
        g_loc.append(H.atoms[j])
        g_w.append(0.0)
    Gp = make_discrete(g_loc, g_w, G.a)
    Hp = make_discrete(h_loc, h_w, H.a)
    pairs = [
        (int(np.searchsorted(Gp.atoms, x)), int(np.searchsorted(Hp.atoms, y))) for x, y in matches
    ]
    return Gp, Hp, pairs


# ---------------------------------------------------------------------------
# distances between mixture densities by quadrature


def _pieces(p: MixtureDensity, q: MixtureDensity, extra=()) -> np.ndarray:
    lo = min(p.window()[0], q.window()[0])
    hi = max(p.window()[1], q.window()[1])
    step = 1.0 if p.kernel.variant == LAPLACE and q.kernel.variant == LAPLACE else min(
        p.kernel.sigma, q.kernel.sigma
    )
    bps = np.concatenate([p.mixing.atoms, q.mixing.atoms, np.asarray(extra, dtype=float)])
    return quadrature.make_pieces(bps, lo, hi, step)


def hellinger_squared(p: MixtureDensity, q: MixtureDensity) -> float:
    def integrand(x):
        return (np.sqrt(p(x)) - np.sqrt(q(x))) ** 2

    val, _ = quadrature.integrate_pieces(integrand, _pieces(p, q))
    return min(max(val, 0.0), 2.0)


def hellinger(p: MixtureDensity, q: MixtureDensity) -> float:
    """h(p, q) = (int (sqrt p - sqrt q)^2)^{1/2}, in [0, sqrt 2]."""
    return math.sqrt(hellinger_squared(p, q))


def lq_distance(p: MixtureDensity, q: MixtureDensity, order: float = 2.0) -> float:
    """||p - q||_order; ``order`` may be ``math.inf``."""
    if not order >= 1:
        raise ValueError(f"L_q order must be >= 1, got {order}")

    def diff(x):
        return p(x) - q(x)

    pieces = _pieces(p, q)
    if math.isinf(order):
        return quadrature.grid_max(
            lambda x: np.abs(diff(x)), pieces, extra=np.concatenate([p.mixing.atoms, q.mixing.atoms])
        )
    if not (order % 2 == 0):
        # |d|^q is not smooth where d changes sign
        roots = quadrature.sign_change_points(diff, pieces)
        if roots.size:
            pieces = _pieces(p, q, extra=roots)
    val, _ = quadrature.integrate_pieces(lambda x: np.abs(diff(x)) ** order, pieces)
    return max(val, 0.0) ** (1.0 / order)


def kl_divergences(p0: MixtureDensity, p: MixtureDensity) -> tuple[float, float]:
    """K(p0, p) = int log(p0/p) dP0 and K2(p0, p) = int log(p0/p)^2 dP0."""
    if p0.mixing.a != p.mixing.a:
        raise ValueError(
            f"support halfwidths differ ({p0.mixing.a} vs {p.mixing.a}); density ratio is not bounded"
        )
    pieces = _pieces(p0, p)

    def log_ratio(x):
        return np.log(p0(x)) - np.log(p(x))

    K, _ = quadrature.integrate_pieces(lambda x: p0(x) * log_ratio(x), pieces)
    K2, _ = quadrature.integrate_pieces(lambda x: p0(x) * log_ratio(x) ** 2, pieces)
    return max(K, 0.0), max(K2, 0.0)


# ---------------------------------------------------------------------------
# Wasserstein control from Hellinger


def smoothing_constant(k: float) -> float:
    """C_k making eps -> eps * log(C_k/eps)^(k+1/2) monotone on (0, 2]."""
    return 2.0 * math.exp(k + 0.5)


def smoothing_schedule(eps: float, k: float, beta: float) -> tuple[float, float, float]:
    """Three-term Gaussian-smoothing bound at Hellinger level ``eps``.

    Returns ``(bound, M, delta)`` with ``M = k/(k+beta) log(C_k/eps)`` and
    ``delta = (M^(k+1/2) eps)^(1/(k+beta))``; the bound is
    ``M^(k+1/2) eps delta^-beta + e^-M + delta^k`` without its constant.
    """
    if eps <= 0:
        return 0.0, math.inf, 0.0
    if eps > 2.0:
        raise ValueError(f"Hellinger level must lie in (0, 2], got {eps}")
    M = k / (k + beta) * math.log(smoothing_constant(k) / eps)
    delta = (M ** (k + 0.5) * eps) ** (1.0 / (k + beta))
    bound = M ** (k + 0.5) * eps * delta ** (-beta) + math.exp(-M) + delta**k
    return bound, M, delta


def smoothing_bound(p: MixtureDensity, q: MixtureDensity, k: float, beta: float):
    """Bound on W_k(G, G')^k from h(p_G, p_G'); see :func:`smoothing_schedule`."""
    if not k >= 1:
        raise ValueError(f"Wasserstein order must be >= 1, got {k}")
    for kern in (p.kernel, q.kernel):
        sm = kern.smoothness
        # inf (1+|l|^beta)|f~(l)| > 0 needs polynomial decay no faster than beta
        if sm.kind != ORDINARY_SMOOTH or beta < sm.beta:
            raise ValueError(
                f"kernel {kern.variant} does not satisfy inf (1+|l|^{beta})|cf(l)| > 0"
            )
    return smoothing_schedule(hellinger(p, q), k, beta)


def contraction_discrepancy(p: MixtureDensity, q: MixtureDensity, k: float) -> float:
    """W^(k+2) log(1/W)^(-k-1/2) with W = W_k between the mixing measures."""
    W = wasserstein_1d(p.mixing, q.mixing, k)
    return discrepancy_from_wasserstein(W, k)


def discrepancy_from_wasserstein(W: float, k: float) -> float:
    if W == 0:
        return 0.0
    if W >= math.exp(-1.0):
        raise ValueError(f"W_k = {W:.6g} >= 1/e is outside the small-distance regime; rescale")
    return W ** (k + 2) * math.log(1.0 / W) ** (-k - 0.5)


# ---------------------------------------------------------------------------


def distance_report(metric: str, G: DiscreteMeasure, H: DiscreteMeasure, kernel: Kernel) -> DistanceReport:
    """Evaluate a metric named by a short tag.

    Tags: ``w<k>``, ``hellinger``, ``l<q>``, ``linf``, ``kl``, ``k2``, ``d<k>``.
    """
    tag = metric.strip().lower()
    p, q = MixtureDensity(kernel, G), MixtureDensity(kernel, H)
    tol = quadrature.FAIL_TOL
    if tag in ("hellinger", "h"):
        return DistanceReport(hellinger(p, q), QUADRATURE, tol, tag)
    if tag in ("kl", "k2"):
        K, K2 = kl_divergences(p, q)
        return DistanceReport(K if tag == "kl" else K2, QUADRATURE, tol, tag)
    if tag == "linf":
        return DistanceReport(lq_distance(p, q, math.inf), QUADRATURE, tol, tag)
    head, num = tag[:1], tag[1:]
    try:
        order = float(num)
    except ValueError:
        raise ValueError(f"unknown metric {metric!r}") from None
    if head == "w":
        return DistanceReport(wasserstein_1d(G, H, order), QUANTILE, 1e-12, tag)
    if head == "l":
        return DistanceReport(lq_distance(p, q, order), QUADRATURE, tol, tag)
    if head == "d":
        return DistanceReport(contraction_discrepancy(p, q, order), QUANTILE, 1e-12, tag)
    raise ValueError(f"unknown metric {metric!r}")
