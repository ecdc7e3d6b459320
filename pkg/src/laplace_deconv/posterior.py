"""Dirichlet process prior on the mixing measure and its posterior given data.

The sampler is a marginal (Chinese restaurant) Gibbs sampler with auxiliary
components for the non-conjugate kernel likelihood, slice-sampled cluster
locations, and a per-draw reconstruction of G from the DP posterior
DP(alpha + sum_c n_c delta_{theta_c}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .distances import kl_divergences
from .kernels import LAPLACE, Kernel, MixtureDensity, laplace
from .measures import DiscreteMeasure, make_discrete

UNIFORM = "uniform"
TRUNCNORM = "truncnorm"
N_AUX = 3


class ChainError(RuntimeError):
    def __init__(self, message: str, state: "ChainState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class DPConfig:
    total_mass: float = 1.0
    a: float = 1.0
    base_density: str = UNIFORM
    base_scale: float = 1.0  # standard deviation before truncation, truncnorm only
    truncation_level: int = 200

    def __post_init__(self):
        if not self.total_mass > 0:
            raise ValueError(f"total_mass must be positive, got {self.total_mass}")
        if not self.a > 0:
            raise ValueError(f"base halfwidth must be positive, got {self.a}")
        if self.base_density not in (UNIFORM, TRUNCNORM):
            raise ValueError(f"unknown base density {self.base_density!r}")
        if self.truncation_level < 50:
            raise ValueError(f"truncation_level must be >= 50, got {self.truncation_level}")
        if not math.isfinite(self.base_ratio):
            raise ValueError("base density ratio max/min must be finite on [-a, a]")

    @property
    def base_ratio(self) -> float:
        """max/min of the base density on [-a, a]."""
        if self.base_density == UNIFORM:
            return 1.0
        try:
            return math.exp(self.a**2 / (2 * self.base_scale**2))
        except OverflowError:
            return math.inf

    @property
    def _base_code(self) -> int:
        return 0 if self.base_density == UNIFORM else 1

    def sample_base(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return _sample_base_array(self._base_code, self.a, self.base_scale, rng, size)

    def to_dict(self) -> dict:
        return {
            "total_mass": self.total_mass,
            "a": self.a,
            "base_density": self.base_density,
            "base_scale": self.base_scale,
            "truncation_level": self.truncation_level,
        }


@dataclass
class ChainState:
    allocations: np.ndarray
    cluster_locations: np.ndarray
    iteration: int
    log_likelihood: float

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.allocations, minlength=self.cluster_locations.size)


@dataclass
class ChainOutput:
    draws: list
    log_likelihood: np.ndarray
    n_clusters: np.ndarray
    final_state: ChainState


# ---------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _log_kernel(r, kcode, sigma):
    if kcode == 0:
        return -math.log(2.0) - abs(r)
    return -0.5 * (r / sigma) ** 2 - math.log(math.sqrt(2.0 * math.pi) * sigma)


@numba.njit(cache=True)
def _log_base(z, bcode, scale):
    if bcode == 0:
        return 0.0
    return -0.5 * (z / scale) ** 2


@numba.njit(cache=True)
def _draw_base(bcode, a, scale, rng):
    while True:
        z = a * (2.0 * rng.random() - 1.0)
        if bcode == 0:
            return z
        if rng.random() < math.exp(-0.5 * (z / scale) ** 2):
            return z


@numba.njit(cache=True)
def _sample_base_array(bcode, a, scale, rng, size):
    out = np.empty(size)
    for i in range(size):
        out[i] = _draw_base(bcode, a, scale, rng)
    return out


@numba.njit(cache=True)
def _allocation_sweep(x, alloc, counts, locs, K, alpha, a, m_aux, kcode, sigma, bcode, scale, rng):
    """One pass of auxiliary-component Gibbs over all observations; returns K."""
    n = x.shape[0]
    aux = np.empty(m_aux)
    prob = np.empty(counts.shape[0] + m_aux)
    for i in range(n):
        c = alloc[i]
        counts[c] -= 1
        start = 0
        if counts[c] == 0:
            # singleton: its location becomes the first auxiliary component
            aux[0] = locs[c]
            start = 1
            last = K - 1
            if c != last:
                locs[c] = locs[last]
                counts[c] = counts[last]
                for j in range(n):
                    if alloc[j] == last:
                        alloc[j] = c
            counts[last] = 0
            K -= 1
        for t in range(start, m_aux):
            aux[t] = _draw_base(bcode, a, scale, rng)
        xi = x[i]
        total = 0.0
        for j in range(K):
            prob[j] = counts[j] * math.exp(_log_kernel(xi - locs[j], kcode, sigma))
            total += prob[j]
        w_aux = alpha / m_aux
        for t in range(m_aux):
            prob[K + t] = w_aux * math.exp(_log_kernel(xi - aux[t], kcode, sigma))
            total += prob[K + t]
        u = rng.random() * total
        acc = 0.0
        choice = K + m_aux - 1
        for j in range(K + m_aux):
            acc += prob[j]
            if u < acc:
                choice = j
                break
        if choice < K:
            alloc[i] = choice
            counts[choice] += 1
        else:
            locs[K] = aux[choice - K]
            counts[K] = 1
            alloc[i] = K
            K += 1
    return K


@numba.njit(cache=True)
def _cluster_logpost(theta, x, members, lo, hi, kcode, sigma, bcode, scale):
    s = _log_base(theta, bcode, scale)
    for t in range(lo, hi):
        s += _log_kernel(x[members[t]] - theta, kcode, sigma)
    return s


@numba.njit(cache=True)
def _location_sweep(x, alloc, locs, K, a, kcode, sigma, bcode, scale, rng):
    """Slice-sample every cluster location on its full support [-a, a]."""
    n = x.shape[0]
    starts = np.zeros(K + 1, np.int64)
    for i in range(n):
        starts[alloc[i] + 1] += 1
    for c in range(K):
        starts[c + 1] += starts[c]
    fill = starts[:-1].copy()
    members = np.empty(n, np.int64)
    for i in range(n):
        c = alloc[i]
        members[fill[c]] = i
        fill[c] += 1
    for c in range(K):
        lo, hi = starts[c], starts[c + 1]
        th0 = locs[c]
        level = _cluster_logpost(th0, x, members, lo, hi, kcode, sigma, bcode, scale) + math.log(rng.random())
        left, right = -a, a
        while True:
            th = left + rng.random() * (right - left)
            if _cluster_logpost(th, x, members, lo, hi, kcode, sigma, bcode, scale) > level:
                locs[c] = th
                break
            if th < th0:
                left = th
            else:
                right = th


@numba.njit(cache=True)
def _complete_loglik(x, alloc, locs, kcode, sigma):
    s = 0.0
    for i in range(x.shape[0]):
        s += _log_kernel(x[i] - locs[alloc[i]], kcode, sigma)
    return s


# ---------------------------------------------------------------------------


def _kernel_code(kernel: Kernel) -> tuple[int, float]:
    return (0 if kernel.variant == LAPLACE else 1), float(kernel.sigma)


def stick_breaking_weights(rng: np.random.Generator, total_mass: float, level: int) -> np.ndarray:
    """Beta(1, total_mass) sticks; the last atom takes the leftover stick."""
    v = rng.beta(1.0, total_mass, size=level - 1)
    remain = np.concatenate([[1.0], np.cumprod(1.0 - v)])
    w = np.empty(level)
    w[:-1] = v * remain[:-1]
    w[-1] = remain[-1]
    return w


def _prior_atoms_weights(cfg: DPConfig, rng: np.random.Generator):
    w = stick_breaking_weights(rng, cfg.total_mass, cfg.truncation_level)
    z = cfg.sample_base(rng, cfg.truncation_level)
    return z, w


def sample_prior_dp(cfg: DPConfig, seed) -> DiscreteMeasure:
    """One truncated stick-breaking draw G ~ DP(total_mass * base)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z, w = _prior_atoms_weights(cfg, rng)
    return make_discrete(z, w, cfg.a)


def reconstruct_measure(
    cfg: DPConfig, counts: np.ndarray, locations: np.ndarray, rng: np.random.Generator
) -> DiscreteMeasure:
    """Draw G from DP(alpha + sum_c n_c delta_{theta_c}) given cluster summaries."""
    K = counts.size
    g = rng.standard_gamma(np.concatenate([counts.astype(float), [cfg.total_mass]]))
    shares = g / g.sum()
    z, w = _prior_atoms_weights(cfg, rng)
    atoms = np.concatenate([locations[:K], z])
    weights = np.concatenate([shares[:K], shares[K] * w])
    return make_discrete(atoms, weights, cfg.a)


def complete_log_likelihood(data, state: ChainState, kernel: Kernel) -> float:
    kcode, sigma = _kernel_code(kernel)
    return float(_complete_loglik(np.asarray(data, float), state.allocations, state.cluster_locations, kcode, sigma))


def log_likelihood(data, G: DiscreteMeasure, kernel: Kernel) -> float:
    """sum_i log p_G(x_i)."""
    return float(np.sum(np.log(MixtureDensity(kernel, G)(np.asarray(data, float)))))


def run_chain(
    data,
    cfg: DPConfig,
    kernel: Kernel | None = None,
    iters: int = 2000,
    burn_in: int = 1000,
    thin: int = 5,
    seed=0,
) -> ChainOutput:
    """Run the sampler and keep every ``thin``-th state after ``burn_in``."""
    kernel = laplace() if kernel is None else kernel
    x = np.ascontiguousarray(np.asarray(data, dtype=float).ravel())
    if iters <= burn_in:
        raise ValueError(f"iters ({iters}) must exceed burn_in ({burn_in})")
    if thin < 1:
        raise ValueError(f"thin must be >= 1, got {thin}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    rng = np.random.default_rng(seed)
    kcode, sigma = _kernel_code(kernel)
    bcode, scale = cfg._base_code, float(cfg.base_scale)
    n = x.size
    alloc = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n + N_AUX + 1, dtype=np.int64)
    locs = np.zeros(n + N_AUX + 1)
    K = 0
    if n:
        counts[0] = n
        locs[0] = float(np.clip(np.median(x), -cfg.a, cfg.a))
        K = 1
    draws, trace, sizes = [], np.empty(iters), np.empty(iters, dtype=np.int64)
    ll = 0.0
    for it in range(iters):
        if n:
            K = _allocation_sweep(x, alloc, counts, locs, K, cfg.total_mass, cfg.a, N_AUX, kcode, sigma, bcode, scale, rng)
            _location_sweep(x, alloc, locs, K, cfg.a, kcode, sigma, bcode, scale, rng)
            ll = _complete_loglik(x, alloc, locs, kcode, sigma)
            if not math.isfinite(ll):
                state = ChainState(alloc.copy(), locs[:K].copy(), it, ll)
                raise ChainError(f"non-finite log-likelihood at iteration {it}", state)
        trace[it] = ll
        sizes[it] = K
        if it >= burn_in and (it - burn_in) % thin == 0:
            draws.append(reconstruct_measure(cfg, counts[:K].copy(), locs[:K].copy(), rng))
    final = ChainState(alloc.copy(), locs[:K].copy(), iters, ll)
    return ChainOutput(draws=draws, log_likelihood=trace, n_clusters=sizes, final_state=final)


def posterior_chain(
    data,
    cfg: DPConfig,
    kernel: Kernel | None = None,
    iters: int = 2000,
    burn_in: int = 1000,
    thin: int = 5,
    seed=0,
) -> list[DiscreteMeasure]:
    """Posterior draws of G given the data. Empty data gives prior draws."""
    return run_chain(data, cfg, kernel, iters, burn_in, thin, seed).draws


# ---------------------------------------------------------------------------
# prior mass of Kullback-Leibler neighbourhoods


@dataclass
class PriorMassEstimate:
    estimate: float
    ci: tuple[float, float]
    hits: int
    draws: int
    eps: float

    @property
    def upper_only(self) -> bool:
        return self.hits == 0


def wilson_interval(hits: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = hits / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == n else min(1.0, centre + half)
    return lo, hi


def prior_kl_draws(cfg: DPConfig, G0: DiscreteMeasure, kernel: Kernel, draws: int, seed) -> np.ndarray:
    """max(K, K2)(p_G0, p_G) for ``draws`` independent prior draws of G."""
    rng = np.random.default_rng(seed)
    p0 = MixtureDensity(kernel, G0)
    out = np.empty(draws)
    for i in range(draws):
        G = sample_prior_dp(cfg, rng)
        K, K2 = kl_divergences(p0, MixtureDensity(kernel, G))
        out[i] = max(K, K2)
    return out


def estimate_from_divergences(divergences: np.ndarray, eps: float) -> PriorMassEstimate:
    hits = int(np.sum(divergences <= eps * eps))
    n = int(divergences.size)
    return PriorMassEstimate(hits / n if n else 0.0, wilson_interval(hits, n), hits, n, eps)


def prior_mass_estimate(
    cfg: DPConfig, G0: DiscreteMeasure, kernel: Kernel, eps: float, draws: int, seed
) -> PriorMassEstimate:
    """Monte Carlo prior probability of {G: max(K, K2)(p_G0, p_G) <= eps^2}."""
    if G0.a != cfg.a:
        raise ValueError("G0 and the prior must share the support halfwidth")
    return estimate_from_divergences(prior_kl_draws(cfg, G0, kernel, draws, seed), eps)
