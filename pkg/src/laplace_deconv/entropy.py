"""Explicit epsilon-nets and empirical covering checks.

Nets are described structurally (a support grid crossed with a lattice on
the simplex) so their size is known in closed form and the nearest element
to a probe is found by rounding, without enumerating the net.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from .approximation import hellinger_budget, lq_budget
from .distances import coupling_bound, hellinger, lq_distance, wasserstein_1d
from .kernels import LAPLACE, Kernel, MixtureDensity
from .measures import DiscreteMeasure, make_discrete

LOG_SIZE_GUARD = 25.0  # about 7e10 elements
PRUNE_LIMIT = 200_000


class NetSizeError(ValueError):
    def __init__(self, log_size: float):
        super().__init__(
            f"net would have about e^{log_size:.1f} = {math.exp(min(log_size, 700)):.3g} elements, "
            f"beyond the guard e^{LOG_SIZE_GUARD:g}"
        )
        self.log_size = log_size


def _log_binom(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


# ---------------------------------------------------------------------------
# the simplex lattice {c / M : c in N^d, sum c = M}


@dataclass(frozen=True)
class SimplexLattice:
    dim: int
    M: int

    @classmethod
    def with_radius(cls, dim: int, radius: float) -> "SimplexLattice":
        """Lattice whose rounding map moves every point by less than ``radius`` in l1."""
        return cls(dim, max(1, int(math.ceil(dim / radius))))

    @property
    def step(self) -> float:
        return 1.0 / self.M

    def log_count(self) -> float:
        return _log_binom(self.M + self.dim - 1, self.dim - 1)

    def round(self, p: np.ndarray) -> np.ndarray:
        """Largest-remainder rounding; each coordinate moves by less than 1/M."""
        x = np.asarray(p, dtype=float) * self.M
        c = np.floor(x).astype(np.int64)
        short = self.M - int(c.sum())
        if short > 0:
            c[np.argsort(-(x - c), kind="stable")[:short]] += 1
        return c

    def __iter__(self) -> Iterator[np.ndarray]:
        def rec(prefix, remaining, depth):
            if depth == self.dim - 1:
                yield np.array(prefix + [remaining], dtype=np.int64)
                return
            for c in range(remaining, -1, -1):
                yield from rec(prefix + [c], remaining - c, depth + 1)

        yield from rec([], self.M, 0)

    def points(self) -> np.ndarray:
        return np.array(list(iter(self)), dtype=float) / self.M


def support_grid(a: float, s: float) -> np.ndarray:
    """Points spaced 2s apart so that every z in [-a, a] is within s of one."""
    if s >= a:
        return np.array([0.0])
    n = int(math.ceil(a / s))
    return np.minimum(-a + s * (2 * np.arange(n) + 1), a)


def _snap(z: np.ndarray, grid: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(grid, z), 1, grid.size - 1) if grid.size > 1 else np.zeros(z.size, int)
    if grid.size > 1:
        left = idx - 1
        idx = np.where(np.abs(z - grid[left]) <= np.abs(grid[idx] - z), left, idx)
    return idx


# ---------------------------------------------------------------------------
# nets


@dataclass
class NetDescriptor:
    """A finite epsilon-net: metric tag, radius and construction parameters.

    Subclasses know how to enumerate their elements and how to find a net
    element within ``radius`` of a probe.
    """

    metric: str
    radius: float
    construction_params: dict
    log_size: float

    @property
    def size(self) -> float:
        return math.exp(self.log_size)

    def elements(self) -> Iterator:
        raise NotImplementedError

    def nearest(self, probe):
        """(element, distance, certified_bound or None) for a probe."""
        raise NotImplementedError

    def _check_enumerable(self):
        if self.log_size > LOG_SIZE_GUARD:
            raise NetSizeError(self.log_size)


@dataclass
class ExplicitNet(NetDescriptor):
    """A net given by an explicit element list; nearest element by brute force."""

    items: list = field(default_factory=list)
    kernel: Kernel | None = None

    def elements(self):
        return iter(self.items)

    def nearest(self, probe):
        best, best_d = None, math.inf
        if self.metric == "l1-simplex" and self.items:
            arr = np.asarray(self.items, dtype=float)
            d = np.abs(arr - np.asarray(probe)[None, :]).sum(axis=1)
            i = int(np.argmin(d))
            return arr[i], float(d[i]), None
        for e in self.items:
            d = _metric_distance(self.metric, probe, e, self.kernel)
            if d < best_d:
                best, best_d = e, d
        return best, best_d, None


def _metric_distance(metric: str, G, H, kernel: Kernel | None) -> float:
    if metric == "l1-simplex":
        return float(np.abs(np.asarray(G) - np.asarray(H)).sum())
    if metric.startswith("wasserstein"):
        k = float(metric[metric.index("(") + 1 : -1])
        return wasserstein_1d(G, H, k)
    p, q = MixtureDensity(kernel, G), MixtureDensity(kernel, H)
    if metric == "hellinger":
        return hellinger(p, q)
    if metric.startswith("lq"):
        qq = float(metric[metric.index("(") + 1 : -1])
        return lq_distance(p, q, qq)
    raise ValueError(f"unknown net metric {metric!r}")


@dataclass
class SimplexNet(NetDescriptor):
    lattice: SimplexLattice | None = None
    points: np.ndarray | None = None  # materialized (possibly pruned) elements

    def elements(self):
        if self.points is not None:
            return iter(self.points)
        self._check_enumerable()
        return (c / self.lattice.M for c in self.lattice)

    def nearest(self, probe):
        w = np.asarray(probe, dtype=float)
        if w.size != self.lattice.dim:
            raise ValueError(f"probe has dimension {w.size}, net has {self.lattice.dim}")
        if self.points is not None:
            d = np.abs(self.points - w[None, :]).sum(axis=1)
            i = int(np.argmin(d))
            return self.points[i], float(d[i]), None
        e = self.lattice.round(w) / self.lattice.M
        return e, float(np.abs(e - w).sum()), None


def _greedy_prune(points: np.ndarray, r: float) -> np.ndarray:
    kept = np.empty_like(points)
    n = 0
    for x in points:
        if n == 0 or np.abs(kept[:n] - x[None, :]).sum(axis=1).min() > r + 1e-12:
            kept[n] = x
            n += 1
    return kept[:n].copy()


def simplex_net(N: int, eps: float) -> SimplexNet:
    """l1 eps-net of the probability simplex in N dimensions.

    Lattice of step eps/(2N) (every point within eps/2 of it), greedily
    pruned to an eps/2-separated subset when the lattice is small enough
    to materialize.
    """
    if N < 1:
        raise ValueError(f"dimension must be >= 1, got {N}")
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    guard = N * math.log(5.0 / eps)
    if guard > LOG_SIZE_GUARD:
        raise NetSizeError(guard)
    lattice = SimplexLattice(N, int(math.ceil(2 * N / eps)))
    params = {"support_grid_step": None, "weight_net_step": lattice.step, "N_support": N}
    if N == 1:
        pts = np.ones((1, 1))
    elif lattice.log_count() <= math.log(PRUNE_LIMIT):
        pts = _greedy_prune(lattice.points(), eps / 2)
    else:
        pts = None
    log_size = math.log(pts.shape[0]) if pts is not None else lattice.log_count()
    params["pruned"] = pts is not None
    return SimplexNet("l1-simplex", eps, params, log_size, lattice=lattice, points=pts)


@dataclass
class WassersteinNet(NetDescriptor):
    a: float = 1.0
    k: float = 1.0
    grid: np.ndarray | None = None
    lattice: SimplexLattice | None = None

    def elements(self):
        self._check_enumerable()
        for c in self.lattice:
            pos = c > 0
            yield make_discrete(self.grid[pos], c[pos] / self.lattice.M, self.a)

    def nearest(self, probe: DiscreteMeasure):
        idx = _snap(probe.atoms, self.grid)
        mass = np.bincount(idx, weights=probe.weights, minlength=self.grid.size)
        c = self.lattice.round(mass)
        pos = c > 0
        element = make_discrete(self.grid[pos], c[pos] / self.lattice.M, self.a)
        d = wasserstein_1d(probe, element, self.k)
        # partition coupling: relocation inside cells, then reweighting on the grid
        moved = probe.weights > 0
        reloc = float(np.abs(probe.atoms[moved] - self.grid[idx[moved]]).max())
        full = np.arange(self.grid.size)
        relocated = make_discrete(self.grid, mass, self.a)
        rounded = make_discrete(self.grid, c / self.lattice.M, self.a)
        certified = reloc + coupling_bound(relocated, rounded, np.stack([full, full], 1), self.k, 2 * self.a)
        return element, d, certified


def wasserstein_net(a: float, k: float, eps: float) -> WassersteinNet:
    """W_k net of all probability measures on [-a, a] with declared radius 2 eps.

    Support grid of spacing 2 eps crossed with a simplex lattice of l1
    radius (eps / 2a)^k; the partition coupling certifies distance
    eps + 2a ((eps/2a)^k)^(1/k) = 2 eps.
    """
    if not k >= 1:
        raise ValueError(f"Wasserstein order must be >= 1, got {k}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if eps >= 2 * a:
        grid = np.array([0.0])
        lattice = SimplexLattice(1, 1)
        params = {"support_grid_step": None, "weight_net_step": 1.0, "N_support": 1}
        return WassersteinNet(f"wasserstein({k:g})", 2 * eps, params, 0.0, a=a, k=k, grid=grid, lattice=lattice)
    grid = support_grid(a, eps)
    r = (eps / (2 * a)) ** k
    lattice = SimplexLattice.with_radius(grid.size, r)
    params = {
        "support_grid_step": 2 * eps,
        "weight_net_step": lattice.step,
        "N_support": int(grid.size),
        "weight_radius": r,
        "log_count_bound": k * grid.size * math.log(8 * a / eps),
    }
    return WassersteinNet(
        f"wasserstein({k:g})", 2 * eps, params, lattice.log_count(), a=a, k=k, grid=grid, lattice=lattice
    )


def hellinger_weight_constant(a: float) -> float:
    """C with h(p_G, p_G') <= C ||p - p'||_1 for Laplace mixtures on shared atoms.

    From h^2 <= int (p-q)^2/(p+q) with |p-q| <= ||p-p'||_1 f((|x|-a)^+) and
    p+q >= 2 f(|x|+a): C^2 = e^{2a} - e^a / 2.
    """
    return math.sqrt(math.exp(2 * a) - 0.5 * math.exp(a))


@dataclass
class MixtureNet(NetDescriptor):
    a: float = 1.0
    kernel: Kernel | None = None
    n_support: int = 1
    grid: np.ndarray | None = None
    lattice: SimplexLattice | None = None
    shift_coef: float = 1.0
    weight_coef: float = 1.0

    def elements(self):
        self._check_enumerable()
        import itertools

        for locs in itertools.product(range(self.grid.size), repeat=self.n_support):
            for c in self.lattice:
                pos = c > 0
                yield make_discrete(self.grid[np.asarray(locs)][pos], c[pos] / self.lattice.M, self.a)

    def nearest(self, probe: DiscreteMeasure):
        if len(probe) > self.n_support:
            raise ValueError(f"probe has {len(probe)} atoms, net class allows {self.n_support}")
        z = np.concatenate([probe.atoms, np.full(self.n_support - len(probe), probe.atoms[-1])])
        w = np.concatenate([probe.weights, np.zeros(self.n_support - len(probe))])
        idx = _snap(z, self.grid)
        c = self.lattice.round(w)
        pos = c > 0
        element = make_discrete(self.grid[idx][pos], c[pos] / self.lattice.M, self.a)
        d = _metric_distance(self.metric, probe, element, self.kernel)
        moved = w > 0
        reloc = float(np.abs(z[moved] - self.grid[idx[moved]]).max())
        certified = self.shift_coef * reloc + self.weight_coef * float(np.abs(c / self.lattice.M - w).sum())
        return element, d, certified


def mixture_net(a: float, kernel: Kernel, metric: str, eps: float, q: float = 2.0) -> MixtureNet:
    """Net over mixtures p_G with G on at most N(eps) atoms in [-a, a].

    ``metric`` is ``"hellinger"`` (Laplace kernel only) or ``"lq"``. Support
    points snap to a grid and weights to a simplex lattice; the relocation
    and reweighting bounds each use half of eps.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if metric == "hellinger":
        if kernel.variant != LAPLACE:
            raise ValueError("Hellinger mixture nets are implemented for the Laplace kernel only")
        n_support = hellinger_budget(eps, a)
        # h(f, f(. - t)) <= t/2 and h <= C ||p - p'||_1 on shared atoms
        shift_coef, weight_coef = 0.5, hellinger_weight_constant(a)
        tag = "hellinger"
        # support budget grows like eps^(-2/3); a smaller displayed exponent 3/8 is kept for reference
        exponents = {"budget_exponent": 2.0 / 3.0, "displayed_exponent": 3.0 / 8.0}
    elif metric == "lq":
        if not q >= 2:
            raise ValueError(f"L_q nets need q >= 2, got {q}")
        n_support = lq_budget(kernel, q, min(eps, 0.99))
        shift_coef, weight_coef = kernel.derivative_lq_norm(q), kernel.lq_norm(q)
        tag = f"lq({q:g})"
        exponents = {}
    else:
        raise ValueError(f"unknown mixture metric {metric!r}")
    s = eps / (2 * shift_coef)
    r = eps / (2 * weight_coef)
    grid = support_grid(a, s)
    lattice = SimplexLattice.with_radius(n_support, r)
    params = {
        "support_grid_step": 2 * s,
        "weight_net_step": lattice.step,
        "N_support": n_support,
        "grid_points": int(grid.size),
        "weight_radius": r,
        **exponents,
    }
    log_size = n_support * math.log(grid.size) + lattice.log_count()
    return MixtureNet(
        tag, eps, params, log_size, a=a, kernel=kernel, n_support=n_support, grid=grid,
        lattice=lattice, shift_coef=shift_coef, weight_coef=weight_coef,
    )


# ---------------------------------------------------------------------------
# verification


@dataclass
class CoverReport:
    distances: np.ndarray
    radius: float
    certified: np.ndarray | None = None
    histogram: tuple = ()

    @property
    def max_distance(self) -> float:
        return float(self.distances.max()) if self.distances.size else 0.0

    @property
    def witnesses(self) -> np.ndarray:
        """Indices of probes farther than the radius from every element."""
        return np.flatnonzero(self.distances > self.radius * (1 + 1e-12))

    @property
    def passed(self) -> bool:
        return self.witnesses.size == 0


def verify_cover(net: NetDescriptor, probes: Sequence) -> CoverReport:
    """Distance from each probe to its nearest net element, against the radius."""
    dists, certs = [], []
    for probe in probes:
        _, d, cert = net.nearest(probe)
        dists.append(d)
        certs.append(np.nan if cert is None else cert)
    dists = np.asarray(dists, dtype=float)
    certs = np.asarray(certs, dtype=float)
    top = max(net.radius, float(dists.max()) if dists.size else 0.0)
    hist = np.histogram(dists, bins=10, range=(0.0, top)) if dists.size else ((), ())
    return CoverReport(
        distances=dists,
        radius=net.radius,
        certified=None if np.all(np.isnan(certs)) else certs,
        histogram=(hist[0].tolist(), hist[1].tolist()),
    )


# ---------------------------------------------------------------------------
# probes and growth


def simplex_probes(rng: np.random.Generator, N: int, count: int) -> np.ndarray:
    return rng.dirichlet(np.ones(N), size=count)


def measure_probes(rng: np.random.Generator, a: float, count: int, n_atoms: int) -> list[DiscreteMeasure]:
    """Atoms iid uniform on [-a, a], weights Dirichlet(1, ..., 1)."""
    out = []
    for _ in range(count):
        out.append(make_discrete(rng.uniform(-a, a, n_atoms), rng.dirichlet(np.ones(n_atoms)), a))
    return out


def probes_for(net: NetDescriptor, rng: np.random.Generator, count: int):
    if isinstance(net, SimplexNet):
        return simplex_probes(rng, net.lattice.dim, count)
    if isinstance(net, WassersteinNet):
        atoms = [int(rng.integers(1, 11)) for _ in range(count)]
        return [measure_probes(rng, net.a, 1, m)[0] for m in atoms]
    if isinstance(net, MixtureNet):
        return measure_probes(rng, net.a, count, net.n_support)
    raise TypeError(f"no probe distribution for {type(net).__name__}")


def wasserstein_log_scale(a: float) -> float:
    """Scale inside the log of the count bound (4 diam / eps)^(kN), diam = 2a."""
    return 8.0 * a


def mixture_log_scale(a: float) -> float:
    """Scale s with (2a/eps)^N (5/eps)^N = (s/eps)^(2N)."""
    return math.sqrt(10.0 * a)


def growth_exponent(eps: Sequence[float], log_sizes: Sequence[float], log_scale: float = 1.0) -> float:
    """Fitted gamma in log N(eps) ~ (1/eps)^gamma log(log_scale/eps)."""
    eps = np.asarray(eps, dtype=float)
    y = np.log(np.asarray(log_sizes, dtype=float) / np.log(log_scale / eps))
    x = np.log(1.0 / eps)
    return float(np.polyfit(x, y, 1)[0])
