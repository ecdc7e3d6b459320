"""Posterior contraction experiments over a ladder of sample sizes."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import quadrature
from .distances import hellinger, lq_distance, wasserstein_1d
from .kernels import Kernel, MixtureDensity, laplace, sample_mixture
from .measures import DiscreteMeasure, make_discrete
from .posterior import ChainError, DPConfig, posterior_chain

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "replicate", "metric", "q50", "q90")
THREADS_ENV = "LAPLACE_DECONV_THREADS"


class ExperimentAborted(RuntimeError):
    pass


class BudgetExceeded(ValueError):
    pass


def default_g0(a: float = 1.0) -> DiscreteMeasure:
    return make_discrete([-0.5, 0.5], [0.5, 0.5], a)


@dataclass(frozen=True)
class MCMCSettings:
    iters: int = 3000
    burn_in: int = 1000
    thin: int = 5
    total_mass: float = 1.0
    truncation_level: int = 200

    @property
    def n_draws(self) -> int:
        return len(range(self.burn_in, self.iters, self.thin))

    def to_dict(self) -> dict:
        return {
            "iters": self.iters,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "total_mass": self.total_mass,
            "truncation_level": self.truncation_level,
        }


@dataclass
class ExperimentConfig:
    G0: DiscreteMeasure = field(default_factory=default_g0)
    kernel: Kernel = field(default_factory=laplace)
    n_ladder: tuple = (250, 500, 1000, 2000, 4000)
    replicates: int = 3
    k_list: tuple = (1.0,)
    q_list: tuple = (2.0,)
    mcmc: MCMCSettings = field(default_factory=MCMCSettings)
    seed: int = 0
    threads: int = 1
    budget: int = 2_000_000  # max number of (draw, metric) distance evaluations

    def __post_init__(self):
        ladder = list(self.n_ladder)
        if len(ladder) < 3:
            raise ValueError(f"n_ladder needs at least 3 entries, got {ladder}")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError(f"n_ladder must be strictly increasing, got {ladder}")
        if self.replicates < 3:
            raise ValueError(f"replicates must be >= 3, got {self.replicates}")
        if any(k < 1 for k in self.k_list):
            raise ValueError(f"Wasserstein orders must be >= 1, got {list(self.k_list)}")
        if any(q < 1 for q in self.q_list):
            raise ValueError(f"L_q orders must be >= 1, got {list(self.q_list)}")
        self.n_ladder = tuple(int(n) for n in ladder)
        self.k_list = tuple(float(k) for k in self.k_list)
        self.q_list = tuple(float(q) for q in self.q_list)

    @property
    def metrics(self) -> list[str]:
        return [f"w{k:g}" for k in self.k_list] + ["hellinger"] + [f"l{q:g}" for q in self.q_list]

    @property
    def cost(self) -> int:
        return len(self.n_ladder) * self.replicates * self.mcmc.n_draws * len(self.metrics)

    @property
    def dp(self) -> DPConfig:
        return DPConfig(
            total_mass=self.mcmc.total_mass, a=self.G0.a, truncation_level=self.mcmc.truncation_level
        )

    def to_dict(self) -> dict:
        return {
            "G0": self.G0.to_dict(),
            "kernel": self.kernel.to_dict(),
            "n_ladder": list(self.n_ladder),
            "replicates": self.replicates,
            "k_list": list(self.k_list),
            "q_list": list(self.q_list),
            "mcmc": self.mcmc.to_dict(),
            "seed": self.seed,
            "threads": self.threads,
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "G0" in d:
            d["G0"] = DiscreteMeasure.from_dict(d["G0"])
        if "kernel" in d:
            d["kernel"] = Kernel.from_dict(d["kernel"]) if isinstance(d["kernel"], dict) else Kernel.parse(d["kernel"])
        if "mcmc" in d:
            d["mcmc"] = MCMCSettings(**d["mcmc"])
        for key in ("n_ladder", "k_list", "q_list"):
            if key in d:
                d[key] = tuple(d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# theory


def theory_exponent(metric: str) -> float:
    """Polynomial exponent of the contraction rate (log factors dropped)."""
    if metric == "hellinger":
        return 3.0 / 8.0
    head, num = metric[:1], float(metric[1:])
    if head == "w":
        return 3.0 / (8.0 * num + 16.0)
    if head == "l":
        return (num + 1.0) / (num * (num + 2.0))
    raise ValueError(f"unknown metric {metric!r}")


def theory_log_power(metric: str) -> float:
    if metric == "hellinger":
        return 3.0 / 8.0
    head, num = metric[:1], float(metric[1:])
    if head == "w":
        return (num + 7.0 / 8.0) / (num + 2.0)
    return (num + 1.0) / (num * (num + 2.0))


# ---------------------------------------------------------------------------
# table


@dataclass(frozen=True)
class RateRow:
    n: int
    replicate: int
    metric: str
    q50: float
    q90: float


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    ci: tuple[float, float]
    r2: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "ci": list(self.ci), "r2": self.r2}


@dataclass
class RateTable:
    rows: list = field(default_factory=list)
    fitted: dict = field(default_factory=dict)
    theory: dict = field(default_factory=dict)
    failed: list = field(default_factory=list)  # (n, replicate, message)

    @property
    def metrics(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.metric not in seen:
                seen.append(r.metric)
        return seen

    def column(self, metric: str, replicate: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r.metric == metric and (replicate is None or r.replicate == replicate)]
        sel.sort(key=lambda r: (r.n, r.replicate))
        return np.array([r.n for r in sel], float), np.array([r.q50 for r in sel], float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.n, r.replicate, r.metric, "%.17g" % r.q50, "%.17g" % r.q90])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RateTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        rows = [RateRow(int(n), int(rep), m, float(q50), float(q90)) for n, rep, m, q50, q90 in reader]
        table = cls(rows=rows)
        table.theory = {m: theory_exponent(m) for m in table.metrics}
        return table

    def summary(self) -> dict:
        return {
            "fitted": {m: f.to_dict() for m, f in self.fitted.items()},
            "theory_exponent": dict(self.theory),
            "theory_slope": {m: -e for m, e in self.theory.items()},
            "failed": [list(f) for f in self.failed],
        }


def fit_rate(table: RateTable, metric: str) -> RateFit:
    """OLS of log q50 on log n pooled over replicates, with a 95% t interval."""
    n, q50 = table.column(metric)
    if np.unique(n).size < 3:
        raise ValueError(f"need at least 3 ladder points for {metric!r}, got {np.unique(n).size}")
    if np.any(q50 <= 0) or not np.all(np.isfinite(q50)):
        raise ValueError(f"q50 values for {metric!r} must be positive and finite to take logs")
    x, y = np.log(n), np.log(q50)
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = yc - slope * xc
    sse = float(resid @ resid)
    r2 = 0.0 if syy == 0 else max(0.0, 1.0 - sse / syy)
    dof = x.size - 2
    if dof > 0:
        half = float(stats.t.ppf(0.975, dof)) * math.sqrt(sse / dof / sxx)
    else:
        half = math.inf
    return RateFit(slope, intercept, (slope - half, slope + half), r2)


# ---------------------------------------------------------------------------
# experiment


def task_seed(seed: int, n: int, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(n), int(replicate)])


def replicate_data(cfg: ExperimentConfig, n: int, replicate: int) -> np.ndarray:
    """First n points of the replicate's data stream.

    Each replicate is one i.i.d. sequence X_1, X_2, ...; the ladder looks at
    growing prefixes of it, so cells of one replicate are nested.
    """
    ss = np.random.SeedSequence([int(cfg.seed), int(replicate)])
    x = sample_mixture(MixtureDensity(cfg.kernel, cfg.G0), max(cfg.n_ladder), np.random.default_rng(ss))
    return x[:n]


def posterior_distances(draws, G0: DiscreteMeasure, kernel: Kernel, k_list, q_list) -> dict[str, np.ndarray]:
    p0 = MixtureDensity(kernel, G0)
    out = {f"w{k:g}": [] for k in k_list}
    out["hellinger"] = []
    out.update({f"l{q:g}": [] for q in q_list})
    for G in draws:
        p = MixtureDensity(kernel, G)
        for k in k_list:
            out[f"w{k:g}"].append(wasserstein_1d(G, G0, k))
        out["hellinger"].append(hellinger(p, p0))
        for q in q_list:
            out[f"l{q:g}"].append(lq_distance(p, p0, q))
    return {m: np.asarray(v) for m, v in out.items()}


def run_replicate(cfg: ExperimentConfig, n: int, replicate: int):
    """One (n, replicate) cell: returns a list of RateRow, or raises."""
    x = replicate_data(cfg, n, replicate)
    chain_ss = task_seed(cfg.seed, n, replicate)
    m = cfg.mcmc
    draws = posterior_chain(
        x, cfg.dp, cfg.kernel, iters=m.iters, burn_in=m.burn_in, thin=m.thin, seed=np.random.default_rng(chain_ss)
    )
    dists = posterior_distances(draws, cfg.G0, cfg.kernel, cfg.k_list, cfg.q_list)
    rows = []
    for metric in cfg.metrics:
        q50, q90 = np.quantile(dists[metric], [0.5, 0.9])
        rows.append(RateRow(n, replicate, metric, max(float(q50), 0.0), max(float(q90), 0.0)))
    return rows


def _cell(args):
    cfg, n, rep = args
    try:
        return n, rep, run_replicate(cfg, n, rep), None
    except (ChainError, quadrature.QuadratureError, FloatingPointError, ValueError) as exc:
        return n, rep, None, f"{type(exc).__name__}: {exc}"


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads <= 0:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, threads)


def run_contraction_experiment(cfg: ExperimentConfig, threads: int | None = None) -> RateTable:
    """Posterior q50/q90 of every metric for each (n, replicate), plus fitted slopes."""
    if cfg.cost > cfg.budget:
        raise BudgetExceeded(
            f"experiment needs {cfg.cost} distance evaluations, above the budget of {cfg.budget}"
        )
    tasks = [(cfg, n, rep) for n in cfg.n_ladder for rep in range(cfg.replicates)]
    workers = resolve_threads(threads if threads is not None else cfg.threads)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, tasks))
    else:
        results = [_cell(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1]))
    table = RateTable(theory={m: theory_exponent(m) for m in cfg.metrics})
    for n, rep, rows, err in results:
        if err is not None:
            log.warning("n=%d replicate=%d failed: %s", n, rep, err)
            table.failed.append((n, rep, err))
        else:
            table.rows.extend(rows)
    if len(table.failed) > len(tasks) / 2:
        raise ExperimentAborted(f"{len(table.failed)} of {len(tasks)} cells failed")
    for metric in cfg.metrics:
        try:
            table.fitted[metric] = fit_rate(table, metric)
        except ValueError as exc:
            log.warning("no fit for %s: %s", metric, exc)
    return table


def decreasing_replicates(table: RateTable, metric: str) -> int:
    """Number of replicates whose q50 column is strictly decreasing in n."""
    reps = sorted({r.replicate for r in table.rows if r.metric == metric})
    count = 0
    for rep in reps:
        _, q = table.column(metric, rep)
        count += bool(np.all(np.diff(q) < 0))
    return count
