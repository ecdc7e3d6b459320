"""Finite approximation of mixing measures by moment matching."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.special import eval_chebyt

from . import calibration
from .distances import hellinger, lq_distance
from .kernels import LAPLACE, ORDINARY_SMOOTH, Kernel, MixtureDensity, laplace
from .measures import DiscreteMeasure, generalized_moments, make_discrete

GRID_START = 512
GRID_MAX = 4096
RESIDUAL_TOL = 1e-8


class ApproximationError(RuntimeError):
    def __init__(self, message: str, result: "ApproxResult | None" = None):
        super().__init__(message)
        self.result = result


@dataclass
class ApproxResult:
    approximant: DiscreteMeasure
    support_count: int
    target_eps: float
    achieved_error: float
    metric: str
    moment_residuals: np.ndarray
    moment_order: int = 0
    budget: int = 0
    constant: float = math.nan
    grid_points: int = 0

    def to_dict(self) -> dict:
        return {
            "approximant": self.approximant.to_dict(),
            "support_count": self.support_count,
            "target_eps": self.target_eps,
            "achieved_error": self.achieved_error,
            "metric": self.metric,
            "moment_residuals": [float(r) for r in self.moment_residuals],
            "moment_order": self.moment_order,
            "budget": self.budget,
            "constant": self.constant,
            "grid_points": self.grid_points,
        }


# ---------------------------------------------------------------------------
# test-function families


def chebyshev_family(degrees: Sequence[int], a: float, weight=None) -> list[Callable]:
    """x -> weight(x) T_j(x/a); spans the same space as weight(x) x^j, j in degrees."""

    def make(j):
        if weight is None:
            return lambda z: eval_chebyt(j, np.asarray(z) / a)
        return lambda z: weight(np.asarray(z)) * eval_chebyt(j, np.asarray(z) / a)

    return [make(j) for j in degrees]


def hellinger_test_functions(k: int, a: float) -> list[Callable]:
    """e^{-z} together with e^{z/2} z^j for j < k (Chebyshev form)."""
    return [lambda z: np.exp(-np.asarray(z))] + chebyshev_family(
        range(k), a, weight=lambda z: np.exp(0.5 * z)
    )


def polynomial_test_functions(k: int, a: float) -> list[Callable]:
    """z^j for 1 <= j < k (Chebyshev form); j = 0 is the mass constraint."""
    return chebyshev_family(range(1, k), a)


# ---------------------------------------------------------------------------


def _solve_vertex(A: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    res = optimize.linprog(
        np.zeros(A.shape[1]),
        A_eq=A,
        b_eq=b,
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10, "presolve": False},
    )
    if res.status != 0:
        return None
    return np.clip(res.x, 0.0, None)


def moment_match(
    G: DiscreteMeasure,
    test_functions: Sequence[Callable],
    grid_points: int = GRID_START,
    return_grid: bool = False,
):
    """A measure on at most ``m + 1`` atoms sharing G's generalized moments.

    Solves the feasibility LP "nonnegative weights on G's atoms plus a uniform
    grid on [-a, a], matching the m moments and total mass" with a simplex
    method, so the solution is basic and has at most m + 1 nonzero weights.
    The weights on that support are then polished by nonnegative least
    squares. The grid doubles up to ``GRID_MAX`` points when the residual
    stays above ``RESIDUAL_TOL``.
    """
    m = len(test_functions)
    if m < 1:
        raise ValueError("need at least one test function")
    if len(G) <= m + 1:
        return (G, 0) if return_grid else G
    target = np.concatenate([[1.0], generalized_moments(G, test_functions)])
    n_grid = grid_points
    best = None
    while n_grid <= GRID_MAX:
        cand = np.unique(np.concatenate([G.atoms, np.linspace(-G.a, G.a, n_grid)]))
        A = np.vstack([np.ones_like(cand)] + [np.broadcast_to(psi(cand), cand.shape) for psi in test_functions])
        scale = np.maximum(np.abs(A).max(axis=1), 1e-300)
        As, bs = A / scale[:, None], target / scale
        w = _solve_vertex(As, bs)
        if w is not None:
            support = np.flatnonzero(w > 1e-15)
            ws, _ = optimize.nnls(As[:, support], bs)
            keep = ws > 0
            support, ws = support[keep], ws[keep]
            resid = np.abs(As[:, support] @ ws - bs)
            if best is None or resid.max() < best[2].max():
                best = (cand[support], ws, resid, n_grid)
            if resid.max() <= RESIDUAL_TOL:
                break
        n_grid *= 2
    if best is None or best[2].max() > RESIDUAL_TOL:
        worst = math.inf if best is None else float(best[2].max())
        raise ApproximationError(
            f"moment matching infeasible at tolerance {RESIDUAL_TOL} up to {GRID_MAX} grid points "
            f"(best residual {worst:.3g}, {m} test functions)"
        )
    atoms, ws, _, n_grid = best
    out = make_discrete(atoms, ws / ws.sum(), G.a)
    return (out, n_grid) if return_grid else out


# ---------------------------------------------------------------------------
# moment orders


def hellinger_moment_order(eps: float, a: float) -> int:
    """k = ceil(2 a e M) with frequency cutoff M = eps^(-2/3)."""
    return int(math.ceil(2.0 * a * math.e * eps ** (-2.0 / 3.0)))


def lq_moment_order(kernel: Kernel, q: float, eps: float) -> int:
    """Number of matched polynomial moments for L_q accuracy eps."""
    sm = kernel.smoothness
    if sm.kind == ORDINARY_SMOOTH:
        inv_p = 1.0 - (0.0 if math.isinf(q) else 1.0 / q)
        return int(math.ceil(2.0 * eps ** (-1.0 / (sm.beta - inv_p))))
    return int(math.ceil(2.0 * math.log(1.0 / eps) ** max(1.0 / sm.beta, 1.0)))


def hellinger_budget(eps: float, a: float) -> int:
    return hellinger_moment_order(eps, a) + 2


def lq_budget(kernel: Kernel, q: float, eps: float) -> int:
    return lq_moment_order(kernel, q, eps)


def _residuals(G, Gp, fns) -> np.ndarray:
    return generalized_moments(Gp, fns) - generalized_moments(G, fns)


def _metric_tag(q: float) -> str:
    return "linf" if math.isinf(q) else f"l{q:g}"


def approx_lq(
    G: DiscreteMeasure, kernel: Kernel, q: float, eps: float, constant: float | None = None
) -> ApproxResult:
    """Discrete G' with ||p_G - p_G'||_q <= C eps by matching polynomial moments."""
    if not q >= 2:
        raise ValueError(f"L_q approximation needs q >= 2, got {q}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    tag = _metric_tag(q)
    k = lq_moment_order(kernel, q, eps)
    fns = polynomial_test_functions(k, G.a)
    Gp, n_grid = moment_match(G, fns, return_grid=True) if fns else (G, 0)
    if not fns and len(G) > 1:
        Gp = make_discrete([float(np.dot(G.weights, G.atoms))], [1.0], G.a)
    err = lq_distance(MixtureDensity(kernel, G), MixtureDensity(kernel, Gp), q)
    C = calibration.constant(calibration.approx_key(kernel.variant, tag)) if constant is None else constant
    result = ApproxResult(
        approximant=Gp,
        support_count=len(Gp),
        target_eps=eps,
        achieved_error=err,
        metric=tag,
        moment_residuals=_residuals(G, Gp, fns) if fns else np.zeros(0),
        moment_order=k,
        budget=lq_budget(kernel, q, eps),
        constant=C,
        grid_points=n_grid,
    )
    if err > C * eps:
        raise ApproximationError(f"achieved {tag} error {err:.3g} exceeds C*eps = {C * eps:.3g}", result)
    return result


def approx_hellinger_laplace(G: DiscreteMeasure, eps: float, constant: float | None = None) -> ApproxResult:
    """Discrete G' with h(p_G, p_G') <= C eps for the Laplace kernel.

    Matches the moments of e^{-z} and e^{z/2} z^j, j < k, with
    k = ceil(2 a e eps^(-2/3)); the result has at most k + 2 atoms.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    k = hellinger_moment_order(eps, G.a)
    fns = hellinger_test_functions(k, G.a)
    Gp, n_grid = moment_match(G, fns, return_grid=True)
    kern = laplace()
    err = hellinger(MixtureDensity(kern, G), MixtureDensity(kern, Gp))
    C = calibration.constant(calibration.APPROX_HELLINGER_LAPLACE) if constant is None else constant
    result = ApproxResult(
        approximant=Gp,
        support_count=len(Gp),
        target_eps=eps,
        achieved_error=err,
        metric="hellinger",
        moment_residuals=_residuals(G, Gp, fns),
        moment_order=k,
        budget=k + 2,
        constant=C,
        grid_points=n_grid,
    )
    if err > C * eps:
        raise ApproximationError(f"achieved Hellinger error {err:.3g} exceeds C*eps = {C * eps:.3g}", result)
    return result


def l1_locality_bound(
    G: DiscreteMeasure, G_prime: DiscreteMeasure, eps: float, kernel: Kernel | None = None
) -> float:
    """2 ||f'||_1 eps + 2 sum_j |G[z_j - eps, z_j + eps] - p_j| over atoms z_j of G'.

    Bounds ||p_G - p_G'||_1 when the atoms of G' are more than 2 eps apart.
    """
    kernel = laplace() if kernel is None else kernel
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    gaps = np.diff(G_prime.atoms)
    if gaps.size and gaps.min() <= 2 * eps:
        raise ValueError(
            f"atoms of G' must be more than 2*eps = {2 * eps:g} apart (closest gap {gaps.min():.3g})"
        )
    cum = np.concatenate([[0.0], np.cumsum(G.weights)])
    lo = np.searchsorted(G.atoms, G_prime.atoms - eps, side="left")
    hi = np.searchsorted(G.atoms, G_prime.atoms + eps, side="right")
    masses = cum[hi] - cum[lo]
    return 2.0 * kernel.derivative_lq_norm(1.0) * eps + 2.0 * float(np.abs(masses - G_prime.weights).sum())
