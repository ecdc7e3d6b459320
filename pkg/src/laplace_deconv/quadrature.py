"""Adaptive composite Gauss-Legendre quadrature on piecewise-smooth integrands.

Laplace mixtures are smooth between atoms and have kinks at them, so the
integration window is split at every atom of both densities before any
refinement happens.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize

_LO_NODES, _LO_W = np.polynomial.legendre.leggauss(12)
_HI_NODES, _HI_W = np.polynomial.legendre.leggauss(24)

ABS_TOL = 1e-11
REL_TOL = 1e-11
FAIL_TOL = 1e-8


class QuadratureError(RuntimeError):
    """Raised when the error estimate stays above the failure tolerance."""

    def __init__(self, value: float, error: float):
        super().__init__(f"quadrature did not converge: value {value!r}, estimated error {error:.3g}")
        self.value = value
        self.error = error


def make_pieces(breakpoints, lo: float, hi: float, max_len: float) -> np.ndarray:
    """Split [lo, hi] at the breakpoints, then into pieces no longer than max_len."""
    b = np.asarray(breakpoints, dtype=float)
    b = np.unique(np.concatenate([[lo, hi], b[(b > lo) & (b < hi)]]))
    lefts, rights = [], []
    for x0, x1 in zip(b[:-1], b[1:]):
        m = max(1, int(np.ceil((x1 - x0) / max_len)))
        edges = np.linspace(x0, x1, m + 1)
        lefts.append(edges[:-1])
        rights.append(edges[1:])
    return np.stack([np.concatenate(lefts), np.concatenate(rights)], axis=1)


def _rule(fn, pieces, nodes, wts):
    half = 0.5 * (pieces[:, 1] - pieces[:, 0])
    mid = 0.5 * (pieces[:, 1] + pieces[:, 0])
    x = mid[:, None] + half[:, None] * nodes[None, :]
    vals = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
    return half * (vals @ wts)


def integrate_pieces(fn, pieces: np.ndarray, max_rounds: int = 40) -> tuple[float, float]:
    """Integrate a vectorized ``fn`` over the union of ``pieces``.

    Each piece is estimated by 12- and 24-point rules; pieces whose two
    estimates disagree beyond tolerance are bisected. Returns the value and
    the summed disagreement as error estimate.
    """
    total_len = float(np.sum(pieces[:, 1] - pieces[:, 0]))
    value, error = 0.0, 0.0
    pending = pieces
    for _ in range(max_rounds):
        if pending.shape[0] == 0:
            break
        lo = _rule(fn, pending, _LO_NODES, _LO_W)
        hi = _rule(fn, pending, _HI_NODES, _HI_W)
        err = np.abs(hi - lo)
        frac = (pending[:, 1] - pending[:, 0]) / total_len
        ok = err <= np.maximum(ABS_TOL * frac, REL_TOL * np.abs(hi))
        value += float(hi[ok].sum())
        error += float(err[ok].sum())
        bad = pending[~ok]
        if bad.shape[0] == 0:
            pending = bad
            break
        mid = 0.5 * (bad[:, 0] + bad[:, 1])
        pending = np.concatenate(
            [np.stack([bad[:, 0], mid], axis=1), np.stack([mid, bad[:, 1]], axis=1)]
        )
        last_hi, last_err = hi[~ok], err[~ok]
    else:
        value += float(last_hi.sum())
        error += float(last_err.sum())
    if error > FAIL_TOL:
        raise QuadratureError(value, error)
    return value, error


def sign_change_points(fn, pieces: np.ndarray, samples: int = 16) -> np.ndarray:
    """Roots of ``fn`` located by sign changes on a per-piece sample grid."""
    t = np.linspace(0.0, 1.0, samples + 1)
    x = pieces[:, :1] + (pieces[:, 1:] - pieces[:, :1]) * t[None, :]
    v = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
    rows, cols = np.nonzero(v[:, :-1] * v[:, 1:] < 0)
    roots = [optimize.brentq(fn, x[r, c], x[r, c + 1], xtol=1e-14) for r, c in zip(rows, cols)]
    return np.asarray(roots, dtype=float)


def grid_max(fn, pieces: np.ndarray, extra=(), samples: int = 24) -> float:
    """Supremum of ``fn`` by a dense grid, polished by bounded local search."""
    t = np.linspace(0.0, 1.0, samples + 1)
    x = (pieces[:, :1] + (pieces[:, 1:] - pieces[:, :1]) * t[None, :]).ravel()
    x = np.concatenate([x, np.asarray(extra, dtype=float)])
    v = np.asarray(fn(x), dtype=float)
    best = float(v.max())
    order = np.argsort(x)
    xs, vs = x[order], v[order]
    for i in np.argsort(vs)[-5:]:
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, xs.size - 1)]
        if hi > lo:
            res = optimize.minimize_scalar(
                lambda s: -float(fn(np.array([s]))[0]), bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-12},
            )
            best = max(best, -float(res.fun))
    return best
