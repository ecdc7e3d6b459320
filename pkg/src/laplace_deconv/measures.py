"""Finitely supported probability measures on a compact interval [-a, a]."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

MERGE_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms and weights of a probability measure supported in [-a, a].

    Build instances with :func:`make_discrete`; it sorts, merges duplicate
    atoms and validates. Arrays are read-only.
    """

    atoms: np.ndarray
    weights: np.ndarray
    a: float

    def __len__(self) -> int:
        return self.atoms.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.a == other.a
            and np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.a, self.atoms.tobytes(), self.weights.tobytes()))

    def __repr__(self):
        return f"DiscreteMeasure(n_atoms={len(self)}, a={self.a})"

    def cdf(self, z) -> np.ndarray:
        """G((-inf, z]) evaluated elementwise."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.atoms, np.asarray(z, dtype=float), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def interval_mass(self, lo: float, hi: float) -> float:
        """G([lo, hi]) for a closed interval."""
        mask = (self.atoms >= lo) & (self.atoms <= hi)
        return float(self.weights[mask].sum())

    def to_dict(self) -> dict:
        return {
            "a": float(self.a),
            "atoms": [float(z) for z in self.atoms],
            "weights": [float(w) for w in self.weights],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        return make_discrete(d["atoms"], d["weights"], d["a"])

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        return cls.from_dict(json.loads(text))


def make_discrete(atoms: Iterable[float], weights: Iterable[float], a: float) -> DiscreteMeasure:
    """Validate and normalize a finitely supported probability measure.

    Atoms closer than ``MERGE_TOL`` are merged (weights added, smallest
    location kept). Weight sums within ``RENORMALIZE_TOL`` of one are
    rescaled; anything further off is rejected.
    """
    z = np.asarray(atoms, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    a = float(a)
    if z.size != w.size:
        raise ValueError(f"atoms and weights differ in length ({z.size} vs {w.size})")
    if z.size == 0:
        raise ValueError("a probability measure needs at least one atom")
    if not a > 0 or not np.isfinite(a):
        raise ValueError(f"support halfwidth a must be positive and finite, got {a}")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
        raise ValueError("atoms and weights must be finite")
    if np.any(w < 0):
        raise ValueError(f"negative weight {w.min()!r}")
    slack = MERGE_TOL * max(a, 1.0)
    if np.any(np.abs(z) > a + slack):
        bad = z[np.abs(z) > a + slack][0]
        raise ValueError(f"atom {bad!r} lies outside [-{a}, {a}]")
    total = w.sum()
    if abs(total - 1.0) > RENORMALIZE_TOL:
        raise ValueError(f"weights sum to {total!r}, not 1 (tolerance {RENORMALIZE_TOL})")

    z = np.clip(z, -a, a)
    order = np.argsort(z, kind="stable")
    z, w = z[order], w[order]
    # group atoms whose gap to the predecessor is below the merge tolerance
    new_group = np.concatenate([[True], np.diff(z) > MERGE_TOL])
    starts = np.flatnonzero(new_group)
    z = z[starts]
    w = np.add.reduceat(w, starts)
    w = w / w.sum()

    z.setflags(write=False)
    w.setflags(write=False)
    return DiscreteMeasure(atoms=z, weights=w, a=a)


def point_mass(t: float, a: float) -> DiscreteMeasure:
    return make_discrete([t], [1.0], a)


def quantile(G: DiscreteMeasure, u: float) -> float:
    """Smallest atom z with G((-inf, z]) >= u, for u in (0, 1)."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {u}")
    cum = np.cumsum(G.weights)
    idx = int(np.searchsorted(cum, u, side="left"))
    return float(G.atoms[min(idx, len(G) - 1)])


def generalized_moments(
    G: DiscreteMeasure, test_functions: Sequence[Callable[[np.ndarray], np.ndarray]]
) -> np.ndarray:
    """Integrals of each test function against G, as exact weighted sums."""
    out = np.empty(len(test_functions))
    for i, psi in enumerate(test_functions):
        vals = np.broadcast_to(np.asarray(psi(G.atoms), dtype=float), G.atoms.shape)
        out[i] = float(np.dot(G.weights, vals))
    return out


def separate_atoms(G: DiscreteMeasure, gap: float) -> DiscreteMeasure:
    """Move all mass onto a maximal ``gap``-separated subset of the atoms.

    The subset is chosen greedily from the left. Every original atom sends
    its weight to the nearest retained atom, ties going to the smaller one.
    """
    if not gap > 0:
        raise ValueError(f"gap must be positive, got {gap}")
    kept = [G.atoms[0]]
    for z in G.atoms[1:]:
        if z - kept[-1] >= gap:
            kept.append(z)
    kept = np.asarray(kept)
    # nearest retained atom, ties toward the left neighbour
    right = np.clip(np.searchsorted(kept, G.atoms, side="left"), 0, kept.size - 1)
    left = np.clip(right - 1, 0, kept.size - 1)
    use_left = np.abs(G.atoms - kept[left]) <= np.abs(kept[right] - G.atoms)
    target = np.where(use_left, left, right)
    mass = np.bincount(target, weights=G.weights, minlength=kept.size)
    return make_discrete(kept, mass, G.a)


def mixture_of(measures: Sequence[DiscreteMeasure], coefficients: Sequence[float]) -> DiscreteMeasure:
    """Convex combination of measures sharing the same halfwidth."""
    a = measures[0].a
    if any(m.a != a for m in measures):
        raise ValueError("measures must share the support halfwidth")
    atoms = np.concatenate([m.atoms for m in measures])
    weights = np.concatenate([c * m.weights for m, c in zip(measures, coefficients)])
    return make_discrete(atoms, weights, a)


def random_measure(rng: np.random.Generator, n_atoms: int, a: float) -> DiscreteMeasure:
    """Atoms uniform on [-a, a], weights Dirichlet(1, ..., 1)."""
    atoms = rng.uniform(-a, a, size=n_atoms)
    weights = rng.dirichlet(np.ones(n_atoms))
    return make_discrete(atoms, weights, a)


def uniform_grid_measure(n_points: int, a: float) -> DiscreteMeasure:
    """Equal weights on ``n_points`` equally spaced atoms spanning [-a, a]."""
    return make_discrete(np.linspace(-a, a, n_points), np.full(n_points, 1.0 / n_points), a)


def perturbed_measure(rng: np.random.Generator, G: DiscreteMeasure, scale: float) -> DiscreteMeasure:
    """Jitter atoms by N(0, scale^2) (clipped to [-a, a]) and tilt weights by exp(N(0, scale^2))."""
    atoms = np.clip(G.atoms + scale * rng.standard_normal(len(G)), -G.a, G.a)
    w = G.weights * np.exp(scale * rng.standard_normal(len(G)))
    return make_discrete(atoms, w / w.sum(), G.a)


def random_pair(rng: np.random.Generator, a: float = 1.0, max_atoms: int = 8):
    """A pair (G, G') used to exercise inequalities between distances.

    Half the time G' is an independent draw, otherwise a perturbation of G
    at a log-uniform scale in [1e-3, 0.3], so both far and near pairs occur.
    """
    G = random_measure(rng, int(rng.integers(1, max_atoms + 1)), a)
    if rng.random() < 0.5:
        return G, random_measure(rng, int(rng.integers(1, max_atoms + 1)), a)
    scale = float(np.exp(rng.uniform(np.log(1e-3), np.log(0.3))))
    return G, perturbed_measure(rng, G, scale)
