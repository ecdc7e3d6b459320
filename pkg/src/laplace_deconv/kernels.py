"""Laplace and Gaussian location kernels and their mixtures p_G = f * G."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .measures import DiscreteMeasure

LAPLACE = "laplace"
GAUSSIAN = "gaussian"

ORDINARY_SMOOTH = "ordinary"
SUPERSMOOTH = "supersmooth"

# quadrature window half-excess beyond the support for each kernel
LAPLACE_TAIL = 40.0
GAUSSIAN_TAIL_SIGMAS = 12.0


@dataclass(frozen=True)
class Smoothness:
    kind: str
    beta: float


@dataclass(frozen=True)
class Kernel:
    variant: str
    sigma: float = 1.0

    def __post_init__(self):
        if self.variant not in (LAPLACE, GAUSSIAN):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if not self.sigma > 0:
            raise ValueError(f"kernel scale must be positive, got {self.sigma}")

    @property
    def smoothness(self) -> Smoothness:
        if self.variant == LAPLACE:
            return Smoothness(ORDINARY_SMOOTH, 2.0)
        return Smoothness(SUPERSMOOTH, 2.0)

    @property
    def tail(self) -> float:
        if self.variant == LAPLACE:
            return LAPLACE_TAIL
        return GAUSSIAN_TAIL_SIGMAS * self.sigma

    @property
    def sup(self) -> float:
        """Supremum of the density."""
        if self.variant == LAPLACE:
            return 0.5
        return 1.0 / (math.sqrt(2.0 * math.pi) * self.sigma)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if self.variant == LAPLACE:
            return 0.5 * np.exp(-np.abs(x))
        s = self.sigma
        return np.exp(-0.5 * (x / s) ** 2) / (math.sqrt(2.0 * math.pi) * s)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.variant == LAPLACE:
            return np.where(x < 0, 0.5 * np.exp(np.minimum(x, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(x, 0.0)))
        return special.ndtr(x / self.sigma)

    def cf(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.variant == LAPLACE:
            return (1.0 / (1.0 + lam**2)).astype(complex)
        return np.exp(-0.5 * (self.sigma * lam) ** 2).astype(complex)

    def sample_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.variant == LAPLACE:
            return rng.laplace(0.0, 1.0, size=n)
        return rng.normal(0.0, self.sigma, size=n)

    def lq_norm(self, q: float) -> float:
        """||f||_q."""
        if math.isinf(q):
            return self.sup
        if self.variant == LAPLACE:
            return 0.5 * (2.0 / q) ** (1.0 / q)
        s = self.sigma
        return (2.0 * math.pi * s * s) ** (-0.5) * (2.0 * math.pi * s * s / q) ** (0.5 / q)

    def derivative_lq_norm(self, q: float) -> float:
        """||f'||_q. For Laplace |f'| = f, so this equals ||f||_q."""
        if self.variant == LAPLACE:
            return self.lq_norm(q)
        s = self.sigma
        if math.isinf(q):
            return math.exp(-0.5) / (math.sqrt(2.0 * math.pi) * s * s)
        g = lambda x: np.abs(x / s**2 * self.density(x)) ** q
        val, _ = integrate.quad(g, -self.tail, self.tail, points=[0.0], limit=200)
        return val ** (1.0 / q)

    def to_dict(self) -> dict:
        if self.variant == LAPLACE:
            return {"variant": LAPLACE}
        return {"variant": GAUSSIAN, "sigma": float(self.sigma)}

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        return cls(d["variant"], float(d.get("sigma", 1.0)))

    @classmethod
    def parse(cls, text: str) -> "Kernel":
        """'laplace', 'gaussian' or 'gaussian:<sigma>'."""
        name, _, arg = text.partition(":")
        name = name.strip().lower()
        if name == LAPLACE and not arg:
            return laplace()
        if name == GAUSSIAN:
            return gaussian(float(arg) if arg else 1.0)
        raise ValueError(f"cannot parse kernel spec {text!r}")


def laplace() -> Kernel:
    return Kernel(LAPLACE)


def gaussian(sigma: float = 1.0) -> Kernel:
    return Kernel(GAUSSIAN, sigma)


def kernel_density(k: Kernel, x):
    return k.density(x)


def kernel_cf(k: Kernel, lam):
    return k.cf(lam)


@dataclass(frozen=True, eq=False)
class MixtureDensity:
    """The density x -> sum_i w_i f(x - z_i)."""

    kernel: Kernel
    mixing: DiscreteMeasure

    def __call__(self, x):
        return mixture_density(self, x)

    @property
    def a(self) -> float:
        return self.mixing.a

    def cf(self, lam):
        lam = np.asarray(lam, dtype=float)
        g = np.exp(1j * np.multiply.outer(lam, self.mixing.atoms)) @ self.mixing.weights
        return self.kernel.cf(lam) * g

    def window(self) -> tuple[float, float]:
        """Integration window; tail mass outside is below double precision."""
        ext = self.mixing.a + self.kernel.tail
        return -ext, ext

    def to_dict(self) -> dict:
        return {"kernel": self.kernel.to_dict(), "mixing": self.mixing.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureDensity":
        return cls(Kernel.from_dict(d["kernel"]), DiscreteMeasure.from_dict(d["mixing"]))


def _laplace_mixture(z: np.ndarray, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    # p(x) = e^{-x}/2 sum_{z_i <= x} w_i e^{z_i} + e^{x}/2 sum_{z_i > x} w_i e^{-z_i}
    left = np.concatenate([[0.0], np.cumsum(w * np.exp(z))])
    right = np.concatenate([np.cumsum((w * np.exp(-z))[::-1])[::-1], [0.0]])
    idx = np.searchsorted(z, x, side="right")
    return 0.5 * (np.exp(-x) * left[idx] + np.exp(x) * right[idx])


def mixture_density(m: MixtureDensity, x):
    x = np.asarray(x, dtype=float)
    z, w = m.mixing.atoms, m.mixing.weights
    if m.kernel.variant == LAPLACE:
        return _laplace_mixture(z, w, x)
    flat = x.ravel()
    out = np.empty_like(flat)
    step = max(1, 2_000_000 // max(z.size, 1))
    for s in range(0, flat.size, step):
        out[s : s + step] = m.kernel.density(flat[s : s + step, None] - z[None, :]) @ w
    return out.reshape(x.shape)


def sample_mixture(m: MixtureDensity, n: int, seed) -> np.ndarray:
    """n draws X = Z + e with Z ~ G and e ~ f, reproducible from ``seed``."""
    if n < 0:
        raise ValueError(f"sample size must be nonnegative, got {n}")
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.empty(0)
    idx = rng.choice(len(m.mixing), size=n, p=m.mixing.weights)
    return m.mixing.atoms[idx] + m.kernel.sample_noise(rng, n)
