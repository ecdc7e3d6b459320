"""Fit and freeze the multiplicative constants in calibration.json.

Each constant is the largest observed ratio on a fixed calibration family,
times SAFETY_FACTOR. The seeds here are disjoint from the ones used in
tests/, so the tests check the constants on fresh data.

    python3 scripts/calibrate_constants.py [--out PATH]
"""

import argparse
import json
import math
from pathlib import Path

import numpy as np

from laplace_deconv import calibration
from laplace_deconv.approximation import approx_hellinger_laplace, approx_lq
from laplace_deconv.distances import (
    hellinger_squared,
    kl_divergences,
    lq_distance,
    smoothing_bound,
    wasserstein_1d,
)
from laplace_deconv.kernels import MixtureDensity, gaussian, laplace
from laplace_deconv.measures import random_measure, random_pair

CALIBRATION_SEED = 20_250_917
EPS_LADDER = (0.2, 0.1, 0.05, 0.025)
N_MEASURES = 20
N_PAIRS = 50

OUT = Path(__file__).resolve().parents[1] / "src" / "laplace_deconv" / "calibration.json"


def approximation_family(rng):
    """20 random measures on [-1, 1] with 30 to 300 atoms."""
    return [random_measure(rng, int(rng.integers(30, 301)), 1.0) for _ in range(N_MEASURES)]


def approximation_ratios(family):
    out = {calibration.APPROX_HELLINGER_LAPLACE: [], calibration.APPROX_L2_LAPLACE: [], calibration.APPROX_L2_GAUSSIAN: []}
    for G in family:
        for eps in EPS_LADDER:
            r = approx_hellinger_laplace(G, eps, constant=math.inf)
            out[calibration.APPROX_HELLINGER_LAPLACE].append(r.achieved_error / eps)
            r = approx_lq(G, laplace(), 2.0, eps, constant=math.inf)
            out[calibration.APPROX_L2_LAPLACE].append(r.achieved_error / eps)
            r = approx_lq(G, gaussian(1.0), 2.0, eps, constant=math.inf)
            out[calibration.APPROX_L2_GAUSSIAN].append(r.achieved_error / eps)
    return out


def pair_ratios(rng):
    out = {calibration.KL_OVER_H2: [], calibration.H2_OVER_L2: [], calibration.SMOOTHING_W1: []}
    kern = laplace()
    for _ in range(N_PAIRS):
        G, H = random_pair(rng)
        p, q = MixtureDensity(kern, G), MixtureDensity(kern, H)
        h2 = hellinger_squared(p, q)
        l2 = lq_distance(p, q, 2.0)
        K, K2 = kl_divergences(p, q)
        bound, _, _ = smoothing_bound(p, q, 1.0, 2.0)
        if h2 > 0:
            out[calibration.KL_OVER_H2].append(max(K, K2) / h2)
        if l2 > 0:
            out[calibration.H2_OVER_L2].append(h2 / l2)
        if bound > 0:
            out[calibration.SMOOTHING_W1].append(wasserstein_1d(G, H, 1.0) / bound)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(OUT))
    args = ap.parse_args()

    approx_ss, pair_ss = np.random.SeedSequence(CALIBRATION_SEED).spawn(2)
    ratios = approximation_ratios(approximation_family(np.random.default_rng(approx_ss)))
    ratios.update(pair_ratios(np.random.default_rng(pair_ss)))

    constants, observed = {}, {}
    for key, vals in ratios.items():
        vals = np.asarray(vals)
        observed[key] = {"max": float(vals.max()), "median": float(np.median(vals)), "count": int(vals.size)}
        constants[key] = float(vals.max()) * calibration.SAFETY_FACTOR
        print(f"{key:28s} max ratio {vals.max():.4g}  median {np.median(vals):.4g}  -> C = {constants[key]:.4g}")

    doc = {
        "constants": constants,
        "observed": observed,
        "safety_factor": calibration.SAFETY_FACTOR,
        "seed": CALIBRATION_SEED,
        "eps_ladder": list(EPS_LADDER),
        "family": {"measures": N_MEASURES, "pairs": N_PAIRS},
    }
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
