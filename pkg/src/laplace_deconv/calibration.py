"""Frozen constants for the inequalities that only hold up to a multiple.

Values live in ``calibration.json`` next to this module and are produced by
``scripts/calibrate_constants.py`` from fixed calibration families. Tests
load them and never refit.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

# keys
APPROX_HELLINGER_LAPLACE = "approx_hellinger_laplace"
APPROX_L2_LAPLACE = "approx_l2_laplace"
APPROX_L2_GAUSSIAN = "approx_l2_gaussian"
KL_OVER_H2 = "kl_over_h2"
H2_OVER_L2 = "h2_over_l2"
SMOOTHING_W1 = "smoothing_w1"

SAFETY_FACTOR = 2.0


@lru_cache(maxsize=None)
def _table() -> dict:
    text = resources.files(__package__).joinpath("calibration.json").read_text()
    return json.loads(text)


def constant(key: str) -> float:
    table = _table()["constants"]
    if key not in table:
        raise KeyError(f"no frozen constant {key!r}; run scripts/calibrate_constants.py")
    return float(table[key])


def approx_key(kernel_variant: str, metric: str) -> str:
    if metric == "hellinger":
        return APPROX_HELLINGER_LAPLACE
    return f"approx_{metric}_{kernel_variant}"


def reload() -> None:
    _table.cache_clear()
