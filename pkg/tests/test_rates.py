import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laplace_deconv.rates import (
    BudgetExceeded,
    ExperimentConfig,
    MCMCSettings,
    RateRow,
    RateTable,
    decreasing_replicates,
    fit_rate,
    replicate_data,
    run_contraction_experiment,
    theory_exponent,
    theory_log_power,
)

LADDER = (250, 500, 1000, 2000, 4000)


def synthetic(fn, reps=3, metric="hellinger"):
    rows = [RateRow(n, r, metric, fn(n), 2 * fn(n)) for n in LADDER for r in range(reps)]
    return RateTable(rows=rows)


def test_theory_exponents():
    assert theory_exponent("w1") == pytest.approx(0.125)
    assert theory_exponent("w2") == pytest.approx(3 / 32)
    assert theory_exponent("hellinger") == pytest.approx(0.375)
    assert theory_exponent("l2") == pytest.approx(0.375)
    assert theory_exponent("l3") == pytest.approx(4 / 15)
    assert theory_log_power("w1") == pytest.approx((1 + 7 / 8) / 3)
    with pytest.raises(ValueError):
        theory_exponent("x1")


def test_fit_exact_power_law():
    fit = fit_rate(synthetic(lambda n: n**-0.375), "hellinger")
    assert abs(fit.slope + 0.375) < 1e-12 and fit.r2 == pytest.approx(1.0)


def test_fit_power_law_with_log_factor():
    fit = fit_rate(synthetic(lambda n: 2.0 * n**-0.375 * math.log(n) ** 0.375), "hellinger")
    assert -0.375 <= fit.slope <= -0.25


def test_fit_constant_response():
    fit = fit_rate(synthetic(lambda n: 0.3), "hellinger")
    assert fit.slope == 0 and fit.r2 == 0


def test_fit_ci_covers_true_slope_under_noise():
    rng = np.random.default_rng(501)
    covered = 0
    for _ in range(200):
        t = synthetic(lambda n: n**-0.3 * math.exp(0.1 * rng.standard_normal()))
        lo, hi = fit_rate(t, "hellinger").ci
        covered += lo <= -0.3 <= hi
    assert 0.9 <= covered / 200 <= 0.99


def test_fit_degenerate():
    t = RateTable(rows=[RateRow(n, 0, "w1", 0.1, 0.2) for n in (100, 200)])
    with pytest.raises(ValueError, match="3 ladder"):
        fit_rate(t, "w1")
    t = synthetic(lambda n: 0.0)
    with pytest.raises(ValueError, match="positive"):
        fit_rate(t, "hellinger")


@given(st.lists(st.floats(0, 1e6, allow_nan=False, allow_subnormal=True), min_size=2, max_size=2))
def test_csv_roundtrip_bit_exact(vals):
    rows = [RateRow(250, 0, "w1", vals[0], vals[1]), RateRow(500, 2, "hellinger", 1 / 3, math.pi)]
    t = RateTable(rows=rows)
    back = RateTable.from_csv(t.to_csv())
    assert back.rows == rows
    assert back.to_csv() == t.to_csv()


def test_csv_header():
    assert synthetic(lambda n: 1.0).to_csv().splitlines()[0] == "n,replicate,metric,q50,q90"
    with pytest.raises(ValueError):
        RateTable.from_csv("a,b\n1,2\n")


def test_config_validation():
    with pytest.raises(ValueError, match="increasing"):
        ExperimentConfig(n_ladder=(100, 50, 200))
    with pytest.raises(ValueError, match="3 entries"):
        ExperimentConfig(n_ladder=(100, 200))
    with pytest.raises(ValueError, match="replicates"):
        ExperimentConfig(replicates=2)
    cfg = ExperimentConfig(k_list=(1, 2), q_list=(2,))
    assert cfg.metrics == ["w1", "w2", "hellinger", "l2"]
    back = ExperimentConfig.from_dict(cfg.to_dict())
    assert back.to_dict() == cfg.to_dict()
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"bogus": 1})


def test_budget_guard():
    with pytest.raises(BudgetExceeded):
        run_contraction_experiment(ExperimentConfig(budget=10))


def test_replicate_streams_are_nested():
    cfg = ExperimentConfig(n_ladder=(10, 20, 40))
    assert np.array_equal(replicate_data(cfg, 10, 1), replicate_data(cfg, 40, 1)[:10])
    assert not np.array_equal(replicate_data(cfg, 10, 0), replicate_data(cfg, 10, 1))


def small_config(seed=0, **kw):
    return ExperimentConfig(
        n_ladder=(100, 200, 400),
        replicates=3,
        k_list=(1, 2),
        q_list=(2,),
        mcmc=MCMCSettings(iters=300, burn_in=200, thin=5),
        seed=seed,
        **kw,
    )


def test_small_experiment_shape_and_ordering():
    table = run_contraction_experiment(small_config())
    assert len(table.rows) == 3 * 3 * 4
    assert not table.failed
    for r in table.rows:
        assert 0 <= r.q50 <= r.q90
    # W_k is nondecreasing in k on every posterior draw, hence on its quantiles
    by_key = {(r.n, r.replicate, r.metric): r.q50 for r in table.rows}
    for n in (100, 200, 400):
        for rep in range(3):
            assert by_key[(n, rep, "w1")] <= by_key[(n, rep, "w2")] + 1e-12
    assert set(table.fitted) == {"w1", "w2", "hellinger", "l2"}
    assert table.theory["w1"] == pytest.approx(0.125)
    assert table.fitted["hellinger"].slope < 0
    s = table.summary()
    assert s["theory_slope"]["hellinger"] == pytest.approx(-0.375)


def test_experiment_deterministic_and_thread_invariant():
    a = run_contraction_experiment(small_config(seed=5))
    b = run_contraction_experiment(small_config(seed=5), threads=2)
    assert a.to_csv() == b.to_csv()


def test_failed_cells_are_recorded(monkeypatch):
    from laplace_deconv import rates

    real = rates.run_replicate

    def flaky(cfg, n, rep):
        if rep == 0:
            raise rates.ChainError("boom", None)
        return real(cfg, n, rep)

    monkeypatch.setattr(rates, "run_replicate", flaky)
    table = run_contraction_experiment(small_config())
    assert len(table.failed) == 3
    assert {r.replicate for r in table.rows} == {1, 2}

    def broken(cfg, n, rep):
        raise rates.ChainError("boom", None)

    monkeypatch.setattr(rates, "run_replicate", broken)
    with pytest.raises(rates.ExperimentAborted):
        run_contraction_experiment(small_config())


def test_decreasing_replicates_counter():
    t = synthetic(lambda n: 1 / n)
    assert decreasing_replicates(t, "hellinger") == 3
    rows = [RateRow(n, 0, "w1", q, q) for n, q in zip(LADDER, [1, 0.5, 0.6, 0.3, 0.2])]
    assert decreasing_replicates(RateTable(rows=rows), "w1") == 0
