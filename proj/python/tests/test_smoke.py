import math

import numpy as np
import pytest

import mibayes


def test_generate_interval_design():
    values, columns = mibayes.generate("ex51", 2000, 7)
    assert columns == ["y1", "y2"]
    assert values.shape == (2000, 2)
    assert np.all(values[:, 0] <= values[:, 1])
    assert abs(values[:, 1].mean() - 5.0) < 0.03


def test_orthant_examples():
    p, se = mibayes.orthant_probability(np.zeros(2), np.eye(2))
    assert p == pytest.approx(0.25, abs=1e-15)
    assert se == 0.0
    lo, hi = mibayes.orthant_bounds(np.full(3, 3.0), np.eye(3))
    assert lo <= hi
    assert hi == pytest.approx(0.5 * math.erfc(-3.0 / math.sqrt(2.0)))


def test_posterior_sampling_and_intervals():
    values, columns = mibayes.generate("ex51", 5000, 3)
    post = mibayes.Posterior("interval_mean", values, columns, psi=[0.1, 0.5], lower=[-2.0], upper=[7.0])
    assert post.n == 5000 and post.dim == 1
    assert post.log_posterior(np.array([-1.5])) < post.log_posterior(np.array([2.5])) - 100
    assert math.isinf(post.log_posterior(np.array([8.0])))
    draws, log_post, rate = post.sample(5000, seed=11, init=np.array([1.0]))
    assert draws.shape == (5000, 1)
    assert 0.0 < rate < 1.0
    lo, hi = mibayes.quantile_interval(draws, 1.0 / 5000)
    assert abs(lo) < 0.15 and abs(hi - 5.0) < 0.15
    hull_lo, hull_hi, points = post.level_set("loglog-n", 0.005)
    assert hull_lo[0] < 0.1 and hull_hi[0] > 4.8


def test_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        mibayes.generate("nope", 10, 1)
    with pytest.raises(ValueError, match="psi"):
        mibayes.validate({"experiment": "ex51", "psi": [0.1, -1]})


def test_run_writes_outputs(tmp_path):
    cfg = {"experiment": "ex53", "n": [200], "seed": 4, "output_dir": str(tmp_path)}
    effective = mibayes.validate(cfg)
    assert effective["selection"]["sigma_n2"] == "n^2"
    files = mibayes.run(cfg)
    report = tmp_path / "selection_n200.csv"
    assert str(report) in files
    rows = report.read_text().splitlines()
    assert len(rows) == 16
    assert sum(float(r.split(",")[-1]) for r in rows[1:]) == pytest.approx(1.0, abs=1e-10)
