import json

import numpy as np
import pytest

from mtem.experiments import (ExpectedCheck, build_example, decay_table_csv, example_family,
                              rate_certificates, run_reproduction)
from mtem.integrator import simulate_ensemble
from mtem.model import stability_margin, validate_problem


def test_family_matches_closed_forms():
    fam = example_family()
    rng = np.random.default_rng(0)
    x, y, t = rng.normal(size=50), rng.normal(size=50), 1.7
    f = fam.drift(x[:, None], y[:, None], t)[:, 0]
    g = fam.diffusion(x[:, None], y[:, None], t)[:, 0, 0]
    np.testing.assert_allclose(f, (-2 * x + y / 2 - x ** 3 - x * y ** 4) / (1 + t), rtol=1e-13)
    np.testing.assert_allclose(g ** 2, (2 * x ** 2 * y ** 4 + y ** 2 / 2 + 2 * x ** 4) / (1 + t),
                               rtol=1e-13)


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_examples_validate(name):
    exp = build_example(name)
    assert validate_problem(exp.problem).passed
    assert stability_margin(exp.problem) == pytest.approx(0.5)


def test_example_grids(example1, example2):
    assert (example1.grid.dt, example1.grid.m, example1.grid.n_steps) == (0.1, 10, 5000)
    assert (example2.grid.dt, example2.grid.m, example2.grid.n_steps) == (0.05, 0, 1000)
    assert example2.problem.history(0.0)[0] == 3.0
    with pytest.raises(KeyError):
        build_example("example9")


def test_expected_check_aggregates():
    vals = [-2.0, -1.5, -0.4, -1.0]
    assert ExpectedCheck("m", "s", "median", "<=", -1.0).evaluate(vals) == (-1.25, True)
    assert ExpectedCheck("f", "s", "fraction_le:-0.5", ">=", 0.8).evaluate(vals) == (0.75, False)
    assert ExpectedCheck("a", "s", "max_abs", "<=", 1.0).evaluate(vals)[1] is False


def test_certificates(example1, example2):
    scheme, exact = rate_certificates(example1.problem, example1.regime)
    assert scheme.epsilon == 1 / 16 and abs(scheme.residual) < 1e-10
    assert scheme.c_tilde0 == pytest.approx(0.0764756519392904, abs=1e-12)
    assert exact.gamma_star == 1.0
    scheme, exact = rate_certificates(example2.problem, example2.regime, epsilon=0.05)
    assert scheme.c_tilde0 == pytest.approx(0.3) and exact.gamma0 is None


def test_reproduction_report_is_deterministic(example2):
    a = run_reproduction(example2, n_seeds=4)
    b = run_reproduction(example2, n_seeds=4, workers=1)
    assert a.per_seed == b.per_seed and a.verdicts == b.verdicts
    doc = json.loads(a.to_json())
    assert doc["experiment"] == "example2" and len(doc["per_seed"]) == 4
    assert "[PASS]" in a.to_text() or "[FAIL]" in a.to_text()


def test_decay_table(example2):
    recs = simulate_ensemble(example2.problem, example2.policy, example2.grid, 1, 2)
    lines = decay_table_csv(recs).strip().split("\n")
    assert lines[0] == "path_index,k,t,as_statistic,exp_statistic"
    assert len(lines) == 1 + 2 * 1001
    assert lines[1].endswith("nan,nan")
