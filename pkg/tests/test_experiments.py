import json
import math

import numpy as np
import pytest

from locinfo import experiments as ex
from locinfo.channels import constant_channel
from locinfo.dist_core import far_dist, uniform_dist
from locinfo.protocols import FAR, UNIFORM, Decision, ProtocolStrategy, TesterConstants as Constants, stream

K, EPS = 4, 0.25
SIGNS = ex.adversary_signs(K, count=4, seed=0)


def _fixed(verdict_fn):
    ch = constant_channel(2)
    return ProtocolStrategy(lambda s, t, prefix: ch, lambda tr, seed: Decision(verdict_fn(seed)), mode="private-coin")


def _coin():
    return _fixed(lambda seed: FAR if stream(seed, 2).random() < 0.5 else UNIFORM)


def test_wilson_interval_closed_form():
    x, n, z = 10, 100, 1.959963984540054
    centre = (x + z**2 / 2) / (n + z**2)
    half = z / (n + z**2) * math.sqrt(x * (n - x) / n + z**2 / 4)
    lo, hi = ex.wilson_interval(x, n)
    assert lo == pytest.approx(centre - half, abs=1e-9)
    assert hi == pytest.approx(centre + half, abs=1e-9)
    assert ex.wilson_interval(0, 0) == (0.0, 1.0)


def test_mc_error_always_correct():
    est = ex.mc_error(_fixed(lambda s: UNIFORM), uniform_dist(2), 5, 200, 0)
    assert est.errors == 0 and est.rate == 0 and est.low == 0
    est = ex.mc_error(_fixed(lambda s: FAR), far_dist([1, 1], 0.2), 5, 200, 0)
    assert est.rate == 0


def test_mc_error_coin_flip():
    est = ex.mc_error(_coin(), uniform_dist(2), 3, 2000, 1)
    assert est.low <= 0.5 <= est.high
    assert est.half_width < 0.03


def test_mc_error_reproducible_and_seed_dependent():
    a = ex.mc_error(_coin(), uniform_dist(2), 3, 500, 4)
    assert a == ex.mc_error(_coin(), uniform_dist(2), 3, 500, 4)
    assert a != ex.mc_error(_coin(), uniform_dist(2), 3, 500, 5)


def test_mc_error_early_stop():
    est = ex.mc_error(_fixed(lambda s: FAR), uniform_dist(2), 3, 400, 0, stop_above=1 / 3)
    assert est.trials < 400 and est.high > 1 / 3
    with pytest.raises(ValueError):
        ex.mc_error(_coin(), uniform_dist(2), 3, 0, 0)


def test_mc_error_rejects_estimates():
    learner = {"protocol": "erasure_learner", "k": 2, "eps": 0.1}
    with pytest.raises(TypeError):
        ex.mc_error(ex.as_factory(learner)(10), uniform_dist(2), 10, 10, 0)


def test_trial_seeds_and_adversaries():
    s = ex.trial_seeds(3, 50)
    assert len(set(s.tolist())) == 50 and np.array_equal(s, ex.trial_seeds(3, 50))
    signs = ex.adversary_signs(8)
    assert signs.shape == (21, 8)
    assert np.all(signs[0] == 1) and set(np.unique(signs)) == {-1, 1}
    assert np.array_equal(signs, ex.adversary_signs(8))


def test_worst_case_error_identity():
    spec = {"protocol": "identity_collision", "k": K, "eps": EPS}
    wc = ex.worst_case_error(spec, K, EPS, 2000, 100, 0, SIGNS)
    assert wc.complete and wc.error.errors == 0 and wc.passes(1 / 3)
    assert set(wc.per_input) == {"uniform", "z0", "z1", "z2", "z3", "z4"}
    tiny = ex.worst_case_error(spec, K, EPS, 2, 100, 0, SIGNS, stop_above=1 / 3)
    assert not tiny.complete and not tiny.passes(1 / 3)


def _passes(n):
    spec = {"protocol": "identity_collision", "k": K, "eps": EPS}
    return ex.worst_case_error(spec, K, EPS, n, 100, 0, SIGNS, stop_above=1 / 3).passes(1 / 3)


def test_search_matches_direct_scan():
    spec = {"protocol": "identity_collision", "k": K, "eps": EPS}
    res = ex.sample_complexity_search(spec, K, EPS, trials=100, seed=0, n_start=4, signs=SIGNS)
    n = res.n_star
    assert _passes(n) and not _passes(n - 1)
    scan = {m: _passes(m) for m in range(4, 4 * n, max(1, n // 8))}
    first_pass = min(m for m, ok in scan.items() if ok)
    last_fail = max(m for m, ok in scan.items() if not ok)
    assert first_pass - max(1, n // 8) < n <= last_fail + max(1, n // 8) + n
    assert (n, True) in res.history


def test_search_is_reproducible():
    spec = {"protocol": "identity_collision", "k": K, "eps": EPS}
    a = ex.sample_complexity_search(spec, K, EPS, trials=100, seed=3, n_start=4, signs=SIGNS)
    b = ex.sample_complexity_search(spec, K, EPS, trials=100, seed=3, n_start=4, signs=SIGNS)
    assert a == b


def test_search_rejected_n_counts_as_fail():
    def factory(n):
        if n < 16:
            raise ValueError("too few users")
        return ex.as_factory({"protocol": "identity_collision", "k": K, "eps": EPS})(n)

    res = ex.sample_complexity_search(factory, K, EPS, trials=100, n_start=1, signs=SIGNS)
    assert res.history[:4] == ((1, False), (2, False), (4, False), (8, False))
    assert res.n_star >= 16


def test_search_failure_and_validation():
    always_wrong = lambda n: _fixed(lambda s: FAR)
    with pytest.raises(ex.SearchFailure):
        ex.sample_complexity_search(always_wrong, 2, 0.2, trials=100, n_start=8, n_cap=64)
    with pytest.raises(ValueError):
        ex.sample_complexity_search(always_wrong, 2, 0.2, target=0.6)


def test_fit_slope_exact():
    ks = [16, 64, 256, 1024]
    slope, intercept, resid = ex.fit_slope(ks, [3 * k**0.75 for k in ks])
    assert slope == pytest.approx(0.75) and intercept == pytest.approx(math.log(3))
    assert np.allclose(resid, 0, atol=1e-12)


def test_experiment_spec_validation():
    with pytest.raises(ValueError):
        ex.ExperimentSpec({}, (4,), 0.3, trials=99)
    with pytest.raises(ValueError):
        ex.ExperimentSpec({}, (4,), 0.3, target_error=0.5)
    spec = ex.ExperimentSpec({"p": 1}, [4, 16], 0.3)
    assert spec.to_json()["ks"] == [4, 16]


def test_start_guess():
    c = Constants(repeats=3)
    assert ex.start_guess("interactive_leaky", 1, 1.0, c) == 9
    assert ex.start_guess("noninteractive_leaky", 256, 0.5) == 256


def test_scaling_csv_replays_byte_identical():
    kw = dict(eps=EPS, seed=2, trials=100, protocols=("identity_collision",), constants=Constants(preset="paper"))
    fits, text = ex.scaling_experiment((4, 16, 64), **kw)
    _, again = ex.scaling_experiment((4, 16, 64), **kw)
    assert text == again
    lines = text.splitlines()
    meta = {l[2:].split(":", 1)[0]: json.loads(l.split(":", 1)[1]) for l in lines if l.startswith("# ")}
    assert set(meta) == {"adversaries", "constants", "eps_condition", "git", "preset", "seed", "spec"}
    assert meta["seed"] == 2 and meta["adversaries"] == 21
    assert meta["eps_condition"]["met"] is False
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == ",".join(ex.CSV_COLUMNS)
    fit = fits["identity_collision"]
    assert len(fit.n_stars) == 3 and 0 < fit.slope < 1.2
    with pytest.raises(ValueError):
        ex.scaling_experiment((4, 8, 16), **kw)


@pytest.mark.slow
def test_calibrate_small_grid(tmp_path):
    grid = {"heavy_coeff": (22.0, 44.0), "threshold_margin": (1.0,), "repeats": (1,)}
    c = ex.calibrate_constants((256,), 0.3, seed=1, trials=100, grid=grid, ni_trials=100)
    assert c.calibrated and c.version == "calibrated-1" and c.ks == (256,)
    assert c.heavy_coeff in (22.0, 44.0)
    assert c.C > 0 and c.c_ni > 0
    path = tmp_path / "c.json"
    path.write_text(c.dumps())
    assert Constants.from_json(json.loads(path.read_text())) == c
