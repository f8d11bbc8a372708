import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locinfo.dist_core import (
    DEFINITION_SCALE,
    TV_SCALE,
    AbsoluteContinuityError,
    Distribution,
    DomainMismatchError,
    PerturbationSign,
    all_signs,
    binary_entropy,
    chi2,
    dist_from_json,
    dist_to_json,
    far_dist,
    hamming,
    kl,
    l2,
    paninski_dist,
    symbols_from_uniforms,
    tv,
    uniform_dist,
)


def test_uniform_examples():
    assert np.allclose(uniform_dist(2).probs, [0.25] * 4)
    assert np.allclose(uniform_dist(1).probs, [0.5, 0.5])
    assert tv(uniform_dist(3), uniform_dist(3)) == 0
    with pytest.raises(ValueError):
        uniform_dist(0)


def test_distribution_validation():
    with pytest.raises(ValueError):
        Distribution(1, [0.5, 0.6])
    with pytest.raises(ValueError):
        Distribution(1, [1.2, -0.2])
    with pytest.raises(ValueError):
        Distribution(2, [0.5, 0.5])
    with pytest.raises(ValueError):
        Distribution.from_probs([1.0, 0.0, 0.0])
    p = Distribution(1, [0.5, 0.5])
    with pytest.raises(ValueError):
        p.probs[0] = 1.0
    # no silent renormalization
    with pytest.raises(ValueError):
        Distribution(1, [0.5, 0.5 + 1e-10])


def test_paninski_examples():
    assert np.allclose(paninski_dist(PerturbationSign([1], 1 / 8)).probs, [0.75, 0.25])
    assert np.allclose(paninski_dist(PerturbationSign([-1], 1 / 8)).probs, [0.25, 0.75])
    p = paninski_dist(PerturbationSign([1, -1, 1], 1e-12))
    assert tv(p, uniform_dist(3)) < 1e-11


def test_perturbation_sign_validation():
    with pytest.raises(ValueError):
        PerturbationSign([1, 0], 0.1)
    with pytest.raises(ValueError):
        PerturbationSign([1], 0.3)
    with pytest.raises(ValueError):
        PerturbationSign([1], 0.0)
    s = PerturbationSign([1, -1], 0.1)
    assert list(s.flip(0).z) == [-1, -1]
    assert list(s.z) == [1, -1]


def test_tv_examples():
    p = Distribution.from_probs([0.75, 0.25])
    assert tv(p, p) == 0
    assert tv(p, uniform_dist(1)) == pytest.approx(0.25)
    with pytest.raises(DomainMismatchError):
        tv(p, uniform_dist(2))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("eps", [0.05, 0.125, 0.25])
def test_tv_of_family_from_uniform(k, eps):
    for z in all_signs(k):
        # definition scale shifts ±4eps/(2k): distance 2eps
        assert tv(paninski_dist(PerturbationSign(z, eps)), uniform_dist(k)) == pytest.approx(2 * eps)
        # the scale used by the bounds: distance exactly eps
        assert tv(far_dist(z, eps), uniform_dist(k)) == pytest.approx(eps)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_tv_between_family_members_is_hamming_weighted(k):
    eps = 0.1
    signs = all_signs(k)
    for z, w in itertools.product(signs, signs):
        d = tv(paninski_dist(PerturbationSign(z, eps)), paninski_dist(PerturbationSign(w, eps)))
        # each differing pair contributes scale*eps/k
        assert d == pytest.approx(DEFINITION_SCALE * eps / k * hamming(z, w))
        d2 = tv(far_dist(z, eps), far_dist(w, eps))
        assert d2 == pytest.approx(2 * eps / k * hamming(z, w))


def test_kl_chi2_examples():
    p = Distribution.from_probs([0.75, 0.25])
    assert kl(p, p) == 0
    assert kl(Distribution.from_probs([1, 0]), uniform_dist(1)) == pytest.approx(1.0)
    assert chi2(p, uniform_dist(1)) == pytest.approx(0.25)
    with pytest.raises(AbsoluteContinuityError):
        kl(uniform_dist(1), Distribution.from_probs([1, 0]))
    with pytest.raises(AbsoluteContinuityError):
        chi2(uniform_dist(1), Distribution.from_probs([1, 0]))


def test_binary_entropy_examples():
    assert binary_entropy(0) == 0 and binary_entropy(1) == 0
    assert binary_entropy(0.5) == 1
    assert binary_entropy(0.11) == pytest.approx(0.49993, abs=1e-4)
    with pytest.raises(ValueError):
        binary_entropy(1.1)


def test_kl_bits_can_exceed_chi2():
    # the literal chain (ln2/2) kl_bits <= (ln2/2) chi2 fails on this pair
    p = Distribution.from_probs([0.999, 0.001])
    q = Distribution.from_probs([0.7, 0.3])
    assert kl(p, q) > chi2(p, q)
    assert kl(p, q) * math.log(2) <= chi2(p, q)


probs2k = st.integers(1, 4).flatmap(
    lambda k: st.lists(st.floats(0.01, 1.0), min_size=2 * k, max_size=2 * k)
)


@settings(max_examples=200, deadline=None)
@given(probs2k, st.randoms())
def test_pinsker_chain(raw, rnd):
    p = np.array(raw) / np.sum(raw)
    q = np.array([rnd.uniform(0.01, 1) for _ in raw])
    q = q / q.sum()
    p, q = Distribution.from_probs(p / p.sum()), Distribution.from_probs(q / q.sum())
    t, k_bits, c = tv(p, q), kl(p, q), chi2(p, q)
    assert t**2 <= math.log(2) / 2 * k_bits + 1e-12
    assert k_bits * math.log(2) <= c + 1e-12
    assert 0 <= t <= 1


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_binary_entropy_concave(a, b, lam):
    mid = lam * a + (1 - lam) * b
    assert binary_entropy(mid) >= lam * binary_entropy(a) + (1 - lam) * binary_entropy(b) - 1e-12


def test_l2_and_hamming():
    assert l2(uniform_dist(1), Distribution.from_probs([1, 0])) == pytest.approx(math.sqrt(0.5))
    assert hamming([1, -1, 1], [1, 1, -1]) == 2
    with pytest.raises(ValueError):
        hamming([1], [1, 1])


def test_sampling_never_returns_zero_mass(rng):
    p = Distribution.from_probs([0.5, 0.5, 0.0, 0.0])
    x = symbols_from_uniforms(p, np.array([0.0, 0.4999, 0.5, 0.9999999]))
    assert set(x.tolist()) <= {0, 1}
    draws = p.sample(10_000, rng)
    assert set(np.unique(draws).tolist()) == {0, 1}


def test_sampling_frequencies(rng):
    p = Distribution.from_probs([0.1, 0.2, 0.3, 0.4])
    n = 100_000
    freq = np.bincount(p.sample(n, rng), minlength=4) / n
    sd = np.sqrt(p.probs * (1 - p.probs) / n)
    assert np.all(np.abs(freq - p.probs) <= 4 * sd)


def test_json_round_trip():
    assert dist_from_json({"type": "uniform", "k": 2}) == uniform_dist(2)
    p = dist_from_json({"type": "paninski", "k": 1, "eps": 0.125, "z": [1]})
    assert np.allclose(p.probs, [0.75, 0.25])
    q = dist_from_json({"type": "paninski", "k": 1, "eps": 0.125, "z": [1], "scale": TV_SCALE})
    assert np.allclose(q.probs, [0.625, 0.375])
    assert dist_from_json(dist_to_json(p)) == p
    with pytest.raises(ValueError):
        dist_from_json({"type": "paninski", "k": 2, "eps": 0.1, "z": [1]})
    with pytest.raises(ValueError):
        dist_from_json({"type": "gaussian"})


def test_distribution_hashable_and_equal():
    assert hash(uniform_dist(2)) == hash(uniform_dist(2))
    assert {uniform_dist(2), uniform_dist(2)} == {uniform_dist(2)}
