import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import jensenshannon

from dwclab.pmf import (
    Pmf,
    block_split_pmf,
    entropy,
    geometric_half_pmf,
    harmonic_pmf,
    j_divergence,
    kl,
    kl_partial_sums,
    l1,
    mix,
    percentile,
    point_mass,
    tail_mass,
    uniform_pmf,
    zipf_two_pmf,
)

LN2 = math.log(2.0)


def finite_pmfs(max_support=6):
    """Random finite pmfs with support inside {1..max_support}."""

    @st.composite
    def _pmf(draw):
        k = draw(st.integers(2, max_support))
        weights = draw(
            st.lists(st.floats(1e-6, 1.0), min_size=k, max_size=k)
        )
        total = sum(weights)
        support = draw(
            st.lists(st.integers(1, 3 * max_support), min_size=k, max_size=k, unique=True)
        )
        return Pmf.from_masses({x: w / total for x, w in zip(support, weights)})

    return _pmf()


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def test_rejects_bad_masses():
    with pytest.raises(ValueError):
        Pmf.from_masses({1: 0.5, 2: 0.6})
    with pytest.raises(ValueError):
        Pmf.from_masses({0: 0.5, 2: 0.5})
    with pytest.raises(ValueError):
        Pmf.from_masses({1: -0.1, 2: 1.1})


def test_support_and_mass():
    p = uniform_pmf(3, 6)
    assert p.support == (3, 4, 5, 6)
    assert p.mass(3) == pytest.approx(0.25)
    assert p.mass(7) == 0.0
    assert p.mass(0) == 0.0
    with pytest.raises(ValueError):
        harmonic_pmf().support  # noqa: B018 - raising property


# ---------------------------------------------------------------------------
# kl
# ---------------------------------------------------------------------------


def test_kl_identity_and_disjoint():
    p = uniform_pmf(1, 4)
    assert kl(p, p) == 0.0
    assert kl(point_mass(1), point_mass(2)) == math.inf


def test_kl_frozen_two_point():
    # Hand evaluation: 0.5*log2(2) + 0.5*log2(2/3) = 1 - 0.5*log2(3).
    p = Pmf.from_masses({1: 0.5, 2: 0.5})
    q = Pmf.from_masses({1: 0.25, 2: 0.75})
    assert kl(p, q) == pytest.approx(1.0 - 0.5 * math.log2(3.0), abs=1e-12)
    assert kl(p, q) == pytest.approx(0.20751874963942185, abs=1e-12)


def test_kl_finite_vs_lazy():
    # D(uniform(1,2) || harmonic) = 0.5*log2(3) exactly.
    v = kl(uniform_pmf(1, 2), harmonic_pmf())
    assert v == pytest.approx(0.5 * math.log2(3.0), abs=1e-12)


def test_kl_mass_escaping_lazy_support():
    # geometric masses underflow to 0 beyond ~1074, so a far spike diverges
    p = Pmf.from_masses({1: 0.5, 2**1200: 0.5})
    assert kl(p, geometric_half_pmf()) == math.inf


def test_kl_partial_sums_walks_to_target():
    # Mass 1/((i+1)(i+2)) on 2^i: the divergence against the harmonic code is
    # +inf, but every partial sum over a support prefix is finite.
    def walk():
        i = 0
        while True:
            yield 2**i, 1.0 / ((i + 1) * (i + 2))
            i += 1

    def mass(x):
        if x & (x - 1) == 0:
            i = x.bit_length() - 1
            return 1.0 / ((i + 1) * (i + 2))
        return 0.0

    spiky = Pmf.lazy(mass, walk, lambda k: 1.0 / (k.bit_length() + 1))
    n, x, s = kl_partial_sums(spiky, harmonic_pmf(), stop_bits=0.5)
    assert s > 0.5
    assert x == 2 ** (n - 1)


# ---------------------------------------------------------------------------
# j_divergence
# ---------------------------------------------------------------------------


def test_j_identity_and_disjoint():
    p = uniform_pmf(1, 3)
    assert j_divergence(p, p) == 0.0
    assert j_divergence(uniform_pmf(1, 2), uniform_pmf(5, 6)) == pytest.approx(2.0, abs=1e-12)


def test_j_frozen_value():
    # Direct four-term evaluation of D(p||m)+D(q||m) with m the midpoint:
    # D(p||m) = 1 - 0.5*log2(3), D(q||m) = 2 - log2(3), sum = 3 - 1.5*log2(3).
    v = j_divergence(uniform_pmf(1, 2), point_mass(1))
    assert v == pytest.approx(3.0 - 1.5 * math.log2(3.0), abs=1e-12)
    assert v == pytest.approx(0.6225562489182657, abs=1e-12)


@settings(max_examples=120, deadline=None)
@given(finite_pmfs(), finite_pmfs())
def test_j_matches_jensen_shannon_and_is_symmetric(p, q):
    union = sorted({x for x, _ in p.finite_items} | {x for x, _ in q.finite_items})
    pv = [p.mass(x) for x in union]
    qv = [q.mass(x) for x in union]
    js2 = 2.0 * jensenshannon(pv, qv, base=2.0) ** 2
    assert j_divergence(p, q) == pytest.approx(js2, abs=1e-9)
    assert j_divergence(p, q) == pytest.approx(j_divergence(q, p), abs=1e-12)
    assert 0.0 <= j_divergence(p, q) <= 2.0 + 1e-12


# ---------------------------------------------------------------------------
# l1 / bounds between the distances
# ---------------------------------------------------------------------------


def test_l1_disjoint_is_two():
    assert l1(uniform_pmf(1, 2), uniform_pmf(3, 4)) == pytest.approx(2.0)


@settings(max_examples=150, deadline=None)
@given(finite_pmfs(), finite_pmfs())
def test_distance_sandwich(p, q):
    d = l1(p, q)
    j = j_divergence(p, q)
    assert d * d / (4.0 * LN2) <= j + 1e-9
    assert j <= d / LN2 + 1e-9


@settings(max_examples=60, deadline=None)
@given(finite_pmfs(), finite_pmfs(), finite_pmfs())
def test_j_chain_inequality(p, q, r):
    lhs = j_divergence(p, q) + j_divergence(q, r)
    rhs = (LN2 / 8.0) * j_divergence(p, r) ** 2
    assert lhs >= rhs - 1e-9


def test_kl_nonnegative_random():
    import random

    rng = random.Random(7)
    for _ in range(200):
        k = rng.randint(2, 6)
        w1 = [rng.random() + 1e-9 for _ in range(k)]
        w2 = [rng.random() + 1e-9 for _ in range(k)]
        p = Pmf.from_masses({i + 1: w / sum(w1) for i, w in enumerate(w1)})
        q = Pmf.from_masses({i + 1: w / sum(w2) for i, w in enumerate(w2)})
        assert kl(p, q) >= -1e-12


# ---------------------------------------------------------------------------
# percentile / entropy / tails
# ---------------------------------------------------------------------------


def test_percentile_uniform_example():
    assert percentile(uniform_pmf(1, 10), 0.25) == 8


def test_percentile_monotone_and_tail_bound():
    p = Pmf.from_masses({1: 0.4, 3: 0.3, 9: 0.2, 27: 0.1})
    gammas = [0.9, 0.5, 0.3, 0.2, 0.1, 0.05]
    percs = [percentile(p, g) for g in gammas]
    assert percs == sorted(percs)  # nonincreasing gamma -> nondecreasing m
    for g, m in zip(gammas, percs):
        assert tail_mass(p, m + 1) <= g + 1e-12


def test_percentile_exact_fraction_path():
    p = harmonic_pmf()
    # cdf(m) = 1 - 1/(m+1) >= 1 - 1/k  <=>  m >= k - 1, exactly.
    for k in range(2, 30):
        assert percentile(p, Fraction(1, k)) == k - 1


def test_entropy_values():
    assert entropy(uniform_pmf(1, 8)) == pytest.approx(3.0, abs=1e-12)
    assert entropy(geometric_half_pmf()) == pytest.approx(2.0, abs=1e-9)
    assert entropy(point_mass(5)) == 0.0


def test_tail_mass_catalog():
    assert tail_mass(harmonic_pmf(), 10) == pytest.approx(0.1, abs=1e-15)
    assert tail_mass(geometric_half_pmf(), 4) == pytest.approx(0.125, abs=1e-15)
    assert tail_mass(uniform_pmf(1, 4), 3) == pytest.approx(0.5, abs=1e-12)
    assert tail_mass(uniform_pmf(1, 4), 1) == 1.0


def test_zipf_two_head():
    q = zipf_two_pmf()
    assert q.mass(1) == pytest.approx(6.0 / math.pi**2, abs=1e-12)
    # analytic tail consistent with direct summation
    direct = sum(q.mass(x) for x in range(50, 20000))
    assert q.tail(50) == pytest.approx(direct, abs=1e-4)


def test_block_split_pmf():
    q = block_split_pmf()
    # block i carries total mass 1/((i+1)(i+2))
    for i in range(6):
        block = range(2**i, 2 ** (i + 1))
        assert sum(q.mass(x) for x in block) == pytest.approx(
            1.0 / ((i + 1) * (i + 2)), abs=1e-12
        )
    assert q.tail(2**4) == pytest.approx(1.0 / 5.0, abs=1e-12)
    # mid-block tail
    assert q.tail(3) == pytest.approx(1.0 / 12.0 + 1.0 / 3.0, abs=1e-12)
    # log-mass rule survives symbols far beyond float range
    giant = 2**5000 + 123
    assert q.log2_mass(giant) == pytest.approx(-(5000 + math.log2(5001 * 5002)), rel=1e-12)


def test_mix_finite():
    p = mix(uniform_pmf(1, 2), point_mass(9), 0.25)
    assert p.mass(1) == pytest.approx(0.375)
    assert p.mass(9) == pytest.approx(0.25)
    assert sum(p.mass(x) for x in p.support) == pytest.approx(1.0)


def test_mix_lazy():
    p = mix(geometric_half_pmf(), uniform_pmf(1, 2), 0.5)
    assert p.mass(1) == pytest.approx(0.5 * 0.5 + 0.5 * 0.5)
    assert p.tail(3) == pytest.approx(0.5 * 0.25, abs=1e-12)
