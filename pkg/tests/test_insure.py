"""Percentile schemes, premiums, and the quadrant demos."""

import math
from fractions import Fraction

import pytest

from dwclab.dwc import IndicatorState
from dwclab.insure import (
    adversarial_selector_bits,
    i_class_scheme,
    percentile_scheme,
    premium,
    relationship_demos,
    ruin_allowance,
    run_insurance,
)
from dwclab.pmf import percentile, tail_mass
from dwclab.quantize import uniform_class_quantization
from dwclab.sources import IMember, Uniform, make_pmf


@pytest.fixture(scope="module")
def uq():
    return uniform_class_quantization()


def test_indicator_follows_trap(uq):
    scheme = percentile_scheme(uq, 0.05)
    fresh = IndicatorState()
    assert not scheme.indicator(fresh)
    assert premium(scheme, fresh) is None
    with pytest.raises(ValueError, match="before entry"):
        scheme.bound(fresh, 0.1)
    trapped = IndicatorState(n=100, counts=((5, 100),), trap=5, trap_time=90)
    assert scheme.indicator(trapped)
    # cell 5 is the singleton at 5; its bound is the in-reach support maximum
    b = scheme.bound(trapped, 0.25)
    assert b == premium(scheme, trapped)
    assert b >= 5


def test_percentile_scheme_rejects_bad_eta(uq):
    with pytest.raises(ValueError):
        percentile_scheme(uq, 0.0)


def test_i_class_analytic_bound_is_exact():
    scheme = i_class_scheme()
    # the bound at delta = 1/k is one below the k-th power of two, and one
    # symbol later the exact tail mass is already <= delta
    p = make_pmf(IMember("rightmost"))
    for k in range(2, 21):
        d = Fraction(1, k)
        f = scheme.bound(None, d)
        assert f == 2**k - 1
        assert tail_mass(p, f + 1) <= d
    for sel in ("leftmost", "rightmost", "lower-third"):
        member = make_pmf(IMember(sel))
        for k in range(2, 11):
            assert percentile(member, Fraction(1, k)) <= 2**k - 1


def test_i_class_bound_monotone_and_guarded():
    scheme = i_class_scheme()
    vals = [scheme.bound(None, d) for d in (0.5, 0.25, 0.125, 0.0625)]
    assert vals == sorted(vals)
    with pytest.raises(ValueError):
        scheme.bound(None, 0.0)


def test_run_insurance_uniform_clean(uq):
    rep = run_insurance(Uniform(3, 10), uq, eta=0.05, trials=8,
                        horizon=40_000, seed=21)
    assert rep.entered_count == 8
    assert rep.violation_total == 0
    assert rep.ruin_fraction == 0.0
    for r in rep.rows:
        assert r.premium_at_entry >= 10  # covers the true support maximum
    assert rep.ruin_fraction <= rep.ruin_allowance_plus_se()


def test_ruin_allowance_matches_series():
    direct = sum(1.0 / n**2 for n in range(200, 200_000))
    assert ruin_allowance(200) - ruin_allowance(200_000) == \
        pytest.approx(direct, rel=1e-10)
    assert ruin_allowance(10**4) < 1.1e-4


def test_adversarial_selector_partial_sums():
    k, bits = adversarial_selector_bits(20.0)
    assert bits > 20.0
    # one step earlier the target had not been reached
    prev = sum((math.log2(2 ** (i + 1) - 1) + math.log2(2 ** (i + 1)))
               / (i * (i + 1.0)) for i in range(1, k))
    assert prev <= 20.0
    assert 1000 < k < 100_000


def test_relationship_demos_quadrants():
    rep = relationship_demos()
    tags = {r.quadrant for r in rep.rows}
    assert tags == {"not-tight", "insurable-not-dwc", "deceived", "strong"}
    # (a) percentiles blow past each dyadic target while coding stays cheap
    perc = {r.label: r.value for r in rep.quadrant("not-tight")}
    for k in (2, 4, 6, 8, 10):
        assert perc[f"percentile_beyond_2^{k}"] >= 2**k
        assert perc[f"mixture_bits_level_{k}"] < 2.0
    # (c) the deception demo keeps its guarantees
    dec = {r.label: r.value for r in rep.quadrant("deceived")}
    for m in (10, 100):
        assert dec[f"all_ones_prob_m_{m}"] >= math.exp(-1) - 1e-3
        assert dec[f"excess_bits_m_{m}"] > 0.1
    # (d) trivial safety for the strongly compressible class
    strong = {r.label: r.value for r in rep.quadrant("strong")}
    assert strong["premature_count"] == 0.0
    assert strong["threshold_delta_1"] > 0
