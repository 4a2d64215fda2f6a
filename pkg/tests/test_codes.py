import itertools
import math
import random

import numpy as np
import pytest

from dwclab.codes import (
    IIDMeasure,
    KnownSupportCode,
    MixtureMeasure,
    RedundancyReport,
    SequentialMeasure,
    bound_mh,
    codelength,
    codelength_trace,
    exact_iid_expected_codelength,
    exact_kt_redundancy,
    exact_redundancy_by_types,
    iid_measure,
    index_penalty_bits,
    index_weight,
    known_support_code,
    mixture,
    pattern_code,
    redundancy,
)
from dwclab.pmf import Pmf, block_split_pmf, harmonic_pmf, uniform_pmf
from dwclab.sources import Uniform


def log2_prob_via_counts(m, xs):
    symbols, counts = np.unique(np.asarray(xs), return_counts=True)
    return m.log2_prob_counts([int(s) for s in symbols], counts)


# ---------------------------------------------------------------------------
# iid
# ---------------------------------------------------------------------------


def test_iid_measure_basics():
    m = iid_measure(uniform_pmf(1, 2))
    assert m.log2_prob([1, 2, 1]) == pytest.approx(-3.0)
    assert m.log2_prob([]) == 0.0
    assert m.log2_prob([3]) == -math.inf
    assert log2_prob_via_counts(m, [1, 2, 1]) == pytest.approx(-3.0)


def test_iid_analytic_log_mass_for_remote_symbols():
    m = iid_measure(block_split_pmf())
    giant = 2**900 + 5
    expected = -(900 + math.log2(901 * 902))
    assert m.log2_prob([giant]) == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# add-half estimator
# ---------------------------------------------------------------------------


def test_kt_sequential_equals_counts_formula():
    m = known_support_code([1, 2, 5])
    rng = random.Random(3)
    for _ in range(40):
        xs = [rng.choice([1, 2, 5]) for _ in range(rng.randint(1, 12))]
        assert m.log2_prob(xs) == pytest.approx(log2_prob_via_counts(m, xs), abs=1e-10)


def test_kt_consistency_exhaustive():
    m = known_support_code([1, 2, 3])
    for n in range(0, 4):
        for xs in itertools.product([1, 2, 3], repeat=n):
            total = sum(2.0 ** m.log2_prob(list(xs) + [a]) for a in (1, 2, 3))
            assert total == pytest.approx(2.0 ** m.log2_prob(list(xs)), abs=1e-12)


def test_kt_outside_support():
    m = known_support_code([1, 2])
    assert m.log2_prob([1, 7]) == -math.inf
    assert m.log2_prob_counts([1, 7], [3, 1]) == -math.inf


def test_kt_rbound_dominates_exact_redundancy():
    m = known_support_code([1, 2])
    p = uniform_pmf(1, 2)
    n = 2**12
    exact = exact_kt_redundancy(p, m, n)
    assert m.rbound(n) == pytest.approx(
        1.0 * math.log2(n + 1.0) / (2.0 * n) + 2.0 / n)
    assert 0.0 < exact <= m.rbound(n)


def test_kt_separable_path_matches_type_enumeration():
    # two independent exact engines must agree
    m = known_support_code([1, 2])
    p = Pmf.from_masses({1: 0.3, 2: 0.7})
    for n in (1, 2, 7, 64, 300):
        a = exact_kt_redundancy(p, m, n)
        b = exact_redundancy_by_types(p, m, n)
        assert a == pytest.approx(b, abs=1e-10)


def test_kt_expected_codelength_monotone_patterns():
    m = known_support_code(range(1, 9))
    p = uniform_pmf(3, 6)
    e1 = exact_iid_expected_codelength(p, m, 100)
    # source outside support -> infinite expected codelength
    assert exact_iid_expected_codelength(uniform_pmf(7, 10), known_support_code([1, 2]), 10) == math.inf
    assert e1 > 100 * 2.0  # can't beat the entropy


# ---------------------------------------------------------------------------
# pattern code
# ---------------------------------------------------------------------------


def test_pattern_single_symbol_cost():
    m = pattern_code()
    # first draw is surely "new": cost is the identity cost only
    assert codelength(m, [3]) == pytest.approx(math.log2(12.0))


def test_pattern_permutation_invariance_and_counts():
    m = pattern_code()
    rng = random.Random(11)
    for _ in range(30):
        xs = [rng.choice([1, 2, 3, 9, 40]) for _ in range(rng.randint(1, 14))]
        ys = xs[:]
        rng.shuffle(ys)
        a, b = m.log2_prob(xs), m.log2_prob(ys)
        assert a == pytest.approx(b, abs=1e-9)
        assert a == pytest.approx(log2_prob_via_counts(m, xs), abs=1e-9)


def test_pattern_is_subprobability():
    m = pattern_code()
    alphabet = range(1, 30)
    for n in (1, 2, 3):
        total = sum(2.0 ** m.log2_prob(list(xs))
                    for xs in itertools.product(alphabet, repeat=n))
        assert total < 1.0 + 1e-12


def test_pattern_finite_symbol_code_rejects_unseen():
    m = pattern_code(uniform_pmf(1, 4))
    assert m.log2_prob([2, 9]) == -math.inf


def test_pattern_matrix_matches_scalar():
    m = pattern_code()
    symbols = [1, 4, 7]
    counts = np.array([[3, 0, 1], [0, 0, 0], [1, 1, 1], [5, 2, 0]])
    got = m.log2_prob_counts_matrix(symbols, counts)
    want = [m.log2_prob_counts(symbols, row) for row in counts]
    assert got == pytest.approx(want, abs=1e-10)


# ---------------------------------------------------------------------------
# mixtures
# ---------------------------------------------------------------------------


def _random_components(rng, k):
    comps = []
    for _ in range(k):
        kind = rng.randrange(3)
        if kind == 0:
            w = [rng.random() + 0.05 for _ in range(3)]
            comps.append(iid_measure(Pmf.from_masses(
                {i + 1: x / sum(w) for i, x in enumerate(w)})))
        elif kind == 1:
            comps.append(known_support_code([1, 2, 3]))
        else:
            comps.append(pattern_code())
    return comps


def test_mixture_rejects_empty():
    with pytest.raises(ValueError):
        mixture([])


def test_single_component_mixture_costs_one_bit():
    m = mixture([iid_measure(uniform_pmf(1, 2))])
    assert m.log2_prob([1, 2]) == pytest.approx(-2.0 - 1.0)


def test_mixture_pathwise_penalty():
    rng = random.Random(5)
    for _ in range(25):
        comps = _random_components(rng, rng.randint(1, 6))
        m = mixture(comps)
        xs = [rng.choice([1, 2, 3]) for _ in range(rng.randint(1, 10))]
        total = m.log2_prob(xs)
        for i, c in enumerate(comps, start=1):
            ci = c.log2_prob(xs)
            if ci > -math.inf:
                assert -total <= -ci + index_penalty_bits(i) + 1e-9


def test_mixture_step_matches_whole_string():
    rng = random.Random(9)
    comps = _random_components(rng, 4)
    m = mixture(comps)
    xs = [rng.choice([1, 2, 3]) for _ in range(8)]
    state = m.start()
    acc = 0.0
    for a in xs:
        state, c = m.step(state, a)
        acc += c
    assert acc == pytest.approx(m.log2_prob(xs), abs=1e-9)


def test_mixture_conditionals_sum_to_one_for_proper_components():
    m = mixture([iid_measure(uniform_pmf(1, 2)), known_support_code([1, 2])])
    for xs in itertools.product([1, 2], repeat=3):
        state = m.start()
        for a in xs:
            state, _ = m.step(state, a)
        mass = 0.0
        for a in (1, 2):
            _, cond = m.step(state, a)
            mass += 2.0 ** cond
        assert mass == pytest.approx(1.0, abs=1e-10)


def test_index_weights_telescope():
    assert sum(index_weight(i) for i in range(1, 10**4)) == pytest.approx(
        1.0 - 1.0 / 10**4, abs=1e-12)


# ---------------------------------------------------------------------------
# bound_mh / redundancy modes
# ---------------------------------------------------------------------------


def test_bound_mh_frozen_values():
    assert bound_mh(2**16, 1.0) == pytest.approx(0.5100199205481396, abs=1e-12)
    assert bound_mh(2**4, 1.0) == pytest.approx(1.641274915080932, abs=1e-12)
    with pytest.raises(ValueError):
        bound_mh(1, 1.0)


def test_redundancy_exact_iid_frozen():
    rep = redundancy(uniform_pmf(1, 2), iid_measure(harmonic_pmf()), n=100)
    assert rep.value == pytest.approx(0.792481250360578, abs=1e-12)
    assert rep.mode == "exact"
    assert rep.ci_halfwidth == 0.0


def test_redundancy_exact_type_path_for_mixture():
    m = mixture([iid_measure(uniform_pmf(1, 2)), known_support_code([1, 2])])
    rep = redundancy(uniform_pmf(1, 2), m, n=64)
    # mixture can't beat its best component by more than ... sanity interval
    assert 0.0 < rep.value < 1.0


def test_redundancy_refuses_unsupported_shapes():
    class Opaque(SequentialMeasure):
        name = "opaque"

        def step(self, state, a):
            return state, -1.0

    with pytest.raises(ValueError, match="count-based"):
        redundancy(uniform_pmf(1, 2), Opaque(), n=10)
    with pytest.raises(ValueError, match="lazy"):
        redundancy(harmonic_pmf(), known_support_code([1, 2]), n=10)
    with pytest.raises(ValueError, match="infeasible"):
        exact_redundancy_by_types(uniform_pmf(1, 40), known_support_code(range(1, 41)), 10**4)


def test_redundancy_mc_agrees_with_exact():
    m = known_support_code([1, 2])
    exact = exact_kt_redundancy(uniform_pmf(1, 2), m, 256)
    rep = redundancy(Uniform(1, 2), m, n=256, mode="mc", trials=400, seed=12)
    assert rep.mode == "mc"
    assert abs(rep.value - exact) <= 3.0 * rep.ci_halfwidth
    # deterministic in the seed
    rep2 = redundancy(Uniform(1, 2), m, n=256, mode="mc", trials=400, seed=12)
    assert rep2.value == rep.value


def test_codelength_trace():
    m = known_support_code([1, 2])
    p = uniform_pmf(1, 2)
    xs = [1, 2, 2, 1, 1]
    rows = codelength_trace(m, xs, p)
    assert [r[0] for r in rows] == [1, 2, 3, 4, 5]
    assert rows[-1][1] == pytest.approx(codelength(m, xs), abs=1e-10)
    assert rows[-1][2] == pytest.approx((rows[-1][1] - 5.0) / 5.0, abs=1e-10)
