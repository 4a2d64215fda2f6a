"""Trap-indicator machinery: quantizations, capture/refine, entry, adversary."""

import math

import numpy as np
import pytest

from dwclab.codes import BlockEscapeCode, bound_mh, iid_measure
from dwclab.dwc import (
    IndicatorState,
    b_class_adversary,
    capture_candidates,
    phi_step,
    premature_probability,
    refine,
    run_phi,
    sc_phi,
    trap_budget,
    _source_tables,
    _trial_trap,
)
from dwclab.pmf import Pmf, harmonic_pmf, j_divergence, l1, uniform_pmf
from dwclab.quantize import (
    Centroid,
    RefineRule,
    b_class_quantization,
    fh_class_quantization,
    j_uniform,
    uniform_class_quantization,
)
from dwclab.sources import BMember, Uniform, make_pmf, sample_array

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# quantization structure
# ---------------------------------------------------------------------------


def u_index(lo, hi, cap=64):
    span = hi - lo
    return sum(cap - s for s in range(span)) + lo


@pytest.fixture(scope="module")
def uq():
    return uniform_class_quantization()


@pytest.fixture(scope="module")
def bq():
    return b_class_quantization()


def test_uniform_quantization_layout(uq):
    assert len(uq) == 64 * 65 // 2
    assert [c.index for c in uq] == list(range(1, 2081))
    # ordering: singletons first, then spans in increasing width
    assert uq.centroid(1).pmf.support == (1,)
    assert uq.centroid(64).pmf.support == (64,)
    assert uq.centroid(65).pmf.support == (1, 2)
    assert uq.centroid(u_index(3, 10)).pmf.support == tuple(range(3, 11))


def test_uniform_derived_fields(uq):
    c = uq.centroid(u_index(1, 2))
    assert c.zone_radius == pytest.approx(1.6**2 * LN2**2 / 16, rel=1e-12)
    assert c.separation == pytest.approx(1.6**4 * LN2**4 / 256, rel=1e-12)
    assert c.separation == pytest.approx(c.zone_radius**2, rel=1e-12)


def test_uniform_local_measures_cover_reach(uq):
    # each in-reach interval must live inside the cell's coding support
    for idx in (1, 64, u_index(1, 2), u_index(3, 10), u_index(5, 5),
                u_index(1, 64)):
        c = uq.centroid(idx)
        lo, hi = c.pmf.support[0], c.pmf.support[-1]
        for lo2 in range(1, 65):
            for hi2 in range(lo2, 65):
                if j_uniform(lo, hi, lo2, hi2) < c.reach:
                    assert lo2 in c.local_measure.support
                    assert hi2 in c.local_measure.support


def test_j_uniform_matches_generic_divergence():
    rng = np.random.default_rng(5)
    for _ in range(60):
        lo1, lo2 = rng.integers(1, 40, size=2)
        hi1 = lo1 + rng.integers(0, 20)
        hi2 = lo2 + rng.integers(0, 20)
        closed = j_uniform(int(lo1), int(hi1), int(lo2), int(hi2))
        generic = j_divergence(uniform_pmf(int(lo1), int(hi1)),
                               uniform_pmf(int(lo2), int(hi2)))
        assert closed == pytest.approx(generic, abs=1e-11)


def test_b_quantization_layout(bq):
    assert len(bq) == sum(2**n for n in range(1, 7))
    c1 = bq.centroid(1)
    assert c1.pmf.support == (1, 2)
    assert c1.pmf.mass(2) == pytest.approx(0.75)
    # last cell: level 6, offset 64 -> spike 127
    assert bq.centroid(126).pmf.support == (1, 127)
    assert bq.centroid(126).log2_c == pytest.approx(254.0)
    assert len(bq.extras) == 1


def test_b_quantization_cells_are_separated(bq):
    # no centroid sits inside another's reach, and each cell's extreme
    # members stay within its own reach
    pmfs = [c.pmf for c in bq]
    for i, c in enumerate(bq):
        for k in range(i + 1, len(pmfs)):
            other = bq.centroid(k + 1)
            d = j_divergence(c.pmf, pmfs[k])
            assert d > c.reach
            assert d > other.reach
    for level in range(1, 7):
        for eps in (1.0 / (level + 1) + 1e-9, min(1.0 / level, 1.0 - 1e-9)):
            member = make_pmf(BMember(eps))
            idx = sum(2**n for n in range(1, level)) + 1
            c = bq.centroid(idx)
            assert j_divergence(c.pmf, member) < c.reach


def test_reach_cap_enforced():
    with pytest.raises(ValueError, match="reach"):
        Centroid(index=1, pmf=uniform_pmf(1, 2), reach=30.0,
                 local_measure=iid_measure(uniform_pmf(1, 2)),
                 percentile_sup=lambda g: 2)


# ---------------------------------------------------------------------------
# capture and refine
# ---------------------------------------------------------------------------


def test_capture_zone_is_strict(uq):
    c = uq.centroid(u_index(5, 5))
    z = c.zone_radius
    on_boundary = Pmf.from_masses({5: 1.0 - z / 2, 6: z / 2})
    assert l1(c.pmf, on_boundary) == pytest.approx(z)
    assert c.index not in capture_candidates(on_boundary, uq)
    inside = Pmf.from_masses({5: 1.0 - z / 4, 6: z / 4})
    assert c.index in capture_candidates(inside, uq)


def test_refine_sample_size_gate(uq):
    tau = uniform_pmf(3, 10)
    idx = u_index(3, 10)
    n_min = uq.refine_n_min(idx, 0.05)
    assert refine(tau, int(n_min) - 1, 0.05, [idx], uq) == []
    assert refine(tau, int(n_min), 0.05, [idx], uq) == [idx]


def test_refine_percentile_screen():
    # a rule with the percentile condition rejects top-heavy histograms
    quant = uniform_class_quantization(
        max_symbol=8, reach=3.0,
        rule=RefineRule(rate=2.0, log2_c_cap=4.0, percentile_condition=True))
    idx = u_index(2, 4, cap=8)
    tau = uniform_pmf(2, 4)
    n = 50_000
    kept = refine(tau, n, 0.3, [idx], quant)
    assert kept == []  # percentile 4 -> 2*4 > 4
    loose = uniform_class_quantization(
        max_symbol=8, reach=3.0,
        rule=RefineRule(rate=2.0, log2_c_cap=8.0, percentile_condition=True))
    assert refine(tau, n, 0.3, [idx], loose) == [idx]


# ---------------------------------------------------------------------------
# the indicator itself
# ---------------------------------------------------------------------------


def test_state_guards():
    with pytest.raises(ValueError):
        IndicatorState().empirical()
    with pytest.raises(ValueError):
        phi_step(IndicatorState(), 0, uniform_class_quantization(8), 0.5, 0.1)


def test_indicator_is_monotone_and_traps_once():
    quant = uniform_class_quantization(
        max_symbol=8, reach=3.0,
        rule=RefineRule(rate=2.0, log2_c_cap=8.0, percentile_condition=False))
    xs = sample_array(Uniform(2, 4), 31, 0, 4000)
    state = IndicatorState()
    seen_trap = None
    was_entered = False
    for a in xs:
        state = phi_step(state, int(a), quant, 0.5, 0.3)
        if seen_trap is not None:
            assert state.trap == seen_trap
        if state.trap is not None:
            seen_trap = state.trap
        if was_entered:
            assert state.entered
        was_entered = state.entered
    assert state.trap is not None
    assert state.entered
    assert state.entry_time >= state.trap_time


def test_entry_respects_threshold_bound():
    # at the entry time the local bound plus prior cost is already below delta
    quant = uniform_class_quantization(
        max_symbol=8, reach=3.0,
        rule=RefineRule(rate=2.0, log2_c_cap=8.0, percentile_condition=False))
    delta = 0.5
    xs = sample_array(Uniform(2, 4), 31, 1, 4000)
    state = run_phi(xs.tolist(), quant, delta, 0.3)
    assert state.entered
    c = quant.centroid(state.trap)
    m = state.entry_time
    assert c.local_measure.rbound(m) + c.penalty_bits / m < delta
    if m > 1:
        assert c.local_measure.rbound(m - 1) + c.penalty_bits / (m - 1) >= delta \
            or state.trap_time == m


def test_vectorized_engine_matches_step_fold():
    quant = uniform_class_quantization(
        max_symbol=8, reach=3.0,
        rule=RefineRule(rate=2.0, log2_c_cap=8.0, percentile_condition=True))
    spec = Uniform(2, 4)
    p, support, pvec = _source_tables(spec)
    dist = np.asarray([l1(c.pmf, p) for c in quant])
    for trial in range(8):
        xs = sample_array(spec, 77, trial, 2500)
        ti, tt = _trial_trap(xs, quant, 0.3, support, pvec, dist)
        st = run_phi(xs.tolist(), quant, 0.5, 0.3)
        assert (ti, tt) == (st.trap, st.trap_time)


def test_premature_run_on_point_mass(uq):
    rep = premature_probability(Uniform(5, 5), uq, None, 0.1, 0.05,
                                trials=10, horizon=40_000, seed=11)
    assert rep.entry_fraction == 1.0
    assert rep.premature_fraction == 0.0
    assert rep.indeterminate_count == 0
    for o in rep.outcomes:
        assert o.trap_index == u_index(5, 5)
        assert o.entry_time == o.trap_time  # threshold lies below n_min
        assert o.entry_time <= 30_000


def test_premature_entered_paths_satisfy_envelope(uq):
    # good-trap soundness: the certified envelope at entry is under delta,
    # and it keeps decreasing afterwards
    delta = 0.1
    rep = premature_probability(Uniform(3, 10), uq, None, delta, 0.05,
                                trials=3, horizon=40_000, seed=3)
    for o in rep.outcomes:
        assert o.entered
        c = uq.centroid(o.trap_index)
        vals = [c.local_measure.rbound(j) + c.penalty_bits / j
                for j in range(o.entry_time, o.entry_time + 2000, 97)]
        assert vals[0] < delta
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# threshold indicator
# ---------------------------------------------------------------------------


def test_sc_phi_matches_linear_scan():
    delta = 0.51
    phi = sc_phi(lambda n: bound_mh(n, 1.0), delta)
    ns = np.arange(2, 1 << 17)
    bounds = (2.0 * 1.0**1.5 / np.sqrt(np.log2(ns))
              + np.pi * np.sqrt(2.0 / (3.0 * ns)))
    expected = int(ns[bounds >= delta].max())
    assert phi.threshold == expected
    assert not phi(phi.threshold)
    assert phi(phi.threshold + 1)
    assert phi.entry_time == expected + 1


def test_sc_phi_immediate_and_error_cases():
    # bound_mh(2, 1) = 2 + pi sqrt(1/3) ~ 3.814: anything above enters at once
    assert sc_phi(lambda n: bound_mh(n, 1.0), 4.0).threshold == 0
    assert sc_phi(lambda n: bound_mh(n, 1.0), 2.5).threshold == 4
    assert sc_phi(lambda n: bound_mh(n, 1.0), 2.0).threshold == 8
    with pytest.raises(ValueError, match="scan horizon"):
        sc_phi(lambda n: bound_mh(n, 1.0), 1e-9, scan_cap=1 << 14)


# ---------------------------------------------------------------------------
# adversary and budget
# ---------------------------------------------------------------------------


def test_adversary_structure_and_iid_oracle():
    m = 3
    rep = b_class_adversary(m, 0.1, q=iid_measure(harmonic_pmf()))
    eps = rep.member.epsilon
    assert eps == pytest.approx(1.0 / (2 * m))
    assert rep.member.spike == 2 ** (2 * m)
    assert rep.all_ones_probability == pytest.approx((1 - eps) ** m, rel=1e-12)
    assert rep.all_ones_probability >= math.exp(-1.0)
    # against a product measure the per-symbol divergence is single-letter
    s = rep.member.spike
    expected = ((1 - eps) * math.log2((1 - eps) / 0.5)
                + eps * math.log2(eps * s * (s + 1)))
    assert rep.excess_per_symbol == pytest.approx(expected, rel=1e-10)


def test_adversary_against_spike_scheme(bq):
    rep = b_class_adversary(10, 0.1, quant=bq)
    assert rep.all_ones_probability >= math.exp(-1.0)
    assert rep.excess_per_symbol > 0.1


def test_trap_budget_closed_form():
    for eta in (0.01, 0.1, 0.5):
        for n_cap, k_cap in ((10, 2), (1000, 126), (10**4, 2080)):
            b = trap_budget(eta, n_cap, k_cap)
            closed = (eta / 2.0 * (1.0 - 1.0 / (k_cap + 1))
                      * (1.0 - 1.0 / (n_cap + 1)))
            assert b == pytest.approx(closed, rel=1e-12)
            assert b <= eta / 2.0


# ---------------------------------------------------------------------------
# contaminated-block cells
# ---------------------------------------------------------------------------


def test_fh_quantization_shape():
    fq = fh_class_quantization()
    assert len(fq) == 60
    c = fq.centroid(1)
    assert c.percentile_sup(0.25) >= c.percentile_sup(0.5)
    assert c.local_measure.rbound(10**4) > c.local_measure.rbound(10**6)
    # entry is far out of desk range for these cells under the default screen
    assert fq.refine_n_min(1, 0.05) > 10**6


def test_block_escape_code_fold_matches_counts():
    code = BlockEscapeCode(2, 4, 1.0)
    xs = [2, 3, 7, 2, 4, 9, 7, 2]
    total = code.log2_prob(xs)
    syms, cnts = np.unique(xs, return_counts=True)
    by_counts = code.log2_prob_counts([int(s) for s in syms],
                                      [int(c) for c in cnts])
    assert total == pytest.approx(by_counts, rel=1e-12)
    assert code.log2_prob([1]) == -math.inf  # below the block
    assert code.rbound(100) > 0
