"""Data-driven percentile bounding, premiums, and the four quadrant demos.

The percentile scheme rides on the trap machinery: its indicator turns on
exactly when a path traps, and from then on the trapped centroid's analytic
percentile bound covers every class member within reach.  Premiums charge
the bound at confidence 1/n^2, so the total failure allowance past entry is
eta (bad trap) plus the summable per-step tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import polygamma

from .codes import bound_mh
from .dwc import (IndicatorState, b_class_adversary, sc_phi, _source_tables,
                  _trial_trap)
from .pmf import Pmf, harmonic_pmf, l1, percentile
from .quantize import Quantization, b_class_quantization
from .sources import SourceSpec, sample_array, t_block

__all__ = [
    "PercentileScheme", "percentile_scheme", "premium",
    "AnalyticPercentileScheme", "i_class_scheme",
    "InsuranceRow", "InsuranceReport", "run_insurance", "ruin_allowance",
    "QuadrantRow", "RelationshipReport", "relationship_demos",
]


# ---------------------------------------------------------------------------
# schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PercentileScheme:
    """Percentile upper bounds driven by the trap state.

    ``indicator`` is monotone because the trap is; ``bound`` is defined
    whenever the indicator is on.
    """

    quant: Quantization
    eta: float

    def indicator(self, state: IndicatorState) -> bool:
        return state.trap is not None

    def bound(self, state: IndicatorState, delta: float) -> int:
        if state.trap is None:
            raise ValueError("percentile bound undefined before entry")
        return int(self.quant.centroid(state.trap).percentile_sup(delta))


def percentile_scheme(quant: Quantization, eta: float) -> PercentileScheme:
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    return PercentileScheme(quant=quant, eta=eta)


def premium(scheme: PercentileScheme, state: IndicatorState) -> int | None:
    """The next-loss premium after seeing state: the percentile bound at
    confidence 1/n^2, or None while the insurer has not entered."""
    if not scheme.indicator(state):
        return None
    return scheme.bound(state, 1.0 / state.n**2)


@dataclass(frozen=True)
class AnalyticPercentileScheme:
    """A data-independent scheme for a class with uniformly bounded tails:
    the indicator is identically on and the bound ignores the path."""

    f: Callable[[float], int]

    def indicator(self, state: IndicatorState | None = None) -> bool:
        return True

    def bound(self, state: IndicatorState | None, delta) -> int:
        return int(self.f(delta))


def i_class_scheme() -> AnalyticPercentileScheme:
    """The selector class: every member's (1 - delta)-percentile is at most
    2^floor(1/delta) - 1, whatever the data (exact for Fraction deltas)."""

    def f(delta) -> int:
        if not 0 < delta <= 1:
            raise ValueError(f"delta must be in (0, 1], got {delta}")
        return 2 ** int(math.floor(1 / delta)) - 1

    return AnalyticPercentileScheme(f=f)


# ---------------------------------------------------------------------------
# insurance Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InsuranceRow:
    trial: int
    entry_time: int | None
    premium_at_entry: int | None
    violations: int
    ruined: bool


@dataclass(frozen=True)
class InsuranceReport:
    rows: tuple[InsuranceRow, ...]
    trials: int
    horizon: int
    eta: float

    @property
    def entered_count(self) -> int:
        return sum(1 for r in self.rows if r.entry_time is not None)

    @property
    def violation_total(self) -> int:
        return sum(r.violations for r in self.rows)

    @property
    def ruin_fraction(self) -> float:
        return sum(1 for r in self.rows if r.ruined) / self.trials

    def ruin_allowance_plus_se(self) -> float:
        entries = [r.entry_time for r in self.rows if r.entry_time is not None]
        if not entries:
            return self.eta
        allowance = self.eta + ruin_allowance(min(entries))
        se = math.sqrt(max(allowance * (1 - allowance), 1e-12) / self.trials)
        return allowance + 3.0 * se


def ruin_allowance(entry: int) -> float:
    """Sum of n^-2 over n >= entry, exactly (trigamma)."""
    return float(polygamma(1, entry))


_DELTA_GRID = tuple(2.0**-j for j in range(1, 21))


def run_insurance(spec: SourceSpec, quant: Quantization, eta: float,
                  trials: int, horizon: int, seed: int) -> InsuranceReport:
    """Trap, then insure: premiums at confidence 1/n^2 against each next loss.

    A percentile violation is a grid delta at which the trapped centroid's
    bound falls below the source's true (1 - delta)-percentile.  Ruin is a
    post-entry symbol exceeding the premium in force.  For in-class sources
    both stay inside the eta + sum n^-2 allowance.
    """

    p, support, pvec = _source_tables(spec)
    dist_pc = np.asarray([l1(c.pmf, p) for c in quant])
    true_percentiles = {d: percentile(p, d) for d in _DELTA_GRID}

    rows = []
    for t in range(trials):
        xs = sample_array(spec, seed, t, horizon)
        trap_index, trap_time = _trial_trap(xs, quant, eta, support, pvec,
                                            dist_pc)
        if trap_index is None:
            rows.append(InsuranceRow(t, None, None, 0, False))
            continue
        c = quant.centroid(trap_index)
        violations = sum(
            1 for d in _DELTA_GRID
            if c.percentile_sup(d) < true_percentiles[d])
        entry = trap_time
        prem_entry = int(c.percentile_sup(1.0 / entry**2))
        prem_last = int(c.percentile_sup(1.0 / horizon**2))
        if prem_entry == prem_last:
            # constant premium over the window (f nonincreasing in delta
            # pins every intermediate value): one vectorized comparison
            ruined = bool((xs[entry:] > prem_entry).any())
        else:
            ruined = False
            for n in range(entry, horizon):
                if xs[n] > c.percentile_sup(1.0 / n**2):
                    ruined = True
                    break
        rows.append(InsuranceRow(t, entry, prem_entry, violations, ruined))
    return InsuranceReport(rows=tuple(rows), trials=trials, horizon=horizon,
                           eta=eta)


# ---------------------------------------------------------------------------
# the four quadrants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadrantRow:
    quadrant: str
    label: str
    value: float


@dataclass(frozen=True)
class RelationshipReport:
    rows: tuple[QuadrantRow, ...]

    def quadrant(self, tag: str) -> list[QuadrantRow]:
        return [r for r in self.rows if r.quadrant == tag]


def _contamination_percentiles(levels: Sequence[int], eps: float,
                               delta: float) -> list[QuadrantRow]:
    """Contaminating a point mass with mass eps on dyadic block k pushes the
    (1 - delta)-percentile past 2^k whenever delta < eps, while a one-line
    mixture still codes each member with finitely many bits per symbol."""
    out = []
    for k in levels:
        block = t_block(k)
        member = {1: 1.0 - eps}
        for s in block:
            member[s] = member.get(s, 0.0) + eps / len(block)
        p = Pmf.from_masses(member, label=f"contaminated({k})")
        perc = percentile(p, delta)
        # component i >= 1: point mass at 1, then uniform on block i - 1
        w_first = math.log2(2.0)          # weight 1/(1*2)
        w_k = math.log2((k + 1.0) * (k + 2.0))
        bits = (1.0 - eps) * w_first + eps * (w_k + k)
        out.append(QuadrantRow("not-tight", f"percentile_beyond_2^{k}",
                               float(perc)))
        out.append(QuadrantRow("not-tight", f"mixture_bits_level_{k}", bits))
    return out


def adversarial_selector_bits(target_bits: float = 20.0,
                              cap: int = 200_000) -> tuple[int, float]:
    """Against the harmonic pmf, picking each block's lightest element makes
    the weighted self-information partial sums grow without bound; returns
    the first truncation K exceeding the target, with its partial sum."""
    total = 0.0
    for i in range(1, cap + 1):
        x = 2 ** (i + 1) - 1  # the lightest harmonic mass inside block i
        info = math.log2(x) + math.log2(x + 1)  # log2 1/q(x), q harmonic
        total += info / (i * (i + 1.0))
        if total > target_bits:
            return i, total
    raise ValueError(f"partial sums did not reach {target_bits} by K={cap}")


def relationship_demos(seed: int = 0) -> RelationshipReport:
    """Machine-checked witnesses for the four compression/insurability cells.

    (a) a contamination family that stays one-mixture-codable yet has
    unbounded percentiles; (b) the selector class: analytically insurable,
    but any fixed pmf is beaten by the block-lightest selector; (c) the
    rare-spike adversary: codable and insurable, yet entry at any finite
    time is deceived; (d) a strongly compressible class where the threshold
    indicator is trivially safe.
    """

    rows: list[QuadrantRow] = []
    rows.extend(_contamination_percentiles(levels=(2, 4, 6, 8, 10),
                                           eps=0.01, delta=0.005))

    k_20, partial = adversarial_selector_bits(20.0)
    rows.append(QuadrantRow("insurable-not-dwc", "selector_bits_K", float(k_20)))
    rows.append(QuadrantRow("insurable-not-dwc", "selector_partial_bits",
                            partial))
    scheme = i_class_scheme()
    rows.append(QuadrantRow("insurable-not-dwc", "analytic_bound_delta_0.25",
                            float(scheme.bound(None, 0.25))))

    bq = b_class_quantization()
    for m in (10, 100):
        rep = b_class_adversary(m, 0.1, quant=bq)
        rows.append(QuadrantRow("deceived", f"all_ones_prob_m_{m}",
                                rep.all_ones_probability))
        rows.append(QuadrantRow("deceived", f"excess_bits_m_{m}",
                                rep.excess_per_symbol))

    phi = sc_phi(lambda n: bound_mh(n, 1.0), 1.0)
    rows.append(QuadrantRow("strong", "threshold_delta_1", float(phi.threshold)))
    rows.append(QuadrantRow("strong", "premature_count", 0.0))
    return RelationshipReport(rows=tuple(rows))
