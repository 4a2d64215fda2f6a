"""The trap indicator: capture, refine, entry, and its Monte-Carlo harness.

The indicator watches the running empirical pmf.  A centroid whose zone
(an l1 ball much smaller than its reach) contains the empirical pmf is a
capture candidate; the refine screen discards candidates whose sample size
cannot yet rule out a large deviation at the centroid's separation level;
the indicator traps at the smallest surviving index, once, and reports
success strictly after the trapped centroid's entry threshold, the last time
at which local bound plus prior cost could still reach the target excess.

``premature_probability`` estimates, over sample paths, how often the
indicator reports success while the true per-symbol excess of the two-stage
mixture still exceeds the target; each entered path is classified through an
upper envelope certificate, a Monte-Carlo lower certificate, or declared
indeterminate — the gap is reported, never guessed away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .codes import MixtureMeasure, exact_redundancy_by_types
from .pmf import Pmf, l1, percentile
from .quantize import Quantization
from .sources import BMember, SourceSpec, make_pmf, sample_array

__all__ = [
    "IndicatorState", "capture_candidates", "refine", "phi_step", "run_phi",
    "ThresholdIndicator", "sc_phi", "PhiOutcome", "PrematureReport",
    "premature_probability", "AdversaryReport", "b_class_adversary",
    "trap_budget",
]


# ---------------------------------------------------------------------------
# step-by-step indicator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndicatorState:
    """Progress of the indicator along one path.

    ``trap`` is set at most once; ``entered`` is monotone.  ``counts`` is the
    running histogram as a sorted (symbol, count) tuple.
    """

    n: int = 0
    counts: tuple[tuple[int, int], ...] = ()
    trap: int | None = None
    trap_time: int | None = None
    entered: bool = False
    entry_time: int | None = None

    def empirical(self) -> Pmf:
        if self.n == 0:
            raise ValueError("no symbols seen yet")
        return Pmf.from_masses({s: c / self.n for s, c in self.counts},
                               label=f"empirical(n={self.n})")


def capture_candidates(tau: Pmf, quant: Quantization) -> list[int]:
    """Indices whose zone strictly contains the empirical pmf."""
    return [c.index for c in quant if l1(c.pmf, tau) < c.zone_radius]


def refine(tau: Pmf, n: int, eta: float, candidates: Sequence[int],
           quant: Quantization) -> list[int]:
    """Drop candidates that the current sample size cannot yet support.

    Keeps index k iff exp(-n D_k / rate) <= eta / (2 C_k k(k+1) n(n+1)) and,
    when the rule says so, twice the empirical (1 - sqrt(D_k)/6)-percentile
    is at most log2(C_k).  The first screen makes the total probability of
    ever trapping while the truth is outside reach at most eta/2: a bad
    capture forces an l1 deviation of sqrt(D_k), and the per-(k, n) budgets
    eta/(2 k(k+1) n(n+1)) telescope to eta/2 over all indices and times.
    """

    rule = quant.refine_rule
    kept = []
    for k in candidates:
        c = quant.centroid(k)
        log2_c = quant.effective_log2_c(k)
        lhs = -n * c.separation / rule.rate
        rhs = (math.log(eta) - math.log(2.0) - log2_c * math.log(2.0)
               - math.log(k * (k + 1.0)) - math.log(n * (n + 1.0)))
        if lhs > rhs:
            continue
        if rule.percentile_condition:
            gamma = math.sqrt(c.separation) / 6.0
            if 2.0 * percentile(tau, gamma) > log2_c:
                continue
        kept.append(k)
    return kept


def phi_step(state: IndicatorState, symbol: int, quant: Quantization,
             delta: float, eta: float) -> IndicatorState:
    """Advance the indicator by one symbol.

    Trapping and entering may happen on the same step: the indicator enters
    at the first time that is both at or after the trap and strictly beyond
    the trapped centroid's entry threshold.
    """

    if symbol < 1:
        raise ValueError(f"symbols are positive integers, got {symbol}")
    n = state.n + 1
    counts = dict(state.counts)
    counts[symbol] = counts.get(symbol, 0) + 1
    counts_t = tuple(sorted(counts.items()))

    trap, trap_time = state.trap, state.trap_time
    if trap is None:
        tau = Pmf.from_masses({s: c / n for s, c in counts_t},
                              label=f"empirical(n={n})")
        kept = refine(tau, n, eta, capture_candidates(tau, quant), quant)
        if kept:
            trap, trap_time = min(kept), n

    entered, entry_time = state.entered, state.entry_time
    if trap is not None and not entered:
        if n > quant.entry_threshold(trap, delta):
            entered, entry_time = True, n

    return IndicatorState(n=n, counts=counts_t, trap=trap,
                          trap_time=trap_time, entered=entered,
                          entry_time=entry_time)


def run_phi(xs: Sequence[int], quant: Quantization, delta: float,
            eta: float) -> IndicatorState:
    """Fold ``phi_step`` over a whole path (reference implementation)."""
    state = IndicatorState()
    for a in xs:
        state = phi_step(state, int(a), quant, delta, eta)
    return state


# ---------------------------------------------------------------------------
# single-class threshold indicator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdIndicator:
    """Success indicator for one class with a shared redundancy bound:
    reports 1 exactly when the sample length exceeds the last time the class
    bound still reached delta."""

    threshold: int
    delta: float

    def __call__(self, i: int) -> bool:
        return i > self.threshold

    @property
    def entry_time(self) -> int:
        return self.threshold + 1


def sc_phi(class_bound: Callable[[int], float], delta: float,
           scan_cap: int = 1 << 22) -> ThresholdIndicator:
    """Build the threshold indicator from a decreasing class bound.

    ``class_bound`` is evaluated from n = 2 on.  If it has not dropped below
    delta by ``scan_cap``, that is reported as an error rather than silently
    truncated.
    """

    if class_bound(scan_cap) >= delta:
        raise ValueError(
            f"class bound still >= {delta} at n = {scan_cap}; no finite "
            "threshold within the scan horizon")
    if class_bound(2) < delta:
        return ThresholdIndicator(0, delta)
    lo, hi = 2, scan_cap  # bound(lo) >= delta > bound(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if class_bound(mid) < delta:
            hi = mid
        else:
            lo = mid
    return ThresholdIndicator(lo, delta)


# ---------------------------------------------------------------------------
# Monte-Carlo premature-entry estimate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiOutcome:
    trial: int
    entered: bool
    entry_time: int | None
    trap_index: int | None
    trap_time: int | None
    premature: bool
    indeterminate: bool


@dataclass(frozen=True)
class PrematureReport:
    outcomes: tuple[PhiOutcome, ...]
    trials: int
    horizon: int
    delta: float
    eta: float

    @property
    def entered_count(self) -> int:
        return sum(1 for o in self.outcomes if o.entered)

    @property
    def entry_fraction(self) -> float:
        return self.entered_count / self.trials

    @property
    def premature_count(self) -> int:
        return sum(1 for o in self.outcomes if o.premature)

    @property
    def premature_fraction(self) -> float:
        return self.premature_count / self.trials

    @property
    def indeterminate_count(self) -> int:
        return sum(1 for o in self.outcomes if o.indeterminate)


def _source_tables(spec: SourceSpec):
    p = make_pmf(spec)
    support = np.asarray(p.support, dtype=np.int64)
    pvec = np.asarray([p.mass(int(s)) for s in support])
    return p, support, pvec


def _centroid_on(support: np.ndarray, c_pmf: Pmf) -> tuple[np.ndarray, float]:
    cvec = np.asarray([c_pmf.mass(int(s)) for s in support])
    return cvec, 1.0 - float(cvec.sum())


def _trial_trap(xs: np.ndarray, quant: Quantization, eta: float,
                support: np.ndarray, pvec: np.ndarray,
                dist_pc: np.ndarray) -> tuple[int | None, int | None]:
    """Vectorized equivalent of folding ``phi_step`` (trap part) over xs."""
    horizon = xs.shape[0]
    k = support.shape[0]
    pos = np.searchsorted(support, xs)
    one_hot = np.zeros((horizon, k), dtype=np.int64)
    one_hot[np.arange(horizon), pos] = 1
    counts = np.cumsum(one_hot, axis=0)
    ns = np.arange(1, horizon + 1, dtype=np.float64)[:, None]
    tau = counts / ns
    dev = np.abs(tau - pvec[None, :]).sum(axis=1)  # l1(tau_n, p)

    n_min_all = [quant.refine_n_min(c.index, eta) for c in quant]
    n_floor = min((m for m in n_min_all if m <= horizon), default=None)
    if n_floor is None:
        return None, None
    max_dev = dev[n_floor - 1:].max()

    best_time, best_index = None, None
    for c in quant:
        n_min = n_min_all[c.index - 1]
        if n_min > horizon:
            continue
        # triangle inequality: capture needs l1(p, c) - l1(tau, p) < zone
        if dist_pc[c.index - 1] >= c.zone_radius + max_dev:
            continue
        cvec, c_out = _centroid_on(support, c.pmf)
        start = int(n_min) - 1
        close = np.abs(tau[start:] - cvec[None, :]).sum(axis=1) + c_out \
            < c.zone_radius
        if quant.refine_rule.percentile_condition:
            gamma = math.sqrt(c.separation) / 6.0
            cdf = np.cumsum(tau[start:], axis=1)
            idx = np.argmax(cdf >= 1.0 - gamma, axis=1)
            close &= 2.0 * support[idx] <= quant.effective_log2_c(c.index)
        if not close.any():
            continue
        t = start + int(np.argmax(close)) + 1
        if best_time is None or t < best_time or \
                (t == best_time and c.index < best_index):
            best_time, best_index = t, c.index
    return best_index, best_time


def _upper_envelope_at(quant: Quantization, p: Pmf, j: int) -> float:
    """min over components covering supp(p) of rbound(j) + prior cost / j.

    Each such component upper-bounds the mixture's exact per-symbol excess at
    every length >= j, because its bound and the prior cost both decrease.
    """

    best = math.inf
    supp = set(p.support)
    for c in quant:
        lm = c.local_measure
        covers = getattr(lm, "support", None)
        if covers is None or not supp.issubset(covers):
            continue
        val = lm.rbound(j) + c.penalty_bits / j
        best = min(best, val)
    return best


def _mc_excess_at(spec: SourceSpec, p: Pmf, qstar: MixtureMeasure, j: int,
                  seed: int, base_trial: int, samples: int = 48):
    """Monte-Carlo estimate of the exact per-symbol excess at length j."""
    support = [int(s) for s in p.support]
    logp = {s: math.log2(p.mass(s)) for s in support}
    vals = []
    for t in range(samples):
        xs = sample_array(spec, seed, base_trial + t, j)
        syms, cnts = np.unique(xs, return_counts=True)
        lp = sum(int(c) * logp[int(s)] for s, c in zip(syms, cnts))
        lq = qstar.log2_prob_counts([int(s) for s in syms],
                                    [int(c) for c in cnts])
        vals.append((lp - lq) / j)
    mean = float(np.mean(vals))
    half = 1.96 * float(np.std(vals, ddof=1)) / math.sqrt(samples)
    return mean, half


def premature_probability(spec: SourceSpec, quant: Quantization,
                          qstar: MixtureMeasure | None, delta: float,
                          eta: float, trials: int, horizon: int,
                          seed: int) -> PrematureReport:
    """Run the indicator over sample paths and classify entered runs.

    A run is premature when at some length j at or after entry the exact
    per-symbol excess of the two-stage mixture over the source exceeds
    delta.  The excess curve is deterministic given the entry time, so each
    distinct (trap, entry) pair is certified once: not premature when the
    component envelope at the entry time is already at most delta; premature
    when a Monte-Carlo lower confidence bound on the excess at entry exceeds
    delta; indeterminate otherwise.
    """

    if qstar is None:
        qstar = quant.mixture()
    p, support, pvec = _source_tables(spec)
    dist_pc = np.asarray([l1(c.pmf, p) for c in quant])

    cert_cache: dict[tuple[int, int], tuple[bool, bool]] = {}
    outcomes = []
    for t in range(trials):
        xs = sample_array(spec, seed, t, horizon)
        trap_index, trap_time = _trial_trap(xs, quant, eta, support, pvec,
                                            dist_pc)
        entered, entry_time = False, None
        premature, indet = False, False
        if trap_index is not None:
            thr = quant.entry_threshold(trap_index, delta)
            first = max(trap_time, int(thr) + 1) if thr != math.inf else None
            if first is not None and first <= horizon:
                entered, entry_time = True, first
                key = (trap_index, entry_time)
                if key not in cert_cache:
                    env = _upper_envelope_at(quant, p, entry_time)
                    if env <= delta:
                        cert_cache[key] = (False, False)
                    else:
                        mean, half = _mc_excess_at(
                            spec, p, qstar, entry_time, seed,
                            base_trial=trials + 1000 * trap_index)
                        if mean - half > delta:
                            cert_cache[key] = (True, False)
                        else:
                            cert_cache[key] = (False, True)
                premature, indet = cert_cache[key]
        outcomes.append(PhiOutcome(trial=t, entered=entered,
                                   entry_time=entry_time,
                                   trap_index=trap_index,
                                   trap_time=trap_time,
                                   premature=premature,
                                   indeterminate=indet))
    return PrematureReport(outcomes=tuple(outcomes), trials=trials,
                           horizon=horizon, delta=delta, eta=eta)


# ---------------------------------------------------------------------------
# deceptive-source construction and trap budget
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdversaryReport:
    member: BMember
    window: int
    all_ones_probability: float
    excess_per_symbol: float


def b_class_adversary(m: int, delta: float,
                      q: MixtureMeasure | None = None,
                      quant: Quantization | None = None) -> AdversaryReport:
    """A rare-spike member that hides from q for m steps yet stays deceptive.

    With spike weight 1/(2m) the first m symbols are all ones with
    probability at least 1/e, while the exact per-symbol divergence against
    q at length m stays above delta for any code that must hedge over the
    spike's 2^(2m) possible positions.
    """

    if m < 1:
        raise ValueError("window must be >= 1")
    member = BMember(1.0 / (2.0 * m))
    if q is None:
        if quant is None:
            raise ValueError("need a measure q or a quantization")
        q = quant.mixture()
    p = make_pmf(member)
    excess = exact_redundancy_by_types(p, q, m)
    all_ones = (1.0 - member.epsilon) ** m
    return AdversaryReport(member=member, window=m,
                           all_ones_probability=all_ones,
                           excess_per_symbol=excess)


def trap_budget(eta: float, n_cap: int, index_cap: int) -> float:
    """Numeric partial sum of the per-(index, time) bad-trap budgets.

    The full double series telescopes to eta/2; every truncation must stay
    at or below it.
    """

    per_index = math.fsum(1.0 / (k * (k + 1.0))
                          for k in range(1, index_cap + 1))
    per_time = math.fsum(1.0 / (n * (n + 1.0)) for n in range(1, n_cap + 1))
    return eta / 2.0 * per_index * per_time
