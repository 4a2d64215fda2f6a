"""Countable quantizations of source classes for the trap indicator.

A quantization is an indexed family of centroids.  Each centroid carries a
representative pmf, a reach radius in symmetrized-divergence units, a local
coding measure whose redundancy bound covers every class member within reach,
and an analytic upper bound on the (1 - gamma)-percentiles of those members.
The derived quantities (zone radius, separation level, percentile constant)
follow fixed formulas from the reach; they are what the capture/refine front
end consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .codes import (
    BlockEscapeCode,
    KnownSupportCode,
    MixtureMeasure,
    SequentialMeasure,
    iid_measure,
    index_penalty_bits,
)
from .pmf import Pmf, block_split_pmf, j_divergence, mix, uniform_pmf
from .sources import MhMember, make_pmf, mh_catalog, shift

LN2 = math.log(2.0)

# Any reach below this keeps the zone radius strictly inside the reach ball,
# so "tau in the zone but truth outside reach" forces a large deviation.
# The inequality eps * ln2 / 16 <= 1 holds for every eps <= 16/ln2.
MAX_REACH = 16.0 / LN2


@dataclass(frozen=True)
class RefineRule:
    """Screening rule applied to capture candidates.

    ``rate`` is the divisor in the concentration requirement
    exp(-n * D / rate) <= budget; ``log2_c_cap`` overrides the per-centroid
    percentile constant with a fixed value (useful when the whole class lives
    on a known finite alphabet, where a Sanov-style count bound with rate 2
    and constant 2^K is valid); ``percentile_condition`` switches the
    empirical-percentile screen on or off.
    """

    rate: float = 18.0
    log2_c_cap: float | None = None
    percentile_condition: bool = True


#: The default screen: concentration rate 18, per-centroid constants, and the
#: empirical percentile check.  Deliberately conservative.
DEFAULT_RULE = RefineRule()


def finite_alphabet_rule(max_symbol: int) -> RefineRule:
    """Screen for classes supported inside {1..max_symbol}.

    With at most ``max_symbol`` symbols,
    P(||tau - p||_1 >= d) <= (2^K - 2) * exp(-n d^2 / 2), so rate 2 with the
    flat constant log2(C) = K replaces the generic rate-18 rule, and the
    percentile screen is redundant because every percentile is <= max_symbol.
    """

    return RefineRule(rate=2.0, log2_c_cap=float(max_symbol),
                      percentile_condition=False)


@dataclass(frozen=True)
class Centroid:
    """One cell representative inside a quantization.

    ``percentile_sup(gamma)`` must upper-bound, over every class member r
    within reach of this centroid, the smallest symbol s with
    r({1..s}) >= 1 - gamma.
    """

    index: int
    pmf: Pmf
    reach: float
    local_measure: SequentialMeasure
    percentile_sup: Callable[[float], int]

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("centroid indices start at 1")
        if not 0.0 < self.reach <= MAX_REACH:
            raise ValueError(f"reach must lie in (0, {MAX_REACH:.3f}]")

    @property
    def zone_radius(self) -> float:
        """Capture radius in l1 around the centroid pmf."""
        return self.reach ** 2 * LN2 ** 2 / 16.0

    @property
    def separation(self) -> float:
        """Squared zone radius: the large-deviation level D for bad captures."""
        return self.reach ** 4 * LN2 ** 4 / 256.0

    @property
    def log2_c(self) -> float:
        """log2 of the percentile constant C = 2^(2 * F^{-1}(1 - sqrt(D)/6))."""
        return 2.0 * float(self.percentile_sup(math.sqrt(self.separation) / 6.0))

    @property
    def penalty_bits(self) -> float:
        return index_penalty_bits(self.index)


class Quantization:
    """An ordered, finite truncation of a class quantization.

    ``extras`` are additional mixture components (catch-alls) appended after
    the centroids; they take part in the two-stage mixture but are never
    trapped.  Component k (1-based over centroids then extras) gets prior
    weight 1/(k(k+1)).
    """

    def __init__(self, centroids: Sequence[Centroid], class_tag: str,
                 refine_rule: RefineRule = DEFAULT_RULE,
                 extras: Sequence[SequentialMeasure] = ()):
        centroids = tuple(centroids)
        if not centroids:
            raise ValueError("a quantization needs at least one centroid")
        if [c.index for c in centroids] != list(range(1, len(centroids) + 1)):
            raise ValueError("centroid indices must be 1..K in order")
        self.centroids = centroids
        self.class_tag = class_tag
        self.refine_rule = refine_rule
        self.extras = tuple(extras)
        self._entry_cache: dict[tuple[int, float], float] = {}
        self._nmin_cache: dict[tuple[int, float], float] = {}

    def __len__(self) -> int:
        return len(self.centroids)

    def __iter__(self):
        return iter(self.centroids)

    def centroid(self, index: int) -> Centroid:
        return self.centroids[index - 1]

    def mixture(self) -> MixtureMeasure:
        """The two-stage code: local measures weighted by 1/(k(k+1))."""
        comps = [c.local_measure for c in self.centroids] + list(self.extras)
        return MixtureMeasure(comps)

    def effective_log2_c(self, index: int) -> float:
        rule = self.refine_rule
        if rule.log2_c_cap is not None:
            return rule.log2_c_cap
        return self.centroid(index).log2_c

    def refine_n_min(self, index: int, eta: float) -> float:
        """Smallest n at which the concentration screen can pass for ``index``.

        The screen exp(-n D / rate) <= eta / (2 C k(k+1) n(n+1)) depends on
        the path only through n, so its first feasible n is deterministic.
        Returns ``math.inf`` when the screen never passes below 2^200.
        """

        key = (index, eta)
        if key not in self._nmin_cache:
            c = self.centroid(index)
            d_over_rate = c.separation / self.refine_rule.rate
            slack = (math.log(eta) - math.log(2.0)
                     - self.effective_log2_c(index) * LN2
                     - math.log(index * (index + 1.0)))

            def ok(n: int) -> bool:
                return -n * d_over_rate <= slack - math.log(n * (n + 1.0))

            self._nmin_cache[key] = _first_true(ok, 1 << 200)
        return self._nmin_cache[key]

    def entry_threshold(self, index: int, delta: float) -> float:
        """Largest n at which the local bound plus prior cost still reaches delta.

        The indicator may only report success strictly after this time: for
        every m beyond it, rbound(m) + log2(k(k+1))/m < delta, so the mixture's
        per-symbol excess over any in-reach member is certified below delta.
        Returns ``math.inf`` when the bound never drops under delta (entry is
        then out of reach at any horizon; such centroids simply never enter).
        """

        key = (index, delta)
        if key not in self._entry_cache:
            c = self.centroid(index)
            pen = c.penalty_bits

            def below(n: int) -> bool:
                return c.local_measure.rbound(n) + pen / n < delta

            first = _first_true(below, 1 << 400)
            self._entry_cache[key] = first - 1 if first != math.inf else math.inf
        return self._entry_cache[key]


def _first_true(pred: Callable[[int], bool], cap: int) -> float:
    """First n >= 1 with pred(n), assuming pred is monotone (False then True)."""
    if pred(1):
        return 1
    hi = 2
    while hi <= cap and not pred(hi):
        hi <<= 1
    if hi > cap:
        return math.inf
    lo = hi >> 1  # pred(lo) is False
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Bounded-uniform class
# ---------------------------------------------------------------------------

def j_uniform(lo1: int, hi1: int, lo2: int, hi2: int) -> float:
    """Symmetrized divergence between two uniform pmfs, in closed form."""
    k1 = hi1 - lo1 + 1
    k2 = hi2 - lo2 + 1
    overlap = max(0, min(hi1, hi2) - max(lo1, lo2) + 1)
    only1 = (k1 - overlap) / k1
    only2 = (k2 - overlap) / k2
    both = overlap * ((1.0 / k1) * math.log2(2.0 * k2 / (k1 + k2))
                      + (1.0 / k2) * math.log2(2.0 * k1 / (k1 + k2)))
    return only1 + only2 + both


def uniform_class_quantization(max_symbol: int = 64,
                               reach: float = 1.6,
                               rule: RefineRule | None = None) -> Quantization:
    """Quantize the uniform-over-an-integer-interval class on {1..max_symbol}.

    One centroid per interval, ordered by (span, lower end).  Each local
    measure is an add-half estimator over the union of all intervals within
    reach of the cell, and the percentile bound is the largest upper end of
    those intervals (every in-reach member is uniform, so each of its
    percentiles is at most its upper end).
    """

    if rule is None:
        rule = finite_alphabet_rule(max_symbol)
    cells = [(lo, lo + span)
             for span in range(max_symbol)
             for lo in range(1, max_symbol - span + 1)]
    centroids = []
    for idx, (lo, hi) in enumerate(cells, start=1):
        near = [(l2, h2) for (l2, h2) in cells
                if j_uniform(lo, hi, l2, h2) < reach]
        u_lo = min(l2 for l2, _ in near)
        u_hi = max(h2 for _, h2 in near)
        centroids.append(Centroid(
            index=idx,
            pmf=uniform_pmf(lo, hi),
            reach=reach,
            local_measure=KnownSupportCode(range(u_lo, u_hi + 1)),
            percentile_sup=lambda gamma, top=u_hi: top,
        ))
    return Quantization(centroids, class_tag="uniform", refine_rule=rule)


# ---------------------------------------------------------------------------
# Rare-spike class
# ---------------------------------------------------------------------------

def _spike_symbol(level: int, offset: int) -> int:
    return (1 << level) + (offset - 1)


def _spike_cell_reach(level: int, eps_mid: float) -> float:
    """Reach for one rare-spike cell: covers the cell, excludes foreigners.

    Any member with a different spike (or none) has zero mass at this cell's
    spike, so its divergence from the centroid is at least the centroid's
    spike weight; staying at half that floor keeps every foreign member out.
    The in-cell diameter is measured on an eps grid and padded.
    """

    centroid = Pmf.from_masses({1: 1.0 - eps_mid, 2: eps_mid})
    lo = 1.0 / (level + 1) + 1e-9
    hi = min(1.0 / level, 1.0 - 1e-9)
    diam = max(
        j_divergence(centroid,
                     Pmf.from_masses({1: 1.0 - e, 2: e}))
        for e in [lo + (hi - lo) * t / 32.0 for t in range(33)])
    reach = 1.25 * diam
    if reach >= 0.5 * eps_mid:
        raise ValueError(f"cell at level {level} too wide for safe reach")
    return reach


def b_class_quantization(level_cap: int = 6) -> Quantization:
    """Quantize the rare-spike class: (1-eps) at symbol 1, eps at one spike.

    Members with spike weight eps in (1/(n+1), 1/n] all place their spike at
    one of the 2^n symbols in the n-th dyadic block, so a cell is a pair
    (level n <= level_cap, offset j <= 2^n) and its centroid puts the
    mid-range weight on that spike.  Each cell's reach is sized to cover its
    own eps range while staying below the foreign-member divergence floor
    (see :func:`_spike_cell_reach`), so the two-symbol local estimator is
    valid for everything within reach.  A single whole-line catch-all
    component is appended so the mixture stays proper on all the naturals.
    """

    if not 1 <= level_cap <= 16:
        raise ValueError("level_cap must be in 1..16")
    centroids = []
    idx = 0
    for level in range(1, level_cap + 1):
        eps_mid = (1.0 / level + 1.0 / (level + 1)) / 2.0
        reach = _spike_cell_reach(level, eps_mid)
        for offset in range(1, (1 << level) + 1):
            idx += 1
            spike = _spike_symbol(level, offset)
            centroids.append(Centroid(
                index=idx,
                pmf=Pmf.from_masses({1: 1.0 - eps_mid, spike: eps_mid},
                                    label=f"spike-cell({level},{offset})"),
                reach=reach,
                local_measure=KnownSupportCode([1, spike]),
                percentile_sup=lambda gamma, s=spike: s if gamma < 1.0 else 1,
            ))
    return Quantization(centroids, class_tag="rare-spike",
                        refine_rule=DEFAULT_RULE,
                        extras=[iid_measure(block_split_pmf())])


# ---------------------------------------------------------------------------
# Contaminated-uniform class
# ---------------------------------------------------------------------------

def fh_class_quantization(h: float = 1.0,
                          base_cap: int = 4,
                          span_cap: int = 4,
                          eps_grid: Sequence[float] = (0.5, 0.25),
                          tails: Sequence[MhMember] | None = None,
                          reach: float = 0.1) -> Quantization:
    """Quantize uniform blocks contaminated by a shifted monotone tail.

    A centroid is (block, contamination weight, tail shape); the local
    measure is a block/escape code whose bound is uniform over all tails with
    second self-information moment at most h, so a cell covers same-block
    members exactly regardless of their tail.  The percentile bound adds to
    the block's upper end the analytic tail percentile 2^ceil(sqrt(h/g)),
    valid for any such tail at any contamination weight.

    The default reach stays below (1 - max eps)/span_cap, the guaranteed
    divergence to any member whose block starts elsewhere, so those members
    are excluded from every cell.  Entry times for these cells are
    astronomically far under the default screen; the class is included for
    its scheme structure (premiums, percentile bounds), not for
    finite-horizon runs.
    """

    if tails is None:
        tails = mh_catalog(h)
    cells = []
    for span in range(span_cap):
        for lo in range(1, base_cap - span + 1):
            for eps in eps_grid:
                for tail in tails:
                    cells.append((lo, lo + span, eps, tail))
    centroids = []
    for idx, (lo, hi, eps, tail) in enumerate(cells, start=1):

        def perc(gamma: float, top=hi, hh=h) -> int:
            if gamma >= 1.0:
                return 1
            return top + (1 << math.ceil(math.sqrt(hh / gamma)))

        centroids.append(Centroid(
            index=idx,
            pmf=mix(uniform_pmf(lo, hi), shift(make_pmf(tail), hi), eps),
            reach=reach,
            local_measure=BlockEscapeCode(lo, hi, h),
            percentile_sup=perc,
        ))
    return Quantization(centroids, class_tag="contaminated-uniform",
                        refine_rule=DEFAULT_RULE)
