"""Sequential coding measures and redundancy evaluation.

A ``SequentialMeasure`` assigns a base-2 log-probability to every finite
string over the naturals, exposed both whole-string and one-symbol-at-a-time
(the conditional view is what an arithmetic coder would consume).  The empty
string has probability 1.  Measures may be deliberately deficient
(sub-probability); consistency invariants are asserted per measure kind in
the tests.

Everything here is count-based: the log-probability of a string depends only
on its empirical counts.  ``log2_prob_counts`` exposes that directly and is
the hook the exact-redundancy machinery uses (type-class enumeration for
small finite supports, and a separable per-symbol path for the add-half
estimator that scales to astronomically many types).

Redundancy conventions: everything is in bits, per-symbol quantities divide
by the string length.  ``redundancy`` refuses shapes it cannot do exactly
instead of silently falling back to sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom as _binom

from .pmf import Pmf, harmonic_pmf, kl
from .sources import SourceSpec, make_pmf, sample_array

__all__ = [
    "SequentialMeasure", "IIDMeasure", "KnownSupportCode", "PatternCode",
    "MixtureMeasure", "iid_measure", "known_support_code", "pattern_code",
    "mixture", "index_weight", "index_penalty_bits", "bound_mh",
    "codelength", "redundancy", "RedundancyReport", "codelength_trace",
    "exact_iid_expected_codelength",
]

LN2 = math.log(2.0)
_LGHALF = float(gammaln(0.5))


def index_weight(i: int) -> float:
    """The summable per-index weight 1/(i(i+1)); sums to 1 over i >= 1 and
    telescopes, so every truncation's tail is exactly 1/(K+1)."""
    return 1.0 / (i * (i + 1))


def index_penalty_bits(i: int) -> float:
    """Codelength overhead of hiding component i behind the mixture."""
    return math.log2(i * (i + 1.0))


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


class SequentialMeasure:
    """Base class: subclasses implement start/step and usually counts."""

    name: str = "measure"
    rbound: Callable[[int], float] | None = None

    def start(self):
        return None

    def step(self, state, a: int):
        """Return (new_state, log2 conditional probability of a)."""
        raise NotImplementedError

    def log2_prob(self, xs: Sequence[int]) -> float:
        state = self.start()
        total = 0.0
        for a in xs:
            state, c = self.step(state, a)
            if c == -math.inf:
                return -math.inf
            total += c
        return total

    def log2_prob_counts(self, symbols: Sequence[int], counts: Sequence[int]) -> float:
        raise NotImplementedError(f"{self.name}: no count-based evaluation")

    def log2_prob_counts_matrix(self, symbols: Sequence[int],
                                counts: np.ndarray) -> np.ndarray:
        return np.array([self.log2_prob_counts(symbols, row) for row in counts])


class IIDMeasure(SequentialMeasure):
    def __init__(self, pmf: Pmf):
        self.pmf = pmf
        self.name = f"iid({pmf.label})"
        self._log2_mass = getattr(pmf, "log2_mass", None)

    def _l2(self, a: int) -> float:
        if self._log2_mass is not None:
            return self._log2_mass(a)
        m = self.pmf.mass(a)
        return math.log2(m) if m > 0.0 else -math.inf

    def step(self, state, a: int):
        return None, self._l2(a)

    def log2_prob_counts(self, symbols, counts):
        total = 0.0
        for s, c in zip(symbols, counts):
            if c == 0:
                continue
            l2 = self._l2(s)
            if l2 == -math.inf:
                return -math.inf
            total += c * l2
        return total

    def log2_prob_counts_matrix(self, symbols, counts):
        l2 = np.array([self._l2(s) for s in symbols])
        out = np.full(len(counts), 0.0)
        bad = (counts[:, l2 == -math.inf] > 0).any(axis=1) if (l2 == -math.inf).any() else None
        safe = np.where(l2 == -math.inf, 0.0, l2)
        out = counts @ safe
        if bad is not None:
            out[bad] = -math.inf
        return out


class KnownSupportCode(SequentialMeasure):
    """Add-half (Dirichlet(1/2,...,1/2)) estimator over a fixed finite support.

    Symbols outside the support get probability zero; callers guard.  The
    attached redundancy bound holds for every i.i.d. source living on the
    support:  rbound(n) = (|S|-1) log2(n+1) / (2n) + 2/n.
    """

    def __init__(self, support: Sequence[int]):
        self.support = tuple(sorted(set(int(s) for s in support)))
        if not self.support:
            raise ValueError("empty support")
        self._pos = {s: i for i, s in enumerate(self.support)}
        self.k = len(self.support)
        self.name = f"add-half({self.support[0]}..{self.support[-1]}|{self.k})"

    def rbound(self, n: int) -> float:
        if n < 1:
            raise ValueError("rbound needs n >= 1")
        return (self.k - 1) * math.log2(n + 1.0) / (2.0 * n) + 2.0 / n

    def start(self):
        return (0,) * self.k

    def step(self, state, a: int):
        i = self._pos.get(a)
        if i is None:
            return state, -math.inf
        n = sum(state)
        cond = math.log2((state[i] + 0.5) / (n + 0.5 * self.k))
        return state[:i] + (state[i] + 1,) + state[i + 1:], cond

    def log2_prob_counts(self, symbols, counts):
        n = 0
        acc = 0.0
        for s, c in zip(symbols, counts):
            if c == 0:
                continue
            if s not in self._pos:
                return -math.inf
            acc += float(gammaln(c + 0.5)) - _LGHALF
            n += int(c)
        acc += float(gammaln(0.5 * self.k) - gammaln(n + 0.5 * self.k))
        return acc / LN2

    def log2_prob_counts_matrix(self, symbols, counts):
        inside = np.array([s in self._pos for s in symbols])
        n = counts.sum(axis=1)
        acc = np.where(counts[:, inside] > 0,
                       gammaln(counts[:, inside] + 0.5) - _LGHALF, 0.0).sum(axis=1)
        acc += gammaln(0.5 * self.k) - gammaln(n + 0.5 * self.k)
        out = acc / LN2
        if (~inside).any():
            out = np.where((counts[:, ~inside] > 0).any(axis=1), -math.inf, out)
        return out


class PatternCode(SequentialMeasure):
    """Two-parameter (discount 1/2, concentration 1/2) partition coder.

    Repeats are coded by (count - 1/2)/(n + 1/2); a first occurrence pays the
    innovation mass (1/2 + d/2)/(n + 1/2) times the identity cost of the new
    symbol under ``symbol_code``.  The innovation mass is deliberately *not*
    renormalized over unseen symbols, so the measure is sub-probability; in
    exchange the total codelength is exactly invariant under permutations of
    the string (partition part is exchangeable, identity costs form a set).
    """

    def __init__(self, symbol_code: Pmf | None = None):
        self.symbol_code = symbol_code if symbol_code is not None else harmonic_pmf()
        self.name = f"pattern({self.symbol_code.label})"
        self._sc_log2 = getattr(self.symbol_code, "log2_mass", None)

    def _identity_cost(self, a: int) -> float:
        if self._sc_log2 is not None:
            return self._sc_log2(a)
        m = self.symbol_code.mass(a)
        return math.log2(m) if m > 0.0 else -math.inf

    def start(self):
        return {}

    def step(self, state: dict, a: int):
        n = sum(state.values())
        d = len(state)
        new = dict(state)
        if a in state:
            cond = math.log2((state[a] - 0.5) / (n + 0.5))
        else:
            cond = math.log2((0.5 + 0.5 * d) / (n + 0.5)) + self._identity_cost(a)
        new[a] = new.get(a, 0) + 1
        return new, cond

    def log2_prob_counts(self, symbols, counts):
        pairs = [(s, int(c)) for s, c in zip(symbols, counts) if c > 0]
        n = sum(c for _, c in pairs)
        d = len(pairs)
        if n == 0:
            return 0.0
        # partition part:  prod_{j<=d} (j/2) * prod_a prod_{l<c_a}(l - 1/2)
        #                  / prod_{t<n} (t + 1/2)
        acc = float(gammaln(d + 1)) - d * LN2
        acc += math.fsum(float(gammaln(c - 0.5)) - _LGHALF for _, c in pairs)
        acc -= float(gammaln(n + 0.5)) - _LGHALF
        total = acc / LN2
        for s, _ in pairs:
            ic = self._identity_cost(s)
            if ic == -math.inf:
                return -math.inf
            total += ic
        return total

    def log2_prob_counts_matrix(self, symbols, counts):
        ident = np.array([self._identity_cost(s) for s in symbols])
        pos = counts > 0
        d = pos.sum(axis=1)
        n = counts.sum(axis=1)
        acc = gammaln(d + 1) - d * LN2
        acc += np.where(pos, gammaln(np.maximum(counts, 1) - 0.5) - _LGHALF, 0.0).sum(axis=1)
        acc -= gammaln(n + 0.5) - _LGHALF
        out = acc / LN2 + np.where(pos, ident, 0.0).sum(axis=1)
        return np.where(n == 0, 0.0, out)


class BlockEscapeCode(SequentialMeasure):
    """Local measure for a uniform block contaminated by a shifted tail.

    Symbols in [lo, hi] and a single escape token are coded by an add-half
    estimator over span+1 super-symbols; an escaped symbol x > hi additionally
    pays the pattern coder for x - hi.  The attached bound covers every
    (1-eps) uniform(lo,hi) + eps shifted-tail source whose tail has
    self-information second moment <= h: the super-process part is within the
    add-half bound, and the escape sub-stream's pattern cost per original
    symbol is at most bound_mh(n, h) because m * bound_mh(m, h) grows in m.
    """

    ESCAPE = object()

    def __init__(self, lo: int, hi: int, h: float):
        if not 1 <= lo <= hi:
            raise ValueError("need 1 <= lo <= hi")
        self.lo, self.hi, self.h = lo, hi, h
        self.span = hi - lo + 1
        self._super = KnownSupportCode(list(range(lo, hi + 1)) + [hi + 1])
        self._escape_token = hi + 1
        self._tail = PatternCode()
        self.name = f"block-escape({lo},{hi};h={h})"

    def rbound(self, n: int) -> float:
        return (self.span * math.log2(n + 1.0) / (2.0 * n) + 2.0 / n
                + bound_mh(max(n, 2), self.h))

    def start(self):
        return (self._super.start(), self._tail.start())

    def step(self, state, a: int):
        sup_state, tail_state = state
        if self.lo <= a <= self.hi:
            sup_state, c = self._super.step(sup_state, a)
            return (sup_state, tail_state), c
        if a <= self.hi:
            return state, -math.inf
        sup_state, c1 = self._super.step(sup_state, self._escape_token)
        tail_state, c2 = self._tail.step(tail_state, a - self.hi)
        return (sup_state, tail_state), c1 + c2

    def log2_prob_counts(self, symbols, counts):
        in_sym, in_cnt, esc_sym, esc_cnt = [], [], [], []
        for s, c in zip(symbols, counts):
            if c == 0:
                continue
            if self.lo <= s <= self.hi:
                in_sym.append(s)
                in_cnt.append(c)
            elif s > self.hi:
                esc_sym.append(s - self.hi)
                esc_cnt.append(c)
            else:
                return -math.inf
        n_esc = sum(esc_cnt)
        if n_esc:
            in_sym.append(self._escape_token)
            in_cnt.append(n_esc)
        total = self._super.log2_prob_counts(in_sym, in_cnt)
        if n_esc:
            total += self._tail.log2_prob_counts(esc_sym, esc_cnt)
        return total


class MixtureMeasure(SequentialMeasure):
    """Countable mixture with per-index weights 1/(i(i+1)), indices from 1.

    The weights are left unnormalized over any truncation (deficient), which
    is what makes the per-component penalty exactly log2(i(i+1)) bits:
    -log2 q*(x) <= -log2 q_i(x) + log2(i(i+1)) pathwise.
    """

    def __init__(self, components: Sequence[SequentialMeasure],
                 log2_weights: Sequence[float] | None = None):
        comps = list(components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        self.components = comps
        if log2_weights is None:
            self.log2_weights = np.array(
                [-index_penalty_bits(i) for i in range(1, len(comps) + 1)])
        else:
            self.log2_weights = np.asarray(list(log2_weights), dtype=float)
            if len(self.log2_weights) != len(comps):
                raise ValueError("one weight per component")
        self.name = f"mixture[{len(comps)}]"

    def start(self):
        # prev_total starts at 0 (empty string has probability 1): the weight
        # deficiency log2(sum w) of a truncation is charged to the first
        # symbol's conditional, so the fold reproduces log2_prob exactly.
        return ([c.start() for c in self.components],
                np.array(self.log2_weights, dtype=float), 0.0)

    def step(self, state, a: int):
        states, cum, prev_total = state
        new_states = []
        new_cum = np.empty_like(cum)
        for i, (c, s) in enumerate(zip(self.components, states)):
            ns, l2 = c.step(s, a)
            new_states.append(ns)
            new_cum[i] = cum[i] + l2
        after = float(np.logaddexp2.reduce(new_cum))
        return (new_states, new_cum, after), after - prev_total

    def log2_prob(self, xs):
        per = np.array([c.log2_prob(xs) for c in self.components])
        return float(np.logaddexp2.reduce(per + self.log2_weights))

    def log2_prob_counts(self, symbols, counts):
        per = np.array([c.log2_prob_counts(symbols, counts)
                        for c in self.components])
        return float(np.logaddexp2.reduce(per + self.log2_weights))

    def log2_prob_counts_matrix(self, symbols, counts):
        per = np.stack([c.log2_prob_counts_matrix(symbols, counts)
                        for c in self.components])
        return np.logaddexp2.reduce(per + self.log2_weights[:, None], axis=0)


# factories ------------------------------------------------------------------


def iid_measure(q: Pmf) -> IIDMeasure:
    return IIDMeasure(q)


def known_support_code(support: Iterable[int]) -> KnownSupportCode:
    return KnownSupportCode(tuple(support))


def pattern_code(symbol_code: Pmf | None = None) -> PatternCode:
    return PatternCode(symbol_code)


def mixture(components: Sequence[SequentialMeasure],
            log2_weights: Sequence[float] | None = None) -> MixtureMeasure:
    return MixtureMeasure(components, log2_weights)


# ---------------------------------------------------------------------------
# bounds and summaries
# ---------------------------------------------------------------------------


def bound_mh(n: int, h: float) -> float:
    """Per-symbol redundancy bound for the pattern coder over the monotone
    moment-capped family: 2 h^(3/2) / sqrt(log2 n) + pi sqrt(2/(3n))."""
    if n < 2:
        raise ValueError("bound needs n >= 2")
    if h <= 0:
        raise ValueError("h must be positive")
    return 2.0 * h**1.5 / math.sqrt(math.log2(n)) + math.pi * math.sqrt(2.0 / (3.0 * n))


def codelength(m: SequentialMeasure, xs: Sequence[int]) -> float:
    """Ideal codelength in bits, -log2 m(xs)."""
    return -m.log2_prob(xs)


# ---------------------------------------------------------------------------
# redundancy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RedundancyReport:
    """Per-symbol redundancy of a measure against a source at length n."""
    value: float
    ci_halfwidth: float
    mode: str
    n: int
    trials: int = 0

    @property
    def upper(self) -> float:
        return self.value + self.ci_halfwidth


_TYPE_BUDGET = 2_000_000


def _compositions(n: int, k: int):
    """Yield count vectors (len k, sum n) in blocks as an int matrix."""
    if k == 1:
        yield np.array([[n]])
        return
    buf = []
    vec = [0] * k

    def rec(pos: int, left: int):
        if pos == k - 1:
            vec[pos] = left
            buf.append(tuple(vec))
            return
        for c in range(left + 1):
            vec[pos] = c
            rec(pos + 1, left - c)

    rec(0, n)
    yield np.array(buf, dtype=np.int64)


def _log2_multinomial(counts: np.ndarray) -> np.ndarray:
    n = counts.sum(axis=1)
    return (gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)) / LN2


def exact_redundancy_by_types(p: Pmf, m: SequentialMeasure, n: int) -> float:
    """Exact per-symbol D((p^n) || m) by enumerating type classes."""
    symbols = p.support
    k = len(symbols)
    if math.comb(n + k - 1, k - 1) > _TYPE_BUDGET:
        raise ValueError(
            f"type enumeration infeasible: C({n + k - 1},{k - 1}) types")
    logp = np.array([math.log2(p.mass(s)) for s in symbols])
    total = 0.0
    mass_seen = 0.0
    for counts in _compositions(n, k):
        lw = _log2_multinomial(counts) + counts @ logp
        w = np.exp2(lw)
        lm = m.log2_prob_counts_matrix(symbols, counts)
        contrib = counts @ logp - lm  # log2 p^n(x) - log2 m(x), per type
        finite = w > 0.0
        if np.any(~np.isfinite(lm) & finite):
            return math.inf
        total += float(np.dot(w[finite], contrib[finite]))
        mass_seen += float(w.sum())
    if abs(mass_seen - 1.0) > 1e-9:
        raise AssertionError(f"type masses sum to {mass_seen}")
    return total / n


def exact_iid_expected_codelength(p: Pmf, m: SequentialMeasure, n: int) -> float:
    """E_p[-log2 m(X^n)] exactly, for measures whose codelength separates
    into per-symbol count functionals (the add-half estimator does)."""
    if not isinstance(m, KnownSupportCode):
        raise ValueError("separable path applies to the add-half estimator")
    for s in p.support:
        if s not in m._pos:
            return math.inf
    j = np.arange(n + 1)
    lg = gammaln(j + 0.5) - _LGHALF
    acc = 0.0
    for s in p.support:
        pm = _binom.pmf(j, n, p.mass(s))
        acc += float(np.dot(pm, lg))
    acc += float(gammaln(0.5 * m.k) - gammaln(n + 0.5 * m.k))
    return -acc / LN2


def exact_kt_redundancy(p: Pmf, m: KnownSupportCode, n: int) -> float:
    """Exact per-symbol redundancy of the add-half estimator; scales to huge n."""
    from .pmf import entropy
    ecl = exact_iid_expected_codelength(p, m, n)
    return (ecl - n * entropy(p)) / n


def redundancy(p: Pmf | SourceSpec, m: SequentialMeasure, n: int,
               mode: str = "exact", trials: int = 200,
               seed: int = 0) -> RedundancyReport:
    """Per-symbol redundancy of measure m against i.i.d. source p at length n.

    mode="exact" handles: i.i.d. measures (closed form, any source);
    the add-half estimator (separable, any n); any count-based measure over a
    small finite source support (type enumeration).  Anything else raises —
    choose mode="mc" explicitly for a Monte-Carlo estimate with a normal 95%
    confidence interval.
    """
    spec = None
    if not isinstance(p, Pmf):
        spec = p
        p = make_pmf(p)
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode == "exact":
        if isinstance(m, IIDMeasure):
            return RedundancyReport(kl(p, m.pmf), 0.0, "exact", n)
        if not p.is_finite:
            raise ValueError(
                f"exact redundancy of {m.name} against a lazy source is not "
                f"supported; use mode='mc'")
        if isinstance(m, KnownSupportCode):
            return RedundancyReport(exact_kt_redundancy(p, m, n), 0.0, "exact", n)
        try:
            val = exact_redundancy_by_types(p, m, n)
        except NotImplementedError:
            raise ValueError(f"{m.name} has no count-based evaluation; use mode='mc'")
        return RedundancyReport(val, 0.0, "exact", n)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if spec is None:
        raise ValueError("mode='mc' samples through a SourceSpec; pass the spec")
    per_trial = np.empty(trials)
    logp = {s: math.log2(p.mass(s)) for s in p.support}
    for t in range(trials):
        xs = sample_array(spec, seed, t, n)
        symbols, counts = np.unique(xs, return_counts=True)
        lp = float(sum(c * logp[int(s)] for s, c in zip(symbols, counts)))
        lm = m.log2_prob_counts([int(s) for s in symbols], counts)
        per_trial[t] = (lp - lm) / n
    val = float(per_trial.mean())
    hw = 1.959963984540054 * float(per_trial.std(ddof=1)) / math.sqrt(trials)
    return RedundancyReport(val, hw, "mc", n, trials)


def codelength_trace(m: SequentialMeasure, xs: Sequence[int],
                     p: Pmf) -> list[tuple[int, float, float]]:
    """Rows (n, cumulative_bits, per_symbol_redundancy_estimate) along one path."""
    rows = []
    state = m.start()
    cum = 0.0
    lp = 0.0
    for i, a in enumerate(xs, start=1):
        state, c = m.step(state, a)
        cum -= c
        mass = p.mass(a)
        lp += math.log2(mass) if mass > 0 else -math.inf
        rows.append((i, cum, (cum + lp) / i))
    return rows
