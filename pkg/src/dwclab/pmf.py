"""Probability mass functions on the positive integers and divergences between them.

Two representations share one type.  A *finite* pmf stores its support
explicitly (symbols may be arbitrarily large Python ints).  A *lazy* pmf is
given by closed-form rules: a pointwise mass function, an increasing walk of
its support, and an analytic tail ``tail(k) = sum_{x >= k} p(x)`` with
``tail(1) == 1``.  Pmfs that admit exact rational masses (used where tests
demand exactness) can additionally carry ``Fraction``-valued rules.

Divergences are in bits.  Results live on the extended real line, represented
by ordinary floats where ``math.inf`` means divergence; IEEE arithmetic gives
the required absorption rules, so no wrapper type is used.

Evaluation on infinite supports follows a truncation discipline: walk the
merged supports until both tails drop below ``TAIL_ATOL``, bound the remainder
by its interval bound, and report +inf once a partial sum passes
``DIVERGENCE_CAP_BITS``.  Walks that cannot reach the stopping rule within the
step budget raise rather than return a silently truncated value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping

from scipy.special import zeta as _hurwitz_zeta

__all__ = [
    "Pmf",
    "kl",
    "kl_partial_sums",
    "j_divergence",
    "l1",
    "percentile",
    "entropy",
    "tail_mass",
    "uniform_pmf",
    "point_mass",
    "harmonic_pmf",
    "zipf_two_pmf",
    "geometric_half_pmf",
    "block_split_pmf",
    "mix",
]

LOG2 = math.log(2.0)
TAIL_ATOL = 1e-14
DIVERGENCE_CAP_BITS = 1e4
_WALK_BUDGET = 1 << 21


@dataclass(frozen=True)
class Pmf:
    """A probability mass function on {1, 2, 3, ...}.

    Finite pmfs are built with :meth:`from_masses`; infinite-support pmfs with
    :meth:`lazy`.  ``support_walk`` yields ``(symbol, mass)`` in increasing
    symbol order (finitely or forever), ``tail(k)`` is the analytic upper tail,
    and the optional exact rules return ``Fraction`` values for pmfs whose
    masses are rational by construction.
    """

    label: str
    _mass: Callable[[int], float]
    _walk: Callable[[], Iterator[tuple[int, float]]]
    _tail: Callable[[int], float]
    finite_items: tuple[tuple[int, float], ...] | None = None
    exact_mass: Callable[[int], Fraction] | None = None
    exact_tail: Callable[[int], Fraction] | None = None
    _lookup: Mapping[int, float] | None = field(default=None, repr=False)

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_masses(cls, masses: Mapping[int, float] | Iterable[tuple[int, float]],
                    label: str = "pmf", *, atol: float = 1e-9,
                    exact: Mapping[int, Fraction] | None = None) -> "Pmf":
        items = sorted(dict(masses).items())
        cleaned = tuple((int(x), float(m)) for x, m in items if m > 0.0)
        for x, m in cleaned:
            if x < 1:
                raise ValueError(f"symbols must be >= 1, got {x}")
            if not math.isfinite(m) or m < 0.0:
                raise ValueError(f"bad mass {m} at symbol {x}")
        total = math.fsum(m for _, m in cleaned)
        if abs(total - 1.0) > atol:
            raise ValueError(f"masses sum to {total}, not 1 (atol={atol})")
        lookup = dict(cleaned)
        exact_lookup = dict(exact) if exact is not None else None

        def _mass(x: int) -> float:
            return lookup.get(x, 0.0)

        def _walk() -> Iterator[tuple[int, float]]:
            return iter(cleaned)

        def _tail(k: int) -> float:
            return math.fsum(m for x, m in cleaned if x >= k)

        e_mass = e_tail = None
        if exact_lookup is not None:
            def e_mass(x: int) -> Fraction:  # noqa: F811 - deliberate rebind
                return exact_lookup.get(x, Fraction(0))

            def e_tail(k: int) -> Fraction:
                return sum((m for x, m in exact_lookup.items() if x >= k), Fraction(0))

        return cls(label, _mass, _walk, _tail, finite_items=cleaned,
                   exact_mass=e_mass, exact_tail=e_tail, _lookup=lookup)

    @classmethod
    def lazy(cls, mass: Callable[[int], float],
             walk: Callable[[], Iterator[tuple[int, float]]],
             tail: Callable[[int], float], label: str = "lazy-pmf", *,
             exact_mass: Callable[[int], Fraction] | None = None,
             exact_tail: Callable[[int], Fraction] | None = None) -> "Pmf":
        return cls(label, mass, walk, tail, finite_items=None,
                   exact_mass=exact_mass, exact_tail=exact_tail)

    # -- basic queries ---------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.finite_items is not None

    @property
    def support(self) -> tuple[int, ...]:
        if self.finite_items is None:
            raise ValueError(f"{self.label}: infinite support has no explicit support tuple")
        return tuple(x for x, _ in self.finite_items)

    def mass(self, x: int) -> float:
        if x < 1:
            return 0.0
        return self._mass(x)

    def support_walk(self) -> Iterator[tuple[int, float]]:
        return self._walk()

    def tail(self, k: int) -> float:
        if k <= 1:
            return 1.0
        return self._tail(k)

    def __repr__(self) -> str:  # pragma: no cover - debugging nicety
        kind = "finite" if self.is_finite else "lazy"
        return f"Pmf({self.label!r}, {kind})"


# ---------------------------------------------------------------------------
# merged-support walks
# ---------------------------------------------------------------------------


def _merged_walk(p: Pmf, q: Pmf) -> Iterator[tuple[int, float, float]]:
    """Yield (x, p(x), q(x)) over the union of supports in increasing x."""
    ip, iq = p.support_walk(), q.support_walk()
    a = next(ip, None)
    b = next(iq, None)
    while a is not None or b is not None:
        if b is None or (a is not None and a[0] < b[0]):
            yield a[0], a[1], q.mass(a[0])
            a = next(ip, None)
        elif a is None or b[0] < a[0]:
            yield b[0], p.mass(b[0]), b[1]
            b = next(iq, None)
        else:
            yield a[0], a[1], b[1]
            a = next(ip, None)
            b = next(iq, None)


def _walk_finite_first(p: Pmf, q: Pmf, fn: Callable[[float, float], float],
                       *, weighted_by_p_only: bool) -> float:
    """Sum fn(p(x), q(x)) over supp(p) when p is finite (q arbitrary)."""
    total = []
    for x, px in p.finite_items:  # type: ignore[union-attr]
        v = fn(px, q.mass(x))
        if v == math.inf:
            return math.inf
        total.append(v)
    s = math.fsum(total)
    if not weighted_by_p_only and not q.is_finite:
        raise AssertionError("finite-first walk requires p-weighted integrand")
    return s


# ---------------------------------------------------------------------------
# divergences
# ---------------------------------------------------------------------------


def _kl_term(px: float, qx: float) -> float:
    if px == 0.0:
        return 0.0
    if qx == 0.0:
        return math.inf
    return px * math.log2(px / qx)


def kl(p: Pmf, q: Pmf) -> float:
    """Relative entropy D(p || q) in bits; ``math.inf`` when it diverges."""
    if p.is_finite:
        return _walk_finite_first(p, q, _kl_term, weighted_by_p_only=True)
    terms: list[float] = []
    steps = 0
    last_x = 0
    for x, px, qx in _merged_walk(p, q):
        t = _kl_term(px, qx)
        if t == math.inf:
            return math.inf
        terms.append(t)
        last_x = x
        steps += 1
        if steps % 256 == 0:
            if p.tail(last_x + 1) < TAIL_ATOL and q.tail(last_x + 1) < TAIL_ATOL:
                break
            if math.fsum(terms) > DIVERGENCE_CAP_BITS:
                return math.inf
        if steps >= _WALK_BUDGET:
            raise ValueError(
                f"kl({p.label}, {q.label}): tails did not pass {TAIL_ATOL} "
                f"within {_WALK_BUDGET} support steps")
    total = math.fsum(terms)
    return math.inf if total > DIVERGENCE_CAP_BITS else total


def kl_partial_sums(p: Pmf, q: Pmf, stop_bits: float,
                    max_steps: int = 1 << 21) -> tuple[int, int, float]:
    """Walk supp(p) accumulating p(x) log2(p(x)/q(x)) until the sum passes
    ``stop_bits``.

    Returns ``(n_terms, last_symbol, partial_sum)``.  Used for sources whose
    divergence against a reference measure is infinite: the partial sums over
    any support prefix are finite, and the caller reports the prefix at which
    the target is crossed.  Raises if the target is not reached in
    ``max_steps`` terms.
    """
    acc = 0.0
    comp = 0.0  # Kahan compensation: many tiny increments
    steps = 0
    for x, px in p.support_walk():
        term = _kl_term(px, q.mass(x))
        if term == math.inf:
            return steps + 1, x, math.inf
        y = term - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
        steps += 1
        if acc > stop_bits:
            return steps, x, acc
        if steps >= max_steps:
            raise ValueError(f"partial sums reached only {acc:.3f} bits "
                             f"after {steps} terms (target {stop_bits})")
    raise ValueError(f"support exhausted at {acc:.3f} bits (target {stop_bits})")


def _j_term(px: float, qx: float) -> float:
    # Per-symbol contribution to J(p, q); nonnegative, and at most px + qx.
    s = px + qx
    if s == 0.0:
        return 0.0
    out = 0.0
    if px > 0.0:
        out += px * math.log2(2.0 * px / s)
    if qx > 0.0:
        out += qx * math.log2(2.0 * qx / s)
    return out


def j_divergence(p: Pmf, q: Pmf) -> float:
    """Capacitory discrimination J(p, q) = D(p||m) + D(q||m), m the midpoint.

    Symmetric, bounded by 2 bits, equals 2 exactly on disjoint supports.  The
    tail remainder is between 0 and tail_p + tail_q, which certifies the
    truncation for light-tailed lazy pmfs.
    """
    if p.is_finite and q.is_finite:
        seen = {}
        for x, px in p.finite_items:
            seen[x] = (px, q.mass(x))
        for x, qx in q.finite_items:
            if x not in seen:
                seen[x] = (0.0, qx)
        return math.fsum(_j_term(a, b) for a, b in seen.values())
    terms: list[float] = []
    steps = 0
    for x, px, qx in _merged_walk(p, q):
        terms.append(_j_term(px, qx))
        steps += 1
        if steps % 256 == 0 and p.tail(x + 1) + q.tail(x + 1) < 1e-12:
            break
        if steps >= _WALK_BUDGET:
            raise ValueError(f"j_divergence({p.label}, {q.label}): "
                             f"tails too heavy for the step budget")
    return min(2.0, math.fsum(terms))


def l1(p: Pmf, q: Pmf) -> float:
    """Total variation distance times two: sum |p(x) - q(x)|, in [0, 2]."""
    if p.is_finite and q.is_finite:
        union = {x for x, _ in p.finite_items} | {x for x, _ in q.finite_items}
        return math.fsum(abs(p.mass(x) - q.mass(x)) for x in union)
    total = []
    steps = 0
    for x, px, qx in _merged_walk(p, q):
        total.append(abs(px - qx))
        steps += 1
        if steps % 256 == 0 and p.tail(x + 1) + q.tail(x + 1) < 1e-12:
            break
        if steps >= _WALK_BUDGET:
            raise ValueError(f"l1({p.label}, {q.label}): tails too heavy "
                             f"for the step budget")
    return min(2.0, math.fsum(total))


# ---------------------------------------------------------------------------
# scalar summaries
# ---------------------------------------------------------------------------


def percentile(p: Pmf, gamma: float | Fraction) -> int:
    """Smallest m with CDF(m) >= 1 - gamma.

    With a ``Fraction`` gamma and a pmf carrying exact rational masses the
    comparison is exact; otherwise floats are used.  gamma in (0, 1].
    """
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    exact = isinstance(gamma, Fraction) and p.exact_mass is not None
    if exact:
        target = 1 - gamma
        cdf = Fraction(0)
        for x, _ in p.support_walk():
            cdf += p.exact_mass(x)
            if cdf >= target:
                return x
        raise ValueError("exhausted support below the target CDF")
    target_f = 1.0 - float(gamma)
    cdf_f = 0.0
    steps = 0
    for x, mx in p.support_walk():
        cdf_f += mx
        if cdf_f >= target_f:
            return x
        steps += 1
        if steps >= (1 << 22):
            raise ValueError(f"percentile walk budget exhausted at x={x}")
    raise ValueError("exhausted support below the target CDF")


def entropy(p: Pmf) -> float:
    """Shannon entropy in bits (finite supports, or lazy with light tails)."""
    terms = []
    steps = 0
    for x, mx in p.support_walk():
        if mx > 0.0:
            terms.append(-mx * math.log2(mx))
        steps += 1
        if not p.is_finite and steps % 256 == 0 and p.tail(x + 1) < TAIL_ATOL:
            break
        if steps >= _WALK_BUDGET:
            raise ValueError(f"entropy({p.label}): tail too heavy for the step budget")
    return math.fsum(terms)


def tail_mass(p: Pmf, k: int) -> float:
    """Mass of {x : x >= k}; tail_mass(p, 1) == 1."""
    return p.tail(k)


# ---------------------------------------------------------------------------
# standard catalog
# ---------------------------------------------------------------------------


def uniform_pmf(lo: int, hi: int) -> Pmf:
    if not 1 <= lo <= hi:
        raise ValueError(f"need 1 <= lo <= hi, got ({lo}, {hi})")
    n = hi - lo + 1
    m = Fraction(1, n)
    return Pmf.from_masses({x: 1.0 / n for x in range(lo, hi + 1)},
                           f"uniform({lo},{hi})",
                           exact={x: m for x in range(lo, hi + 1)})


def point_mass(x: int) -> Pmf:
    return Pmf.from_masses({x: 1.0}, f"point({x})", exact={x: Fraction(1)})


def harmonic_pmf() -> Pmf:
    """p(x) = 1/(x(x+1)); tail(k) = 1/k.  The default symbol identity code."""

    def walk() -> Iterator[tuple[int, float]]:
        x = 1
        while True:
            yield x, 1.0 / (x * (x + 1))
            x += 1

    return Pmf.lazy(lambda x: 1.0 / (x * (x + 1)), walk, lambda k: 1.0 / k,
                    "harmonic",
                    exact_mass=lambda x: Fraction(1, x * (x + 1)),
                    exact_tail=lambda k: Fraction(1, k))


def zipf_two_pmf() -> Pmf:
    """p(x) = 6/(pi^2 x^2); upper tail via the Hurwitz zeta function."""
    c = 6.0 / math.pi**2

    def walk() -> Iterator[tuple[int, float]]:
        x = 1
        while True:
            yield x, c / (x * x)
            x += 1

    return Pmf.lazy(lambda x: c / (x * x), walk,
                    lambda k: c * float(_hurwitz_zeta(2.0, k)), "zipf-2")


def geometric_half_pmf() -> Pmf:
    """p(x) = 2^-x; tail(k) = 2^(1-k)."""

    def walk() -> Iterator[tuple[int, float]]:
        x = 1
        while True:
            yield x, 2.0 ** -x
            x += 1

    return Pmf.lazy(lambda x: 2.0 ** -x if x < 1075 else 0.0, walk,
                    lambda k: 2.0 ** (1 - k) if k < 1076 else 0.0, "geometric-half",
                    exact_mass=lambda x: Fraction(1, 2 ** x),
                    exact_tail=lambda k: Fraction(1, 2 ** (k - 1)))


def block_split_pmf() -> Pmf:
    """Splits mass 1/((i+1)(i+2)) uniformly over the dyadic block
    {2^i, ..., 2^(i+1)-1}, for every i >= 0.

    Full support with polynomial-in-log masses: -log2 p(x) grows like
    x's bit length plus O(log log x), which is what makes it a universal
    fallback component for two-point sources with arbitrarily remote spikes.
    The mass of any symbol is computed analytically from its bit length, so
    astronomically large symbols are fine.
    """

    def block_of(x: int) -> int:
        return x.bit_length() - 1

    def mass(x: int) -> float:
        i = block_of(x)
        return 1.0 / ((i + 1) * (i + 2)) / 2.0 ** i if i < 1000 else math.exp(
            -LOG2 * i - math.log((i + 1) * (i + 2)))

    def walk() -> Iterator[tuple[int, float]]:
        x = 1
        while True:
            yield x, mass(x)
            x += 1

    def tail(k: int) -> float:
        i = block_of(k)
        whole_blocks = 1.0 / (i + 2)  # everything from block i+1 on
        within = (2 ** (i + 1) - k) * mass(k)
        return within + whole_blocks

    def log2_mass(x: int) -> float:
        i = block_of(x)
        return -(i + math.log2((i + 1) * (i + 2)))

    p = Pmf.lazy(mass, walk, tail, "block-split",
                 exact_mass=lambda x: Fraction(1, (block_of(x) + 1) * (block_of(x) + 2) * 2 ** block_of(x)))
    # Analytic log-mass avoids overflow for symbols far beyond float range.
    object.__setattr__(p, "log2_mass", log2_mass)
    return p


def mix(base: Pmf, contaminant: Pmf, epsilon: float, label: str | None = None) -> Pmf:
    """(1 - epsilon) * base + epsilon * contaminant."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    lbl = label or f"mix({base.label},{contaminant.label},{epsilon})"
    if base.is_finite and contaminant.is_finite:
        out: dict[int, float] = {}
        for x, m in base.finite_items:
            out[x] = out.get(x, 0.0) + (1.0 - epsilon) * m
        for x, m in contaminant.finite_items:
            out[x] = out.get(x, 0.0) + epsilon * m
        return Pmf.from_masses(out, lbl)

    def mass(x: int) -> float:
        return (1.0 - epsilon) * base.mass(x) + epsilon * contaminant.mass(x)

    def walk() -> Iterator[tuple[int, float]]:
        for x, _, _ in _merged_walk(base, contaminant):
            yield x, mass(x)

    def tail(k: int) -> float:
        return (1.0 - epsilon) * base.tail(k) + epsilon * contaminant.tail(k)

    return Pmf.lazy(mass, walk, tail, lbl)
