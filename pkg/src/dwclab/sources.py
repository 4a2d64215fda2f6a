"""Source descriptions: the distribution families the experiments draw from.

A ``SourceSpec`` is a small declarative value (JSON-serializable) naming a
member of one of the studied families:

* ``Uniform(lo, hi)`` — uniform on a contiguous block of naturals;
* ``BMember(epsilon, offset)`` / ``BZERO`` — the two-point family with a
  vanishing spike pushed out to the dyadic block of index floor(1/epsilon);
* ``IMember(selector)`` — one selected element per dyadic block, block i
  carrying mass 1/((i+1)(i+2)) so that tail_mass(p, 2^k) = 1/(k+1) exactly;
* ``MonotonePmf`` / ``MhMember`` — nonincreasing finite pmfs, the latter with
  a certified second moment of self-information;
* ``FhMember`` — a uniform block contaminated by a shifted monotone tail;
* ``Contaminated`` — generic (1-eps) base + eps contaminant.

``make_pmf`` turns a spec into a :class:`~dwclab.pmf.Pmf`; ``sample`` draws
from it through the counter-based streams in :mod:`dwclab.rng`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Union

import numpy as np

from .pmf import Pmf, mix, uniform_pmf
from .rng import philox_generator

__all__ = [
    "Uniform", "BMember", "BZERO", "BZero", "IMember", "MonotonePmf",
    "MhMember", "FhMember", "Contaminated", "SourceSpec",
    "t_block", "make_pmf", "base", "span", "shift",
    "self_info_moment2", "SampleStream", "sample",
    "spec_to_json", "spec_from_json", "I_SELECTORS", "mh_catalog",
]


def t_block(i: int) -> range:
    """The i-th dyadic block {2^i, ..., 2^(i+1)-1}; t_block(0) == {1}."""
    if i < 0:
        raise ValueError("block index must be >= 0")
    return range(2**i, 2 ** (i + 1))


# ---------------------------------------------------------------------------
# spec variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    lo: int
    hi: int


@dataclass(frozen=True)
class BMember:
    """1 - epsilon on symbol 1, epsilon on the (offset)-th element of block
    floor(1/epsilon).  offset ranges over 1 .. 2^floor(1/epsilon)."""
    epsilon: float
    offset: int = 1

    @property
    def spike_exponent(self) -> int:
        return int(math.floor(1.0 / self.epsilon))

    @property
    def spike(self) -> int:
        return 2**self.spike_exponent + self.offset - 1


@dataclass(frozen=True)
class BZero:
    """The epsilon = 0 member: all mass on symbol 1."""


BZERO = BZero()


@dataclass(frozen=True)
class IMember:
    selector: str = "leftmost"


@dataclass(frozen=True)
class MonotonePmf:
    masses: tuple[tuple[int, float], ...]

    @staticmethod
    def of(masses: dict[int, float]) -> "MonotonePmf":
        return MonotonePmf(tuple(sorted(masses.items())))


@dataclass(frozen=True)
class MhMember:
    masses: tuple[tuple[int, float], ...]
    h: float

    @staticmethod
    def of(masses: dict[int, float], h: float) -> "MhMember":
        return MhMember(tuple(sorted(masses.items())), h)


@dataclass(frozen=True)
class FhMember:
    """(1 - epsilon) * uniform(lo, hi) + epsilon * (tail shifted past hi)."""
    lo: int
    hi: int
    tail: MhMember
    epsilon: float


Contaminated = None  # forward declared below (self-referential union)


@dataclass(frozen=True)
class Contaminated:  # noqa: F811
    base: "SourceSpec"
    contaminant: "SourceSpec"
    epsilon: float


SourceSpec = Union[Uniform, BMember, BZero, IMember, MonotonePmf, MhMember,
                   FhMember, Contaminated]


# Selected element of block i (i >= 1); block 0 is always {1}.
I_SELECTORS: dict[str, Callable[[int], int]] = {
    "leftmost": lambda i: 2**i,
    "rightmost": lambda i: 2 ** (i + 1) - 1,
    "lower-third": lambda i: 2**i + 2**i // 3,
}


def mh_catalog(h: float = 1.0) -> tuple[MhMember, ...]:
    """Certified members with self-information second moment <= h (h=1 shipped)."""
    if h < 1.0:
        raise ValueError("catalog is provided for h >= 1")
    flat = MhMember.of({1: 0.5, 2: 0.5}, h)  # moment exactly 1
    spiked = MhMember.of({1: 0.95, 2: 0.05}, h)
    steep = MhMember.of({1: 0.98, 2: 0.012, 3: 0.008}, h)
    return (flat, spiked, steep)


# ---------------------------------------------------------------------------
# realization
# ---------------------------------------------------------------------------


def _check_monotone(items: tuple[tuple[int, float], ...], what: str) -> None:
    symbols = [x for x, _ in items]
    if symbols != list(range(1, len(symbols) + 1)):
        raise ValueError(f"{what}: support must be 1..N contiguous, got {symbols}")
    masses = [m for _, m in items]
    if any(b > a + 1e-12 for a, b in zip(masses, masses[1:])):
        raise ValueError(f"{what}: masses must be nonincreasing")


def _i_member_pmf(selector: str) -> Pmf:
    try:
        sel = I_SELECTORS[selector]
    except KeyError:
        raise ValueError(f"unknown selector {selector!r}; have {sorted(I_SELECTORS)}")

    def chosen(i: int) -> int:
        return 1 if i == 0 else sel(i)

    def mass(x: int) -> float:
        i = x.bit_length() - 1
        return 1.0 / ((i + 1) * (i + 2)) if chosen(i) == x else 0.0

    def walk() -> Iterator[tuple[int, float]]:
        i = 0
        while True:
            yield chosen(i), 1.0 / ((i + 1) * (i + 2))
            i += 1

    def tail(k: int) -> float:
        # smallest block whose chosen element is >= k, then telescope
        i = max(0, k.bit_length() - 2)
        while chosen(i) < k:
            i += 1
        return 1.0 / (i + 1)

    def exact_mass(x: int) -> Fraction:
        i = x.bit_length() - 1
        return Fraction(1, (i + 1) * (i + 2)) if chosen(i) == x else Fraction(0)

    def exact_tail(k: int) -> Fraction:
        i = max(0, k.bit_length() - 2)
        while chosen(i) < k:
            i += 1
        return Fraction(1, i + 1)

    return Pmf.lazy(mass, walk, tail, f"block-select({selector})",
                    exact_mass=exact_mass, exact_tail=exact_tail)


def make_pmf(spec: SourceSpec) -> Pmf:
    """Realize a source description as a concrete pmf (validating it)."""
    match spec:
        case Uniform(lo, hi):
            return uniform_pmf(lo, hi)
        case BZero():
            return Pmf.from_masses({1: 1.0}, "b-zero", exact={1: Fraction(1)})
        case BMember(epsilon=eps, offset=j):
            if not 0.0 < eps < 1.0:
                raise ValueError(f"epsilon must be in (0,1), got {eps}")
            n_eps = spec.spike_exponent
            if not 1 <= j <= 2**n_eps:
                raise ValueError(f"offset {j} outside 1..2^{n_eps}")
            s = spec.spike
            return Pmf.from_masses({1: 1.0 - eps, s: eps},
                                   f"b({eps},{j})", atol=1e-12)
        case IMember(selector=sel):
            return _i_member_pmf(sel)
        case MonotonePmf(masses=items):
            _check_monotone(items, "monotone pmf")
            return Pmf.from_masses(dict(items), "monotone")
        case MhMember(masses=items, h=h):
            _check_monotone(items, "moment-capped pmf")
            p = Pmf.from_masses(dict(items), f"mh({h})")
            moment = self_info_moment2(p)
            if moment > h + 1e-9:
                raise ValueError(
                    f"self-information second moment {moment:.6f} exceeds h={h}")
            return p
        case FhMember(lo=lo, hi=hi, tail=tail_member, epsilon=eps):
            if not 0.0 < eps < 1.0:
                raise ValueError(f"epsilon must be in (0,1), got {eps}")
            head = uniform_pmf(lo, hi)
            tail_pmf = shift(make_pmf(tail_member), hi)
            return mix(head, tail_pmf, eps, f"fh({lo},{hi},{eps})")
        case Contaminated(base=b, contaminant=c, epsilon=eps):
            return mix(make_pmf(b), make_pmf(c), eps)
    raise TypeError(f"not a source spec: {spec!r}")


# ---------------------------------------------------------------------------
# pmf geometry helpers
# ---------------------------------------------------------------------------


def base(p: Pmf) -> int:
    """Smallest support symbol."""
    return p.support[0] if p.is_finite else next(p.support_walk())[0]


def span(p: Pmf) -> int:
    """max - min + 1 over the support; finite supports only."""
    if not p.is_finite:
        raise ValueError(f"span({p.label}): infinite support")
    s = p.support
    return s[-1] - s[0] + 1


def shift(p: Pmf, k: int) -> Pmf:
    """The law of X + k."""
    if k == 0:
        return p
    if k < 0:
        raise ValueError("shift must be nonnegative")
    if p.is_finite:
        return Pmf.from_masses({x + k: m for x, m in p.finite_items},
                               f"shift({p.label},{k})")

    def walk() -> Iterator[tuple[int, float]]:
        for x, m in p.support_walk():
            yield x + k, m

    return Pmf.lazy(lambda x: p.mass(x - k) if x > k else 0.0, walk,
                    lambda j: p.tail(j - k) if j > k else 1.0,
                    f"shift({p.label},{k})")


def self_info_moment2(p: Pmf) -> float:
    """E[(log2 1/p(X))^2] for finite pmfs (the h-moment being certified)."""
    if not p.is_finite:
        raise ValueError("self_info_moment2 is defined here for finite supports")
    return math.fsum(m * math.log2(m) ** 2 for _, m in p.finite_items)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleStream:
    """Position in the (seed, trial) counter stream for one source."""
    spec: SourceSpec
    seed: int
    trial: int = 0
    position: int = 0

    def advance(self, n: int) -> "SampleStream":
        return SampleStream(self.spec, self.seed, self.trial, self.position + n)


def _finite_tables(p: Pmf) -> tuple[np.ndarray, list[int]]:
    symbols = [x for x, _ in p.finite_items]
    cdf = np.cumsum([m for _, m in p.finite_items])
    cdf[-1] = 1.0  # guard the top against rounding
    return cdf, symbols


def _i_member_blocks(u: np.ndarray) -> np.ndarray:
    # smallest i with 1 - 1/(i+2) >= u, i.e. i >= 1/(1-u) - 2
    i = np.ceil(1.0 / (1.0 - u) - 2.0).astype(np.int64)
    i = np.maximum(i, 0)
    # float fix-ups at cell boundaries
    for _ in range(2):
        cdf = 1.0 - 1.0 / (i + 2.0)
        i = np.where(cdf < u, i + 1, i)
        down = (i > 0) & (1.0 - 1.0 / (i + 1.0) >= u)
        i = np.where(down, i - 1, i)
    return i


def sample(stream: SampleStream, n: int) -> list[int]:
    """The n symbols at stream.position .. position+n-1.  Pure function of
    (spec, seed, trial, position); lists carry Python ints so that remote
    spikes (far dyadic blocks) are exact."""
    u = philox_generator(stream.seed, stream.trial, stream.position).random(n)
    spec = stream.spec
    if isinstance(spec, IMember):
        sel = I_SELECTORS[spec.selector]
        blocks = _i_member_blocks(u)
        return [1 if i == 0 else sel(int(i)) for i in blocks]
    p = make_pmf(spec)
    if not p.is_finite:
        raise ValueError(f"no sampler for lazy source {p.label}")
    cdf, symbols = _finite_tables(p)
    idx = np.searchsorted(cdf, u, side="right")
    return [symbols[i] for i in idx]


def sample_array(spec: SourceSpec, seed: int, trial: int, n: int,
                 position: int = 0) -> np.ndarray:
    """int64 sample path for finite sources with moderate symbols (the
    vectorized Monte-Carlo path)."""
    p = make_pmf(spec)
    if not p.is_finite:
        raise ValueError("sample_array needs a finite source")
    if p.support[-1] >= 2**62:
        raise ValueError("support too large for int64 sampling")
    u = philox_generator(seed, trial, position).random(n)
    cdf, symbols = _finite_tables(p)
    table = np.asarray(symbols, dtype=np.int64)
    return table[np.searchsorted(cdf, u, side="right")]


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------


def spec_to_json(spec: SourceSpec) -> dict:
    match spec:
        case Uniform(lo, hi):
            return {"variant": "uniform", "lo": lo, "hi": hi}
        case BZero():
            return {"variant": "b-zero"}
        case BMember(epsilon=eps, offset=j):
            return {"variant": "b-member", "epsilon": eps, "offset": j}
        case IMember(selector=sel):
            return {"variant": "i-member", "selector": sel}
        case MonotonePmf(masses=items):
            return {"variant": "monotone", "masses": [[x, m] for x, m in items]}
        case MhMember(masses=items, h=h):
            return {"variant": "mh-member", "masses": [[x, m] for x, m in items], "h": h}
        case FhMember(lo=lo, hi=hi, tail=t, epsilon=eps):
            return {"variant": "fh-member", "lo": lo, "hi": hi,
                    "tail": spec_to_json(t), "epsilon": eps}
        case Contaminated(base=b, contaminant=c, epsilon=eps):
            return {"variant": "contaminated", "base": spec_to_json(b),
                    "contaminant": spec_to_json(c), "epsilon": eps}
    raise TypeError(f"not a source spec: {spec!r}")


def spec_from_json(obj: dict) -> SourceSpec:
    try:
        variant = obj["variant"]
    except (TypeError, KeyError):
        raise ValueError(f"source object needs a 'variant' tag: {obj!r}")
    if variant == "uniform":
        return Uniform(int(obj["lo"]), int(obj["hi"]))
    if variant == "b-zero":
        return BZERO
    if variant == "b-member":
        return BMember(float(obj["epsilon"]), int(obj.get("offset", 1)))
    if variant == "i-member":
        return IMember(obj.get("selector", "leftmost"))
    if variant == "monotone":
        return MonotonePmf(tuple((int(x), float(m)) for x, m in obj["masses"]))
    if variant == "mh-member":
        return MhMember(tuple((int(x), float(m)) for x, m in obj["masses"]),
                        float(obj["h"]))
    if variant == "fh-member":
        tail = spec_from_json(obj["tail"])
        if not isinstance(tail, MhMember):
            raise ValueError("fh-member tail must be an mh-member")
        return FhMember(int(obj["lo"]), int(obj["hi"]), tail, float(obj["epsilon"]))
    if variant == "contaminated":
        return Contaminated(spec_from_json(obj["base"]),
                            spec_from_json(obj["contaminant"]),
                            float(obj["epsilon"]))
    raise ValueError(f"unknown source variant {variant!r}")
