"""Executable bound formulas and falsification-style checkers.

Each lemma-shaped inequality used by the trap machinery is available two
ways: as a pure formula, and as a checker that attacks it with exact
enumeration at micro scale or seeded Monte Carlo otherwise and reports a
:class:`BoundReport`.  Checkers never prove anything — they fail loudly if a
counterexample shows up.

Conventions: divergences in bits, exponentials in natural base exactly as the
formulas are written; tolerances are stated per checker.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .pmf import Pmf, harmonic_pmf, j_divergence, kl, l1, percentile, uniform_pmf
from .rng import philox_generator

__all__ = [
    "BoundReport", "sr_lower_bound", "sr_minimax_search", "check_sr",
    "jn_bound", "check_jn_identity", "check_jn_random", "dpq_separation",
    "check_dpq", "yeung_bound", "yeung_check", "tightness_from_redundancy",
    "check_tightness_inner", "b_class_deception_bound",
    "check_distance_sandwich", "check_distance_chain", "distance_test_pairs",
    "simplex_grid", "random_pmfs", "run_bounds_suite",
]

LN2 = math.log(2.0)
TWO_LOG2E_OVER_E = 2.0 * math.log2(math.e) / math.e  # ~= 1.0615


@dataclass(frozen=True)
class BoundReport:
    """One falsification attempt: the bound, what was observed, the verdict."""
    bound_name: str
    parameters: dict
    bound_value: float
    observed_value: float
    size: int
    violated: bool
    note: str = ""

    CSV_HEADER = "bound_name,parameters,bound_value,observed_value,size,violated"

    def csv_row(self) -> str:
        params = ";".join(
            "{}={}".format(k, str(v).replace(",", "|").replace(" ", ""))
            for k, v in sorted(self.parameters.items()))
        return (f"{self.bound_name},{params},{self.bound_value:.17g},"
                f"{self.observed_value:.17g},{self.size},{int(self.violated)}")


# ---------------------------------------------------------------------------
# simplex helpers
# ---------------------------------------------------------------------------


def simplex_grid(k: int, resolution: int) -> Iterable[tuple[float, ...]]:
    """All pmfs on k symbols with masses that are multiples of 1/resolution."""
    for cuts in itertools.combinations(range(resolution + k - 1), k - 1):
        prev = -1
        counts = []
        for c in cuts:
            counts.append(c - prev - 1)
            prev = c
        counts.append(resolution + k - 2 - prev)
        yield tuple(c / resolution for c in counts)


def random_pmfs(k: int, count: int, seed: int, trial: int = 0) -> list[tuple[float, ...]]:
    gen = philox_generator(seed, trial)
    draws = gen.dirichlet(np.ones(k), size=count)
    return [tuple(row) for row in draws]


def _pmf_on(symbols: Sequence[int], masses: Sequence[float]) -> Pmf:
    return Pmf.from_masses({s: m for s, m in zip(symbols, masses) if m > 0.0},
                           atol=1e-9)


# ---------------------------------------------------------------------------
# distance sandwich (l1 vs J) and chain inequality
# ---------------------------------------------------------------------------


def distance_test_pairs(grid_target: int, random_pairs: int, max_support: int,
                        seed: int) -> list[tuple[Pmf, Pmf]]:
    """Deterministic grid pairs (at least grid_target of them) plus seeded
    random pairs, all on supports <= max_support."""
    pairs: list[tuple[Pmf, Pmf]] = []
    grid = [g for g in simplex_grid(3, 8)]
    symbols_a = (1, 2, 3)
    symbols_b = (2, 3, 5)  # overlapping but not identical supports
    for ga, gb in itertools.product(grid, repeat=2):
        pairs.append((_pmf_on(symbols_a, ga), _pmf_on(symbols_b, gb)))
        if len(pairs) >= grid_target:
            break
    gen = philox_generator(seed, 1)
    for _ in range(random_pairs):
        ka = int(gen.integers(1, max_support + 1))
        kb = int(gen.integers(1, max_support + 1))
        sa = sorted(gen.choice(np.arange(1, 2 * max_support), ka, replace=False).tolist())
        sb = sorted(gen.choice(np.arange(1, 2 * max_support), kb, replace=False).tolist())
        pa = gen.dirichlet(np.ones(ka))
        pb = gen.dirichlet(np.ones(kb))
        pairs.append((_pmf_on(sa, pa), _pmf_on(sb, pb)))
    return pairs


def check_distance_sandwich(pairs: Sequence[tuple[Pmf, Pmf]],
                            tol: float = 1e-9) -> BoundReport:
    """(1/(4 ln2)) l1^2 <= J <= (1/ln2) l1 on every pair."""
    worst = -math.inf
    for p, q in pairs:
        d = l1(p, q)
        j = j_divergence(p, q)
        worst = max(worst, d * d / (4.0 * LN2) - j, j - d / LN2)
    return BoundReport("distance-sandwich", {"pairs": len(pairs), "tol": tol},
                       0.0, worst, len(pairs), worst > tol)


def check_distance_chain(triples: Sequence[tuple[Pmf, Pmf, Pmf]],
                         tol: float = 1e-9) -> BoundReport:
    """J(p,q) + J(q,r) >= (ln2/8) J(p,r)^2 on every triple."""
    worst = -math.inf
    for p, q, r in triples:
        lhs = j_divergence(p, q) + j_divergence(q, r)
        rhs = (LN2 / 8.0) * j_divergence(p, r) ** 2
        worst = max(worst, rhs - lhs)
    return BoundReport("distance-chain", {"triples": len(triples), "tol": tol},
                       0.0, worst, len(triples), worst > tol)


# ---------------------------------------------------------------------------
# disjoint-supports minimax lower bound
# ---------------------------------------------------------------------------


def sr_lower_bound(sets: Sequence[set[int]], dists: Sequence[Pmf],
                   delta: float) -> float:
    """delta * log2(m): no single measure beats this against m sources that
    each put mass >= delta on their own disjoint set (delta > 1/2)."""
    if len(sets) != len(dists) or not sets:
        raise ValueError("need one distribution per set")
    if not delta > 0.5:
        raise ValueError(f"the bound needs delta > 1/2, got {delta}")
    for a, b in itertools.combinations(range(len(sets)), 2):
        if sets[a] & sets[b]:
            raise ValueError(f"sets {a} and {b} overlap")
    for i, (s, p) in enumerate(zip(sets, dists)):
        mass = math.fsum(p.mass(x) for x in s)
        if mass < delta - 1e-12:
            raise ValueError(f"distribution {i} puts only {mass:.6f} < delta on its set")
    return delta * math.log2(len(sets))


def sr_minimax_search(dists: Sequence[Pmf], resolution: int = 64,
                      seed: int = 0, restarts: int = 8,
                      exhaustive_budget: int = 120_000
                      ) -> tuple[float, tuple[float, ...]]:
    """min over grid q of max_i D(p_i || q).

    Exhaustive over the 1/resolution simplex grid when that is feasible,
    otherwise greedy unit-mass descent on the grid from a balanced start plus
    seeded random restarts (the uniform point is always a start, so the
    analytic optimum for point-mass families is always found).
    """
    support = sorted({x for p in dists for x in p.support})
    k = len(support)

    def value(counts: Sequence[int]) -> float:
        q = _pmf_on(support, [c / resolution for c in counts])
        return max(kl(p, q) for p in dists)

    if math.comb(resolution + k - 1, k - 1) <= exhaustive_budget:
        best, best_q = math.inf, None
        for masses in simplex_grid(k, resolution):
            counts = [round(m * resolution) for m in masses]
            v = value(counts)
            if v < best:
                best, best_q = v, counts
        return best, tuple(c / resolution for c in best_q)

    gen = philox_generator(seed, 2)
    starts = []
    balanced = [resolution // k] * k
    for i in range(resolution - sum(balanced)):
        balanced[i % k] += 1
    starts.append(balanced)
    for _ in range(restarts):
        starts.append(list(gen.multinomial(resolution, np.ones(k) / k)))
    best, best_q = math.inf, None
    for counts in starts:
        counts = list(counts)
        current = value(counts)
        improved = True
        while improved:
            improved = False
            for a, b in itertools.permutations(range(k), 2):
                if counts[a] == 0:
                    continue
                counts[a] -= 1
                counts[b] += 1
                v = value(counts)
                if v < current - 1e-15:
                    current = v
                    improved = True
                else:
                    counts[a] += 1
                    counts[b] -= 1
        if current < best:
            best, best_q = current, list(counts)
    return best, tuple(c / resolution for c in best_q)


def check_sr(m: int, delta: float = 1.0, resolution: int = 64,
             seed: int = 0) -> BoundReport:
    """Point-mass construction: m singletons, grid minimax vs delta*log2 m."""
    dists = [Pmf.from_masses({i: 1.0}) for i in range(1, m + 1)]
    sets = [{i} for i in range(1, m + 1)]
    bound = sr_lower_bound(sets, dists, delta)
    observed, _ = sr_minimax_search(dists, resolution=resolution, seed=seed)
    return BoundReport("sr-minimax", {"m": m, "delta": delta, "res": resolution},
                       bound, observed, m,
                       observed < bound - 1e-9)


# ---------------------------------------------------------------------------
# neighborhood mass of high-probability sets
# ---------------------------------------------------------------------------


def jn_bound(alpha: float, epsilon: float, N: int) -> float:
    """Lower bound on q^N(R) when p^N(R) >= 1-alpha and J(p,q) <= epsilon."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha in [0,1]")
    if epsilon < 0 or N < 1:
        raise ValueError("epsilon >= 0 and N >= 1")
    return 1.0 - alpha - 2.0 * N**3 * math.sqrt(4.0 * epsilon * LN2) - 1.0 / N


def check_jn_identity(Ns: Iterable[int] = (1, 2, 3, 5, 8, 13)) -> BoundReport:
    """At epsilon = 1/(16 ln2 N^8) the bound collapses to 1 - alpha - 2/N."""
    worst = 0.0
    count = 0
    for N in Ns:
        eps = 1.0 / (16.0 * LN2 * N**8)
        for alpha in (0.0, 0.1, 0.35, 0.5, 1.0):
            got = jn_bound(alpha, eps, N)
            want = 1.0 - alpha - 2.0 / N
            worst = max(worst, abs(got - want))
            count += 1
    return BoundReport("jn-identity", {"Ns": tuple(Ns)}, 1e-12, worst, count,
                       worst > 1e-12)


def _seq_prob(masses: dict[int, float], seq: tuple[int, ...]) -> float:
    out = 1.0
    for x in seq:
        out *= masses.get(x, 0.0)
    return out


def check_jn_random(configs: int = 100, seed: int = 0, max_alphabet: int = 3,
                    max_N: int = 5) -> BoundReport:
    """Exhaustive q^N(R_N) >= jn_bound for random (p, q, R_N) micro-instances.

    R_N is the smallest p-probable set reaching 1-alpha (greedy by p-mass).
    Half of the q draws are tiny perturbations of p so the bound is
    non-vacuous; the rest roam freely.
    """
    gen = philox_generator(seed, 3)
    worst = math.inf
    for c in range(configs):
        k = int(gen.integers(2, max_alphabet + 1))
        N = int(gen.integers(1, max_N + 1))
        alpha = float(gen.uniform(0.05, 0.5))
        symbols = list(range(1, k + 1))
        pv = gen.dirichlet(np.ones(k))
        if c % 2 == 0:
            noise = gen.uniform(-1.0, 1.0, size=k) * float(gen.choice([1e-6, 1e-4]))
            qv = np.clip(pv + noise, 1e-9, None)
            qv = qv / qv.sum()
        else:
            qv = gen.dirichlet(np.ones(k))
        p = _pmf_on(symbols, pv)
        q = _pmf_on(symbols, qv)
        eps = j_divergence(p, q)
        pd = {s: float(v) for s, v in zip(symbols, pv)}
        qd = {s: float(v) for s, v in zip(symbols, qv)}
        seqs = sorted(itertools.product(symbols, repeat=N),
                      key=lambda s: -_seq_prob(pd, s))
        cum = 0.0
        region = []
        for s in seqs:
            region.append(s)
            cum += _seq_prob(pd, s)
            if cum >= 1.0 - alpha:
                break
        q_mass = math.fsum(_seq_prob(qd, s) for s in region)
        worst = min(worst, q_mass - jn_bound(alpha, eps, N))
    return BoundReport("jn-random", {"configs": configs, "seed": seed},
                       0.0, worst, configs, worst < -1e-12)


# ---------------------------------------------------------------------------
# zone-radius separation
# ---------------------------------------------------------------------------


def dpq_separation(epsilon0: float) -> tuple[float, float]:
    """(zone radius, guaranteed separation): if |p0 - q|_1 <= the first and
    J(p, p0) >= epsilon0, then J(p, q) >= the second."""
    if epsilon0 <= 0:
        raise ValueError("epsilon0 must be positive")
    return (epsilon0**2 * LN2**2 / 16.0, epsilon0**2 * LN2 / 16.0)


def check_dpq(trials: int = 2000, seed: int = 0) -> BoundReport:
    """Randomized falsification on supports <= 4 across epsilon0 grid."""
    gen = philox_generator(seed, 4)
    worst = math.inf
    tested = 0
    eps_grid = (0.25, 0.5, 1.0, 1.5)
    while tested < trials:
        eps0 = float(eps_grid[int(gen.integers(0, len(eps_grid)))])
        zone, sep = dpq_separation(eps0)
        k = int(gen.integers(2, 5))
        symbols = list(range(1, k + 1))
        p0v = gen.dirichlet(np.ones(k))
        # p either random on the same support or pushed onto fresh symbols
        if gen.random() < 0.5:
            pv = gen.dirichlet(np.ones(k))
            p = _pmf_on(symbols, pv)
        else:
            p = _pmf_on([s + k for s in symbols], gen.dirichlet(np.ones(k)))
        p0 = _pmf_on(symbols, p0v)
        if j_divergence(p, p0) < eps0:
            continue
        # q: move mass d <= zone between two coordinates of p0
        a, b = gen.choice(k, 2, replace=False)
        d = float(gen.uniform(0.0, zone)) / 2.0
        d = min(d, p0v[a])
        qv = p0v.copy()
        qv[a] -= d
        qv[b] += d
        q = _pmf_on(symbols, qv)
        if l1(p0, q) > zone + 1e-15:
            continue
        worst = min(worst, j_divergence(p, q) - sep)
        tested += 1
    return BoundReport("dpq-separation", {"trials": trials, "seed": seed},
                       0.0, worst, tested, worst < -1e-12)


# ---------------------------------------------------------------------------
# empirical-type percentile bound
# ---------------------------------------------------------------------------


def yeung_bound(n: int, delta: float, k: int) -> float:
    """(2^k - 2) exp(-n delta^2 / 18); may exceed 1 (vacuous but valid)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if k < 2:
        raise ValueError("k >= 2")
    return (2.0**k - 2.0) * math.exp(-n * delta * delta / 18.0)


def yeung_check(p: Pmf, n: int, delta: float, k: int, trials: int,
                seed: int) -> BoundReport:
    """Monte-Carlo frequency of {|tau - p|_1 > delta and
    2 F_tau^{-1}(1 - delta/6) <= k} vs the bound."""
    support = np.array(p.support)
    pv = np.array([p.mass(int(s)) for s in support])
    gen = philox_generator(seed, 5)
    counts = gen.multinomial(n, pv, size=trials)
    tau = counts / n
    dist = np.abs(tau - pv).sum(axis=1)
    cum = np.cumsum(tau, axis=1)
    idx = np.argmax(cum >= 1.0 - delta / 6.0 - 1e-15, axis=1)
    perc = support[idx]
    freq = float(np.mean((dist > delta) & (2 * perc <= k)))
    bound = yeung_bound(n, delta, k)
    se = math.sqrt(max(freq * (1.0 - freq), 1.0 / trials) / trials)
    return BoundReport("yeung-type", {"n": n, "delta": delta, "k": k,
                                      "trials": trials, "seed": seed},
                       bound, freq, trials, freq > bound + 3.0 * se)


# ---------------------------------------------------------------------------
# percentiles from bounded redundancy
# ---------------------------------------------------------------------------


def tightness_from_redundancy(R: float, gamma: float, q: Pmf) -> int:
    """A symbol value that any p with D(p||q) <= R can exceed with
    probability at most gamma."""
    if R < 0 or not 0.0 < gamma < 1.0:
        raise ValueError("need R >= 0 and gamma in (0,1)")
    m = 1
    while (R + TWO_LOG2E_OVER_E) / m >= gamma / 2.0:
        m += 1
    return percentile(q, gamma / 2.0 ** (m + 1))


def check_tightness_inner(seed: int = 0, resolution: int = 16,
                          ms: Sequence[int] = (1, 2, 3, 5, 8)) -> BoundReport:
    """p(|log2 p/q| > m) <= (D(p||q) + 2 log2 e / e)/m on simplex grids."""
    worst = -math.inf
    tested = 0
    grid = [g for g in simplex_grid(3, resolution) if all(x > 0 for x in g)]
    symbols = (1, 2, 3)
    for pv, qv in itertools.product(grid, repeat=2):
        p = _pmf_on(symbols, pv)
        q = _pmf_on(symbols, qv)
        R = kl(p, q)
        for m in ms:
            mass = math.fsum(p.mass(s) for s in symbols
                             if abs(math.log2(p.mass(s) / q.mass(s))) > m)
            worst = max(worst, mass - (R + TWO_LOG2E_OVER_E) / m)
            tested += 1
    return BoundReport("tightness-inner", {"res": resolution, "ms": tuple(ms)},
                       0.0, worst, tested, worst > 1e-12)


def b_class_deception_bound() -> float:
    """Limsup per-symbol redundancy of any neighborhood of the degenerate
    two-point family member is at least 1/e."""
    return 1.0 / math.e


# ---------------------------------------------------------------------------
# the full suite
# ---------------------------------------------------------------------------


def run_bounds_suite(seed: int = 0, heavy: bool = False) -> list[BoundReport]:
    """Everything above at suite scale (heavier knobs for acceptance live in
    the tests).  Returns one report per check."""
    pairs = distance_test_pairs(grid_target=1000, random_pairs=2000,
                                max_support=6, seed=seed)
    triples = [(pairs[i][0], pairs[i][1], pairs[(i * 7 + 3) % len(pairs)][1])
               for i in range(0, len(pairs), 3)]
    reports = [
        check_distance_sandwich(pairs),
        check_distance_chain(triples),
        check_jn_identity(),
        check_jn_random(configs=100, seed=seed),
        check_dpq(trials=1000 if not heavy else 5000, seed=seed),
        yeung_check(uniform_pmf(1, 4), 500, 0.2, 6,
                    10_000 if heavy else 2000, seed),
        check_sr(2), check_sr(4), check_sr(8),
        check_jn_identity((4, 6)),
        check_tightness_inner(seed=seed, resolution=12 if not heavy else 16),
    ]
    return reports
