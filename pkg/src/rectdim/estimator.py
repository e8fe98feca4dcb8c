"""Cocycle sums over rectangular summing sequences and derived estimators.

Everything here rides on one observation: for a product odometer action the
weight of a lattice translate factorizes across coordinates, so the sum of
weights over a box is a product of one-dimensional window sums,

    sum_{u in B_n} w_u(x) = prod_i sum_{|j| <= h_i(n)} w^i_j(x_i),

and each window sum only needs the log-masses of a contiguous integer range
around the point's value.  Those log-masses are generated from a doubling
table over the low bits, giving O(h) work for a half-width-h window, and
all aggregation happens in log space (log-sum-exp) so ratios like 3^100000
never leave the representable range.

The growth exponent of the box sums relative to box cardinality is the
quantity of interest; its liminf/limsup are estimated by the min/max of the
per-n ratio over a tail window, aggregated by medians across samples.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import (
    CylinderFunction,
    CylinderSum,
    HorizonOverflowError,
    OdometerPoint,
    OdometerSystem,
    InvertedOdometer,
    ProductSystem,
)
from .metric import ProfileRangeError, RectangularMetric

__all__ = [
    "CocycleSumSeries",
    "CriticalDimensionEstimate",
    "GrowthComparisonReport",
    "MaximalReport",
    "StansymReport",
    "binary_entropy",
    "classify_tail",
    "compare_growth",
    "critical_dimensions",
    "entropy_oracle",
    "folner_ratio",
    "folner_series",
    "geometric_grid",
    "maximal_tail_check",
    "predicted_gamma",
    "prodcd_bounds",
    "ratio_average",
    "rect_log_sum",
    "series",
    "stansym_check",
]

_TABLE_BITS_LIMIT = 25  # 2^25 doubles = 256 MiB; larger windows are refused


def binary_entropy(p: float) -> float:
    """Shannon entropy (base 2) of the measure (p, 1-p) on {0, 1}."""
    if not 0.0 < p < 1.0:
        raise ValueError("entropy is defined for p strictly inside (0,1)")
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def geometric_grid(n_min: int, n_max: int, factor: float = 1.25) -> list[int]:
    """Geometrically stepped radii from n_min to n_max inclusive."""
    if not 1 <= n_min <= n_max:
        raise ValueError("need 1 <= n_min <= n_max")
    if factor <= 1.0:
        raise ValueError("grid factor must exceed 1")
    ns = [int(n_min)]
    while ns[-1] < n_max:
        ns.append(min(max(ns[-1] + 1, math.ceil(ns[-1] * factor)), int(n_max)))
    return ns


class _CoordinateWindows:
    """Log-weights of one coordinate over a contiguous power range.

    Holds log w_j(x) for j in [-h_max, h_max] as a dense array.  The values
    are produced from a doubling table of bit log-masses over the low k
    bits (k sized to the window span), with at most two high-bit segments;
    the centre entry is exactly 0 by construction.
    """

    def __init__(self, system: OdometerSystem, point: OdometerPoint, h_max: int):
        if point.depth != system.depth:
            raise ValueError("point depth does not match the system depth")
        if h_max < 0:
            raise ValueError("half-width must be non-negative")
        N = system.depth
        v0 = point.value
        if v0 - h_max < 0 or v0 + h_max >= (1 << N):
            raise HorizonOverflowError(
                f"window of half-width {h_max} leaves the depth-{N} horizon"
            )
        self.v0 = v0
        self.h_max = h_max
        a, b = v0 - h_max, v0 + h_max
        k = min(N, max(1, (b - a).bit_length()))
        if k > _TABLE_BITS_LIMIT:
            raise ValueError(
                f"window needs a 2^{k}-entry table; half-width {h_max} is too large"
            )
        logp = system.log_p
        logq = system.log_q
        table = np.empty(1 << k)
        table[0] = 0.0
        for i in range(k):
            table[1 << i : 1 << (i + 1)] = table[: 1 << i] + logq[i]
            table[: 1 << i] += logp[i]

        def high_mass(v_high: int) -> float:
            s = 0.0
            for i in range(k, N):
                s += logq[i] if (v_high >> (i - k)) & 1 else logp[i]
            return s

        mask = (1 << k) - 1
        segments = []
        lo = a
        while lo <= b:
            block = lo >> k
            hi = min(b, ((block + 1) << k) - 1)
            segments.append(table[(lo & mask) : (hi & mask) + 1] + high_mass(block))
            lo = hi + 1
        lw = np.concatenate(segments) if len(segments) > 1 else segments[0].copy()
        lw -= table[v0 & mask] + high_mass(v0 >> k)
        self.lw = lw
        self.center = h_max  # index of j = 0
        self.lw[self.center] = 0.0  # exact by construction; pin it regardless

    # -- plain windows -------------------------------------------------

    def window_scaled(self, h: int) -> tuple[float, float]:
        """(M, S) with sum_{|j|<=h} w_j = exp(M) * S and M the window max."""
        sl = self.lw[self.center - h : self.center + h + 1]
        m = float(sl.max())
        return m, float(np.sum(np.exp(sl - m)))

    def window_logsum(self, h: int) -> float:
        m, s = self.window_scaled(h)
        return m + float(np.log(s))

    def one_sided_logsum(self, h: int, positive: bool) -> float:
        """log sum over j in [1, h] (or [-h, -1])."""
        if h < 1:
            raise ValueError("one-sided windows need h >= 1")
        if positive:
            sl = self.lw[self.center + 1 : self.center + h + 1]
        else:
            sl = self.lw[self.center - h : self.center]
        m = float(sl.max())
        return m + float(np.log(np.sum(np.exp(sl - m))))

    def grid_logsums(self, hs: Sequence[int], reuse: bool = True) -> np.ndarray:
        """Window log-sums along a non-decreasing half-width grid.

        With ``reuse`` the running (max, scaled-sum) state is extended by
        the new ring at each step, costing O(h_last) in total; without it
        every window is evaluated from scratch.
        """
        out = np.empty(len(hs))
        if not reuse:
            for i, h in enumerate(hs):
                out[i] = self.window_logsum(int(h))
            return out
        m, s = 0.0, 1.0
        prev = 0
        for i, h in enumerate(hs):
            h = int(h)
            if h < prev:
                raise ValueError("half-width grid must be non-decreasing")
            if h > prev:
                ring = np.concatenate(
                    (
                        self.lw[self.center - h : self.center - prev],
                        self.lw[self.center + prev + 1 : self.center + h + 1],
                    )
                )
                ring_max = float(ring.max())
                if ring_max > m:
                    s *= math.exp(m - ring_max)
                    m = ring_max
                s += float(np.sum(np.exp(ring - m)))
                prev = h
            out[i] = m + math.log(s)
        return out

    # -- cylinder-masked windows ----------------------------------------

    def masked_logsum(self, h: int, kbits: int, patval: int) -> float:
        """log sum over j in [-h, h] with (v0 + j) = patval mod 2^kbits."""
        if kbits == 0:
            return self.window_logsum(h)
        step = 1 << kbits
        lo_j = -h
        delta = (patval - (self.v0 + lo_j)) % step
        sl = self.lw[self.center + lo_j + delta : self.center + h + 1 : step]
        if sl.size == 0:
            return -np.inf
        m = float(sl.max())
        return m + float(np.log(np.sum(np.exp(sl - m))))

    def prefix_accumulators(self, kbits: int = 0, patval: int = 0):
        """(center, pos, neg) prefix log-sums for all-n maximal scans.

        pos[i] is the log-sum over j in [1, i+1] (neg mirrored); when a
        cylinder mask is given, non-matching offsets contribute nothing.
        """
        pos = self.lw[self.center + 1 :].astype(float, copy=True)
        neg = self.lw[: self.center][::-1].astype(float, copy=True)
        if kbits == 0:
            center = 0.0
        else:
            step = 1 << kbits
            center = 0.0 if self.v0 % step == patval else -np.inf
            keep_pos = np.full(pos.size, False)
            first = (patval - (self.v0 + 1)) % step
            keep_pos[first::step] = True
            pos[~keep_pos] = -np.inf
            keep_neg = np.full(neg.size, False)
            first = ((self.v0 - 1) - patval) % step
            keep_neg[first::step] = True
            neg[~keep_neg] = -np.inf
        with np.errstate(invalid="ignore"):
            pos_acc = np.logaddexp.accumulate(pos) if pos.size else pos
            neg_acc = np.logaddexp.accumulate(neg) if neg.size else neg
        return center, pos_acc, neg_acc


def _pattern_value(pattern: Sequence[int]) -> int:
    v = 0
    for i, b in enumerate(pattern):
        v |= int(b) << i
    return v


def _check_args(system: ProductSystem, xs, metric: RectangularMetric) -> None:
    if metric.dimension != system.dimension:
        raise ValueError("metric dimension must match the system dimension")
    if len(xs) != system.dimension:
        raise ValueError("one point per component is required")


def _build_kernels(system, xs, h_maxes) -> list[_CoordinateWindows]:
    return [
        _CoordinateWindows(comp, x, int(h))
        for comp, x, h in zip(system.components, xs, h_maxes)
    ]


# ---------------------------------------------------------------------------
# Series and critical dimensions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CocycleSumSeries:
    """Per-radius record of log sum_{u in B_n} w_u(x) and log |B_n|."""

    ns: tuple[int, ...]
    log_card: np.ndarray
    log_sum: np.ndarray
    ratio: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.diff(self.log_card) <= 0):
            raise ValueError("log |B_n| must be strictly increasing")

    def tail(self, tail_start: int) -> np.ndarray:
        keep = np.array(self.ns) >= tail_start
        if not keep.any():
            keep[-1] = True
        return self.ratio[keep]


def series(
    system: ProductSystem,
    xs: Sequence[OdometerPoint],
    metric: RectangularMetric,
    ns: Sequence[int],
    reuse: bool = True,
) -> CocycleSumSeries:
    """Cocycle-sum series over the radius grid ``ns``.

    Grid radii whose half-width vector repeats the previous one are
    dropped (only possible for table profiles), keeping |B_n| strictly
    increasing.  With ``reuse`` the one-dimensional sums are extended
    incrementally as the windows grow.
    """
    _check_args(system, xs, metric)
    ns = [int(n) for n in ns]
    if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be a strictly increasing list of radii >= 1")
    hw = [metric.halfwidths(n) for n in ns]
    kept = [0]
    for i in range(1, len(ns)):
        if hw[i] != hw[kept[-1]]:
            kept.append(i)
    ns = [ns[i] for i in kept]
    hw = [hw[i] for i in kept]

    kernels = _build_kernels(system, xs, hw[-1])
    d = system.dimension
    per_coord = [
        kernels[i].grid_logsums([h[i] for h in hw], reuse=reuse) for i in range(d)
    ]
    log_sum = np.sum(per_coord, axis=0)
    log_card = np.sum(
        [[np.log(2.0 * h[i] + 1.0) for h in hw] for i in range(d)], axis=0
    )
    return CocycleSumSeries(tuple(ns), log_card, log_sum, log_sum / log_card)


def rect_log_sum(
    system: ProductSystem,
    xs: Sequence[OdometerPoint],
    metric: RectangularMetric,
    n: int,
) -> float:
    """log sum_{u in B_n} w_u(x), computed coordinate by coordinate."""
    return float(series(system, xs, metric, [n], reuse=False).log_sum[0])


@dataclass(frozen=True)
class CriticalDimensionEstimate:
    """Aggregated growth-exponent estimate over Monte-Carlo samples.

    Per sample, the lower/upper estimates are the min/max of the ratio
    series over the tail window [tail_start, n_max]; aggregates are
    medians (gamma_hat is the median of per-sample midpoints).  Samples
    whose windows leave the horizon are discarded, redrawn with a fresh
    derived seed, and counted.
    """

    alpha_hat: float
    beta_hat: float
    gamma_hat: float
    tail_start: int
    discards: int
    sample_alphas: tuple[float, ...]
    sample_betas: tuple[float, ...]
    sample_series: tuple[CocycleSumSeries, ...]


def _sample_with_retry(system, seed, sample_index, compute, max_attempts=1000):
    """Draw points and run ``compute`` until no horizon overflow occurs."""
    discards = 0
    for attempt in range(max_attempts):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(sample_index, attempt))
        xs = system.sample_point(ss)
        try:
            return compute(xs), discards
        except HorizonOverflowError:
            discards += 1
    raise RuntimeError(
        f"sample {sample_index}: ran out of attempts after {max_attempts} overflows"
    )


def critical_dimensions(
    system: ProductSystem,
    metric: RectangularMetric,
    ns: Sequence[int],
    samples: int,
    seed: int,
    tail_fraction: float = 0.5,
    keep_series: bool = True,
) -> CriticalDimensionEstimate:
    """Estimate the lower/upper critical dimensions over the grid ``ns``."""
    if samples < 1:
        raise ValueError("need at least one sample")
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    ns = [int(n) for n in ns]
    tail_start = math.ceil(tail_fraction * ns[-1])
    alphas: list[float] = []
    betas: list[float] = []
    all_series: list[CocycleSumSeries] = []
    discards = 0
    for s in range(samples):
        result, d = _sample_with_retry(
            system, seed, s, lambda xs: series(system, xs, metric, ns)
        )
        discards += d
        tail = result.tail(tail_start)
        alphas.append(float(tail.min()))
        betas.append(float(tail.max()))
        if keep_series:
            all_series.append(result)
    alpha_hat = float(np.median(alphas))
    beta_hat = float(np.median(betas))
    gamma_hat = float(np.median([(a + b) / 2.0 for a, b in zip(alphas, betas)]))
    if alpha_hat > 1.05:
        warnings.warn(
            f"alpha_hat = {alpha_hat:.3f} exceeds the a.e. bound 1; "
            "finite-size fluctuation or a mis-specified system",
            stacklevel=2,
        )
    return CriticalDimensionEstimate(
        alpha_hat,
        beta_hat,
        gamma_hat,
        tail_start,
        discards,
        tuple(alphas),
        tuple(betas),
        tuple(all_series),
    )


def classify_tail(s: CocycleSumSeries, t: float, tail_start: int) -> str:
    """Diagnostic membership guess at exponent t: 'lower' when the tail
    ratio stays above t, 'upper' when it stays below, else 'indeterminate'."""
    tail = s.tail(tail_start)
    if tail.min() > t:
        return "lower"
    if tail.max() < t:
        return "upper"
    return "indeterminate"


def entropy_oracle(system: OdometerSystem, x: OdometerPoint, n: int) -> float:
    """-(1/n) sum_{i<=n} log2 mu_i(x_i), the pointwise entropy average."""
    if not 1 <= n <= system.depth:
        raise ValueError("n must lie in [1, depth]")
    chosen = np.where(x.bits[:n] == 1, system.log_q[:n], system.log_p[:n])
    return float(-chosen.sum() / (n * math.log(2.0)))


# ---------------------------------------------------------------------------
# Ergodic ratio averages and the maximal inequality
# ---------------------------------------------------------------------------


def _cylinder_log_ratio(kernels, phi: CylinderFunction, hs: Sequence[int]) -> float:
    total = 0.0
    for kernel, pattern, h in zip(kernels, phi.patterns, hs):
        if not pattern:
            continue
        num = kernel.masked_logsum(int(h), len(pattern), _pattern_value(pattern))
        if num == -np.inf:
            return -np.inf
        total += num - kernel.window_logsum(int(h))
    return total


def ratio_average(
    system: ProductSystem,
    xs: Sequence[OdometerPoint],
    metric: RectangularMetric,
    n: int,
    phi: CylinderFunction | CylinderSum,
) -> float:
    """R_n(phi) = sum_{u in B_n} phi(u.x) w_u(x) / sum_{u in B_n} w_u(x).

    For product cylinders this factorizes into one-dimensional ratio
    averages; linear combinations are evaluated term by term over the
    shared denominator.
    """
    _check_args(system, xs, metric)
    hs = metric.halfwidths(int(n))
    kernels = _build_kernels(system, xs, hs)
    if isinstance(phi, CylinderSum):
        return float(
            sum(
                a * math.exp(_cylinder_log_ratio(kernels, f, hs))
                for a, f in phi.terms
            )
        )
    log_ratio = _cylinder_log_ratio(kernels, phi, hs)
    return 0.0 if log_ratio == -np.inf else float(math.exp(log_ratio))


@dataclass(frozen=True)
class MaximalReport:
    """Empirical tail of sup_n |R_n phi| against the covering bound."""

    epsilon: float
    l1_norm: float
    bound: float
    exceed_fraction: float
    samples: int
    discards: int
    passed: bool


def maximal_tail_check(
    system: ProductSystem,
    metric: RectangularMetric,
    phi: CylinderFunction,
    epsilon: float,
    n_max: int,
    samples: int,
    seed: int,
) -> MaximalReport:
    """Fraction of samples with sup_{1<=n<=n_max} |R_n phi| > epsilon,
    checked one-sidedly against 4^d * ||phi||_1 / epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    d = system.dimension
    all_ns = list(range(1, int(n_max) + 1))
    hs_per_n = np.array([metric.halfwidths(n) for n in all_ns], dtype=np.int64)
    h_maxes = hs_per_n[-1]

    def sup_ratio(xs) -> float:
        kernels = _build_kernels(system, xs, h_maxes)
        log_r = np.zeros(len(all_ns))
        for i, kernel in enumerate(kernels):
            pattern = phi.patterns[i]
            hs = hs_per_n[:, i]
            c_den, pa_den, na_den = kernel.prefix_accumulators()
            den = np.logaddexp(
                c_den, np.logaddexp(pa_den[hs - 1], na_den[hs - 1])
            )
            if not pattern:
                continue
            c_num, pa_num, na_num = kernel.prefix_accumulators(
                len(pattern), _pattern_value(pattern)
            )
            with np.errstate(invalid="ignore"):
                num = np.logaddexp(
                    c_num, np.logaddexp(pa_num[hs - 1], na_num[hs - 1])
                )
            log_r += num - den
        return float(np.exp(log_r).max())

    exceed = 0
    discards = 0
    for s in range(samples):
        sup, disc = _sample_with_retry(system, seed, s, sup_ratio)
        discards += disc
        if sup > epsilon:
            exceed += 1
    fraction = exceed / samples
    bound = (4.0**d) * phi.l1_norm / epsilon
    return MaximalReport(
        float(epsilon), phi.l1_norm, bound, fraction, samples, discards,
        fraction <= bound,
    )


# ---------------------------------------------------------------------------
# Boundary mass ratios
# ---------------------------------------------------------------------------


def _folner_from_kernels(kernels, metric, n: int, t: int) -> float:
    hs = metric.halfwidths(int(n))
    gs = metric.halfwidths(int(t))
    outer = [k.window_scaled(h + g) for k, h, g in zip(kernels, hs, gs)]
    ball = [k.window_scaled(h) for k, h, g in zip(kernels, hs, gs)]
    inner_w = [h - g - 1 for h, g in zip(hs, gs)]
    m_outer = sum(m for m, _ in outer)
    m_ball = sum(m for m, _ in ball)
    s_outer = math.prod(s for _, s in outer)
    s_ball = math.prod(s for _, s in ball)
    scale = math.exp(m_outer - m_ball)
    if any(w < 0 for w in inner_w):
        return scale * (s_outer / s_ball)
    inner = [k.window_scaled(w) for k, w in zip(kernels, inner_w)]
    m_inner = sum(m for m, _ in inner)
    s_inner = math.prod(s for _, s in inner)
    # subtract before dividing: for p = 1/2 all the maxima are zero and this
    # is the exact integer counting ratio
    return scale * (s_outer - math.exp(m_inner - m_outer) * s_inner) / s_ball


def folner_ratio(
    system: ProductSystem,
    xs: Sequence[OdometerPoint],
    metric: RectangularMetric,
    n: int,
    t: int,
) -> float:
    """Weight of the t-boundary of B_n relative to the weight of B_n.

    The numerator is the outer-box sum minus the strict-interior sum, both
    factorized; for the measure-preserving case (all p = 1/2) the result
    equals the exact counting ratio |boundary| / |B_n|.
    """
    _check_args(system, xs, metric)
    if t < 0:
        raise ValueError("boundary thickness must be non-negative")
    hs = metric.halfwidths(int(n))
    gs = metric.halfwidths(int(t))
    kernels = _build_kernels(
        system, xs, [h + g for h, g in zip(hs, gs)]
    )
    return _folner_from_kernels(kernels, metric, n, t)


def folner_series(
    system: ProductSystem,
    xs: Sequence[OdometerPoint],
    metric: RectangularMetric,
    ns: Sequence[int],
    t: int,
) -> list[float]:
    """folner_ratio at several radii, sharing one set of window kernels."""
    _check_args(system, xs, metric)
    ns = [int(n) for n in ns]
    gs = metric.halfwidths(int(t))
    h_top = [h + g for h, g in zip(metric.halfwidths(max(ns)), gs)]
    kernels = _build_kernels(system, xs, h_top)
    return [_folner_from_kernels(kernels, metric, n, t) for n in ns]


# ---------------------------------------------------------------------------
# Growth comparison of summing sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthComparisonReport:
    """Interleaving indices and cardinality ratios for two ball sequences.

    ``m`` at position j is the largest k with B'_k contained in A_{ns[j]}
    (and ``m_prime`` the reverse); the ratios compare |B'_m| with |A_n|.
    The verdict holds iff all four ratio chains stay within [C, 1/C] from
    ``burn_in_start`` on.
    """

    ns: tuple[int, ...]
    m: tuple[int, ...]
    m_prime: tuple[int, ...]
    ratio_forward: tuple[float, ...]
    ratio_reverse: tuple[float, ...]
    threshold: float
    burn_in_start: int
    comparable: bool


def _ball_card(metric: RectangularMetric, n: int) -> int:
    if n == 0:
        return 0  # index 0 is the empty set by convention
    card = 1
    for h in metric.halfwidths(n):
        card *= 2 * h + 1
    return card


def _max_contained_index(
    inner: RectangularMetric, outer: RectangularMetric, n: int
) -> int:
    """Largest k >= 0 with the radius-k ball of ``inner`` inside the
    radius-n ball of ``outer`` (k = 0 denotes the empty set)."""
    target = outer.halfwidths(n)

    def contained(k: int) -> bool:
        try:
            hw = inner.halfwidths(k)
        except ProfileRangeError:
            return False
        return all(a <= b for a, b in zip(hw, target))

    if not contained(1):
        return 0
    hi = 1
    while contained(hi * 2):
        hi *= 2
    lo = hi  # contained(lo) holds
    hi = hi * 2  # contained(hi) fails
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if contained(mid):
            lo = mid
        else:
            hi = mid
    return lo


def compare_growth(
    metric_a: RectangularMetric,
    metric_b: RectangularMetric,
    ns: Sequence[int],
    threshold: float,
    burn_in_fraction: float = 0.5,
) -> GrowthComparisonReport:
    """Compare the growth of two rectangular ball sequences at ``threshold`` C."""
    if metric_a.dimension != metric_b.dimension:
        raise ValueError("sequences must live in the same dimension")
    if not 0.0 < threshold < 1.0:
        raise ValueError("comparability threshold must lie in (0, 1)")
    ns = [int(n) for n in ns]
    if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be strictly increasing radii >= 1")
    m_list, mp_list, fwd, rev = [], [], [], []
    for n in ns:
        m = _max_contained_index(metric_b, metric_a, n)
        mp = _max_contained_index(metric_a, metric_b, n)
        m_list.append(m)
        mp_list.append(mp)
        fwd.append(_ball_card(metric_b, m) / _ball_card(metric_a, n))
        rev.append(_ball_card(metric_a, mp) / _ball_card(metric_b, n))
    if any(b < a for a, b in zip(m_list, m_list[1:])) or any(
        b < a for a, b in zip(mp_list, mp_list[1:])
    ):
        raise AssertionError("interleaving indices must be non-decreasing")
    start_idx = min(int(len(ns) * burn_in_fraction), len(ns) - 1)
    burn_in_start = ns[start_idx]
    ok = all(
        threshold <= r <= 1.0 / threshold
        for r in fwd[start_idx:] + rev[start_idx:]
    )
    return GrowthComparisonReport(
        tuple(ns),
        tuple(m_list),
        tuple(mp_list),
        tuple(fwd),
        tuple(rev),
        float(threshold),
        burn_in_start,
        ok,
    )


def prodcd_bounds(
    a: Sequence[float],
    b: Sequence[float],
    alpha: Sequence[float],
    beta: Sequence[float],
    d_set: Sequence[int],
) -> tuple[float, float]:
    """Weighted critical-dimension bounds for a product action:

        sum_{i in D} a_i alpha_i / sum_{i in D} b_i   (lower)
        sum_{i in D} b_i beta_i  / sum_{i in D} a_i   (upper)

    where D indexes the fastest-growing sides and a_i <= b_i are their
    lower/upper growth exponents relative to the class representative.
    """
    d_set = list(d_set)
    if not d_set:
        raise ValueError("the dominating index set must be non-empty")
    if len(a) != len(b) or len(a) != len(alpha) or len(a) != len(beta):
        raise ValueError("a, b, alpha, beta must have equal length")
    for i in d_set:
        if not 0 <= i < len(a):
            raise ValueError(f"index {i} out of range")
        if a[i] > b[i]:
            raise ValueError("need a_i <= b_i for every i in D")
    sum_a = sum(a[i] for i in d_set)
    sum_b = sum(b[i] for i in d_set)
    if sum_a <= 0 or sum_b <= 0:
        raise ValueError("growth-exponent sums over D must be positive")
    lower = sum(a[i] * alpha[i] for i in d_set) / sum_b
    upper = sum(b[i] * beta[i] for i in d_set) / sum_a
    return float(lower), float(upper)


# ---------------------------------------------------------------------------
# One-sided sums and the symmetric-window sandwich
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StansymReport:
    """Estimates over [1,n] for T and T^{-1} and over [-n,n] for T.

    sandwich_holds checks max(alpha+, alpha-) <= alpha and
    beta <= max(beta+, beta-) within the tolerance.
    """

    alpha_sym: float
    beta_sym: float
    alpha_plus: float
    beta_plus: float
    alpha_minus: float
    beta_minus: float
    tolerance: float
    discards: int
    sandwich_holds: bool


def stansym_check(
    system: OdometerSystem,
    metric_1d: RectangularMetric,
    ns: Sequence[int],
    samples: int,
    seed: int,
    tolerance: float = 0.05,
    tail_fraction: float = 0.5,
) -> StansymReport:
    """Compare one-sided, inverse one-sided, and symmetric growth exponents."""
    if metric_1d.dimension != 1:
        raise ValueError("stansym_check is a one-dimensional diagnostic")
    ns = [int(n) for n in ns]
    hs = [metric_1d.halfwidths(n)[0] for n in ns]
    if hs[0] < 2:
        raise ValueError("grid must start where the half-width is at least 2")
    tail_start = math.ceil(tail_fraction * ns[-1])
    keep = [n >= tail_start for n in ns]
    if not any(keep):
        keep[-1] = True
    product = ProductSystem((system,))

    rows = {
        key: {"alpha": [], "beta": []}
        for key in ("sym", "plus", "minus")
    }
    discards = 0

    def compute(xs):
        kernel = _CoordinateWindows(system, xs[0], hs[-1])
        sym = np.array(
            [kernel.window_logsum(h) / math.log(2.0 * h + 1.0) for h in hs]
        )
        plus = np.array(
            [kernel.one_sided_logsum(h, True) / math.log(float(h)) for h in hs]
        )
        minus = np.array(
            [kernel.one_sided_logsum(h, False) / math.log(float(h)) for h in hs]
        )
        return sym, plus, minus

    for s in range(samples):
        (sym, plus, minus), d = _sample_with_retry(product, seed, s, compute)
        discards += d
        for key, arr in (("sym", sym), ("plus", plus), ("minus", minus)):
            tail = arr[keep]
            rows[key]["alpha"].append(float(tail.min()))
            rows[key]["beta"].append(float(tail.max()))

    med = {
        key: (
            float(np.median(rows[key]["alpha"])),
            float(np.median(rows[key]["beta"])),
        )
        for key in rows
    }
    alpha_sym, beta_sym = med["sym"]
    alpha_plus, beta_plus = med["plus"]
    alpha_minus, beta_minus = med["minus"]
    holds = (
        max(alpha_plus, alpha_minus) <= alpha_sym + tolerance
        and beta_sym <= max(beta_plus, beta_minus) + tolerance
    )
    return StansymReport(
        alpha_sym,
        beta_sym,
        alpha_plus,
        beta_plus,
        alpha_minus,
        beta_minus,
        tolerance,
        discards,
        holds,
    )


# ---------------------------------------------------------------------------
# Predictions from the entropy formula
# ---------------------------------------------------------------------------


def _component_entropy_limit(system: OdometerSystem) -> float | None:
    """Limit of the running entropy averages, when they have settled."""
    hs = np.array([binary_entropy(p) for p in system.probabilities])
    means = np.cumsum(hs) / np.arange(1, hs.size + 1)
    if hs.size >= 2 and abs(means[-1] - means[hs.size // 2]) > 1e-9:
        return None
    return float(means[-1])


def predicted_gamma(
    system: ProductSystem, metric: RectangularMetric
) -> float | None:
    """Weighted-average prediction for the critical dimension, when the
    profile growth classes and component entropies determine one.

    Exponential sides dominate every power side; among power sides the
    weights are the exponents (linear counts as exponent 1).  Table
    profiles have no declared growth class, so no prediction is made.
    """
    kinds = [f.kind for f in metric.profiles]
    if any(k == "table" for k in kinds):
        return None
    gammas = [_component_entropy_limit(c) for c in system.components]
    if any(k == "exp" for k in kinds):
        idx = [i for i, k in enumerate(kinds) if k == "exp"]
        weights = [1.0] * len(idx)
    else:
        idx = list(range(len(kinds)))
        weights = [
            1.0 if kinds[i] == "linear" else metric.profiles[i].param for i in idx
        ]
    chosen = [gammas[i] for i in idx]
    if any(g is None for g in chosen):
        return None
    return float(
        sum(w * g for w, g in zip(weights, chosen)) / sum(weights)
    )
