"""Factorized cocycle sums, dimension estimates, ergodic averages, growth."""

import math
from fractions import Fraction

import numpy as np
import pytest

from rectdim.dynamics import (
    HorizonOverflowError,
    OdometerPoint,
    OdometerSystem,
    ProductSystem,
    cylinder_function,
)
from rectdim.estimator import (
    binary_entropy,
    classify_tail,
    compare_growth,
    critical_dimensions,
    entropy_oracle,
    folner_ratio,
    folner_series,
    geometric_grid,
    maximal_tail_check,
    predicted_gamma,
    prodcd_bounds,
    ratio_average,
    rect_log_sum,
    series,
    stansym_check,
)
from rectdim.metric import (
    RectangularMetric,
    exp_profile,
    linear_profile,
    power_profile,
    table_profile,
)

ID = linear_profile(1)
M1 = RectangularMetric((ID,))
M2 = RectangularMetric((ID, ID))
M2SQ = RectangularMetric((ID, power_profile(2)))


def padded(bits, depth):
    return OdometerPoint(list(bits) + [0] * (depth - len(bits)))


def brute_log_sum(system: ProductSystem, xs, metric, n: int) -> float:
    """Independent oracle: enumerate B_n and log-sum the exact cocycles."""
    ball = metric.ball((0,) * metric.dimension, n)
    logs = [system.log_cocycle(xs, u) for u in ball.lattice_points()]
    m = max(logs)
    return m + math.log(sum(math.exp(v - m) for v in logs))


def brute_ratio_average(system, xs, metric, n, phi) -> float:
    ball = metric.ball((0,) * metric.dimension, n)
    num = 0.0
    den = 0.0
    for u in ball.lattice_points():
        w = math.exp(system.log_cocycle(xs, u))
        num += phi(system.apply(xs, u)) * w
        den += w
    return num / den


def brute_boundary_log_sum(system, xs, metric, n, t) -> float:
    hws = metric.halfwidths(n)
    tws = metric.halfwidths(t)
    outer = metric.ball((0,) * metric.dimension, 0)  # placeholder center
    import itertools as it

    logs = []
    for u in it.product(
        *(range(-(h + g), h + g + 1) for h, g in zip(hws, tws))
    ):
        off = [abs(c) for c in u]
        if any(o >= h - g for o, h, g in zip(off, hws, tws)):
            logs.append(system.log_cocycle(xs, u))
    m = max(logs)
    return m + math.log(sum(math.exp(v - m) for v in logs))


# ---------------------------------------------------------------------------
# Factorized sums against enumeration
# ---------------------------------------------------------------------------


def test_rect_log_sum_worked_example():
    # d=1, p=0.25, x = (0,1,0,...), ball {-1,0,1}: weights 1, 1, 3
    odo = OdometerSystem.constant(0.25, 16)
    system = ProductSystem((odo,))
    xs = [padded([0, 1], 16)]
    got = rect_log_sum(system, xs, M1, 1)
    assert got == pytest.approx(math.log(5.0), abs=1e-12)
    assert got == pytest.approx(brute_log_sum(system, xs, M1, 1), abs=1e-12)


def test_rect_log_sum_measure_preserving_exact():
    system = ProductSystem(
        (OdometerSystem.constant(0.5, 32), OdometerSystem.constant(0.5, 32))
    )
    xs = system.sample_point(4)
    for n in (1, 3, 7):
        expected = sum(math.log(2 * h + 1) for h in M2SQ.halfwidths(n))
        assert rect_log_sum(system, xs, M2SQ, n) == expected


@pytest.mark.parametrize("seed", range(10))
def test_rect_log_sum_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    metric = RectangularMetric(
        tuple(
            rng.choice(
                np.array([ID, linear_profile(2), power_profile(1.5)], dtype=object)
            )
            for _ in range(d)
        )
    )
    comps = tuple(
        OdometerSystem.constant(float(rng.uniform(0.1, 0.9)), 24) for _ in range(d)
    )
    system = ProductSystem(comps)
    n = int(rng.integers(1, 6 if d == 3 else 9))
    xs, attempt = None, 0
    while xs is None:
        cand = system.sample_point(np.random.SeedSequence(entropy=seed, spawn_key=(attempt,)))
        try:
            got = rect_log_sum(system, cand, metric, n)
            xs = cand
        except HorizonOverflowError:
            attempt += 1
    assert got == pytest.approx(brute_log_sum(system, xs, metric, n), abs=1e-9)


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------


def test_series_reuse_matches_fresh():
    system = ProductSystem(
        (OdometerSystem.constant(0.25, 40), OdometerSystem.constant(0.7, 40))
    )
    xs = system.sample_point(12)
    ns = geometric_grid(2, 400)
    a = series(system, xs, M2SQ, ns, reuse=True)
    b = series(system, xs, M2SQ, ns, reuse=False)
    assert a.ns == b.ns
    np.testing.assert_allclose(a.log_sum, b.log_sum, rtol=0, atol=1e-12)
    # and each grid point equals the one-shot operation
    for n, v in zip(a.ns, a.log_sum):
        assert v == pytest.approx(rect_log_sum(system, xs, M2SQ, n), abs=1e-12)


def test_series_ratio_is_one_for_half():
    system = ProductSystem((OdometerSystem.constant(0.5, 40),))
    xs = system.sample_point(0)
    s = series(system, xs, M1, geometric_grid(1, 2000))
    assert np.all(s.ratio == 1.0)
    assert np.all(np.diff(s.log_card) > 0)


def test_series_monotone_card_and_positive_sum():
    system = ProductSystem((OdometerSystem.constant(0.2, 40),))
    xs = system.sample_point(3)
    s = series(system, xs, M1, geometric_grid(1, 500))
    assert np.all(np.diff(s.log_card) > 0)
    assert np.all(s.log_sum >= 0.0)  # the ball contains 0 and w_0 = 1
    assert np.all(np.isfinite(s.ratio))


def test_series_dedupes_flat_table_steps():
    metric = RectangularMetric((table_profile([0, 2, 4, 8, 16, 32]),))
    system = ProductSystem((OdometerSystem.constant(0.5, 16),))
    xs = system.sample_point(1)
    s = series(system, xs, metric, [1, 2, 3, 4, 5])
    assert s.ns == (1, 2, 3, 4, 5)
    assert np.all(np.diff(s.log_card) > 0)


def test_series_validation():
    system = ProductSystem((OdometerSystem.constant(0.5, 16),))
    xs = system.sample_point(1)
    with pytest.raises(ValueError):
        series(system, xs, M1, [])
    with pytest.raises(ValueError):
        series(system, xs, M1, [0, 1])
    with pytest.raises(ValueError):
        series(system, xs, M1, [3, 3])
    with pytest.raises(ValueError):
        series(system, xs, M2, [1, 2])  # dimension mismatch


def test_series_overflow_propagates():
    system = ProductSystem((OdometerSystem.constant(0.5, 8),))
    xs = [OdometerPoint.from_value(5, 8)]
    with pytest.raises(HorizonOverflowError):
        series(system, xs, M1, [200])


# ---------------------------------------------------------------------------
# Critical dimensions
# ---------------------------------------------------------------------------


def test_critical_dimensions_half_exact():
    system = ProductSystem((OdometerSystem.constant(0.5, 48),))
    est = critical_dimensions(system, M1, geometric_grid(2, 3000), 8, seed=6)
    assert est.alpha_hat == est.beta_hat == est.gamma_hat == 1.0
    assert est.discards == 0
    assert len(est.sample_alphas) == 8


def test_critical_dimensions_deterministic():
    system = ProductSystem((OdometerSystem.constant(0.3, 48),))
    ns = geometric_grid(4, 2000)
    a = critical_dimensions(system, M1, ns, 6, seed=42)
    b = critical_dimensions(system, M1, ns, 6, seed=42)
    assert a.sample_alphas == b.sample_alphas
    assert a.alpha_hat == b.alpha_hat
    c = critical_dimensions(system, M1, ns, 6, seed=43)
    assert a.sample_alphas != c.sample_alphas


def test_critical_dimensions_orders_alpha_beta():
    system = ProductSystem((OdometerSystem.constant(0.25, 48),))
    est = critical_dimensions(system, M1, geometric_grid(4, 3000), 10, seed=9)
    for a, b in zip(est.sample_alphas, est.sample_betas):
        assert a <= b
    assert 0.0 <= est.alpha_hat <= est.beta_hat


def test_critical_dimensions_counts_discards():
    # depth 14 with windows up to 1100 overflows often; estimates still land
    system = ProductSystem((OdometerSystem.constant(0.5, 14),))
    est = critical_dimensions(system, M1, geometric_grid(2, 1100), 12, seed=5)
    assert est.discards > 0
    assert est.gamma_hat == 1.0


def test_entropy_oracle_values():
    odo = OdometerSystem.constant(0.25, 32)
    zeros = OdometerPoint([0] * 32)
    assert entropy_oracle(odo, zeros, 10) == pytest.approx(2.0)
    half = OdometerSystem.constant(0.5, 32)
    assert entropy_oracle(half, half.sample_point(1), 32) == pytest.approx(1.0)


def test_entropy_oracle_lln():
    odo = OdometerSystem.constant(0.25, 64)
    vals = [entropy_oracle(odo, odo.sample_point(s), 64) for s in range(10_000)]
    assert abs(np.mean(vals) - binary_entropy(0.25)) < 0.02


def test_classify_tail():
    system = ProductSystem((OdometerSystem.constant(0.5, 32),))
    xs = system.sample_point(2)
    s = series(system, xs, M1, geometric_grid(2, 200))
    assert classify_tail(s, 0.5, 100) == "lower"
    assert classify_tail(s, 1.5, 100) == "upper"
    assert classify_tail(s, 1.0, 100) == "indeterminate"


# ---------------------------------------------------------------------------
# Ergodic ratio averages
# ---------------------------------------------------------------------------


def test_ratio_average_of_one_is_exactly_one():
    system = ProductSystem(
        (OdometerSystem.constant(0.25, 32), OdometerSystem.constant(0.1, 32))
    )
    xs = system.sample_point(8)
    phi = cylinder_function(system, ["", ""])
    assert ratio_average(system, xs, M2SQ, 9, phi) == 1.0


def test_ratio_average_indicator_in_unit_interval():
    system = ProductSystem((OdometerSystem.constant(0.25, 32),))
    phi = cylinder_function(system, ["0"])
    for s in range(5):
        xs = system.sample_point(s)
        r = ratio_average(system, xs, M1, 50, phi)
        assert 0.0 <= r <= 1.0


def test_ratio_average_matches_enumeration():
    system = ProductSystem(
        (OdometerSystem.constant(0.25, 24), OdometerSystem.constant(0.6, 24))
    )
    phi = cylinder_function(system, ["0", "11"])
    rng = np.random.default_rng(17)
    done = 0
    attempt = 0
    while done < 6:
        xs = system.sample_point(np.random.SeedSequence(17, spawn_key=(attempt,)))
        attempt += 1
        try:
            got = ratio_average(system, xs, M2, 4, phi)
        except HorizonOverflowError:
            continue
        want = brute_ratio_average(system, xs, M2, 4, phi)
        assert got == pytest.approx(want, abs=1e-10)
        done += 1


def test_ratio_average_birkhoff_case():
    # measure preserving: the average of an indicator tends to its measure
    system = ProductSystem((OdometerSystem.constant(0.5, 40),))
    phi = cylinder_function(system, ["0"])
    vals = [
        ratio_average(system, system.sample_point(s), M1, 10_000, phi)
        for s in range(10)
    ]
    assert abs(np.median(vals) - 0.5) < 0.02


def test_ratio_average_nonsingular_limit():
    system = ProductSystem((OdometerSystem.constant(0.25, 64),))
    phi = cylinder_function(system, ["0"])
    vals = []
    s = 0
    while len(vals) < 10:
        xs = system.sample_point(np.random.SeedSequence(99, spawn_key=(s,)))
        s += 1
        try:
            vals.append(ratio_average(system, xs, M1, 100_000, phi))
        except HorizonOverflowError:
            continue
    assert abs(np.median(vals) - 0.25) < 0.05


# ---------------------------------------------------------------------------
# Boundary mass ratios
# ---------------------------------------------------------------------------


def test_folner_ratio_half_is_exact_count_ratio():
    system = ProductSystem((OdometerSystem.constant(0.5, 32),))
    xs = system.sample_point(7)
    ball = M1.ball((0,), 5)
    expected = Fraction(ball.thick_boundary_count(1), ball.cardinality())
    assert folner_ratio(system, xs, M1, 5, 1) == float(expected) == 6 / 11
    # t = 0 keeps the two endpoints of the interval
    for n in (3, 8, 20):
        got = folner_ratio(system, xs, M1, n, 0)
        assert got == 2 / (2 * n + 1)


def test_folner_ratio_half_exact_in_2d():
    system = ProductSystem(
        (OdometerSystem.constant(0.5, 32), OdometerSystem.constant(0.5, 32))
    )
    xs = system.sample_point(3)
    for n, t in ((2, 0), (3, 1), (5, 2)):
        ball = M2SQ.ball((0, 0), n)
        expected = Fraction(ball.thick_boundary_count(t), ball.cardinality())
        assert folner_ratio(system, xs, M2SQ, n, t) == pytest.approx(
            float(expected), rel=1e-15
        )


def test_folner_numerator_matches_enumeration():
    rng = np.random.default_rng(23)
    for trial in range(6):
        d = int(rng.integers(1, 3))
        metric = M1 if d == 1 else M2
        system = ProductSystem(
            tuple(
                OdometerSystem.constant(float(rng.uniform(0.15, 0.85)), 24)
                for _ in range(d)
            )
        )
        n, t = int(rng.integers(2, 7)), int(rng.integers(0, 3))
        xs = None
        attempt = 0
        while xs is None:
            cand = system.sample_point(np.random.SeedSequence(23, spawn_key=(trial, attempt)))
            try:
                got = folner_ratio(system, cand, metric, n, t)
                xs = cand
            except HorizonOverflowError:
                attempt += 1
        den = brute_log_sum(system, xs, metric, n)
        num = brute_boundary_log_sum(system, xs, metric, n, t)
        assert got == pytest.approx(math.exp(num - den), abs=1e-9)


def test_folner_series_matches_single_calls():
    system = ProductSystem((OdometerSystem.constant(0.25, 40),))
    xs = system.sample_point(5)
    ns = [4, 10, 25, 60]
    got = folner_series(system, xs, M1, ns, 1)
    want = [folner_ratio(system, xs, M1, n, 1) for n in ns]
    assert got == pytest.approx(want, rel=1e-12)


def test_folner_decays_for_growing_boxes():
    system = ProductSystem(
        (OdometerSystem.constant(0.25, 64), OdometerSystem.constant(0.25, 64))
    )
    decayed = 0
    s = 0
    trials = 0
    while trials < 10:
        xs = system.sample_point(np.random.SeedSequence(7, spawn_key=(s,)))
        s += 1
        try:
            lo, hi = folner_series(system, xs, M2SQ, [30, 300], 1)
        except HorizonOverflowError:
            continue
        trials += 1
        if hi < lo:
            decayed += 1
    assert decayed >= 8


# ---------------------------------------------------------------------------
# Maximal inequality
# ---------------------------------------------------------------------------


def test_maximal_indicator_never_exceeds_one():
    system = ProductSystem((OdometerSystem.constant(0.25, 32),))
    phi = cylinder_function(system, ["0"])
    report = maximal_tail_check(system, M1, phi, 1.0, 200, 50, seed=3)
    assert report.exceed_fraction == 0.0
    assert report.passed


def test_maximal_vacuous_bound_still_checked():
    system = ProductSystem((OdometerSystem.constant(0.25, 32),))
    phi = cylinder_function(system, ["0"])
    report = maximal_tail_check(system, M1, phi, 0.5, 200, 50, seed=3)
    assert report.bound == pytest.approx(4 * 0.25 / 0.5)
    assert report.exceed_fraction <= report.bound
    assert report.passed


def test_maximal_small_integral_adversarial():
    system = ProductSystem((OdometerSystem.constant(0.25, 32),))
    phi = cylinder_function(system, ["0110"])
    report = maximal_tail_check(system, M1, phi, 0.05, 400, 200, seed=11)
    assert report.l1_norm == phi.integral
    assert report.exceed_fraction <= report.bound
    assert report.passed


# ---------------------------------------------------------------------------
# Growth comparison
# ---------------------------------------------------------------------------


def test_compare_growth_identical_sequences():
    report = compare_growth(M2, M2, list(range(1, 30)), 0.5)
    assert report.m == tuple(range(1, 30))
    assert report.m_prime == tuple(range(1, 30))
    assert all(r == 1.0 for r in report.ratio_forward)
    assert all(r == 1.0 for r in report.ratio_reverse)
    assert report.comparable


def test_compare_growth_scaled_norm_balls():
    # [-n,n]^2 vs [-2n,2n]^2: interleaved with bounded cardinality ratios
    wide = RectangularMetric((linear_profile(2), linear_profile(2)))
    report = compare_growth(M2, wide, list(range(1, 60)), 1 / 16)
    assert report.comparable
    for n, m in zip(report.ns, report.m):
        assert m == n // 2
    past_burn_in = [
        r for n, r in zip(report.ns, report.ratio_forward) if n >= report.burn_in_start
    ]
    assert all(r >= 1 / 16 for r in past_burn_in)


def test_compare_growth_exponential_rectangle_not_comparable():
    # [-e^n+1, e^n-1] x [-n, n] against the squares [-n, n]^2
    rect = RectangularMetric((exp_profile(), ID))
    report = compare_growth(rect, M2, list(range(2, 30)), 0.01)
    # the squares embed at index n exactly, and their share collapses
    assert report.m == tuple(range(2, 30))
    assert report.ratio_forward[-1] < 1e-9
    assert not report.comparable


def test_compare_growth_monotone_indices():
    rect = RectangularMetric((power_profile(1.5), ID))
    report = compare_growth(rect, M2, list(range(1, 40)), 0.05)
    assert all(b >= a for a, b in zip(report.m, report.m[1:]))
    assert all(b >= a for a, b in zip(report.m_prime, report.m_prime[1:]))


def test_compare_growth_validation():
    with pytest.raises(ValueError):
        compare_growth(M1, M2, [1, 2], 0.5)
    with pytest.raises(ValueError):
        compare_growth(M2, M2, [1, 2], 1.5)
    with pytest.raises(ValueError):
        compare_growth(M2, M2, [2, 1], 0.5)


# ---------------------------------------------------------------------------
# Weighted bounds and the one-dimensional sandwich
# ---------------------------------------------------------------------------


def test_prodcd_bounds_examples():
    g1, g2 = 0.8113, 0.469
    lo, hi = prodcd_bounds([1, 2], [1, 2], [g1, g2], [g1, g2], [0, 1])
    assert lo == hi == pytest.approx((g1 + 2 * g2) / 3)
    lo, hi = prodcd_bounds([1, 1], [1, 1], [g1, g2], [g1, g2], [1])
    assert lo == hi == pytest.approx(g2)
    gs = [0.3, 0.5, 0.7]
    lo, hi = prodcd_bounds([1, 1, 1], [1, 1, 1], gs, gs, [0, 1, 2])
    assert lo == hi == pytest.approx(np.mean(gs))
    lo, hi = prodcd_bounds([0.5, 1], [1, 1], [0.2, 0.4], [0.3, 0.5], [0, 1])
    assert lo == pytest.approx((0.5 * 0.2 + 0.4) / 2)
    assert hi == pytest.approx((0.3 + 0.5) / 1.5)
    assert lo <= hi


def test_prodcd_bounds_validation():
    with pytest.raises(ValueError):
        prodcd_bounds([1], [1], [0.5], [0.5], [])
    with pytest.raises(ValueError):
        prodcd_bounds([2], [1], [0.5], [0.5], [0])
    with pytest.raises(ValueError):
        prodcd_bounds([1], [1], [0.5], [0.5], [3])


def test_stansym_half_all_ones():
    report = stansym_check(
        OdometerSystem.constant(0.5, 48), M1, geometric_grid(2, 2000), 6, seed=2
    )
    assert (
        report.alpha_sym
        == report.beta_sym
        == report.alpha_plus
        == report.beta_plus
        == report.alpha_minus
        == report.beta_minus
        == 1.0
    )
    assert report.sandwich_holds


def test_stansym_requires_one_dimension():
    with pytest.raises(ValueError):
        stansym_check(OdometerSystem.constant(0.5, 16), M2, [2, 4], 2, seed=1)


# ---------------------------------------------------------------------------
# Predictions and grids
# ---------------------------------------------------------------------------



def test_predicted_gamma_cases():
    h25 = binary_entropy(0.25)
    h10 = binary_entropy(0.1)
    sys1 = ProductSystem((OdometerSystem.constant(0.25, 16),))
    assert predicted_gamma(sys1, M1) == pytest.approx(h25)
    sys2 = ProductSystem(
        (OdometerSystem.constant(0.25, 16), OdometerSystem.constant(0.1, 16))
    )
    assert predicted_gamma(sys2, M2SQ) == pytest.approx((h25 + 2 * h10) / 3)
    exp_metric = RectangularMetric((ID, exp_profile()))
    assert predicted_gamma(sys2, exp_metric) == pytest.approx(h10)
    table_metric = RectangularMetric((table_profile([0, 1, 2, 4, 8]),))
    assert predicted_gamma(sys1, table_metric) is None
    # alternating p has constant entropy (H is symmetric), so it still
    # predicts; dyadic blocks of different p do not settle
    alternating = ProductSystem(
        (OdometerSystem(tuple((0.2, 0.8)[i % 2] for i in range(16))),)
    )
    assert predicted_gamma(alternating, M1) == pytest.approx(binary_entropy(0.2))
    blocks = []
    length, level = 1, 0
    while len(blocks) < 16:
        blocks += [(0.5, 0.2)[level % 2]] * length
        length *= 2
        level += 1
    swinging = ProductSystem((OdometerSystem(tuple(blocks[:16])),))
    assert predicted_gamma(swinging, M1) is None


def test_geometric_grid():
    g = geometric_grid(4, 100, 1.5)
    assert g[0] == 4 and g[-1] == 100
    assert all(b > a for a, b in zip(g, g[1:]))
    assert geometric_grid(5, 5) == [5]
    with pytest.raises(ValueError):
        geometric_grid(0, 10)
    with pytest.raises(ValueError):
        geometric_grid(2, 10, 1.0)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.25) == pytest.approx(0.811278, abs=1e-6)
    assert binary_entropy(0.1) == pytest.approx(0.468996, abs=1e-6)
    with pytest.raises(ValueError):
        binary_entropy(0.0)
