"""Box geometry: profiles, distances, boundaries, and their exact oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rectdim.metric import (
    HALFWIDTH_LIMIT,
    ProfileRangeError,
    Rectangle,
    RectangularMetric,
    exp_profile,
    linear_profile,
    metric_from_spec,
    power_profile,
    profile_from_spec,
    table_profile,
)

ID = linear_profile(1)
SQUARE = power_profile(2)
EXP = exp_profile()


def metric(*profiles) -> RectangularMetric:
    return RectangularMetric(tuple(profiles))


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------


def test_profile_values():
    assert [ID(r) for r in range(5)] == [0, 1, 2, 3, 4]
    assert [SQUARE(r) for r in range(5)] == [0, 1, 4, 9, 16]
    # floor(e^r - 1): e^2 - 1 = 6.389...
    assert [EXP(r) for r in range(4)] == [0, 1, 6, 19]
    assert linear_profile(2)(7) == 14
    assert power_profile(1.5)(2) == 2  # floor(2.828)


def test_profile_validation():
    with pytest.raises(ValueError, match="slope >= 1"):
        linear_profile(0.5)
    with pytest.raises(ValueError, match="exponent >= 1"):
        power_profile(0.5)
    with pytest.raises(ValueError):
        table_profile([1, 2, 3])  # must start at 0
    with pytest.raises(ValueError, match="strictly increasing"):
        table_profile([0, 1, 1, 2])
    # a good table works and is range-limited
    t = table_profile([0, 2, 5, 9])
    assert t(3) == 9
    with pytest.raises(ProfileRangeError):
        t(4)


def test_exp_profile_is_exact_past_double_precision():
    # floor(e^37 - 1) differs from the double-precision value by 2.
    assert EXP(37) == 11719142372802610
    assert math.floor(math.exp(37) - 1) != EXP(37)
    with pytest.raises(ProfileRangeError):
        EXP(44)  # e^44 - 1 > 2^63 - 1


def test_profile_from_spec_roundtrip():
    m = metric_from_spec(
        [
            {"kind": "linear", "param": 2},
            {"kind": "power", "param": 1.5},
            {"kind": "exp"},
        ]
    )
    assert m.halfwidths(2) == (4, 2, 6)
    assert profile_from_spec({"kind": "table", "table": [0, 3, 7]})(2) == 7
    with pytest.raises(ValueError):
        profile_from_spec({"kind": "spline"})


# ---------------------------------------------------------------------------
# Half-widths, distance, membership
# ---------------------------------------------------------------------------


def test_ball_halfwidths_examples():
    assert metric(ID, SQUARE).halfwidths(3) == (3, 9)
    assert metric(ID, SQUARE, EXP).halfwidths(0) == (0, 0, 0)
    assert metric(ID, EXP).halfwidths(2) == (2, 6)


def test_halfwidths_monotone():
    m = metric(ID, SQUARE, EXP)
    hws = [m.halfwidths(r) for r in range(20)]
    for a, b in zip(hws, hws[1:]):
        assert all(x <= y for x, y in zip(a, b))


def test_distance_examples():
    assert metric(ID, ID).distance((0, 0), (2, 5)) == 5
    assert metric(ID, SQUARE).distance((0, 0), (2, 5)) == 3
    assert metric(ID, SQUARE).distance((7, -3), (7, -3)) == 0


def test_distance_table_out_of_reach():
    m = metric(table_profile([0, 1, 2]))
    with pytest.raises(ProfileRangeError):
        m.distance((0,), (5,))


def test_contains_and_cardinality():
    b = metric(ID, SQUARE).ball((0, 0), 3)
    assert b.contains((3, 9))
    assert not b.contains((4, 0))
    assert b.contains((0, 0))
    assert b.cardinality() == 7 * 19 == 133
    assert metric(ID).ball((5,), 0).cardinality() == 1
    for n in (1, 4, 9):
        assert metric(ID).ball((0,), n).cardinality() == 2 * n + 1


def test_cardinality_always_odd():
    m = metric(ID, SQUARE, EXP)
    for r in range(6):
        assert m.ball((1, -2, 3), r).cardinality() % 2 == 1


def test_scale():
    b = metric(ID, SQUARE).ball((0, 0), 3)
    doubled = b.scaled(2)
    assert doubled.halfwidths() == (6, 18)
    assert doubled.cardinality() == 13 * 37 == 481
    # modified doubling: |2B| <= 2^d |B|, here 481/133 < 4
    assert doubled.cardinality() <= 4 * b.cardinality()
    assert b.scaled(1) == b
    assert b.scaled(2).scaled(3).halfwidths() == (18, 54)


def test_modified_doubling_exact_across_profiles():
    pools = [ID, linear_profile(2), SQUARE, power_profile(1.5), EXP]
    for d in (1, 2, 3):
        for combo in itertools.combinations_with_replacement(pools, d):
            m = metric(*combo)
            for r in range(0, 9):
                b = m.ball((0,) * d, r)
                assert b.scaled(2).cardinality() <= (2**d) * b.cardinality()


# ---------------------------------------------------------------------------
# Metric axioms (property-based)
# ---------------------------------------------------------------------------


@st.composite
def metrics_and_points(draw, n_points=3):
    d = draw(st.integers(1, 3))
    pool = [ID, linear_profile(2), linear_profile(3), SQUARE, power_profile(1.5), EXP]
    profiles = tuple(draw(st.sampled_from(pool)) for _ in range(d))
    pts = [
        tuple(draw(st.integers(-200, 200)) for _ in range(d))
        for _ in range(n_points)
    ]
    return RectangularMetric(profiles), pts


@settings(max_examples=150, deadline=None)
@given(metrics_and_points())
def test_metric_axioms(mp):
    m, (u, v, w) = mp
    assert m.distance(u, v) == m.distance(v, u)
    assert m.distance(u, u) == 0
    assert (m.distance(u, v) == 0) == (u == v)
    assert m.distance(u, w) <= m.distance(u, v) + m.distance(v, w)


@settings(max_examples=150, deadline=None)
@given(metrics_and_points(n_points=2), st.integers(0, 12))
def test_translation_invariance_and_coherence(mp, r):
    m, (u, v) = mp
    shift = tuple(a + 17 for a in range(m.dimension))
    su = tuple(a + s for a, s in zip(u, shift))
    sv = tuple(a + s for a, s in zip(v, shift))
    assert m.distance(u, v) == m.distance(su, sv)
    # membership in B_r(u) is exactly distance <= r
    assert m.ball(u, r).contains(v) == (m.distance(u, v) <= r)


def test_coherence_exhaustive_small():
    m = metric(ID, SQUARE)
    for r in range(4):
        ball = m.ball((1, -1), r)
        lo, hi = -12, 12
        for z in itertools.product(range(lo, hi), repeat=2):
            assert ball.contains(z) == (m.distance((1, -1), z) <= r)


def test_nesting():
    m = metric(ID, EXP)
    for r in range(6):
        inner = set(m.ball((0, 0), r).lattice_points())
        outer = set(m.ball((0, 0), r + 1).lattice_points())
        assert inner <= outer


# ---------------------------------------------------------------------------
# Thick boundaries: closed form vs the definitional union
# ---------------------------------------------------------------------------


def union_thick_boundary_grid(rect: Rectangle, t: int) -> np.ndarray:
    """Definitional oracle: union of t-balls centred on boundary points.

    Returns a boolean grid over the outer box, indexed by z - center + h + g.
    """
    m = rect.metric
    hws = m.halfwidths(rect.radius)
    tws = m.halfwidths(t)
    shape = tuple(2 * (h + g) + 1 for h, g in zip(hws, tws))
    grid = np.zeros(shape, dtype=bool)
    for u in rect.boundary_points():
        slicer = tuple(
            slice((ui - ci) + h, (ui - ci) + h + 2 * g + 1)
            for ui, ci, h, g in zip(u, rect.center, hws, tws)
        )
        grid[slicer] = True
    return grid


def closed_form_grid(rect: Rectangle, t: int) -> np.ndarray:
    """Vectorized closed form over the same outer box."""
    m = rect.metric
    hws = m.halfwidths(rect.radius)
    tws = m.halfwidths(t)
    d = rect.dimension
    cond = np.zeros(tuple(2 * (h + g) + 1 for h, g in zip(hws, tws)), dtype=bool)
    for axis, (h, g) in enumerate(zip(hws, tws)):
        offs = np.abs(np.arange(-(h + g), h + g + 1)) >= (h - g)
        shape = [1] * d
        shape[axis] = offs.size
        cond |= offs.reshape(shape)
    return cond


BOUNDARY_CASES = [
    (profiles, r, t)
    for profiles in [
        (ID,),
        (linear_profile(2),),
        (SQUARE,),
        (EXP,),
        (ID, ID),
        (ID, SQUARE),
        (linear_profile(2), EXP),
        (ID, ID, ID),
        (ID, linear_profile(2), SQUARE),
    ]
    for r in (0, 1, 2, 5, 8)
    for t in (0, 1, 3)
]


@pytest.mark.parametrize("profiles,r,t", BOUNDARY_CASES)
def test_thick_boundary_against_union(profiles, r, t):
    m = metric(*profiles)
    d = m.dimension
    hws = m.halfwidths(r)
    tws = m.halfwidths(t)
    outer_points = math.prod(2 * (h + g) + 1 for h, g in zip(hws, tws))
    if outer_points > 2_000_000:
        pytest.skip("outer box too large for the union oracle")
    center = tuple(range(d))  # off-origin centre
    rect = m.ball(center, r)
    union = union_thick_boundary_grid(rect, t)
    closed = closed_form_grid(rect, t)
    assert np.array_equal(union, closed)
    assert rect.thick_boundary_count(t) == int(union.sum())
    # spot-check the membership method on a sample of points, inside and out
    rng = np.random.default_rng(42)
    for _ in range(50):
        z = tuple(
            int(rng.integers(c - (h + g) - 2, c + (h + g) + 3))
            for c, h, g in zip(center, hws, tws)
        )
        idx = tuple(zi - ci + h + g for zi, ci, h, g in zip(z, center, hws, tws))
        inside_outer = all(0 <= i < s for i, s in zip(idx, union.shape))
        expected = bool(union[idx]) if inside_outer else False
        assert rect.in_thick_boundary(t, z) == expected


def test_thick_boundary_examples():
    b = metric(ID).ball((0,), 5)
    assert b.in_thick_boundary(1, (6,))
    assert b.in_thick_boundary(1, (4,))
    assert not b.in_thick_boundary(1, (0,))
    assert not b.in_thick_boundary(1, (7,))
    assert b.thick_boundary_count(1) == 6  # {+-4, +-5, +-6}
    b2 = metric(ID, ID).ball((0, 0), 2)
    assert b2.thick_boundary_count(0) == 25 - 9  # shell of a 5x5 box
    # t = 0 keeps exactly the topological boundary
    for z in b2.boundary_points():
        assert b2.in_thick_boundary(0, z)


def test_thick_boundary_t_at_least_r_covers_outer_box():
    m = metric(ID, SQUARE)
    b = m.ball((0, 0), 2)
    t = 3
    hws = m.halfwidths(2)
    tws = m.halfwidths(t)
    outer = math.prod(2 * (h + g) + 1 for h, g in zip(hws, tws))
    assert b.thick_boundary_count(t) == outer


def test_thick_boundary_requires_unscaled():
    b = metric(ID).ball((0,), 3).scaled(2)
    with pytest.raises(ValueError):
        b.thick_boundary_count(1)


# ---------------------------------------------------------------------------
# Validation and ranges
# ---------------------------------------------------------------------------


def test_superadditivity_validated_for_tables():
    # f(2)=3, f(4)=5 < f(2)+f(2): passes the linear lower bound but not
    # superadditivity, which the constructor samples.
    with pytest.raises(ValueError, match="superadditivity"):
        RectangularMetric((table_profile([0, 1, 3, 4, 5]),))


def test_range_errors_propagate():
    m = metric(EXP)
    with pytest.raises(ProfileRangeError):
        m.halfwidths(50)
    assert m.halfwidths(43)[0] <= HALFWIDTH_LIMIT


def test_dimension_mismatch():
    m = metric(ID, ID)
    with pytest.raises(ValueError):
        m.distance((0,), (1,))
    with pytest.raises(ValueError):
        m.ball((0, 0), 1).contains((1,))
    with pytest.raises(ValueError):
        Rectangle((0,), 1, m)
