"""Carpets, covering selections, separated colorings, and boundary chains.

The covering results implemented here are finite and exact: every bound is
checkable by enumeration at desk scale.  The central objects are *carpets*
(one ball per point of a finite set E, ball i centred at point i) and the
greedy *incremental* selection that witnesses the Besicovitch covering
property of rectangular metrics with constant 2^d.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .metric import Rectangle, RectangularMetric, boxes_intersect

__all__ = [
    "SizeLimitError",
    "Carpet",
    "DiscreteMassFunction",
    "Stack",
    "StackSelectionReport",
    "separation_color_bound",
    "incremental_subcarpet",
    "multiplicity",
    "well_separated_coloring",
    "rectangle_set_distance",
    "box_shell_distance",
    "is_well_separated",
    "mass_cover_selection",
    "verify_stack_selection",
    "find_stack_selection",
    "boundary_chain_check",
    "coarse_scale",
    "random_carpet",
    "carpet_records",
    "carpet_from_records",
]


class SizeLimitError(RuntimeError):
    """An enumeration region is too large for brute-force processing."""


def separation_color_bound(d: int) -> int:
    """Maximum number of colors needed to split a covering selection into
    well-separated subfamilies: C*D^2 + 1 with C = D = 2^d."""
    return 2 ** (3 * d) + 1


@dataclass(frozen=True)
class Carpet:
    """A family of balls over a finite set E: ball i is centred at E[i]."""

    metric: RectangularMetric
    points: tuple[tuple[int, ...], ...]
    radii: tuple[int, ...]

    def __post_init__(self) -> None:
        pts = tuple(tuple(int(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "radii", tuple(int(r) for r in self.radii))
        if not pts:
            raise ValueError("carpet must cover a non-empty set")
        if len(pts) != len(self.radii):
            raise ValueError("one radius per point is required")
        d = self.metric.dimension
        if any(len(p) != d for p in pts):
            raise ValueError("points must match the metric dimension")
        if any(r < 0 for r in self.radii):
            raise ValueError("radii must be non-negative")
        if len(set(pts)) != len(pts):
            raise ValueError("carpet points must be distinct")

    def __len__(self) -> int:
        return len(self.points)

    def rectangle(self, i: int) -> Rectangle:
        return Rectangle(self.points[i], self.radii[i], self.metric)

    def rectangles(self) -> list[Rectangle]:
        return [self.rectangle(i) for i in range(len(self))]


@dataclass(frozen=True)
class DiscreteMassFunction:
    """A finite positive measure given by point masses."""

    points: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(tuple(int(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(pts) != len(self.weights):
            raise ValueError("one weight per support point is required")
        if not pts:
            raise ValueError("mass function needs a non-empty support")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be strictly positive")

    @property
    def total(self) -> float:
        return float(sum(self.weights))

    def items(self) -> Iterable[tuple[tuple[int, ...], float]]:
        return zip(self.points, self.weights)


@dataclass(frozen=True)
class Stack:
    """An ordered family of carpets over the same finite set.

    Consecutive levels must separate scales: rmin of level i is at least
    twice rmax of level i-1.
    """

    carpets: tuple[Carpet, ...]

    def __post_init__(self) -> None:
        carpets = tuple(self.carpets)
        object.__setattr__(self, "carpets", carpets)
        if not carpets:
            raise ValueError("stack must contain at least one carpet")
        base = carpets[0].points
        for c in carpets[1:]:
            if c.points != base:
                raise ValueError("all carpets in a stack must share the same set")
        for lower, upper in zip(carpets, carpets[1:]):
            if min(upper.radii) < 2 * max(lower.radii):
                raise ValueError(
                    "stack levels must satisfy rmin(level i) >= 2*rmax(level i-1)"
                )

    @property
    def height(self) -> int:
        return len(self.carpets)

    @property
    def points(self) -> tuple[tuple[int, ...], ...]:
        return self.carpets[0].points


def incremental_subcarpet(carpet: Carpet, check_multiplicity: bool = True) -> list[int]:
    """Greedy covering selection with non-increasing radii.

    Balls are visited in order of decreasing radius (ties: lower index
    first); a ball is kept iff its centre is not covered by the balls kept
    so far.  The result covers E, satisfies the incremental property, and
    has multiplicity at most 2^d, which is asserted unless disabled.
    """
    order = sorted(range(len(carpet)), key=lambda i: (-carpet.radii[i], i))
    selected: list[int] = []
    rects: list[Rectangle] = []
    for i in order:
        if not any(rect.contains(carpet.points[i]) for rect in rects):
            selected.append(i)
            rects.append(carpet.rectangle(i))
    if check_multiplicity:
        bound = 2**carpet.metric.dimension
        mult = multiplicity(rects)
        if mult > bound:
            raise AssertionError(
                f"covering multiplicity {mult} exceeds the 2^d bound {bound}"
            )
    return selected


_ENUM_POINT_LIMIT = 2_000_000
_GRID_CELL_LIMIT = 100_000_000


def multiplicity(
    rects: Sequence[Rectangle],
    point_limit: int = _ENUM_POINT_LIMIT,
    cell_limit: int = _GRID_CELL_LIMIT,
) -> int:
    """Maximum number of rectangles covering any single lattice point.

    Small unions are enumerated directly; larger ones use a compressed
    grid over the coordinate breakpoints (the count is constant on each
    cell).  Unions beyond ``cell_limit`` cells raise SizeLimitError.
    """
    if not rects:
        return 0
    d = rects[0].dimension
    intervals = [r.intervals() for r in rects]
    total_points = sum(r.cardinality() for r in rects)
    if total_points <= point_limit:
        return _multiplicity_by_enumeration(intervals, d)
    return _multiplicity_by_grid(intervals, d, cell_limit)


def _multiplicity_by_enumeration(intervals, d: int) -> int:
    los = [min(iv[k][0] for iv in intervals) for k in range(d)]
    dims = [max(iv[k][1] for iv in intervals) - los[k] + 1 for k in range(d)]
    chunks = []
    for iv in intervals:
        axes = [np.arange(lo - los[k], hi - los[k] + 1) for k, (lo, hi) in enumerate(iv)]
        mesh = np.meshgrid(*axes, indexing="ij", sparse=False)
        flat = np.ravel_multi_index([m.ravel() for m in mesh], dims)
        chunks.append(flat)
    _, counts = np.unique(np.concatenate(chunks), return_counts=True)
    return int(counts.max())


def _multiplicity_by_grid(intervals, d: int, cell_limit: int) -> int:
    axes = []
    for k in range(d):
        cuts = set()
        for iv in intervals:
            cuts.add(iv[k][0])
            cuts.add(iv[k][1] + 1)
        axes.append(np.array(sorted(cuts), dtype=np.int64))
    shape = tuple(len(a) - 1 for a in axes)
    cells = 1
    for s in shape:
        cells *= s
    if cells > cell_limit:
        raise SizeLimitError(f"union needs {cells} grid cells (limit {cell_limit})")
    counts = np.zeros(shape, dtype=np.int32)
    for iv in intervals:
        slicer = tuple(
            slice(
                int(np.searchsorted(axes[k], iv[k][0])),
                int(np.searchsorted(axes[k], iv[k][1] + 1)),
            )
            for k in range(d)
        )
        counts[slicer] += 1
    return int(counts.max())


def rectangle_set_distance(a: Rectangle, b: Rectangle) -> int:
    """Min over point pairs of the metric distance between two rectangles.

    Computed in closed form: the per-coordinate gap between the boxes is
    achievable independently in each coordinate, so the distance is the
    radius needed to cover the gap vector.
    """
    gaps = tuple(
        max(0, abs(ca - cb) - ha - hb)
        for (ca, ha), (cb, hb) in zip(
            zip(a.center, a.halfwidths()), zip(b.center, b.halfwidths())
        )
    )
    return a.metric.radius_for_offsets(gaps)


def box_shell_distance(a: Rectangle, b: Rectangle) -> int:
    """Min metric distance between the boundary shells of two rectangles.

    Each shell is a union of 2d faces and every face is a product set, so
    the minimum is taken over face pairs, each solved coordinate-wise.
    """
    metric = a.metric
    best: int | None = None
    for fa in _faces(a):
        for fb in _faces(b):
            gaps = []
            for (clo, chi), (dlo, dhi) in zip(fa, fb):
                if chi < dlo:
                    gaps.append(dlo - chi)
                elif dhi < clo:
                    gaps.append(clo - dhi)
                else:
                    gaps.append(0)
            r = metric.radius_for_offsets(tuple(gaps))
            if best is None or r < best:
                best = r
            if best == 0:
                return 0
    assert best is not None
    return best


def _faces(rect: Rectangle):
    ivs = rect.intervals()
    for axis in range(rect.dimension):
        for side in range(2):
            pinned = ivs[axis][side]
            yield tuple(
                (pinned, pinned) if k == axis else ivs[k]
                for k in range(rect.dimension)
            )


def well_separated_coloring(carpet: Carpet) -> list[list[int]]:
    """Split a covering selection into well-separated color classes.

    The incremental selection is colored greedily: ball k+1 avoids the
    colors of earlier balls that meet the doubled ball 2*B_r at its centre,
    where r is the radius of ball k.  At most 2^(3d) + 1 colors are needed;
    within each class any two balls are more than the class rmin apart.
    """
    order = incremental_subcarpet(carpet, check_multiplicity=False)
    chi = separation_color_bound(carpet.metric.dimension)
    color_of: dict[int, int] = {}
    rects = {i: carpet.rectangle(i) for i in order}
    for pos, idx in enumerate(order):
        if pos == 0:
            color_of[idx] = 0
            continue
        prev_radius = carpet.radii[order[pos - 1]]
        probe = Rectangle(carpet.points[idx], prev_radius, carpet.metric, scale=2)
        forbidden = {
            color_of[j] for j in order[:pos] if boxes_intersect(rects[j], probe)
        }
        if len(forbidden) >= chi:
            raise AssertionError(
                f"coloring needs more than {chi} colors; covering bound violated"
            )
        color_of[idx] = min(c for c in range(chi) if c not in forbidden)
    n_colors = max(color_of.values()) + 1
    classes: list[list[int]] = [[] for _ in range(n_colors)]
    for idx in order:
        classes[color_of[idx]].append(idx)
    return classes


def is_well_separated(rects: Sequence[Rectangle]) -> bool:
    """Whether any two rectangles are more than the family rmin apart."""
    if len(rects) < 2:
        return True
    rmin = min(r.radius for r in rects)
    for a, b in itertools.combinations(rects, 2):
        if rectangle_set_distance(a, b) <= rmin:
            return False
    return True


def mass_cover_selection(
    carpet: Carpet, mass: DiscreteMassFunction
) -> list[int]:
    """A well-separated subfamily covering at least mass(E)/(2^(3d)+1).

    Takes the best color class of the separated coloring; the classes
    jointly cover E, so the heaviest one clears the pigeonhole bound.
    """
    support = set(carpet.points)
    for p in mass.points:
        if p not in support:
            raise ValueError("mass must be supported on the carpet's set")
    classes = well_separated_coloring(carpet)
    best: list[int] = []
    best_mass = -1.0
    for cls in classes:
        rects = [carpet.rectangle(i) for i in cls]
        covered = sum(
            w for p, w in mass.items() if any(r.contains(p) for r in rects)
        )
        if covered > best_mass:
            best_mass = covered
            best = cls
    return best


@dataclass(frozen=True)
class StackSelectionReport:
    """Outcome of checking a stack selection against both conclusions."""

    boxes_well_separated: bool
    covered_mass: float
    total_mass: float
    passed: bool


def verify_stack_selection(
    stack: Stack,
    mass: DiscreteMassFunction,
    selection: Sequence[tuple[int, int]],
    k: int,
    t: int,
) -> StackSelectionReport:
    """Check a candidate selection from levels >= k of a stack.

    ``selection`` lists (level, ball index) pairs with 1-based levels.
    Verifies that (i) the boundary shells of the selected balls are
    pairwise well-separated and (ii) the union of their 2r-boundaries,
    r = rmax of level k-1, carries more than half the total mass.
    This is a verifier only; constructing selections is out of scope.
    """
    if not 2 <= k <= stack.height:
        raise ValueError("level threshold k must satisfy 2 <= k <= height")
    if t < 0:
        raise ValueError("boundary thickness must be non-negative")
    if min(stack.carpets[0].radii) < 2 * t:
        raise ValueError("stack base level must have rmin >= 2t")
    rects = []
    for level, ball in selection:
        if not k <= level <= stack.height:
            raise ValueError(
                f"selection references level {level}, below the threshold {k}"
            )
        rects.append(stack.carpets[level - 1].rectangle(ball))

    if rects:
        rmin = min(r.radius for r in rects)
        separated = all(
            box_shell_distance(a, b) > rmin
            for a, b in itertools.combinations(rects, 2)
        )
    else:
        separated = True

    r_ref = max(stack.carpets[k - 2].radii)
    covered = 0.0
    for p, w in mass.items():
        if any(rect.in_thick_boundary(2 * r_ref, p) for rect in rects):
            covered += w
    total = mass.total
    passed = separated and covered > total / 2
    return StackSelectionReport(separated, covered, total, passed)


def find_stack_selection(
    stack: Stack,
    mass: DiscreteMassFunction,
    t: int,
    max_balls: int = 14,
) -> tuple[int, list[tuple[int, int]]] | None:
    """Exhaustive tiny-scale search for a selection passing the verifier.

    Tries every level threshold k and every subset of the balls in levels
    >= k, smallest subsets first.  Only usable when the stack holds at most
    ``max_balls`` candidate balls.
    """
    for k in range(2, stack.height + 1):
        pool = [
            (level, ball)
            for level in range(k, stack.height + 1)
            for ball in range(len(stack.carpets[level - 1]))
        ]
        if len(pool) > max_balls:
            raise SizeLimitError(
                f"{len(pool)} candidate balls; exhaustive search is capped at {max_balls}"
            )
        for size in range(1, len(pool) + 1):
            for subset in itertools.combinations(pool, size):
                report = verify_stack_selection(stack, mass, list(subset), k, t)
                if report.passed:
                    return k, list(subset)
    return None


_CHAIN_POINT_LIMIT = 5_000_000


def boundary_chain_check(
    metric: RectangularMetric,
    chain: Sequence[tuple[Sequence[int], int, int]],
    search_box: Rectangle,
    point_limit: int = _CHAIN_POINT_LIMIT,
) -> bool:
    """Whether a chain of thick boundaries has empty common intersection.

    ``chain`` lists (centre, radius, thickness) triples; each centre must
    lie in every earlier thick boundary (checked, ValueError otherwise).
    ``search_box`` must contain the first thick boundary and bounds the
    brute-force region.  Returns True iff no lattice point of the search
    box lies in all the thick boundaries.
    """
    if not chain:
        raise ValueError("chain must be non-empty")
    items = [
        (tuple(int(c) for c in z), int(r), int(t)) for z, r, t in chain
    ]
    rects = [Rectangle(z, r, metric) for z, r, _ in items]
    for i, (z, _, _) in enumerate(items):
        for j in range(i):
            zj, _, tj = items[j]
            if not rects[j].in_thick_boundary(tj, z):
                raise ValueError(
                    f"chain point {i} is not in the {tj}-boundary of element {j}"
                )
    if search_box.cardinality() > point_limit:
        raise SizeLimitError("search box is too large for brute force")

    z1, _, t1 = items[0]
    outer1 = [
        (c - (h + g), c + (h + g))
        for c, h, g in zip(
            z1, metric.halfwidths(items[0][1]), metric.halfwidths(t1)
        )
    ]
    sb = search_box.intervals()
    for (lo, hi), (slo, shi) in zip(outer1, sb):
        if lo < slo or hi > shi:
            raise ValueError("search box must contain the first thick boundary")

    # A common point has to live in every outer box; intersect them first.
    region = list(sb)
    for (z, r, t) in items:
        hws = metric.halfwidths(r)
        tws = metric.halfwidths(t)
        region = [
            (max(lo, c - (h + g)), min(hi, c + (h + g)))
            for (lo, hi), c, h, g in zip(region, z, hws, tws)
        ]
    if any(lo > hi for lo, hi in region):
        return True
    for point in itertools.product(*(range(lo, hi + 1) for lo, hi in region)):
        if all(
            rects[i].in_thick_boundary(items[i][2], point)
            for i in range(len(items))
        ):
            return False
    return True


def coarse_scale(metric: RectangularMetric) -> int:
    """Smallest admissible base scale for boundary-chain radii conditions:
    R = 5*max(1, ceil(max_i 1/f_i(1))) + 1."""
    worst = max(1, *(-(-1 // f(1)) for f in metric.profiles))
    return 5 * worst + 1


def random_carpet(
    seed,
    metric: RectangularMetric,
    n_points: int,
    span: int,
    radius_max: int,
    radius_min: int = 0,
) -> Carpet:
    """Draw a carpet with distinct centres in [-span, span]^d.

    Deterministic for a fixed seed; reseeding with the same 64-bit integer
    reproduces the carpet exactly.
    """
    rng = np.random.default_rng(seed)
    d = metric.dimension
    if n_points > (2 * span + 1) ** d:
        raise ValueError(
            f"cannot place {n_points} distinct points in a span-{span} box"
        )
    points: list[tuple[int, ...]] = []
    seen = set()
    while len(points) < n_points:
        p = tuple(int(v) for v in rng.integers(-span, span + 1, size=d))
        if p not in seen:
            seen.add(p)
            points.append(p)
    radii = tuple(int(r) for r in rng.integers(radius_min, radius_max + 1, size=n_points))
    return Carpet(metric, tuple(points), radii)


def carpet_records(carpet: Carpet) -> list[str]:
    """Serialize a carpet as line-oriented records "d r z1 ... zd"."""
    d = carpet.metric.dimension
    return [
        " ".join([str(d), str(r)] + [str(c) for c in p])
        for p, r in zip(carpet.points, carpet.radii)
    ]


def carpet_from_records(metric: RectangularMetric, lines: Iterable[str]) -> Carpet:
    """Rebuild a carpet from its serialized records."""
    points = []
    radii = []
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        d = int(parts[0])
        if d != metric.dimension:
            raise ValueError("record dimension does not match the metric")
        if len(parts) != 2 + d:
            raise ValueError(f"malformed carpet record: {line!r}")
        radii.append(int(parts[1]))
        points.append(tuple(int(v) for v in parts[2:]))
    return Carpet(metric, tuple(points), tuple(radii))
