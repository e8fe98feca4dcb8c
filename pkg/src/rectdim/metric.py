"""Rectangular metrics on the integer lattice Z^d.

A rectangular metric is a translation-invariant metric whose balls are
axis-aligned boxes.  It is specified by one half-width profile per
coordinate: a function f_i from integer radii to integer half-widths with
f_i(0) = 0, f_i strictly increasing, and f_i superadditive
(f_i(a+b) >= f_i(a) + f_i(b)).  The ball of radius r centred at z is then

    B_r(z) = z + prod_i [-floor(f_i(r)), floor(f_i(r))]

and the distance between u and v is the smallest radius r whose ball at u
contains v.  Superadditivity of the profiles gives the triangle inequality.

Half-widths are capped at 2**63 - 1 so every coordinate fits in an int64;
evaluations past the cap raise :class:`ProfileRangeError`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import mpmath

__all__ = [
    "HALFWIDTH_LIMIT",
    "ProfileRangeError",
    "Profile",
    "linear_profile",
    "power_profile",
    "exp_profile",
    "table_profile",
    "profile_from_spec",
    "RectangularMetric",
    "metric_from_spec",
    "Rectangle",
    "boxes_intersect",
]

HALFWIDTH_LIMIT = 2**63 - 1

DEFAULT_VALIDATION_RANGE = 64


class ProfileRangeError(OverflowError):
    """A profile half-width left the representable integer range."""


@lru_cache(maxsize=128)
def _exp_minus_one_floor(r: int) -> int:
    # floor(e^r - 1) computed with enough guard bits that the floor is
    # exact; double precision already misses it at r = 37.
    if r == 0:
        return 0
    with mpmath.workprec(2 * r + 64):
        return int(mpmath.floor(mpmath.exp(r) - 1))


@dataclass(frozen=True)
class Profile:
    """One coordinate's half-width profile.

    ``kind`` is one of ``linear`` (k*r), ``power`` (floor(r^p)),
    ``exp`` (floor(e^r - 1)) or ``table`` (explicit values).
    """

    kind: str
    param: float = 0.0
    table: tuple[int, ...] = ()

    def __call__(self, r: int) -> int:
        if r < 0:
            raise ValueError("radius must be non-negative")
        if self.kind == "linear":
            if self.param.is_integer():
                value = int(self.param) * r
            else:
                value = math.floor(self.param * r)
        elif self.kind == "power":
            if self.param.is_integer():
                value = r**int(self.param)
            else:
                try:
                    value = math.floor(r**self.param)
                except OverflowError:
                    raise ProfileRangeError(
                        f"power profile overflows at radius {r}"
                    ) from None
        elif self.kind == "exp":
            if r * math.log2(math.e) > 63:
                raise ProfileRangeError(f"exp profile overflows at radius {r}")
            value = _exp_minus_one_floor(r)
        elif self.kind == "table":
            if r >= len(self.table):
                raise ProfileRangeError(
                    f"table profile has no entry for radius {r}"
                )
            value = self.table[r]
        else:  # pragma: no cover - factories guard this
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if value > HALFWIDTH_LIMIT:
            raise ProfileRangeError(
                f"{self.kind} profile half-width at radius {r} exceeds 2^63-1"
            )
        return value


def linear_profile(k: float = 1.0) -> Profile:
    """f(r) = floor(k*r); k >= 1 keeps the profile superadditive."""
    if not k >= 1:
        raise ValueError("linear profile requires slope >= 1")
    return Profile("linear", float(k))


def power_profile(p: float) -> Profile:
    """f(r) = floor(r^p)."""
    if not p >= 1:
        raise ValueError("power profile requires exponent >= 1")
    return Profile("power", float(p))


def exp_profile() -> Profile:
    """f(r) = floor(e^r - 1), the canonical exponentially growing side."""
    return Profile("exp")


def table_profile(values: Sequence[int]) -> Profile:
    """Explicit half-width table; entry r is the half-width at radius r."""
    table = tuple(int(v) for v in values)
    if len(table) < 2:
        raise ValueError("table profile needs entries for radii 0 and 1")
    if table[0] != 0:
        raise ValueError("table profile must start at half-width 0")
    if table[1] < 1:
        raise ValueError("table profile must reach half-width >= 1 at radius 1")
    for r in range(1, len(table) - 1):
        if table[r + 1] <= table[r]:
            raise ValueError(
                f"table profile must be strictly increasing for r >= 1 "
                f"(entries {r} and {r + 1})"
            )
    return Profile("table", table=table)


def profile_from_spec(spec: dict) -> Profile:
    """Build a profile from its config entry {"kind", "param", "table"}."""
    kind = spec.get("kind")
    if kind == "linear":
        return linear_profile(spec.get("param", 1))
    if kind == "power":
        if "param" not in spec:
            raise ValueError("power profile spec requires 'param'")
        return power_profile(spec["param"])
    if kind == "exp":
        return exp_profile()
    if kind == "table":
        if "table" not in spec:
            raise ValueError("table profile spec requires 'table'")
        return table_profile(spec["table"])
    raise ValueError(f"unknown profile kind {kind!r}")


@lru_cache(maxsize=1 << 18)
def _halfwidth(profile: Profile, r: int) -> int:
    return profile(r)


@dataclass(frozen=True)
class RectangularMetric:
    """A rectangular metric on Z^d, one half-width profile per coordinate.

    Profile sanity (strict growth, superadditivity, f(n) >= n*f(1)) is
    sampled at construction over radii up to ``validation_range``; analytic
    profiles satisfy these identically, so the sampling mainly guards
    user-supplied tables.  Instances are immutable and safe to share.
    """

    profiles: tuple[Profile, ...]
    validation_range: int = field(default=DEFAULT_VALIDATION_RANGE, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if not self.profiles:
            raise ValueError("metric needs at least one coordinate profile")
        for i, f in enumerate(self.profiles):
            self._validate_profile(i, f)

    @property
    def dimension(self) -> int:
        return len(self.profiles)

    def _validate_profile(self, i: int, f: Profile) -> None:
        if f(0) != 0:
            raise ValueError(f"profile {i}: f(0) must be 0")
        if f(1) < 1:
            raise ValueError(f"profile {i}: f(1) must be at least 1")
        # Find how far we can sample before the representable range ends.
        top = 1
        while top < 2 * self.validation_range:
            try:
                f(top + 1)
            except ProfileRangeError:
                break
            top += 1
        for r in range(1, top):
            if f(r + 1) <= f(r):
                raise ValueError(f"profile {i}: not strictly increasing at r={r}")
        f1 = f(1)
        for n in range(1, top + 1):
            if f(n) < n * f1:
                raise ValueError(f"profile {i}: f({n}) < {n}*f(1)")
        half = min(self.validation_range, top // 2 if top >= 2 else 1)
        for a in range(1, half + 1):
            for b in range(a, half + 1):
                if a + b > top:
                    break
                if f(a + b) < f(a) + f(b):
                    raise ValueError(
                        f"profile {i}: superadditivity fails at a={a}, b={b}"
                    )

    def halfwidths(self, r: int) -> tuple[int, ...]:
        """Per-coordinate half-widths floor(f_i(r)) of the radius-r ball."""
        if r < 0:
            raise ValueError("radius must be non-negative")
        return tuple(_halfwidth(f, r) for f in self.profiles)

    def ball(self, center: Sequence[int], r: int) -> "Rectangle":
        return Rectangle(tuple(int(c) for c in center), r, self)

    def distance(self, u: Sequence[int], v: Sequence[int]) -> int:
        """Smallest radius r with |u_i - v_i| <= floor(f_i(r)) for all i."""
        if len(u) != self.dimension or len(v) != self.dimension:
            raise ValueError("points must match the metric dimension")
        return self.radius_for_offsets(
            tuple(abs(int(a) - int(b)) for a, b in zip(u, v))
        )

    def radius_for_offsets(self, offsets: Sequence[int]) -> int:
        """Smallest r whose per-coordinate half-widths cover the offsets."""
        r = 0
        for f, g in zip(self.profiles, offsets):
            if g > 0:
                r = max(r, _min_radius(f, int(g)))
        return r


def _min_radius(f: Profile, g: int) -> int:
    # Smallest r with f(r) >= g; profiles are monotone, so search by
    # doubling then bisect.
    if g > HALFWIDTH_LIMIT:
        raise ProfileRangeError(f"offset {g} exceeds the half-width range")
    hi = 1
    while _halfwidth(f, hi) < g:
        hi *= 2
        if f.kind == "table" and hi >= len(f.table):
            if f.table[-1] < g:
                raise ProfileRangeError(
                    f"offset {g} is beyond the table profile's reach"
                )
            hi = len(f.table) - 1
            break
    lo = hi // 2
    while lo < hi:
        mid = (lo + hi) // 2
        if _halfwidth(f, mid) >= g:
            hi = mid
        else:
            lo = mid + 1
    return hi


def metric_from_spec(specs: Sequence[dict]) -> RectangularMetric:
    """Build a metric from the per-coordinate config entries."""
    return RectangularMetric(tuple(profile_from_spec(s) for s in specs))


@dataclass(frozen=True)
class Rectangle:
    """A ball lambda*B_r(z) of a rectangular metric.

    ``scale`` is the multiplier lambda: the rectangle's half-width in
    coordinate i is scale * floor(f_i(radius)).
    """

    center: tuple[int, ...]
    radius: int
    metric: RectangularMetric
    scale: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))
        if len(self.center) != self.metric.dimension:
            raise ValueError("center must match the metric dimension")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        if self.scale < 1:
            raise ValueError("scale must be a positive integer")

    @property
    def dimension(self) -> int:
        return self.metric.dimension

    def halfwidths(self) -> tuple[int, ...]:
        return tuple(self.scale * h for h in self.metric.halfwidths(self.radius))

    def intervals(self) -> tuple[tuple[int, int], ...]:
        """Closed per-coordinate intervals [lo_i, hi_i]."""
        return tuple(
            (c - h, c + h) for c, h in zip(self.center, self.halfwidths())
        )

    def contains(self, z: Sequence[int]) -> bool:
        if len(z) != self.dimension:
            raise ValueError("point must match the rectangle dimension")
        return all(
            abs(int(zi) - ci) <= h
            for zi, ci, h in zip(z, self.center, self.halfwidths())
        )

    def cardinality(self) -> int:
        """Number of lattice points, prod_i (2 * halfwidth_i + 1)."""
        card = 1
        for h in self.halfwidths():
            card *= 2 * h + 1
        return card

    def scaled(self, factor: int) -> "Rectangle":
        """The rectangle with every half-width multiplied by ``factor``."""
        if factor < 1:
            raise ValueError("scale factor must be a positive integer")
        return Rectangle(self.center, self.radius, self.metric, self.scale * factor)

    def lattice_points(self) -> Iterator[tuple[int, ...]]:
        """Iterate all lattice points; caller is responsible for the size."""
        return itertools.product(
            *(range(lo, hi + 1) for lo, hi in self.intervals())
        )

    def boundary_points(self) -> Iterator[tuple[int, ...]]:
        """Lattice points on the topological boundary of the box."""
        hws = self.halfwidths()
        for z in self.lattice_points():
            if any(abs(zi - ci) == h for zi, ci, h in zip(z, self.center, hws)):
                yield z

    def _thick_widths(self, t: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        if self.scale != 1:
            raise ValueError("thick boundaries are defined for unscaled balls")
        if t < 0:
            raise ValueError("boundary thickness must be non-negative")
        hws = self.metric.halfwidths(self.radius)
        tws = self.metric.halfwidths(t)
        return hws, tws

    def in_thick_boundary(self, t: int, z: Sequence[int]) -> bool:
        """Whether z lies within metric distance t of the boundary box.

        Closed form: |z_i - c_i| <= f_i(r) + f_i(t) for every coordinate and
        |z_i - c_i| >= f_i(r) - f_i(t) for at least one.  This is exactly the
        union of t-balls centred on boundary points.
        """
        if len(z) != self.dimension:
            raise ValueError("point must match the rectangle dimension")
        hws, tws = self._thick_widths(t)
        offsets = [abs(int(zi) - ci) for zi, ci in zip(z, self.center)]
        if any(o > h + g for o, h, g in zip(offsets, hws, tws)):
            return False
        return any(o >= h - g for o, h, g in zip(offsets, hws, tws))

    def thick_boundary_count(self, t: int) -> int:
        """Number of lattice points in the t-boundary."""
        hws, tws = self._thick_widths(t)
        outer = 1
        inner = 1
        for h, g in zip(hws, tws):
            outer *= 2 * (h + g) + 1
            inner *= max(0, 2 * (h - g) - 1)
        return outer - inner


def boxes_intersect(a: Rectangle, b: Rectangle) -> bool:
    """Whether two rectangles share a lattice point (axis-wise overlap)."""
    for (ca, ha), (cb, hb) in zip(
        zip(a.center, a.halfwidths()), zip(b.center, b.halfwidths())
    ):
        if abs(ca - cb) > ha + hb:
            return False
    return True
