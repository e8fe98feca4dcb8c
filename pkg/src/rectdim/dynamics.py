"""Non-singular odometer dynamics on truncated binary sequence spaces.

An odometer adds one with carry to a binary expansion.  With an
inhomogeneous Bernoulli product measure (bit i equals 0 with probability
p_i) the map is non-singular and its Radon-Nikodym weights are finite
products of single-bit ratios; all weights are handled in natural-log
space.  The infinite product space is truncated at a finite depth N: any
carry or borrow that would cross the horizon raises
:class:`HorizonOverflowError` instead of wrapping silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "HorizonOverflowError",
    "OdometerPoint",
    "OdometerSystem",
    "InvertedOdometer",
    "ProductSystem",
    "CylinderFunction",
    "CylinderSum",
    "cylinder_function",
]

# Log Radon-Nikodym weights are plain floats throughout; a value w stands
# for the weight exp(w) = d(mu o T^j)/d(mu) at the point in question.


class HorizonOverflowError(RuntimeError):
    """A carry or borrow crossed the truncation depth.

    Callers should resample the point or enlarge the depth; the error is
    always surfaced, never wrapped around.
    """


class OdometerPoint:
    """A point of the truncated space: N bits, least significant first."""

    __slots__ = ("bits",)

    def __init__(self, bits: Sequence[int]):
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("bits must be a non-empty vector")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("bits must be 0 or 1")
        arr.flags.writeable = False
        self.bits = arr

    @property
    def depth(self) -> int:
        return int(self.bits.size)

    @property
    def value(self) -> int:
        """The integer sum of bits[i] * 2^i (exact, any depth)."""
        return int.from_bytes(
            np.packbits(self.bits, bitorder="little").tobytes(), "little"
        )

    @classmethod
    def from_value(cls, value: int, depth: int) -> "OdometerPoint":
        if not 0 <= value < (1 << depth):
            raise ValueError("value out of range for the given depth")
        return cls([(value >> i) & 1 for i in range(depth)])

    def __eq__(self, other) -> bool:
        return isinstance(other, OdometerPoint) and np.array_equal(
            self.bits, other.bits
        )

    def __repr__(self) -> str:
        shown = "".join(str(b) for b in self.bits[:16])
        tail = "..." if self.depth > 16 else ""
        return f"OdometerPoint({shown}{tail}, depth={self.depth})"


@dataclass(frozen=True)
class OdometerSystem:
    """Binary odometer with coordinate measures mu_i(0) = p_i.

    Non-singularity requires every p_i strictly inside (0, 1).  Systems are
    immutable; sampling takes an explicit seed, so concurrent use needs no
    coordination.
    """

    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "probabilities", probs)
        if not probs:
            raise ValueError("depth must be at least 1")
        if any(not 0.0 < p < 1.0 for p in probs):
            raise ValueError("coordinate measure must lie strictly inside (0,1)")

    @classmethod
    def constant(cls, p: float, depth: int) -> "OdometerSystem":
        return cls((float(p),) * depth)

    @property
    def depth(self) -> int:
        return len(self.probabilities)

    @cached_property
    def log_p(self) -> np.ndarray:
        return np.log(np.array(self.probabilities))

    @cached_property
    def log_q(self) -> np.ndarray:
        return np.log1p(-np.array(self.probabilities))

    def sample_point(self, seed) -> OdometerPoint:
        """Draw bits independently, bit i = 0 with probability p_i."""
        rng = np.random.default_rng(seed)
        bits = (rng.random(self.depth) >= np.array(self.probabilities)).astype(
            np.uint8
        )
        return OdometerPoint(bits)

    def log_mass(self, x: OdometerPoint) -> float:
        """log of the product measure of x's cylinder of full depth."""
        self._check(x)
        return float(np.where(x.bits == 1, self.log_q, self.log_p).sum())

    def apply_power(self, x: OdometerPoint, j: int) -> OdometerPoint:
        """T^j x, i.e. the bits of value(x) + j.

        Raises HorizonOverflowError when the carry or borrow would cross
        the truncation depth.
        """
        self._check(x)
        v = x.value + int(j)
        if not 0 <= v < (1 << self.depth):
            raise HorizonOverflowError(
                f"power {j} moves the point outside the depth-{self.depth} horizon"
            )
        return OdometerPoint.from_value(v, self.depth)

    def log_cocycle(self, x: OdometerPoint, j: int) -> float:
        """log d(mu o T^j)/d(mu) at x; the sum of flipped-bit log ratios."""
        y = self.apply_power(x, j)
        changed = x.bits != y.bits
        if not changed.any():
            return 0.0
        ylog = np.where(y.bits == 1, self.log_q, self.log_p)
        xlog = np.where(x.bits == 1, self.log_q, self.log_p)
        return float((ylog[changed] - xlog[changed]).sum())

    def invert(self) -> "InvertedOdometer":
        """The inverse action T^{-1}; same space, powers negated."""
        return InvertedOdometer(self)

    def _check(self, x: OdometerPoint) -> None:
        if x.depth != self.depth:
            raise ValueError("point depth does not match the system depth")


@dataclass(frozen=True)
class InvertedOdometer:
    """Action handle for T^{-1}: every power is applied with its sign flipped."""

    base: OdometerSystem

    @property
    def depth(self) -> int:
        return self.base.depth

    @property
    def probabilities(self) -> tuple[float, ...]:
        return self.base.probabilities

    def sample_point(self, seed) -> OdometerPoint:
        return self.base.sample_point(seed)

    def apply_power(self, x: OdometerPoint, j: int) -> OdometerPoint:
        return self.base.apply_power(x, -j)

    def log_cocycle(self, x: OdometerPoint, j: int) -> float:
        return self.base.log_cocycle(x, -j)

    def invert(self) -> OdometerSystem:
        return self.base


@dataclass(frozen=True)
class ProductSystem:
    """d independent odometers acted on coordinatewise by Z^d:
    u . (x_1,...,x_d) = (T_1^{u_1} x_1, ..., T_d^{u_d} x_d)."""

    components: tuple[OdometerSystem, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("product system needs at least one component")

    @property
    def dimension(self) -> int:
        return len(self.components)

    def sample_point(self, seed) -> list[OdometerPoint]:
        """One point per component, derived deterministically from ``seed``."""
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = ss.spawn(self.dimension)
        return [
            comp.sample_point(child)
            for comp, child in zip(self.components, children)
        ]

    def apply(self, xs: Sequence[OdometerPoint], u: Sequence[int]) -> list[OdometerPoint]:
        self._check(xs, u)
        return [
            comp.apply_power(x, int(j))
            for comp, x, j in zip(self.components, xs, u)
        ]

    def log_cocycle(self, xs: Sequence[OdometerPoint], u: Sequence[int]) -> float:
        """log weight of the group element u at x: the component sum."""
        self._check(xs, u)
        return float(
            sum(
                comp.log_cocycle(x, int(j))
                for comp, x, j in zip(self.components, xs, u)
            )
        )

    def _check(self, xs, u) -> None:
        if len(xs) != self.dimension or len(u) != self.dimension:
            raise ValueError("point list and exponent must match the dimension")


class CylinderFunction:
    """Indicator of fixed leading bit patterns, one pattern per component.

    Evaluates to 1 iff component i matches its pattern on the first k_i
    bits; an empty pattern matches everything.  The exact integral under
    the product measure is attached.
    """

    def __init__(self, system: ProductSystem, patterns: Sequence[Sequence[int]]):
        if len(patterns) != system.dimension:
            raise ValueError("one pattern per component is required")
        pats = tuple(tuple(int(b) for b in pat) for pat in patterns)
        for comp, pat in zip(system.components, pats):
            if len(pat) > comp.depth:
                raise ValueError("pattern longer than the component depth")
            if any(b not in (0, 1) for b in pat):
                raise ValueError("patterns must consist of bits")
        self.system = system
        self.patterns = pats
        integral = 1.0
        for comp, pat in zip(system.components, pats):
            for i, b in enumerate(pat):
                p = comp.probabilities[i]
                integral *= (1.0 - p) if b else p
        self.integral = integral

    @property
    def l1_norm(self) -> float:
        return self.integral

    def __call__(self, xs: Sequence[OdometerPoint]) -> float:
        if len(xs) != self.system.dimension:
            raise ValueError("point list must match the system dimension")
        for x, pat in zip(xs, self.patterns):
            k = len(pat)
            if k and not np.array_equal(x.bits[:k], np.array(pat, dtype=np.uint8)):
                return 0.0
        return 1.0


class CylinderSum:
    """A finite linear combination sum_k a_k * phi_k of cylinder functions."""

    def __init__(self, terms: Sequence[tuple[float, CylinderFunction]]):
        if not terms:
            raise ValueError("combination needs at least one term")
        self.terms = tuple((float(a), phi) for a, phi in terms)
        self.system = self.terms[0][1].system
        if any(phi.system is not self.system for _, phi in self.terms):
            raise ValueError("all terms must share one system")
        self.integral = sum(a * phi.integral for a, phi in self.terms)

    def __call__(self, xs: Sequence[OdometerPoint]) -> float:
        return sum(a * phi(xs) for a, phi in self.terms)


def cylinder_function(
    system: ProductSystem, patterns: Sequence[str | Sequence[int]]
) -> CylinderFunction:
    """Convenience builder; patterns may be bit strings like "01"."""
    parsed = [
        [int(ch) for ch in pat] if isinstance(pat, str) else pat
        for pat in patterns
    ]
    return CylinderFunction(system, parsed)
