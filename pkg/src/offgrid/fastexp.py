"""Fast approximate exponentiation using only products and square roots.

Integer powers come from the binary expansion of the exponent
(square-and-multiply). Fractional powers are approximated by a dyadic
rational ``w / 2**i`` built one bit at a time, each step multiplying or
dividing by the next successive square root of the base.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "DyadicExponent",
    "OpCounter",
    "int_pow",
    "dyadic_frac_pow",
    "fast_pow",
    "required_depth",
    "relative_envelope",
]


@dataclass(frozen=True)
class DyadicExponent:
    """A dyadic rational ``sum_j signs[j] * 2**-(j+1)``.

    ``signs[0]`` is always +1. A trailing 0 records that the target was
    matched exactly and the walk stopped early.
    """

    signs: tuple[int, ...]

    def __post_init__(self):
        if not self.signs or self.signs[0] != 1:
            raise ValueError("first sign must be +1")
        if any(s not in (-1, 0, 1) for s in self.signs):
            raise ValueError("signs must be in {-1, 0, +1}")
        if 0 in self.signs[:-1]:
            raise ValueError("0 may only appear as the final sign")

    @property
    def depth(self) -> int:
        return len(self.signs)

    @property
    def value(self) -> Fraction:
        return sum(
            (Fraction(s, 2 ** (j + 1)) for j, s in enumerate(self.signs)),
            Fraction(0),
        )

    @property
    def exact(self) -> bool:
        return self.signs[-1] == 0

    def __float__(self) -> float:
        return float(self.value)

    @classmethod
    def approximate(cls, target: float | Fraction, depth: int) -> "DyadicExponent":
        """Sign sequence approximating ``target`` in (0, 1) to within 2**-depth."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        target = Fraction(target)
        signs = [1]
        value = Fraction(1, 2)
        if value == target:
            return cls((1, 0))
        for j in range(2, depth + 1):
            step = Fraction(1, 2**j)
            if value < target:
                signs.append(1)
                value += step
            else:
                signs.append(-1)
                value -= step
            if value == target:
                signs.append(0)
                break
        return cls(tuple(signs))


@dataclass
class OpCounter:
    """Instrumentation for operation-count assertions."""

    sqrts: int = 0
    mults: int = 0
    divs: int = 0

    def reset(self):
        self.sqrts = self.mults = self.divs = 0


def _check_finite(value: float, what: str) -> float:
    if math.isinf(value):
        raise OverflowError(f"{what} overflowed to infinity")
    return value


def int_pow(b: float, z: int, counter: OpCounter | None = None) -> float:
    """Return ``b**z`` by left-to-right square-and-multiply.

    Walks the binary digits of ``z`` after the leading one; each digit costs
    one squaring plus one extra multiply when the digit is set.
    """
    if b <= 0 or not math.isfinite(b):
        raise ValueError(f"base must be positive and finite, got {b!r}")
    if z < 0 or int(z) != z:
        raise ValueError(f"exponent must be a nonnegative integer, got {z!r}")
    z = int(z)
    if z == 0:
        return 1.0
    result = b
    for bit in bin(z)[3:]:
        result = result * result
        if counter is not None:
            counter.mults += 1
        if bit == "1":
            result = result * b
            if counter is not None:
                counter.mults += 1
    return _check_finite(result, f"{b}**{z}")


def dyadic_frac_pow(
    b: float,
    f: float,
    depth: int,
    *,
    exact_zero: bool = True,
    counter: OpCounter | None = None,
) -> tuple[float, DyadicExponent | None]:
    """Approximate ``b**f`` for ``f`` in [0, 1) with a dyadic exponent.

    Returns the power and the exponent actually used. The accumulator starts
    at ``sqrt(b)`` (exponent 1/2); every later step takes one more square
    root and multiplies or divides by it depending on which side of ``f``
    the running exponent sits. The walk exits early on an exact match.

    With ``exact_zero`` (the default) ``f == 0`` short-circuits to ``(1.0,
    None)``. Otherwise the walk runs to ``depth`` and returns the smallest
    reachable dyadic, ``2**-depth``.
    """
    if b <= 0 or not math.isfinite(b):
        raise ValueError(f"base must be positive and finite, got {b!r}")
    if not 0 <= f < 1:
        raise ValueError(f"fractional exponent must be in [0, 1), got {f!r}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if f == 0 and exact_zero:
        return 1.0, None

    target = Fraction(f)
    root = math.sqrt(b)
    if counter is not None:
        counter.sqrts += 1
    acc = root
    num, den = 1, 2
    signs = [1]
    if Fraction(num, den) == target:
        return acc, DyadicExponent((1, 0))

    for _ in range(2, depth + 1):
        root = math.sqrt(root)
        if counter is not None:
            counter.sqrts += 1
        num, den = 2 * num, 2 * den
        if Fraction(num, den) < target:
            num += 1
            acc *= root
            signs.append(1)
            if counter is not None:
                counter.mults += 1
        else:
            num -= 1
            acc /= root
            signs.append(-1)
            if counter is not None:
                counter.divs += 1
        if Fraction(num, den) == target:
            signs.append(0)
            break
    return acc, DyadicExponent(tuple(signs))


def fast_pow(
    b: float,
    p: float,
    depth: int,
    *,
    counter: OpCounter | None = None,
) -> float:
    """Approximate ``b**p`` using only multiplications and square roots.

    The result lies between ``b**(p - 2**-depth)`` and ``b**(p + 2**-depth)``,
    so its relative error is at most ``relative_envelope(b, depth)``.
    """
    if b <= 0 or not math.isfinite(b):
        raise ValueError(f"base must be positive and finite, got {b!r}")
    if p <= 0 or not math.isfinite(p):
        raise ValueError(f"exponent must be positive and finite, got {p!r}")
    whole = math.floor(p)
    frac = p - whole
    integral = int_pow(b, whole, counter=counter)
    fractional, _ = dyadic_frac_pow(b, frac, depth, counter=counter)
    result = integral * fractional
    if counter is not None and whole > 0 and frac > 0:
        counter.mults += 1
    _check_finite(result, f"{b}**{p}")
    if result == 0.0:
        raise ArithmeticError(f"{b}**{p} underflowed to zero")
    return result


def relative_envelope(b: float, depth: int) -> float:
    """Worst-case relative error ``max(b, 1/b)**(2**-depth) - 1``."""
    return math.expm1(abs(math.log(b)) * 2.0**-depth)


def required_depth(b: float, eps: float) -> int:
    """Smallest depth whose relative error envelope for base ``b`` is <= eps."""
    if b <= 0 or not math.isfinite(b):
        raise ValueError(f"base must be positive and finite, got {b!r}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if b == 1:
        return 0
    log_b = abs(math.log(b))
    log_1p = math.log1p(eps)
    # eps often arrives as exp(x) - 1, which can sit an ulp below expm1(x)
    limit = eps * (1.0 + 1e-12)
    depth = max(0, math.ceil(math.log2(log_b / log_1p)))
    while depth > 0 and relative_envelope(b, depth - 1) <= limit:
        depth -= 1
    while relative_envelope(b, depth) > limit:
        depth += 1
    return depth
