"""Exact arithmetic in a truncated local ring o/w^K.

Two ring modes share one interface: Z/p^K (residues of the p-adic
integers, uniformizer p) and F_p[X]/(X^K) (truncated power series over
the prime field, uniformizer X).  Elements are stored in a canonical raw
form so equality is plain integer equality, and every operation is exact
at the working precision K.  The valuation val(x) lies in {0, ..., K}
with val(x) = K exactly when x is zero at this precision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Sequence

MIXED_CHAR = "zp"   # Z/p^K
EQUAL_CHAR = "fpx"  # F_p[X]/(X^K)

# EqualChar elements pack their K base-p coefficients into one integer,
# one coefficient per 20-bit slot.  Convolution coefficients of a product
# stay far below 2^20, so one integer multiply computes the truncated
# polynomial product with no carries between slots.
_BITS = 20
_SLOT = 1 << _BITS
_SLOT_MASK = _SLOT - 1


class RingError(ValueError):
    pass


class RingMismatch(RingError):
    pass


class NonUnit(RingError):
    pass


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    d = 3
    while d * d <= p:
        if p % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class RingSpec:
    """A truncated local ring: mode, residue characteristic p, precision K."""

    mode: str
    p: int
    precision: int

    def __post_init__(self):
        if self.mode not in (MIXED_CHAR, EQUAL_CHAR):
            raise RingError(f"unknown ring mode {self.mode!r}")
        if not _is_prime(self.p):
            raise RingError(f"p must be prime, got {self.p}")
        if self.precision < 1:
            raise RingError(f"precision must be >= 1, got {self.precision}")
        if self.mode == MIXED_CHAR:
            object.__setattr__(self, "_modulus", self.p ** self.precision)
        else:
            # one bit per slot: the mod-2 digit reduction mask (p = 2 only)
            mask = 0
            for i in range(self.precision):
                mask |= 1 << (_BITS * i)
            object.__setattr__(self, "_low_mask", mask)
            # all bits of the first K slots: the truncation mask
            object.__setattr__(self, "_full_mask",
                               (1 << (_BITS * self.precision)) - 1)

    # -- basic structure ------------------------------------------------

    @property
    def is_mixed(self) -> bool:
        return self.mode == MIXED_CHAR

    @property
    def modulus(self) -> int:
        if not self.is_mixed:
            raise RingError("modulus only defined in mixed characteristic")
        return self._modulus

    def describe(self) -> dict:
        return {"mode": self.mode, "p": self.p, "precision": self.precision}

    @classmethod
    def from_json(cls, obj: dict) -> "RingSpec":
        return cls(obj["mode"], int(obj["p"]), int(obj["precision"]))

    def with_precision(self, m: int) -> "RingSpec":
        return RingSpec(self.mode, self.p, m)

    # -- raw element constructors ----------------------------------------

    @property
    def zero(self) -> int:
        return 0

    @property
    def one(self) -> int:
        return 1

    def from_int(self, v: int) -> int:
        """Canonical image of an integer (constant, in equal characteristic)."""
        if self.is_mixed:
            return v % self._modulus
        return v % self.p

    def from_coeffs(self, coeffs: Sequence[int]) -> int:
        """Element from power-series coefficients, lowest degree first."""
        if self.is_mixed:
            raise RingError("coefficient form only in equal characteristic")
        raw = 0
        for i, c in enumerate(coeffs[: self.precision]):
            raw |= (c % self.p) << (_BITS * i)
        return raw

    def to_coeffs(self, x: int) -> List[int]:
        if self.is_mixed:
            raise RingError("coefficient form only in equal characteristic")
        return [(x >> (_BITS * i)) & _SLOT_MASK for i in range(self.precision)]

    def uniformizer(self) -> int:
        return self.p if self.is_mixed else _SLOT

    def omega_pow(self, k: int) -> int:
        """Raw value of w^k; zero when k >= K."""
        if k >= self.precision:
            return 0
        return self.p ** k if self.is_mixed else 1 << (_BITS * k)

    # -- arithmetic ------------------------------------------------------

    def add(self, x: int, y: int) -> int:
        if self.is_mixed:
            return (x + y) % self._modulus
        if self.p == 2:
            return x ^ y
        return self._reduce_acc(x + y)

    def neg(self, x: int) -> int:
        if self.is_mixed:
            return (-x) % self._modulus
        if self.p == 2:
            return x
        out = 0
        p = self.p
        for i in range(self.precision):
            c = (x >> (_BITS * i)) & _SLOT_MASK
            if c:
                out |= (p - c) << (_BITS * i)
        return out

    def sub(self, x: int, y: int) -> int:
        if self.is_mixed:
            return (x - y) % self._modulus
        if self.p == 2:
            return x ^ y
        return self.add(x, self.neg(y))

    def mul(self, x: int, y: int) -> int:
        if self.is_mixed:
            return (x * y) % self._modulus
        if self.p == 2:
            return (x * y) & self._low_mask
        return self._reduce_acc(x * y)

    def _reduce_acc(self, t: int) -> int:
        """Reduce an unreduced slot-packed accumulator mod p, truncated at K."""
        out = 0
        p = self.p
        for i in range(self.precision):
            c = ((t >> (_BITS * i)) & _SLOT_MASK) % p
            if c:
                out |= c << (_BITS * i)
        return out

    def dot(self, xs: Sequence[int], ys: Sequence[int]) -> int:
        """Exact sum of products; the workhorse of matrix multiplication."""
        if self.is_mixed:
            return sum(a * b for a, b in zip(xs, ys)) % self._modulus
        t = sum(a * b for a, b in zip(xs, ys))
        if self.p == 2:
            return t & self._low_mask
        return self._reduce_acc(t)

    def pow(self, x: int, e: int) -> int:
        if e < 0:
            return self.pow(self.inv(x), -e)
        if self.is_mixed:
            return pow(x, e, self._modulus)
        result = self.one
        base = x
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    # -- valuation and units ----------------------------------------------

    def val(self, x: int) -> int:
        """Largest v <= K with w^v dividing x; val(0) = K."""
        if x == 0:
            return self.precision
        if self.is_mixed:
            v = 0
            p = self.p
            while x % p == 0:
                x //= p
                v += 1
            return v
        v = 0
        while (x >> (_BITS * v)) & _SLOT_MASK == 0:
            v += 1
        return v

    def is_unit(self, x: int) -> bool:
        return self.val(x) == 0

    def inv(self, x: int) -> int:
        if not self.is_unit(x):
            raise NonUnit(f"cannot invert element of valuation {self.val(x)}")
        if self.is_mixed:
            return pow(x, -1, self._modulus)
        # Triangular solve: b_0 = a_0^{-1}, then each higher coefficient is
        # forced by requiring the product's coefficient to vanish.
        p = self.p
        a = self.to_coeffs(x)
        a0inv = pow(a[0], -1, p)
        b = [a0inv] + [0] * (self.precision - 1)
        for d in range(1, self.precision):
            s = sum(a[i] * b[d - i] for i in range(1, d + 1)) % p
            b[d] = (-a0inv * s) % p
        return self.from_coeffs(b)

    # -- precision shifts ---------------------------------------------------

    def shift_up(self, x: int, k: int) -> int:
        """Multiply by w^k."""
        if k == 0:
            return x
        if k >= self.precision:
            return 0
        if self.is_mixed:
            return (x * self.p ** k) % self._modulus
        return (x << (_BITS * k)) & self._full_mask

    def shift_down(self, x: int, k: int) -> int:
        """Exact division by w^k; requires val(x) >= k."""
        if k == 0:
            return x
        if self.val(x) < k:
            raise RingError("element not divisible by w^k")
        if self.is_mixed:
            return x // self.p ** k
        return x >> (_BITS * k)

    def reduce_raw(self, x: int, m: int) -> int:
        """Image of x in the precision-m quotient ring."""
        if m > self.precision:
            raise RingError("cannot reduce to higher precision")
        if self.is_mixed:
            return x % (self.p ** m)
        return x & ((1 << (_BITS * m)) - 1)

    # -- serialization, enumeration, sampling -------------------------------

    def encode(self, x: int) -> object:
        """JSON encoding: decimal string (mixed) or coefficient list (equal)."""
        if self.is_mixed:
            return str(x)
        return self.to_coeffs(x)

    def decode(self, obj: object) -> int:
        if self.is_mixed:
            if not isinstance(obj, str):
                raise RingError(f"mixed-characteristic scalar must be a string, got {obj!r}")
            v = int(obj)
            if not 0 <= v < self._modulus:
                raise RingError(f"scalar {v} out of canonical range")
            return v
        if not isinstance(obj, (list, tuple)):
            raise RingError(f"equal-characteristic scalar must be a list, got {obj!r}")
        if any(not 0 <= int(c) < self.p for c in obj):
            raise RingError("coefficient out of range")
        return self.from_coeffs([int(c) for c in obj])

    def size(self) -> int:
        return self.p ** self.precision

    def iter_all(self) -> Iterator[int]:
        if self.is_mixed:
            yield from range(self._modulus)
            return
        for digits in itertools.product(range(self.p), repeat=self.precision):
            raw = 0
            for i, c in enumerate(digits):
                raw |= c << (_BITS * i)
            yield raw

    def iter_units(self) -> Iterator[int]:
        for x in self.iter_all():
            if self.is_unit(x):
                yield x

    def random_raw(self, rng) -> int:
        if self.is_mixed:
            return rng.randrange(self._modulus)
        return self.from_coeffs([rng.randrange(self.p) for _ in range(self.precision)])

    def random_unit(self, rng) -> int:
        while True:
            x = self.random_raw(rng)
            if self.is_unit(x):
                return x

    def norm(self, x: int) -> "NormValue":
        return NormValue.from_valuation(self, self.val(x))

    def scalar(self, raw: int) -> "Scalar":
        return Scalar(self, raw)


@dataclass(frozen=True)
class Scalar:
    """A ring element in canonical form, carrying its ring."""

    ring: RingSpec
    raw: int

    def _check(self, other: "Scalar") -> None:
        if self.ring != other.ring:
            raise RingMismatch("scalars from different rings")

    def __add__(self, other: "Scalar") -> "Scalar":
        self._check(other)
        return Scalar(self.ring, self.ring.add(self.raw, other.raw))

    def __sub__(self, other: "Scalar") -> "Scalar":
        self._check(other)
        return Scalar(self.ring, self.ring.sub(self.raw, other.raw))

    def __mul__(self, other: "Scalar") -> "Scalar":
        self._check(other)
        return Scalar(self.ring, self.ring.mul(self.raw, other.raw))

    def __neg__(self) -> "Scalar":
        return Scalar(self.ring, self.ring.neg(self.raw))

    def inv(self) -> "Scalar":
        return Scalar(self.ring, self.ring.inv(self.raw))

    def val(self) -> int:
        return self.ring.val(self.raw)

    def norm(self) -> "NormValue":
        return self.ring.norm(self.raw)

    def is_zero(self) -> bool:
        return self.raw == 0

    def __repr__(self) -> str:
        if self.ring.is_mixed:
            return f"Scalar({self.raw} mod {self.ring.p}^{self.ring.precision})"
        coeffs = self.ring.to_coeffs(self.raw)
        return f"Scalar({coeffs} over F_{self.ring.p}[X]/(X^{self.ring.precision}))"


@dataclass(frozen=True)
class NormValue:
    """An ultrametric norm p^{-exponent}, possibly saturated at precision K.

    Saturated means "<= p^{-K}, indistinguishable from 0 at this precision";
    saturated values compare below every unsaturated value with exponent < K.
    Exponents are integers for scalar/matrix norms; rationals occur only in
    cyclotomic lower-bound certificates.
    """

    p: int
    K: int
    exponent: Fraction
    saturated: bool = False

    @classmethod
    def from_valuation(cls, ring: RingSpec, v) -> "NormValue":
        v = Fraction(v)
        if v >= ring.precision:
            return cls(ring.p, ring.precision, Fraction(ring.precision), True)
        return cls(ring.p, ring.precision, v, False)

    @classmethod
    def one(cls, ring: RingSpec) -> "NormValue":
        return cls(ring.p, ring.precision, Fraction(0), False)

    @classmethod
    def saturated_for(cls, ring: RingSpec) -> "NormValue":
        return cls(ring.p, ring.precision, Fraction(ring.precision), True)

    def _key(self):
        return math.inf if self.saturated else self.exponent

    def _check(self, other: "NormValue") -> None:
        if self.p != other.p:
            raise RingMismatch("norms over different residue characteristics")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NormValue):
            return NotImplemented
        self._check(other)
        return self._key() == other._key()

    def __hash__(self):
        return hash((self.p, self._key()))

    # Ordering is by the real value p^{-exponent}: larger exponent = smaller norm.
    def __lt__(self, other: "NormValue") -> bool:
        self._check(other)
        return self._key() > other._key()

    def __le__(self, other: "NormValue") -> bool:
        self._check(other)
        return self._key() >= other._key()

    def __gt__(self, other: "NormValue") -> bool:
        self._check(other)
        return self._key() < other._key()

    def __ge__(self, other: "NormValue") -> bool:
        self._check(other)
        return self._key() <= other._key()

    def __mul__(self, other: "NormValue") -> "NormValue":
        self._check(other)
        if self.saturated or other.saturated:
            return NormValue(self.p, min(self.K, other.K), Fraction(min(self.K, other.K)), True)
        return NormValue(self.p, min(self.K, other.K), self.exponent + other.exponent,
                         self.exponent + other.exponent >= min(self.K, other.K))

    def pow(self, e: int) -> "NormValue":
        if self.saturated:
            return self
        return NormValue(self.p, self.K, self.exponent * e, self.exponent * e >= self.K)

    @property
    def valuation(self) -> int:
        """Integer valuation, with K standing in for saturated."""
        if self.saturated:
            return self.K
        if self.exponent.denominator != 1:
            raise RingError("norm has a fractional exponent")
        return int(self.exponent)

    def encode(self) -> object:
        if self.saturated:
            return {"saturated": True, "precision": self.K}
        e = self.exponent
        return {"exponent": [e.numerator, e.denominator] if e.denominator != 1 else e.numerator}

    def __repr__(self) -> str:
        if self.saturated:
            return f"NormValue(<= {self.p}^-{self.K}, saturated)"
        return f"NormValue({self.p}^-{self.exponent})"


def norm_max(values, ring: RingSpec) -> NormValue:
    """Largest norm in an iterable; saturated when the iterable is empty."""
    best = None
    for v in values:
        if best is None or v > best:
            best = v
    if best is None:
        return NormValue.saturated_for(ring)
    return best
