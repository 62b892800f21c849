"""Prime-field arithmetic and roots of unity.

Everything here works on canonical residues in ``[0, q)`` for a prime ``q``
that fits in 64 bits.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

U64_MAX = (1 << 64) - 1

# Deterministic Miller-Rabin witnesses for every n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


class FieldError(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    if n % 2 == 0:
        return 2
    # Fixed seed keeps factorization (and thus generator choice) reproducible.
    rng = random.Random(n)
    while True:
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
        g = r = q = 1
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g


def prime_factors(n: int) -> list[int]:
    """Distinct prime factors of ``n`` in increasing order."""
    if n < 1:
        raise ValueError("n must be positive")
    found: set[int] = set()
    for p in (2, 3, 5, 7, 11, 13):
        while n % p == 0:
            found.add(p)
            n //= p
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if is_prime(m):
            found.add(m)
            continue
        f = _pollard_rho(m)
        stack.extend((f, m // f))
    return sorted(found)


@dataclass(frozen=True)
class PrimeField:
    modulus: int

    def __post_init__(self):
        q = self.modulus
        if not isinstance(q, int) or q > U64_MAX or not is_prime(q):
            raise FieldError(f"modulus {q!r} is not a prime below 2**64")

    @property
    def q(self) -> int:
        return self.modulus

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(int(value) % self.modulus, self)

    def inv(self, value: int) -> int:
        value %= self.modulus
        if value == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(value, -1, self.modulus)

    def generator(self) -> FieldElement:
        """Smallest generator of the multiplicative group."""
        q = self.modulus
        if q == 2:
            return self(1)
        factors = prime_factors(q - 1)
        for g in range(2, q):
            if all(pow(g, (q - 1) // p, q) != 1 for p in factors):
                return self(g)
        raise AssertionError("multiplicative group of a prime field is cyclic")

    def __repr__(self):
        return f"GF({self.modulus})"


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: PrimeField

    def __post_init__(self):
        if not 0 <= self.value < self.field.modulus:
            raise FieldError(f"{self.value} is not a canonical residue mod {self.field.modulus}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldError("operands live in different fields")
            return other.value
        if isinstance(other, int):
            return other % self.field.modulus
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.field(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.field(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.field(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.field(self.value * o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.field(self.value * self.field.inv(o))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.field(o * self.field.inv(self.value))

    def __neg__(self):
        return self.field(-self.value)

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.field(pow(self.inverse().value, -exponent, self.field.modulus))
        return self.field(pow(self.value, exponent, self.field.modulus))

    def inverse(self) -> FieldElement:
        return self.field(self.field.inv(self.value))

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __bool__(self):
        return self.value != 0

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field == other.field and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.field.modulus
        return NotImplemented

    def __hash__(self):
        return hash(self.value)

    def __repr__(self):
        return f"{self.value} (mod {self.field.modulus})"


@dataclass(frozen=True)
class RootOfUnity:
    """An element ``alpha`` of multiplicative order exactly ``order``."""

    alpha: FieldElement
    order: int

    def __post_init__(self):
        q = self.alpha.field.modulus
        a, n = self.alpha.value, self.order
        if n < 1 or pow(a, n, q) != 1:
            raise FieldError(f"{a} is not an {n}-th root of unity mod {q}")
        if any(pow(a, n // p, q) == 1 for p in prime_factors(n)):
            raise FieldError(f"{a} has order smaller than {n} mod {q}")

    @property
    def field(self) -> PrimeField:
        return self.alpha.field

    def power(self, exponent: int) -> int:
        """alpha**exponent as a plain residue; the exponent is reduced mod the order first."""
        return pow(self.alpha.value, exponent % self.order, self.alpha.field.modulus)


def find_field_modulus(n: int, lower_bound: int = 2) -> int:
    """Smallest prime ``q >= lower_bound`` with ``q = 1 (mod n)``."""
    if n < 1:
        raise ValueError("N must be positive")
    if lower_bound < 2:
        raise ValueError("lower bound must be at least 2")
    k = max(1, -(-(lower_bound - 1) // n))
    q = k * n + 1
    while q <= U64_MAX:
        if is_prime(q):
            return q
        q += n
    raise OverflowError(f"no prime = 1 mod {n} in [{lower_bound}, 2**64)")


def nth_root_of_unity(field: PrimeField, n: int) -> RootOfUnity:
    """The smallest element of multiplicative order exactly ``n``.

    Starts from ``g**((q-1)/n)`` for a generator ``g``; the other primitive
    n-th roots are its powers coprime to ``n``.
    """
    q = field.modulus
    if n < 1 or (q - 1) % n:
        raise FieldError(f"{n} does not divide q - 1 = {q - 1}")
    base = pow(field.generator().value, (q - 1) // n, q)
    alpha = min(pow(base, k, q) for k in range(1, n + 1) if math.gcd(k, n) == 1)
    return RootOfUnity(field(alpha), n)


def power_sum(root: RootOfUnity, exponent: int) -> FieldElement:
    """Sum of ``(alpha**i)**exponent`` over ``i = 1..N``, evaluated term by term."""
    field = root.field
    return field(sum(root.power(i * exponent) for i in range(1, root.order + 1)))
