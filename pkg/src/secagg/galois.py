"""Exact arithmetic in prime fields F_q plus Lagrange interpolation.

Field elements are plain Python ints kept in canonical least-nonnegative
residue form [0, q). Every operation returns a reduced value, so results
serialize deterministically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

#: Default modulus for protocol runs. Mersenne prime 2^31 - 1 keeps every
#: product of two canonical residues inside 64-bit intermediates.
DEFAULT_PRIME = 2**31 - 1

# Witness set making Miller-Rabin deterministic for all n < 2^64.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin primality test, exact for n < 2^64."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeField:
    """Arithmetic in F_q for a prime modulus q."""

    __slots__ = ("q",)

    def __init__(self, q: int):
        if q >= 2**64:
            raise ValueError(f"modulus {q} out of supported range (< 2^64)")
        if not is_prime(q):
            raise ValueError(f"modulus {q} is not prime")
        self.q = q

    def element(self, value: int) -> int:
        """Canonical residue of an arbitrary integer."""
        return value % self.q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def neg(self, a: int) -> int:
        return -a % self.q

    def mul(self, a: int, b: int) -> int:
        return a * b % self.q

    def inv(self, a: int) -> int:
        """Multiplicative inverse via the extended Euclidean algorithm."""
        a %= self.q
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        r0, r1 = self.q, a
        t0, t1 = 0, 1
        while r1:
            quot = r0 // r1
            r0, r1 = r1, r0 - quot * r1
            t0, t1 = t1, t0 - quot * t1
        return t0 % self.q

    def div(self, a: int, b: int) -> int:
        return a * self.inv(b) % self.q

    def __eq__(self, other) -> bool:
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self) -> int:
        return hash(("PrimeField", self.q))

    def __repr__(self) -> str:
        return f"PrimeField({self.q})"


@lru_cache(maxsize=64)
def field(q: int) -> PrimeField:
    """Shared PrimeField instance for q (fields are stateless)."""
    return PrimeField(q)


@dataclass(frozen=True)
class Polynomial:
    """Polynomial over F_q, coefficients low degree first, no trailing zeros."""

    field: PrimeField
    coeffs: tuple[int, ...]

    @staticmethod
    def make(f: PrimeField, coeffs) -> "Polynomial":
        cs = [c % f.q for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        return Polynomial(f, tuple(cs))

    @property
    def degree(self) -> int:
        """Degree, or -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def eval(self, x: int) -> int:
        """Horner evaluation at x."""
        q = self.field.q
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % q
        return acc

    def add(self, other: "Polynomial") -> "Polynomial":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        merged = list(a)
        for i, c in enumerate(b):
            merged[i] = (merged[i] + c) % self.field.q
        return Polynomial.make(self.field, merged)

    def mul(self, other: "Polynomial") -> "Polynomial":
        if not self.coeffs or not other.coeffs:
            return Polynomial(self.field, ())
        q = self.field.q
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = (out[i + j] + a * b) % q
        return Polynomial.make(self.field, out)

    def scale(self, k: int) -> "Polynomial":
        q = self.field.q
        return Polynomial.make(self.field, [c * k % q for c in self.coeffs])


def lagrange_basis(f: PrimeField, nodes: list[int], k: int) -> Polynomial:
    """Basis polynomial that is 1 at nodes[k] and 0 at every other node."""
    poly = Polynomial.make(f, [1])
    xk = nodes[k]
    for m, xm in enumerate(nodes):
        if m == k:
            continue
        denom = f.inv((xk - xm) % f.q)
        # (x - xm) / (xk - xm)
        poly = poly.mul(Polynomial.make(f, [-xm * denom, denom]))
    return poly


def lagrange_interpolate(f: PrimeField, points: list[tuple[int, int]]) -> Polynomial:
    """Unique polynomial of degree < len(points) through the given points."""
    if not points:
        raise ValueError("need at least one interpolation point")
    xs = [x % f.q for x, _ in points]
    if len(set(xs)) != len(xs):
        raise ValueError("interpolation nodes must be distinct")
    result = Polynomial(f, ())
    for k, (_, y) in enumerate(points):
        result = result.add(lagrange_basis(f, xs, k).scale(y))
    return result


def evaluation_weights(f: PrimeField, nodes: list[int], x0: int) -> list[int]:
    """Weights w_k with p(x0) = sum_k w_k * p(nodes[k]) for deg p < len(nodes).

    Fuses interpolation through the nodes with evaluation at x0; used where
    only point values of the interpolant are needed.
    """
    if len(set(n % f.q for n in nodes)) != len(nodes):
        raise ValueError("interpolation nodes must be distinct")
    q = f.q
    weights = []
    for k, xk in enumerate(nodes):
        num, den = 1, 1
        for m, xm in enumerate(nodes):
            if m == k:
                continue
            num = num * (x0 - xm) % q
            den = den * (xk - xm) % q
        weights.append(num * f.inv(den) % q)
    return weights


def encode_element(value: int) -> bytes:
    """Serialize a canonical residue as 8 little-endian bytes."""
    return struct.pack("<Q", value)


def decode_element(data: bytes) -> int:
    return struct.unpack("<Q", data)[0]


def encode_vector(values) -> bytes:
    return struct.pack(f"<{len(values)}Q", *values)


def decode_vector(data: bytes) -> list[int]:
    n, rem = divmod(len(data), 8)
    if rem:
        raise ValueError("element buffer length must be a multiple of 8")
    return list(struct.unpack(f"<{n}Q", data))
