"""
Exact arithmetic in the binary fields GF(2^m), 1 <= m <= 64.

Elements are m-bit words whose bit i is the coefficient of x^i. Addition is XOR;
multiplication is a carryless product followed by Barrett reduction modulo a fixed
low-weight irreducible polynomial.
"""

from __future__ import annotations

from functools import lru_cache
import logging

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from kdesign.exceptions import (
    ConfigurationError,
    ContractViolationError,
    FieldMismatchError,
    PreconditionError,
)

logger = logging.getLogger(__name__)

MAX_M = 64
# Vectorised paths keep products of three m-bit words inside uint64.
MAX_VECTOR_M = 16

# Middle exponents of x^m + x^a (+ x^b + x^c) + 1, lowest weight per degree.
_IRREDUCIBLE_TAPS: dict[int, tuple[int, ...]] = {
    2: (1,), 3: (1,), 4: (1,), 5: (2,), 6: (1,), 7: (1,), 8: (4, 3, 1), 9: (1,),
    10: (3,), 11: (2,), 12: (3,), 13: (4, 3, 1), 14: (5,), 15: (1,), 16: (5, 3, 1),
    17: (3,), 18: (3,), 19: (5, 2, 1), 20: (3,), 21: (2,), 22: (1,), 23: (5,),
    24: (4, 3, 1), 25: (3,), 26: (4, 3, 1), 27: (5, 2, 1), 28: (1,), 29: (2,), 30: (1,),
    31: (3,), 32: (7, 3, 2), 33: (10,), 34: (7,), 35: (2,), 36: (9,), 37: (6, 4, 1),
    38: (6, 5, 1), 39: (4,), 40: (5, 4, 3), 41: (3,), 42: (7,), 43: (6, 4, 3), 44: (5,),
    45: (4, 3, 1), 46: (1,), 47: (5,), 48: (5, 3, 2), 49: (9,), 50: (4, 3, 2),
    51: (6, 3, 1), 52: (3,), 53: (6, 2, 1), 54: (9,), 55: (7,), 56: (7, 4, 2), 57: (4,),
    58: (19,), 59: (7, 4, 2), 60: (1,), 61: (5, 2, 1), 62: (29,), 63: (1,), 64: (4, 3, 1),
}  # fmt: skip


# ============== Integer-level polynomial arithmetic ==============


def poly_degree(a: int) -> int:
    """Degree of a GF(2)[x] polynomial; -1 for the zero polynomial."""
    return a.bit_length() - 1


def clmul_int(a: int, b: int) -> int:
    """Carryless (GF(2)[x]) product, schoolbook over the bits of the smaller operand."""
    if a.bit_length() < b.bit_length():
        a, b = b, a
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        b >>= 1
    return result


def poly_divmod(a: int, b: int) -> tuple[int, int]:
    """Polynomial long division over GF(2): returns (quotient, remainder)."""
    if b == 0:
        raise ZeroDivisionError("polynomial division by zero")
    q = 0
    db = b.bit_length()
    while a.bit_length() >= db:
        shift = a.bit_length() - db
        q ^= 1 << shift
        a ^= b << shift
    return q, a


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_divmod(a, b)[1]
    return a


def _square_mod(a: int, p: int) -> int:
    return poly_divmod(clmul_int(a, a), p)[1]


def _prime_factors(m: int) -> list[int]:
    factors = []
    q = 2
    while q * q <= m:
        if m % q == 0:
            factors.append(q)
            while m % q == 0:
                m //= q
        q += 1
    if m > 1:
        factors.append(m)
    return factors


def is_irreducible(p_bits: int) -> bool:
    """Rabin's irreducibility test over GF(2).

    ``p`` of degree m is irreducible iff x^(2^m) = x mod p and
    gcd(x^(2^(m/q)) - x, p) = 1 for every prime q dividing m.
    """
    m = poly_degree(p_bits)
    if m < 1:
        return False
    if m == 1:
        return True
    x = 0b10
    powers = [x]
    for _ in range(m):
        powers.append(_square_mod(powers[-1], p_bits))
    if powers[m] != x:
        return False
    return all(poly_gcd(p_bits, powers[m // q] ^ x) == 1 for q in _prime_factors(m))


# ============== Field description ==============


class FieldSpec(BaseModel):
    """GF(2^m) with its irreducible polynomial and Barrett constant."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1, le=MAX_M)
    p_bits: int
    mu_bits: int

    @model_validator(mode="after")
    def _check_polynomials(self) -> FieldSpec:
        if poly_degree(self.p_bits) != self.m:
            raise ConfigurationError("p_bits", self.p_bits, f"degree must be exactly {self.m}")
        if self.mu_bits != poly_divmod(1 << (2 * self.m - 2), self.p_bits)[0]:
            raise ConfigurationError("mu_bits", self.mu_bits, "not the Barrett constant of p")
        return self

    @property
    def order(self) -> int:
        return 1 << self.m

    @property
    def mask(self) -> int:
        return self.order - 1

    def elem(self, bits: int) -> FieldElem:
        return FieldElem(bits=bits, spec_m=self.m)

    def zero(self) -> FieldElem:
        return self.elem(0)

    def one(self) -> FieldElem:
        return self.elem(1)


class FieldElem(BaseModel):
    """An m-bit word tagged with its field width."""

    model_config = ConfigDict(frozen=True)

    bits: int = Field(ge=0)
    spec_m: int = Field(ge=1, le=MAX_M)

    @model_validator(mode="after")
    def _check_reduced(self) -> FieldElem:
        if self.bits >> self.spec_m:
            raise ConfigurationError("bits", self.bits, f"not a GF(2^{self.spec_m}) element")
        return self

    def __int__(self) -> int:
        return self.bits

    def __add__(self, other: FieldElem) -> FieldElem:
        return gf_add(self, other)

    def __mul__(self, other: FieldElem) -> FieldElem:
        return gf_mul(self, other, field_spec(self.spec_m))


@lru_cache(maxsize=None)
def field_spec(m: int) -> FieldSpec:
    """The library's fixed GF(2^m) description; deterministic for each m."""
    if not 1 <= m <= MAX_M:
        raise ConfigurationError("m", m, f"field width must be in [1, {MAX_M}]")
    if m == 1:
        p_bits = 0b11
    else:
        p_bits = (1 << m) | 1
        for tap in _IRREDUCIBLE_TAPS[m]:
            p_bits |= 1 << tap
    mu_bits = poly_divmod(1 << (2 * m - 2), p_bits)[0]
    logger.debug(f"GF(2^{m}): p={p_bits:#x} mu={mu_bits:#x}")
    return FieldSpec(m=m, p_bits=p_bits, mu_bits=mu_bits)


def _same_field(a: FieldElem, b: FieldElem) -> None:
    if a.spec_m != b.spec_m:
        raise FieldMismatchError(a.spec_m, b.spec_m)


def _check_spec(a: FieldElem, spec: FieldSpec) -> None:
    if a.spec_m != spec.m:
        raise FieldMismatchError(a.spec_m, spec.m)


# ============== Field operations ==============


def reduce_int(cprime: int, spec: FieldSpec) -> int:
    """Barrett reduction of a product of two reduced words."""
    q = clmul_int(cprime, spec.mu_bits) >> (2 * spec.m - 2)
    return cprime ^ clmul_int(q, spec.p_bits)


def mul_int(a: int, b: int, spec: FieldSpec) -> int:
    return reduce_int(clmul_int(a, b), spec)


def gf_add(a: FieldElem, b: FieldElem) -> FieldElem:
    _same_field(a, b)
    return FieldElem(bits=a.bits ^ b.bits, spec_m=a.spec_m)


def clmul(a: FieldElem, b: FieldElem) -> int:
    """Unreduced product a(x)·b(x), at most 2m-1 bits wide."""
    _same_field(a, b)
    return clmul_int(a.bits, b.bits)


def barrett_reduce(cprime: int, spec: FieldSpec) -> FieldElem:
    """cprime mod p via q = floor(cprime·mu / x^(2m-2)), r = cprime + q·p."""
    if cprime < 0 or poly_degree(cprime) > 2 * spec.m - 2:
        raise ContractViolationError(
            f"barrett_reduce needs deg <= {2 * spec.m - 2}, got {poly_degree(cprime)}"
        )
    return FieldElem(bits=reduce_int(cprime, spec), spec_m=spec.m)


def gf_mul(a: FieldElem, b: FieldElem, spec: FieldSpec) -> FieldElem:
    _same_field(a, b)
    _check_spec(a, spec)
    return barrett_reduce(clmul(a, b), spec)


def gf_pow(a: FieldElem, e: int, spec: FieldSpec) -> FieldElem:
    """Square-and-multiply; a^0 = 1 (including 0^0)."""
    _check_spec(a, spec)
    if e < 0:
        raise PreconditionError(f"exponent must be >= 0, got {e}")
    result, base = 1, a.bits
    while e:
        if e & 1:
            result = mul_int(result, base, spec)
        base = mul_int(base, base, spec)
        e >>= 1
    return FieldElem(bits=result, spec_m=spec.m)


def gf_inv(a: FieldElem, spec: FieldSpec) -> FieldElem:
    if a.bits == 0:
        raise PreconditionError("zero has no multiplicative inverse")
    return gf_pow(a, spec.order - 2, spec)


# ============== GF(2)-linear maps ==============


def reduction_matrix(spec: FieldSpec) -> NDArray[np.uint8]:
    """m x (2m-1) matrix over GF(2) whose column j holds x^j mod p."""
    m = spec.m
    out = np.zeros((m, 2 * m - 1), dtype=np.uint8)
    for j in range(2 * m - 1):
        r = poly_divmod(1 << j, spec.p_bits)[1]
        out[:, j] = [(r >> i) & 1 for i in range(m)]
    return out


def squaring_matrix(spec: FieldSpec) -> NDArray[np.uint8]:
    """m x m matrix over GF(2) of the Frobenius map a -> a^2."""
    m = spec.m
    out = np.zeros((m, m), dtype=np.uint8)
    for j in range(m):
        r = reduce_int(1 << (2 * j), spec)
        out[:, j] = [(r >> i) & 1 for i in range(m)]
    return out


def matrix_power_gf2(matrix: NDArray[np.uint8], e: int) -> NDArray[np.uint8]:
    """matrix^e over GF(2)."""
    result = np.eye(matrix.shape[0], dtype=np.uint8)
    base = matrix.astype(np.uint8)
    while e:
        if e & 1:
            result = (result.astype(np.int64) @ base) % 2
            result = result.astype(np.uint8)
        base = ((base.astype(np.int64) @ base) % 2).astype(np.uint8)
        e >>= 1
    return result


# ============== Vectorised helpers (m <= 16) ==============


def _check_vector_m(m: int) -> None:
    if m > MAX_VECTOR_M:
        raise ConfigurationError("m", m, f"vectorised arithmetic supports m <= {MAX_VECTOR_M}")


def clmul_array(a: NDArray[np.uint64], b: NDArray[np.uint64], width: int) -> NDArray[np.uint64]:
    """Elementwise carryless product; ``width`` bounds the bit length of ``b``."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    acc = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.uint64)
    for i in range(width):
        bit = (b >> np.uint64(i)) & np.uint64(1)
        acc ^= (a << np.uint64(i)) * bit
    return acc


def reduce_array(cprime: NDArray[np.uint64], spec: FieldSpec) -> NDArray[np.uint64]:
    """Vectorised Barrett reduction of products of reduced words."""
    _check_vector_m(spec.m)
    c = np.asarray(cprime, dtype=np.uint64)
    mu = np.uint64(spec.mu_bits)
    q = clmul_array(c, mu, max(spec.m - 1, 1)) >> np.uint64(2 * spec.m - 2)
    return c ^ clmul_array(q, np.uint64(spec.p_bits), spec.m + 1)


def mul_array(a: NDArray[np.uint64], b: NDArray[np.uint64], spec: FieldSpec) -> NDArray[np.uint64]:
    _check_vector_m(spec.m)
    return reduce_array(clmul_array(a, b, spec.m), spec)
