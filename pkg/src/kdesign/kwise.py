"""
k-wise independent functions f(x) = sum_{i<k} a_i x^i over GF(2^m).

A uniformly random coefficient vector makes the values at any k distinct points
jointly uniform. Single-bit phase functions take the least-significant bit of the
field value.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from fractions import Fraction
import itertools
import logging

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from kdesign.exceptions import ConfigurationError, PreconditionError, ResourceLimitError
from kdesign.gf2field import (
    FieldElem,
    FieldSpec,
    MAX_VECTOR_M,
    gf_add,
    gf_mul,
    mul_array,
    mul_int,
)
from kdesign.seeding import BitStream

logger = logging.getLogger(__name__)

# Exhaustive seed enumeration limit, in bits (k·m).
MAX_ENUMERATION_BITS = 24
_CHUNK = 1 << 20


class KWiseSeed(BaseModel):
    """Coefficients a_0..a_{k-1} of one member of the polynomial family."""

    model_config = ConfigDict(frozen=True)

    spec: FieldSpec
    k: int = Field(ge=1)
    coeffs: tuple[FieldElem, ...]

    @model_validator(mode="after")
    def _check_coeffs(self) -> KWiseSeed:
        if len(self.coeffs) != self.k:
            raise ConfigurationError("coeffs", len(self.coeffs), f"expected {self.k} coefficients")
        for c in self.coeffs:
            if c.spec_m != self.spec.m:
                raise ConfigurationError("coeffs", c.bits, f"not in GF(2^{self.spec.m})")
        return self

    @classmethod
    def from_words(cls, spec: FieldSpec, words: Sequence[int]) -> KWiseSeed:
        return cls(spec=spec, k=len(words), coeffs=tuple(spec.elem(int(w)) for w in words))

    @property
    def words(self) -> tuple[int, ...]:
        return tuple(c.bits for c in self.coeffs)


def sample_seed(spec: FieldSpec, k: int, stream: BitStream) -> KWiseSeed:
    """Draw k i.i.d. uniform coefficients, consuming exactly k·m bits."""
    if k < 1:
        raise PreconditionError(f"independence k must be >= 1, got {k}")
    return KWiseSeed.from_words(spec, [stream.take(spec.m) for _ in range(k)])


def seed_bits(seed: KWiseSeed) -> int:
    return seed.k * seed.spec.m


def _as_elem(x: FieldElem | int, spec: FieldSpec) -> FieldElem:
    return spec.elem(x) if isinstance(x, int) else x


def eval_tree(seed: KWiseSeed, x: FieldElem | int) -> FieldElem:
    """Low-depth evaluation order.

    Stage 1 squares x repeatedly and multiplies the needed x^(2^j) into each x^i,
    stage 2 multiplies every coefficient by its power, stage 3 sums the terms in a
    binary tree.
    """
    spec = seed.spec
    x = _as_elem(x, spec)
    squarings = [x]
    while (1 << len(squarings)) < seed.k:
        squarings.append(gf_mul(squarings[-1], squarings[-1], spec))

    powers = [spec.one()]
    for i in range(1, seed.k):
        factors = [squarings[b] for b in range(i.bit_length()) if (i >> b) & 1]
        while len(factors) > 1:
            factors = [
                gf_mul(factors[j], factors[j + 1], spec) if j + 1 < len(factors) else factors[j]
                for j in range(0, len(factors), 2)
            ]
        powers.append(factors[0])

    terms = [gf_mul(a, xi, spec) for a, xi in zip(seed.coeffs, powers, strict=True)]
    while len(terms) > 1:
        terms = [
            gf_add(terms[j], terms[j + 1]) if j + 1 < len(terms) else terms[j]
            for j in range(0, len(terms), 2)
        ]
    return terms[0]


def eval_horner(seed: KWiseSeed, x: FieldElem | int) -> FieldElem:
    """Low-ancilla loop: result += a_i·current_power, current_power *= x."""
    spec = seed.spec
    x = _as_elem(x, spec)
    result = spec.zero()
    current_power = spec.one()
    for a in seed.coeffs:
        result = gf_add(result, gf_mul(a, current_power, spec))
        current_power = gf_mul(current_power, x, spec)
    return result


def phase_bit(seed: KWiseSeed, x: FieldElem | int) -> int:
    return eval_tree(seed, x).bits & 1


def eval_vector(seed: KWiseSeed, xs: NDArray[np.integer] | Sequence[int]) -> NDArray[np.uint64]:
    """Evaluate at many points at once (m <= 16)."""
    words = np.asarray(seed.words, dtype=np.uint64)[None, :]
    return eval_words(words, np.asarray(xs, dtype=np.uint64), seed.spec)[0]


def eval_words(
    words: NDArray[np.uint64], xs: NDArray[np.uint64], spec: FieldSpec
) -> NDArray[np.uint64]:
    """Values of many seeds (rows of ``words``) at many points: shape (seeds, points)."""
    words = np.asarray(words, dtype=np.uint64)
    xs = np.asarray(xs, dtype=np.uint64)[None, :]
    acc = np.zeros((words.shape[0], xs.shape[1]), dtype=np.uint64)
    for i in range(words.shape[1] - 1, -1, -1):
        acc = mul_array(acc, xs, spec) ^ words[:, i : i + 1]
    return acc


def truth_table(seed: KWiseSeed, width: int | None = None) -> NDArray[np.uint8]:
    """Phase bits of ``seed`` on all 2^m inputs, indexed by the input word."""
    m = seed.spec.m
    if width is not None and width != m:
        raise ConfigurationError("width", width, f"seed lives in GF(2^{m})")
    if m > MAX_VECTOR_M:
        raise ResourceLimitError("truth table width", m, MAX_VECTOR_M)
    values = eval_vector(seed, np.arange(1 << m, dtype=np.uint64))
    return (values & np.uint64(1)).astype(np.uint8)


def seed_words(spec: FieldSpec, k: int) -> NDArray[np.uint64]:
    """Every coefficient vector as rows, lexicographic in (a_0, ..., a_{k-1})."""
    if k * spec.m > MAX_ENUMERATION_BITS:
        raise ResourceLimitError("seed bits k·m", k * spec.m, MAX_ENUMERATION_BITS)
    grids = np.indices((spec.order,) * k, dtype=np.uint64).reshape(k, -1)
    return np.ascontiguousarray(grids.T)


def enumerate_seeds(spec: FieldSpec, k: int) -> Iterator[KWiseSeed]:
    """Yield every seed, lexicographic by coefficient."""
    if k * spec.m > MAX_ENUMERATION_BITS:
        raise ResourceLimitError("seed bits k·m", k * spec.m, MAX_ENUMERATION_BITS)
    for words in itertools.product(range(spec.order), repeat=k):
        yield KWiseSeed.from_words(spec, words)


def _constant_table(c: int, spec: FieldSpec) -> NDArray[np.uint64]:
    """table[a] = a·c, built by doubling over the bits of a."""
    table = np.zeros(spec.order, dtype=np.uint64)
    for j in range(spec.m):
        step = np.uint64(mul_int(1 << j, c, spec))
        table[1 << j : 2 << j] = table[: 1 << j] ^ step
    return table


def verify_kwise(
    spec: FieldSpec,
    k: int,
    points: Sequence[FieldElem | int],
    targets: Sequence[FieldElem | int],
) -> Fraction:
    """Exact fraction of all seeds with f(points[j]) = targets[j] for every j."""
    xs = [int(_as_elem(x, spec)) for x in points]
    ys = [int(_as_elem(y, spec)) for y in targets]
    if len(xs) != len(ys):
        raise PreconditionError(f"{len(xs)} points but {len(ys)} targets")
    if len(xs) > k:
        raise PreconditionError(f"at most k={k} points may be checked, got {len(xs)}")
    if len(set(xs)) != len(xs):
        raise PreconditionError(f"points must be pairwise distinct: {xs}")
    total_bits = k * spec.m
    if total_bits > MAX_ENUMERATION_BITS:
        raise ResourceLimitError("seed bits k·m", total_bits, MAX_ENUMERATION_BITS)

    # tables[j][i] multiplies coefficient i by points[j]^i.
    tables = []
    for x in xs:
        row, power = [], 1
        for _ in range(k):
            row.append(_constant_table(power, spec))
            power = mul_int(power, x, spec)
        tables.append(row)

    total = 1 << total_bits
    mask = np.uint64(spec.mask)
    hits = 0
    for start in range(0, total, _CHUNK):
        seeds = np.arange(start, min(start + _CHUNK, total), dtype=np.uint64)
        coeffs = [(seeds >> np.uint64(i * spec.m)) & mask for i in range(k)]
        ok = np.ones(seeds.shape, dtype=bool)
        for row, y in zip(tables, ys, strict=True):
            value = np.zeros(seeds.shape, dtype=np.uint64)
            for table, a in zip(row, coeffs, strict=True):
                value ^= table[a]
            ok &= value == np.uint64(y)
        hits += int(np.count_nonzero(ok))
    logger.debug(f"verify_kwise m={spec.m} k={k} t={len(xs)}: {hits}/{total}")
    return Fraction(hits, total)
