"""Tests for GF(2^m) arithmetic."""

import itertools

import numpy as np
import pytest

from kdesign.exceptions import (
    ConfigurationError,
    ContractViolationError,
    FieldMismatchError,
    PreconditionError,
)
from kdesign.gf2field import (
    MAX_M,
    FieldSpec,
    barrett_reduce,
    clmul,
    clmul_int,
    field_spec,
    gf_add,
    gf_inv,
    gf_mul,
    gf_pow,
    is_irreducible,
    mul_array,
    mul_int,
    poly_divmod,
    reduction_matrix,
    squaring_matrix,
)


@pytest.fixture
def gf8() -> FieldSpec:
    """GF(2^3) with p = x^3 + x + 1."""
    return field_spec(3)


def test_field_spec_small_widths(gf8: FieldSpec) -> None:
    """Test the documented polynomials and Barrett constant for small m."""
    assert gf8.p_bits == 0b1011
    assert gf8.mu_bits == 0b10
    assert field_spec(1).p_bits == 0b11


def test_every_field_polynomial_is_irreducible() -> None:
    """Test that the fixed polynomial table is irreducible for every width."""
    for m in range(1, MAX_M + 1):
        spec = field_spec(m)
        assert spec.p_bits.bit_length() - 1 == m
        assert is_irreducible(spec.p_bits), f"m={m}"


def test_is_irreducible_small_cases() -> None:
    """Test Rabin's test on hand-checked quadratics and cubics."""
    assert is_irreducible(0b111)
    assert not is_irreducible(0b101)
    assert is_irreducible(0b1101)
    assert not is_irreducible(0b1111)


def test_field_spec_rejects_out_of_range_width() -> None:
    """Test that widths outside [1, 64] are rejected."""
    with pytest.raises(ConfigurationError) as exc_info:
        field_spec(0)
    assert exc_info.value.parameter == "m"
    with pytest.raises(ConfigurationError):
        field_spec(MAX_M + 1)


def test_gf_add_is_xor(gf8: FieldSpec) -> None:
    """Test field addition."""
    assert gf_add(gf8.elem(0b101), gf8.elem(0b011)).bits == 0b110
    assert (gf8.elem(0b111) + gf8.elem(0b111)).bits == 0


def test_clmul_examples(gf8: FieldSpec) -> None:
    """Test the unreduced product."""
    assert clmul(gf8.elem(0b010), gf8.elem(0b110)) == 0b01100
    assert clmul(gf8.elem(0b101), gf8.one()) == 0b101


def test_barrett_reduce_example(gf8: FieldSpec) -> None:
    """Test that x^4 reduces to x^2 + x."""
    assert barrett_reduce(0b10000, gf8).bits == 0b110


def test_barrett_reduce_rejects_wide_input(gf8: FieldSpec) -> None:
    """Test the degree precondition of Barrett reduction."""
    with pytest.raises(ContractViolationError):
        barrett_reduce(1 << 5, gf8)


def test_gf_mul_examples(gf8: FieldSpec) -> None:
    """Test hand-computed products in GF(8)."""
    assert gf_mul(gf8.elem(0b010), gf8.elem(0b110), gf8).bits == 0b111
    assert gf_mul(gf8.elem(0b100), gf8.elem(0b100), gf8).bits == 0b110
    assert (gf8.elem(0b101) * gf8.one()).bits == 0b101


def test_gf_mul_aes_field() -> None:
    """Test the classic GF(2^8) inverse pair 0x53 and 0xCA."""
    spec = field_spec(8)
    assert gf_mul(spec.elem(0x53), spec.elem(0xCA), spec).bits == 1
    assert gf_inv(spec.elem(0x53), spec).bits == 0xCA


def test_gf_mul_matches_long_division_exhaustively() -> None:
    """Test Barrett multiplication against the long-division oracle for m <= 4."""
    for m in range(1, 5):
        spec = field_spec(m)
        for a, b in itertools.product(range(spec.order), repeat=2):
            assert mul_int(a, b, spec) == poly_divmod(clmul_int(a, b), spec.p_bits)[1]


def test_gf_mul_matches_long_division_random() -> None:
    """Test Barrett multiplication on random pairs of wider fields."""
    rng = np.random.default_rng(2024)
    for m in (8, 16, 32, 64):
        spec = field_spec(m)
        for _ in range(500):
            a = int(rng.integers(0, 1 << 62)) & spec.mask
            b = int(rng.integers(0, 1 << 62)) & spec.mask
            assert mul_int(a, b, spec) == poly_divmod(clmul_int(a, b), spec.p_bits)[1]


def test_gf_pow_group_order() -> None:
    """Test a^(2^m - 1) = 1 for every nonzero element and the trivial exponents."""
    spec = field_spec(5)
    for a in range(1, spec.order):
        assert gf_pow(spec.elem(a), spec.order - 1, spec).bits == 1
    assert gf_pow(spec.zero(), 0, spec).bits == 1
    assert gf_pow(spec.elem(0b10), 2, spec).bits == 0b100


def test_gf_pow_negative_exponent(gf8: FieldSpec) -> None:
    """Test that negative exponents are rejected."""
    with pytest.raises(PreconditionError):
        gf_pow(gf8.one(), -1, gf8)


def test_gf_inv_of_zero(gf8: FieldSpec) -> None:
    """Test that zero has no inverse."""
    with pytest.raises(PreconditionError) as exc_info:
        gf_inv(gf8.zero(), gf8)
    assert "inverse" in str(exc_info.value)


def test_field_mismatch_error() -> None:
    """Test mixing elements of different fields."""
    with pytest.raises(FieldMismatchError) as exc_info:
        gf_add(field_spec(3).elem(1), field_spec(4).elem(1))
    assert exc_info.value.left_m == 3
    assert exc_info.value.right_m == 4
    assert "GF(2^3)" in str(exc_info.value)


def test_elem_rejects_unreduced_word(gf8: FieldSpec) -> None:
    """Test that field elements must fit in m bits."""
    with pytest.raises(ConfigurationError):
        gf8.elem(0b1000)


def test_field_spec_rejects_wrong_barrett_constant() -> None:
    """Test FieldSpec validation of mu."""
    with pytest.raises(ConfigurationError) as exc_info:
        FieldSpec(m=3, p_bits=0b1011, mu_bits=0b11)
    assert exc_info.value.parameter == "mu_bits"


def test_mul_array_matches_scalar_path() -> None:
    """Test the vectorised multiplier against mul_int."""
    spec = field_spec(8)
    rng = np.random.default_rng(7)
    a = rng.integers(0, spec.order, size=256, dtype=np.uint64)
    b = rng.integers(0, spec.order, size=256, dtype=np.uint64)
    got = mul_array(a, b, spec)
    want = [mul_int(int(x), int(y), spec) for x, y in zip(a, b, strict=True)]
    assert got.tolist() == want


def test_squaring_matrix_is_frobenius() -> None:
    """Test that the squaring matrix maps a to a^2 over GF(2)."""
    spec = field_spec(6)
    square = squaring_matrix(spec)
    for a in range(spec.order):
        bits = np.array([(a >> i) & 1 for i in range(spec.m)])
        out = (square.astype(np.int64) @ bits) % 2
        assert sum(int(v) << i for i, v in enumerate(out)) == mul_int(a, a, spec)


def test_reduction_matrix_columns() -> None:
    """Test that column j of the reduction matrix holds x^j mod p."""
    spec = field_spec(4)
    rows = reduction_matrix(spec)
    assert rows.shape == (4, 7)
    for j in range(7):
        col = sum(int(v) << i for i, v in enumerate(rows[:, j]))
        assert col == poly_divmod(1 << j, spec.p_bits)[1]
