"""Tests for the dense statevector and operator engine."""

import itertools

import numpy as np
import pytest

from kdesign.designmetrics import haar_twirl_superop, kron_power
from kdesign.exceptions import ConfigurationError, ContractViolationError, ResourceLimitError
from kdesign.gf2field import field_spec
from kdesign.kwise import KWiseSeed, eval_tree
from kdesign.quantsim import (
    PatchLayout,
    StateVec,
    apply_dense,
    apply_permutation,
    apply_phase_oracle,
    apply_shuffle,
    distinct_dimension,
    distinct_projector,
    embed_operator,
    enumerate_cliffords,
    local_distinct_projector,
    num_cliffords,
    partial_trace,
    pauli_op,
    permutation_op,
    restrict_words,
    sample_clifford,
    sample_haar_unitary,
    stabilization_key,
    trace_norm,
)

PAULI_LABELS_2 = ["".join(p) for p in itertools.product("IXYZ", repeat=2)]


@pytest.fixture
def rng() -> np.random.Generator:
    """Fixed generator."""
    return np.random.default_rng(99)


def _random_state(n: int, rng: np.random.Generator) -> StateVec:
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVec.from_amps(amps / np.linalg.norm(amps))


def _twirl(unitaries: np.ndarray, k: int) -> np.ndarray:
    total = 0
    for u in kron_power(unitaries, k):
        total = total + np.kron(u, u.conj())
    return total / len(unitaries)


def test_basis_and_plus_states() -> None:
    """Test the constructors."""
    assert StateVec.basis(3, 5).probabilities().tolist() == [0, 0, 0, 0, 0, 1, 0, 0]
    assert StateVec.plus(2).probabilities() == pytest.approx([0.25] * 4)
    assert StateVec.plus(4).norm() == pytest.approx(1.0)


def test_from_amps_rejects_bad_length() -> None:
    """Test that amplitude vectors must have power-of-two length."""
    with pytest.raises(ConfigurationError):
        StateVec.from_amps([1, 0, 0])


def test_apply_dense_qubit_order() -> None:
    """Test that qubit 0 is the most significant bit."""
    x_gate = pauli_op("X")
    out = apply_dense(StateVec.basis(2, 0), [0], x_gate)
    assert out.probabilities()[0b10] == pytest.approx(1.0)
    out = apply_dense(StateVec.basis(2, 0), [1], x_gate)
    assert out.probabilities()[0b01] == pytest.approx(1.0)


def test_apply_dense_matches_embedded_operator(rng: np.random.Generator) -> None:
    """Test local application against the full 2^n matrix."""
    u = sample_haar_unitary(4, rng).matrix
    s = _random_state(3, rng)
    got = apply_dense(s, [2, 0], u).amps
    assert got == pytest.approx(embed_operator(u, [2, 0], 3) @ s.amps)


def test_apply_dense_rejects_overlapping_qubits() -> None:
    """Test qubit selection validation."""
    with pytest.raises(ContractViolationError):
        apply_dense(StateVec.basis(2), [1, 1], np.eye(4))


def test_phase_oracle_properties(rng: np.random.Generator) -> None:
    """Test the zero seed, involution and norm of the phase oracle."""
    spec = field_spec(3)
    s = _random_state(3, rng)
    zero = KWiseSeed.from_words(spec, [0, 0])
    assert apply_phase_oracle(s, [0, 1, 2], zero).amps == pytest.approx(s.amps)
    seed = KWiseSeed.from_words(spec, [0b011, 0b110])
    once = apply_phase_oracle(s, [0, 1, 2], seed)
    assert once.norm() == pytest.approx(1.0)
    assert apply_phase_oracle(once, [0, 1, 2], seed).amps == pytest.approx(s.amps)


def test_phase_oracle_width_checked() -> None:
    """Test that the seed width must match the patch."""
    seed = KWiseSeed.from_words(field_spec(2), [1])
    with pytest.raises(ConfigurationError):
        apply_phase_oracle(StateVec.basis(3), [0, 1, 2], seed)


def test_shuffle_maps_basis_states() -> None:
    """Test |c, t> -> |c, t XOR h(c)> on every basis state."""
    seed = KWiseSeed.from_words(field_spec(3), [0b101, 0b011])
    for c, t in itertools.product(range(8), repeat=2):
        out = apply_shuffle(StateVec.basis(6, (c << 3) | t), [0, 1, 2], [3, 4, 5], seed)
        want = (c << 3) | (t ^ eval_tree(seed, c).bits)
        assert out.probabilities()[want] == pytest.approx(1.0)


def test_shuffle_rejects_overlap() -> None:
    """Test that control and target must be disjoint."""
    seed = KWiseSeed.from_words(field_spec(2), [1])
    with pytest.raises(ContractViolationError):
        apply_shuffle(StateVec.basis(4), [0, 1], [1, 2], seed)


def test_apply_permutation() -> None:
    """Test |x> -> |perm[x]> and the validity check."""
    out = apply_permutation(StateVec.basis(2, 1), [3, 2, 1, 0])
    assert out.probabilities()[2] == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        apply_permutation(StateVec.basis(2), [0, 0, 1, 2])


def test_haar_first_moment(rng: np.random.Generator) -> None:
    """Test E|U_00|^2 = 1/d for Haar U(4)."""
    values = [abs(sample_haar_unitary(4, rng).matrix[0, 0]) ** 2 for _ in range(2000)]
    assert np.mean(values) == pytest.approx(0.25, abs=0.022)


def test_haar_dimension_limit(rng: np.random.Generator) -> None:
    """Test the dense Haar sampling limit."""
    with pytest.raises(ResourceLimitError) as exc_info:
        sample_haar_unitary(512, rng)
    assert exc_info.value.value == 512


def test_clifford_group_size() -> None:
    """Test the enumerated group against the order formula."""
    group = enumerate_cliffords(1)
    assert group.shape == (24, 2, 2)
    assert num_cliffords(1) == 24
    assert num_cliffords(2) == 11520


def test_sampled_cliffords_map_paulis_to_paulis(rng: np.random.Generator) -> None:
    """Test that conjugation by a sampled Clifford sends Paulis to signed Paulis."""
    paulis = {label: pauli_op(label) for label in PAULI_LABELS_2}
    for _ in range(20):
        clifford = sample_clifford(2, rng)
        assert clifford.is_unitary()
        u = clifford.matrix
        for p in paulis.values():
            image = u @ p @ u.conj().T
            overlaps = [np.trace(q.conj().T @ image) / 4 for q in paulis.values()]
            hits = [o for o in overlaps if abs(o) > 1e-8]
            assert len(hits) == 1
            assert abs(abs(hits[0].real) - 1) < 1e-8


@pytest.mark.parametrize("k", [2, 3])
def test_single_qubit_cliffords_form_a_3_design(k: int) -> None:
    """Test that the exact Clifford twirl equals the Haar twirl for k <= 3."""
    got = _twirl(enumerate_cliffords(1), k)
    assert np.abs(got - haar_twirl_superop(1, k)).max() < 1e-10


@pytest.mark.slow
def test_sampled_clifford_twirl_converges(rng: np.random.Generator) -> None:
    """Test a Monte-Carlo Clifford twirl on two qubits against the Haar twirl."""
    samples = np.stack([sample_clifford(2, rng).matrix for _ in range(10_000)])
    got = _twirl(samples, 2)
    assert np.abs(got - haar_twirl_superop(2, 2)).max() < 0.05


def test_clifford_limits(rng: np.random.Generator) -> None:
    """Test the Clifford size limits."""
    with pytest.raises(ResourceLimitError):
        sample_clifford(6, rng)
    with pytest.raises(ResourceLimitError):
        enumerate_cliffords(3)


def test_pauli_op_rejects_unknown_label() -> None:
    """Test Pauli label validation."""
    with pytest.raises(ConfigurationError):
        pauli_op("XQ")


def test_transposition_is_swap() -> None:
    """Test the register swap on two one-qubit copies."""
    swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
    assert permutation_op((1, 0), 1, 2).matrix.real.tolist() == swap.tolist()


def test_permutation_traces() -> None:
    """Test tr(P_pi) = d^cycles(pi) for three one-qubit copies."""
    traces = {pi: permutation_op(pi, 1, 3).trace().real for pi in itertools.permutations(range(3))}
    assert traces[(0, 1, 2)] == 8
    assert traces[(1, 0, 2)] == 4
    assert traces[(0, 2, 1)] == 4
    assert traces[(1, 2, 0)] == 2
    assert traces[(2, 0, 1)] == 2


def test_permutation_op_checks() -> None:
    """Test permutation and size validation."""
    with pytest.raises(ConfigurationError):
        permutation_op((0, 0), 1, 2)
    with pytest.raises(ResourceLimitError):
        permutation_op((0, 1, 2, 3), 4, 4)


def test_distinct_projector_traces() -> None:
    """Test tr(Pi_dist) = perm(2^n, k)."""
    assert distinct_projector(1, 2).trace().real == 2
    assert distinct_projector(2, 2).trace().real == 12
    assert distinct_dimension(4, 2) == 12
    assert distinct_dimension(2, 3) == 0


def test_distinct_projector_empty() -> None:
    """Test the empty flag when k exceeds the dimension."""
    op = distinct_projector(1, 3)
    assert "empty" in op.flags
    assert op.trace().real == 0


def test_local_distinct_projector() -> None:
    """Test the patchwise projector and its containment in the global one."""
    local = local_distinct_projector(PatchLayout(n=4, xi=2), 2).matrix
    full = distinct_projector(4, 2).matrix
    assert np.trace(local).real == 144
    assert np.allclose(local @ full, local)
    assert np.allclose(local @ local, local)


def test_patch_layout_pairs() -> None:
    """Test open-boundary even and odd pairs."""
    layout = PatchLayout(n=8, xi=2)
    assert layout.pairs("even") == [(0, 1), (2, 3)]
    assert layout.pairs("odd") == [(1, 2)]
    assert layout.pair_qubits(1, 2) == (2, 3, 4, 5)
    with pytest.raises(ConfigurationError):
        layout.pairs("middle")


def test_patch_layout_must_divide() -> None:
    """Test that xi must divide n."""
    with pytest.raises(ConfigurationError) as exc_info:
        PatchLayout(n=6, xi=4)
    assert exc_info.value.parameter == "xi"


def test_stabilization_key() -> None:
    """Test that paired values cancel."""
    assert stabilization_key([3, 1, 3, 2]) == (1, 2)
    assert stabilization_key([5, 5]) == ()


def test_restrict_words() -> None:
    """Test reading a word off a reordered qubit subset."""
    assert restrict_words(2, [1, 0]).tolist() == [0, 2, 1, 3]
    assert restrict_words(3, [0]).tolist() == [0, 0, 0, 0, 1, 1, 1, 1]


def test_partial_trace_of_product(rng: np.random.Generator) -> None:
    """Test partial trace on a product operator."""
    a = rng.normal(size=(2, 2))
    b = rng.normal(size=(4, 4))
    rho = np.kron(a, b)
    assert partial_trace(rho, [2, 4], [0]) == pytest.approx(a * np.trace(b))
    assert partial_trace(rho, [2, 4], [1]) == pytest.approx(b * np.trace(a))


def test_trace_norm_of_hermitian() -> None:
    """Test the trace norm of a diagonal operator."""
    assert trace_norm(np.diag([1.0, -2.0, 0.5])) == pytest.approx(3.5)
