"""Tests for moments, design errors and the operator identity checks."""

import numpy as np
import pytest

from kdesign.config import Settings
from kdesign.designmetrics import (
    ExperimentPlan,
    blocked_phase_moment_closed_form,
    choi_error,
    error_after_composition,
    experiment_output,
    haar_state_moment,
    haar_twirl_superop,
    kron_power,
    lrfc_error_bound,
    measurable_experiment,
    moment_superop,
    phase_state_moment_closed_form,
    random_phase_error_bound,
    random_plan,
    relative_error_bound,
    relative_error_factor,
    simulate_query,
    state_design_error,
    state_moment,
    trace_distance,
    verify_blocked_phase_identity,
    verify_fact2,
    verify_fact5,
    verify_pfc_fact1,
)
from kdesign.ensembles import compose, enumerate_unitaries
from kdesign.exceptions import (
    ConfigurationError,
    ContractViolationError,
    PreconditionError,
    ResourceLimitError,
)
from kdesign.models import EnsembleSpec, Independence, MomentMode, TwirlSource, Variant
from kdesign.quantsim import PatchLayout, permutation_op, sample_haar_unitary
from kdesign.seeding import SampleHandle


def _phase_error(d: int) -> float:
    return 4 * (d - 1) / (d * (d + 1))


@pytest.fixture
def handle() -> SampleHandle:
    """Root handle for Monte-Carlo runs."""
    return SampleHandle(master_seed=77, name="metrics")


@pytest.fixture
def settings() -> Settings:
    """Explicit settings so the environment cannot leak in."""
    return Settings(master_seed=77, bootstrap_resamples=100, workers=1, log_level="WARNING")


# ============== State moments ==============


def test_haar_state_moment_small_cases() -> None:
    """Test I/2^n for k = 1 and (I + SWAP)/6 for one qubit, k = 2."""
    assert np.allclose(haar_state_moment(2, 1).matrix, np.eye(4) / 4)
    swap = permutation_op((1, 0), 1, 2).matrix
    assert np.allclose(haar_state_moment(1, 2).matrix, (np.eye(4) + swap) / 6)
    assert haar_state_moment(2, 3).trace().real == pytest.approx(1.0)


def test_haar_state_moment_limits() -> None:
    """Test the size limits of the symmetric projector."""
    with pytest.raises(ResourceLimitError):
        haar_state_moment(7, 2)


def test_random_phase_first_moment_is_maximally_mixed() -> None:
    """Test that phase states average to I/2^n."""
    spec = EnsembleSpec(variant=Variant.RANDOM_PHASE, n=3)
    assert np.allclose(state_moment(spec, 1).operator.matrix, np.eye(8) / 8)


def test_phase_moments_match_closed_forms() -> None:
    """Test enumerated moments against the stabilization formulas."""
    phase = EnsembleSpec(variant=Variant.RANDOM_PHASE, n=2)
    got = state_moment(phase, 2).operator.matrix
    assert np.allclose(got, phase_state_moment_closed_form(2, 2).matrix)
    blocked = EnsembleSpec(variant=Variant.BLOCKED_PHASE, n=4, xi=1)
    got = state_moment(blocked, 2).operator.matrix
    assert np.allclose(got, blocked_phase_moment_closed_form(PatchLayout(n=4, xi=1), 2).matrix)


@pytest.mark.parametrize("n", [2, 4])
def test_random_phase_two_copy_error(n: int) -> None:
    """Test ||chi - chi_H||_1 = 4(d-1)/(d(d+1)) for phase states, k = 2."""
    spec = EnsembleSpec(variant=Variant.RANDOM_PHASE, n=n)
    result = state_design_error(spec, 2)
    assert result.estimate == pytest.approx(_phase_error(1 << n))
    assert result.estimate <= random_phase_error_bound(n, 2)
    assert result.mode is MomentMode.EXACT_ENUM
    assert result.std_error is None


def test_kwise_phase_matches_exact_when_fully_independent() -> None:
    """Test that 4-wise functions on four points reproduce the exact moment."""
    exact = EnsembleSpec(variant=Variant.BLOCKED_PHASE, n=2, xi=1)
    kwise = EnsembleSpec(
        variant=Variant.BLOCKED_PHASE, n=2, xi=1, independence=Independence.kwise(4)
    )
    got = state_moment(kwise, 2).operator.matrix
    assert np.allclose(got, state_moment(exact, 2).operator.matrix)
    assert state_design_error(kwise, 2).estimate == pytest.approx(_phase_error(4))


def test_haar_state_error_is_zero() -> None:
    """Test the reference ensemble against itself."""
    assert state_design_error(EnsembleSpec(variant=Variant.HAAR, n=2), 2).estimate == 0.0


def test_state_moment_preconditions() -> None:
    """Test state-moment argument checks."""
    with pytest.raises(ConfigurationError):
        state_moment(EnsembleSpec(variant=Variant.LRFC, n=2), 2)
    phase = EnsembleSpec(variant=Variant.RANDOM_PHASE, n=2)
    with pytest.raises(PreconditionError):
        state_moment(phase, 0)
    with pytest.raises(PreconditionError):
        state_moment(phase, 2, MomentMode.MONTE_CARLO, budget=1)
    with pytest.raises(ResourceLimitError):
        state_moment(EnsembleSpec(variant=Variant.RANDOM_PHASE, n=7), 2)


def test_monte_carlo_state_error(handle: SampleHandle, settings: Settings) -> None:
    """Test a sampled error estimate against the exact value."""
    spec = EnsembleSpec(variant=Variant.RANDOM_PHASE, n=2)
    result = state_design_error(
        spec, 2, MomentMode.MONTE_CARLO, budget=4000, handle=handle, settings=settings
    )
    assert result.mode is MomentMode.MONTE_CARLO
    assert result.samples == 4000
    assert result.raw == pytest.approx(_phase_error(4), abs=0.2)
    assert result.ci_low is not None
    assert result.ci_high is not None
    assert result.ci_low <= result.ci_high
    assert result.estimate >= 0.0


def test_monte_carlo_is_reproducible(handle: SampleHandle, settings: Settings) -> None:
    """Test that the same handle gives identical estimates for any worker count."""
    spec = EnsembleSpec(variant=Variant.BLOCKED_PHASE, n=4, xi=2)
    runs = [
        state_design_error(
            spec, 2, MomentMode.MONTE_CARLO, 200, handle, workers=w, settings=settings
        )
        for w in (1, 1, 3)
    ]
    assert runs[0] == runs[1]
    assert runs[0] == runs[2]


# ============== Unitary moments ==============


def test_haar_twirl_is_a_projector() -> None:
    """Test T^2 = T with rank k! for d >= k."""
    t = haar_twirl_superop(1, 2)
    assert np.allclose(t @ t, t)
    assert np.trace(t).real == pytest.approx(2.0)


def test_haar_twirl_absorbs_fixed_unitaries() -> None:
    """Test T M_V = M_V T = T for a fixed unitary V."""
    t = haar_twirl_superop(1, 2)
    v = kron_power(sample_haar_unitary(2, np.random.default_rng(5)).matrix, 2)
    m_v = np.kron(v, v.conj())
    assert np.allclose(t @ m_v, t)
    assert np.allclose(m_v @ t, t)


def test_moment_superop_of_haar() -> None:
    """Test that the Haar ensemble returns the twirl itself."""
    got = moment_superop(EnsembleSpec(variant=Variant.HAAR, n=1), 2).operator.matrix
    assert np.allclose(got, haar_twirl_superop(1, 2))


def test_composed_moment_is_product() -> None:
    """Test M(U1 U2) = M1 M2 against an explicit average."""
    pfc = EnsembleSpec(variant=Variant.PFC, n=1)
    explicit = np.zeros((16, 16), dtype=np.complex128)
    for weight, u in enumerate_unitaries(pfc):
        v = kron_power(u.matrix, 2)
        explicit += weight * np.kron(v, v.conj())
    assert np.allclose(moment_superop(pfc, 2).operator.matrix, explicit)
    composed = moment_superop(compose([pfc, pfc]), 2).operator.matrix
    assert np.allclose(composed, explicit @ explicit)


def test_pfc_single_qubit_is_exact_two_design() -> None:
    """Test that a Clifford layer makes the one-qubit ensemble exact for k = 2."""
    result = choi_error(EnsembleSpec(variant=Variant.PFC, n=1), 2)
    assert result.estimate == pytest.approx(0.0, abs=1e-9)


def test_identity_choi_error() -> None:
    """Test ||Phi - I/4||_1 = 3/2 for the identity channel on one qubit."""
    result = choi_error(EnsembleSpec(variant=Variant.IDENTITY, n=1), 1)
    assert result.estimate == pytest.approx(1.5)


def test_blocked_lrfc_composition_is_product() -> None:
    """Test the composed exact moment of two blocked LRFC layers."""
    layer = EnsembleSpec(variant=Variant.BLOCKED_LRFC, n=2, xi=1)
    single = moment_superop(layer, 1).operator.matrix
    double = moment_superop(compose([layer, layer]), 1).operator.matrix
    assert np.allclose(double, single @ single)
    assert choi_error(compose([layer, layer]), 1).estimate >= 0.0


def test_superop_limits() -> None:
    """Test the dense superoperator limit."""
    with pytest.raises(ResourceLimitError):
        moment_superop(EnsembleSpec(variant=Variant.IDENTITY, n=4), 2)
    with pytest.raises(ConfigurationError):
        moment_superop(EnsembleSpec(variant=Variant.RANDOM_PHASE, n=1), 1)


# ============== Measurable error ==============


def test_identity_plan_measurable_error() -> None:
    """Test U|0> for the identity ensemble against I/4."""
    plan = ExperimentPlan.identity(2, 1)
    result = measurable_experiment(EnsembleSpec(variant=Variant.IDENTITY, n=2), plan)
    assert result.estimate == pytest.approx(1.5)
    haar = measurable_experiment(EnsembleSpec(variant=Variant.HAAR, n=2), plan)
    assert haar.estimate == pytest.approx(0.0, abs=1e-9)


def test_experiment_output_of_single_unitary(handle: SampleHandle) -> None:
    """Test the query-basis contraction against direct simulation."""
    plan = random_plan(1, 2, 1, handle)
    v = sample_haar_unitary(2, np.random.default_rng(8)).matrix
    vk = kron_power(v, 2)
    out = simulate_query(plan, v)
    assert np.allclose(experiment_output(plan, np.kron(vk, vk.conj())), np.outer(out, out.conj()))


def test_monte_carlo_measurable_error(handle: SampleHandle, settings: Settings) -> None:
    """Test a sampled experiment on an exact two-design."""
    plan = random_plan(1, 2, 1, handle)
    spec = EnsembleSpec(variant=Variant.PFC, n=1)
    result = measurable_experiment(
        spec, plan, 2000, MomentMode.MONTE_CARLO, handle, settings=settings
    )
    assert result.raw < 0.25
    assert result.samples == 2000


@pytest.mark.slow
def test_lrfc_measurable_error_two_qubits(handle: SampleHandle, settings: Settings) -> None:
    """Test that LRFC on two qubits passes a random two-query experiment."""
    plan = random_plan(2, 2, 1, handle)
    spec = EnsembleSpec(variant=Variant.LRFC, n=2)
    result = measurable_experiment(
        spec, plan, 10_000, MomentMode.MONTE_CARLO, handle, settings=settings
    )
    assert result.estimate <= 0.3
    assert result.samples == 10_000


def test_measurable_experiment_size_mismatch(handle: SampleHandle) -> None:
    """Test that the plan and ensemble must act on the same qubits."""
    plan = ExperimentPlan.identity(1, 1)
    with pytest.raises(ContractViolationError):
        measurable_experiment(EnsembleSpec(variant=Variant.LRFC, n=2), plan)


def test_experiment_plan_validation() -> None:
    """Test plan shape, size and unitarity checks."""
    with pytest.raises(ResourceLimitError):
        ExperimentPlan(8, 1, 3, ())
    with pytest.raises(ContractViolationError):
        ExperimentPlan(1, 2, 0, (np.eye(2),))
    with pytest.raises(ContractViolationError):
        ExperimentPlan(1, 1, 0, (np.eye(2), 2 * np.eye(2)))
    with pytest.raises(PreconditionError):
        ExperimentPlan(1, 0, 0, (np.eye(2),))


# ============== Operator identities ==============


@pytest.mark.parametrize(("n", "k"), [(1, 1), (2, 1), (1, 2), (2, 2)])
def test_pfc_identity_holds(n: int, k: int) -> None:
    """Test the permutation-phase twirl identity on the distinct subspace."""
    assert verify_pfc_fact1(n, k) < 1e-10


def test_pfc_identity_limit() -> None:
    """Test the exhaustive size limit."""
    with pytest.raises(ResourceLimitError):
        verify_pfc_fact1(3, 2)


def test_distinct_twirl_k1(handle: SampleHandle, settings: Settings) -> None:
    """Test that the one-copy distinct projector is the identity."""
    result = verify_fact2(1, 1, trials=64, handle=handle, resamples=50, settings=settings)
    assert result.estimate == pytest.approx(0.0, abs=1e-12)


def test_distinct_twirl_two_qubits(handle: SampleHandle, settings: Settings) -> None:
    """Test ||I - E[C^dag P_dist C]|| = d/dim(Sym) = 0.4 for n = 2, k = 2."""
    result = verify_fact2(2, 2, trials=4000, handle=handle, settings=settings)
    assert result.raw == pytest.approx(0.4, abs=0.06)


@pytest.mark.slow
def test_distinct_twirl_sources_agree(handle: SampleHandle, settings: Settings) -> None:
    """Test that Clifford and Haar twirls give the same norm."""
    clifford = verify_fact2(2, 2, TwirlSource.CLIFFORD, 10_000, handle, settings=settings)
    haar = verify_fact2(2, 2, TwirlSource.HAAR, 10_000, handle, settings=settings)
    assert clifford.raw == pytest.approx(haar.raw, abs=0.05)
    assert haar.raw == pytest.approx(0.4, abs=0.05)


@pytest.mark.parametrize(("n", "k", "expected"), [(1, 1, 1.0), (1, 2, 0.5), (2, 2, 0.75)])
def test_postselection_identity(n: int, k: int, expected: float, handle: SampleHandle) -> None:
    """Test tr(B (1 x P_dist) |Psi><Psi|) = D/2^(nk) over random plans."""
    for i in range(20):
        plan = random_plan(n, k, 1, handle.draw(i))
        assert verify_fact5(plan) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize(("n", "xi"), [(2, 1), (4, 1), (4, 2)])
def test_blocked_phase_identity(n: int, xi: int) -> None:
    """Test that blocked and global phase moments agree on the local distinct subspace."""
    assert verify_blocked_phase_identity(n, xi, 2) < 1e-10


def test_blocked_phase_identity_limits() -> None:
    """Test the supported sizes."""
    with pytest.raises(ConfigurationError):
        verify_blocked_phase_identity(6, 3, 2)
    with pytest.raises(ResourceLimitError):
        verify_blocked_phase_identity(6, 1, 2)


# ============== Error bounds ==============


def test_relative_error_factor() -> None:
    """Test 2^(nk) C(2^n + k - 1, k)."""
    assert relative_error_factor(1, 1) == 4
    assert relative_error_factor(2, 2) == 160
    assert relative_error_bound(0.01, 2, 2) == pytest.approx(1.6)
    with pytest.raises(PreconditionError):
        relative_error_bound(-0.1, 1, 1)


def test_error_bounds() -> None:
    """Test composition and the closed-form bounds."""
    assert error_after_composition(0.1, 2) == pytest.approx(0.01)
    with pytest.raises(PreconditionError):
        error_after_composition(0.1, 0)
    assert random_phase_error_bound(4, 2) == pytest.approx(1.0)
    assert lrfc_error_bound(4, 1) == pytest.approx(1.5)


def test_trace_distance_is_full_trace_norm() -> None:
    """Test that no factor 1/2 is applied."""
    assert trace_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(2.0)
