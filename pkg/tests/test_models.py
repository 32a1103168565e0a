"""Tests for kdesign models and exceptions."""

from pydantic import ValidationError
import pytest

from kdesign.exceptions import (
    ConfigurationError,
    DesignError,
    FieldMismatchError,
    PreconditionError,
    ResourceLimitError,
)
from kdesign.models import (
    EnsembleSpec,
    Independence,
    IndependenceMode,
    ReportFormat,
    RunConfig,
    Variant,
)


def test_independence_constructors() -> None:
    """Test the exact and k-wise constructors."""
    assert Independence.exact().mode is IndependenceMode.EXACT_FUNCTION
    kwise = Independence.kwise(4)
    assert kwise.mode is IndependenceMode.KWISE
    assert kwise.k == 4


def test_independence_kwise_requires_k() -> None:
    """Test that k-wise mode needs an order."""
    with pytest.raises(ConfigurationError) as exc_info:
        Independence(mode=IndependenceMode.KWISE)
    assert exc_info.value.parameter == "independence"


def test_ensemble_spec_json() -> None:
    """Test the JSON object form and its inverse."""
    spec = EnsembleSpec(variant=Variant.RANDOM_PHASE, n=3)
    payload = spec.to_json()
    assert payload == {
        "variant": "RandomPhase",
        "n": 3,
        "independence": {"mode": "exact_function"},
    }
    assert EnsembleSpec.from_json(payload) == spec


def test_composed_spec_json() -> None:
    """Test that factors are serialized for Composed specs."""
    factor = EnsembleSpec(variant=Variant.PFC, n=2)
    spec = EnsembleSpec(variant=Variant.COMPOSED, n=2, factors=(factor, factor))
    payload = spec.to_json()
    assert len(payload["factors"]) == 2
    assert EnsembleSpec.from_json(payload) == spec


def test_ensemble_spec_kinds() -> None:
    """Test state and unitary classification and patch counts."""
    haar = EnsembleSpec(variant=Variant.HAAR, n=2)
    assert haar.is_state
    assert haar.is_unitary
    assert not EnsembleSpec(variant=Variant.PFC, n=2).is_state
    assert EnsembleSpec(variant=Variant.BLOCKED_LRFC, n=8, xi=2).patches == 4
    assert EnsembleSpec(variant=Variant.LRFC, n=2).patches == 1


def test_composed_spec_checks() -> None:
    """Test factor validation."""
    with pytest.raises(PreconditionError):
        EnsembleSpec(variant=Variant.COMPOSED, n=2)
    with pytest.raises(ConfigurationError) as exc_info:
        EnsembleSpec(
            variant=Variant.COMPOSED,
            n=2,
            factors=(EnsembleSpec(variant=Variant.RANDOM_PHASE, n=2),),
        )
    assert exc_info.value.parameter == "variant"
    with pytest.raises(ConfigurationError) as exc_info:
        EnsembleSpec(
            variant=Variant.PFC, n=2, factors=(EnsembleSpec(variant=Variant.PFC, n=2),)
        )
    assert exc_info.value.parameter == "factors"


def test_ensemble_spec_field_bounds() -> None:
    """Test that n must be positive."""
    with pytest.raises(ValidationError):
        EnsembleSpec(variant=Variant.HAAR, n=0)


def test_run_config() -> None:
    """Test RunConfig defaults and strictness."""
    config = RunConfig(subcommand="verify fact1", master_seed=1)
    assert config.format is ReportFormat.JSON
    assert config.workers == 1
    with pytest.raises(ValidationError):
        RunConfig(subcommand="x", master_seed=1, colour="blue")
    with pytest.raises(ValidationError):
        RunConfig(subcommand="x", master_seed=1, workers=0)


def test_resource_limit_error() -> None:
    """Test ResourceLimitError attributes."""
    error = ResourceLimitError("dense dimension", 1024, 512)
    assert error.quantity == "dense dimension"
    assert error.value == 1024
    assert error.limit == 512
    assert "1024 > 512" in str(error)
    assert isinstance(error, DesignError)


def test_field_mismatch_error() -> None:
    """Test FieldMismatchError is also a TypeError."""
    error = FieldMismatchError(3, 4)
    assert error.left_m == 3
    assert error.right_m == 4
    assert isinstance(error, TypeError)


def test_configuration_error_is_a_precondition() -> None:
    """Test the exception hierarchy used for CLI exit codes."""
    error = ConfigurationError("xi", 3)
    assert isinstance(error, PreconditionError)
    assert error.reason == "Unsupported xi: 3"
