"""
Design Models
Pydantic models shared across ensembles, metrics and the CLI.
"""

from __future__ import annotations

from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from kdesign.exceptions import ConfigurationError, PreconditionError


class Variant(str, Enum):
    """Ensemble families."""

    RANDOM_PHASE = "RandomPhase"
    BLOCKED_PHASE = "BlockedPhase"
    PFC = "PFC"
    LRFC = "LRFC"
    BLOCKED_LRFC = "BlockedLRFC"
    AMPLIFIED_BLOCKED_LRFC = "AmplifiedBlockedLRFC"
    HAAR = "Haar"
    IDENTITY = "Identity"
    COMPOSED = "Composed"


STATE_VARIANTS = frozenset({Variant.RANDOM_PHASE, Variant.BLOCKED_PHASE, Variant.HAAR})
UNITARY_VARIANTS = frozenset(
    {
        Variant.PFC,
        Variant.LRFC,
        Variant.BLOCKED_LRFC,
        Variant.AMPLIFIED_BLOCKED_LRFC,
        Variant.HAAR,
        Variant.IDENTITY,
        Variant.COMPOSED,
    }
)
PATCHED_VARIANTS = frozenset(
    {Variant.BLOCKED_PHASE, Variant.BLOCKED_LRFC, Variant.AMPLIFIED_BLOCKED_LRFC}
)


class IndependenceMode(str, Enum):
    EXACT_FUNCTION = "exact_function"
    KWISE = "kwise"


class Independence(BaseModel):
    """Randomness source for every random function inside an ensemble.

    ``kwise`` carries the independence of the polynomial family directly; a k-design needs
    ``k = 2 * design_order`` since each function appears in both bra and ket.
    """

    model_config = ConfigDict(frozen=True)

    mode: IndependenceMode = IndependenceMode.EXACT_FUNCTION
    k: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_k(self) -> Independence:
        if self.mode is IndependenceMode.KWISE and self.k is None:
            raise ConfigurationError("independence", self.mode.value, "kwise mode requires k")
        return self

    @classmethod
    def exact(cls) -> Independence:
        return cls()

    @classmethod
    def kwise(cls, k: int) -> Independence:
        return cls(mode=IndependenceMode.KWISE, k=k)


class EnsembleSpec(BaseModel):
    """Declarative description of a random state or unitary family."""

    model_config = ConfigDict(frozen=True)

    variant: Variant
    n: int = Field(ge=1)
    xi: int | None = None
    p: int | None = None
    independence: Independence = Field(default_factory=Independence)
    factors: tuple[EnsembleSpec, ...] = ()

    @model_validator(mode="after")
    def _check_shape(self) -> EnsembleSpec:
        if self.variant in PATCHED_VARIANTS:
            if self.xi is None or self.xi < 1:
                raise ConfigurationError("xi", self.xi, f"{self.variant.value} requires xi >= 1")
            if self.n % self.xi:
                raise ConfigurationError("xi", self.xi, f"xi={self.xi} must divide n={self.n}")
            patches = self.n // self.xi
            if patches < 2 or patches % 2:
                raise ConfigurationError(
                    "xi", self.xi, f"n/xi = {patches} patches must be even and at least 2"
                )
        if self.variant is Variant.AMPLIFIED_BLOCKED_LRFC and (self.p is None or self.p < 1):
            raise ConfigurationError("p", self.p, "AmplifiedBlockedLRFC requires p >= 1")
        if self.variant is Variant.LRFC and self.n % 2:
            raise ConfigurationError("n", self.n, "LRFC splits n into two equal halves")
        if self.variant is Variant.COMPOSED:
            if not self.factors:
                raise PreconditionError("Composed ensemble needs at least one factor")
            sizes = {f.n for f in self.factors}
            if sizes != {self.n}:
                raise PreconditionError(f"Composed factors act on mixed n: {sorted(sizes)}")
            for f in self.factors:
                if not f.is_unitary:
                    raise ConfigurationError("variant", f.variant.value, "not a unitary ensemble")
        elif self.factors:
            raise ConfigurationError("factors", len(self.factors), "only Composed has factors")
        return self

    @property
    def is_state(self) -> bool:
        return self.variant in STATE_VARIANTS

    @property
    def is_unitary(self) -> bool:
        return self.variant in UNITARY_VARIANTS

    @property
    def patches(self) -> int:
        return self.n // self.xi if self.xi else 1

    def to_json(self) -> dict[str, Any]:
        """JSON object form; ``factors`` only appears for Composed."""
        payload = self.model_dump(mode="json", exclude_none=True)
        if not self.factors:
            payload.pop("factors")
        return payload

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> EnsembleSpec:
        return cls.model_validate(payload)


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI invocation."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    subcommand: str
    params: dict[str, Any] = Field(default_factory=dict)
    master_seed: int = Field(ge=0, lt=2**64)
    output_path: str | None = None
    format: ReportFormat = ReportFormat.JSON
    workers: int = Field(default=1, ge=1)


class CircuitMode(str, Enum):
    """Schedules for the k-wise function circuits."""

    LOW_DEPTH = "low_depth"
    LOW_ANCILLA = "low_ancilla"


class DesignFamily(str, Enum):
    BLOCKED_PHASE = "blocked_phase"
    BLOCKED_LRFC = "blocked_lrfc"


class MomentMode(str, Enum):
    """How an ensemble average is taken."""

    EXACT_ENUM = "exact_enum"
    MONTE_CARLO = "monte_carlo"


class TwirlSource(str, Enum):
    CLIFFORD = "clifford"
    HAAR = "haar"
