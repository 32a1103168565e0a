from kdesign.__about__ import __version__
from kdesign.config import Settings, get_settings
from kdesign.designmetrics import (
    ErrorEstimate,
    ExperimentPlan,
    MomentEstimate,
    choi_error,
    haar_state_moment,
    haar_twirl_superop,
    measurable_experiment,
    moment_superop,
    relative_error_bound,
    state_design_error,
    state_moment,
    trace_distance,
    unitary_moment_choi,
    verify_blocked_phase_identity,
    verify_fact2,
    verify_fact5,
    verify_pfc_fact1,
)
from kdesign.ensembles import compose, sample_state, sample_unitary
from kdesign.exceptions import (
    AncillaNotRestoredError,
    ConfigurationError,
    ContractViolationError,
    DesignError,
    FieldMismatchError,
    PreconditionError,
    ResourceLimitError,
)
from kdesign.gf2field import FieldElem, FieldSpec, barrett_reduce, field_spec, gf_add, gf_mul
from kdesign.kwise import KWiseSeed, eval_horner, eval_tree, sample_seed, verify_kwise
from kdesign.lbtest import (
    CollisionConfig,
    CollisionReport,
    predicted_advantage,
    run_collision_test,
    threshold_star,
)
from kdesign.models import (
    CircuitMode,
    DesignFamily,
    EnsembleSpec,
    Independence,
    MomentMode,
    RunConfig,
    TwirlSource,
    Variant,
)
from kdesign.quantsim import DenseOp, PatchLayout, StateVec
from kdesign.revcircuit import (
    ReversibleCircuit,
    build_kwise_circuit,
    design_resource_calculator,
    simulate_reversible,
)
from kdesign.seeding import BitStream, SampleHandle

__all__ = [
    "AncillaNotRestoredError",
    "BitStream",
    "CircuitMode",
    "CollisionConfig",
    "CollisionReport",
    "ConfigurationError",
    "ContractViolationError",
    "DenseOp",
    "DesignError",
    "DesignFamily",
    "EnsembleSpec",
    "ErrorEstimate",
    "ExperimentPlan",
    "FieldElem",
    "FieldMismatchError",
    "FieldSpec",
    "Independence",
    "KWiseSeed",
    "MomentEstimate",
    "MomentMode",
    "PatchLayout",
    "PreconditionError",
    "ResourceLimitError",
    "ReversibleCircuit",
    "RunConfig",
    "SampleHandle",
    "Settings",
    "StateVec",
    "TwirlSource",
    "Variant",
    "__version__",
    "barrett_reduce",
    "build_kwise_circuit",
    "choi_error",
    "compose",
    "design_resource_calculator",
    "eval_horner",
    "eval_tree",
    "field_spec",
    "get_settings",
    "gf_add",
    "gf_mul",
    "haar_state_moment",
    "haar_twirl_superop",
    "measurable_experiment",
    "moment_superop",
    "predicted_advantage",
    "relative_error_bound",
    "run_collision_test",
    "sample_seed",
    "sample_state",
    "sample_unitary",
    "simulate_reversible",
    "state_design_error",
    "state_moment",
    "threshold_star",
    "trace_distance",
    "unitary_moment_choi",
    "verify_blocked_phase_identity",
    "verify_fact2",
    "verify_fact5",
    "verify_kwise",
    "verify_pfc_fact1",
]
