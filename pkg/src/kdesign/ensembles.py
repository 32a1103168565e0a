"""
Random state and unitary ensembles.

Every variant is lowered to a list of primitive steps in application order (Clifford blocks,
phase oracles, conditional shuffles, basis permutations, Haar blocks). Sampling draws the
randomness for each step from a :class:`SampleHandle`; exhaustive enumeration lists every
choice of each step, which are independent of one another.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from enum import Enum
import itertools
import logging
import math

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict

from kdesign.exceptions import ConfigurationError, PreconditionError, ResourceLimitError
from kdesign.gf2field import field_spec
from kdesign.kwise import eval_vector, eval_words, sample_seed, seed_words, truth_table
from kdesign.models import EnsembleSpec, Independence, IndependenceMode, Variant
from kdesign.quantsim import (
    MAX_HAAR_DIM,
    ComplexArray,
    DenseOp,
    PatchLayout,
    StateVec,
    apply_dense,
    apply_permutation,
    apply_phase_table,
    apply_shuffle_table,
    embed_operator,
    enumerate_cliffords,
    num_cliffords,
    place_words,
    restrict_words,
    sample_clifford,
    sample_haar_unitary,
)
from kdesign.seeding import BitStream, SampleHandle

logger = logging.getLogger(__name__)

MAX_SAMPLED_STATE_QUBITS = 12
MAX_DENSE_UNITARY_QUBITS = 6
# P is an exact uniform permutation of 2^n items.
MAX_PFC_QUBITS = 3
MAX_ENUMERATION = 1 << 20

# Product order: the rightmost layer acts first.
BLOCKED_LRFC_LAYERS = ("S_o", "F_e", "F_o", "S_e", "C_o")


class StepKind(str, Enum):
    CLIFFORD = "clifford"
    PHASE = "phase"
    SHUFFLE = "shuffle"
    PERMUTATION = "permutation"
    HAAR = "haar"


class Step(BaseModel):
    """One primitive random gate; shuffles read ``qubits`` and XOR into ``target``."""

    model_config = ConfigDict(frozen=True)

    kind: StepKind
    layer: str
    qubits: tuple[int, ...]
    target: tuple[int, ...] = ()


def layout_of(spec: EnsembleSpec) -> PatchLayout:
    if spec.xi is None:
        raise ConfigurationError("variant", spec.variant.value, "has no patch layout")
    return PatchLayout(n=spec.n, xi=spec.xi)


def _lrfc_steps(left: tuple[int, ...], right: tuple[int, ...], layer: str = "") -> list[Step]:
    block = left + right
    return [
        Step(kind=StepKind.CLIFFORD, layer=layer or "C", qubits=block),
        Step(kind=StepKind.PHASE, layer=layer or "F", qubits=block),
        Step(kind=StepKind.SHUFFLE, layer=layer or "S_R", qubits=left, target=right),
        Step(kind=StepKind.SHUFFLE, layer=layer or "S_L", qubits=right, target=left),
    ]


def steps(spec: EnsembleSpec) -> list[Step]:
    """Primitive steps of one draw, in the order they act."""
    n, variant = spec.n, spec.variant
    everything = tuple(range(n))
    if variant is Variant.RANDOM_PHASE:
        return [Step(kind=StepKind.PHASE, layer="F", qubits=everything)]
    if variant is Variant.BLOCKED_PHASE:
        layout = layout_of(spec)
        return [
            Step(kind=StepKind.PHASE, layer=f"F_{parity[0]}", qubits=layout.pair_qubits(a, b))
            for parity in ("odd", "even")
            for a, b in layout.pairs(parity)
        ]
    if variant is Variant.PFC:
        if n > MAX_PFC_QUBITS:
            raise ResourceLimitError("PFC qubits (exact permutation)", n, MAX_PFC_QUBITS)
        return [
            Step(kind=StepKind.CLIFFORD, layer="C", qubits=everything),
            Step(kind=StepKind.PHASE, layer="F", qubits=everything),
            Step(kind=StepKind.PERMUTATION, layer="P", qubits=everything),
        ]
    if variant is Variant.LRFC:
        half = n // 2
        return _lrfc_steps(everything[:half], everything[half:])
    if variant is Variant.BLOCKED_LRFC:
        layout = layout_of(spec)
        patches = layout.patches
        out = [
            Step(kind=StepKind.CLIFFORD, layer="C_o", qubits=patches[a])
            for a in range(1, layout.count, 2)
        ]
        out += [
            Step(kind=StepKind.SHUFFLE, layer="S_e", qubits=patches[a], target=patches[b])
            for a, b in layout.pairs("odd")
        ]
        for parity in ("odd", "even"):
            out += [
                Step(kind=StepKind.PHASE, layer=f"F_{parity[0]}", qubits=layout.pair_qubits(a, b))
                for a, b in layout.pairs(parity)
            ]
        out += [
            Step(kind=StepKind.SHUFFLE, layer="S_o", qubits=patches[a], target=patches[b])
            for a, b in layout.pairs("even")
        ]
        return out
    if variant is Variant.AMPLIFIED_BLOCKED_LRFC:
        layout = layout_of(spec)
        out = []
        for parity in ("odd", "even"):
            for a, b in layout.pairs(parity):
                for _ in range(spec.p or 1):
                    out += _lrfc_steps(layout.patches[a], layout.patches[b], f"LRFC_{parity[0]}")
        return out
    if variant is Variant.HAAR:
        return [Step(kind=StepKind.HAAR, layer="U", qubits=everything)]
    if variant is Variant.IDENTITY:
        return []
    return [s for factor in reversed(spec.factors) for s in steps(factor)]


def layers(spec: EnsembleSpec) -> tuple[str, ...]:
    """Layer names in product order (rightmost acts first)."""
    if spec.variant is Variant.BLOCKED_LRFC:
        return BLOCKED_LRFC_LAYERS
    names: list[str] = []
    for step in reversed(steps(spec)):
        if step.layer not in names:
            names.append(step.layer)
    return tuple(names)


def compose(specs: Sequence[EnsembleSpec]) -> EnsembleSpec:
    """U = U_1 U_2 ... with independent draws per factor."""
    if not specs:
        raise PreconditionError("compose needs at least one ensemble")
    return EnsembleSpec(variant=Variant.COMPOSED, n=specs[0].n, factors=tuple(specs))


# ============== Sampling ==============


class _Source:
    """Randomness for the functions of one draw."""

    def __init__(self, rng: np.random.Generator, independence: Independence) -> None:
        self.rng = rng
        self.stream = BitStream(rng)
        self.independence = independence

    def _seed_values(self, width: int) -> NDArray[np.int64]:
        seed = sample_seed(field_spec(width), self.independence.k or 1, self.stream)
        return eval_vector(seed, np.arange(1 << width, dtype=np.uint64)).astype(np.int64)

    def phase_table(self, width: int) -> NDArray[np.int64]:
        if self.independence.mode is IndependenceMode.KWISE:
            seed = sample_seed(field_spec(width), self.independence.k or 1, self.stream)
            return truth_table(seed).astype(np.int64)
        return self.rng.integers(0, 2, size=1 << width)

    def value_table(self, width: int) -> NDArray[np.int64]:
        if self.independence.mode is IndependenceMode.KWISE:
            return self._seed_values(width)
        return self.rng.integers(0, 1 << width, size=1 << width)

    def draw(self, step: Step) -> NDArray[np.generic]:
        w = len(step.qubits)
        if step.kind is StepKind.CLIFFORD:
            return sample_clifford(w, self.rng).matrix
        if step.kind is StepKind.PHASE:
            return self.phase_table(w)
        if step.kind is StepKind.SHUFFLE:
            return self.value_table(w)
        if step.kind is StepKind.PERMUTATION:
            return self.rng.permutation(1 << w)
        return sample_haar_unitary(1 << w, self.rng).matrix


Drawn = list[tuple[Step, NDArray[np.generic]]]


def draw(spec: EnsembleSpec, handle: SampleHandle) -> Drawn:
    """All randomness of one sample, step by step in application order."""
    if spec.variant is Variant.COMPOSED:
        out: Drawn = []
        for i in reversed(range(len(spec.factors))):
            out += draw(spec.factors[i], handle.child(f"factor{i}"))
        return out
    source = _Source(handle.rng(), spec.independence)
    return [(step, source.draw(step)) for step in steps(spec)]


def apply_step(s: StateVec, step: Step, payload: NDArray[np.generic]) -> StateVec:
    if step.kind in (StepKind.CLIFFORD, StepKind.HAAR):
        return apply_dense(s, step.qubits, payload)
    if step.kind is StepKind.PHASE:
        return apply_phase_table(s, step.qubits, payload)
    if step.kind is StepKind.SHUFFLE:
        return apply_shuffle_table(s, step.qubits, step.target, payload)
    return apply_permutation(s, payload)


def step_matrix(step: Step, payload: NDArray[np.generic], n: int) -> ComplexArray:
    """Dense 2^n matrix of one drawn step."""
    return _step_matrices(step, np.asarray(payload)[None], n)[0]


def _step_matrices(step: Step, payloads: NDArray[np.generic], n: int) -> ComplexArray:
    d = 1 << n
    count = payloads.shape[0]
    if step.kind in (StepKind.CLIFFORD, StepKind.HAAR):
        if len(step.qubits) == n:
            return payloads.astype(np.complex128)
        return np.stack([embed_operator(u, step.qubits, n) for u in payloads])
    cols = np.arange(d)
    mats = np.zeros((count, d, d), dtype=np.complex128)
    if step.kind is StepKind.PHASE:
        signs = 1 - 2 * (payloads[:, restrict_words(n, step.qubits)] & 1)
        mats[:, cols, cols] = signs
        return mats
    if step.kind is StepKind.SHUFFLE:
        h = payloads[:, restrict_words(n, step.qubits)]
        rows = cols[None, :] ^ place_words(h, n, step.target)
    else:
        rows = payloads.astype(np.int64)
    mats[np.arange(count)[:, None], rows, cols[None, :]] = 1
    return mats


def sample_state(spec: EnsembleSpec, handle: SampleHandle) -> StateVec:
    if not spec.is_state:
        raise ConfigurationError("variant", spec.variant.value, "not a state ensemble")
    if spec.n > MAX_SAMPLED_STATE_QUBITS:
        raise ResourceLimitError("sampled state qubits", spec.n, MAX_SAMPLED_STATE_QUBITS)
    if spec.variant is Variant.HAAR:
        rng = handle.rng()
        if 1 << spec.n <= MAX_HAAR_DIM:
            return StateVec(spec.n, sample_haar_unitary(1 << spec.n, rng).matrix[:, 0].copy())
        g = rng.normal(size=1 << spec.n) + 1j * rng.normal(size=1 << spec.n)
        return StateVec(spec.n, g / np.linalg.norm(g))
    s = StateVec.plus(spec.n)
    for step, payload in draw(spec, handle):
        s = apply_step(s, step, payload)
    return s


def apply_sample(spec: EnsembleSpec, handle: SampleHandle, state: StateVec) -> StateVec:
    """Apply the unitary drawn for ``handle`` without forming its matrix."""
    if not spec.is_unitary:
        raise ConfigurationError("variant", spec.variant.value, "not a unitary ensemble")
    if state.n != spec.n:
        raise ConfigurationError("state qubits", state.n, f"ensemble acts on {spec.n}")
    for step, payload in draw(spec, handle):
        state = apply_step(state, step, payload)
    return state


def sample_unitary(spec: EnsembleSpec, handle: SampleHandle) -> DenseOp:
    if not spec.is_unitary:
        raise ConfigurationError("variant", spec.variant.value, "not a unitary ensemble")
    if spec.n > MAX_DENSE_UNITARY_QUBITS:
        raise ResourceLimitError("dense unitary qubits", spec.n, MAX_DENSE_UNITARY_QUBITS)
    u = np.eye(1 << spec.n, dtype=np.complex128)
    for step, payload in draw(spec, handle):
        u = step_matrix(step, payload, spec.n) @ u
    return DenseOp(u)


# ============== Exhaustive enumeration ==============


def _check_count(what: str, count: int) -> None:
    if count > MAX_ENUMERATION:
        raise ResourceLimitError(what, count, MAX_ENUMERATION)


def _kwise_values(width: int, k: int) -> NDArray[np.int64]:
    _check_count("k-wise seeds", 1 << (width * k))
    spec = field_spec(width)
    words = seed_words(spec, k)
    return eval_words(words, np.arange(1 << width, dtype=np.uint64), spec).astype(np.int64)


def phase_options(width: int, independence: Independence) -> NDArray[np.int64]:
    """Every phase table of the family, one per row (uniformly weighted)."""
    if independence.mode is IndependenceMode.KWISE:
        return _kwise_values(width, independence.k or 1) & 1
    size = 1 << width
    if size > 20:
        raise ResourceLimitError("phase tables 2^(2^w)", 1 << size, MAX_ENUMERATION)
    options = np.arange(1 << size, dtype=np.int64)[:, None]
    return (options >> np.arange(size, dtype=np.int64)[None, :]) & 1


def value_options(width: int, independence: Independence) -> NDArray[np.int64]:
    """Every w-bit to w-bit function table of the family, one per row."""
    if independence.mode is IndependenceMode.KWISE:
        return _kwise_values(width, independence.k or 1)
    size = 1 << width
    _check_count("function tables", size**size)
    options = np.arange(size**size, dtype=np.int64)[:, None]
    return (options >> (width * np.arange(size, dtype=np.int64))[None, :]) & (size - 1)


def _payload_options(step: Step, independence: Independence) -> NDArray[np.generic]:
    w = len(step.qubits)
    if step.kind is StepKind.CLIFFORD:
        return enumerate_cliffords(w)
    if step.kind is StepKind.PHASE:
        return phase_options(w, independence)
    if step.kind is StepKind.SHUFFLE:
        return value_options(w, independence)
    if step.kind is StepKind.PERMUTATION:
        _check_count("basis permutations", math.factorial(1 << w))
        return np.array(list(itertools.permutations(range(1 << w))), dtype=np.int64)
    raise ConfigurationError("variant", "Haar", "continuous ensembles cannot be enumerated")


StepTable = tuple[NDArray[np.float64], ComplexArray]


def step_tables(spec: EnsembleSpec) -> list[StepTable]:
    """(weights, matrices) for every step in application order."""
    if spec.variant is Variant.COMPOSED:
        return [t for factor in reversed(spec.factors) for t in step_tables(factor)]
    if spec.n > MAX_DENSE_UNITARY_QUBITS:
        raise ResourceLimitError("dense unitary qubits", spec.n, MAX_DENSE_UNITARY_QUBITS)
    out = []
    for step in steps(spec):
        options = _payload_options(step, spec.independence)
        count = options.shape[0]
        out.append((np.full(count, 1.0 / count), _step_matrices(step, options, spec.n)))
    return out


def enumerate_unitaries(spec: EnsembleSpec) -> Iterator[tuple[float, DenseOp]]:
    """Lazily yield (weight, U) over the whole randomness space."""
    if not spec.is_unitary:
        raise ConfigurationError("variant", spec.variant.value, "not a unitary ensemble")
    tables = step_tables(spec)
    total = math.prod(len(w) for w, _ in tables)
    logger.info(f"enumerating {total} unitaries of {spec.variant.value}(n={spec.n})")
    eye = np.eye(1 << spec.n, dtype=np.complex128)
    for combo in itertools.product(*(range(len(w)) for w, _ in tables)):
        weight = 1.0
        u = eye
        for (weights, mats), c in zip(tables, combo, strict=True):
            weight *= float(weights[c])
            u = mats[c] @ u
        yield weight, DenseOp(u)


def state_table(spec: EnsembleSpec) -> tuple[NDArray[np.float64], ComplexArray]:
    """Weights and amplitudes (one state per row) over the whole randomness space."""
    if spec.variant not in (Variant.RANDOM_PHASE, Variant.BLOCKED_PHASE):
        raise ConfigurationError("variant", spec.variant.value, "state ensemble not enumerable")
    n = spec.n
    weights = np.ones(1)
    amps = StateVec.plus(n).amps[None, :]
    for step in steps(spec):
        options = phase_options(len(step.qubits), spec.independence)
        _check_count("enumerated states", amps.shape[0] * options.shape[0])
        signs = 1 - 2 * options[:, restrict_words(n, step.qubits)]
        amps = (amps[:, None, :] * signs[None, :, :]).reshape(-1, 1 << n)
        weights = np.outer(weights, np.full(options.shape[0], 1.0 / options.shape[0])).reshape(-1)
    logger.debug(f"state table {spec.variant.value}(n={n}): {amps.shape[0]} states")
    return weights, amps


def enumerate_states(spec: EnsembleSpec) -> Iterator[tuple[float, StateVec]]:
    weights, amps = state_table(spec)
    for w, row in zip(weights, amps, strict=True):
        yield float(w), StateVec(spec.n, row)


# ============== Randomness accounting ==============


def randomness_bits(spec: EnsembleSpec, k: int | None = None) -> int | None:
    """Random bits per draw; ``k`` evaluates as if every function were k-wise. None for Haar."""
    if spec.variant is Variant.COMPOSED:
        parts = [randomness_bits(f, k) for f in spec.factors]
        return None if None in parts else sum(p for p in parts if p is not None)
    independence = Independence.kwise(k) if k is not None else spec.independence
    kwise = independence.mode is IndependenceMode.KWISE
    total = 0
    for step in steps(spec):
        w = len(step.qubits)
        if step.kind is StepKind.HAAR:
            return None
        if step.kind is StepKind.CLIFFORD:
            total += (num_cliffords(w) - 1).bit_length()
        elif step.kind is StepKind.PERMUTATION:
            total += (math.factorial(1 << w) - 1).bit_length()
        elif step.kind is StepKind.PHASE:
            total += (independence.k or 1) * w if kwise else 1 << w
        else:
            total += (independence.k or 1) * w if kwise else w << w
    return total
