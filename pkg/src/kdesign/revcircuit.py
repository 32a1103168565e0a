"""
Classical reversible circuits for GF(2^m) multiplication and k-wise polynomial evaluation.

Circuits are built gate by gate and scheduled as soon as possible: a gate lands one layer
after the latest gate touching any of its wires, so gates inside a layer never share a
wire. Every construction computes into fresh ancillas, copies the result out with CNOTs
and then replays the computation backwards, which returns all ancillas to 0.

Registers are little-endian: bit j of a field word sits on ``wires[j]``.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from enum import Enum
import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from kdesign.exceptions import (
    AncillaNotRestoredError,
    ConfigurationError,
    ContractViolationError,
    PreconditionError,
    ResourceLimitError,
)
from kdesign.gf2field import (
    FieldSpec,
    field_spec,
    matrix_power_gf2,
    reduction_matrix,
    squaring_matrix,
)
from kdesign.models import CircuitMode, DesignFamily

logger = logging.getLogger(__name__)

MAX_CIRCUIT_M = 16
MAX_CIRCUIT_K = 8
# Sub-circuits built internally by the resource calculator.
MAX_CALCULATOR_M = 32
MAX_CALCULATOR_K = 16


class GateKind(str, Enum):
    NOT = "NOT"
    CNOT = "CNOT"
    TOF = "TOF"


_ARITY = {GateKind.NOT: 1, GateKind.CNOT: 2, GateKind.TOF: 3}


class Gate(BaseModel):
    """A self-inverse classical gate; the last wire is the target."""

    model_config = ConfigDict(frozen=True)

    kind: GateKind
    wires: tuple[int, ...]

    @model_validator(mode="after")
    def _check_arity(self) -> Gate:
        if len(self.wires) != _ARITY[self.kind] or len(set(self.wires)) != len(self.wires):
            raise ConfigurationError("gate", self.wires, f"bad wires for {self.kind.value}")
        return self

    @property
    def target(self) -> int:
        return self.wires[-1]

    @property
    def controls(self) -> tuple[int, ...]:
        return self.wires[:-1]

    def to_text(self) -> str:
        return " ".join([self.kind.value, *map(str, self.wires)])


class ResourceReport(BaseModel):
    """Resource counts of a built circuit or of a design at a given patch size."""

    model_config = ConfigDict(frozen=True)

    depth: int | None = Field(ge=0)
    width: int | None = Field(default=None, ge=0)
    ancilla: int | None = Field(ge=0)
    gate_count: int | None = Field(default=None, ge=0)
    toffoli_count: int | None = Field(default=None, ge=0)
    randomness_bits: int = Field(ge=0)
    mode: CircuitMode | None = None
    family: DesignFamily | None = None
    xi: int | None = None
    depth_expr: str | None = None
    ancilla_expr: str | None = None


class ReversibleCircuit(BaseModel):
    """Layered NOT/CNOT/TOF circuit over wires classified as input, seed, ancilla, output."""

    model_config = ConfigDict(frozen=True)

    n_wires: int = Field(ge=0)
    inputs: tuple[int, ...] = ()
    seeds: tuple[int, ...] = ()
    ancilla: tuple[int, ...] = ()
    outputs: tuple[int, ...] = ()
    layers: tuple[tuple[Gate, ...], ...] = ()
    registers: dict[str, tuple[int, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_structure(self) -> ReversibleCircuit:
        roles = [*self.inputs, *self.seeds, *self.ancilla, *self.outputs]
        if sorted(roles) != list(range(self.n_wires)):
            raise ContractViolationError("every wire needs exactly one role")
        for index, layer in enumerate(self.layers):
            used: set[int] = set()
            for gate in layer:
                if max(gate.wires) >= self.n_wires:
                    raise ContractViolationError(f"layer {index}: wire out of range")
                if used.intersection(gate.wires):
                    raise ContractViolationError(f"layer {index}: gates share a wire")
                used.update(gate.wires)
        return self

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def gate_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    @property
    def toffoli_count(self) -> int:
        return sum(g.kind is GateKind.TOF for layer in self.layers for g in layer)

    def resources(self, mode: CircuitMode | None = None) -> ResourceReport:
        return ResourceReport(
            depth=self.depth,
            width=self.n_wires,
            ancilla=len(self.ancilla),
            gate_count=self.gate_count,
            toffoli_count=self.toffoli_count,
            randomness_bits=len(self.seeds),
            mode=mode,
        )

    def to_text(self) -> str:
        """Header line, then one layer per line with gates separated by '; '."""

        def wires(ws: tuple[int, ...]) -> str:
            return ",".join(map(str, ws)) or "-"

        lines = [
            f"wires {self.n_wires} inputs {wires(self.inputs)} seeds {wires(self.seeds)} "
            f"ancilla {wires(self.ancilla)} outputs {wires(self.outputs)}"
        ]
        lines.extend("; ".join(g.to_text() for g in layer) for layer in self.layers)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ReversibleCircuit:
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise ConfigurationError("circuit text", "", "missing header")
        head = lines[0].split()
        if len(head) != 10 or head[0::2] != ["wires", "inputs", "seeds", "ancilla", "outputs"]:
            raise ConfigurationError("circuit header", lines[0])

        def wires(field: str) -> tuple[int, ...]:
            return () if field == "-" else tuple(int(w) for w in field.split(","))

        layers = []
        try:
            for line in lines[1:]:
                gates = []
                for token in line.split(";"):
                    kind, *ws = token.split()
                    gates.append(Gate(kind=GateKind(kind), wires=tuple(int(w) for w in ws)))
                layers.append(tuple(gates))
            inputs, seeds, outputs = wires(head[3]), wires(head[5]), wires(head[9])
            ancilla, n_wires = wires(head[7]), int(head[1])
        except ValueError as e:
            raise ConfigurationError("circuit text", text[:80], f"malformed circuit: {e}") from e
        return cls(
            n_wires=n_wires,
            inputs=inputs,
            seeds=seeds,
            ancilla=ancilla,
            outputs=outputs,
            layers=tuple(layers),
            registers={"inputs": inputs, "seeds": seeds, "outputs": outputs},
        )


# ============== Simulation ==============


def simulate_reversible(
    circuit: ReversibleCircuit, assignment: Mapping[int, ArrayLike]
) -> dict[int, NDArray[np.uint8]]:
    """Run a batch of classical inputs through the circuit.

    ``assignment`` maps wires to bit arrays (all the same length). Input and seed wires
    must be covered; outputs default to 0, ancillas always start at 0. Raises
    ``AncillaNotRestoredError`` if any ancilla ends non-zero.
    """
    required = {*circuit.inputs, *circuit.seeds}
    missing = sorted(required - set(assignment))
    if missing:
        raise ContractViolationError(f"assignment does not cover wires {missing[:8]}")
    forbidden = sorted(set(assignment) - required - set(circuit.outputs))
    if forbidden:
        raise ContractViolationError(f"wires {forbidden[:8]} are not inputs, seeds or outputs")

    columns = {w: np.atleast_1d(np.asarray(v, dtype=np.uint8)) & 1 for w, v in assignment.items()}
    batch = {c.shape[0] for c in columns.values()} or {1}
    if len(batch) != 1:
        raise ContractViolationError(f"inconsistent batch sizes {sorted(batch)}")
    state = np.zeros((circuit.n_wires, batch.pop()), dtype=np.uint8)
    for w, col in columns.items():
        state[w] = col

    for layer in circuit.layers:
        by_kind: dict[GateKind, list[tuple[int, ...]]] = {}
        for gate in layer:
            by_kind.setdefault(gate.kind, []).append(gate.wires)
        for kind, group in by_kind.items():
            idx = np.asarray(group, dtype=np.intp)
            if kind is GateKind.NOT:
                state[idx[:, 0]] ^= 1
            elif kind is GateKind.CNOT:
                state[idx[:, 1]] ^= state[idx[:, 0]]
            else:
                state[idx[:, 2]] ^= state[idx[:, 0]] & state[idx[:, 1]]

    dirty = [w for w in circuit.ancilla if state[w].any()]
    if dirty:
        raise AncillaNotRestoredError(dirty)
    return {w: state[w] for w in range(circuit.n_wires)}


def pack_words(words: ArrayLike, wires: Sequence[int]) -> dict[int, NDArray[np.uint8]]:
    """Spread a batch of words over register wires, little-endian."""
    values = np.atleast_1d(np.asarray(words, dtype=np.uint64))
    return {
        w: ((values >> np.uint64(j)) & np.uint64(1)).astype(np.uint8)
        for j, w in enumerate(wires)
    }


def unpack_words(
    bits: Mapping[int, NDArray[np.uint8]], wires: Sequence[int]
) -> NDArray[np.uint64]:
    out = np.zeros_like(bits[wires[0]], dtype=np.uint64)
    for j, w in enumerate(wires):
        out |= bits[w].astype(np.uint64) << np.uint64(j)
    return out


def simulate_registers(
    circuit: ReversibleCircuit, values: Mapping[str, ArrayLike]
) -> dict[str, NDArray[np.uint64]]:
    """Register-level wrapper around :func:`simulate_reversible`."""
    assignment: dict[int, NDArray[np.uint8]] = {}
    for name, words in values.items():
        if name not in circuit.registers:
            raise ContractViolationError(f"unknown register {name!r}")
        assignment.update(pack_words(words, circuit.registers[name]))
    bits = simulate_reversible(circuit, assignment)
    return {name: unpack_words(bits, wires) for name, wires in circuit.registers.items()}


# ============== Construction ==============


class _Builder:
    def __init__(self) -> None:
        self.roles: list[str] = []
        self.gates: list[tuple[GateKind, tuple[int, ...]]] = []
        self.layer_of: list[int] = []
        self.last: list[int] = []
        self.pool: list[int] = []
        self.alloc_log: list[int] = []
        self.registers: dict[str, tuple[int, ...]] = {}

    def _new_wire(self, role: str) -> int:
        self.roles.append(role)
        self.last.append(-1)
        return len(self.roles) - 1

    def register(self, name: str, role: str, width: int) -> list[int]:
        wires = [self._new_wire(role) for _ in range(width)]
        self.registers[name] = tuple(wires)
        return wires

    def ancilla(self, count: int) -> list[int]:
        out = []
        for _ in range(count):
            w = self.pool.pop() if self.pool else self._new_wire("ancilla")
            out.append(w)
            self.alloc_log.append(w)
        return out

    def free(self, wires: Sequence[int]) -> None:
        self.pool.extend(sorted(set(wires), reverse=True))

    def add(self, kind: GateKind, *wires: int) -> None:
        layer = max(self.last[w] for w in wires) + 1
        for w in wires:
            self.last[w] = layer
        self.gates.append((kind, wires))
        self.layer_of.append(layer)

    def cnot(self, control: int, target: int) -> None:
        self.add(GateKind.CNOT, control, target)

    def replay_reversed(self, start: int, stop: int) -> None:
        for kind, wires in reversed(self.gates[start:stop]):
            self.add(kind, *wires)

    def build(self) -> ReversibleCircuit:
        depth = max(self.layer_of, default=-1) + 1
        layers: list[list[Gate]] = [[] for _ in range(depth)]
        for (kind, wires), layer in zip(self.gates, self.layer_of, strict=True):
            layers[layer].append(Gate(kind=kind, wires=wires))

        def role(name: str) -> tuple[int, ...]:
            return tuple(w for w, r in enumerate(self.roles) if r == name)

        return ReversibleCircuit(
            n_wires=len(self.roles),
            inputs=role("input"),
            seeds=role("seed"),
            ancilla=role("ancilla"),
            outputs=role("output"),
            layers=tuple(tuple(layer) for layer in layers),
            registers=dict(self.registers),
        )

    # ---- building blocks ----

    def fanout(self, src: int, count: int) -> list[int]:
        """``count`` fresh copies of ``src`` by doubling; ``src`` is only ever a control."""
        holders, fresh = [src], []
        while len(fresh) < count:
            for h in list(holders):
                if len(fresh) == count:
                    break
                (t,) = self.ancilla(1)
                self.cnot(h, t)
                fresh.append(t)
                holders.append(t)
        return fresh

    def spread(self, reg: Sequence[int], copies: int) -> list[list[int]]:
        """``copies`` registers equal to ``reg``; the first one is ``reg`` itself."""
        per_bit = [self.fanout(w, copies - 1) for w in reg]
        return [list(reg)] + [[bits[c] for bits in per_bit] for c in range(copies - 1)]

    def xor_tree(self, leaves: Sequence[int]) -> int:
        """XOR all leaves into leaves[0] with a balanced CNOT tree."""
        level = list(leaves)
        while len(level) > 1:
            nxt = []
            for j in range(0, len(level) - 1, 2):
                self.cnot(level[j + 1], level[j])
                nxt.append(level[j])
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        return level[0]

    def linear_compute(
        self,
        rows: NDArray[np.uint8],
        src: Sequence[int],
        copies: Mapping[int, list[int]] | None = None,
    ) -> list[int]:
        """Fresh wires holding rows @ src over GF(2); ``src`` is read-only.

        ``copies`` may supply prebuilt copies of each source bit (at least as many as
        the column weight); otherwise they are fanned out here.
        """
        uses = rows.sum(axis=0)
        if copies is None:
            copies = {j: self.fanout(w, int(uses[j])) for j, w in enumerate(src) if uses[j]}
        cursor = dict.fromkeys(range(len(src)), 0)
        out = []
        for row in rows:
            leaves = []
            for j in np.flatnonzero(row):
                leaves.append(copies[int(j)][cursor[int(j)]])
                cursor[int(j)] += 1
            out.append(self.xor_tree(leaves) if leaves else self.ancilla(1)[0])
        return out

    def mul_core(
        self, spec: FieldSpec, a_copies: list[list[int]], b_copies: list[list[int]]
    ) -> list[int]:
        """Product of two spread operands into fresh wires (garbage left for uncompute)."""
        m = spec.m
        pp = [self.ancilla(m) for _ in range(m)]
        for i in range(m):
            for j in range(m):
                self.add(GateKind.TOF, a_copies[j][i], b_copies[i][j], pp[i][j])
        cprime = []
        for s in range(2 * m - 1):
            terms = [pp[i][s - i] for i in range(max(0, s - m + 1), min(s, m - 1) + 1)]
            cprime.append(self.xor_tree(terms))
        return self.reduce(spec, cprime)

    def reduce(self, spec: FieldSpec, cprime: Sequence[int]) -> list[int]:
        """c' mod p as a CNOT network; c' wires are garbage and may be consumed."""
        rows = reduction_matrix(spec)
        uses = rows.sum(axis=0)
        pools = {
            j: [w, *self.fanout(w, int(uses[j]) - 1)] for j, w in enumerate(cprime) if uses[j]
        }
        out = []
        for row in rows:
            leaves = [pools[int(j)].pop() for j in np.flatnonzero(row)]
            out.append(self.xor_tree(leaves))
        return out

    def mul(self, spec: FieldSpec, a: Sequence[int], b: Sequence[int]) -> list[int]:
        m = spec.m
        if list(a) == list(b):
            both = self.spread(a, 2 * m)
            return self.mul_core(spec, both[:m], both[m:])
        return self.mul_core(spec, self.spread(a, m), self.spread(b, m))

    def linear_into(
        self, rows: NDArray[np.uint8], src: Sequence[int], dst: Sequence[int]
    ) -> None:
        for r, row in enumerate(rows):
            for j in np.flatnonzero(row):
                self.cnot(src[int(j)], dst[r])

    def mul_accumulate(
        self, spec: FieldSpec, a: Sequence[int], b: Sequence[int], target: Sequence[int]
    ) -> None:
        """target ^= a·b with Toffolis straight into the target; no scratch, depth O(m²)."""
        if list(a) == list(b):
            self.linear_into(squaring_matrix(spec), a, target)
            return
        m = spec.m
        for r, row in enumerate(reduction_matrix(spec)):
            for s in np.flatnonzero(row):
                for i in range(max(0, int(s) - m + 1), min(int(s), m - 1) + 1):
                    self.add(GateKind.TOF, a[i], b[int(s) - i], target[r])

    def power(self, spec: FieldSpec, x: Sequence[int], exponent: int) -> list[int]:
        """Wires holding x^exponent (x itself for 1); garbage left for uncompute."""
        square = squaring_matrix(spec)
        factors: list[list[int]] = []
        for t in range(exponent.bit_length()):
            if not (exponent >> t) & 1:
                continue
            if t == 0:
                factors.append(list(x))
                continue
            reg = self.ancilla(spec.m)
            self.linear_into(matrix_power_gf2(square, t), x, reg)
            factors.append(reg)
        acc = factors[0]
        for factor in factors[1:]:
            nxt = self.ancilla(spec.m)
            self.mul_accumulate(spec, acc, factor, nxt)
            acc = nxt
        return acc

    def clean(self, compute: Callable[[], list[int]], targets: Sequence[int]) -> None:
        """targets ^= compute(), then uncompute and return the scratch wires to the pool."""
        start, alloc_start = len(self.gates), len(self.alloc_log)
        result = compute()
        stop = len(self.gates)
        for src, dst in zip(result, targets, strict=True):
            self.cnot(src, dst)
        self.replay_reversed(start, stop)
        self.free(self.alloc_log[alloc_start:])
        del self.alloc_log[alloc_start:]


def _check_limits(spec: FieldSpec, k: int | None = None) -> None:
    if spec.m > MAX_CIRCUIT_M:
        raise ResourceLimitError("circuit field width m", spec.m, MAX_CIRCUIT_M)
    if k is not None and k > MAX_CIRCUIT_K:
        raise ResourceLimitError("circuit independence k", k, MAX_CIRCUIT_K)


def build_mul_circuit(spec: FieldSpec) -> ReversibleCircuit:
    """a, b, 0, 0 -> a, b, a·b, 0 with a schoolbook multiplier (depth O(log m))."""
    _check_limits(spec)
    b = _Builder()
    a_reg = b.register("a", "input", spec.m)
    b_reg = b.register("b", "input", spec.m)
    out = b.register("out", "output", spec.m)
    start = len(b.gates)
    product = b.mul(spec, a_reg, b_reg)
    stop = len(b.gates)
    for src, dst in zip(product, out, strict=True):
        b.cnot(src, dst)
    b.replay_reversed(start, stop)
    circuit = b.build()
    logger.debug(f"mul circuit m={spec.m}: depth={circuit.depth} wires={circuit.n_wires}")
    return circuit


def _level_pairs(operands: list[list[list[int]]]) -> list[tuple[int, int]]:
    return [(t, j) for t, ops in enumerate(operands) for j in range(0, len(ops) - 1, 2)]


def _low_depth_terms(
    spec: FieldSpec, b: _Builder, x: list[int], seeds: list[list[int]]
) -> list[list[int]]:
    """Registers holding a_i x^i for i >= 1 via balanced product trees."""
    m, k = spec.m, len(seeds)
    n_powers = (k - 1).bit_length()
    rows = np.zeros((0, m), dtype=np.uint8)
    if n_powers > 1:
        square = squaring_matrix(spec)
        rows = np.vstack([matrix_power_gf2(square, t) for t in range(1, n_powers)])

    # Power slots are filled in below; slot 0 is x itself.
    slots: list[list[int]] = [x] + [[-1 - t] * m for t in range(1, n_powers)]
    operands = [
        [seeds[i]] + [slots[t] for t in range(i.bit_length()) if (i >> t) & 1]
        for i in range(1, k)
    ]

    # One fanout of x feeds both the squaring network and the first multiply level.
    x_mul_uses = sum(
        reg is x for t, j in _level_pairs(operands) for reg in operands[t][j : j + 2]
    )
    power_uses = rows.sum(axis=0)
    x_copies = x_mul_uses * m
    fresh = [
        b.fanout(w, int(power_uses[j]) + max(x_copies - 1, 0)) for j, w in enumerate(x)
    ]
    split = [int(u) for u in power_uses]
    if n_powers > 1:
        flat = b.linear_compute(rows, x, {j: fresh[j][: split[j]] for j in range(m)})
        for t in range(1, n_powers):
            slots[t][:] = flat[(t - 1) * m : t * m]
    x_spread = [list(x)] + [
        [fresh[j][split[j] + c] for j in range(m)] for c in range(x_copies - 1)
    ]

    first = True
    while any(len(ops) > 1 for ops in operands):
        pairs = _level_pairs(operands)
        uses: dict[tuple[int, ...], int] = {}
        for t, j in pairs:
            for reg in operands[t][j : j + 2]:
                uses[tuple(reg)] = uses.get(tuple(reg), 0) + 1
        # One spread per source register serves every multiplication of this level.
        copies = {
            key: x_spread if first and list(key) == x else b.spread(key, count * m)
            for key, count in uses.items()
        }
        cursor = dict.fromkeys(copies, 0)
        products: dict[tuple[int, int], list[int]] = {}
        for t, j in pairs:
            halves = []
            for reg in operands[t][j : j + 2]:
                key = tuple(reg)
                halves.append(copies[key][cursor[key] : cursor[key] + m])
                cursor[key] += m
            products[(t, j)] = b.mul_core(spec, halves[0], halves[1])
        operands = [
            [products[(t, j)] for j in range(0, len(ops) - 1, 2)] + ops[len(ops) - len(ops) % 2 :]
            for t, ops in enumerate(operands)
        ]
        first = False
    return [ops[0] for ops in operands]


def _build_kwise(spec: FieldSpec, k: int, mode: CircuitMode) -> ReversibleCircuit:
    m = spec.m
    b = _Builder()
    x = b.register("x", "input", m)
    seeds = [b.register(f"a{i}", "seed", m) for i in range(k)]
    out = b.register("out", "output", m)

    if k == 1:
        for src, dst in zip(seeds[0], out, strict=True):
            b.cnot(src, dst)
    elif mode is CircuitMode.LOW_DEPTH:
        start = len(b.gates)
        terms = _low_depth_terms(spec, b, x, seeds)
        # a_0 stays last so it is never an XOR target.
        level = terms + [seeds[0]]
        while len(level) > 1:
            nxt = []
            for j in range(0, len(level) - 1, 2):
                for src, dst in zip(level[j + 1], level[j], strict=True):
                    b.cnot(src, dst)
                nxt.append(level[j])
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        stop = len(b.gates)
        for src, dst in zip(level[0], out, strict=True):
            b.cnot(src, dst)
        b.replay_reversed(start, stop)
    else:
        for src, dst in zip(seeds[0], out, strict=True):
            b.cnot(src, dst)
        # Only the current power outlives a step. x^i is cleared by recomputing it from x,
        # so the live width stays one register above a single multiplier.
        current = x
        for i in range(1, k):
            b.clean(lambda cp=current, a=seeds[i]: b.mul(spec, a, cp), out)
            if i == k - 1:
                break
            nxt = b.ancilla(m)
            b.mul_accumulate(spec, current, x, nxt)
            if current is not x:
                b.clean(lambda e=i: b.power(spec, x, e), current)
                b.free(current)
            current = nxt
        if current is not x:
            b.clean(lambda: b.power(spec, x, k - 1), current)
            b.free(current)

    circuit = b.build()
    logger.debug(
        f"kwise circuit m={m} k={k} {mode.value}: depth={circuit.depth} "
        f"ancilla={len(circuit.ancilla)}"
    )
    return circuit


def build_kwise_circuit(spec: FieldSpec, k: int, mode: CircuitMode) -> ReversibleCircuit:
    """x, a_0..a_{k-1}, 0 -> x, a, f_a(x) with ancilla restoration."""
    if k < 1:
        raise PreconditionError(f"independence k must be >= 1, got {k}")
    _check_limits(spec, k)
    return _build_kwise(spec, k, mode)


# ============== Design resource calculator ==============

_DEPTH_EXPR = {
    CircuitMode.LOW_DEPTH: "O(log k · log ξ)",
    CircuitMode.LOW_ANCILLA: "O(k · log ξ)",
}
_ANCILLA_EXPR = {
    CircuitMode.LOW_DEPTH: "O(k n log ξ log log ξ)",
    CircuitMode.LOW_ANCILLA: "O(n log ξ log log ξ)",
}


def patch_size(n: int, k: int, epsilon: float) -> int:
    """ξ = max(ceil(log2(3 n k² / ε)), 3)."""
    return max(math.ceil(math.log2(3 * n * k * k / epsilon)), 3)


def design_randomness_bits(n: int, k: int, family: DesignFamily) -> int:
    if family is DesignFamily.BLOCKED_PHASE:
        return 2 * n * k
    return 3 * n * k + math.ceil(5 * n / 2)


def _sub_circuit(m: int, independence: int, mode: CircuitMode) -> ReversibleCircuit | None:
    if m > MAX_CALCULATOR_M or independence > MAX_CALCULATOR_K:
        logger.warning(
            f"sub-circuit GF(2^{m}) with independence {independence} is beyond the build "
            f"limits (m <= {MAX_CALCULATOR_M}, k <= {MAX_CALCULATOR_K}); depth not reported"
        )
        return None
    return _build_kwise(field_spec(m), independence, mode)


def design_resource_calculator(
    n: int, k: int, epsilon: float, family: DesignFamily, mode: CircuitMode
) -> ResourceReport:
    """Patch size, built-circuit depth/ancilla and randomness of a blocked design."""
    if n < 1 or k < 1:
        raise PreconditionError(f"n and k must be >= 1, got n={n}, k={k}")
    if epsilon <= 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    if k * k / epsilon > 2**n / 3:
        raise PreconditionError(f"k²/ε = {k * k / epsilon:.4g} exceeds 2^n/3 = {2**n / 3:.4g}")
    xi = patch_size(n, k, epsilon)
    blocks = max(1, math.ceil(n / (2 * xi)))
    phase = _sub_circuit(2 * xi, 2 * k, mode)
    depth: int | None = None
    ancilla: int | None = None
    if family is DesignFamily.BLOCKED_PHASE:
        if phase is not None:
            depth = 2 * phase.depth
            ancilla = blocks * len(phase.ancilla)
    else:
        shuffle = _sub_circuit(xi, 2 * k, mode)
        if phase is not None and shuffle is not None:
            depth = 2 * phase.depth + 2 * shuffle.depth + 1
            ancilla = blocks * max(len(phase.ancilla), len(shuffle.ancilla))
    logger.info(f"resources n={n} k={k} eps={epsilon} {family.value}/{mode.value}: xi={xi}")
    return ResourceReport(
        depth=depth,
        ancilla=ancilla,
        randomness_bits=design_randomness_bits(n, k, family),
        mode=mode,
        family=family,
        xi=xi,
        depth_expr=_DEPTH_EXPR[mode],
        ancilla_expr=_ANCILLA_EXPR[mode],
    )


def resource_table(
    n: int,
    k: int,
    epsilon: float,
    family: DesignFamily | None = None,
    mode: CircuitMode | None = None,
) -> list[ResourceReport]:
    """One row per (family, mode); either may be pinned to a single value."""
    families = [family] if family is not None else list(DesignFamily)
    modes = [mode] if mode is not None else list(CircuitMode)
    return [
        design_resource_calculator(n, k, epsilon, f, md) for f in families for md in modes
    ]
