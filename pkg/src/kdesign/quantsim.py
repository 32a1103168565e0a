"""
Dense statevector and operator engine on few qubits.

Conventions: qubit 0 is the most significant bit of a basis index. A subset of qubits is
read as a word with its first listed qubit most significant. On the k-copy space register 0
is the most significant block of n bits.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
import functools
import itertools
import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import block_diag
from scipy.stats import unitary_group

from kdesign.exceptions import ConfigurationError, ContractViolationError, ResourceLimitError
from kdesign.kwise import KWiseSeed, eval_vector, truth_table

logger = logging.getLogger(__name__)

MAX_STATE_QUBITS = 22
# k-copy operators are 2^(nk) square.
MAX_COPY_QUBITS = 12
MAX_CLIFFORD_QUBITS = 5
MAX_ENUMERATED_CLIFFORD_QUBITS = 2
MAX_HAAR_DIM = 256

ComplexArray = NDArray[np.complex128]


@dataclass(frozen=True)
class StateVec:
    """Pure state on n qubits."""

    n: int
    amps: ComplexArray

    def __post_init__(self) -> None:
        if self.n > MAX_STATE_QUBITS:
            raise ResourceLimitError("state qubits", self.n, MAX_STATE_QUBITS)
        if self.amps.shape != (1 << self.n,):
            raise ConfigurationError("amps", self.amps.shape, f"expected {1 << self.n} amplitudes")

    @classmethod
    def from_amps(cls, amps: ArrayLike) -> StateVec:
        arr = np.asarray(amps, dtype=np.complex128).reshape(-1)
        n = arr.size.bit_length() - 1
        if arr.size != 1 << n:
            raise ConfigurationError("amps", arr.size, "length must be a power of two")
        return cls(n, arr)

    @classmethod
    def basis(cls, n: int, x: int = 0) -> StateVec:
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[x] = 1.0
        return cls(n, amps)

    @classmethod
    def plus(cls, n: int) -> StateVec:
        return cls(n, np.full(1 << n, 2 ** (-n / 2), dtype=np.complex128))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> NDArray[np.float64]:
        return np.abs(self.amps) ** 2


@dataclass(frozen=True)
class DenseOp:
    """Dense operator on a power-of-two dimensional space, with optional status flags."""

    matrix: ComplexArray
    flags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        rows, cols = self.matrix.shape
        if rows != cols or rows & (rows - 1):
            raise ConfigurationError("matrix", self.matrix.shape, "must be square of size 2^q")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def is_unitary(self, tol: float = 1e-10) -> bool:
        eye = np.eye(self.dim)
        return bool(np.allclose(self.matrix.conj().T @ self.matrix, eye, atol=tol))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=tol))


class PatchLayout(BaseModel):
    """Contiguous patches of xi qubits covering n qubits."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    xi: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_divides(self) -> PatchLayout:
        if self.n % self.xi:
            raise ConfigurationError("xi", self.xi, f"xi={self.xi} must divide n={self.n}")
        return self

    @property
    def count(self) -> int:
        return self.n // self.xi

    @property
    def patches(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(range(a * self.xi, (a + 1) * self.xi)) for a in range(self.count)
        )

    def pairs(self, parity: str) -> list[tuple[int, int]]:
        """Adjacent patch pairs, open boundary: even (0,1),(2,3),...; odd (1,2),(3,4),..."""
        if parity not in ("even", "odd"):
            raise ConfigurationError("parity", parity)
        first = 0 if parity == "even" else 1
        return [(a, a + 1) for a in range(first, self.count - 1, 2)]

    def pair_qubits(self, a: int, b: int) -> tuple[int, ...]:
        return self.patches[a] + self.patches[b]


# ============== Structured gate application ==============


def _split(amps: ComplexArray, n: int, qubits: Sequence[int]) -> ComplexArray:
    if len(set(qubits)) != len(qubits) or any(not 0 <= q < n for q in qubits):
        raise ContractViolationError(f"invalid qubit selection {list(qubits)} for n={n}")
    rest = [q for q in range(n) if q not in qubits]
    tensor = amps.reshape((2,) * n)
    return np.transpose(tensor, [*qubits, *rest]).reshape(1 << len(qubits), -1)


def _merge(block: ComplexArray, n: int, qubits: Sequence[int]) -> ComplexArray:
    rest = [q for q in range(n) if q not in qubits]
    order = [*qubits, *rest]
    return np.transpose(block.reshape((2,) * n), np.argsort(order)).reshape(-1)


def apply_dense(s: StateVec, qubits: Sequence[int], unitary: ArrayLike) -> StateVec:
    """Apply a w-qubit matrix to the listed qubits."""
    u = np.asarray(unitary, dtype=np.complex128)
    if u.shape != (1 << len(qubits),) * 2:
        raise ConfigurationError("unitary", u.shape, f"expected {len(qubits)}-qubit matrix")
    block = _split(s.amps, s.n, qubits)
    return StateVec(s.n, _merge(u @ block, s.n, qubits))


def apply_phase_table(s: StateVec, qubits: Sequence[int], table: ArrayLike) -> StateVec:
    """amp(x) *= (-1)^table[x restricted to qubits]."""
    bits = np.asarray(table, dtype=np.int64)
    if bits.shape != (1 << len(qubits),):
        raise ConfigurationError("table", bits.shape, f"expected {1 << len(qubits)} entries")
    block = _split(s.amps, s.n, qubits) * (1 - 2 * (bits & 1))[:, None]
    return StateVec(s.n, _merge(block, s.n, qubits))


def apply_phase_oracle(s: StateVec, qubits: Sequence[int], seed: KWiseSeed) -> StateVec:
    if len(qubits) != seed.spec.m:
        raise ConfigurationError("qubits", len(qubits), f"seed width is {seed.spec.m}")
    return apply_phase_table(s, qubits, truth_table(seed))


def apply_shuffle_table(
    s: StateVec, control: Sequence[int], target: Sequence[int], h: ArrayLike
) -> StateVec:
    """|c, t> -> |c, t XOR h[c]>."""
    if set(control) & set(target):
        raise ContractViolationError(f"control {list(control)} overlaps target {list(target)}")
    values = np.asarray(h, dtype=np.int64)
    wc, wt = len(control), len(target)
    if values.shape != (1 << wc,) or values.max(initial=0) >= 1 << wt:
        raise ConfigurationError("h", values.shape, f"expected {1 << wc} words of {wt} bits")
    qubits = [*control, *target]
    block = _split(s.amps, s.n, qubits).reshape(1 << wc, 1 << wt, -1)
    c_idx = np.arange(1 << wc)[:, None]
    t_idx = np.arange(1 << wt)[None, :] ^ values[:, None]
    shuffled = block[c_idx, t_idx].reshape(1 << (wc + wt), -1)
    return StateVec(s.n, _merge(shuffled, s.n, qubits))


def apply_shuffle(
    s: StateVec, control: Sequence[int], target: Sequence[int], seed: KWiseSeed
) -> StateVec:
    m = seed.spec.m
    if len(control) != m or len(target) != m:
        raise ConfigurationError("patch width", (len(control), len(target)), f"seed width is {m}")
    h = eval_vector(seed, np.arange(1 << m, dtype=np.uint64)).astype(np.int64)
    return apply_shuffle_table(s, control, target, h)


def apply_permutation(s: StateVec, perm: ArrayLike) -> StateVec:
    """|x> -> |perm[x]>."""
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != s.amps.shape or not np.array_equal(np.sort(p), np.arange(p.size)):
        raise ConfigurationError("perm", p.shape, "not a permutation of the basis")
    out = np.empty_like(s.amps)
    out[p] = s.amps
    return StateVec(s.n, out)


# ============== Haar and Clifford sampling ==============


def sample_haar_unitary(dim: int, rng: np.random.Generator) -> DenseOp:
    if dim > MAX_HAAR_DIM:
        raise ResourceLimitError("Haar dimension", dim, MAX_HAAR_DIM)
    if dim == 1:
        return DenseOp(np.array([[np.exp(2j * np.pi * rng.random())]], dtype=np.complex128))
    matrix = unitary_group.rvs(dim, random_state=rng)
    return DenseOp(np.asarray(matrix, dtype=np.complex128))


def random_product_basis(n: int, rng: np.random.Generator) -> list[ComplexArray]:
    """Independent Haar single-qubit unitaries, one per qubit."""
    return [sample_haar_unitary(2, rng).matrix for _ in range(n)]


def num_symplectics(w: int) -> int:
    """|Sp(2w, F_2)|."""
    return math.prod(2 ** (2 * j - 1) * (4**j - 1) for j in range(1, w + 1))


def num_cliffords(w: int) -> int:
    """Clifford group order modulo global phase."""
    return 4**w * num_symplectics(w)


# Symplectic vectors interleave (x_0, z_0, x_1, z_1, ...).


def symplectic_innerproduct(v: NDArray[np.int64], w: NDArray[np.int64]) -> int:
    return int((v[0::2] @ w[1::2] + v[1::2] @ w[0::2]) % 2)


def symplectic_transvection(k: NDArray[np.int64], v: NDArray[np.int64]) -> NDArray[np.int64]:
    return (v + symplectic_innerproduct(k, v) * k) % 2


def _bits(i: int, count: int) -> NDArray[np.int64]:
    return np.array([(i >> j) & 1 for j in range(count)], dtype=np.int64)


def find_symplectic_transvection(
    x: NDArray[np.int64], y: NDArray[np.int64]
) -> NDArray[np.int64]:
    """Two transvection vectors h1, h2 with y = Z_h1 Z_h2 x (unused rows are zero)."""
    out = np.zeros((2, x.size), dtype=np.int64)
    if np.array_equal(x, y):
        return out
    if symplectic_innerproduct(x, y) == 1:
        out[0] = (x + y) % 2
        return out

    z = np.zeros(x.size, dtype=np.int64)
    for ii in range(0, x.size, 2):
        if (x[ii] + x[ii + 1]) and (y[ii] + y[ii + 1]):
            z[ii] = (x[ii] + y[ii]) % 2
            z[ii + 1] = (x[ii + 1] + y[ii + 1]) % 2
            if z[ii] + z[ii + 1] == 0:
                z[ii + 1] = 1
                if x[ii] != x[ii + 1]:
                    z[ii] = 1
            out[0] = (x + z) % 2
            out[1] = (y + z) % 2
            return out

    for ii in range(0, x.size, 2):
        if (x[ii] + x[ii + 1]) and not (y[ii] + y[ii + 1]):
            if x[ii] == x[ii + 1]:
                z[ii + 1] = 1
            else:
                z[ii + 1] = x[ii]
                z[ii] = x[ii + 1]
            break
    for ii in range(0, x.size, 2):
        if not (x[ii] + x[ii + 1]) and (y[ii] + y[ii + 1]):
            if y[ii] == y[ii + 1]:
                z[ii + 1] = 1
            else:
                z[ii + 1] = y[ii]
                z[ii] = y[ii + 1]
            break
    out[0] = (x + z) % 2
    out[1] = (y + z) % 2
    return out


def compute_symplectic_matrix(i: int, w: int) -> NDArray[np.int64]:
    """Symplectic matrix with canonical index 0 <= i < |Sp(2w)|.

    Rows 2j and 2j+1 are the images of X_j and Z_j.
    """
    nn = 2 * w
    s = (1 << nn) - 1
    k = (i % s) + 1
    i //= s

    f1 = _bits(k, nn)
    e1 = np.zeros(nn, dtype=np.int64)
    e1[0] = 1
    t = find_symplectic_transvection(e1, f1)

    bits = _bits(i % (1 << (nn - 1)), nn - 1)
    eprime = e1.copy()
    eprime[2:] = bits[1:]
    h0 = symplectic_transvection(t[1], symplectic_transvection(t[0], eprime))
    if bits[0] == 1:
        f1 = np.zeros_like(f1)

    id2 = np.eye(2, dtype=np.int64)
    g = block_diag(id2, compute_symplectic_matrix(i >> (nn - 1), w - 1)) if w > 1 else id2
    g = np.asarray(g, dtype=np.int64)
    for j in range(nn):
        row = g[j]
        for vec in (t[0], t[1], h0, f1):
            row = symplectic_transvection(vec, row)
        g[j] = row
    return g


_PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_PAULIS = {
    "I": np.eye(2, dtype=np.complex128),
    "X": _PAULI_X,
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": _PAULI_Z,
}


def pauli_op(label: str) -> ComplexArray:
    """Tensor product of single-qubit Paulis, qubit 0 first."""
    try:
        factors = [_PAULIS[c] for c in label.upper()]
    except KeyError as e:
        raise ConfigurationError("pauli label", label) from e
    out = np.eye(1, dtype=np.complex128)
    for f in factors:
        out = np.kron(out, f)
    return out


def _pauli_from_vector(v: NDArray[np.int64]) -> ComplexArray:
    out = np.eye(1, dtype=np.complex128)
    for j in range(v.size // 2):
        x, z = int(v[2 * j]), int(v[2 * j + 1])
        factor = np.linalg.matrix_power(_PAULI_X, x) @ np.linalg.matrix_power(_PAULI_Z, z)
        out = np.kron(out, factor * (1j if x and z else 1))
    return out


def clifford_from_symplectic(g: NDArray[np.int64], signs: Sequence[int]) -> ComplexArray:
    """Unitary U (up to phase) with U X_j U^† = ±P(g[2j]) and U Z_j U^† = ±P(g[2j+1])."""
    w = g.shape[0] // 2
    dim = 1 << w
    sign = [1 - 2 * int(s) for s in signs]
    x_images = [sign[2 * j] * _pauli_from_vector(g[2 * j]) for j in range(w)]
    z_images = [sign[2 * j + 1] * _pauli_from_vector(g[2 * j + 1]) for j in range(w)]

    projector = np.eye(dim, dtype=np.complex128)
    for q in z_images:
        projector = projector @ (np.eye(dim) + q) / 2
    col = int(np.argmax(np.linalg.norm(projector, axis=0)))
    v0 = projector[:, col] / np.linalg.norm(projector[:, col])

    u = np.empty((dim, dim), dtype=np.complex128)
    for x in range(dim):
        v = v0
        for j in range(w):
            if (x >> (w - 1 - j)) & 1:
                v = x_images[j] @ v
        u[:, x] = v
    return u


def sample_clifford(w: int, rng: np.random.Generator) -> DenseOp:
    """Uniformly random w-qubit Clifford (modulo phase)."""
    if w > MAX_CLIFFORD_QUBITS:
        raise ResourceLimitError("Clifford qubits", w, MAX_CLIFFORD_QUBITS)
    index = int(rng.integers(0, num_symplectics(w)))
    signs = rng.integers(0, 2, size=2 * w)
    return DenseOp(clifford_from_symplectic(compute_symplectic_matrix(index, w), signs))


@functools.lru_cache(maxsize=4)
def enumerate_cliffords(w: int) -> NDArray[np.complex128]:
    """The whole Clifford group modulo phase as a (count, 2^w, 2^w) stack."""
    if w > MAX_ENUMERATED_CLIFFORD_QUBITS:
        raise ResourceLimitError("enumerated Clifford qubits", w, MAX_ENUMERATED_CLIFFORD_QUBITS)
    mats = [
        clifford_from_symplectic(compute_symplectic_matrix(i, w), signs)
        for i in range(num_symplectics(w))
        for signs in itertools.product((0, 1), repeat=2 * w)
    ]
    logger.debug(f"enumerated {len(mats)} Cliffords on {w} qubits")
    group = np.stack(mats)
    group.setflags(write=False)
    return group


# ============== k-copy operators ==============


def _check_copy_size(n: int, k: int) -> None:
    if n * k > MAX_COPY_QUBITS:
        raise ResourceLimitError("k-copy qubits n·k", n * k, MAX_COPY_QUBITS)


def permutation_op(pi: Sequence[int], n: int, k: int) -> DenseOp:
    """Operator placing input register pi[j] into output register j."""
    if sorted(pi) != list(range(k)):
        raise ConfigurationError("pi", tuple(pi), f"not a permutation of {k} registers")
    _check_copy_size(n, k)
    d, big = 1 << n, 1 << (n * k)
    eye = np.eye(big, dtype=np.complex128).reshape((d,) * k + (big,))
    return DenseOp(np.transpose(eye, [*pi, k]).reshape(big, big))


def permutations(k: int) -> Iterator[tuple[int, ...]]:
    return itertools.permutations(range(k))


def register_values(n: int, k: int) -> NDArray[np.int64]:
    """(k, 2^(nk)) array: value of each register at each k-copy basis index."""
    idx = np.arange(1 << (n * k), dtype=np.int64)
    return np.stack([(idx >> (n * (k - 1 - r))) & ((1 << n) - 1) for r in range(k)])


def _all_distinct(values: NDArray[np.int64]) -> NDArray[np.bool_]:
    ok = np.ones(values.shape[1], dtype=bool)
    for r, s in itertools.combinations(range(values.shape[0]), 2):
        ok &= values[r] != values[s]
    return ok


def _diag_op(mask: NDArray[np.bool_], empty: bool) -> DenseOp:
    flags = frozenset({"empty"}) if empty else frozenset()
    return DenseOp(np.diag(mask.astype(np.complex128)), flags)


def distinct_projector(n: int, k: int) -> DenseOp:
    """Projector onto k-copy basis states whose registers are pairwise distinct."""
    _check_copy_size(n, k)
    empty = k > 1 << n
    if empty:
        logger.warning(f"distinct subspace is empty: k={k} > 2^n={1 << n}")
    return _diag_op(_all_distinct(register_values(n, k)), empty)


def local_distinct_projector(layout: PatchLayout, k: int) -> DenseOp:
    """Projector onto states distinct on every patch separately."""
    n, xi = layout.n, layout.xi
    _check_copy_size(n, k)
    empty = k > 1 << xi
    if empty:
        logger.warning(f"local distinct subspace is empty: k={k} > 2^xi={1 << xi}")
    values = register_values(n, k)
    mask = np.ones(values.shape[1], dtype=bool)
    for a in range(layout.count):
        shift = n - (a + 1) * xi
        mask &= _all_distinct((values >> shift) & ((1 << xi) - 1))
    return _diag_op(mask, empty)


def distinct_dimension(d: int, k: int) -> int:
    """d!/(d-k)!, zero when k > d."""
    return math.perm(d, k)


# ============== Small linear-algebra helpers ==============


def trace_norm(x: ArrayLike) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(np.asarray(x), compute_uv=False).sum())


def vec(a: ArrayLike) -> ComplexArray:
    """Row-major vectorization."""
    return np.asarray(a, dtype=np.complex128).reshape(-1)


def unvec(v: ArrayLike, dim: int) -> ComplexArray:
    return np.asarray(v, dtype=np.complex128).reshape(dim, dim)


def partial_trace(rho: ArrayLike, dims: Sequence[int], keep: Sequence[int]) -> ComplexArray:
    """Trace out every subsystem not in ``keep``; kept subsystems stay in order."""
    dims = list(dims)
    t = np.asarray(rho, dtype=np.complex128).reshape(dims + dims)
    for i in sorted(set(range(len(dims))) - set(keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    d = math.prod(dims[i] for i in sorted(keep))
    return t.reshape(d, d)


def stabilization_key(xs: Sequence[int]) -> tuple[int, ...]:
    """Values appearing an odd number of times, sorted."""
    counts = Counter(xs)
    return tuple(sorted(v for v, c in counts.items() if c % 2))


# ============== Basis bookkeeping ==============


def restrict_words(n: int, qubits: Sequence[int]) -> NDArray[np.int64]:
    """For every basis index, the word read off ``qubits`` (first qubit most significant)."""
    idx = np.arange(1 << n, dtype=np.int64)
    word = np.zeros_like(idx)
    for q in qubits:
        word = (word << 1) | ((idx >> (n - 1 - q)) & 1)
    return word


def place_words(words: ArrayLike, n: int, qubits: Sequence[int]) -> NDArray[np.int64]:
    """Inverse of :func:`restrict_words`: basis masks carrying ``words`` on ``qubits``."""
    w = np.asarray(words, dtype=np.int64)
    out = np.zeros_like(w)
    for i, q in enumerate(qubits):
        out |= ((w >> (len(qubits) - 1 - i)) & 1) << (n - 1 - q)
    return out


def embed_operator(u: ArrayLike, qubits: Sequence[int], n: int) -> ComplexArray:
    """Dense 2^n matrix of ``u`` acting on ``qubits`` and identity elsewhere."""
    d = 1 << n
    cols = np.eye(d, dtype=np.complex128).reshape((2,) * n + (d,))
    rest = [q for q in range(n) if q not in qubits]
    order = [*qubits, *rest]
    block = np.transpose(cols, [*order, n]).reshape(1 << len(qubits), -1)
    out = (np.asarray(u, dtype=np.complex128) @ block).reshape((2,) * n + (d,))
    return np.transpose(out, [*np.argsort(order), n]).reshape(d, d)
