"""
Moments, design-error metrics and numerical checks of the operator identities behind them.

Moments are exact when the ensemble's randomness space can be enumerated and Monte-Carlo
estimates otherwise. Monte-Carlo draws are grouped into contiguous batches whose means feed
both the point estimate and a nonparametric bootstrap, so results do not depend on the
worker count.

Trace distances use the full trace norm ``||a - b||_1`` (no factor 1/2).
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import itertools
import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict

from kdesign.config import Settings, get_settings
from kdesign.ensembles import (
    phase_options,
    sample_state,
    sample_unitary,
    state_table,
    step_tables,
)
from kdesign.exceptions import (
    ConfigurationError,
    ContractViolationError,
    PreconditionError,
    ResourceLimitError,
)
from kdesign.models import EnsembleSpec, Independence, MomentMode, TwirlSource, Variant
from kdesign.quantsim import (
    ComplexArray,
    DenseOp,
    PatchLayout,
    distinct_dimension,
    distinct_projector,
    local_distinct_projector,
    permutation_op,
    permutations,
    register_values,
    restrict_words,
    sample_clifford,
    sample_haar_unitary,
    stabilization_key,
)
from kdesign.seeding import SampleHandle

logger = logging.getLogger(__name__)

MAX_MOMENT_DIM = 4096
MAX_SUPEROP_COPY_QUBITS = 6
MAX_HAAR_MOMENT_QUBITS = 12
MAX_HAAR_MOMENT_K = 6
MAX_EXPERIMENT_QUBITS = 10
MAX_FACT2_COPY_QUBITS = 8

_BATCHES = 32
_BATCH_ENTRIES = 1 << 25
_CHUNK = 2048


# ============== Result types ==============


@dataclass(frozen=True)
class MomentEstimate:
    """A moment operator and how it was obtained; ``std_error`` is the largest per-entry one."""

    operator: DenseOp
    mode: MomentMode
    samples: int
    std_error: float | None = None
    batch_means: ComplexArray | None = field(default=None, repr=False, compare=False)


class ErrorEstimate(BaseModel):
    """A distance estimate.

    ``raw`` is the plug-in value; for Monte-Carlo runs ``estimate`` is bias corrected and the
    interval is a 95% percentile bootstrap interval.
    """

    model_config = ConfigDict(frozen=True)

    estimate: float
    raw: float
    std_error: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    samples: int
    mode: MomentMode


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """A k-query experiment: ``W_{k+1} U W_k ... U W_1 |0>`` with U on the first n qubits."""

    n: int
    k: int
    m_anc: int
    interleavers: tuple[ComplexArray, ...]

    def __post_init__(self) -> None:
        if self.n < 1 or self.k < 1 or self.m_anc < 0:
            raise PreconditionError(f"bad plan shape n={self.n} k={self.k} m_anc={self.m_anc}")
        if self.n + self.m_anc > MAX_EXPERIMENT_QUBITS:
            raise ResourceLimitError(
                "experiment qubits", self.n + self.m_anc, MAX_EXPERIMENT_QUBITS
            )
        if len(self.interleavers) != self.k + 1:
            raise ContractViolationError(
                f"{self.k} queries need {self.k + 1} interleavers, got {len(self.interleavers)}"
            )
        dim = self.dim
        for i, w in enumerate(self.interleavers):
            if w.shape != (dim, dim):
                raise ContractViolationError(f"interleaver {i} has shape {w.shape}, need {dim}")
            if not np.allclose(w.conj().T @ w, np.eye(dim), atol=1e-8):
                raise ContractViolationError(f"interleaver {i} is not unitary")

    @property
    def dim(self) -> int:
        return 1 << (self.n + self.m_anc)

    @classmethod
    def identity(cls, n: int, k: int, m_anc: int = 0) -> ExperimentPlan:
        eye = np.eye(1 << (n + m_anc), dtype=np.complex128)
        return cls(n, k, m_anc, tuple(eye for _ in range(k + 1)))


def random_plan(n: int, k: int, m_anc: int, handle: SampleHandle) -> ExperimentPlan:
    """Plan with Haar-random interleavers drawn from ``handle``."""
    rng = handle.child("plan").rng()
    dim = 1 << (n + m_anc)
    return ExperimentPlan(
        n, k, m_anc, tuple(sample_haar_unitary(dim, rng).matrix for _ in range(k + 1))
    )


# ============== Linear algebra helpers ==============


def kron_power(u: ArrayLike, k: int) -> ComplexArray:
    """``u^{(x)k}`` over the last two axes, batched over any leading axes."""
    base = np.asarray(u, dtype=np.complex128)
    out = base
    for _ in range(k - 1):
        rows, cols = out.shape[-2] * base.shape[-2], out.shape[-1] * base.shape[-1]
        out = np.einsum("...ab,...cd->...acbd", out, base).reshape(*base.shape[:-2], rows, cols)
    return out


def tensor_power_rows(v: ArrayLike, k: int) -> ComplexArray:
    """Row-wise ``v^{(x)k}`` for a (count, d) stack of vectors."""
    base = np.asarray(v, dtype=np.complex128)
    out = base
    for _ in range(k - 1):
        out = (out[:, :, None] * base[:, None, :]).reshape(base.shape[0], -1)
    return out


def trace_distance(a: DenseOp | ArrayLike, b: DenseOp | ArrayLike) -> float:
    """``||a - b||_1``; Hermitian differences go through ``eigvalsh``."""
    left = a.matrix if isinstance(a, DenseOp) else np.asarray(a, dtype=np.complex128)
    right = b.matrix if isinstance(b, DenseOp) else np.asarray(b, dtype=np.complex128)
    diff = left - right
    if np.allclose(diff, diff.conj().T, atol=1e-12):
        herm = (diff + diff.conj().T) / 2
        return float(np.abs(np.linalg.eigvalsh(herm)).sum())
    return float(np.linalg.svd(diff, compute_uv=False).sum())


def _cycles(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    count = 0
    for start in range(len(perm)):
        if not seen[start]:
            count += 1
            j = start
            while not seen[j]:
                seen[j] = True
                j = perm[j]
    return count


def _compose_inverse(sigma: Sequence[int], tau: Sequence[int]) -> tuple[int, ...]:
    inverse = [0] * len(sigma)
    for i, s in enumerate(sigma):
        inverse[s] = i
    return tuple(inverse[t] for t in tau)


def choi_from_superop(superop: ArrayLike, dim: int) -> ComplexArray:
    """Normalized Choi state of the channel whose row-major superoperator is ``superop``."""
    m = np.asarray(superop, dtype=np.complex128)
    return m.reshape(dim, dim, dim, dim).transpose(0, 2, 1, 3).reshape(dim * dim, -1) / dim


def _reshuffle(superop: ComplexArray, dim: int) -> ComplexArray:
    return superop.reshape(dim, dim, dim, dim).transpose(0, 2, 1, 3).reshape(dim * dim, -1)


# ============== Monte-Carlo plumbing ==============


def _check_budget(budget: int) -> None:
    if budget < 2:
        raise PreconditionError(f"Monte-Carlo budget must be at least 2, got {budget}")


def _batched_means(
    contrib: Callable[[int], ComplexArray], samples: int, entries: int, workers: int
) -> ComplexArray:
    """Means of ``contrib(i)`` over contiguous batches of ``range(samples)``."""
    batches = max(2, min(_BATCHES, samples, _BATCH_ENTRIES // max(entries, 1)))
    chunks = np.array_split(np.arange(samples), batches)

    def run(chunk: NDArray[np.int64]) -> ComplexArray:
        total = contrib(int(chunk[0])).copy()
        for i in chunk[1:]:
            total += contrib(int(i))
        return total / len(chunk)

    logger.info(f"Monte-Carlo: {samples} draws in {batches} batches on {workers} workers")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            means = list(pool.map(run, chunks))
    else:
        means = [run(c) for c in chunks]
    return np.stack(means)


def _pooled(batch_means: ComplexArray, samples: int) -> ComplexArray:
    sizes = np.array([len(c) for c in np.array_split(np.arange(samples), len(batch_means))])
    return np.tensordot(sizes / samples, batch_means, axes=1)


def _entry_std_error(batch_means: ComplexArray) -> float:
    spread = np.std(batch_means, axis=0, ddof=1)
    return float(np.max(spread) / math.sqrt(len(batch_means)))


def _bootstrap(
    statistic: Callable[[NDArray[np.int64]], float],
    raw: float,
    batches: int,
    samples: int,
    handle: SampleHandle,
    resamples: int | None,
    settings: Settings | None,
) -> ErrorEstimate:
    count = resamples if resamples is not None else get_settings(settings).bootstrap_resamples
    rng = handle.child("bootstrap").rng()
    stats = np.array([statistic(rng.integers(0, batches, size=batches)) for _ in range(count)])
    low, high = np.quantile(stats, [0.025, 0.975])
    return ErrorEstimate(
        estimate=max(0.0, 2 * raw - float(stats.mean())),
        raw=raw,
        std_error=float(stats.std(ddof=1)) if count > 1 else 0.0,
        ci_low=float(low),
        ci_high=float(high),
        samples=samples,
        mode=MomentMode.MONTE_CARLO,
    )


def _workers(workers: int | None, settings: Settings | None) -> int:
    return workers if workers is not None else (get_settings(settings).workers or 1)


def _handle(handle: SampleHandle | None, name: str, settings: Settings | None) -> SampleHandle:
    return handle if handle is not None else SampleHandle.root(settings=settings).child(name)


# ============== State moments ==============


def _check_state_moment(n: int, k: int) -> int:
    if k < 1:
        raise PreconditionError(f"moment order must be positive, got {k}")
    dim = 1 << (n * k)
    if dim > MAX_MOMENT_DIM:
        raise ResourceLimitError("moment dimension (2^n)^k", dim, MAX_MOMENT_DIM)
    return dim


def haar_state_moment(n: int, k: int) -> DenseOp:
    """Sum of the k-register permutations over ``d(d+1)...(d+k-1)``."""
    if n * k > MAX_HAAR_MOMENT_QUBITS:
        raise ResourceLimitError("Haar moment qubits n*k", n * k, MAX_HAAR_MOMENT_QUBITS)
    if k > MAX_HAAR_MOMENT_K:
        raise ResourceLimitError("Haar moment order", k, MAX_HAAR_MOMENT_K)
    total = sum(permutation_op(pi, n, k).matrix for pi in permutations(k))
    return DenseOp(np.asarray(total) / math.perm((1 << n) + k - 1, k))


def _weighted_moment(weights: NDArray[np.float64], amps: ComplexArray, k: int) -> ComplexArray:
    dim = amps.shape[1] ** k
    chi = np.zeros((dim, dim), dtype=np.complex128)
    for start in range(0, len(weights), _CHUNK):
        rows = tensor_power_rows(amps[start : start + _CHUNK], k)
        chi += (rows * weights[start : start + _CHUNK, None]).T @ rows.conj()
    return chi


def state_moment(
    spec: EnsembleSpec,
    k: int,
    mode: MomentMode = MomentMode.EXACT_ENUM,
    budget: int = 1000,
    handle: SampleHandle | None = None,
    workers: int | None = None,
    settings: Settings | None = None,
) -> MomentEstimate:
    """``E[|psi><psi|^{(x)k}]`` over a state ensemble."""
    if not spec.is_state:
        raise ConfigurationError("variant", spec.variant.value, "not a state ensemble")
    dim = _check_state_moment(spec.n, k)
    if mode is MomentMode.EXACT_ENUM:
        if spec.variant is Variant.HAAR:
            return MomentEstimate(haar_state_moment(spec.n, k), mode, samples=0)
        weights, amps = state_table(spec)
        logger.info(f"exact state moment over {len(weights)} states, k={k}")
        return MomentEstimate(DenseOp(_weighted_moment(weights, amps, k)), mode, len(weights))

    _check_budget(budget)
    source = _handle(handle, "state_moment", settings)

    def contrib(i: int) -> ComplexArray:
        row = tensor_power_rows(sample_state(spec, source.draw(i)).amps[None, :], k)[0]
        return np.outer(row, row.conj())

    means = _batched_means(contrib, budget, dim * dim, _workers(workers, settings))
    return MomentEstimate(
        DenseOp(_pooled(means, budget)), mode, budget, _entry_std_error(means), means
    )


def state_design_error(
    spec: EnsembleSpec,
    k: int,
    mode: MomentMode = MomentMode.EXACT_ENUM,
    budget: int = 1000,
    handle: SampleHandle | None = None,
    workers: int | None = None,
    resamples: int | None = None,
    settings: Settings | None = None,
) -> ErrorEstimate:
    """``||chi_S - chi_H||_1``."""
    source = _handle(handle, "state_design_error", settings)
    reference = haar_state_moment(spec.n, k).matrix
    moment = state_moment(spec, k, mode, budget, source, workers, settings)
    raw = trace_distance(moment.operator, reference)
    logger.info(f"state design error {spec.variant.value}(n={spec.n}) k={k}: {raw:.6g}")
    if moment.batch_means is None:
        return ErrorEstimate(estimate=raw, raw=raw, samples=moment.samples, mode=mode)
    means = moment.batch_means
    return _bootstrap(
        lambda idx: trace_distance(means[idx].mean(axis=0), reference),
        raw,
        len(means),
        budget,
        source,
        resamples,
        settings,
    )


def phase_state_moment_closed_form(n: int, k: int) -> DenseOp:
    """Random phase state moment: ``2^{-nk}`` where the two k-tuples stabilize each other."""
    return _stabilization_moment(n, k, [tuple(range(n))])


def blocked_phase_moment_closed_form(layout: PatchLayout, k: int) -> DenseOp:
    """Blocked phase moment: the product of stabilization deltas over every patch pair."""
    groups = [
        layout.pair_qubits(a, b)
        for parity in ("odd", "even")
        for a, b in layout.pairs(parity)
    ]
    return _stabilization_moment(layout.n, k, groups)


def _stabilization_moment(n: int, k: int, groups: Sequence[Sequence[int]]) -> DenseOp:
    dim = _check_state_moment(n, k)
    values = register_values(n, k)
    mask = np.ones((dim, dim), dtype=bool)
    for qubits in groups:
        restricted = restrict_words(n, qubits)[values]
        keys: dict[tuple[int, ...], int] = {}
        ids = np.array(
            [keys.setdefault(stabilization_key(col), len(keys)) for col in restricted.T.tolist()]
        )
        mask &= ids[:, None] == ids[None, :]
    return DenseOp(mask.astype(np.complex128) / dim)


# ============== Unitary moments ==============


def _check_superop(n: int, k: int) -> int:
    if k < 1:
        raise PreconditionError(f"moment order must be positive, got {k}")
    if n * k > MAX_SUPEROP_COPY_QUBITS:
        raise ResourceLimitError("superoperator copy qubits n*k", n * k, MAX_SUPEROP_COPY_QUBITS)
    return 1 << (n * k)


def haar_twirl_superop(n: int, k: int) -> ComplexArray:
    """k-copy Haar twirl: Hilbert-Schmidt projection onto the span of register permutations."""
    dim = _check_superop(n, k)
    perms = list(permutations(k))
    basis = np.stack([permutation_op(pi, n, k).matrix.reshape(-1) for pi in perms], axis=1)
    gram = np.array(
        [[float(1 << (n * _cycles(_compose_inverse(s, t)))) for t in perms] for s in perms]
    )
    logger.debug(f"Haar twirl n={n} k={k}: {len(perms)} permutations, dim {dim}")
    return basis @ np.linalg.pinv(gram) @ basis.conj().T


def _step_moment(weights: NDArray[np.float64], mats: ComplexArray, k: int) -> ComplexArray:
    dim = mats.shape[-1] ** k
    acc = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for start in range(0, len(weights), _CHUNK):
        v = kron_power(mats[start : start + _CHUNK], k).reshape(-1, dim * dim)
        acc += (v * weights[start : start + _CHUNK, None]).T @ v.conj()
    return _reshuffle(acc, dim)


def _exact_superop(spec: EnsembleSpec, k: int) -> tuple[ComplexArray, int]:
    dim = _check_superop(spec.n, k)
    if spec.variant is Variant.HAAR:
        return haar_twirl_superop(spec.n, k), 0
    if spec.variant is Variant.COMPOSED:
        total = np.eye(dim * dim, dtype=np.complex128)
        count = 1
        for factor in spec.factors:
            m, c = _exact_superop(factor, k)
            total = total @ m
            count *= max(c, 1)
        return total, count
    total = np.eye(dim * dim, dtype=np.complex128)
    count = 1
    for weights, mats in step_tables(spec):
        total = _step_moment(weights, mats, k) @ total
        count *= len(weights)
    return total, count


def moment_superop(
    spec: EnsembleSpec,
    k: int,
    mode: MomentMode = MomentMode.EXACT_ENUM,
    budget: int = 1000,
    handle: SampleHandle | None = None,
    workers: int | None = None,
    settings: Settings | None = None,
) -> MomentEstimate:
    """``E[U^{(x)k} (x) conj(U)^{(x)k}]``, the row-major superoperator of the k-copy twirl."""
    if not spec.is_unitary:
        raise ConfigurationError("variant", spec.variant.value, "not a unitary ensemble")
    dim = _check_superop(spec.n, k)
    if mode is MomentMode.EXACT_ENUM:
        superop, count = _exact_superop(spec, k)
        logger.info(f"exact superoperator {spec.variant.value}(n={spec.n}) k={k}: {count} draws")
        return MomentEstimate(DenseOp(superop), mode, count)

    _check_budget(budget)
    source = _handle(handle, "moment_superop", settings)

    def contrib(i: int) -> ComplexArray:
        v = kron_power(sample_unitary(spec, source.draw(i)).matrix, k)
        return np.kron(v, v.conj())

    means = _batched_means(contrib, budget, dim**4, _workers(workers, settings))
    return MomentEstimate(
        DenseOp(_pooled(means, budget)), mode, budget, _entry_std_error(means), means
    )


def unitary_moment_choi(
    spec: EnsembleSpec,
    k: int,
    mode: MomentMode = MomentMode.EXACT_ENUM,
    budget: int = 1000,
    handle: SampleHandle | None = None,
    workers: int | None = None,
    settings: Settings | None = None,
) -> MomentEstimate:
    """Choi state of the k-copy twirl channel."""
    dim = 1 << (spec.n * k)
    moment = moment_superop(spec, k, mode, budget, handle, workers, settings)
    choi = choi_from_superop(moment.operator.matrix, dim)
    batches = None
    if moment.batch_means is not None:
        batches = np.stack([choi_from_superop(b, dim) for b in moment.batch_means])
    return MomentEstimate(DenseOp(choi), mode, moment.samples, moment.std_error, batches)


def choi_error(
    spec: EnsembleSpec,
    k: int,
    mode: MomentMode = MomentMode.EXACT_ENUM,
    budget: int = 1000,
    handle: SampleHandle | None = None,
    workers: int | None = None,
    resamples: int | None = None,
    settings: Settings | None = None,
) -> ErrorEstimate:
    """Choi-state trace distance to the Haar twirl, a lower bound on the diamond distance."""
    source = _handle(handle, "choi_error", settings)
    dim = _check_superop(spec.n, k)
    reference = choi_from_superop(haar_twirl_superop(spec.n, k), dim)
    moment = unitary_moment_choi(spec, k, mode, budget, source, workers, settings)
    raw = trace_distance(moment.operator, reference)
    logger.info(f"Choi error {spec.variant.value}(n={spec.n}) k={k}: {raw:.6g}")
    if moment.batch_means is None:
        return ErrorEstimate(estimate=raw, raw=raw, samples=moment.samples, mode=mode)
    means = moment.batch_means
    return _bootstrap(
        lambda idx: trace_distance(means[idx].mean(axis=0), reference),
        raw,
        len(means),
        budget,
        source,
        resamples,
        settings,
    )


# ============== Measurable error ==============


def query_basis(plan: ExperimentPlan) -> ComplexArray:
    """Outputs of the plan with each query replaced by a matrix unit ``|i><j|``.

    Row ``(i_1..i_k, j_1..j_k)`` holds the output vector, so the output for U is the sum of
    rows weighted by ``prod U[i_s, j_s]``.
    """
    d = 1 << plan.n
    a = 1 << plan.m_anc
    cur = plan.interleavers[0][:, 0].reshape(1, d, a)
    for w in plan.interleavers[1:]:
        grown = np.zeros((cur.shape[0], d, d, d, a), dtype=np.complex128)
        for i in range(d):
            grown[:, i, :, i, :] = cur
        cur = (grown.reshape(-1, d * a) @ w.T).reshape(-1, d, a)
    k = plan.k
    order = [2 * s for s in range(k)] + [2 * s + 1 for s in range(k)] + [2 * k]
    rows = cur.reshape((d,) * (2 * k) + (d * a,)).transpose(order)
    return rows.reshape(d ** (2 * k), d * a)


def simulate_query(plan: ExperimentPlan, u: ArrayLike) -> ComplexArray:
    """Output vector of the plan for one fixed unitary."""
    full = np.kron(np.asarray(u, dtype=np.complex128), np.eye(1 << plan.m_anc))
    v = plan.interleavers[0][:, 0]
    for w in plan.interleavers[1:]:
        v = w @ (full @ v)
    return v


def experiment_output(plan: ExperimentPlan, superop: ArrayLike) -> ComplexArray:
    """Average output state given the ensemble's k-copy superoperator."""
    basis = query_basis(plan)
    kernel = _reshuffle(np.asarray(superop, dtype=np.complex128), 1 << (plan.n * plan.k))
    return basis.T @ kernel @ basis.conj()


def measurable_experiment(
    spec: EnsembleSpec,
    plan: ExperimentPlan,
    trials: int = 1000,
    mode: MomentMode = MomentMode.EXACT_ENUM,
    handle: SampleHandle | None = None,
    workers: int | None = None,
    resamples: int | None = None,
    settings: Settings | None = None,
) -> ErrorEstimate:
    """``||rho_E - rho_H||_1`` for one sequential k-query experiment."""
    if not spec.is_unitary:
        raise ConfigurationError("variant", spec.variant.value, "not a unitary ensemble")
    if spec.n != plan.n:
        raise ContractViolationError(f"plan queries {plan.n} qubits, ensemble acts on {spec.n}")
    source = _handle(handle, "measurable", settings)
    reference = experiment_output(plan, haar_twirl_superop(plan.n, plan.k))
    if mode is MomentMode.EXACT_ENUM:
        superop, count = _exact_superop(spec, plan.k)
        raw = trace_distance(experiment_output(plan, superop), reference)
        logger.info(f"measurable error {spec.variant.value}(n={spec.n}) exact: {raw:.6g}")
        return ErrorEstimate(estimate=raw, raw=raw, samples=count, mode=mode)

    _check_budget(trials)

    def contrib(i: int) -> ComplexArray:
        out = simulate_query(plan, sample_unitary(spec, source.draw(i)).matrix)
        return np.outer(out, out.conj())

    means = _batched_means(contrib, trials, plan.dim**2, _workers(workers, settings))
    raw = trace_distance(_pooled(means, trials), reference)
    logger.info(f"measurable error {spec.variant.value}(n={spec.n}) sampled: {raw:.6g}")
    return _bootstrap(
        lambda idx: trace_distance(means[idx].mean(axis=0), reference),
        raw,
        len(means),
        trials,
        source,
        resamples,
        settings,
    )


# ============== Operator identities ==============


def verify_pfc_fact1(n: int, k: int) -> float:
    """Residual of ``B'(P (x) P) = (2^{nk}/D) B (P (x) P)`` on the distinct subspace.

    ``B'`` is the Bell projector twirled by permutation-then-phase, times ``4^{nk}``;
    ``B`` is the sum of paired register permutations.
    """
    if n > 2 or k > 2:
        raise ResourceLimitError("exhaustive PFC identity size n+k", n + k, 4)
    d = 1 << n
    dim = d**k
    perms = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
    tables = phase_options(n, Independence.exact())
    # W^dagger = F P^T; P|x> = |perm[x]>
    p_t = np.zeros((len(perms), d, d), dtype=np.complex128)
    p_t[np.arange(len(perms))[:, None], np.arange(d)[None, :], perms] = 1
    signs = (1 - 2 * tables).astype(np.complex128)
    w_dag = (signs[:, None, :, None] * p_t[None, :, :, :]).reshape(-1, d, d)
    vecs = kron_power(w_dag, k).reshape(len(w_dag), -1)
    b_prime = float(dim) * (vecs.T @ vecs.conj()) / len(w_dag)
    b = sum(
        np.kron(permutation_op(pi, n, k).matrix, permutation_op(pi, n, k).matrix)
        for pi in permutations(k)
    )
    proj = np.kron(distinct_projector(n, k).matrix, distinct_projector(n, k).matrix)
    scale = dim / distinct_dimension(d, k)
    residual = float(np.linalg.norm(b_prime @ proj - scale * (np.asarray(b) @ proj)))
    logger.info(f"PFC identity n={n} k={k}: residual {residual:.3g}")
    return residual


def verify_fact2(
    n: int,
    k: int,
    source: TwirlSource = TwirlSource.CLIFFORD,
    trials: int = 10_000,
    handle: SampleHandle | None = None,
    workers: int | None = None,
    resamples: int | None = None,
    settings: Settings | None = None,
) -> ErrorEstimate:
    """Operator norm of ``I - E[C^dagger(x)k P_dist C^(x)k]`` for Clifford or Haar C."""
    if n * k > MAX_FACT2_COPY_QUBITS:
        raise ResourceLimitError("twirl copy qubits n*k", n * k, MAX_FACT2_COPY_QUBITS)
    _check_budget(trials)
    dim = 1 << (n * k)
    draws = _handle(handle, f"fact2/{source.value}", settings)
    diag = np.diag(distinct_projector(n, k).matrix).real
    eye = np.eye(dim)

    def contrib(i: int) -> ComplexArray:
        rng = draws.draw(i).rng()
        if source is TwirlSource.CLIFFORD:
            u = sample_clifford(n, rng).matrix
        else:
            u = sample_haar_unitary(1 << n, rng).matrix
        v = kron_power(u, k)
        return v.conj().T @ (diag[:, None] * v)

    means = _batched_means(contrib, trials, dim * dim, _workers(workers, settings))
    raw = float(np.linalg.norm(eye - _pooled(means, trials), 2))
    logger.info(f"distinct-projector twirl n={n} k={k} ({source.value}): {raw:.6g}")
    return _bootstrap(
        lambda idx: float(np.linalg.norm(eye - means[idx].mean(axis=0), 2)),
        raw,
        len(means),
        trials,
        draws,
        resamples,
        settings,
    )


def _apply_on(
    psi: ComplexArray, labels: list[str], targets: Sequence[str], op: ComplexArray
) -> tuple[ComplexArray, list[str]]:
    axes = [labels.index(t) for t in targets]
    half = len(targets)
    out = np.tensordot(op, psi, axes=(list(range(half, 2 * half)), axes))
    return out, list(targets) + [lbl for lbl in labels if lbl not in targets]


def postselection_state(plan: ExperimentPlan) -> ComplexArray:
    """Parallel-query state as an (A A', X_1..X_k, Y_1..Y_k) array.

    Each query's input register becomes X_i and a fresh EPR pair links Y_i to the next A.
    """
    d = 1 << plan.n
    a = 1 << plan.m_anc
    epr = np.eye(d, dtype=np.complex128) / math.sqrt(d)
    psi = plan.interleavers[0][:, 0].reshape(d, a)
    labels = ["A", "R"]
    for i, w in enumerate(plan.interleavers[1:], start=1):
        labels[labels.index("A")] = f"X{i}"
        psi = np.multiply.outer(psi, epr)
        labels += [f"Y{i}", "A"]
        psi, labels = _apply_on(psi, labels, ["A", "R"], w.reshape(d, a, d, a))
    order = ["A", "R"] + [f"X{i}" for i in range(1, plan.k + 1)]
    order += [f"Y{i}" for i in range(1, plan.k + 1)]
    psi = psi.transpose([labels.index(lbl) for lbl in order])
    return psi.reshape(d * a, d**plan.k, d**plan.k)


def verify_fact5(plan: ExperimentPlan) -> float:
    """``tr(B (1 (x) P_dist) |Psi><Psi|)`` for the plan's post-selection state."""
    if plan.n * plan.k > MAX_SUPEROP_COPY_QUBITS:
        raise ResourceLimitError("copy qubits n*k", plan.n * plan.k, MAX_SUPEROP_COPY_QUBITS)
    psi = postselection_state(plan)
    projected = psi * np.diag(distinct_projector(plan.n, plan.k).matrix).real[None, None, :]
    value = 0.0
    for pi in permutations(plan.k):
        p = permutation_op(pi, plan.n, plan.k).matrix
        value += float(np.vdot(psi, p @ projected @ p.T).real)
    return value


def verify_blocked_phase_identity(n: int, xi: int, k: int) -> float:
    """Residual between blocked and global phase moments on the local distinct subspace."""
    if xi not in (1, 2):
        raise ConfigurationError("xi", xi, "exhaustive check supports xi in {1, 2}")
    if n > 4 or k > 2:
        raise ResourceLimitError("exhaustive blocked-phase identity size n*k", n * k, 8)
    blocked = EnsembleSpec(variant=Variant.BLOCKED_PHASE, n=n, xi=xi)
    chi_b = state_moment(blocked, k).operator.matrix
    chi_f = state_moment(EnsembleSpec(variant=Variant.RANDOM_PHASE, n=n), k).operator.matrix
    proj = np.diag(local_distinct_projector(PatchLayout(n=n, xi=xi), k).matrix).real
    outer = proj[:, None] * proj[None, :]
    residual = float(np.linalg.norm(outer * (chi_b - chi_f)))
    logger.info(f"blocked-phase identity n={n} xi={xi} k={k}: residual {residual:.3g}")
    return residual


# ============== Error bounds ==============


def relative_error_factor(n: int, k: int) -> int:
    """``2^{nk} C(2^n + k - 1, k)``, the additive-to-relative conversion factor."""
    return (1 << (n * k)) * math.comb((1 << n) + k - 1, k)


def relative_error_bound(eps_add: float, n: int, k: int) -> float:
    if eps_add < 0:
        raise PreconditionError(f"additive error must be non-negative, got {eps_add}")
    return relative_error_factor(n, k) * eps_add


def error_after_composition(eps: float, t: int) -> float:
    """Additive error of ``t`` independent self-compositions of an eps-approximate design."""
    if t < 1:
        raise PreconditionError(f"composition count must be positive, got {t}")
    return eps**t


def random_phase_error_bound(n: int, k: int) -> float:
    return 4 * k * k / 2**n


def blocked_phase_error_bound(n: int, k: int, xi: int) -> float:
    return 3 * n * k * k / (2**xi * xi) + 2 * k * k / 2**n


def blocked_phase_error_bound_main(n: int, k: int, xi: int) -> float:
    return 3 * (n / xi) * k * k / 2**xi + 2 * k * k / 2**n


def pfc_error_bound(n: int, k: int) -> float:
    """Measurable error of permutation-phase-Clifford."""
    return 4 * k * k / 2**n


def lrfc_error_bound(n: int, k: int) -> float:
    return 6 * k * k / math.sqrt(2**n)


def blocked_lrfc_error_bound(n: int, k: int, xi: int) -> float:
    return 3 * n * k * k / (2**xi * xi)
