"""
Collision distinguisher for low-depth random states.

Two copies of a state are measured in the same random product basis and the test counts the
patches of L qubits on which both outcomes agree. Shallow states collide more often than Haar
states, so accepting when the count exceeds a threshold separates the two.
"""

from __future__ import annotations

import logging
import math
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from kdesign.ensembles import sample_state
from kdesign.exceptions import ConfigurationError, PreconditionError, ResourceLimitError
from kdesign.models import EnsembleSpec, Variant
from kdesign.quantsim import PatchLayout, StateVec, restrict_words
from kdesign.seeding import SampleHandle

logger = logging.getLogger(__name__)

MAX_COLLISION_QUBITS = 16
TRIAL_BATCH = 1024


# ============== Closed forms ==============


def haar_collision_rate(n: int, L: int) -> float:
    """Exact per-patch collision probability for a Haar state: ``(2^(n-L) + 1)/(2^n + 1)``."""
    if not 1 <= L <= n:
        raise PreconditionError(f"patch size must lie in [1, {n}], got {L}")
    return (2 ** (n - L) + 1) / (2**n + 1)


def product_state_collision_rate(L: int) -> float:
    """Per-patch collision probability of any pure product state."""
    return (2 / 3) ** L


def collision_lower_bound(L: int) -> float:
    """``(1/2^L)(1 + 1/3^L)``, the per-patch rate every depth-0 source reaches."""
    return (1 + 3.0**-L) / 2**L


def threshold_star(
    L: int, M: int, q_low: float | None = None, q_high: float | None = None
) -> float:
    """Collision count at which the Bernoulli(q_high)^M to Bernoulli(q_low)^M likelihood
    ratio crosses one.

    Defaults compare the Haar rate ``1/2^L`` with the product-state bound.
    """
    if L < 1 or M < 1:
        raise PreconditionError(f"need L >= 1 and M >= 1, got L={L} M={M}")
    low = 2.0**-L if q_low is None else q_low
    high = collision_lower_bound(L) if q_high is None else q_high
    if not 0 < low < high < 1:
        raise PreconditionError(f"need 0 < q_low < q_high < 1, got {low} and {high}")
    per_miss = math.log((1 - low) / (1 - high))
    return M * per_miss / (math.log(high / low) + per_miss)


def predicted_advantage(n: int, L: int) -> float:
    """Lower bound on the distinguishing advantage with ``M = n/L^4`` separated patches."""
    if L < 1:
        raise PreconditionError(f"patch size must be positive, got {L}")
    return (n / L**4) / 36**L / math.log(2) - 2 / 2**n


def accept_probability(q_rates: ArrayLike, s_star: float) -> float:
    """``P(|z| > s*)`` for independent patches colliding with probabilities ``q_rates``."""
    dist = np.ones(1)
    for q in np.asarray(q_rates, dtype=np.float64):
        dist = np.convolve(dist, [1 - q, q])
    counts = np.arange(len(dist))
    return float(dist[counts > s_star].sum())


def tvd_bernoulli_product(q1: float, q2: float, M: int) -> float:
    """Total variation distance between Bernoulli(q1)^M and Bernoulli(q2)^M."""
    counts = np.arange(M + 1)
    diff = stats.binom.pmf(counts, M, q1) - stats.binom.pmf(counts, M, q2)
    return float(0.5 * np.abs(diff).sum())


# ============== Simulation ==============


class CollisionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    layout: PatchLayout
    trials: int = Field(ge=1)
    s_star: float | None = None
    fixed_basis: bool = False
    compare_haar: bool = True

    @model_validator(mode="after")
    def _check_threshold(self) -> CollisionConfig:
        if self.s_star is not None and not 0 <= self.s_star <= self.layout.count:
            raise ConfigurationError(
                "s_star", self.s_star, f"threshold must lie in [0, {self.layout.count}]"
            )
        return self

    @property
    def threshold(self) -> float:
        if self.s_star is not None:
            return self.s_star
        return threshold_star(self.layout.xi, self.layout.count)


class CollisionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: str
    trials: int
    patch_size: int
    s_star: float
    per_patch_rates: list[float]
    per_patch_stderr: list[float]
    pair_covariance: list[float]
    mean_collisions: float
    accept_rate: float
    compare: CollisionReport | None = None
    advantage: float | None = None
    advantage_stderr: float | None = None

    def rows(self) -> list[dict[str, Any]]:
        """``patch_index, rate, stderr`` rows for CSV output."""
        return [
            {"patch_index": a, "rate": r, "stderr": s}
            for a, (r, s) in enumerate(
                zip(self.per_patch_rates, self.per_patch_stderr, strict=True)
            )
        ]


def haar_single_qubit_batch(count: int, rng: np.random.Generator) -> NDArray[np.complex128]:
    """``count`` Haar 2x2 unitaries: QR of a Ginibre matrix with the R-diagonal phases removed."""
    z = (rng.normal(size=(count, 2, 2)) + 1j * rng.normal(size=(count, 2, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    return q * (diag / np.abs(diag))[:, None, :]


def _rotate(
    amps: NDArray[np.complex128], unitaries: NDArray[np.complex128]
) -> NDArray[np.complex128]:
    """Apply one 2x2 unitary per (row, qubit) to a (batch, 2^n) stack."""
    batch, size = amps.shape
    n = unitaries.shape[1]
    out = amps
    for q in range(n):
        view = out.reshape(batch, 1 << q, 2, size >> (q + 1))
        out = np.einsum("bij,bajc->baic", unitaries[:, q], view).reshape(batch, size)
    return out


def sample_outcome_pairs(
    probs: NDArray[np.float64], rng: np.random.Generator
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Two independent outcomes per row of a (batch, 2^n) probability stack."""
    u = rng.random((probs.shape[0], 2))
    picks = np.empty(u.shape, dtype=np.int64)
    # Row by row: one 2^n cdf in memory at a time.
    for row, (p, draws) in enumerate(zip(probs, u, strict=True)):
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        picks[row] = np.searchsorted(cdf, draws, side="right")
    picks = np.minimum(picks, probs.shape[1] - 1)
    return picks[:, 0], picks[:, 1]


def _batch_states(
    source: EnsembleSpec | StateVec,
    start: int,
    count: int,
    handle: SampleHandle,
    rng: np.random.Generator,
) -> NDArray[np.complex128]:
    if isinstance(source, StateVec):
        return np.broadcast_to(source.amps, (count, source.amps.size))
    size = 1 << source.n
    if source.variant is Variant.HAAR:
        g = rng.normal(size=(count, size)) + 1j * rng.normal(size=(count, size))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    draws = handle.child("ensemble")
    return np.stack([sample_state(source, draws.draw(start + i)).amps for i in range(count)])


def _source_name(source: EnsembleSpec | StateVec) -> str:
    return "fixed" if isinstance(source, StateVec) else source.variant.value


def collision_indicators(
    source: EnsembleSpec | StateVec, cfg: CollisionConfig, handle: SampleHandle
) -> NDArray[np.bool_]:
    """(trials, patches) matrix, True where both outcomes agree on the whole patch."""
    layout = cfg.layout
    n = layout.n
    if isinstance(source, EnsembleSpec):
        if not source.is_state:
            raise ConfigurationError("variant", source.variant.value, "not a state ensemble")
        if source.n != n:
            raise ConfigurationError("n", source.n, f"layout covers {n} qubits")
    elif source.n != n:
        raise ConfigurationError("n", source.n, f"layout covers {n} qubits")
    if n > MAX_COLLISION_QUBITS:
        raise ResourceLimitError("collision test qubits", n, MAX_COLLISION_QUBITS)
    patch_words = np.stack([restrict_words(n, p) for p in layout.patches])
    trial_stream = handle.child("trial")
    out = []
    for b, start in enumerate(range(0, cfg.trials, TRIAL_BATCH)):
        count = min(TRIAL_BATCH, cfg.trials - start)
        rng = trial_stream.draw(b).rng()
        amps = _batch_states(source, start, count, handle, rng)
        if not cfg.fixed_basis:
            bases = haar_single_qubit_batch(count * n, rng).reshape(count, n, 2, 2)
            amps = _rotate(np.ascontiguousarray(amps), bases)
        x, y = sample_outcome_pairs(np.abs(amps) ** 2, rng)
        out.append(patch_words[:, x].T == patch_words[:, y].T)
        logger.debug(f"collision batch {b}: {count} trials")
    return np.concatenate(out)


def _summarize(name: str, z: NDArray[np.bool_], cfg: CollisionConfig) -> CollisionReport:
    trials, patches = z.shape
    rates = z.mean(axis=0)
    counts = z.sum(axis=1)
    zf = z.astype(np.float64)
    cov = [
        float(np.mean(zf[:, a] * zf[:, a + 1]) - rates[a] * rates[a + 1])
        for a in range(patches - 1)
    ]
    return CollisionReport(
        source=name,
        trials=trials,
        patch_size=cfg.layout.xi,
        s_star=cfg.threshold,
        per_patch_rates=rates.tolist(),
        per_patch_stderr=np.sqrt(rates * (1 - rates) / trials).tolist(),
        pair_covariance=cov,
        mean_collisions=float(counts.mean()),
        accept_rate=float(np.mean(counts > cfg.threshold)),
    )


def run_collision_test(
    source: EnsembleSpec | StateVec, cfg: CollisionConfig, handle: SampleHandle | None = None
) -> CollisionReport:
    """Run the collision test on ``source`` and, unless disabled, on Haar states for reference."""
    root = handle if handle is not None else SampleHandle.root().child("distinguish")
    logger.info(f"collision test: {_source_name(source)} n={cfg.layout.n} L={cfg.layout.xi}")
    report = _summarize(_source_name(source), collision_indicators(source, cfg, root), cfg)
    is_haar = isinstance(source, EnsembleSpec) and source.variant is Variant.HAAR
    if not cfg.compare_haar or is_haar:
        return report
    haar = EnsembleSpec(variant=Variant.HAAR, n=cfg.layout.n)
    reference = _summarize("Haar", collision_indicators(haar, cfg, root.child("haar")), cfg)
    p, q = report.accept_rate, reference.accept_rate
    stderr = math.sqrt(p * (1 - p) / report.trials + q * (1 - q) / reference.trials)
    return report.model_copy(
        update={"compare": reference, "advantage": p - q, "advantage_stderr": stderr}
    )
