"""
Deterministic randomness: named, counter-indexed streams derived from one master seed.
"""

from __future__ import annotations

import hashlib
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from kdesign.config import Settings, get_settings
from kdesign.models import EnsembleSpec

logger = logging.getLogger(__name__)


def stream_key(name: str) -> int:
    """Stable 64-bit key for a stream name (Python's ``hash`` is salted per process)."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class SampleHandle(BaseModel):
    """Identifies one reproducible draw: same handle, bitwise-identical sample."""

    model_config = ConfigDict(frozen=True)

    master_seed: int = Field(ge=0, lt=2**64)
    draw_index: int = Field(default=0, ge=0)
    name: str = "root"
    spec: EnsembleSpec | None = None

    @classmethod
    def root(
        cls, master_seed: int | None = None, settings: Settings | None = None
    ) -> SampleHandle:
        seed = master_seed if master_seed is not None else get_settings(settings).master_seed
        return cls(master_seed=seed)

    def child(self, name: str) -> SampleHandle:
        """Derive a named sub-stream, e.g. ``ensemble`` or ``trial``."""
        return self.model_copy(update={"name": f"{self.name}/{name}"})

    def draw(self, index: int) -> SampleHandle:
        return self.model_copy(update={"draw_index": index})

    def rng(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.master_seed, spawn_key=(stream_key(self.name), self.draw_index)
        )
        return np.random.default_rng(seq)


class BitStream:
    """Hands out exact bit counts from a generator and tracks how many were consumed."""

    _CHUNK = 32

    def __init__(self, rng: np.random.Generator | None) -> None:
        self._rng = rng
        self._buffer = 0
        self._available = 0
        self.consumed = 0

    @classmethod
    def zeros(cls) -> BitStream:
        return cls(None)

    @classmethod
    def from_handle(cls, handle: SampleHandle) -> BitStream:
        return cls(handle.rng())

    def take(self, bits: int) -> int:
        """Return the next ``bits`` bits as an unsigned integer."""
        if bits < 0:
            raise ValueError(f"bit count must be non-negative, got {bits}")
        self.consumed += bits
        if self._rng is None:
            return 0
        while self._available < bits:
            chunk = int(self._rng.integers(0, 1 << self._CHUNK, dtype=np.uint64))
            self._buffer |= chunk << self._available
            self._available += self._CHUNK
        value = self._buffer & ((1 << bits) - 1)
        self._buffer >>= bits
        self._available -= bits
        return value
