"""Counter-based deterministic random source for simulation runs.

Every random draw in a scenario comes from one of these streams, keyed by a
64-bit seed plus a textual label, so that a run is a pure function of its
scenario. The block function is SHA-256 over (seed, label, counter); output
bytes are consumed from the block stream in order. Not a cryptographic RNG
for production use: real deployments would draw keys from the OS.
"""

from __future__ import annotations

import hashlib
import struct


class DeterministicRng:
    """SHA-256 counter stream. Same (seed, label, call sequence) => same bytes."""

    def __init__(self, seed: int, label: str = "root"):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self._seed = seed
        self._label = label
        self._key = hashlib.sha256(
            struct.pack(">Q", seed) + label.encode("utf-8")
        ).digest()
        self._counter = 0
        self._buffer = b""

    def _refill(self) -> None:
        block = hashlib.sha256(self._key + struct.pack(">Q", self._counter)).digest()
        self._counter += 1
        self._buffer += block

    def take(self, n: int) -> bytes:
        """Return the next n bytes of the stream."""
        while len(self._buffer) < n:
            self._refill()
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.u64() >> 11) / float(1 << 53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] via rejection sampling."""
        if hi < lo:
            raise ValueError("empty range")
        span = hi - lo + 1
        # Rejection keeps the draw unbiased for spans that don't divide 2^64.
        limit = (2**64 // span) * span
        while True:
            v = self.u64()
            if v < limit:
                return lo + v % span

    def spawn(self, label: str) -> "DeterministicRng":
        """Independent child stream; derivation depends only on seed and labels."""
        child_seed = int.from_bytes(
            hashlib.sha256(self._key + b"/" + label.encode("utf-8")).digest()[:8],
            "big",
        )
        return DeterministicRng(child_seed, f"{self._label}/{label}")

    def state(self) -> dict:
        """Resumable stream position, for state snapshots."""
        return {
            "seed": self._seed,
            "label": self._label,
            "counter": self._counter,
            "buffer": self._buffer.hex(),
        }

    @classmethod
    def from_state(cls, st: dict) -> "DeterministicRng":
        rng = cls(st["seed"], st["label"])
        rng._counter = st["counter"]
        rng._buffer = bytes.fromhex(st["buffer"])
        return rng
