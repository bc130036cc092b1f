"""Key schedule, rolling identifiers, and diagnosis-key matching.

Follows the published exposure-notification cryptography (v1.2 constants):
a 16-byte per-day key, HKDF-SHA256 with info ``EN-RPIK`` to get the rolling
identifier key, and one AES-128-ECB block over the padded interval value per
10-minute window. Interop with stock vectors is bit-exact; golden files live
in the test corpus with lines ``hex(key16) <sp> decimal(enin) <sp> hex(rpi16)``.

All values here are immutable and every operation is a pure function, so
everything in this module is safe to share across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import AlignmentError, IntervalRangeError, WindowError
from .rng import DeterministicRng

ENIN_SECONDS = 600
WINDOWS_PER_DAY = 144
KEY_LEN = 16
RPIK_INFO = b"EN-RPIK"
AEMK_INFO = b"EN-AEMK"

_MAX_ENIN = 2**32


@dataclass(frozen=True, order=True)
class Enin:
    """Index of a 10-minute window since the Unix epoch (144 per day)."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < _MAX_ENIN:
            raise IntervalRangeError(f"interval index out of u32 range: {self.value}")

    def day_start(self) -> "Enin":
        return Enin((self.value // WINDOWS_PER_DAY) * WINDOWS_PER_DAY)

    def day_index(self) -> int:
        return self.value // WINDOWS_PER_DAY

    def unix_start(self) -> int:
        return self.value * ENIN_SECONDS

    def offset(self, intervals: int) -> "Enin":
        return Enin(self.value + intervals)


def enin_from_unix(t: int) -> Enin:
    """Window index for a Unix timestamp in seconds (floor of t/600)."""
    if t < 0:
        raise IntervalRangeError(f"negative timestamp: {t}")
    if t >= _MAX_ENIN * ENIN_SECONDS:
        raise IntervalRangeError(f"timestamp overflows 32-bit interval index: {t}")
    return Enin(t // ENIN_SECONDS)


@dataclass(frozen=True)
class DailyKey:
    """16-byte per-day key; root of identifier derivation and context keys."""

    key: bytes
    day_start: Enin

    def __post_init__(self):
        if len(self.key) != KEY_LEN:
            raise ValueError(f"daily key must be {KEY_LEN} bytes, got {len(self.key)}")
        if self.day_start.value % WINDOWS_PER_DAY != 0:
            raise AlignmentError(
                f"day_start {self.day_start.value} not aligned to {WINDOWS_PER_DAY}"
            )

    def to_text(self) -> str:
        """Textual form used on the CLI and in bundle files."""
        return f"{self.key.hex()} {self.day_start.value}"

    @classmethod
    def from_text(cls, text: str) -> "DailyKey":
        parts = text.split()
        if len(parts) != 2:
            raise ValueError(f"expected 'hexkey day_start', got {text!r}")
        return cls(bytes.fromhex(parts[0]), Enin(int(parts[1])))


@dataclass(frozen=True)
class Rpi:
    """Rolling proximity identifier: 16 bytes bound to one window."""

    bytes: bytes
    derived_at: Enin

    def __post_init__(self):
        if len(self.bytes) != KEY_LEN:
            raise ValueError(f"identifier must be {KEY_LEN} bytes")


@dataclass(frozen=True)
class MatchTolerance:
    """Matching slack in whole intervals; the default 12 is +/-2 hours."""

    intervals: int = 12

    def __post_init__(self):
        if self.intervals < 0:
            raise ValueError("tolerance must be non-negative")


def generate_daily_key(rng: DeterministicRng, day_start: Enin) -> DailyKey:
    """Draw a fresh 16-byte key for the given day from the seeded stream."""
    if day_start.value % WINDOWS_PER_DAY != 0:
        raise AlignmentError(f"day_start {day_start.value} not aligned to {WINDOWS_PER_DAY}")
    return DailyKey(rng.take(KEY_LEN), day_start)


def _hkdf16(key: bytes, info: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=16, salt=None, info=info).derive(key)


def rpik(dk: DailyKey) -> bytes:
    """Rolling-identifier key for one daily key."""
    return _hkdf16(dk.key, RPIK_INFO)


def aemk(dk: DailyKey) -> bytes:
    """Metadata key for one daily key (metadata itself is treated as opaque)."""
    return _hkdf16(dk.key, AEMK_INFO)


def _padded_data(at: Enin) -> bytes:
    # "EN-RPI" || 6 zero bytes || little-endian interval number
    return b"EN-RPI" + b"\x00" * 6 + struct.pack("<I", at.value)


def _ecb_block(key: bytes, block: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def _check_window(dk: DailyKey, at: Enin, windows: int) -> None:
    lo = dk.day_start.value
    if not lo <= at.value < lo + windows:
        raise WindowError(
            f"interval {at.value} outside key validity [{lo}, {lo + windows})"
        )


def derive_rpi(dk: DailyKey, at: Enin, *, windows: int = WINDOWS_PER_DAY) -> Rpi:
    """Identifier for one window of one key. Pure and deterministic."""
    _check_window(dk, at, windows)
    return Rpi(_ecb_block(rpik(dk), _padded_data(at)), at)


def derive_all_rpis(dk: DailyKey, *, windows: int = WINDOWS_PER_DAY) -> list[Rpi]:
    """All identifiers of a key in window order; element i is for day_start+i.

    ``windows`` caps validity below one day for faster-rotating key variants;
    the default matches the daily schedule.
    """
    if not 1 <= windows <= WINDOWS_PER_DAY:
        raise ValueError(f"windows must be in [1, {WINDOWS_PER_DAY}]")
    rk = rpik(dk)
    base = dk.day_start.value
    enc = Cipher(algorithms.AES(rk), modes.ECB()).encryptor()
    out = []
    for i in range(windows):
        at = Enin(base + i)
        out.append(Rpi(enc.update(_padded_data(at)), at))
    enc.finalize()
    return out


def derive_aem(dk: DailyKey, rpi: Rpi, metadata: bytes = b"\x00" * 4) -> bytes:
    """4 opaque metadata bytes, AES-CTR keystream keyed by the metadata key.

    Carried in the payload for wire fidelity; nothing in this artifact parses it.
    """
    if len(metadata) != 4:
        raise ValueError("metadata must be 4 bytes")
    enc = Cipher(algorithms.AES(aemk(dk)), modes.CTR(rpi.bytes)).encryptor()
    return enc.update(metadata) + enc.finalize()


class MatchStats:
    """Optional derivation counter for cost accounting in benchmarks."""

    def __init__(self):
        self.derivations = 0
        self.comparisons = 0


def match_rpis(
    heard: Sequence[tuple[bytes, Enin]],
    dk: DailyKey,
    tol: MatchTolerance = MatchTolerance(),
    *,
    windows: int = WINDOWS_PER_DAY,
    stats: Optional[MatchStats] = None,
) -> list[tuple[int, Enin]]:
    """Match heard identifiers against one diagnosis key.

    ``heard`` holds (identifier bytes, observed-at window) pairs. A record
    matches when its bytes equal a derived identifier of ``dk`` and the
    observed window is within ``tol.intervals`` of the derivation window,
    boundary inclusive. Returns (index into heard, derivation window) for
    every match, in input order.
    """
    derived = derive_all_rpis(dk, windows=windows)
    if stats is not None:
        stats.derivations += len(derived)
    by_bytes = {r.bytes: r.derived_at for r in derived}
    out = []
    for i, (raw, observed_at) in enumerate(heard):
        if stats is not None:
            stats.comparisons += 1
        window = by_bytes.get(bytes(raw))
        if window is None:
            continue
        if abs(observed_at.value - window.value) <= tol.intervals:
            out.append((i, window))
    return out


def parse_vector_line(line: str) -> tuple[bytes, Enin, bytes]:
    """One golden-vector line: key hex, decimal interval, identifier hex."""
    parts = line.split()
    if len(parts) != 3:
        raise ValueError(f"bad vector line: {line!r}")
    return bytes.fromhex(parts[0]), Enin(int(parts[1])), bytes.fromhex(parts[2])


def format_vector_line(key: bytes, at: Enin, rpi_bytes: bytes) -> str:
    return f"{key.hex()} {at.value} {rpi_bytes.hex()}"


def iter_vector_lines(text: str) -> Iterable[tuple[bytes, Enin, bytes]]:
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        yield parse_vector_line(line)
