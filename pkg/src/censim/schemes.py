"""Context-encryption schemes and advertisement payload codec.

Five ways to propagate an encounter's location-time context:

* beacon scheme ("encrypt what you heard"): devices broadcast a rotating
  (uuid, public key) pair every 15 minutes; a receiver encrypts its own
  location under the heard public key and keeps the ciphertext, which is
  only ever readable by the beacon's owner;
* asymmetric: context encrypted to the emitter's own rotating public key;
  publishing the master secret after diagnosis unlocks it;
* symmetric: context encrypted under a key derived from the daily key, so
  the standard key upload is the only disclosure step (the recommended
  minimal-change scheme);
* consent-gated: the context key mixes in a separate consent secret via
  XOR-then-HKDF, so identifier matching works from the daily key alone
  while location stays locked until the consent secret is also published;
* blurred consent-gated: as above, but the plaintext is the grid-cell
  center rather than the raw position.

All encryption is AES-128-GCM so that a wrong key, a withheld consent
secret, or tampering fails authentication instead of yielding garbage.
Payload layouts are bit-exact and documented on the codec functions. The
``nonce`` keyword on encrypt functions is a fixed-nonce mode for test
vectors only; production-style callers pass an RNG and get fresh nonces.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional, Sequence, Union

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import DecryptError, FormatError
from .gaen import DailyKey, Enin, Rpi, enin_from_unix
from .geo import ContextBlob, GeoPoint, QuantizerConfig, encode_context, quantize
from .rng import DeterministicRng

SYM_INFO = b"CTX-SYM"
CONSENT_INFO = b"CTX-CONSENT"
CONSENT_DAY_INFO = b"CTX-CONSENT-DAY"
ASYM_INFO = b"CTX-ASYM"
BEACON_UUID_INFO = b"FM-UUID"
BEACON_SCALAR_INFO = b"FM-SK"

BEACON_PERIOD_S = 900

NONCE_LEN = 12
CT_TAG_LEN = 32  # 16-byte blob ciphertext + 16-byte tag
EC_LEN = NONCE_LEN + CT_TAG_LEN  # 44
EPH_EC_LEN = 32 + EC_LEN  # 76, ephemeral public key prepended

RPI_LEN = 16
AEM_LEN = 4
HEADER_LEN = RPI_LEN + AEM_LEN + 1  # 21
BEACON_LEN = 16 + 32  # 48


class SchemeTag(IntEnum):
    """Payload tag telling a receiver how the context section is keyed."""

    NONE = 0
    ASYM = 2
    SYM = 3
    CONSENT = 4
    BLURRED_CONSENT = 5


_CONTEXT_LEN = {
    SchemeTag.NONE: 0,
    SchemeTag.ASYM: EPH_EC_LEN,
    SchemeTag.SYM: EC_LEN,
    SchemeTag.CONSENT: EC_LEN,
    SchemeTag.BLURRED_CONSENT: EC_LEN,
}


@dataclass(frozen=True)
class EncryptedContext:
    """Nonce plus AEAD output for one 16-byte context blob."""

    nonce: bytes
    ciphertext_and_tag: bytes

    def __post_init__(self):
        if len(self.nonce) != NONCE_LEN:
            raise FormatError(f"nonce must be {NONCE_LEN} bytes")
        if len(self.ciphertext_and_tag) != CT_TAG_LEN:
            raise FormatError(f"ciphertext+tag must be {CT_TAG_LEN} bytes")

    def to_bytes(self) -> bytes:
        return self.nonce + self.ciphertext_and_tag

    @classmethod
    def from_bytes(cls, raw: bytes) -> "EncryptedContext":
        if len(raw) != EC_LEN:
            raise FormatError(f"encrypted context must be {EC_LEN} bytes, got {len(raw)}")
        return cls(raw[:NONCE_LEN], raw[NONCE_LEN:])


@dataclass(frozen=True)
class EphemeralEncryptedContext:
    """Encrypted context preceded by the sender's ephemeral public key."""

    ephemeral_pub: bytes
    inner: EncryptedContext

    def __post_init__(self):
        if len(self.ephemeral_pub) != 32:
            raise FormatError("ephemeral public key must be 32 bytes")

    def to_bytes(self) -> bytes:
        return self.ephemeral_pub + self.inner.to_bytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "EphemeralEncryptedContext":
        if len(raw) != EPH_EC_LEN:
            raise FormatError(
                f"ephemeral encrypted context must be {EPH_EC_LEN} bytes, got {len(raw)}"
            )
        return cls(raw[:32], EncryptedContext.from_bytes(raw[32:]))


@dataclass(frozen=True)
class ConsentSecret:
    """Device secret gating decryption of broadcast context."""

    secret: bytes

    def __post_init__(self):
        if len(self.secret) != 16:
            raise ValueError("consent secret must be 16 bytes")


def generate_consent_secret(rng: DeterministicRng) -> ConsentSecret:
    return ConsentSecret(rng.take(16))


def _hkdf(ikm: bytes, info: bytes, length: int) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=length, salt=None, info=info).derive(ikm)


def _fresh_nonce(rng: Optional[DeterministicRng], nonce: Optional[bytes]) -> bytes:
    if nonce is not None:
        if len(nonce) != NONCE_LEN:
            raise FormatError(f"nonce must be {NONCE_LEN} bytes")
        return nonce
    if rng is None:
        raise ValueError("either an rng or an explicit nonce is required")
    return rng.take(NONCE_LEN)


def _seal(key16: bytes, blob: ContextBlob, nonce: bytes) -> EncryptedContext:
    ct = AESGCM(key16).encrypt(nonce, blob.to_bytes(), None)
    return EncryptedContext(nonce, ct)


def _open(key16: bytes, ec: EncryptedContext) -> ContextBlob:
    try:
        raw = AESGCM(key16).decrypt(ec.nonce, ec.ciphertext_and_tag, None)
    except InvalidTag as e:
        raise DecryptError("authentication failed: wrong key/consent or tampering") from e
    return ContextBlob.from_bytes(raw)


# --- symmetric (daily-key) scheme -----------------------------------------


def symmetric_context_key(dk: DailyKey) -> bytes:
    return _hkdf(dk.key, SYM_INFO, 16)


def encrypt_symmetric(
    dk: DailyKey,
    blob: ContextBlob,
    rng: Optional[DeterministicRng] = None,
    *,
    nonce: Optional[bytes] = None,
) -> EncryptedContext:
    return _seal(symmetric_context_key(dk), blob, _fresh_nonce(rng, nonce))


def decrypt_symmetric(dk: DailyKey, ec: EncryptedContext) -> ContextBlob:
    return _open(symmetric_context_key(dk), ec)


# --- consent-gated scheme --------------------------------------------------


def consent_key(dk: DailyKey, cs: ConsentSecret) -> bytes:
    """Context key from XOR of daily key and consent secret, then HKDF.

    XOR rather than concatenation for the mixing step; the HKDF pass keeps
    related inputs from producing related cipher keys.
    """
    mixed = bytes(a ^ b for a, b in zip(dk.key, cs.secret))
    return _hkdf(mixed, CONSENT_INFO, 16)


def daily_consent_secret(cs: ConsentSecret, day_start: Enin) -> ConsentSecret:
    """Per-day consent secret for the rotating-consent variant.

    The default deployment keeps one non-rotating secret; deriving one per
    day lets a user grant or refuse disclosure day by day at the same
    granularity as the key schedule.
    """
    info = CONSENT_DAY_INFO + struct.pack(">I", day_start.value)
    return ConsentSecret(_hkdf(cs.secret, info, 16))


def encrypt_consent(
    dk: DailyKey,
    cs: ConsentSecret,
    blob: ContextBlob,
    rng: Optional[DeterministicRng] = None,
    *,
    nonce: Optional[bytes] = None,
) -> EncryptedContext:
    return _seal(consent_key(dk, cs), blob, _fresh_nonce(rng, nonce))


def decrypt_consent(dk: DailyKey, cs: ConsentSecret, ec: EncryptedContext) -> ContextBlob:
    return _open(consent_key(dk, cs), ec)


def encrypt_blurred_consent(
    dk: DailyKey,
    cs: ConsentSecret,
    p: GeoPoint,
    e: Enin,
    q: QuantizerConfig,
    rng: Optional[DeterministicRng] = None,
    *,
    nonce: Optional[bytes] = None,
) -> EncryptedContext:
    """Consent-gated encryption of the grid-cell center, never the raw point."""
    blob = encode_context(quantize(p, q).center, e)
    return encrypt_consent(dk, cs, blob, rng, nonce=nonce)


# --- asymmetric scheme -----------------------------------------------------


def asym_keypair(rng: DeterministicRng) -> tuple[bytes, bytes]:
    """(public key, private key) pair for context encryption, 32 bytes each."""
    priv = X25519PrivateKey.from_private_bytes(rng.take(32))
    return priv.public_key().public_bytes_raw(), priv.private_bytes_raw()


def _ecies_key(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
    return _hkdf(shared, ASYM_INFO + eph_pub + recipient_pub, 16)


def encrypt_asym(
    recipient_pub: bytes,
    blob: ContextBlob,
    rng: DeterministicRng,
    *,
    nonce: Optional[bytes] = None,
) -> EphemeralEncryptedContext:
    """Hybrid encryption: fresh X25519 ephemeral, shared-secret KDF, AEAD."""
    if len(recipient_pub) != 32:
        raise FormatError("recipient public key must be 32 bytes")
    eph = X25519PrivateKey.from_private_bytes(rng.take(32))
    eph_pub = eph.public_key().public_bytes_raw()
    shared = eph.exchange(X25519PublicKey.from_public_bytes(recipient_pub))
    key = _ecies_key(shared, eph_pub, recipient_pub)
    return EphemeralEncryptedContext(eph_pub, _seal(key, blob, _fresh_nonce(rng, nonce)))


def decrypt_asym(recipient_priv: bytes, eec: EphemeralEncryptedContext) -> ContextBlob:
    if len(recipient_priv) != 32:
        raise FormatError("private key must be 32 bytes")
    priv = X25519PrivateKey.from_private_bytes(recipient_priv)
    recipient_pub = priv.public_key().public_bytes_raw()
    try:
        shared = priv.exchange(X25519PublicKey.from_public_bytes(eec.ephemeral_pub))
    except ValueError as e:
        raise DecryptError(f"key agreement failed: {e}") from e
    return _open(_ecies_key(shared, eec.ephemeral_pub, recipient_pub), eec.inner)


# --- rotating beacon scheme ("encrypt what you heard") ---------------------


def beacon_window(t: int) -> int:
    """Index of the 15-minute rotation window containing Unix time t."""
    if t < 0:
        raise ValueError("negative timestamp")
    return t // BEACON_PERIOD_S


@dataclass(frozen=True)
class FindMyBeacon:
    """Broadcast frame of the beacon scheme: per-window uuid and public key."""

    uuid: bytes
    public_key: bytes

    def __post_init__(self):
        if len(self.uuid) != 16 or len(self.public_key) != 32:
            raise FormatError("beacon must be 16-byte uuid + 32-byte public key")

    def to_bytes(self) -> bytes:
        return self.uuid + self.public_key

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FindMyBeacon":
        if len(raw) != BEACON_LEN:
            raise FormatError(f"beacon frame must be {BEACON_LEN} bytes, got {len(raw)}")
        return cls(raw[:16], raw[16:])


@dataclass(frozen=True)
class RotatingKeypair:
    """Per-window keypair family derived from one long-term master secret.

    Deriving each window's scalar from the master secret means a device can
    rotate its public key every 15 minutes while a single 32-byte upload
    after diagnosis stands in for "the private key" of every window.
    """

    master_secret: bytes
    window: int
    public_part: bytes

    def __post_init__(self):
        if len(self.master_secret) != 32:
            raise ValueError("master secret must be 32 bytes")
        if len(self.public_part) != 32:
            raise ValueError("public part must be 32 bytes")

    @classmethod
    def generate(cls, rng: DeterministicRng, t: int = 0) -> "RotatingKeypair":
        return cls.from_master(rng.take(32), t)

    @classmethod
    def from_master(cls, master_secret: bytes, t: int = 0) -> "RotatingKeypair":
        w = beacon_window(t)
        return cls(master_secret, w, _window_scalar(master_secret, w).public_key().public_bytes_raw())


def _window_scalar(master_secret: bytes, window: int) -> X25519PrivateKey:
    raw = _hkdf(master_secret, BEACON_SCALAR_INFO + struct.pack(">Q", window), 32)
    return X25519PrivateKey.from_private_bytes(raw)


def _window_uuid(master_secret: bytes, window: int) -> bytes:
    return _hkdf(master_secret, BEACON_UUID_INFO + struct.pack(">Q", window), 16)


def findmy_beacon(kp: RotatingKeypair, t: int) -> FindMyBeacon:
    """Beacon for the window containing t; constant within a window."""
    w = beacon_window(t)
    scalar = _window_scalar(kp.master_secret, w)
    return FindMyBeacon(
        _window_uuid(kp.master_secret, w), scalar.public_key().public_bytes_raw()
    )


@dataclass(frozen=True)
class FindMyRecord:
    """Stored (uuid, ciphertext) pair later uploaded by a diagnosed device."""

    uuid: bytes
    payload: EphemeralEncryptedContext

    def __post_init__(self):
        if len(self.uuid) != 16:
            raise FormatError("record uuid must be 16 bytes")

    def to_bytes(self) -> bytes:
        return self.uuid + self.payload.to_bytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FindMyRecord":
        if len(raw) != 16 + EPH_EC_LEN:
            raise FormatError(f"record must be {16 + EPH_EC_LEN} bytes, got {len(raw)}")
        return cls(raw[:16], EphemeralEncryptedContext.from_bytes(raw[16:]))


def findmy_encrypt_heard(
    beacon: FindMyBeacon,
    own_gps: GeoPoint,
    t: int,
    rng: DeterministicRng,
    *,
    nonce: Optional[bytes] = None,
) -> FindMyRecord:
    """Encrypt own location under a heard beacon; only its owner can read it."""
    blob = encode_context(own_gps, enin_from_unix(t))
    return FindMyRecord(beacon.uuid, encrypt_asym(beacon.public_key, blob, rng, nonce=nonce))


@dataclass
class FindMyRecovery:
    """Outcome of matching uploaded records against own beacon history.

    Each recovered context is (matched uuid, peer location, peer window).
    """

    contexts: list[tuple[bytes, GeoPoint, Enin]]
    auth_failures: int
    unmatched: int


def findmy_recover(
    kp: RotatingKeypair,
    records: Sequence[FindMyRecord],
    windows: Iterable[int],
) -> FindMyRecovery:
    """Recover encounter contexts addressed to this device's beacons.

    ``windows`` bounds the uuid re-derivation (e.g. the deployment period).
    Records whose uuid matches no window are skipped; matched records that
    fail authentication are counted, not raised.
    """
    from .geo import decode_context  # local import to avoid cycle noise

    uuid_to_window = {_window_uuid(kp.master_secret, w): w for w in windows}
    out = FindMyRecovery([], 0, 0)
    for rec in records:
        w = uuid_to_window.get(rec.uuid)
        if w is None:
            out.unmatched += 1
            continue
        scalar = _window_scalar(kp.master_secret, w)
        try:
            blob = decrypt_asym(scalar.private_bytes_raw(), rec.payload)
        except DecryptError:
            out.auth_failures += 1
            continue
        point, at = decode_context(blob.to_bytes())
        out.contexts.append((rec.uuid, point, at))
    return out


# --- advertisement payload codec -------------------------------------------


@dataclass(frozen=True)
class BlePayload:
    """Parsed advertisement: identifier, opaque metadata, tagged context.

    Wire layout (big-endian, bit-exact): bytes [0,16) identifier, [16,20)
    metadata, [20] scheme tag, then the context section whose length the
    tag implies: none (21 bytes total), nonce+ciphertext (65), or ephemeral
    key+nonce+ciphertext (97, asymmetric scheme).
    """

    rpi: bytes
    aem: bytes
    scheme_tag: SchemeTag
    context: Union[EncryptedContext, EphemeralEncryptedContext, None] = None

    def __post_init__(self):
        if len(self.rpi) != RPI_LEN:
            raise FormatError(f"identifier must be {RPI_LEN} bytes")
        if len(self.aem) != AEM_LEN:
            raise FormatError(f"metadata must be {AEM_LEN} bytes")
        expected = _CONTEXT_LEN[self.scheme_tag]
        actual = 0 if self.context is None else len(self.context.to_bytes())
        if expected != actual:
            raise FormatError(
                f"scheme {self.scheme_tag.name} needs a {expected}-byte context section,"
                f" got {actual}"
            )

    def to_bytes(self) -> bytes:
        ctx = b"" if self.context is None else self.context.to_bytes()
        return self.rpi + self.aem + bytes([self.scheme_tag]) + ctx


def assemble_payload(
    rpi: Union[Rpi, bytes],
    aem: bytes,
    scheme_tag: SchemeTag,
    context: Union[EncryptedContext, EphemeralEncryptedContext, None] = None,
) -> bytes:
    raw_rpi = rpi.bytes if isinstance(rpi, Rpi) else bytes(rpi)
    return BlePayload(raw_rpi, aem, SchemeTag(scheme_tag), context).to_bytes()


def parse_payload(raw: bytes) -> BlePayload:
    if len(raw) < HEADER_LEN:
        raise FormatError(f"payload shorter than {HEADER_LEN}-byte header")
    try:
        tag = SchemeTag(raw[20])
    except ValueError:
        raise FormatError(f"unknown scheme tag {raw[20]}") from None
    body = raw[HEADER_LEN:]
    expected = _CONTEXT_LEN[tag]
    if len(body) != expected:
        raise FormatError(
            f"scheme {tag.name} payload must be {HEADER_LEN + expected} bytes,"
            f" got {len(raw)}"
        )
    context: Union[EncryptedContext, EphemeralEncryptedContext, None]
    if expected == 0:
        context = None
    elif expected == EC_LEN:
        context = EncryptedContext.from_bytes(body)
    else:
        context = EphemeralEncryptedContext.from_bytes(body)
    return BlePayload(raw[:RPI_LEN], raw[RPI_LEN : RPI_LEN + AEM_LEN], tag, context)
