"""Reference primitives and golden-vector generation.

Everything here is built from first principles (table-free byte-level AES,
bitwise GF(2^128) GHASH, HKDF written directly over hmac) so it shares no
code with the production path in ``gaen``/``schemes``, which rides on the
``cryptography`` library. The test suite derives its frozen golden files
from these definitions and then checks the production path against them;
``censim vectors`` regenerates the same files for review.

Do not use these implementations outside tests and vector generation: they
are intentionally slow and make no constant-time claims.
"""

from __future__ import annotations

import hashlib
import hmac
import struct

# ---------------------------------------------------------------------------
# GF(2^8) arithmetic and the AES S-box, computed from the field definition
# ---------------------------------------------------------------------------


def _gmul(a: int, b: int) -> int:
    p = 0
    for _ in range(8):
        if b & 1:
            p ^= a
        carry = a & 0x80
        a = (a << 1) & 0xFF
        if carry:
            a ^= 0x1B
        b >>= 1
    return p


def _build_sbox() -> list[int]:
    exp = [0] * 255
    log = [0] * 256
    e = 1
    for i in range(255):
        exp[i] = e
        log[e] = i
        e = _gmul(e, 3)
    sbox = [0] * 256
    for x in range(256):
        inv = 0 if x == 0 else exp[(255 - log[x]) % 255]
        b = inv
        res = 0x63
        for shift in range(5):
            res ^= ((b << shift) | (b >> (8 - shift))) & 0xFF
        sbox[x] = res
    return sbox


_SBOX = _build_sbox()


def _expand_key_128(key: bytes) -> list[bytes]:
    words = [list(key[4 * i : 4 * i + 4]) for i in range(4)]
    rcon = 1
    for i in range(4, 44):
        t = list(words[i - 1])
        if i % 4 == 0:
            t = t[1:] + t[:1]
            t = [_SBOX[v] for v in t]
            t[0] ^= rcon
            rcon = _gmul(rcon, 2)
        words.append([a ^ b for a, b in zip(words[i - 4], t)])
    out = []
    for r in range(11):
        flat: list[int] = []
        for w in words[4 * r : 4 * r + 4]:
            flat.extend(w)
        out.append(bytes(flat))
    return out


def _shift_rows(s: list[int]) -> list[int]:
    return [s[(i + 4 * (i % 4)) % 16] for i in range(16)]


def _mix_columns(s: list[int]) -> list[int]:
    out = [0] * 16
    for c in range(4):
        a = s[4 * c : 4 * c + 4]
        out[4 * c + 0] = _gmul(a[0], 2) ^ _gmul(a[1], 3) ^ a[2] ^ a[3]
        out[4 * c + 1] = a[0] ^ _gmul(a[1], 2) ^ _gmul(a[2], 3) ^ a[3]
        out[4 * c + 2] = a[0] ^ a[1] ^ _gmul(a[2], 2) ^ _gmul(a[3], 3)
        out[4 * c + 3] = _gmul(a[0], 3) ^ a[1] ^ a[2] ^ _gmul(a[3], 2)
    return out


def aes128_encrypt_block(key: bytes, block: bytes) -> bytes:
    """One AES-128 block, computed round by round from the standard."""
    if len(key) != 16 or len(block) != 16:
        raise ValueError("key and block must be 16 bytes")
    rks = _expand_key_128(key)
    s = [b ^ k for b, k in zip(block, rks[0])]
    for rnd in range(1, 10):
        s = [_SBOX[v] for v in s]
        s = _shift_rows(s)
        s = _mix_columns(s)
        s = [v ^ k for v, k in zip(s, rks[rnd])]
    s = [_SBOX[v] for v in s]
    s = _shift_rows(s)
    s = [v ^ k for v, k in zip(s, rks[10])]
    return bytes(s)


# ---------------------------------------------------------------------------
# GCM on top of the block cipher
# ---------------------------------------------------------------------------

_R = 0xE1 << 120


def _gf128_mul(x: int, y: int) -> int:
    z = 0
    v = x
    for i in range(128):
        if (y >> (127 - i)) & 1:
            z ^= v
        if v & 1:
            v = (v >> 1) ^ _R
        else:
            v >>= 1
    return z


def _ghash(h: int, data: bytes) -> int:
    assert len(data) % 16 == 0
    y = 0
    for i in range(0, len(data), 16):
        y = _gf128_mul(y ^ int.from_bytes(data[i : i + 16], "big"), h)
    return y


def _pad16(data: bytes) -> bytes:
    rem = len(data) % 16
    return data if rem == 0 else data + b"\x00" * (16 - rem)


def aes128_gcm_encrypt(
    key: bytes, nonce: bytes, plaintext: bytes, aad: bytes = b""
) -> bytes:
    """AES-128-GCM with a 96-bit nonce; returns ciphertext || 16-byte tag."""
    if len(nonce) != 12:
        raise ValueError("nonce must be 12 bytes")
    h = int.from_bytes(aes128_encrypt_block(key, b"\x00" * 16), "big")
    j0 = nonce + b"\x00\x00\x00\x01"
    ct = bytearray()
    counter = int.from_bytes(j0[12:], "big")
    for i in range(0, len(plaintext), 16):
        counter = (counter + 1) & 0xFFFFFFFF
        ks = aes128_encrypt_block(key, nonce + struct.pack(">I", counter))
        chunk = plaintext[i : i + 16]
        ct.extend(x ^ k for x, k in zip(chunk, ks))
    lengths = struct.pack(">QQ", len(aad) * 8, len(ct) * 8)
    s = _ghash(h, _pad16(aad) + _pad16(bytes(ct)) + lengths)
    tag_stream = aes128_encrypt_block(key, j0)
    tag = bytes(a ^ b for a, b in zip(tag_stream, s.to_bytes(16, "big")))
    return bytes(ct) + tag


# ---------------------------------------------------------------------------
# HKDF-SHA256 written out over hmac
# ---------------------------------------------------------------------------


def hkdf_sha256(ikm: bytes, info: bytes, length: int, salt: bytes | None = None) -> bytes:
    if salt is None:
        salt = b"\x00" * 32
    prk = hmac.new(salt, ikm, hashlib.sha256).digest()
    okm = b""
    block = b""
    counter = 1
    while len(okm) < length:
        block = hmac.new(prk, block + info + bytes([counter]), hashlib.sha256).digest()
        okm += block
        counter += 1
    return okm[:length]


# ---------------------------------------------------------------------------
# Reference constructions mirroring the protocol definitions
# ---------------------------------------------------------------------------


def rpi_reference(key: bytes, enin: int) -> bytes:
    rpik = hkdf_sha256(key, b"EN-RPIK", 16)
    padded = b"EN-RPI" + b"\x00" * 6 + struct.pack("<I", enin)
    return aes128_encrypt_block(rpik, padded)


def consent_key_reference(daily_key: bytes, consent_secret: bytes) -> bytes:
    mixed = bytes(a ^ b for a, b in zip(daily_key, consent_secret))
    return hkdf_sha256(mixed, b"CTX-CONSENT", 16)


def sym_key_reference(daily_key: bytes) -> bytes:
    return hkdf_sha256(daily_key, b"CTX-SYM", 16)


def sym_ciphertext_reference(daily_key: bytes, blob: bytes, nonce: bytes) -> bytes:
    return aes128_gcm_encrypt(sym_key_reference(daily_key), nonce, blob)


def consent_ciphertext_reference(
    daily_key: bytes, consent_secret: bytes, blob: bytes, nonce: bytes
) -> bytes:
    ck = consent_key_reference(daily_key, consent_secret)
    return aes128_gcm_encrypt(ck, nonce, blob)


def fixed_code_reference(value: float, lo: float, span: int) -> int:
    """Exact floor((value - lo) / span * 2^32) via integer arithmetic only."""
    num, den = float(value).as_integer_ratio()
    lo_i = int(lo)
    # (num/den - lo) / span * 2^32 == (num - lo*den) * 2^32 / (span * den)
    code = ((num - lo_i * den) << 32) // (span * den)
    return min(code, 2**32 - 1)


def blob_reference(lat: float, lon: float, enin: int) -> bytes:
    lat_code = fixed_code_reference(lat, -90, 180)
    lon_code = fixed_code_reference(lon, -180, 360)
    return struct.pack(">III", lat_code, lon_code, enin) + b"\x00" * 4


# ---------------------------------------------------------------------------
# Golden-vector file generation
# ---------------------------------------------------------------------------


def _label_key(tag: str, i: int) -> bytes:
    return hashlib.sha256(f"{tag}-{i}".encode()).digest()[:16]


def _label_nonce(tag: str, i: int) -> bytes:
    return hashlib.sha256(f"{tag}-nonce-{i}".encode()).digest()[:12]


def rpi_vector_lines() -> list[str]:
    cases: list[tuple[bytes, int]] = [
        (b"\x00" * 16, 0),
        (b"\x00" * 16, 1),
        (b"\x00" * 16, 143),
    ]
    for i in range(7):
        key = _label_key("rpi", i)
        day_start = i * 37 * 144  # spread over distinct days
        for off in (0, 71, 143):
            cases.append((key, day_start + off))
    return [f"{k.hex()} {e} {rpi_reference(k, e).hex()}" for k, e in cases]


def consent_key_vector_lines() -> list[str]:
    cases = [
        (b"\x00" * 16, b"\x00" * 16),
        (b"\x11" * 16, b"\x00" * 16),
        (b"\x00" * 16, b"\x42" * 16),
    ]
    for i in range(4):
        cases.append((_label_key("ck-dk", i), _label_key("ck-cs", i)))
    return [
        f"{dk.hex()} {cs.hex()} -> {consent_key_reference(dk, cs).hex()}"
        for dk, cs in cases
    ]


def _blob_cases() -> list[tuple[float, float, int]]:
    return [
        (0.0, 0.0, 0),
        (-90.0, -180.0, 7),
        (90.0, 179.9999999, 144),
        (42.3601, -71.0942, 2_629_728),
        (-33.8688, 151.2093, 2_629_871),
        (51.5074, -0.1278, 123_456),
    ]


def blob_vector_lines() -> list[str]:
    return [
        f"{lat!r} {lon!r} {enin} -> {blob_reference(lat, lon, enin).hex()}"
        for lat, lon, enin in _blob_cases()
    ]


def sym_ctx_vector_lines() -> list[str]:
    lines = []
    for i, (lat, lon, enin) in enumerate(_blob_cases()):
        dk = _label_key("sym-dk", i)
        nonce = _label_nonce("sym", i)
        blob = blob_reference(lat, lon, enin)
        ct = sym_ciphertext_reference(dk, blob, nonce)
        lines.append(f"{dk.hex()} {blob.hex()} {nonce.hex()} -> {ct.hex()}")
    return lines


def consent_ctx_vector_lines() -> list[str]:
    lines = []
    for i, (lat, lon, enin) in enumerate(_blob_cases()):
        dk = _label_key("con-dk", i)
        cs = _label_key("con-cs", i)
        nonce = _label_nonce("con", i)
        blob = blob_reference(lat, lon, enin)
        ct = consent_ciphertext_reference(dk, cs, blob, nonce)
        lines.append(f"{dk.hex()} {cs.hex()} {blob.hex()} {nonce.hex()} -> {ct.hex()}")
    return lines


def rpi_zero_day_lines() -> list[str]:
    """One identifier per line for the all-zero key on day 0, no extras.

    Kept header-free so `derive-rpis` output can be diffed against it
    line for line.
    """
    return [rpi_reference(b"\x00" * 16, i).hex() for i in range(144)]


VECTOR_FILES = {
    "rpi_vectors.txt": rpi_vector_lines,
    "rpi_zero_day.txt": rpi_zero_day_lines,
    "consent_key_vectors.txt": consent_key_vector_lines,
    "context_blob_vectors.txt": blob_vector_lines,
    "sym_ctx_vectors.txt": sym_ctx_vector_lines,
    "consent_ctx_vectors.txt": consent_ctx_vector_lines,
}

_HEADERS = {
    "rpi_vectors.txt": "# hex(key16) decimal(enin) hex(rpi16)",
    "consent_key_vectors.txt": "# hex(daily_key) hex(consent_secret) -> hex(context_key)",
    "context_blob_vectors.txt": "# lat lon enin -> hex(blob16)",
    "sym_ctx_vectors.txt": "# hex(daily_key) hex(blob16) hex(nonce12) -> hex(ct_and_tag32)",
    "consent_ctx_vectors.txt": (
        "# hex(daily_key) hex(consent_secret) hex(blob16) hex(nonce12)"
        " -> hex(ct_and_tag32)"
    ),
}


def generate_all() -> dict[str, str]:
    """File name -> full text for every golden-vector file."""
    out = {}
    for name, fn in VECTOR_FILES.items():
        header = _HEADERS.get(name)
        lines = ([header] if header else []) + fn()
        out[name] = "\n".join(lines) + "\n"
    return out
