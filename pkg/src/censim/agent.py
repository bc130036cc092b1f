"""Per-device protocol state machine.

One DeviceAgent owns everything a phone would: the daily key schedule,
broadcast payload assembly for its configured scheme, the scan log of
what it heard, the private local location log, diagnosis bundle assembly,
and exposure derivation with context recovery.

Local-log bookkeeping (the two local schemes plus the blurred variant)
shares a per-window fix store updated on every reception, with the last
fix in a window winning. The identifier-indexed approach keeps a set of
(heard identifier, window) entry keys, the time-indexed approach a set of
windows; both resolve to the same fix store, so the two indexings agree
on identical scan histories by construction while exercising separate
lookup paths.

State snapshots are a small binary format (magic ``CEN1``): a plaintext
header with non-sensitive fields, then every location-bearing structure
AES-GCM-encrypted under a per-device storage key. The key is embedded in
the snapshot so the simulator can restart from a file alone; a real
deployment would keep it in the OS keystore. The privacy property the
format delivers is that no raw coordinate appears in the clear.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import DecryptError, FormatError, StateError
from .gaen import (
    WINDOWS_PER_DAY,
    DailyKey,
    Enin,
    MatchStats,
    MatchTolerance,
    derive_aem,
    derive_rpi,
    enin_from_unix,
    generate_daily_key,
    match_rpis,
)
from .geo import FGps, GeoPoint, QuantizerConfig, decode_context, encode_context, quantize
from .rng import DeterministicRng
from .schemes import (
    BEACON_LEN,
    BlePayload,
    ConsentSecret,
    FindMyBeacon,
    FindMyRecord,
    RotatingKeypair,
    SchemeTag,
    assemble_payload,
    asym_keypair,
    beacon_window,
    daily_consent_secret,
    decrypt_asym,
    decrypt_consent,
    decrypt_symmetric,
    encrypt_asym,
    encrypt_blurred_consent,
    encrypt_consent,
    encrypt_symmetric,
    findmy_beacon,
    findmy_encrypt_heard,
    findmy_recover,
    parse_payload,
)
from .server import BundleEntry, DiagnosisBundle

SNAPSHOT_MAGIC = b"CEN1"
SNAPSHOT_VERSION = 1


class Scheme(str, Enum):
    """Which propagation scheme a device runs."""

    LOCAL_RPI = "local_rpi"
    LOCAL_ENIN = "local_enin"
    LOCAL_BLURRED = "local_blurred"
    FINDMY = "findmy"
    ASYM = "asym"
    SYM = "sym"
    CONSENT = "consent"
    BLURRED_CONSENT = "blurred_consent"


LOCAL_SCHEMES = frozenset({Scheme.LOCAL_RPI, Scheme.LOCAL_ENIN, Scheme.LOCAL_BLURRED})
CONSENT_SCHEMES = frozenset({Scheme.CONSENT, Scheme.BLURRED_CONSENT})
BLURRED_SCHEMES = frozenset({Scheme.LOCAL_BLURRED, Scheme.BLURRED_CONSENT})


@dataclass(frozen=True)
class DeviceConfig:
    scheme: Scheme
    quantizer: Optional[QuantizerConfig] = None
    consent_default: bool = True

    def __post_init__(self):
        blurs = self.scheme in BLURRED_SCHEMES
        if blurs and self.quantizer is None:
            raise ValueError(f"scheme {self.scheme.value} requires a quantizer")
        if not blurs and self.quantizer is not None:
            raise ValueError(f"scheme {self.scheme.value} does not blur; drop the quantizer")


@dataclass(frozen=True)
class ScanRecord:
    """One stored reception, deduplicated per (identifier, window)."""

    payload: Union[BlePayload, FindMyBeacon]
    observed_at: Enin
    own_location: Optional[Union[GeoPoint, FGps]] = None
    rssi: Optional[float] = None


@dataclass(frozen=True)
class LocalLogEntry:
    """Private location log row; never leaves the device unencrypted."""

    key: Union[bytes, Enin]
    location: Union[GeoPoint, FGps]
    stored_at: Enin


@dataclass(frozen=True)
class ExposureEvent:
    """One matched encounter with a diagnosed device.

    ``context`` is the recovered (location, window) pair when any recovery
    route succeeded; ``context_source`` records which route. Exposure
    without context (consent withheld, decryption failure) still yields an
    event. ``bundle_pseudonym`` ties the event to the registry upload that
    matched; it is registry-public data, kept for audit attribution and
    excluded from the JSON event format.
    """

    matched_rpi: bytes
    window: Enin
    day: int
    scheme: Scheme
    context: Optional[tuple[Union[GeoPoint, FGps], Enin]] = None
    context_source: str = "none"
    bundle_pseudonym: Optional[bytes] = None


def event_to_json(e: ExposureEvent) -> dict:
    lat = lon = cell_m = None
    if e.context is not None:
        loc = e.context[0]
        if isinstance(loc, FGps):
            lat, lon, cell_m = loc.center.lat, loc.center.lon, loc.cell_m
        else:
            lat, lon = loc.lat, loc.lon
    return {
        "scheme": e.scheme.value,
        "day": e.day,
        "window": e.window.value,
        "lat": lat,
        "lon": lon,
        "cell_m": cell_m,
        "context_source": e.context_source,
    }


def events_to_jsonl(events: Sequence[ExposureEvent]) -> str:
    lines = [json.dumps(event_to_json(e), sort_keys=True) for e in events]
    return "".join(line + "\n" for line in lines)


class DeviceAgent:
    """Single-owner mutable device state; one instance per simulated phone."""

    def __init__(self, device_id: str, config: DeviceConfig, rng: DeterministicRng):
        self.device_id = device_id
        self.config = config
        self.rng = rng
        self.storage_key = rng.take(16)
        self.consent_master: Optional[ConsentSecret] = (
            ConsentSecret(rng.take(16)) if config.scheme in CONSENT_SCHEMES else None
        )
        self.findmy_kp: Optional[RotatingKeypair] = (
            RotatingKeypair.generate(rng) if config.scheme is Scheme.FINDMY else None
        )
        self.daily_keys: dict[int, DailyKey] = {}
        self.asym_keys: dict[int, tuple[bytes, bytes]] = {}
        self.scans: list[ScanRecord] = []
        self.rpi_entries: set[tuple[bytes, int]] = set()
        self.window_entries: set[int] = set()
        self.fix_log: dict[int, Union[GeoPoint, FGps]] = {}
        self.findmy_stored: list[tuple[int, FindMyRecord]] = []
        self.beacon_windows: set[int] = set()
        self.own_pseudonyms: list[bytes] = []
        self.counters: dict[str, int] = {
            "sent": 0,
            "heard": 0,
            "stored": 0,
            "duplicates": 0,
            "dropped_unparseable": 0,
            "fm_encryptions": 0,
        }
        self._seen: set[tuple] = set()

    # --- key schedule ------------------------------------------------------

    def ensure_day(self, day_index: int) -> None:
        """Create key material for a day if absent. Beacon scheme needs none."""
        if self.config.scheme is Scheme.FINDMY:
            return
        if day_index not in self.daily_keys:
            day_start = Enin(day_index * WINDOWS_PER_DAY)
            self.daily_keys[day_index] = generate_daily_key(self.rng, day_start)
            if self.config.scheme is Scheme.ASYM:
                self.asym_keys[day_index] = asym_keypair(self.rng)

    def _day_consent(self, day_index: int) -> ConsentSecret:
        # Per-day secrets make per-day revocation effective: yesterday's
        # published secret cannot unlock today's broadcasts.
        assert self.consent_master is not None
        return daily_consent_secret(self.consent_master, Enin(day_index * WINDOWS_PER_DAY))

    # --- broadcast / receive ----------------------------------------------

    def tick_broadcast(self, t: int, own_gps: GeoPoint) -> bytes:
        """Payload to emit at time t. Every device broadcasts context; who
        turns out to be infected is only known later."""
        at = enin_from_unix(t)
        scheme = self.config.scheme
        if scheme is Scheme.FINDMY:
            assert self.findmy_kp is not None
            self.beacon_windows.add(beacon_window(t))
            self.counters["sent"] += 1
            return findmy_beacon(self.findmy_kp, t).to_bytes()

        day = at.day_index()
        dk = self.daily_keys.get(day)
        if dk is None:
            raise StateError(f"device {self.device_id} has no daily key for day {day}")
        rpi = derive_rpi(dk, at)
        aem = derive_aem(dk, rpi)
        if scheme in LOCAL_SCHEMES:
            payload = assemble_payload(rpi, aem, SchemeTag.NONE)
        elif scheme is Scheme.SYM:
            ec = encrypt_symmetric(dk, encode_context(own_gps, at), self.rng)
            payload = assemble_payload(rpi, aem, SchemeTag.SYM, ec)
        elif scheme is Scheme.ASYM:
            pub, _ = self.asym_keys[day]
            eec = encrypt_asym(pub, encode_context(own_gps, at), self.rng)
            payload = assemble_payload(rpi, aem, SchemeTag.ASYM, eec)
        elif scheme is Scheme.CONSENT:
            ec = encrypt_consent(dk, self._day_consent(day), encode_context(own_gps, at), self.rng)
            payload = assemble_payload(rpi, aem, SchemeTag.CONSENT, ec)
        else:
            ec = encrypt_blurred_consent(
                dk, self._day_consent(day), own_gps, at, self.config.quantizer, self.rng
            )
            payload = assemble_payload(rpi, aem, SchemeTag.BLURRED_CONSENT, ec)
        self.counters["sent"] += 1
        return payload

    def on_receive(
        self,
        raw: bytes,
        t: int,
        own_gps: Optional[GeoPoint] = None,
        rssi: Optional[float] = None,
    ) -> None:
        at = enin_from_unix(t)
        self.counters["heard"] += 1
        frame: Union[BlePayload, FindMyBeacon]
        try:
            if len(raw) == BEACON_LEN:
                frame = FindMyBeacon.from_bytes(raw)
            else:
                frame = parse_payload(raw)
        except FormatError:
            self.counters["dropped_unparseable"] += 1
            return

        if isinstance(frame, FindMyBeacon):
            # uuid already rotates per 15-minute window, so it is the dedup key
            key = ("fm", frame.uuid)
            if key in self._seen:
                self.counters["duplicates"] += 1
                return
            self._seen.add(key)
            self.scans.append(ScanRecord(frame, at, None, rssi))
            self.counters["stored"] += 1
            if self.config.scheme is Scheme.FINDMY:
                if own_gps is None:
                    raise StateError("own position required to answer a beacon")
                rec = findmy_encrypt_heard(frame, own_gps, t, self.rng)
                self.findmy_stored.append((at.day_index(), rec))
                self.counters["fm_encryptions"] += 1
            return

        scheme = self.config.scheme
        own_loc: Optional[Union[GeoPoint, FGps]] = None
        if scheme in LOCAL_SCHEMES and own_gps is not None:
            if scheme is Scheme.LOCAL_BLURRED:
                own_loc = quantize(own_gps, self.config.quantizer)
            else:
                own_loc = own_gps
            # update before dedup: the last reception in a window fixes it
            self.fix_log[at.value] = own_loc
            if scheme is Scheme.LOCAL_RPI:
                self.rpi_entries.add((frame.rpi, at.value))
            else:
                self.window_entries.add(at.value)
        key = ("rpi", frame.rpi, at.value)
        if key in self._seen:
            self.counters["duplicates"] += 1
            return
        self._seen.add(key)
        self.scans.append(ScanRecord(frame, at, own_loc, rssi))
        self.counters["stored"] += 1

    def local_log_entries(self) -> list[LocalLogEntry]:
        scheme = self.config.scheme
        if scheme is Scheme.LOCAL_RPI:
            keys = sorted(self.rpi_entries, key=lambda kw: (kw[1], kw[0]))
            return [LocalLogEntry(rpi, self.fix_log[w], Enin(w)) for rpi, w in keys]
        if scheme in (Scheme.LOCAL_ENIN, Scheme.LOCAL_BLURRED):
            return [
                LocalLogEntry(Enin(w), self.fix_log[w], Enin(w))
                for w in sorted(self.window_entries)
            ]
        return []

    # --- diagnosis ---------------------------------------------------------

    def make_diagnosis_bundle(
        self, days: Sequence[int], consent: Optional[bool] = None
    ) -> DiagnosisBundle:
        day_list = sorted(set(days))
        if not day_list:
            raise ValueError("empty day range")
        if consent is None:
            consent = self.config.consent_default
        pseudonym = self.rng.take(16)
        self.own_pseudonyms.append(pseudonym)
        scheme = self.config.scheme
        if scheme is Scheme.FINDMY:
            wanted = set(day_list)
            records = tuple(r for d, r in self.findmy_stored if d in wanted)
            return DiagnosisBundle(pseudonym, (), records)
        entries = []
        for d in day_list:
            dk = self.daily_keys.get(d)
            if dk is None:
                raise StateError(f"device {self.device_id} has no daily key for day {d}")
            cs = self._day_consent(d).secret if consent and scheme in CONSENT_SCHEMES else None
            master = self.asym_keys[d][1] if scheme is Scheme.ASYM else None
            entries.append(BundleEntry(Enin(d * WINDOWS_PER_DAY), dk.key, cs, master))
        return DiagnosisBundle(pseudonym, tuple(entries))

    # --- exposure derivation ----------------------------------------------

    def _local_lookup(self, rpi: bytes, at: Enin) -> Optional[Union[GeoPoint, FGps]]:
        scheme = self.config.scheme
        if scheme is Scheme.LOCAL_RPI:
            if (rpi, at.value) in self.rpi_entries:
                return self.fix_log.get(at.value)
            return None
        if scheme in (Scheme.LOCAL_ENIN, Scheme.LOCAL_BLURRED):
            if at.value in self.window_entries:
                return self.fix_log.get(at.value)
            return None
        return None

    def _recover_context(
        self, scan: ScanRecord, entry: BundleEntry, dk: DailyKey
    ) -> tuple[Optional[tuple[Union[GeoPoint, FGps], Enin]], str]:
        payload = scan.payload
        assert isinstance(payload, BlePayload)
        tag = payload.scheme_tag
        try:
            if tag is SchemeTag.NONE:
                loc = self._local_lookup(payload.rpi, scan.observed_at)
                if loc is not None:
                    return (loc, scan.observed_at), "own_log"
                return None, "none"
            if tag is SchemeTag.SYM:
                blob = decrypt_symmetric(dk, payload.context)
            elif tag in (SchemeTag.CONSENT, SchemeTag.BLURRED_CONSENT):
                if entry.consent_secret is None:
                    return None, "none"
                blob = decrypt_consent(dk, ConsentSecret(entry.consent_secret), payload.context)
            elif tag is SchemeTag.ASYM:
                if entry.asym_master is None:
                    return None, "none"
                blob = decrypt_asym(entry.asym_master, payload.context)
            else:
                return None, "none"
        except DecryptError:
            return None, "none"
        point, at = decode_context(blob.to_bytes())
        if tag is SchemeTag.BLURRED_CONSENT and self.config.quantizer is not None:
            return (FGps(point, self.config.quantizer.cell_m), at), "decrypted_peer"
        return (point, at), "decrypted_peer"

    def process_exposures(
        self,
        bundles: Sequence[DiagnosisBundle],
        tol: MatchTolerance = MatchTolerance(),
        stats: Optional[MatchStats] = None,
    ) -> list[ExposureEvent]:
        """Match downloaded bundles against the scan log and recover context."""
        own = {bytes(p) for p in self.own_pseudonyms}
        heard: list[tuple[bytes, Enin]] = []
        payload_scans: list[ScanRecord] = []
        for s in self.scans:
            if isinstance(s.payload, BlePayload):
                heard.append((s.payload.rpi, s.observed_at))
                payload_scans.append(s)
        events: list[ExposureEvent] = []
        for bundle in bundles:
            if bundle.device_pseudonym in own:
                continue
            for entry in bundle.entries:
                dk = DailyKey(entry.daily_key, entry.day_start)
                for idx, window in match_rpis(heard, dk, tol, stats=stats):
                    scan = payload_scans[idx]
                    context, source = self._recover_context(scan, entry, dk)
                    events.append(
                        ExposureEvent(
                            scan.payload.rpi,
                            window,
                            window.day_index(),
                            self.config.scheme,
                            context,
                            source,
                            bundle.device_pseudonym,
                        )
                    )
            if bundle.findmy_records and self.findmy_kp is not None:
                recovery = findmy_recover(
                    self.findmy_kp, bundle.findmy_records, sorted(self.beacon_windows)
                )
                for uuid, point, at in recovery.contexts:
                    events.append(
                        ExposureEvent(
                            uuid, at, at.day_index(), self.config.scheme,
                            (point, at), "decrypted_peer", bundle.device_pseudonym,
                        )
                    )
        return events

    # --- persistence -------------------------------------------------------

    def _loc_json(self, loc: Optional[Union[GeoPoint, FGps]]):
        if loc is None:
            return None
        if isinstance(loc, FGps):
            return {"lat": loc.center.lat, "lon": loc.center.lon, "cell_m": loc.cell_m}
        return {"lat": loc.lat, "lon": loc.lon}

    @staticmethod
    def _loc_from_json(obj) -> Optional[Union[GeoPoint, FGps]]:
        if obj is None:
            return None
        p = GeoPoint(obj["lat"], obj["lon"])
        if "cell_m" in obj:
            return FGps(p, obj["cell_m"])
        return p

    def to_snapshot(self) -> bytes:
        """Versioned binary snapshot; location-bearing state sealed with AES-GCM."""
        public = {
            "device_id": self.device_id,
            "scheme": self.config.scheme.value,
            "consent_default": self.config.consent_default,
            "cell_m": self.config.quantizer.cell_m if self.config.quantizer else None,
            "counters": self.counters,
        }
        sensitive = {
            "rng": self.rng.state(),
            "storage_key": self.storage_key.hex(),
            "consent_master": self.consent_master.secret.hex() if self.consent_master else None,
            "findmy_master": self.findmy_kp.master_secret.hex() if self.findmy_kp else None,
            "daily_keys": {str(d): k.key.hex() for d, k in sorted(self.daily_keys.items())},
            "asym_keys": {
                str(d): [pub.hex(), priv.hex()]
                for d, (pub, priv) in sorted(self.asym_keys.items())
            },
            "scans": [
                {
                    "raw": s.payload.to_bytes().hex(),
                    "at": s.observed_at.value,
                    "own": self._loc_json(s.own_location),
                    "rssi": s.rssi,
                }
                for s in self.scans
            ],
            "rpi_entries": [[r.hex(), w] for r, w in sorted(self.rpi_entries, key=lambda kw: (kw[1], kw[0]))],
            "window_entries": sorted(self.window_entries),
            "fix_log": {str(w): self._loc_json(loc) for w, loc in sorted(self.fix_log.items())},
            "findmy_stored": [[d, r.to_bytes().hex()] for d, r in self.findmy_stored],
            "beacon_windows": sorted(self.beacon_windows),
            "own_pseudonyms": [p.hex() for p in self.own_pseudonyms],
        }
        pub_b = json.dumps(public, sort_keys=True).encode()
        sens_b = json.dumps(sensitive, sort_keys=True).encode()
        header = SNAPSHOT_MAGIC + bytes([SNAPSHOT_VERSION]) + struct.pack(">I", len(pub_b)) + pub_b
        # content-derived nonce keeps snapshots a pure function of state
        nonce = hashlib.sha256(self.storage_key + sens_b).digest()[:12]
        ct = AESGCM(self.storage_key).encrypt(nonce, sens_b, header)
        return header + self.storage_key + nonce + struct.pack(">I", len(ct)) + ct

    @classmethod
    def from_snapshot(cls, raw: bytes) -> "DeviceAgent":
        if len(raw) < 9 or raw[:4] != SNAPSHOT_MAGIC:
            raise FormatError("not a device snapshot (bad magic)")
        if raw[4] != SNAPSHOT_VERSION:
            raise FormatError(f"unsupported snapshot version {raw[4]}")
        (pub_len,) = struct.unpack(">I", raw[5:9])
        off = 9 + pub_len
        header, pub_b = raw[:off], raw[9:off]
        try:
            public = json.loads(pub_b)
            storage_key = raw[off : off + 16]
            nonce = raw[off + 16 : off + 28]
            (ct_len,) = struct.unpack(">I", raw[off + 28 : off + 32])
            ct = raw[off + 32 : off + 32 + ct_len]
            if len(ct) != ct_len or len(storage_key) != 16:
                raise FormatError("truncated snapshot")
        except (struct.error, json.JSONDecodeError) as e:
            raise FormatError(f"corrupt snapshot: {e}") from e
        try:
            sens_b = AESGCM(storage_key).decrypt(nonce, ct, header)
        except InvalidTag as e:
            raise DecryptError("snapshot authentication failed") from e
        sensitive = json.loads(sens_b)

        quantizer = (
            QuantizerConfig(public["cell_m"]) if public["cell_m"] is not None else None
        )
        config = DeviceConfig(Scheme(public["scheme"]), quantizer, public["consent_default"])
        agent = cls.__new__(cls)
        agent.device_id = public["device_id"]
        agent.config = config
        agent.rng = DeterministicRng.from_state(sensitive["rng"])
        agent.storage_key = storage_key
        cm = sensitive["consent_master"]
        agent.consent_master = ConsentSecret(bytes.fromhex(cm)) if cm else None
        fm = sensitive["findmy_master"]
        agent.findmy_kp = RotatingKeypair.from_master(bytes.fromhex(fm)) if fm else None
        agent.daily_keys = {
            int(d): DailyKey(bytes.fromhex(h), Enin(int(d) * WINDOWS_PER_DAY))
            for d, h in sensitive["daily_keys"].items()
        }
        agent.asym_keys = {
            int(d): (bytes.fromhex(pub), bytes.fromhex(priv))
            for d, (pub, priv) in sensitive["asym_keys"].items()
        }
        agent.scans = []
        agent._seen = set()
        for s in sensitive["scans"]:
            raw_frame = bytes.fromhex(s["raw"])
            frame: Union[BlePayload, FindMyBeacon]
            if len(raw_frame) == BEACON_LEN:
                frame = FindMyBeacon.from_bytes(raw_frame)
                agent._seen.add(("fm", frame.uuid))
            else:
                frame = parse_payload(raw_frame)
                agent._seen.add(("rpi", frame.rpi, s["at"]))
            agent.scans.append(
                ScanRecord(frame, Enin(s["at"]), cls._loc_from_json(s["own"]), s["rssi"])
            )
        agent.rpi_entries = {(bytes.fromhex(r), w) for r, w in sensitive["rpi_entries"]}
        agent.window_entries = set(sensitive["window_entries"])
        agent.fix_log = {
            int(w): cls._loc_from_json(loc) for w, loc in sensitive["fix_log"].items()
        }
        agent.findmy_stored = [
            (d, FindMyRecord.from_bytes(bytes.fromhex(h)))
            for d, h in sensitive["findmy_stored"]
        ]
        agent.beacon_windows = set(sensitive["beacon_windows"])
        agent.own_pseudonyms = [bytes.fromhex(p) for p in sensitive["own_pseudonyms"]]
        agent.counters = public["counters"]
        return agent

    def save_state(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.to_snapshot())

    @classmethod
    def load_state(cls, path: Union[str, Path]) -> "DeviceAgent":
        return cls.from_snapshot(Path(path).read_bytes())
