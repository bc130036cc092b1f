"""Diagnosis registry: uploads, incremental downloads, consent revocation.

The registry is an append-only log of bundle versions. An upload appends
version 1 of a bundle; revoking consent appends a superseding version with
the consent secrets stripped for the named days. Nothing is ever deleted
or rewritten, so replaying the log from cursor zero always reconstructs
the same state, and a published daily key survives every later operation
(exposure notification keeps working after a location-consent change of
heart).

Persistence is a JSON-lines file, one bundle version per line, byte
fields hex-encoded. A thin line protocol (one JSON object per line, verbs
UPLOAD / DOWNLOAD_SINCE / REVOKE) lets the same registry run in-process
or as a child process; ``python -m censim.server store.jsonl`` serves it
over stdin/stdout.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence

from .errors import RegistryError
from .gaen import Enin, WINDOWS_PER_DAY
from .schemes import FindMyRecord

DEFAULT_HORIZON_DAYS = 14


@dataclass(frozen=True)
class BundleEntry:
    """One day's upload: the daily key plus optional disclosure material."""

    day_start: Enin
    daily_key: bytes
    consent_secret: Optional[bytes] = None
    asym_master: Optional[bytes] = None

    def __post_init__(self):
        if self.day_start.value % WINDOWS_PER_DAY != 0:
            raise RegistryError("entry day_start is not day-aligned")
        if len(self.daily_key) != 16:
            raise RegistryError("daily key must be 16 bytes")
        if self.consent_secret is not None and len(self.consent_secret) != 16:
            raise RegistryError("consent secret must be 16 bytes")
        if self.asym_master is not None and len(self.asym_master) != 32:
            raise RegistryError("asym master secret must be 32 bytes")


@dataclass(frozen=True)
class DiagnosisBundle:
    """What one diagnosed device publishes in one upload session.

    ``device_pseudonym`` is a random per-session token; it links the
    versions of one upload for revocation purposes and nothing else.
    Beacon-scheme devices upload stored (uuid, ciphertext) records instead
    of keys, so ``entries`` may be empty when ``findmy_records`` is not.
    """

    device_pseudonym: bytes
    entries: tuple[BundleEntry, ...] = ()
    findmy_records: tuple[FindMyRecord, ...] = ()

    def __post_init__(self):
        if len(self.device_pseudonym) != 16:
            raise RegistryError("device pseudonym must be 16 bytes")
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "findmy_records", tuple(self.findmy_records))

    def day_indexes(self) -> list[int]:
        return sorted(e.day_start.day_index() for e in self.entries)


def bundle_to_json(receipt: str, bundle: DiagnosisBundle) -> dict:
    return {
        "receipt": receipt,
        "pseudonym": bundle.device_pseudonym.hex(),
        "entries": [
            {
                "day_start": e.day_start.value,
                "daily_key": e.daily_key.hex(),
                "consent_secret": e.consent_secret.hex() if e.consent_secret else None,
                "asym_master": e.asym_master.hex() if e.asym_master else None,
            }
            for e in bundle.entries
        ],
        "findmy_records": [r.to_bytes().hex() for r in bundle.findmy_records],
    }


def bundle_from_json(obj: dict) -> tuple[str, DiagnosisBundle]:
    try:
        entries = tuple(
            BundleEntry(
                Enin(e["day_start"]),
                bytes.fromhex(e["daily_key"]),
                bytes.fromhex(e["consent_secret"]) if e.get("consent_secret") else None,
                bytes.fromhex(e["asym_master"]) if e.get("asym_master") else None,
            )
            for e in obj["entries"]
        )
        records = tuple(
            FindMyRecord.from_bytes(bytes.fromhex(h)) for h in obj.get("findmy_records", [])
        )
        bundle = DiagnosisBundle(bytes.fromhex(obj["pseudonym"]), entries, records)
        return obj["receipt"], bundle
    except RegistryError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise RegistryError(f"malformed bundle record: {e}") from e


class DiagnosisRegistry:
    """Single-writer append-only store of diagnosis bundle versions."""

    def __init__(self, path: Optional[Path] = None, horizon_days: int = DEFAULT_HORIZON_DAYS):
        self.path = Path(path) if path is not None else None
        self.horizon_days = horizon_days
        self._versions: list[tuple[str, DiagnosisBundle]] = []
        self._seq = 0
        if self.path is not None and self.path.exists():
            self._replay_file()

    def _replay_file(self):
        for line in self.path.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            receipt, bundle = bundle_from_json(json.loads(line))
            self._versions.append((receipt, bundle))
            seq = int(receipt.lstrip("r"), 10)
            self._seq = max(self._seq, seq)

    def _append(self, receipt: str, bundle: DiagnosisBundle):
        self._versions.append((receipt, bundle))
        if self.path is not None:
            with self.path.open("a") as f:
                f.write(json.dumps(bundle_to_json(receipt, bundle)) + "\n")

    def _validate(self, bundle: DiagnosisBundle):
        if not bundle.entries and not bundle.findmy_records:
            raise RegistryError("empty bundle: no entries and no stored records")
        days = bundle.day_indexes()
        if len(set(days)) != len(days):
            raise RegistryError("more than one entry for the same day")
        if days and days[-1] - days[0] + 1 > self.horizon_days:
            raise RegistryError(
                f"bundle spans {days[-1] - days[0] + 1} days,"
                f" retention horizon is {self.horizon_days}"
            )

    def upload(self, bundle: DiagnosisBundle) -> str:
        """Append a new bundle; returns the receipt id used for revocation."""
        self._validate(bundle)
        self._seq += 1
        receipt = f"r{self._seq:06d}"
        self._append(receipt, bundle)
        return receipt

    def download_since(self, cursor: int) -> tuple[list[tuple[str, DiagnosisBundle]], int]:
        """Bundle versions appended after cursor, plus the new cursor.

        A cursor the registry has never issued (negative, or past the end)
        falls back to a full replay from zero.
        """
        if not isinstance(cursor, int) or cursor < 0 or cursor > len(self._versions):
            cursor = 0
        return list(self._versions[cursor:]), len(self._versions)

    def revoke_consent(self, receipt: str, days: Iterable[int]) -> list[str]:
        """Withdraw consent secrets for the given day indexes.

        Appends a superseding version of the bundle with consent stripped
        for those days; daily keys stay published. Returns warnings for
        days the bundle never covered. Revoking what is already revoked
        changes nothing and appends nothing.
        """
        current = self.effective_bundles().get(receipt)
        if current is None:
            raise RegistryError(f"unknown receipt {receipt!r}")
        wanted = set(days)
        covered = {e.day_start.day_index() for e in current.entries}
        warnings = [f"day {d} not in bundle, ignored" for d in sorted(wanted - covered)]
        new_entries = tuple(
            replace(e, consent_secret=None)
            if e.day_start.day_index() in wanted and e.consent_secret is not None
            else e
            for e in current.entries
        )
        if new_entries != current.entries:
            self._append(receipt, replace(current, entries=new_entries))
        return warnings

    def effective_bundles(self) -> dict[str, DiagnosisBundle]:
        """Latest version per receipt, in first-upload order."""
        out: dict[str, DiagnosisBundle] = {}
        for receipt, bundle in self._versions:
            out[receipt] = bundle
        return out

    def __len__(self) -> int:
        return len(self._versions)


def fold_versions(
    versions: Sequence[tuple[str, DiagnosisBundle]],
) -> dict[str, DiagnosisBundle]:
    """Client-side folding of a downloaded version stream: latest wins."""
    out: dict[str, DiagnosisBundle] = {}
    for receipt, bundle in versions:
        out[receipt] = bundle
    return out


# --- line protocol ---------------------------------------------------------


def handle_request(registry: DiagnosisRegistry, obj: dict) -> dict:
    try:
        op = obj.get("op")
        if op == "UPLOAD":
            _, bundle = bundle_from_json({"receipt": "", **obj["bundle"]})
            return {"status": "ok", "receipt": registry.upload(bundle)}
        if op == "DOWNLOAD_SINCE":
            versions, cursor = registry.download_since(obj.get("cursor", 0))
            return {
                "status": "ok",
                "cursor": cursor,
                "bundles": [bundle_to_json(r, b) for r, b in versions],
            }
        if op == "REVOKE":
            warnings = registry.revoke_consent(obj["receipt"], obj["days"])
            return {"status": "ok", "warnings": warnings}
        return {"status": "error", "reason": f"unknown op {op!r}"}
    except RegistryError as e:
        return {"status": "error", "reason": str(e)}
    except (KeyError, TypeError, ValueError) as e:
        return {"status": "error", "reason": f"bad request: {e}"}


def serve_lines(registry: DiagnosisRegistry, inp: IO[str], out: IO[str]):
    """One JSON request per line in, one JSON response per line out."""
    for line in inp:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            resp = {"status": "error", "reason": f"bad json: {e}"}
        else:
            resp = handle_request(registry, obj)
        out.write(json.dumps(resp) + "\n")
        out.flush()


def main(argv: Optional[list[str]] = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    store = Path(args[0]) if args else None
    serve_lines(DiagnosisRegistry(store), sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
