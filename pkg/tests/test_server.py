"""Diagnosis registry: validation, incremental sync, revocation, persistence."""

import json
import subprocess
import sys

import pytest

from censim.errors import RegistryError
from censim.gaen import Enin
from censim.server import (
    BundleEntry,
    DiagnosisBundle,
    DiagnosisRegistry,
    bundle_from_json,
    bundle_to_json,
    fold_versions,
    handle_request,
)


def entry(day: int, key: bytes = None, consent: bytes = None, asym: bytes = None) -> BundleEntry:
    return BundleEntry(Enin(day * 144), key or bytes([day % 256]) * 16, consent, asym)


def bundle(days, pseudonym: bytes = b"\x01" * 16, consent: bytes = None) -> DiagnosisBundle:
    return DiagnosisBundle(pseudonym, tuple(entry(d, consent=consent) for d in days))


class TestBundleShapes:
    def test_entry_day_alignment(self):
        with pytest.raises(RegistryError):
            BundleEntry(Enin(7), b"\x00" * 16)

    def test_entry_key_length(self):
        with pytest.raises(RegistryError):
            BundleEntry(Enin(0), b"\x00" * 8)

    def test_bundle_json_round_trip(self):
        b = DiagnosisBundle(
            b"\x0a" * 16,
            (entry(0, consent=b"\x02" * 16), entry(1, asym=b"\x03" * 32)),
        )
        receipt, back = bundle_from_json(bundle_to_json("r000001", b))
        assert receipt == "r000001" and back == b

    def test_json_carries_no_identity(self):
        obj = bundle_to_json("r000001", bundle([0]))
        text = json.dumps(obj)
        for leak in ("device_id", "name", "agent"):
            assert leak not in text
        assert obj["pseudonym"] == ("01" * 16)

    def test_day_indexes_sorted(self):
        b = DiagnosisBundle(b"\x01" * 16, (entry(3), entry(1)))
        assert b.day_indexes() == [1, 3]


class TestUploadValidation:
    def test_receipts_increment(self):
        reg = DiagnosisRegistry()
        assert reg.upload(bundle([0])) == "r000001"
        assert reg.upload(bundle([1], pseudonym=b"\x02" * 16)) == "r000002"

    def test_empty_bundle_rejected(self):
        with pytest.raises(RegistryError):
            DiagnosisRegistry().upload(DiagnosisBundle(b"\x01" * 16, ()))

    def test_duplicate_day_rejected(self):
        with pytest.raises(RegistryError):
            DiagnosisRegistry().upload(bundle([2, 2]))

    def test_horizon_span(self):
        reg = DiagnosisRegistry()
        reg.upload(bundle(range(14)))  # exactly the horizon
        with pytest.raises(RegistryError):
            reg.upload(bundle([0, 14]))  # 15-day span even with gaps

    def test_custom_horizon(self):
        reg = DiagnosisRegistry(horizon_days=2)
        reg.upload(bundle([5, 6]))
        with pytest.raises(RegistryError):
            reg.upload(bundle([5, 7]))


class TestDownloadCursor:
    def test_incremental_sync(self):
        reg = DiagnosisRegistry()
        reg.upload(bundle([0]))
        versions, cur = reg.download_since(0)
        assert len(versions) == 1 and cur == 1
        versions, cur = reg.download_since(cur)
        assert versions == [] and cur == 1
        reg.upload(bundle([1], pseudonym=b"\x02" * 16))
        versions, cur = reg.download_since(cur)
        assert len(versions) == 1 and cur == 2

    @pytest.mark.parametrize("bad", [-1, 99, "0"])
    def test_unknown_cursor_full_replay(self, bad):
        reg = DiagnosisRegistry()
        reg.upload(bundle([0]))
        versions, cur = reg.download_since(bad)
        assert len(versions) == 1 and cur == 1

    def test_revocation_appears_in_stream(self):
        reg = DiagnosisRegistry()
        r = reg.upload(bundle([0], consent=b"\x05" * 16))
        _, cur = reg.download_since(0)
        reg.revoke_consent(r, [0])
        versions, _ = reg.download_since(cur)
        assert len(versions) == 1
        assert versions[0][0] == r
        assert versions[0][1].entries[0].consent_secret is None


class TestRevocation:
    def test_strips_named_days_only(self):
        reg = DiagnosisRegistry()
        b = DiagnosisBundle(
            b"\x01" * 16,
            (entry(0, consent=b"\x05" * 16), entry(1, consent=b"\x06" * 16)),
        )
        r = reg.upload(b)
        reg.revoke_consent(r, [0])
        eff = reg.effective_bundles()[r]
        assert eff.entries[0].consent_secret is None
        assert eff.entries[1].consent_secret == b"\x06" * 16
        # daily keys survive so exposure matching keeps working
        assert eff.entries[0].daily_key == b.entries[0].daily_key

    def test_unknown_receipt(self):
        with pytest.raises(RegistryError):
            DiagnosisRegistry().revoke_consent("r000009", [0])

    def test_uncovered_day_warns(self):
        reg = DiagnosisRegistry()
        r = reg.upload(bundle([0], consent=b"\x05" * 16))
        warnings = reg.revoke_consent(r, [0, 3])
        assert warnings == ["day 3 not in bundle, ignored"]

    def test_idempotent_no_append(self):
        reg = DiagnosisRegistry()
        r = reg.upload(bundle([0], consent=b"\x05" * 16))
        reg.revoke_consent(r, [0])
        n = len(reg)
        reg.revoke_consent(r, [0])
        assert len(reg) == n  # nothing changed, nothing appended

    def test_superseding_append_only(self):
        reg = DiagnosisRegistry()
        r = reg.upload(bundle([0], consent=b"\x05" * 16))
        reg.revoke_consent(r, [0])
        assert len(reg) == 2  # original version still in the log
        versions, _ = reg.download_since(0)
        assert versions[0][1].entries[0].consent_secret is not None
        assert versions[1][1].entries[0].consent_secret is None


class TestPersistence:
    def test_replay_identical(self, tmp_path):
        store = tmp_path / "registry.jsonl"
        reg = DiagnosisRegistry(store)
        r1 = reg.upload(bundle([0], consent=b"\x05" * 16))
        reg.upload(bundle([1], pseudonym=b"\x02" * 16))
        reg.revoke_consent(r1, [0])

        replayed = DiagnosisRegistry(store)
        assert replayed.download_since(0) == reg.download_since(0)
        assert replayed.effective_bundles() == reg.effective_bundles()

    def test_sequence_continues_after_reopen(self, tmp_path):
        store = tmp_path / "registry.jsonl"
        DiagnosisRegistry(store).upload(bundle([0]))
        reg = DiagnosisRegistry(store)
        assert reg.upload(bundle([1], pseudonym=b"\x02" * 16)) == "r000002"

    def test_fresh_registry_without_file(self, tmp_path):
        reg = DiagnosisRegistry(tmp_path / "new.jsonl")
        assert len(reg) == 0


class TestFoldVersions:
    def test_latest_wins(self):
        v1 = bundle([0], consent=b"\x05" * 16)
        v2 = DiagnosisBundle(
            v1.device_pseudonym, tuple(BundleEntry(e.day_start, e.daily_key) for e in v1.entries)
        )
        folded = fold_versions([("r000001", v1), ("r000001", v2)])
        assert folded == {"r000001": v2}

    def test_order_preserved(self):
        a = bundle([0])
        b = bundle([1], pseudonym=b"\x02" * 16)
        folded = fold_versions([("r000001", a), ("r000002", b)])
        assert list(folded) == ["r000001", "r000002"]


class TestLineProtocol:
    def test_upload_download_revoke(self):
        reg = DiagnosisRegistry()
        up = handle_request(
            reg,
            {"op": "UPLOAD", "bundle": bundle_to_json("", bundle([0], consent=b"\x05" * 16))},
        )
        assert up == {"status": "ok", "receipt": "r000001"}
        down = handle_request(reg, {"op": "DOWNLOAD_SINCE", "cursor": 0})
        assert down["status"] == "ok" and down["cursor"] == 1
        rev = handle_request(reg, {"op": "REVOKE", "receipt": "r000001", "days": [0]})
        assert rev == {"status": "ok", "warnings": []}

    def test_unknown_op(self):
        resp = handle_request(DiagnosisRegistry(), {"op": "DELETE"})
        assert resp["status"] == "error"

    def test_registry_error_reported(self):
        resp = handle_request(
            DiagnosisRegistry(), {"op": "REVOKE", "receipt": "r000001", "days": [0]}
        )
        assert resp["status"] == "error" and "r000001" in resp["reason"]

    def test_malformed_request(self):
        resp = handle_request(DiagnosisRegistry(), {"op": "UPLOAD"})
        assert resp["status"] == "error"

    def test_subprocess_server(self, tmp_path):
        store = tmp_path / "store.jsonl"
        requests = [
            {"op": "UPLOAD", "bundle": bundle_to_json("", bundle([0]))},
            {"op": "DOWNLOAD_SINCE", "cursor": 0},
        ]
        proc = subprocess.run(
            [sys.executable, "-m", "censim.server", str(store)],
            input="".join(json.dumps(r) + "\n" for r in requests),
            capture_output=True,
            text=True,
            timeout=30,
        )
        lines = proc.stdout.strip().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0]) == {"status": "ok", "receipt": "r000001"}
        body = json.loads(lines[1])
        assert body["cursor"] == 1 and len(body["bundles"]) == 1
        assert store.exists()
