"""Command-line front end.

Byte fields are hex on the CLI boundary, everywhere, so golden vectors
diff cleanly. Exit codes: 0 success, 1 runtime failure (failed
decryption, failed audit), 2 usage or validation error. Errors print one
line per problem to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import refvectors
from .errors import DecryptError, FormatError, ProtocolError, ScenarioError
from .gaen import DailyKey, Enin, derive_all_rpis, generate_daily_key
from .geo import ContextBlob, GeoPoint, QuantizerConfig, decode_context, encode_context
from .rng import DeterministicRng
from .schemes import (
    EncryptedContext,
    EphemeralEncryptedContext,
    ConsentSecret,
    SchemeTag,
    assemble_payload,
    decrypt_asym,
    decrypt_consent,
    decrypt_symmetric,
    encrypt_asym,
    encrypt_blurred_consent,
    encrypt_consent,
    encrypt_symmetric,
    parse_payload,
)
from .sim import SimulationReport, audit_passed, audit_privacy, bench_matching, bench_schemes, load_scenario, run


class UsageError(Exception):
    pass


def _hex_bytes(text: str, length: int = None, what: str = "value") -> bytes:
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raise UsageError(f"{what} is not valid hex: {text!r}")
    if length is not None and len(raw) != length:
        raise UsageError(f"{what} must be {length} bytes, got {len(raw)}")
    return raw


def _parse_tag(text: str) -> SchemeTag:
    if text.isdigit():
        try:
            return SchemeTag(int(text))
        except ValueError:
            raise UsageError(f"unknown scheme tag {text}")
    try:
        return SchemeTag[text.upper().replace("-", "_")]
    except KeyError:
        raise UsageError(f"unknown scheme {text!r}")


def cmd_keygen(args) -> int:
    rng = DeterministicRng(args.seed, "keygen")
    for i in range(args.days):
        day_start = Enin((args.day_start // 144 + i) * 144)
        print(generate_daily_key(rng, day_start).to_text())
    return 0


def cmd_derive_rpis(args) -> int:
    key = _hex_bytes(args.key, 16, "--key")
    dk = DailyKey(key, Enin(args.day_start))
    for rpi in derive_all_rpis(dk):
        print(rpi.bytes.hex())
    return 0


def cmd_encode_payload(args) -> int:
    tag = _parse_tag(args.scheme)
    rpi = _hex_bytes(args.rpi, 16, "--rpi")
    aem = _hex_bytes(args.aem, 4, "--aem")
    context = None
    if args.context:
        raw = _hex_bytes(args.context, None, "--context")
        if len(raw) == 44:
            context = EncryptedContext.from_bytes(raw)
        elif len(raw) == 76:
            context = EphemeralEncryptedContext.from_bytes(raw)
        else:
            raise UsageError(f"--context must be 44 or 76 bytes, got {len(raw)}")
    print(assemble_payload(rpi, aem, tag, context).hex())
    return 0


def cmd_decode_payload(args) -> int:
    raw = _hex_bytes(args.hex, None, "--hex")
    payload = parse_payload(raw)
    print(f"rpi: {payload.rpi.hex()}")
    print(f"aem: {payload.aem.hex()}")
    print(f"scheme: {payload.scheme_tag.name.lower()} ({payload.scheme_tag.value})")
    if payload.context is None:
        print("context: none")
        return 0
    tag = payload.scheme_tag
    key = _hex_bytes(args.key, 16, "--key") if args.key else None
    try:
        if tag is SchemeTag.SYM and key is not None:
            blob = decrypt_symmetric(DailyKey(key, Enin(0)), payload.context)
        elif tag in (SchemeTag.CONSENT, SchemeTag.BLURRED_CONSENT) and key and args.consent:
            cs = ConsentSecret(_hex_bytes(args.consent, 16, "--consent"))
            blob = decrypt_consent(DailyKey(key, Enin(0)), cs, payload.context)
        elif tag is SchemeTag.ASYM and args.asym_priv:
            priv = _hex_bytes(args.asym_priv, 32, "--asym-priv")
            blob = decrypt_asym(priv, payload.context)
        else:
            print("context: locked (missing key material)")
            return 0
    except DecryptError:
        print("context: locked")
        return 0
    point, at = decode_context(blob.to_bytes())
    print(f"context: lat={point.lat:.7f} lon={point.lon:.7f} enin={at.value}")
    return 0


def _context_key_material(args):
    if not args.key:
        raise UsageError("--key is required for this scheme")
    key = _hex_bytes(args.key, 16, "--key")
    return DailyKey(key, Enin(0))


def cmd_encrypt_ctx(args) -> int:
    point = GeoPoint(args.lat, args.lon)
    at = Enin(args.enin)
    nonce = _hex_bytes(args.nonce, 12, "--nonce") if args.nonce else None
    rng = DeterministicRng(args.seed, "encrypt-ctx") if nonce is None else None
    scheme = args.scheme
    if scheme == "asym":
        if not args.pub:
            raise UsageError("asym needs --pub (recipient public key)")
        pub = _hex_bytes(args.pub, 32, "--pub")
        if rng is None:
            rng = DeterministicRng(args.seed, "encrypt-ctx")
        out = encrypt_asym(pub, encode_context(point, at), rng, nonce=nonce)
        print(out.to_bytes().hex())
        return 0
    dk = _context_key_material(args)
    if scheme == "sym":
        out = encrypt_symmetric(dk, encode_context(point, at), rng, nonce=nonce)
    elif scheme in ("consent", "blurred_consent"):
        if not args.consent:
            raise UsageError(f"{scheme} needs --consent")
        cs = ConsentSecret(_hex_bytes(args.consent, 16, "--consent"))
        if scheme == "consent":
            out = encrypt_consent(dk, cs, encode_context(point, at), rng, nonce=nonce)
        else:
            if not args.cell_m:
                raise UsageError("blurred_consent needs --cell-m")
            q = QuantizerConfig(args.cell_m)
            out = encrypt_blurred_consent(dk, cs, point, at, q, rng, nonce=nonce)
    else:
        raise UsageError(f"unknown scheme {scheme!r}")
    print(out.to_bytes().hex())
    return 0


def cmd_decrypt_ctx(args) -> int:
    raw = _hex_bytes(args.hex, None, "--hex")
    if len(raw) == 76:
        if not args.asym_priv:
            raise UsageError("76-byte context needs --asym-priv")
        priv = _hex_bytes(args.asym_priv, 32, "--asym-priv")
        blob = decrypt_asym(priv, EphemeralEncryptedContext.from_bytes(raw))
    elif len(raw) == 44:
        ec = EncryptedContext.from_bytes(raw)
        dk = _context_key_material(args)
        if args.consent:
            cs = ConsentSecret(_hex_bytes(args.consent, 16, "--consent"))
            blob = decrypt_consent(dk, cs, ec)
        else:
            blob = decrypt_symmetric(dk, ec)
    else:
        raise UsageError(f"--hex must be 44 or 76 bytes, got {len(raw)}")
    point, at = decode_context(blob.to_bytes())
    print(f"lat={point.lat:.7f} lon={point.lon:.7f} enin={at.value}")
    return 0


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    report = run(sc)
    verdicts = audit_privacy(report, sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "events.jsonl").write_text(report.events_jsonl())
    (out / "audit.json").write_text(json.dumps(verdicts, sort_keys=True) + "\n")
    ok = audit_passed(verdicts)
    print(
        f"scenario={sc.name} events={report.total_events()}"
        f" disclosures={report.total_disclosures()} audit={'pass' if ok else 'fail'}"
    )
    return 0


def cmd_audit(args) -> int:
    sc = load_scenario(args.scenario)
    report = SimulationReport.from_json(Path(args.report).read_text())
    verdicts = audit_privacy(report, sc)
    for v in verdicts:
        if v.get("informational"):
            print(f"check={v['check']} informational cases={len(v.get('cases', []))}")
        else:
            print(f"check={v['check']} passed={str(v['passed']).lower()}")
    return 0 if audit_passed(verdicts) else 1


def cmd_bench(args) -> int:
    if args.matching:
        counts = [int(x) for x in args.matching.split(",")]
        for row in bench_matching(counts):
            print(
                f"keys={row['keys']} scans={row['scans']}"
                f" derivations={row['derivations']} comparisons={row['comparisons']}"
            )
        return 0
    if not args.scenario:
        raise UsageError("bench needs --scenario or --matching")
    sc = load_scenario(args.scenario)
    for scheme, row in bench_schemes(sc).items():
        cells = " ".join(f"{k}={v}" for k, v in row.items())
        print(f"scheme={scheme} {cells}")
    return 0


def cmd_vectors(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in refvectors.generate_all().items():
        (out / name).write_text(text)
        print(f"wrote {out / name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="censim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("keygen", help="derive daily keys from a seed")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--day-start", type=int, default=0, help="interval number of day 0")
    k.add_argument("--days", type=int, default=1)
    k.set_defaults(func=cmd_keygen)

    d = sub.add_parser("derive-rpis", help="all 144 identifiers for one key")
    d.add_argument("--key", required=True, help="hex daily key (16 bytes)")
    d.add_argument("--day-start", type=int, required=True)
    d.set_defaults(func=cmd_derive_rpis)

    e = sub.add_parser("encode-payload", help="assemble an advertisement payload")
    e.add_argument("--rpi", required=True)
    e.add_argument("--aem", default="00000000")
    e.add_argument("--scheme", required=True, help="tag name or number")
    e.add_argument("--context", help="hex context section (44 or 76 bytes)")
    e.set_defaults(func=cmd_encode_payload)

    dp = sub.add_parser("decode-payload", help="break a payload into fields")
    dp.add_argument("--hex", required=True)
    dp.add_argument("--key", help="hex daily key, to decrypt the context")
    dp.add_argument("--consent", help="hex consent secret")
    dp.add_argument("--asym-priv", help="hex private key (32 bytes)")
    dp.set_defaults(func=cmd_decode_payload)

    ec = sub.add_parser("encrypt-ctx", help="encrypt a location/time context")
    ec.add_argument("--scheme", default="sym", help="sym, consent, blurred_consent, asym")
    ec.add_argument("--key", help="hex daily key")
    ec.add_argument("--consent", help="hex consent secret")
    ec.add_argument("--pub", help="hex recipient public key (asym)")
    ec.add_argument("--lat", type=float, required=True)
    ec.add_argument("--lon", type=float, required=True)
    ec.add_argument("--enin", type=int, required=True)
    ec.add_argument("--cell-m", type=float, help="grid cell size (blurred_consent)")
    ec.add_argument("--nonce", help="fixed hex nonce (12 bytes), for reproducible vectors")
    ec.add_argument("--seed", type=int, default=0, help="rng seed when no nonce given")
    ec.set_defaults(func=cmd_encrypt_ctx)

    dc = sub.add_parser("decrypt-ctx", help="decrypt a context section")
    dc.add_argument("--hex", required=True)
    dc.add_argument("--key", help="hex daily key")
    dc.add_argument("--consent", help="hex consent secret")
    dc.add_argument("--asym-priv", help="hex private key (32 bytes)")
    dc.set_defaults(func=cmd_decrypt_ctx)

    r = sub.add_parser("run", help="run a scenario and write reports")
    r.add_argument("--scenario", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="re-evaluate privacy checks on a report")
    a.add_argument("--report", required=True)
    a.add_argument("--scenario", required=True)
    a.set_defaults(func=cmd_audit)

    b = sub.add_parser("bench", help="deterministic cost accounting")
    b.add_argument("--scenario")
    b.add_argument("--matching", help="comma-separated key counts, e.g. 10,100,1000")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("vectors", help="regenerate golden vector files")
    v.add_argument("--out", default="tests/vectors")
    v.set_defaults(func=cmd_vectors)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ScenarioError as e:
        for problem in e.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: missing file: {e.filename}", file=sys.stderr)
        return 2
    except DecryptError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ProtocolError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
