"""Exposure-notification protocol library with location-context schemes.

The GAEN-compatible core (daily keys, rolling identifiers, interval
matching) plus five ways to attach encrypted location context to the BLE
broadcast, a per-device state machine, a diagnosis registry, and a
deterministic multi-agent simulator with a privacy audit harness.
"""

from .errors import (
    AlignmentError,
    DecryptError,
    DomainError,
    FormatError,
    IntervalRangeError,
    ProtocolError,
    RegistryError,
    ScenarioError,
    StateError,
    UnsupportedRegionError,
    WindowError,
)
from .gaen import (
    DailyKey,
    Enin,
    MatchStats,
    MatchTolerance,
    Rpi,
    WINDOWS_PER_DAY,
    derive_aem,
    derive_all_rpis,
    derive_rpi,
    enin_from_unix,
    generate_daily_key,
    match_rpis,
)
from .geo import (
    ContextBlob,
    DensityClass,
    FGps,
    GeoPoint,
    QuantizerConfig,
    decode_context,
    density_cell_size,
    encode_context,
    haversine_m,
    quantize,
)
from .rng import DeterministicRng
from .schemes import (
    BlePayload,
    ConsentSecret,
    EncryptedContext,
    EphemeralEncryptedContext,
    FindMyBeacon,
    FindMyRecord,
    RotatingKeypair,
    SchemeTag,
    assemble_payload,
    asym_keypair,
    consent_key,
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
    generate_consent_secret,
    parse_payload,
)
from .agent import (
    DeviceAgent,
    DeviceConfig,
    ExposureEvent,
    LocalLogEntry,
    ScanRecord,
    Scheme,
    event_to_json,
    events_to_jsonl,
)
from .server import BundleEntry, DiagnosisBundle, DiagnosisRegistry, fold_versions
from .sim import (
    AgentSpec,
    ChannelModel,
    MobilityTrace,
    Scenario,
    SimulationReport,
    audit_passed,
    audit_privacy,
    bench_matching,
    bench_schemes,
    load_scenario,
    run,
)

__version__ = "0.1.0"
