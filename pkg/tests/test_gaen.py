"""Key schedule and matching, pinned to the frozen golden vectors."""

import pytest

from censim.errors import AlignmentError, IntervalRangeError, WindowError
from censim.gaen import (
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
    format_vector_line,
    generate_daily_key,
    iter_vector_lines,
    match_rpis,
    parse_vector_line,
)
from censim.rng import DeterministicRng
from conftest import vector_lines


def _dk(key: bytes = b"\x00" * 16, day_start: int = 0) -> DailyKey:
    return DailyKey(key, Enin(day_start))


class TestEnin:
    def test_day_helpers(self):
        e = Enin(3 * 144 + 17)
        assert e.day_index() == 3
        assert e.day_start() == Enin(3 * 144)
        assert e.unix_start() == (3 * 144 + 17) * 600
        assert e.offset(5) == Enin(3 * 144 + 22)

    def test_negative_rejected(self):
        with pytest.raises(IntervalRangeError):
            Enin(-1)

    def test_from_unix_floors(self):
        assert enin_from_unix(0) == Enin(0)
        assert enin_from_unix(599) == Enin(0)
        assert enin_from_unix(600) == Enin(1)
        assert enin_from_unix(1_600_041_600) == Enin(1_600_041_600 // 600)


class TestDailyKey:
    def test_length_checked(self):
        with pytest.raises(ValueError):
            DailyKey(b"\x00" * 15, Enin(0))

    def test_alignment_checked(self):
        with pytest.raises(AlignmentError):
            DailyKey(b"\x00" * 16, Enin(1))

    def test_text_round_trip(self):
        dk = _dk(bytes(range(16)), 144 * 7)
        text = dk.to_text()
        assert DailyKey.from_text(text) == dk

    def test_generate_uses_rng_stream(self):
        rng = DeterministicRng(1, "keys")
        a = generate_daily_key(rng, Enin(0))
        b = generate_daily_key(rng, Enin(144))
        assert a.key != b.key
        rng2 = DeterministicRng(1, "keys")
        assert generate_daily_key(rng2, Enin(0)).key == a.key

    def test_generate_rejects_unaligned_day(self):
        with pytest.raises(AlignmentError):
            generate_daily_key(DeterministicRng(0, "k"), Enin(7))


class TestDerivation:
    def test_golden_vectors(self):
        for line in vector_lines("rpi_vectors.txt"):
            key, at, expect = parse_vector_line(line)
            dk = DailyKey(key, at.day_start())
            assert derive_rpi(dk, at).bytes == expect, line

    def test_all_rpis_count_and_windows(self):
        dk = _dk(day_start=5 * 144)
        rpis = derive_all_rpis(dk)
        assert len(rpis) == WINDOWS_PER_DAY == 144
        assert [r.derived_at.value for r in rpis] == list(range(5 * 144, 6 * 144))
        assert len({r.bytes for r in rpis}) == 144

    def test_outside_day_rejected(self):
        dk = _dk(day_start=144)
        with pytest.raises(WindowError):
            derive_rpi(dk, Enin(143))
        with pytest.raises(WindowError):
            derive_rpi(dk, Enin(288))
        derive_rpi(dk, Enin(144))
        derive_rpi(dk, Enin(287))

    def test_aem_is_a_stream_mask(self):
        dk = _dk(bytes(range(16)))
        rpi = derive_rpi(dk, Enin(10))
        meta = b"\x01\x02\x03\x04"
        aem = derive_aem(dk, rpi, meta)
        assert len(aem) == 4
        assert aem != meta
        # CTR keystream keyed by the identifier: applying it twice unmasks
        assert derive_aem(dk, rpi, aem) == meta

    def test_aem_differs_per_window(self):
        dk = _dk(bytes(range(16)))
        a = derive_aem(dk, derive_rpi(dk, Enin(0)))
        b = derive_aem(dk, derive_rpi(dk, Enin(1)))
        assert a != b

    def test_rpi_length_checked(self):
        with pytest.raises(ValueError):
            Rpi(b"\x00" * 8, Enin(0))


class TestMatching:
    def setup_method(self):
        self.dk = _dk(bytes(range(16)), 0)
        self.rpis = derive_all_rpis(self.dk)

    def test_exact_window(self):
        heard = [(self.rpis[7].bytes, Enin(7))]
        assert match_rpis(heard, self.dk) == [(0, Enin(7))]

    @pytest.mark.parametrize("off", [-12, -5, 0, 5, 12])
    def test_within_tolerance_accepted(self, off):
        base = 70
        heard = [(self.rpis[base].bytes, Enin(base + off))]
        assert match_rpis(heard, self.dk) == [(0, Enin(base))]

    @pytest.mark.parametrize("off", [-13, 13, 40])
    def test_outside_tolerance_rejected(self, off):
        base = 70
        heard = [(self.rpis[base].bytes, Enin(base + off))]
        assert match_rpis(heard, self.dk) == []

    def test_custom_tolerance(self):
        heard = [(self.rpis[50].bytes, Enin(53))]
        assert match_rpis(heard, self.dk, MatchTolerance(2)) == []
        assert match_rpis(heard, self.dk, MatchTolerance(3)) == [(0, Enin(50))]

    def test_zero_tolerance(self):
        heard = [(self.rpis[9].bytes, Enin(9)), (self.rpis[9].bytes, Enin(10))]
        assert match_rpis(heard, self.dk, MatchTolerance(0)) == [(0, Enin(9))]

    def test_results_in_input_order(self):
        heard = [
            (self.rpis[100].bytes, Enin(100)),
            (b"\xaa" * 16, Enin(4)),
            (self.rpis[3].bytes, Enin(3)),
        ]
        assert match_rpis(heard, self.dk) == [(0, Enin(100)), (2, Enin(3))]

    def test_negative_tolerance_rejected(self):
        with pytest.raises(ValueError):
            MatchTolerance(-1)

    def test_stats_accounting(self):
        stats = MatchStats()
        heard = [(b"\x00" * 16, Enin(0))] * 10
        match_rpis(heard, self.dk, stats=stats)
        assert stats.derivations == 144
        assert stats.comparisons == 10


class TestVectorLineFormat:
    def test_round_trip(self):
        line = format_vector_line(b"\x11" * 16, Enin(42), b"\x22" * 16)
        key, at, rpi = parse_vector_line(line)
        assert (key, at, rpi) == (b"\x11" * 16, Enin(42), b"\x22" * 16)

    def test_iter_skips_comments_and_blanks(self):
        text = "# header\n\n" + format_vector_line(b"\x00" * 16, Enin(1), b"\x01" * 16) + "\n"
        assert len(list(iter_vector_lines(text))) == 1

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError):
            parse_vector_line("deadbeef 12")
