import io
from datetime import timedelta

import numpy as np
import pytest

from builders import T0, channels, make_pings, random_pings
from sonarcat import synth
from sonarcat.xtf import (
    EmptyChannelLayout, EndOfStream, InsufficientNav, NavFix, NeedMoreData, SonarPing, TruncatedPacket,
    UnrecognizedFormat, XtfFileHeader, XtfReader, encode_attitude_packet, encode_file_header,
    encode_raw_packet, group_by_ping, header_for, interpolate_nav, iter_pings, nav_coverage,
    parse_file_header, write_xtf, AttitudeRecord,
)


def _bytes(pings, **kw):
    buf = io.BytesIO()
    write_xtf(pings, buf, **kw)
    return buf.getvalue()


class Trickle:
    """Stream that hands out at most ``n`` bytes per read, like a slow socket."""

    def __init__(self, data, n=7):
        self.data, self.pos, self.n = data, 0, n

    def read(self, size=-1):
        chunk = self.data[self.pos:self.pos + min(self.n, size if size > 0 else self.n)]
        self.pos += len(chunk)
        return chunk


def test_header_from_synth_file(tmp_path):
    sc = synth.SurveyScenario(seed=1, ping_count=5)
    path, _ = synth.write_survey(sc, tmp_path / "s.xtf")
    with open(path, "rb") as fh:
        hdr = XtfReader(fh).header
    assert hdr.channel_count == 2
    assert [c.side.value for c in hdr.channel_infos] == ["port", "starboard"]


def test_bad_format_byte():
    data = bytearray(encode_file_header(header_for([], channels())))
    data[0] = 0x42
    with pytest.raises(UnrecognizedFormat):
        parse_file_header(bytes(data))


def test_half_header_needs_more_data():
    data = encode_file_header(header_for([], channels()))
    with pytest.raises(NeedMoreData):
        parse_file_header(data[: len(data) // 2])
    with pytest.raises(NeedMoreData):
        XtfReader(io.BytesIO(data[:512]))


def test_zero_channels_rejected():
    with pytest.raises(EmptyChannelLayout):
        XtfFileHeader(0x7B, 1, 0, ())


def test_hundred_packets_then_end():
    pings = make_pings(100)
    reader = XtfReader(io.BytesIO(_bytes(pings)))
    batches = [reader.next_packet() for _ in range(100)]
    assert all(isinstance(b, tuple) and len(b) == 2 for b in batches)
    assert reader.next_packet() is EndOfStream
    assert reader.stats.pings == 100


def test_unknown_packet_skipped():
    pings = make_pings(4)
    data = _bytes(pings, extra_packets={2: [encode_raw_packet(42, b"opaque payload")]})
    reader = XtfReader(io.BytesIO(data))
    assert list(iter_pings(reader)) == pings
    assert reader.stats.skipped == 1


def test_garbage_between_packets_resyncs():
    pings = make_pings(2)
    data = _bytes(pings[:2]) + b"\x01\x02\x03" + _bytes(pings[2:])[1024:]
    reader = XtfReader(io.BytesIO(data))
    got = list(iter_pings(reader))
    assert got == pings
    assert reader.stats.resyncs == 1
    assert reader.stats.bytes_discarded == 3


def test_garbage_containing_half_magic():
    pings = make_pings(3)
    raw = _bytes(pings)
    first = 1024 + (len(raw) - 1024) // 3
    data = raw[:first] + b"\xce\xfa\x00\xce" + raw[first:]
    assert list(iter_pings(XtfReader(io.BytesIO(data)))) == pings


def test_truncated_packet_carries_offset():
    pings = make_pings(3)
    data = _bytes(pings)
    packet = (len(data) - 1024) // 3
    reader = XtfReader(io.BytesIO(data[:-10]))
    assert reader.next_packet() is not EndOfStream
    assert reader.next_packet() is not EndOfStream
    with pytest.raises(TruncatedPacket) as err:
        reader.next_packet()
    assert err.value.offset == 1024 + 2 * packet


def test_attitude_packets_decoded():
    att = AttitudeRecord(T0 + timedelta(milliseconds=250), 1.5, -2.0, 0.25, 3.0, 181.5)
    pings = make_pings(2)
    reader = XtfReader(io.BytesIO(_bytes(pings, extra_packets={1: [encode_attitude_packet(att)]})))
    packets = list(reader)
    assert packets[1] == att
    assert reader.stats.attitude == 1


def test_zero_pings_header_only(tmp_path):
    sc = synth.SurveyScenario(seed=0, ping_count=0)
    path, truth = synth.write_survey(sc, tmp_path / "empty.xtf")
    assert path.stat().st_size == 1024
    assert truth == []
    with open(path, "rb") as fh:
        assert XtfReader(fh).next_packet() is EndOfStream


def test_sixteen_bit_round_trip():
    pings = make_pings(3, width=2, samples=lambda i, s: np.arange(256, dtype=np.uint16) * 257)
    reader = XtfReader(io.BytesIO(_bytes(pings)))
    assert reader.header.channel_infos[0].bytes_per_sample == 2
    got = list(iter_pings(reader))
    assert got == pings
    assert got[0].samples.dtype == np.uint16


def test_trickled_stream_matches_whole_read():
    pings = random_pings(np.random.default_rng(5), 12)
    data = _bytes(pings, extra_packets={3: [encode_raw_packet(99, b"x" * 100)]})
    whole = list(iter_pings(XtfReader(io.BytesIO(data))))
    slow = list(iter_pings(XtfReader(Trickle(data, 5))))
    assert whole == slow == pings


def test_missing_nav_reads_as_none():
    pings = make_pings(3, nav=False)
    got = list(iter_pings(XtfReader(io.BytesIO(_bytes(pings)))))
    assert all(p.nav is None for p in got)
    assert nav_coverage(got) == 0.0


def test_group_by_ping():
    groups = group_by_ping(make_pings(4))
    assert [len(g) for g in groups] == [2, 2, 2, 2]


def _nav_ping(seconds, nav):
    ch = channels()[0]
    return SonarPing(int(seconds * 100), T0 + timedelta(seconds=seconds), ch, np.zeros(8, np.uint8), 50.0, 1500.0,
                     10.0, nav)


def test_interpolate_lat_midpoint():
    pings = [
        _nav_ping(0, NavFix(48.0, -4.0, 0.0, T0)),
        _nav_ping(5, None),
        _nav_ping(10, NavFix(48.001, -4.0, 0.0, T0 + timedelta(seconds=10))),
    ]
    out = interpolate_nav(pings)
    assert out[1].nav.latitude == pytest.approx(48.0005, abs=1e-12)
    assert out[1].nav.source == "interpolated"
    assert out[0] is pings[0]


def test_interpolate_heading_short_arc():
    pings = [
        _nav_ping(0, NavFix(48.0, -4.0, 350.0, T0)),
        _nav_ping(5, None),
        _nav_ping(10, NavFix(48.0, -4.0, 10.0, T0 + timedelta(seconds=10))),
    ]
    h = interpolate_nav(pings)[1].nav.heading
    assert min(h, 360.0 - h) == pytest.approx(0.0, abs=1e-9)


def test_interpolate_outside_fixes_extrapolates():
    pings = [
        _nav_ping(1, NavFix(48.0, -4.0, 0.0, T0 + timedelta(seconds=1))),
        _nav_ping(2, NavFix(48.1, -4.0, 0.0, T0 + timedelta(seconds=2))),
        _nav_ping(3, None),
    ]
    nav = interpolate_nav(pings)[2].nav
    assert nav.extrapolated and nav.latitude == 48.1


def test_interpolate_needs_two_fixes():
    with pytest.raises(InsufficientNav):
        interpolate_nav([_nav_ping(0, NavFix(48.0, -4.0, 0.0, T0)), _nav_ping(1, None)])
