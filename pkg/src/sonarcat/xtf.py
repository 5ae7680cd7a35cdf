"""XTF (eXtended Triton Format) reader and writer.

Only the pieces needed by the detection pipeline are decoded: the file
header with its channel layout, sonar ping packets (header type 0) and
attitude packets (header type 3).  Every other packet type is skipped.
All records are little-endian.

The reader works on any binary file-like object exposing ``read(n)``, so
the same code path serves files, stdin and TCP sockets.  After corruption
it resynchronises by scanning for the packet magic number ``0xFACE``.
"""

from __future__ import annotations

import enum
import logging
import math
import struct
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import BinaryIO, Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

FILE_FORMAT = 0x7B
MAGIC = 0xFACE
MAGIC_BYTES = struct.pack("<H", MAGIC)
HEADER_SONAR = 0
HEADER_ATTITUDE = 3
FILE_HEADER_SIZE = 1024
CHANINFO_SIZE = 128
NAV_UNITS_LATLON = 3
# sanity cap on NumBytesThisRecord; anything larger is treated as a false magic hit
MAX_RECORD_BYTES = 1 << 24

_FILE_HDR = struct.Struct("<BB8s8s16sh64s64s3hBBhBBHf12s10sl12f")
_CHANINFO = struct.Struct("<BBhHHl16s11fhB53s")
_PACKET_HDR = struct.Struct("<HBBH2HL")
_PING_HDR = struct.Struct("<H6BH2L2fL21f2d2H4B2f2d4H10fLfL4B2hBL7B")
_CHAN_HDR = struct.Struct("<2H5f5HLH2BLHf2BfH4B")
_ATTITUDE = struct.Struct("<2L2L4fLfH5BHB")

_PING_FIELDS = (
    "year month day hour minute second hseconds julian_day event_number ping_number "
    "sound_velocity ocean_tide reserved2 conductivity_freq temperature_freq pressure_freq "
    "pressure_temp conductivity water_temperature pressure computed_sound_velocity "
    "mag_x mag_y mag_z aux1 aux2 aux3 aux4 aux5 aux6 speed_log turbidity ship_speed "
    "ship_gyro ship_y ship_x ship_altitude ship_depth fix_hour fix_minute fix_second "
    "fix_hsecond sensor_speed kp sensor_y sensor_x sonar_status range_to_fish "
    "bearing_to_fish cable_out layback cable_tension sensor_depth sensor_altitude "
    "sensor_aux_altitude sensor_pitch sensor_roll sensor_heading heave yaw "
    "attitude_time_tag dot nav_fix_ms clock_hour clock_minute clock_second clock_hsecond "
    "fish_dx fish_dy fish_error_code optional_offset cable_out_hundredths "
    "r1 r2 r3 r4 r5 r6"
).split()

_CHAN_FIELDS = (
    "channel_number downsample_method slant_range ground_range time_delay time_duration "
    "seconds_per_ping processing_flags frequency initial_gain_code gain_code bandwidth "
    "contact_number contact_classification contact_sub_number contact_type num_samples "
    "millivolt_scale contact_time_off_track contact_close_number reserved2 fixed_vsop "
    "weight r1 r2 r3 r4"
).split()

assert len(_PING_FIELDS) == len(_PING_HDR.unpack(bytes(_PING_HDR.size)))
assert len(_CHAN_FIELDS) == len(_CHAN_HDR.unpack(bytes(_CHAN_HDR.size)))


class XtfError(Exception):
    """Base class for XTF decoding errors."""


class UnrecognizedFormat(XtfError):
    pass


class EmptyChannelLayout(XtfError):
    pass


class NeedMoreData(XtfError):
    pass


class UnsupportedSampleFormat(XtfError):
    pass


class InsufficientNav(XtfError):
    pass


class TruncatedPacket(XtfError):
    def __init__(self, offset: int, message: str = ""):
        super().__init__(message or f"packet truncated at byte offset {offset}")
        self.offset = offset


class Side(enum.Enum):
    PORT = "port"
    STARBOARD = "starboard"
    OTHER = "other"

    @classmethod
    def from_type_code(cls, code: int) -> "Side":
        return {1: cls.PORT, 2: cls.STARBOARD}.get(code, cls.OTHER)

    @property
    def type_code(self) -> int:
        return {Side.PORT: 1, Side.STARBOARD: 2, Side.OTHER: 0}[self]


@dataclass(frozen=True)
class ChannelInfo:
    side: Side
    bytes_per_sample: int
    samples_per_ping_hint: int = 0
    name: str = ""
    tilt_angle: float | None = None
    index: int = 0

    def __post_init__(self):
        if self.bytes_per_sample not in (1, 2):
            raise UnsupportedSampleFormat(
                f"channel {self.index}: {self.bytes_per_sample} bytes per sample is not supported"
            )

    @property
    def max_sample(self) -> int:
        return (1 << (8 * self.bytes_per_sample)) - 1


@dataclass(frozen=True)
class XtfFileHeader:
    format_version: int
    system_type: int
    channel_count: int
    channel_infos: tuple[ChannelInfo, ...]
    sonar_name: str = ""
    recording_program: str = ""
    header_size: int = FILE_HEADER_SIZE

    def __post_init__(self):
        if self.channel_count < 1:
            raise EmptyChannelLayout("XTF file declares no sonar channels")
        if self.channel_count != len(self.channel_infos):
            raise ValueError("channel_count does not match channel_infos")


@dataclass(frozen=True)
class NavFix:
    latitude: float
    longitude: float
    heading: float
    fix_time: datetime
    # "fix", "interpolated" or "extrapolated"
    source: str = "fix"

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")
        if not 0.0 <= self.heading < 360.0:
            raise ValueError(f"heading out of range: {self.heading}")

    @property
    def extrapolated(self) -> bool:
        return self.source == "extrapolated"


@dataclass(frozen=True, eq=False)
class SonarPing:
    ping_number: int
    timestamp: datetime
    channel: ChannelInfo
    samples: np.ndarray
    slant_range_max: float
    sound_velocity: float
    sensor_altitude: float | None = None
    nav: NavFix | None = None
    tilt_angle: float | None = None
    roll_angle: float | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("ping samples must be a non-empty vector")
        dtype = np.uint8 if self.channel.bytes_per_sample == 1 else np.uint16
        if samples.dtype != dtype and (samples.min() < 0 or samples.max() > self.channel.max_sample):
            raise ValueError("sample value exceeds channel sample width")
        samples = samples.astype(dtype)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def degenerate(self) -> bool:
        """True when the whole ping lies inside the water column."""
        return self.sensor_altitude is not None and self.slant_range_max <= self.sensor_altitude

    def __eq__(self, other):
        if not isinstance(other, SonarPing):
            return NotImplemented
        return (
            self.ping_number == other.ping_number
            and self.timestamp == other.timestamp
            and self.channel == other.channel
            and np.array_equal(self.samples, other.samples)
            and self.slant_range_max == other.slant_range_max
            and self.sound_velocity == other.sound_velocity
            and self.sensor_altitude == other.sensor_altitude
            and self.nav == other.nav
            and self.tilt_angle == other.tilt_angle
            and self.roll_angle == other.roll_angle
        )

    __hash__ = None


@dataclass(frozen=True)
class AttitudeRecord:
    timestamp: datetime
    pitch: float
    roll: float
    heave: float
    yaw: float
    heading: float


class _EndOfStream:
    def __repr__(self):
        return "EndOfStream"


EndOfStream = _EndOfStream()


@dataclass
class ReaderStats:
    packets: int = 0
    pings: int = 0
    attitude: int = 0
    skipped: int = 0
    resyncs: int = 0
    bytes_discarded: int = 0
    bad_nav: int = 0


def _cstr(raw: bytes) -> str:
    return raw.split(b"\x00", 1)[0].decode("latin-1")


def _opt(value: float) -> float | None:
    return None if math.isnan(value) else value


def _nan_if_none(value: float | None) -> float:
    return math.nan if value is None else value


def parse_file_header(data: bytes) -> XtfFileHeader:
    """Decode the XTF file header from the start of ``data``."""
    if len(data) < 1:
        raise NeedMoreData("empty input")
    if data[0] != FILE_FORMAT:
        raise UnrecognizedFormat(f"bad XTF format byte 0x{data[0]:02x}")
    if len(data) < FILE_HEADER_SIZE:
        raise NeedMoreData(f"file header needs {FILE_HEADER_SIZE} bytes, got {len(data)}")
    s = _FILE_HDR.unpack_from(data, 0)
    n_sonar, n_bathy = s[9], s[10]
    if n_sonar == 0:
        raise EmptyChannelLayout("XTF file declares no sonar channels")
    n_total = n_sonar + n_bathy
    # channel infos beyond the first six spill into extra 1024-byte blocks
    header_size = FILE_HEADER_SIZE
    if n_total > 6:
        header_size += math.ceil((n_total - 6) / 8) * FILE_HEADER_SIZE
    if len(data) < header_size:
        raise NeedMoreData(f"file header needs {header_size} bytes, got {len(data)}")
    infos = []
    for i in range(n_sonar):
        c = _CHANINFO.unpack_from(data, _FILE_HDR.size + i * CHANINFO_SIZE)
        infos.append(
            ChannelInfo(
                side=Side.from_type_code(c[0]),
                bytes_per_sample=c[4],
                samples_per_ping_hint=c[5],
                name=_cstr(c[6]),
                tilt_angle=_opt(c[10]),
                index=i,
            )
        )
    return XtfFileHeader(
        format_version=s[0],
        system_type=s[1],
        channel_count=n_sonar,
        channel_infos=tuple(infos),
        sonar_name=_cstr(s[4]),
        recording_program=_cstr(s[2]),
        header_size=header_size,
    )


def encode_file_header(header: XtfFileHeader) -> bytes:
    n = header.channel_count
    size = FILE_HEADER_SIZE
    if n > 6:
        size += math.ceil((n - 6) / 8) * FILE_HEADER_SIZE
    buf = bytearray(size)
    _FILE_HDR.pack_into(
        buf, 0,
        header.format_version, header.system_type,
        header.recording_program.encode("latin-1")[:8], b"0.1", header.sonar_name.encode("latin-1")[:16],
        0, b"", b"",
        NAV_UNITS_LATLON, n, 0,
        0, 0, 0, 0, 0, 0, 0.0, b"", b"", 0,
        *([0.0] * 12),
    )
    for i, ch in enumerate(header.channel_infos):
        _CHANINFO.pack_into(
            buf, _FILE_HDR.size + i * CHANINFO_SIZE,
            ch.side.type_code, ch.index, 0, 1, ch.bytes_per_sample, ch.samples_per_ping_hint,
            ch.name.encode("latin-1")[:16],
            0.0, 0.0, 0.0, _nan_if_none(ch.tilt_angle), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0, 0, b"",
        )
    return bytes(buf)


def _hundredths(ts: datetime) -> int:
    return ts.microsecond // 10000


def _pad64(n: int) -> int:
    return (n + 63) // 64 * 64


def encode_ping_packet(pings: Sequence[SonarPing]) -> bytes:
    """Encode one ping (all channels of the same ping number) as a sonar packet."""
    first = pings[0]
    ts = first.timestamp.astimezone(timezone.utc)
    nav = first.nav
    ftime = nav.fix_time.astimezone(timezone.utc) if nav is not None else ts
    values = dict.fromkeys(_PING_FIELDS, 0)
    values.update(
        year=ts.year, month=ts.month, day=ts.day, hour=ts.hour, minute=ts.minute,
        second=ts.second, hseconds=_hundredths(ts), julian_day=ts.timetuple().tm_yday,
        ping_number=first.ping_number,
        # XTF stores one-way (half) sound velocity
        sound_velocity=first.sound_velocity / 2.0,
        sensor_y=nav.latitude if nav else 0.0,
        sensor_x=nav.longitude if nav else 0.0,
        sensor_heading=nav.heading if nav else 0.0,
        fix_hour=ftime.hour, fix_minute=ftime.minute, fix_second=ftime.second,
        fix_hsecond=_hundredths(ftime),
        sensor_altitude=_nan_if_none(first.sensor_altitude),
        sensor_roll=_nan_if_none(first.roll_angle),
    )
    body = bytearray(_PING_HDR.pack(*(values[k] for k in _PING_FIELDS)))
    for p in pings:
        ch = dict.fromkeys(_CHAN_FIELDS, 0)
        ch.update(channel_number=p.channel.index, slant_range=p.slant_range_max,
                  num_samples=p.samples.size)
        body += _CHAN_HDR.pack(*(ch[k] for k in _CHAN_FIELDS))
        body += p.samples.astype("<u1" if p.channel.bytes_per_sample == 1 else "<u2").tobytes()
    total = _pad64(_PACKET_HDR.size + len(body))
    head = _PACKET_HDR.pack(MAGIC, HEADER_SONAR, 0, len(pings), 0, 0, total)
    return head + bytes(body) + bytes(total - _PACKET_HDR.size - len(body))


def encode_attitude_packet(att: AttitudeRecord) -> bytes:
    ts = att.timestamp.astimezone(timezone.utc)
    head = _PACKET_HDR.pack(MAGIC, HEADER_ATTITUDE, 0, 0, 0, 0, 64)
    body = _ATTITUDE.pack(
        0, 0, 0, 0, att.pitch, att.roll, att.heave, att.yaw, 0, att.heading,
        ts.year, ts.month, ts.day, ts.hour, ts.minute, ts.second, ts.microsecond // 1000, 0,
    )
    return head + body


def encode_raw_packet(header_type: int, payload: bytes = b"") -> bytes:
    """Encode an opaque packet of an arbitrary header type (used for tests and passthrough)."""
    total = _pad64(_PACKET_HDR.size + len(payload))
    head = _PACKET_HDR.pack(MAGIC, header_type, 0, 0, 0, 0, total)
    return head + payload + bytes(total - _PACKET_HDR.size - len(payload))


class XtfReader:
    """Sequential XTF packet reader over a binary stream.

    ``next_packet`` returns a tuple of :class:`SonarPing` (one per channel of
    a ping), an :class:`AttitudeRecord`, or ``EndOfStream``.
    """

    def __init__(self, stream: BinaryIO, chunk_size: int = 1 << 16):
        self._stream = stream
        self._chunk = chunk_size
        self._buf = bytearray()
        self._pos = 0  # index of next unread byte in _buf
        self._base = 0  # absolute offset of _buf[0]
        self._eof = False
        self.stats = ReaderStats()
        self._fill(FILE_HEADER_SIZE)
        self.header = parse_file_header(bytes(self._buf[: FILE_HEADER_SIZE]))
        if self.header.header_size > FILE_HEADER_SIZE:
            self._fill(self.header.header_size)
            self.header = parse_file_header(bytes(self._buf[: self.header.header_size]))
        self._pos = self.header.header_size

    @property
    def offset(self) -> int:
        return self._base + self._pos

    def _avail(self) -> int:
        return len(self._buf) - self._pos

    def _fill(self, n: int) -> bool:
        """Ensure ``n`` bytes are buffered past the read position."""
        while len(self._buf) - self._pos < n and not self._eof:
            chunk = self._stream.read(max(self._chunk, n))
            if not chunk:
                self._eof = True
                break
            self._buf += chunk
        return len(self._buf) - self._pos >= n

    def _compact(self):
        if self._pos > (1 << 20):
            del self._buf[: self._pos]
            self._base += self._pos
            self._pos = 0

    def _warn(self, event: str, **fields):
        log.warning(event, extra={"event": event, **fields})

    def _resync(self) -> bool:
        """Advance to the next magic number; False if the stream ends first."""
        start = self.offset
        while True:
            idx = self._buf.find(MAGIC_BYTES, self._pos)
            if idx >= 0:
                self._pos = idx
                break
            # keep a trailing first half of the magic, the rest is garbage
            keep = 1 if self._buf[-1:] == MAGIC_BYTES[:1] else 0
            self._pos = len(self._buf) - keep
            if not self._fill(keep + 1):
                self._pos = len(self._buf)
                self.stats.bytes_discarded += self.offset - start
                self._warn("trailing_garbage", offset=start, length=self.offset - start)
                return False
        skipped = self.offset - start
        if skipped:
            self.stats.resyncs += 1
            self.stats.bytes_discarded += skipped
            self._warn("resync", offset=start, skipped_bytes=skipped)
        return True

    def next_packet(self):
        while True:
            self._compact()
            if not self._fill(1):
                return EndOfStream
            if not self._fill(2) or self._buf[self._pos: self._pos + 2] != MAGIC_BYTES:
                if not self._resync():
                    return EndOfStream
            start = self.offset
            if not self._fill(_PACKET_HDR.size):
                raise TruncatedPacket(start)
            magic, htype, subch, nchan, _, _, nbytes = _PACKET_HDR.unpack_from(self._buf, self._pos)
            if nbytes < _PACKET_HDR.size or nbytes > MAX_RECORD_BYTES:
                # false magic hit or a corrupt length; skip a byte and look again
                self._pos += 1
                self.stats.bytes_discarded += 1
                continue
            if not self._fill(nbytes):
                raise TruncatedPacket(start, f"packet at byte offset {start} needs {nbytes} bytes, stream ended")
            record = memoryview(self._buf)[self._pos: self._pos + nbytes]
            try:
                if htype == HEADER_SONAR:
                    packet = self._decode_ping(record, nchan)
                elif htype == HEADER_ATTITUDE:
                    packet = self._decode_attitude(record)
                else:
                    packet = None
            except (struct.error, ValueError, IndexError, XtfError) as exc:
                record.release()
                self._warn("corrupt_packet", offset=start, header_type=htype, error=str(exc))
                self._pos += 1
                self.stats.bytes_discarded += 1
                continue
            record.release()
            self._pos += nbytes
            self.stats.packets += 1
            if packet is None:
                self.stats.skipped += 1
                self._warn("skipped_packet", offset=start, header_type=htype)
                continue
            if isinstance(packet, AttitudeRecord):
                self.stats.attitude += 1
            else:
                self.stats.pings += 1
            return packet

    def _decode_ping(self, rec: memoryview, nchan: int) -> tuple[SonarPing, ...]:
        infos = self.header.channel_infos
        if not 1 <= nchan <= len(infos):
            raise ValueError(f"bad channel count {nchan}")
        h = dict(zip(_PING_FIELDS, _PING_HDR.unpack_from(rec, _PACKET_HDR.size)))
        ts = datetime(h["year"], h["month"], h["day"], h["hour"], h["minute"], h["second"],
                      h["hseconds"] * 10000, tzinfo=timezone.utc)
        nav = self._decode_nav(h, ts)
        off = _PACKET_HDR.size + _PING_HDR.size
        pings = []
        for _ in range(nchan):
            c = dict(zip(_CHAN_FIELDS, _CHAN_HDR.unpack_from(rec, off)))
            off += _CHAN_HDR.size
            info = infos[c["channel_number"]]
            n = c["num_samples"]
            width = info.bytes_per_sample
            if n == 0 or off + n * width > len(rec):
                raise ValueError("sample block overruns record")
            samples = np.frombuffer(rec, dtype="<u1" if width == 1 else "<u2", count=n, offset=off)
            off += n * width
            pings.append(
                SonarPing(
                    ping_number=h["ping_number"],
                    timestamp=ts,
                    channel=info,
                    samples=samples,
                    slant_range_max=c["slant_range"],
                    sound_velocity=h["sound_velocity"] * 2.0,
                    sensor_altitude=_opt(h["sensor_altitude"]),
                    nav=nav,
                    tilt_angle=info.tilt_angle,
                    roll_angle=_opt(h["sensor_roll"]),
                )
            )
        return tuple(pings)

    def _decode_nav(self, h: dict, ts: datetime) -> NavFix | None:
        lat, lon = h["sensor_y"], h["sensor_x"]
        if lat == 0.0 and lon == 0.0:
            return None
        ftime = ts.replace(hour=h["fix_hour"], minute=h["fix_minute"], second=h["fix_second"],
                           microsecond=h["fix_hsecond"] * 10000)
        # fix time carries no date; pick the day that puts it closest to the ping
        if ftime - ts > timedelta(hours=12):
            ftime -= timedelta(days=1)
        elif ts - ftime > timedelta(hours=12):
            ftime += timedelta(days=1)
        try:
            return NavFix(lat, lon, h["sensor_heading"], ftime)
        except ValueError as exc:
            self.stats.bad_nav += 1
            self._warn("bad_nav", ping_number=h["ping_number"], error=str(exc))
            return None

    def _decode_attitude(self, rec: memoryview) -> AttitudeRecord:
        a = _ATTITUDE.unpack_from(rec, _PACKET_HDR.size)
        ts = datetime(a[10], a[11], a[12], a[13], a[14], a[15], a[16] * 1000, tzinfo=timezone.utc)
        return AttitudeRecord(ts, pitch=a[4], roll=a[5], heave=a[6], yaw=a[7], heading=a[9])

    def __iter__(self):
        while True:
            packet = self.next_packet()
            if packet is EndOfStream:
                return
            yield packet


def next_packet(reader: XtfReader):
    return reader.next_packet()


def iter_pings(reader: XtfReader) -> Iterator[SonarPing]:
    """Yield every decoded ping (flattened across channels), ignoring attitude."""
    for packet in reader:
        if isinstance(packet, tuple):
            yield from packet


def read_xtf(path) -> tuple[XtfFileHeader, list[SonarPing], ReaderStats]:
    with open(path, "rb") as fh:
        reader = XtfReader(fh)
        pings = list(iter_pings(reader))
    return reader.header, pings, reader.stats


def group_by_ping(pings: Sequence[SonarPing]) -> list[list[SonarPing]]:
    """Group consecutive pings sharing a ping number (one packet's channels)."""
    groups: list[list[SonarPing]] = []
    for p in pings:
        if groups and groups[-1][0].ping_number == p.ping_number and groups[-1][0].timestamp == p.timestamp:
            groups[-1].append(p)
        else:
            groups.append([p])
    return groups


def write_xtf(pings: Sequence[SonarPing], path_or_stream, header: XtfFileHeader | None = None,
              extra_packets: dict[int, list[bytes]] | None = None) -> None:
    """Write pings as an XTF file.

    ``header`` defaults to a layout built from the channels seen in ``pings``.
    ``extra_packets`` maps a ping-group index to raw packet bytes that are
    inserted before that group; it is how tests interleave foreign packets.
    """
    if header is None:
        header = header_for(pings)
    extra_packets = extra_packets or {}
    own = not hasattr(path_or_stream, "write")
    fh = open(path_or_stream, "wb") if own else path_or_stream
    try:
        fh.write(encode_file_header(header))
        groups = group_by_ping(pings)
        for i, group in enumerate(groups):
            for raw in extra_packets.get(i, ()):
                fh.write(raw)
            fh.write(encode_ping_packet(group))
        for raw in extra_packets.get(len(groups), ()):
            fh.write(raw)
    finally:
        if own:
            fh.close()


def header_for(pings: Sequence[SonarPing], channels: Sequence[ChannelInfo] | None = None,
               sonar_name: str = "sonarcat-synth") -> XtfFileHeader:
    if channels is None:
        seen = {}
        for p in pings:
            seen.setdefault(p.channel.index, p.channel)
        channels = [seen[k] for k in sorted(seen)]
    if not channels:
        raise EmptyChannelLayout("no channels to write")
    return XtfFileHeader(
        format_version=FILE_FORMAT, system_type=1, channel_count=len(channels),
        channel_infos=tuple(channels), sonar_name=sonar_name, recording_program="sonarcat",
    )


def _angle_lerp(a: float, b: float, f: float) -> float:
    diff = (b - a + 180.0) % 360.0 - 180.0
    return (a + f * diff) % 360.0


def interpolate_nav(pings: Sequence[SonarPing]) -> list[SonarPing]:
    """Fill missing navigation by time interpolation between the original fixes.

    Latitude and longitude are interpolated linearly in time and heading
    along the shortest arc.  Pings outside the span of fixes take the
    nearest fix and are marked ``extrapolated``.
    """
    knots: dict[datetime, NavFix] = {}
    for p in pings:
        if p.nav is not None and p.nav.source == "fix":
            knots.setdefault(p.nav.fix_time, p.nav)
    if len(knots) < 2:
        raise InsufficientNav(f"need at least two navigation fixes, found {len(knots)}")
    times = sorted(knots)
    t0 = times[0]
    secs = np.array([(t - t0).total_seconds() for t in times])
    fixes = [knots[t] for t in times]

    out = []
    for p in pings:
        if p.nav is not None and p.nav.source == "fix":
            out.append(p)
            continue
        t = (p.timestamp - t0).total_seconds()
        if t <= secs[0]:
            nav = replace(fixes[0], source="extrapolated")
        elif t >= secs[-1]:
            nav = replace(fixes[-1], source="extrapolated")
        else:
            j = int(np.searchsorted(secs, t, side="right"))
            a, b = fixes[j - 1], fixes[j]
            f = (t - secs[j - 1]) / (secs[j] - secs[j - 1])
            lat = a.latitude + f * (b.latitude - a.latitude)
            lon = a.longitude + f * (b.longitude - a.longitude)
            nav = NavFix(lat, lon, _angle_lerp(a.heading, b.heading, f), p.timestamp, "interpolated")
        out.append(replace(p, nav=nav))
    return out


def nav_coverage(pings: Sequence[SonarPing]) -> float:
    if not pings:
        return 0.0
    return sum(p.nav is not None for p in pings) / len(pings)


__all__ = [
    "AttitudeRecord", "ChannelInfo", "EmptyChannelLayout", "EndOfStream", "InsufficientNav",
    "NavFix", "NeedMoreData", "ReaderStats", "Side", "SonarPing", "TruncatedPacket",
    "UnrecognizedFormat", "UnsupportedSampleFormat", "XtfError", "XtfFileHeader", "XtfReader",
    "encode_attitude_packet", "encode_file_header", "encode_ping_packet", "encode_raw_packet",
    "group_by_ping", "header_for", "interpolate_nav", "iter_pings", "nav_coverage",
    "next_packet", "parse_file_header", "read_xtf", "write_xtf",
]
