"""Standard MIDI File reading and writing, format 0/1, metrical division only.

Hand-rolled byte-level codec: variable-length quantities, running status,
meta/sysex skipping, FIFO note-on/off pairing per pitch (channel-merged),
velocity-0 note-ons treated as note-offs, and unterminated notes closed at
end of track. Parse failures carry the byte offset that triggered them.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass


class MidiError(ValueError):
    """Malformed SMF input; offset is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class NoteEvent:
    """One sounding note in absolute ticks at the source resolution."""

    pitch: int
    onset: int
    duration: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0..127")
        if self.onset < 0:
            raise ValueError(f"negative onset {self.onset}")
        if self.duration < 1:
            raise ValueError(f"duration {self.duration} < 1")


def _read_u16(data: bytes, pos: int) -> int:
    return int.from_bytes(data[pos : pos + 2], "big")


def _read_u32(data: bytes, pos: int) -> int:
    return int.from_bytes(data[pos : pos + 4], "big")


def _read_vlq(data: bytes, pos: int, end: int) -> tuple[int, int]:
    """Decode one variable-length quantity; returns (value, next position)."""
    value = 0
    start = pos
    for _ in range(4):  # VLQs are at most 4 bytes (28-bit values)
        if pos >= end:
            raise MidiError("truncated variable-length quantity", start)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiError("variable-length quantity longer than 4 bytes", start)


def _parse_track(data: bytes, pos: int, end: int) -> list[NoteEvent]:
    """Decode one MTrk chunk body into paired note events."""
    tick = 0
    status: int | None = None
    open_notes: dict[int, deque[int]] = defaultdict(deque)  # pitch -> onset FIFO
    notes: list[NoteEvent] = []

    def close(pitch: int, off_tick: int) -> None:
        onsets = open_notes.get(pitch)
        if not onsets:
            return  # stray note-off: ignore
        onset = onsets.popleft()
        notes.append(NoteEvent(pitch, onset, max(off_tick - onset, 1)))

    while pos < end:
        delta, pos = _read_vlq(data, pos, end)
        tick += delta
        if pos >= end:
            raise MidiError("track ends after delta time", pos)
        byte = data[pos]
        if byte >= 0x80:
            pos += 1
            if byte == 0xFF:  # meta event
                if pos >= end:
                    raise MidiError("truncated meta event", pos)
                meta_type = data[pos]
                pos += 1
                length, pos = _read_vlq(data, pos, end)
                pos += length
                status = None
                if meta_type == 0x2F:  # end of track
                    break
                continue
            if byte in (0xF0, 0xF7):  # sysex
                length, pos = _read_vlq(data, pos, end)
                pos += length
                status = None
                continue
            if byte >= 0xF0:
                raise MidiError(f"unsupported status byte 0x{byte:02x}", pos - 1)
            status = byte
        elif status is None:
            raise MidiError("data byte with running status before any status byte", pos)

        kind = status & 0xF0
        n_data = 1 if kind in (0xC0, 0xD0) else 2
        if pos + n_data > end:
            raise MidiError("truncated channel event", pos)
        d0 = data[pos]
        d1 = data[pos + 1] if n_data == 2 else 0
        pos += n_data

        if kind == 0x90 and d1 > 0:
            open_notes[d0].append(tick)
        elif kind == 0x80 or (kind == 0x90 and d1 == 0):
            close(d0, tick)
        # other channel voice messages (aftertouch, CC, program, bend) are skipped

    for pitch, onsets in open_notes.items():
        while onsets:
            close(pitch, tick)
    return notes


def parse_smf(data: bytes) -> tuple[list[NoteEvent], int]:
    """Parse an SMF into (note events sorted by onset, ticks per quarter)."""
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiError("missing MThd header chunk", 0)
    header_len = _read_u32(data, 4)
    if header_len < 6:
        raise MidiError(f"malformed MThd length {header_len}", 4)
    fmt = _read_u16(data, 8)
    n_tracks = _read_u16(data, 10)
    division = _read_u16(data, 12)
    if fmt not in (0, 1):
        raise MidiError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiError("SMPTE division is unsupported", 12)
    if division == 0:
        raise MidiError("zero ticks-per-quarter division", 12)

    events: list[NoteEvent] = []
    pos = 8 + header_len
    seen_tracks = 0
    while pos < len(data) and seen_tracks < n_tracks:
        if pos + 8 > len(data):
            raise MidiError("truncated chunk header", pos)
        chunk_id = data[pos : pos + 4]
        chunk_len = _read_u32(data, pos + 4)
        body_start = pos + 8
        body_end = body_start + chunk_len
        if body_end > len(data):
            raise MidiError(f"chunk length {chunk_len} overruns file", pos + 4)
        if chunk_id == b"MTrk":
            events.extend(_parse_track(data, body_start, body_end))
            seen_tracks += 1
        # alien chunks are skipped per the SMF spec
        pos = body_end

    events.sort(key=lambda e: (e.onset, e.pitch, e.duration))
    return events, division


def _vlq(value: int) -> bytes:
    """Encode a non-negative int as a variable-length quantity."""
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def write_smf(events: list[NoteEvent], ticks_per_quarter: int,
              velocity: int = 80, tempo_us_per_quarter: int = 500_000) -> bytes:
    """Serialize note events as a single-track format-0 SMF.

    One tempo event (default 120 BPM), fixed velocity, channel 0. At equal
    ticks, note-offs are written before note-ons.
    """
    messages: list[tuple[int, int, bytes]] = []  # (tick, off-first order, bytes)
    for e in events:
        messages.append((e.onset, 1, bytes((0x90, e.pitch, velocity))))
        messages.append((e.onset + e.duration, 0, bytes((0x80, e.pitch, 0))))
    messages.sort(key=lambda m: (m[0], m[1], m[2]))

    body = bytearray()
    body += _vlq(0) + bytes((0xFF, 0x51, 0x03)) + tempo_us_per_quarter.to_bytes(3, "big")
    tick = 0
    for abs_tick, _, msg in messages:
        body += _vlq(abs_tick - tick) + msg
        tick = abs_tick
    body += _vlq(0) + bytes((0xFF, 0x2F, 0x00))

    out = bytearray(b"MThd")
    out += (6).to_bytes(4, "big")
    out += (0).to_bytes(2, "big") + (1).to_bytes(2, "big") + ticks_per_quarter.to_bytes(2, "big")
    out += b"MTrk" + len(body).to_bytes(4, "big") + body
    return bytes(out)
