"""Binary piano rolls: MIDI ingestion, corpus filters, segmentation, rasters.

The corpus convention is fixed: pitches 33..88 (56 rows), 24 ticks per
quarter note, and model-facing segments of 384 columns (16 beats). All
functions are pure; rolls are immutable once constructed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .fsio import atomic_write_bytes
from .smf import MidiError, NoteEvent, parse_smf, write_smf

__all__ = [
    "PITCH_MIN", "PITCH_MAX", "ROWS", "TICKS_PER_QUARTER", "SEGMENT_COLS",
    "MidiError", "NoteEvent", "PianoRoll", "CatalogRecord",
    "parse_midi", "pitch_range_ok", "dedup_catalog", "events_to_roll",
    "segment", "roll_to_midi", "render_raster", "ones_ratio",
    "read_catalog", "save_roll", "load_roll",
]

PITCH_MIN = 33  # A1
PITCH_MAX = 88  # E6
ROWS = PITCH_MAX - PITCH_MIN + 1  # 56
TICKS_PER_QUARTER = 24
SEGMENT_COLS = 384  # 16 beats


@dataclass(frozen=True)
class PianoRoll:
    """Binary pitch x tick matrix; row 0 is the lowest represented pitch."""

    bits: np.ndarray
    pitch_offset: int = PITCH_MIN
    ticks_per_quarter: int = TICKS_PER_QUARTER

    def __post_init__(self):
        arr = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError(f"roll must be 2-D, got shape {arr.shape}")
        if arr.size and arr.max() > 1:
            raise ValueError("roll cells must be 0 or 1")
        if self.pitch_offset + arr.shape[0] - 1 > 127:
            raise ValueError(f"pitch_offset {self.pitch_offset} + {arr.shape[0]} rows exceeds MIDI range")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    def with_bits(self, bits: np.ndarray) -> PianoRoll:
        """Same pitch/tick metadata, new cell contents."""
        return PianoRoll(bits, self.pitch_offset, self.ticks_per_quarter)


@dataclass(frozen=True)
class CatalogRecord:
    """One corpus entry of a (composer, title) to MIDI file mapping."""

    composer: str
    title: str
    file_path: str

    def __post_init__(self):
        if not self.file_path:
            raise ValueError("file_path must be non-empty")


def parse_midi(data: bytes) -> tuple[list[NoteEvent], int]:
    """Note events (onset-sorted, channel-merged) and the source ticks/quarter."""
    return parse_smf(data)


def pitch_range_ok(events: list[NoteEvent]) -> bool:
    """True iff every pitch fits the 33..88 corpus range."""
    return all(PITCH_MIN <= e.pitch <= PITCH_MAX for e in events)


def _normalize(text: str) -> str:
    return " ".join(text.split()).casefold()


def dedup_catalog(records: list[CatalogRecord]) -> list[CatalogRecord]:
    """One record per normalized (composer, title); smallest file_path wins.

    Output is sorted by the normalized key, so the result is independent of
    input order and dedup is idempotent.
    """
    best: dict[tuple[str, str], CatalogRecord] = {}
    for rec in records:
        key = (_normalize(rec.composer), _normalize(rec.title))
        kept = best.get(key)
        if kept is None or rec.file_path < kept.file_path:
            best[key] = rec
    return [best[key] for key in sorted(best)]


def _rescale_tick(tick: int, source_tpq: int) -> int:
    """tick * 24 / source_tpq, rounded half away from zero, in exact ints."""
    scaled = tick * TICKS_PER_QUARTER
    return (2 * scaled + source_tpq) // (2 * source_tpq)


def events_to_roll(events: list[NoteEvent], source_tpq: int) -> PianoRoll:
    """Resample events to the 24-tick grid and rasterize into a 56-row roll.

    Note durations are clamped to at least one roll tick; abutting repeats of
    the same pitch merge into one run.
    """
    if source_tpq < 1:
        raise ValueError(f"source ticks-per-quarter must be >= 1, got {source_tpq}")
    for e in events:
        if not PITCH_MIN <= e.pitch <= PITCH_MAX:
            raise ValueError(f"pitch {e.pitch} outside corpus range {PITCH_MIN}..{PITCH_MAX}")

    spans = []
    cols = 0
    for e in events:
        start = _rescale_tick(e.onset, source_tpq)
        end = max(_rescale_tick(e.onset + e.duration, source_tpq), start + 1)
        spans.append((e.pitch - PITCH_MIN, start, end))
        cols = max(cols, end)

    bits = np.zeros((ROWS, cols), dtype=np.uint8)
    for row, start, end in spans:
        bits[row, start:end] = 1
    return PianoRoll(bits)


def segment(roll: PianoRoll) -> list[PianoRoll]:
    """Split into non-overlapping 384-column windows; the tail is dropped."""
    if roll.rows != ROWS or roll.ticks_per_quarter != TICKS_PER_QUARTER:
        raise ValueError(f"expected a {ROWS}-row, {TICKS_PER_QUARTER}-tick roll")
    count = roll.cols // SEGMENT_COLS
    return [
        roll.with_bits(roll.bits[:, k * SEGMENT_COLS : (k + 1) * SEGMENT_COLS])
        for k in range(count)
    ]


def roll_to_midi(roll: PianoRoll) -> bytes:
    """Encode each maximal horizontal run of 1s as one note in a format-0 SMF."""
    if roll.cols == 0:
        return write_smf([], roll.ticks_per_quarter)
    events = []
    padded = np.zeros((roll.rows, roll.cols + 2), dtype=np.int8)
    padded[:, 1:-1] = roll.bits
    edges = np.diff(padded, axis=1)
    for row in range(roll.rows):
        starts = np.flatnonzero(edges[row] == 1)
        ends = np.flatnonzero(edges[row] == -1)
        for s, e in zip(starts, ends):
            events.append(NoteEvent(roll.pitch_offset + row, int(s), int(e - s)))
    events.sort(key=lambda ev: (ev.onset, ev.pitch))
    return write_smf(events, roll.ticks_per_quarter)


def render_raster(roll: PianoRoll | np.ndarray) -> bytes:
    """P5 graymap of a roll (0 -> black, 1 -> white) or a real-valued matrix.

    One pixel per cell with row 0 at the bottom. Real inputs are min-max
    normalized to 0..255; a constant matrix renders as all-zero.
    """
    if isinstance(roll, PianoRoll):
        gray = roll.bits.astype(np.uint8) * 255
    else:
        m = np.asarray(roll, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError(f"raster input must be 2-D, got shape {m.shape}")
        lo, hi = (m.min(), m.max()) if m.size else (0.0, 0.0)
        if hi > lo:
            gray = np.rint((m - lo) / (hi - lo) * 255).astype(np.uint8)
        else:
            gray = np.zeros(m.shape, dtype=np.uint8)
    h, w = gray.shape
    header = f"P5 {w} {h} 255\n".encode("ascii")
    return header + gray[::-1].tobytes()


def ones_ratio(segments: list[PianoRoll]) -> float:
    """Fraction of 1-cells across all segments (the corpus prior probability)."""
    if not segments:
        raise ValueError("ones_ratio needs at least one segment")
    ones = sum(int(s.bits.sum()) for s in segments)
    cells = sum(s.bits.size for s in segments)
    return ones / cells


# ---------------------------------------------------------------------------
# on-disk formats


def read_catalog(text: str) -> list[CatalogRecord]:
    """Parse a catalog CSV with header columns composer,title,file_path."""
    reader = csv.DictReader(io.StringIO(text))
    required = {"composer", "title", "file_path"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ValueError(f"catalog header must contain {sorted(required)}, got {reader.fieldnames}")
    return [CatalogRecord(row["composer"], row["title"], row["file_path"]) for row in reader]


def save_roll(roll: PianoRoll, path) -> None:
    """Write rows/cols as little-endian u64 then row-major bits, MSB-first packed."""
    header = np.asarray([roll.rows, roll.cols], dtype="<u8").tobytes()
    atomic_write_bytes(path, header + np.packbits(roll.bits.reshape(-1)).tobytes())


def load_roll(path) -> PianoRoll:
    """Inverse of save_roll; metadata reverts to the corpus defaults."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise ValueError(f"roll file too short: {path}")
    rows, cols = (int(x) for x in np.frombuffer(raw[:16], dtype="<u8"))
    packed = np.frombuffer(raw[16:], dtype=np.uint8)
    expected = (rows * cols + 7) // 8
    if packed.size != expected:
        raise ValueError(f"roll file has {packed.size} payload bytes, expected {expected}: {path}")
    bits = np.unpackbits(packed, count=rows * cols).reshape(rows, cols)
    return PianoRoll(bits)
