"""Roll construction, corpus filters, segmentation, MIDI round trips, raster
and roll-file formats. Grid facts are pinned by hand-computed cases."""

from __future__ import annotations

import numpy as np
import pytest

import binroll as br
from helpers import music_like_segment


# ---------------------------------------------------------------------------
# PianoRoll container


def test_roll_rejects_non_binary_cells():
    with pytest.raises(ValueError, match="0 or 1"):
        br.PianoRoll(np.array([[0, 2]], dtype=np.uint8))


def test_roll_rejects_rows_beyond_midi_pitch_range():
    with pytest.raises(ValueError, match="MIDI range"):
        br.PianoRoll(np.zeros((56, 4), dtype=np.uint8), pitch_offset=100)


def test_roll_bits_are_read_only():
    roll = br.PianoRoll(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        roll.bits[0, 0] = 1


def test_with_bits_keeps_metadata():
    roll = br.PianoRoll(np.zeros((2, 3), dtype=np.uint8), pitch_offset=40,
                        ticks_per_quarter=12)
    other = roll.with_bits(np.ones((2, 3), dtype=np.uint8))
    assert other.pitch_offset == 40
    assert other.ticks_per_quarter == 12
    assert other.bits.all()


# ---------------------------------------------------------------------------
# events_to_roll


def test_whole_note_at_lowest_pitch_fills_first_row():
    roll = br.events_to_roll([br.NoteEvent(33, 0, 480)], source_tpq=480)
    assert roll.rows == 56 and roll.cols == 24
    assert roll.bits[0].all()
    assert roll.bits[1:].sum() == 0


def test_subtick_note_lands_on_single_rounded_cell():
    # onset 10/480 quarter = 0.5 roll ticks, rounds half away from zero to 1;
    # the 5-tick duration rounds to zero length and clamps to one cell
    roll = br.events_to_roll([br.NoteEvent(60, 10, 5)], source_tpq=480)
    assert roll.cols == 2
    assert roll.bits.sum() == 1
    assert roll.bits[60 - 33, 1] == 1


def test_rescaling_rounds_half_away_from_zero():
    # tpq 48 halves every tick count: onset 1 -> 0.5 -> 1, onset 3 -> 1.5 -> 2
    roll = br.events_to_roll([br.NoteEvent(40, 1, 2), br.NoteEvent(50, 3, 4)],
                             source_tpq=48)
    assert np.flatnonzero(roll.bits[40 - 33]).tolist() == [1]
    assert np.flatnonzero(roll.bits[50 - 33]).tolist() == [2, 3]


def test_empty_event_list_gives_zero_width_roll():
    roll = br.events_to_roll([], source_tpq=480)
    assert roll.rows == 56 and roll.cols == 0


def test_abutting_same_pitch_repeats_merge_into_one_run():
    events = [br.NoteEvent(40, 0, 10), br.NoteEvent(40, 10, 10)]
    roll = br.events_to_roll(events, source_tpq=24)
    back, _ = br.parse_midi(br.roll_to_midi(roll))
    assert back == [br.NoteEvent(40, 0, 20)]


def test_events_to_roll_input_validation():
    with pytest.raises(ValueError, match="outside corpus range"):
        br.events_to_roll([br.NoteEvent(89, 0, 10)], source_tpq=24)
    with pytest.raises(ValueError, match="ticks-per-quarter"):
        br.events_to_roll([], source_tpq=0)


# ---------------------------------------------------------------------------
# corpus filters


def test_pitch_range_ok_boundaries():
    ok = [br.NoteEvent(33, 0, 1), br.NoteEvent(60, 0, 1), br.NoteEvent(88, 0, 1)]
    assert br.pitch_range_ok(ok)
    assert not br.pitch_range_ok(ok + [br.NoteEvent(89, 0, 1)])
    assert not br.pitch_range_ok([br.NoteEvent(32, 0, 1)])
    assert br.pitch_range_ok([])


def test_dedup_normalizes_case_and_whitespace():
    a = br.CatalogRecord("Bach,  J. S.", "Prelude In C", "z.mid")
    b = br.CatalogRecord("bach, j. s.", "prelude  in c", "a.mid")
    kept = br.dedup_catalog([a, b])
    assert kept == [b]  # smallest file path wins


def test_dedup_is_order_insensitive_and_idempotent():
    records = [
        br.CatalogRecord("X", "One", "1.mid"),
        br.CatalogRecord("X", "one", "0.mid"),
        br.CatalogRecord("Y", "Two", "2.mid"),
    ]
    forward = br.dedup_catalog(records)
    assert br.dedup_catalog(records[::-1]) == forward
    assert br.dedup_catalog(forward) == forward
    assert {r.file_path for r in forward} == {"0.mid", "2.mid"}


def test_dedup_empty_catalog():
    assert br.dedup_catalog([]) == []


def test_read_catalog_and_header_validation():
    text = "composer,title,file_path\nBach,Invention 1,bach/inv1.mid\n"
    records = br.read_catalog(text)
    assert records == [br.CatalogRecord("Bach", "Invention 1", "bach/inv1.mid")]
    with pytest.raises(ValueError, match="catalog header"):
        br.read_catalog("composer,file_path\nBach,x.mid\n")
    with pytest.raises(ValueError, match="catalog header"):
        br.read_catalog("")


# ---------------------------------------------------------------------------
# segmentation


def test_segment_window_counts():
    def roll_of_width(cols):
        return br.PianoRoll(np.zeros((56, cols), dtype=np.uint8))

    assert len(br.segment(roll_of_width(800))) == 2
    assert len(br.segment(roll_of_width(384))) == 1
    assert len(br.segment(roll_of_width(383))) == 0


def test_segment_windows_are_consecutive_and_aligned():
    rng = np.random.default_rng(5)
    bits = (rng.random((56, 900)) < 0.1).astype(np.uint8)
    roll = br.PianoRoll(bits)
    segs = br.segment(roll)
    assert len(segs) == 2
    assert np.array_equal(segs[0].bits, bits[:, :384])
    assert np.array_equal(segs[1].bits, bits[:, 384:768])


def test_segment_rejects_foreign_grids():
    with pytest.raises(ValueError):
        br.segment(br.PianoRoll(np.zeros((12, 400), dtype=np.uint8)))
    with pytest.raises(ValueError):
        br.segment(br.PianoRoll(np.zeros((56, 400), dtype=np.uint8),
                                ticks_per_quarter=480))


# ---------------------------------------------------------------------------
# roll_to_midi


def test_run_of_ones_becomes_one_note():
    bits = np.zeros((56, 30), dtype=np.uint8)
    bits[27, 0:24] = 1
    events, tpq = br.parse_midi(br.roll_to_midi(br.PianoRoll(bits)))
    assert tpq == 24
    assert events == [br.NoteEvent(60, 0, 24)]


def test_all_zero_roll_yields_no_notes():
    data = br.roll_to_midi(br.PianoRoll(np.zeros((56, 10), dtype=np.uint8)))
    events, _ = br.parse_midi(data)
    assert events == []


def test_separated_runs_become_separate_notes():
    bits = np.zeros((56, 12), dtype=np.uint8)
    bits[0, 0:5] = 1
    bits[0, 6:10] = 1
    events, _ = br.parse_midi(br.roll_to_midi(br.PianoRoll(bits)))
    assert events == [br.NoteEvent(33, 0, 5), br.NoteEvent(33, 6, 4)]


def test_zero_width_roll_round_trips_to_empty_file():
    events, _ = br.parse_midi(br.roll_to_midi(br.PianoRoll(np.zeros((56, 0), dtype=np.uint8))))
    assert events == []


def test_roll_midi_roll_round_trip_is_bit_exact():
    rng = np.random.default_rng(77)
    for _ in range(5):
        roll = music_like_segment(rng)
        events, tpq = br.parse_midi(br.roll_to_midi(roll))
        back = br.events_to_roll(events, tpq)
        padded = np.zeros((56, 384), dtype=np.uint8)
        padded[:, : back.cols] = back.bits
        assert np.array_equal(padded, roll.bits)


# ---------------------------------------------------------------------------
# rasters


def test_raster_exact_bytes_for_two_by_two():
    roll = br.PianoRoll(np.array([[1, 0], [0, 0]], dtype=np.uint8))
    data = br.render_raster(roll)
    # row 0 renders at the bottom of the image
    assert data == b"P5 2 2 255\n" + bytes([0, 0, 255, 0])


def test_raster_real_matrix_min_max_normalizes():
    data = br.render_raster(np.array([[0.0, 1.0], [2.0, 3.0]]))
    assert data == b"P5 2 2 255\n" + bytes([170, 255, 0, 85])


def test_raster_constant_matrix_renders_black():
    data = br.render_raster(np.full((2, 3), 7.5))
    assert data == b"P5 3 2 255\n" + bytes(6)


def test_raster_rejects_non_2d_real_input():
    with pytest.raises(ValueError):
        br.render_raster(np.zeros((2, 2, 2)))


# ---------------------------------------------------------------------------
# corpus statistics


def test_ones_ratio_hand_counts():
    ones = br.PianoRoll(np.ones((2, 2), dtype=np.uint8))
    zeros = br.PianoRoll(np.zeros((2, 2), dtype=np.uint8))
    mixed = br.PianoRoll(np.array([[1, 1], [1, 0]], dtype=np.uint8))
    assert br.ones_ratio([ones]) == 1.0
    assert br.ones_ratio([zeros]) == 0.0
    assert br.ones_ratio([mixed, zeros]) == 3 / 8
    with pytest.raises(ValueError):
        br.ones_ratio([])


# ---------------------------------------------------------------------------
# roll files


def test_save_load_roll_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    bits = (rng.random((56, 384)) < 0.05).astype(np.uint8)
    path = tmp_path / "seg.roll"
    br.save_roll(br.PianoRoll(bits), path)
    back = br.load_roll(path)
    assert np.array_equal(back.bits, bits)
    assert back.pitch_offset == 33 and back.ticks_per_quarter == 24


def test_save_load_roll_handles_non_byte_aligned_sizes(tmp_path):
    bits = np.array([[1, 0, 1], [0, 1, 1], [1, 1, 0]], dtype=np.uint8)
    path = tmp_path / "odd.roll"
    br.save_roll(br.PianoRoll(bits), path)
    assert np.array_equal(br.load_roll(path).bits, bits)
    assert path.stat().st_size == 16 + 2  # 9 bits pack into 2 bytes


def test_load_roll_rejects_short_and_mismatched_files(tmp_path):
    short = tmp_path / "short.roll"
    short.write_bytes(b"\x01\x02\x03")
    with pytest.raises(ValueError, match="too short"):
        br.load_roll(short)
    bad = tmp_path / "bad.roll"
    br.save_roll(br.PianoRoll(np.zeros((4, 4), dtype=np.uint8)), bad)
    bad.write_bytes(bad.read_bytes() + b"\x00")
    with pytest.raises(ValueError, match="payload bytes"):
        br.load_roll(bad)
