"""From note events to MIDI bytes to a binary piano roll and back.

Builds a short two-voice phrase, serializes it to a standard MIDI file,
parses those bytes with the package's own reader, rasterizes the events
onto the 56 x N tick grid, and checks that regenerating MIDI from the
roll reproduces the same grid bit for bit. Artifacts land in demos/out/.
"""

from pathlib import Path

import numpy as np

import binroll as br

OUT = Path(__file__).parent / "out"


def phrase() -> list[br.NoteEvent]:
    """A bass line in quarters under a melody in eighths (24 ticks/quarter)."""
    events = []
    bass = [36, 43, 41, 36]
    for k, pitch in enumerate(bass):
        events.append(br.NoteEvent(pitch, onset=k * 24, duration=22))
    melody = [60, 64, 67, 72, 67, 64, 60, 55]
    for k, pitch in enumerate(melody):
        events.append(br.NoteEvent(pitch, onset=k * 12, duration=10))
    return events


def main() -> None:
    OUT.mkdir(exist_ok=True)
    events = phrase()
    print(f"phrase: {len(events)} notes, pitches "
          f"{min(e.pitch for e in events)}..{max(e.pitch for e in events)}")

    smf_bytes = br.write_smf(events, br.TICKS_PER_QUARTER)
    (OUT / "phrase.mid").write_bytes(smf_bytes)
    print(f"wrote {len(smf_bytes)} bytes of MIDI to {OUT / 'phrase.mid'}")

    parsed, tpq = br.parse_midi(smf_bytes)
    print(f"parsed back: {len(parsed)} notes at {tpq} ticks/quarter")

    roll = br.events_to_roll(parsed, tpq)
    rows, cols = roll.bits.shape
    print(f"rasterized: {rows} pitches x {cols} ticks, "
          f"{int(roll.bits.sum())} active cells")
    (OUT / "phrase.pgm").write_bytes(br.render_raster(roll))

    again, tpq2 = br.parse_midi(br.roll_to_midi(roll))
    roll2 = br.events_to_roll(again, tpq2)
    exact = np.array_equal(roll.bits, roll2.bits)
    print(f"roll -> MIDI -> roll identical: {exact}")
    assert exact


if __name__ == "__main__":
    main()
