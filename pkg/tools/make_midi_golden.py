"""Regenerate tests/data/*.golden.mid with mido, independently of scoregen.midi.

Run once; the outputs are committed. Requires ``pip install mido``.
Only the parsed score model is shared with the package under test.
"""

import sys
from pathlib import Path

import mido

from scoregen.scoreio import read_score

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"
KEYS = {-7: "Cb", -6: "Gb", -5: "Db", -4: "Ab", -3: "Eb", -2: "Bb", -1: "F", 0: "C",
        1: "G", 2: "D", 3: "A", 4: "E", 5: "B", 6: "F#", 7: "C#"}


def build(score):
    mid = mido.MidiFile(type=1, ticks_per_beat=480)
    end = int(score.length * 480)
    meta = mido.MidiTrack()
    meta.append(mido.MetaMessage("set_tempo", tempo=mido.bpm2tempo(score.tempo_bpm or 120), time=0))
    num, den = score.time_signature
    meta.append(mido.MetaMessage("time_signature", numerator=num, denominator=den,
                                 clocks_per_click=24, notated_32nd_notes_per_beat=8, time=0))
    meta.append(mido.MetaMessage("key_signature", key=KEYS[score.key_fifths], time=0))
    meta.append(mido.MetaMessage("end_of_track", time=end))
    mid.tracks.append(meta)
    channels = [c for c in range(16) if c != 9]
    for part, ch in zip(score.parts, channels):
        timed = []
        for e in part.events:
            for p in e.pitches:
                timed.append((int(e.offset * 480), 1, p.midi, "note_on"))
                timed.append((int(e.end * 480), 0, p.midi, "note_off"))
        timed.sort()
        track = mido.MidiTrack()
        track.append(mido.MetaMessage("track_name", name=part.name, time=0))
        now = 0
        for tick, _, note, kind in timed:
            track.append(mido.Message(kind, channel=ch, note=note, velocity=64, time=tick - now))
            now = tick
        track.append(mido.MetaMessage("end_of_track", time=end - now))
        mid.tracks.append(track)
    return mid


def dump(mid):
    """Human-readable message listing with absolute ticks."""
    lines = [f"type {mid.type} tpq {mid.ticks_per_beat} tracks {len(mid.tracks)}"]
    for i, track in enumerate(mid.tracks):
        tick = 0
        for msg in track:
            tick += msg.time
            d = msg.dict()
            d.pop("time")
            fields = " ".join(f"{k}={d[k]}" for k in sorted(d))
            lines.append(f"{i} {tick} {fields}")
    return "\n".join(lines) + "\n"


def main(names):
    for name in names:
        score = read_score(DATA / f"{name}.musicxml")
        mid = build(score)
        mid.save(DATA / f"{name}.golden.mid")
        (DATA / f"{name}.golden.txt").write_text(dump(mid))
        print("wrote", name)


if __name__ == "__main__":
    main(sys.argv[1:] or ["two_part", "ode_to_joy"])
