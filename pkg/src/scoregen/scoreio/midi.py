"""Standard MIDI File (format 1) writer.

One tempo/meta track followed by one track per part. Channel 9 is kept
free for percussion, which leaves 15 melodic channels. All notes use the
same velocity because generated scores carry no dynamics.
"""

import struct

from ..errors import CapacityError, PitchRangeError, SerializationError

TICKS_PER_QUARTER = 480
VELOCITY = 64
DEFAULT_TEMPO_BPM = 120
CHANNELS = [c for c in range(16) if c != 9]


def _vlq(value):
    """Encode a non-negative integer as a MIDI variable-length quantity."""
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def _tick(value, what):
    t = value * TICKS_PER_QUARTER
    if t.denominator != 1:
        raise SerializationError(f"{what}: {value} quarter-lengths is not a whole tick")
    return int(t)


def _meta(kind, payload):
    return b"\xff" + bytes([kind]) + _vlq(len(payload)) + payload


def _track_chunk(events, end_tick):
    """``events`` is a list of (tick, order, raw bytes); delta-encode them.

    Channel messages use running status; meta events cancel it.
    """
    body = bytearray()
    now = 0
    running = None
    for tick, _, raw in sorted(events, key=lambda e: (e[0], e[1])):
        body += _vlq(tick - now)
        if raw[0] == 0xFF:
            running = None
            body += raw
        elif raw[0] == running:
            body += raw[1:]
        else:
            running = raw[0]
            body += raw
        now = tick
    body += _vlq(end_tick - now) + _meta(0x2F, b"")
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def _meta_track(score, end_tick):
    events = []
    bpm = score.tempo_bpm or DEFAULT_TEMPO_BPM
    events.append((0, (0,), _meta(0x51, (60_000_000 // bpm).to_bytes(3, "big"))))
    num, den = score.time_signature
    if den & (den - 1) or den <= 0:
        raise SerializationError(f"time signature denominator {den} is not a power of two")
    events.append((0, (1,), _meta(0x58, bytes([num, den.bit_length() - 1, 24, 8]))))
    events.append((0, (2,), _meta(0x59, struct.pack(">bB", score.key_fifths, 0))))
    return _track_chunk(events, end_tick)


def _part_track(part, channel, end_tick):
    events = [(0, (0,), _meta(0x03, part.name.encode("utf-8")))]
    for e in part.events:
        if e.is_rest:
            continue
        where = f"part {part.name!r}, event at offset {e.offset}"
        on, off = _tick(e.offset, where), _tick(e.end, where)
        for p in e.pitches:
            if not 0 <= p.midi <= 127:
                raise PitchRangeError(f"{where}: midi pitch {p.midi} outside 0-127")
            # At equal ticks note-offs go first so repeated pitches re-trigger.
            events.append((off, (1, p.midi), bytes([0x80 | channel, p.midi, VELOCITY])))
            events.append((on, (2, p.midi), bytes([0x90 | channel, p.midi, VELOCITY])))
    return _track_chunk(events, end_tick)


def write_midi(score):
    """Return the Standard MIDI File bytes for ``score``."""
    if len(score.parts) > len(CHANNELS):
        raise CapacityError(
            f"{len(score.parts)} parts exceed the {len(CHANNELS)} available melodic channels")
    end_tick = _tick(score.length, "score length")
    tracks = [_meta_track(score, end_tick)]
    for part, channel in zip(score.parts, CHANNELS):
        tracks.append(_part_track(part, channel, end_tick))
    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(tracks), TICKS_PER_QUARTER)
    return header + b"".join(tracks)
