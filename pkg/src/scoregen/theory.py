"""Pitch spelling and key/scale helpers."""

import re

LETTER_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
NATURAL_LETTERS = {v: k for k, v in LETTER_SEMITONES.items()}
MAJOR_STEPS = (0, 2, 4, 5, 7, 9, 11)

# Eb major, the key forced on generated scores.
EB_MAJOR = frozenset({3, 5, 7, 8, 10, 0, 2})

_NAME_RE = re.compile(r"^([A-G])(#{1,2}|b{1,2})?(-?\d+)$")


def accidental_text(alter):
    if alter > 0:
        return "#" * alter
    return "b" * -alter


def pitch_name(step, alter, octave):
    return f"{step}{accidental_text(alter)}{octave}"


def parse_pitch_name(name):
    """Split a spelling such as ``"Eb4"`` or ``"F#-1"`` into (step, alter, octave)."""
    m = _NAME_RE.match(name)
    if m is None:
        raise ValueError(f"not a pitch name: {name!r}")
    step, acc, octave = m.groups()
    acc = acc or ""
    alter = len(acc) if acc.startswith("#") else -len(acc)
    return step, alter, int(octave)


def midi_number(step, alter, octave):
    return 12 * (octave + 1) + LETTER_SEMITONES[step] + alter


def spell_midi(midi, alter=0):
    """Inverse of :func:`midi_number` for a given alteration."""
    natural = midi - alter
    pc = natural % 12
    if pc not in NATURAL_LETTERS:
        raise ValueError(f"midi {midi} cannot be spelled with alter {alter}")
    return NATURAL_LETTERS[pc], alter, natural // 12 - 1


def major_scale(key_fifths):
    """Pitch classes of the major key with ``key_fifths`` sharps (negative: flats)."""
    tonic = (7 * key_fifths) % 12
    return frozenset((tonic + s) % 12 for s in MAJOR_STEPS)
