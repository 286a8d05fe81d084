"""In-memory score model: pitches, timed events, parts and scores.

Durations and offsets are :class:`fractions.Fraction` quarter-lengths so
triplets and dotted values stay exact through parsing and serialization.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .. import theory

NOTE = "note"
CHORD = "chord"
REST = "rest"


@dataclass(frozen=True)
class Pitch:
    step: str
    alter: int
    octave: int

    def __post_init__(self):
        if self.step not in theory.LETTER_SEMITONES:
            raise ValueError(f"invalid step {self.step!r}")
        if not -2 <= self.alter <= 2:
            raise ValueError(f"alter {self.alter} outside -2..2")
        if not 0 <= self.midi <= 127:
            raise ValueError(f"{self.name} is outside the midi range 0-127")

    @property
    def midi(self):
        return theory.midi_number(self.step, self.alter, self.octave)

    @property
    def pitch_class(self):
        return self.midi % 12

    @property
    def name(self):
        return theory.pitch_name(self.step, self.alter, self.octave)

    @classmethod
    def from_name(cls, name):
        return cls(*theory.parse_pitch_name(name))

    @classmethod
    def from_midi(cls, midi, alter=0):
        return cls(*theory.spell_midi(midi, alter))

    def transpose_octaves(self, n):
        return Pitch(self.step, self.alter, self.octave + n)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class NoteEvent:
    kind: str
    pitches: tuple
    duration: Fraction
    offset: Fraction = Fraction(0)
    part_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pitches", tuple(self.pitches))
        object.__setattr__(self, "duration", Fraction(self.duration))
        object.__setattr__(self, "offset", Fraction(self.offset))
        n = len(self.pitches)
        expected = {REST: n == 0, NOTE: n == 1, CHORD: n >= 2}
        if self.kind not in expected:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not expected[self.kind]:
            raise ValueError(f"{self.kind} event cannot have {n} pitches")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.offset < 0:
            raise ValueError(f"offset must be non-negative, got {self.offset}")

    @classmethod
    def from_pitches(cls, pitches, duration, offset=0, part_index=0):
        pitches = tuple(sorted(pitches, key=lambda p: (p.midi, p.name)))
        kind = REST if not pitches else NOTE if len(pitches) == 1 else CHORD
        return cls(kind, pitches, duration, offset, part_index)

    @property
    def is_rest(self):
        return self.kind == REST

    @property
    def end(self):
        return self.offset + self.duration

    @property
    def top_midi(self):
        return max(p.midi for p in self.pitches) if self.pitches else None

    def sort_key(self):
        low = min((p.midi for p in self.pitches), default=-1)
        return (self.offset, low, self.duration, tuple(p.name for p in self.pitches))


@dataclass
class Part:
    name: str
    events: list = field(default_factory=list)

    @property
    def end(self):
        return max((e.end for e in self.events), default=Fraction(0))


@dataclass
class Score:
    parts: list = field(default_factory=list)
    key_fifths: int = 0
    time_signature: tuple = (4, 4)
    tempo_bpm: Optional[int] = None
    warnings: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        if not -7 <= self.key_fifths <= 7:
            raise ValueError(f"key_fifths {self.key_fifths} outside -7..7")
        self.time_signature = tuple(self.time_signature)

    @property
    def length(self):
        return max((p.end for p in self.parts), default=Fraction(0))

    def part_names(self):
        return [p.name for p in self.parts]

    def find_part(self, name):
        """Return the part whose name matches ``name`` case-insensitively, or None."""
        wanted = name.casefold()
        for part in self.parts:
            if part.name.casefold() == wanted:
                return part
        return None
