"""Tokenization of parsed scores and construction of training windows.

A token is a (name, duration[, instrument]) tuple. Names are pitch
spellings (``"E4"``), ``"rest"``, or dot-joined chord spellings in
ascending pitch order (``"C4.E4.G4"``).
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (
    CorruptEncodingError,
    DataError,
    EmptyCorpusError,
    InsufficientDataError,
    UnknownInstrumentError,
    ValidationError,
)
from .scoreio.model import NoteEvent, Pitch

REST_NAME = "rest"


@dataclass(frozen=True)
class Token:
    name: str
    duration: Fraction
    instrument: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "duration", Fraction(self.duration))
        if self.duration <= 0:
            raise ValueError(f"token duration must be positive, got {self.duration}")
        if self.name != REST_NAME:
            midis = [p.midi for p in self.pitches]
            if any(a >= b for a, b in zip(midis, midis[1:])):
                raise ValueError(f"chord spelling {self.name!r} is not in ascending pitch order")

    @classmethod
    def from_event(cls, event, instrument=None):
        if event.is_rest:
            return cls(REST_NAME, event.duration, instrument)
        seen = {}
        for p in event.pitches:
            seen.setdefault(p.midi, p)
        name = ".".join(seen[m].name for m in sorted(seen))
        return cls(name, event.duration, instrument)

    @property
    def is_rest(self):
        return self.name == REST_NAME

    @property
    def pitches(self):
        if self.is_rest:
            return ()
        return tuple(Pitch.from_name(n) for n in self.name.split("."))

    @property
    def is_chord(self):
        return "." in self.name

    @property
    def pitch_classes(self):
        return {p.pitch_class for p in self.pitches}

    def sort_key(self):
        return (self.name, self.duration, self.instrument or "")

    def to_event(self, offset=Fraction(0), part_index=0):
        return NoteEvent.from_pitches(self.pitches, self.duration, offset, part_index)

    def with_name(self, name):
        return Token(name, self.duration, self.instrument)

    def with_duration(self, duration):
        return Token(self.name, duration, self.instrument)

    def __str__(self):
        fields = [self.name, _fraction_text(self.duration)]
        if self.instrument is not None:
            fields.append(self.instrument)
        return "(" + ", ".join(fields) + ")"


def _fraction_text(value):
    return str(Fraction(value))


def _resolve_part(score, name):
    part = score.find_part(name)
    if part is None:
        raise UnknownInstrumentError(name, score.part_names())
    return part


def extract_horizontal(score, instrument_name):
    """Tokens of one instrument's part in time order, without instrument tags."""
    part = _resolve_part(score, instrument_name)
    return [Token.from_event(e) for e in sorted(part.events, key=NoteEvent.sort_key)]


def extract_vertical(score, instrument_names):
    """Interleave several parts into one time-ordered, instrument-tagged stream.

    Simultaneous events are ordered by the position of their instrument in
    ``instrument_names`` and then by lowest pitch.
    """
    keyed = []
    for rank, name in enumerate(instrument_names):
        part = _resolve_part(score, name)
        for e in part.events:
            low = min((p.midi for p in e.pitches), default=-1)
            keyed.append(((e.offset, rank, low), Token.from_event(e, instrument=name)))
    keyed.sort(key=lambda item: item[0])
    offsets = [k[0] for k, _ in keyed]
    if any(a > b for a, b in zip(offsets, offsets[1:])):
        raise DataError("vertical extraction produced out-of-order offsets")
    return [tok for _, tok in keyed]


class Vocabulary:
    """Dense bijection between distinct tokens and integer indices."""

    def __init__(self, tokens):
        self.tokens = tuple(sorted(set(tokens), key=Token.sort_key))
        self.forward = {t: i for i, t in enumerate(self.tokens)}

    @classmethod
    def build(cls, tokens):
        tokens = list(tokens)
        if not tokens:
            raise EmptyCorpusError("cannot build a vocabulary from an empty token list")
        return cls(tokens)

    @property
    def size(self):
        return len(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.forward

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def encode(self, token):
        try:
            return self.forward[token]
        except KeyError:
            raise CorruptEncodingError(f"token {token} is not in the vocabulary") from None

    def decode(self, index):
        if not 0 <= index < len(self.tokens):
            raise CorruptEncodingError(f"index {index} outside vocabulary of size {self.size}")
        return self.tokens[index]

    def encode_all(self, tokens):
        return [self.encode(t) for t in tokens]

    def decode_all(self, indices):
        return [self.decode(i) for i in indices]

    @property
    def instruments(self):
        """Instrument tags in order of first appearance in the sorted vocabulary."""
        return list(dict.fromkeys(t.instrument for t in self.tokens if t.instrument is not None))

    def dumps(self):
        lines = []
        for i, t in enumerate(self.tokens):
            fields = [str(i), t.name, _fraction_text(t.duration)]
            if t.instrument is not None:
                fields.append(t.instrument)
            lines.append("\t".join(fields))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        tokens = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) not in (3, 4):
                raise DataError(f"vocabulary line {lineno}: expected 3 or 4 fields")
            index, token = int(fields[0]), _token_from_fields(fields[1:], lineno)
            if index != len(tokens):
                raise CorruptEncodingError(f"vocabulary line {lineno}: index {index} out of sequence")
            tokens.append(token)
        vocab = cls.build(tokens)
        if list(vocab.tokens) != tokens:
            raise CorruptEncodingError("vocabulary file is not in canonical token order")
        return vocab


build_vocabulary = Vocabulary.build


def _token_from_fields(fields, lineno):
    try:
        name, duration = fields[0], Fraction(fields[1])
        instrument = fields[2] if len(fields) > 2 else None
        return Token(name, duration, instrument)
    except (ValueError, ZeroDivisionError) as exc:
        raise DataError(f"line {lineno}: {exc}") from exc


def dumps_tokens(tokens):
    lines = []
    for t in tokens:
        fields = [t.name, _fraction_text(t.duration)]
        if t.instrument is not None:
            fields.append(t.instrument)
        lines.append("\t".join(fields))
    return "".join(line + "\n" for line in lines)


def loads_tokens(text):
    tokens = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) not in (2, 3):
            raise DataError(f"token line {lineno}: expected 2 or 3 fields")
        tokens.append(_token_from_fields(fields, lineno))
    return tokens


def make_windows(encoded, sequence_length):
    """Stride-1 (input window, next index) pairs; duplicate windows are kept."""
    if sequence_length < 1:
        raise ValidationError(f"sequence length must be >= 1, got {sequence_length}")
    encoded = list(encoded)
    if len(encoded) < sequence_length + 1:
        raise InsufficientDataError(len(encoded), sequence_length + 1)
    return [
        (tuple(encoded[i:i + sequence_length]), encoded[i + sequence_length])
        for i in range(len(encoded) - sequence_length)
    ]


@dataclass(frozen=True, eq=False)
class WindowDataset:
    inputs: np.ndarray
    targets: np.ndarray
    sequence_length: int
    windows: np.ndarray
    target_indices: np.ndarray
    vocabulary: Optional[Vocabulary] = field(default=None, compare=False)

    @property
    def vocab_size(self):
        return self.targets.shape[1]

    def __len__(self):
        return self.inputs.shape[0]


def normalize(windows, vocab_size, vocabulary=None):
    """Scale indices to ``index / vocab_size`` and one-hot encode the targets."""
    if vocab_size < 1:
        raise ValidationError(f"vocabulary size must be >= 1, got {vocab_size}")
    if not windows:
        raise EmptyCorpusError("no windows to normalize")
    seqs = np.array([w for w, _ in windows], dtype=np.int64)
    targets = np.array([t for _, t in windows], dtype=np.int64)
    bad = (seqs < 0) | (seqs >= vocab_size)
    if bad.any() or ((targets < 0) | (targets >= vocab_size)).any():
        raise CorruptEncodingError(f"encoded index outside 0..{vocab_size - 1}")
    inputs = (seqs / vocab_size)[:, :, None]
    onehot = np.zeros((len(targets), vocab_size))
    onehot[np.arange(len(targets)), targets] = 1.0
    for arr in (inputs, onehot, seqs, targets):
        arr.flags.writeable = False
    return WindowDataset(inputs, onehot, seqs.shape[1], seqs, targets, vocabulary)


def build_dataset(tokens, sequence_length, vocabulary=None):
    """Vocabulary + windows + normalization in one step."""
    vocabulary = vocabulary or Vocabulary.build(tokens)
    windows = make_windows(vocabulary.encode_all(tokens), sequence_length)
    return normalize(windows, vocabulary.size, vocabulary)
