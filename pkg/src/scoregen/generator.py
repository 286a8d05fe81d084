"""Constrained autoregressive generation of new token streams.

Each step ranks the whole vocabulary by predicted probability and takes
the first candidate that passes the duration floor and (optionally) the
scale filter. The chosen note is then pulled into the octave nearest the
previous note, and consecutive rests are merged.
"""

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import theory
from .corpus import Token
from .errors import DataError, ShapeError, ValidationError
from .neural.lstm import forward
from .scoreio.model import Part, Score

DEFAULT_KEY_FIFTHS = -3
DEFAULT_TIME = (6, 8)


@dataclass(frozen=True)
class GenerationConstraints:
    target_duration: Fraction
    min_duration: Fraction = Fraction(1, 2)
    scale_pitch_classes: frozenset = theory.EB_MAJOR
    enforce_scale: bool = True
    octave_span_semitones: int = 12
    merge_rests: bool = True

    def __post_init__(self):
        object.__setattr__(self, "target_duration", Fraction(self.target_duration))
        object.__setattr__(self, "min_duration", Fraction(self.min_duration))
        object.__setattr__(self, "scale_pitch_classes",
                           frozenset(int(pc) % 12 for pc in self.scale_pitch_classes))
        if self.target_duration <= 0:
            raise ValidationError("target duration must be positive")
        if self.min_duration <= 0:
            raise ValidationError("minimum duration must be positive")
        if self.enforce_scale and not self.scale_pitch_classes:
            raise ValidationError("scale filter enabled with an empty scale")
        if self.octave_span_semitones < 1:
            raise ValidationError("octave span must be >= 1 semitone")


class Pattern:
    """Fixed-length rolling window of vocabulary indices fed to the model."""

    def __init__(self, indices):
        self._items = deque(int(i) for i in indices)
        self.length = len(self._items)
        if self.length < 1:
            raise ValidationError("pattern must hold at least one index")

    def push(self, index):
        self._items.append(int(index))
        self._items.popleft()

    @property
    def indices(self):
        return tuple(self._items)

    def __len__(self):
        return len(self._items)

    def normalized(self, vocab_size):
        return np.array(self._items, dtype=np.float64) / vocab_size


@dataclass(frozen=True)
class Selection:
    token: Token
    index: int
    predicted: Token
    merged: bool = False
    fallback: Optional[str] = None   # None, "scale" or "duration"


@dataclass
class GeneratedEvent:
    token: Token
    predicted: Token
    fallback: Optional[str] = None
    merges: int = 0


@dataclass
class GenerationTrace:
    events: list = field(default_factory=list)
    patterns_seen: int = 0

    @property
    def tokens(self):
        return [e.token for e in self.events]

    @property
    def fallback_count(self):
        return sum(1 for e in self.events if e.fallback is not None)


def select_seed(dataset, rng):
    """Pick one training window uniformly at random as the starting pattern."""
    if len(dataset) == 0:
        raise DataError("cannot pick a seed from an empty dataset")
    return Pattern(dataset.windows[int(rng.integers(len(dataset)))])


def predict_candidates(weights, pattern):
    """All vocabulary indices with their probabilities, most likely first.

    Equal probabilities keep ascending index order.
    """
    n = weights.config.vocab_size
    probs = forward(weights, pattern.normalized(n), mode="infer")
    order = sorted(range(n), key=lambda i: (-probs[i], i))
    return [(i, float(probs[i])) for i in order]


def _in_scale(token, scale):
    return token.is_rest or token.pitch_classes <= scale


def _octave_reduce(token, reference_midi, span):
    pitch = token.pitches[0]
    distance = abs(pitch.midi - reference_midi)
    if distance <= span:
        return token
    best = None
    for shift in range(-10, 11):
        midi = pitch.midi + 12 * shift
        if not 0 <= midi <= 127:
            continue
        d = abs(midi - reference_midi)
        # Shifts ascend, so <= lets the higher octave win a tie.
        if best is None or d <= best[0]:
            best = (d, shift)
    return token.with_name(pitch.transpose_octaves(best[1]).name)


def apply_constraints(candidates, previous_event, constraints, vocabulary):
    """Choose the next token from ranked ``candidates`` under ``constraints``.

    ``previous_event`` is the last token emitted for the same instrument
    (or None). Returns a :class:`Selection`; when ``merged`` is set the
    caller must replace the previous rest with ``selection.token``.
    """
    if vocabulary.size == 0 or not candidates:
        raise DataError("empty vocabulary")
    chosen = None
    fallback = None
    for index, _ in candidates:
        tok = vocabulary.decode(index)
        if tok.duration >= constraints.min_duration and (
                not constraints.enforce_scale or _in_scale(tok, constraints.scale_pitch_classes)):
            chosen = index
            break
    if chosen is None:
        fallback = "scale"
        for index, _ in candidates:
            if vocabulary.decode(index).duration >= constraints.min_duration:
                chosen = index
                break
    if chosen is None:
        fallback = "duration"
        chosen = candidates[0][0]

    predicted = vocabulary.decode(chosen)
    token = predicted
    merged = False
    if previous_event is not None:
        if len(token.pitches) == 1 and not previous_event.is_rest:
            ref = max(p.midi for p in previous_event.pitches)
            token = _octave_reduce(token, ref, constraints.octave_span_semitones)
        elif constraints.merge_rests and token.is_rest and previous_event.is_rest:
            token = token.with_duration(previous_event.duration + token.duration)
            merged = True
    return Selection(token, chosen, predicted, merged, fallback)


def run_generation(weights, vocabulary, seed_pattern, constraints):
    """Generation loop that also records per-event selection details."""
    if vocabulary.size != weights.config.vocab_size:
        raise ShapeError(
            f"vocabulary has {vocabulary.size} tokens, weights expect {weights.config.vocab_size}")
    pattern = Pattern(seed_pattern.indices if isinstance(seed_pattern, Pattern) else seed_pattern)
    if len(pattern) != weights.config.sequence_length:
        raise ShapeError(
            f"seed pattern has length {len(pattern)}, model expects {weights.config.sequence_length}")
    trace = GenerationTrace()
    last_at = {}                 # instrument -> position of its latest event in trace.events
    part_length = {}             # instrument -> accumulated duration
    while True:
        candidates = predict_candidates(weights, pattern)
        trace.patterns_seen += 1
        # The duration and scale filters do not depend on history, so peek at
        # the selection first to find which instrument's history applies.
        probe = apply_constraints(candidates, None, constraints, vocabulary)
        voice = probe.token.instrument
        prev_pos = last_at.get(voice)
        previous = trace.events[prev_pos].token if prev_pos is not None else None
        sel = apply_constraints(candidates, previous, constraints, vocabulary)
        if sel.merged:
            ev = trace.events[prev_pos]
            ev.token = sel.token
            ev.merges += 1
        else:
            trace.events.append(GeneratedEvent(sel.token, sel.predicted, sel.fallback))
            last_at[voice] = len(trace.events) - 1
        part_length[voice] = part_length.get(voice, Fraction(0)) + sel.predicted.duration
        pattern.push(sel.index)
        assert len(pattern) == weights.config.sequence_length
        if max(part_length.values()) >= constraints.target_duration:
            return trace


def generate(weights, vocabulary, seed_pattern, constraints):
    """Generate tokens until the longest part reaches ``target_duration``."""
    return run_generation(weights, vocabulary, seed_pattern, constraints).tokens


def assemble_score(tokens, vocabulary=None, key_fifths=DEFAULT_KEY_FIFTHS,
                   time=DEFAULT_TIME, instrument_layout=("Violin",), tempo_bpm=None):
    """Lay tokens out as a score, one part per instrument in ``instrument_layout``.

    Tokens without an instrument go to the first part. Each part is its own
    timeline: an event starts where that part's previous event ended.
    ``vocabulary`` is accepted for symmetry with :func:`generate`; octave-shifted
    notes need not be vocabulary members, only valid spellings.
    """
    layout = list(instrument_layout)
    if not layout:
        raise ValidationError("instrument layout is empty")
    lookup = {name: k for k, name in enumerate(layout)}
    folded = {name.casefold(): k for k, name in enumerate(layout)}
    events = [[] for _ in layout]
    cursor = [Fraction(0)] * len(layout)
    for tok in tokens:
        if tok.instrument is None:
            k = 0
        else:
            k = lookup.get(tok.instrument, folded.get(tok.instrument.casefold()))
            if k is None:
                raise ValidationError(
                    f"token {tok} names instrument {tok.instrument!r}, not in layout {layout}")
        events[k].append(tok.to_event(cursor[k], k))
        cursor[k] += tok.duration
    parts = [Part(name, evs) for name, evs in zip(layout, events)]
    return Score(parts, key_fifths=key_fifths, time_signature=tuple(time), tempo_bpm=tempo_bpm)
