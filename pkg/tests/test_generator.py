import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genfixtures import awkward_vocabulary, check_trace, random_generator_model
from gradcheck import random_model
from scoregen.corpus import Token, Vocabulary, build_dataset
from scoregen.errors import DataError, ShapeError, ValidationError
from scoregen.generator import (
    GenerationConstraints,
    Pattern,
    apply_constraints,
    assemble_score,
    generate,
    predict_candidates,
    run_generation,
    select_seed,
)
from scoregen.neural import ModelConfig, init_weights
from scoregen.seeding import rng_stream


def T(name, dur, inst=None):
    return Token(name, Fraction(dur), inst)


def _ranked(vocab, tokens):
    """Candidates in the given order, with made-up descending probabilities."""
    listed = [vocab.encode(t) for t in tokens]
    rest = [i for i in range(vocab.size) if i not in listed]
    order = listed + rest
    return [(i, 1.0 / (k + 2)) for k, i in enumerate(order)]


# -- seed selection ----------------------------------------------------------

def test_seed_single_window():
    ds = build_dataset([T("E4", 1), T("F4", 1), T("G4", 1)], 2)
    assert select_seed(ds, np.random.default_rng(0)).indices == (0, 1)


def test_seed_deterministic(toy_dataset):
    a = select_seed(toy_dataset, rng_stream(4, "seed-selection"))
    b = select_seed(toy_dataset, rng_stream(4, "seed-selection"))
    assert a.indices == b.indices


def test_seed_uniform(toy_dataset):
    rng = np.random.default_rng(2024)
    counts = {}
    for _ in range(10_000):
        key = select_seed(toy_dataset, rng).indices
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 4
    sigma = math.sqrt(10_000 * 0.25 * 0.75)
    assert all(abs(c - 2500) <= 3 * sigma for c in counts.values())


def test_seed_empty_dataset():
    class Empty:
        windows = []

        def __len__(self):
            return 0

    with pytest.raises(DataError):
        select_seed(Empty(), np.random.default_rng(0))


# -- candidate ranking -------------------------------------------------------

def _biased_model(probs, L=2):
    w = init_weights(ModelConfig((2,), 0.0, L, len(probs)))
    w.dense_W[...] = 0
    w.dense_b[...] = np.log(probs)
    return w


def test_candidates_uniform_keep_index_order():
    w = _biased_model([0.25] * 4)
    assert [i for i, _ in predict_candidates(w, Pattern([0, 1]))] == [0, 1, 2, 3]


def test_candidates_sorted_by_probability():
    w = _biased_model([0.2, 0.5, 0.3])
    ranked = predict_candidates(w, Pattern([0, 2]))
    assert [i for i, _ in ranked] == [1, 2, 0]
    assert [p for _, p in ranked] == pytest.approx([0.5, 0.3, 0.2])


@pytest.mark.parametrize("seed", range(5))
def test_candidates_match_argsort(seed):
    from scoregen.neural import forward

    rng = np.random.default_rng(seed)
    w = random_model(rng)
    pattern = Pattern(rng.integers(w.config.vocab_size, size=w.config.sequence_length))
    probs = forward(w, pattern.normalized(w.config.vocab_size))
    expected = np.lexsort((np.arange(len(probs)), -probs))
    assert [i for i, _ in predict_candidates(w, pattern)] == expected.tolist()


# -- constraints -------------------------------------------------------------

VOCAB = Vocabulary.build([
    T("C7", 1), T("C4", 1), T("B4", 1), T("Bb4", 1), T("Eb5", Fraction(1, 4)), T("G4", Fraction(1, 2)),
    T("rest", Fraction(1, 2)), T("rest", 1), T("C4.E4", 1), T("B3", Fraction(1, 4)),
])
DEFAULT = GenerationConstraints(target_duration=8)


def test_octave_reduction_example():
    # Brute force over every octave of C: C6=84 (17), C5=72 (5), C4=60 (7).
    shifts = {m: abs(m - 67) for m in range(0, 128) if m % 12 == 0}
    best = min(shifts, key=lambda m: (shifts[m], -m))
    assert best == 72
    sel = apply_constraints(_ranked(VOCAB, [T("C7", 1)]), T("G4", 1), DEFAULT, VOCAB)
    assert sel.token == T("C5", 1)
    assert sel.predicted == T("C7", 1)


def test_octave_tie_goes_up():
    vocab = Vocabulary.build([T("F#2", 1)])
    # F#4 (66) and F#5 (78) are both 6 semitones from C5 (72).
    sel = apply_constraints([(0, 1.0)], T("C5", 1), DEFAULT, vocab)
    assert sel.token.name == "F#5"


def test_octave_reference_is_highest_pitch():
    sel = apply_constraints(_ranked(VOCAB, [T("C7", 1)]), T("C4.E4", 1), DEFAULT, VOCAB)
    candidates = [m for m in range(0, 128) if m % 12 == 0]
    best = min(candidates, key=lambda m: (abs(m - 64), -m))
    assert sel.token.pitches[0].midi == best == 60


def test_rest_merge():
    sel = apply_constraints(_ranked(VOCAB, [T("rest", 1)]), T("rest", Fraction(1, 2)), DEFAULT, VOCAB)
    assert sel.merged and sel.token == T("rest", Fraction(3, 2))
    off = GenerationConstraints(target_duration=8, merge_rests=False)
    sel = apply_constraints(_ranked(VOCAB, [T("rest", 1)]), T("rest", Fraction(1, 2)), off, VOCAB)
    assert not sel.merged and sel.token == T("rest", 1)


def test_scale_priority():
    sel = apply_constraints(_ranked(VOCAB, [T("B4", 1), T("Bb4", 1)]), None, DEFAULT, VOCAB)
    assert sel.token == T("Bb4", 1) and sel.fallback is None
    loose = GenerationConstraints(target_duration=8, enforce_scale=False)
    sel = apply_constraints(_ranked(VOCAB, [T("B4", 1), T("Bb4", 1)]), None, loose, VOCAB)
    assert sel.token == T("B4", 1)


def test_duration_floor():
    sel = apply_constraints(_ranked(VOCAB, [T("Eb5", Fraction(1, 4)), T("G4", Fraction(1, 2))]),
                            None, DEFAULT, VOCAB)
    assert sel.token == T("G4", Fraction(1, 2))


def test_fallbacks():
    vocab = Vocabulary.build([T("B4", 1), T("C#5", Fraction(1, 4))])
    sel = apply_constraints(_ranked(vocab, [T("C#5", Fraction(1, 4))]), None, DEFAULT, vocab)
    assert sel.fallback == "scale" and sel.token == T("B4", 1)
    vocab = Vocabulary.build([T("C#5", Fraction(1, 4)), T("Bb4", Fraction(1, 4))])
    sel = apply_constraints(_ranked(vocab, [T("C#5", Fraction(1, 4))]), None, DEFAULT, vocab)
    assert sel.fallback == "duration" and sel.token == T("C#5", Fraction(1, 4))


def test_chords_are_not_octave_shifted():
    vocab = Vocabulary.build([T("C6.E6", 1)])
    sel = apply_constraints([(0, 1.0)], T("C3", 1),
                            GenerationConstraints(target_duration=8, enforce_scale=False), vocab)
    assert sel.token == T("C6.E6", 1)


@pytest.mark.parametrize("kw", [dict(target_duration=0), dict(target_duration=1, min_duration=0),
                                dict(target_duration=1, scale_pitch_classes=()),
                                dict(target_duration=1, octave_span_semitones=0)])
def test_constraint_validation(kw):
    with pytest.raises(ValidationError):
        GenerationConstraints(**kw)


# -- generation loop ---------------------------------------------------------

def _loop_fixture(seed=0, L=3):
    vocab = awkward_vocabulary()
    rng = np.random.default_rng(seed)
    w = random_generator_model(rng, vocab.size, L, width=16, scale=1.5)
    seed_pattern = list(rng.integers(vocab.size, size=L))
    return w, vocab, seed_pattern


def test_tiny_target_gives_one_event():
    w, vocab, pattern = _loop_fixture()
    tokens = generate(w, vocab, pattern, GenerationConstraints(target_duration=Fraction(1, 8)))
    assert len(tokens) == 1


def test_generation_deterministic():
    w, vocab, pattern = _loop_fixture(3)
    c = GenerationConstraints(target_duration=30)
    assert generate(w, vocab, pattern, c) == generate(w, vocab, pattern, c)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 60), st.booleans(), st.booleans())
def test_generation_invariants(seed, target, scale_on, merge_on):
    w, vocab, pattern = _loop_fixture(seed, L=int(seed % 4) + 1)
    c = GenerationConstraints(target_duration=target, enforce_scale=scale_on, merge_rests=merge_on)
    trace = run_generation(w, vocab, pattern, c)
    bad, _ = check_trace(trace, c)
    assert bad == []
    total = sum(t.duration for t in trace.tokens)
    assert total >= target
    assert total - trace.tokens[-1].duration < target


def test_pattern_length_invariant():
    p = Pattern([1, 2, 3])
    for i in range(10):
        p.push(i)
        assert len(p) == 3
    assert p.indices == (7, 8, 9)
    with pytest.raises(ValidationError):
        Pattern([])


def test_generation_shape_checks():
    w, vocab, pattern = _loop_fixture()
    with pytest.raises(ShapeError):
        generate(w, vocab, pattern[:-1], DEFAULT)
    small = Vocabulary.build([T("C4", 1)])
    with pytest.raises(ShapeError):
        generate(w, small, pattern, DEFAULT)


def test_multi_instrument_history_is_per_part():
    vocab = awkward_vocabulary(("Flute", "Violin"))
    rng = np.random.default_rng(1)
    w = random_generator_model(rng, vocab.size, 4, width=64, scale=1.0)
    c = GenerationConstraints(target_duration=60)
    trace = run_generation(w, vocab, list(rng.integers(vocab.size, size=4)), c)
    bad, _ = check_trace(trace, c)
    assert bad == []


# -- assembly ----------------------------------------------------------------

def test_assemble_single_instrument():
    score = assemble_score([T("E4", 1), T("rest", Fraction(1, 2))])
    (part,) = score.parts
    assert [e.offset for e in part.events] == [0, 1]
    assert part.events[1].is_rest
    assert score.key_fifths == -3 and score.time_signature == (6, 8)


def test_assemble_two_instruments():
    tokens = [T("E4", 1, "Violin"), T("C5", Fraction(3, 2), "Flute"), T("F4", Fraction(1, 2), "Violin"),
              T("rest", 1, "Flute"), T("G4", 1, "Violin")]
    score = assemble_score(tokens, instrument_layout=("Flute", "Violin"), tempo_bpm=60)
    flute, violin = score.parts
    assert [(e.pitches[0].name if e.pitches else "rest", e.offset) for e in flute.events] == [
        ("C5", 0), ("rest", Fraction(3, 2))]
    assert [(e.pitches[0].name, e.offset) for e in violin.events] == [
        ("E4", 0), ("F4", 1), ("G4", Fraction(3, 2))]
    assert all(e.part_index == 1 for e in violin.events)
    assert score.tempo_bpm == 60


def test_assemble_unknown_instrument():
    with pytest.raises(ValidationError, match="Oboe"):
        assemble_score([T("E4", 1, "Oboe")], instrument_layout=("Violin",))
