from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scoregen.corpus import (
    Token,
    Vocabulary,
    build_dataset,
    dumps_tokens,
    extract_horizontal,
    extract_vertical,
    loads_tokens,
    make_windows,
    normalize,
)
from scoregen.errors import (
    CorruptEncodingError,
    EmptyCorpusError,
    InsufficientDataError,
    UnknownInstrumentError,
)
from scoregen.scoreio import NoteEvent, Part, Pitch, Score


def T(name, dur, inst=None):
    return Token(name, Fraction(dur), inst)


def _note(name, dur, offset, part=0):
    return NoteEvent.from_pitches([Pitch.from_name(name)], Fraction(dur), Fraction(offset), part)


def test_horizontal_ode_to_joy(ode_score):
    tokens = extract_horizontal(ode_score, "Violin")
    assert [(t.name, t.duration) for t in tokens[:4]] == [
        ("E4", 1), ("E4", 1), ("F4", 1), ("G4", 1)]
    assert all(t.instrument is None for t in tokens)


def test_horizontal_case_insensitive(ode_score):
    assert extract_horizontal(ode_score, "vIoLiN") == extract_horizontal(ode_score, "Violin")


def test_horizontal_single_rest():
    score = Score([Part("Violin", [NoteEvent.from_pitches([], 2)])])
    assert extract_horizontal(score, "Violin") == [T("rest", 2)]


def test_horizontal_tied_half_quarter():
    xml = b"""<score-partwise><part-list><score-part id="P1"><part-name>Violin</part-name>
    </score-part></part-list><part id="P1"><measure><attributes><divisions>1</divisions></attributes>
    <note><pitch><step>E</step><octave>4</octave></pitch><duration>2</duration><tie type="start"/></note>
    <note><pitch><step>E</step><octave>4</octave></pitch><duration>1</duration><tie type="stop"/></note>
    </measure></part></score-partwise>"""
    from scoregen.scoreio import parse_score

    assert extract_horizontal(parse_score(xml), "Violin") == [T("E4", 3)]


def test_unknown_instrument_lists_available(two_part_score):
    with pytest.raises(UnknownInstrumentError) as info:
        extract_horizontal(two_part_score, "Oboe")
    assert "Flute" in str(info.value) and "Violin" in str(info.value)
    assert info.value.exit_code == 2


def test_chord_token_spelling(two_part_score):
    tokens = extract_horizontal(two_part_score, "Violin")
    assert T("C4.E4", 1) in tokens
    with pytest.raises(ValueError):
        Token("E4.C4", 1)


def test_vertical_spec_example():
    flute = Part("Flute", [_note("C5", 1, 0, 0)])
    violin = Part("Violin", [_note("E4", 1, 0, 1), _note("F4", 1, 1, 1)])
    score = Score([flute, violin])
    assert extract_vertical(score, ["Violin", "Flute"]) == [
        T("E4", 1, "Violin"), T("C5", 1, "Flute"), T("F4", 1, "Violin")]


def brute_force_vertical(score, names):
    """Oracle: walk every distinct offset, then every part rank, then pitch order."""
    parts = [score.find_part(n) for n in names]
    offsets = sorted({e.offset for p in parts for e in p.events})
    out = []
    for off in offsets:
        for name, part in zip(names, parts):
            here = [e for e in part.events if e.offset == off]
            here.sort(key=lambda e: min((p.midi for p in e.pitches), default=-1))
            out.extend(Token.from_event(e, name) for e in here)
    return out


@pytest.mark.parametrize("names", [["Violin", "Flute"], ["Flute", "Violin"]])
def test_vertical_matches_oracle(two_part_score, names):
    assert extract_vertical(two_part_score, names) == brute_force_vertical(two_part_score, names)


def test_vertical_single_is_tagged_horizontal(two_part_score):
    v = extract_vertical(two_part_score, ["Flute"])
    h = extract_horizontal(two_part_score, "Flute")
    assert v == [T(t.name, t.duration, "Flute") for t in h]


def test_vertical_empty_list(two_part_score):
    assert extract_vertical(two_part_score, []) == []


def test_vocabulary_example():
    v = Vocabulary.build([T("E4", 1), T("E4", 1), T("F4", 1)])
    assert v.size == 2
    assert v.forward == {T("E4", 1): 0, T("F4", 1): 1}


def test_vocabulary_single_and_duration_distinct():
    assert Vocabulary.build([T("rest", 1)]).forward == {T("rest", 1): 0}
    v = Vocabulary.build([T("E4", 1), T("E4", Fraction(1, 2))])
    assert v.size == 2 and v.encode(T("E4", 1)) != v.encode(T("E4", Fraction(1, 2)))


def test_vocabulary_empty():
    with pytest.raises(EmptyCorpusError):
        Vocabulary.build([])


token_strategy = st.builds(
    Token,
    st.sampled_from(["C4", "Eb4", "G#3", "rest", "C4.E4", "F4.A4.C5"]),
    st.sampled_from([Fraction(1, 4), Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(1, 3)]),
    st.sampled_from([None, "Violin", "Flute"]),
)


@given(st.lists(token_strategy, min_size=1, max_size=40))
def test_vocabulary_bijection_and_determinism(tokens):
    v = Vocabulary.build(tokens)
    for t in tokens:
        assert v.decode(v.encode(t)) == t
    for i in range(v.size):
        assert v.encode(v.decode(i)) == i
    assert Vocabulary.build(list(reversed(tokens))).dumps() == v.dumps()
    assert Vocabulary.loads(v.dumps()) == v


@given(st.lists(token_strategy, max_size=30))
def test_token_file_round_trip(tokens):
    assert loads_tokens(dumps_tokens(tokens)) == tokens


def test_token_file_format():
    text = dumps_tokens([T("E4", Fraction(3, 2)), T("rest", 1, "Flute")])
    assert text == "E4\t3/2\nrest\t1\tFlute\n"


def test_ode_to_joy_windows():
    vocab_index = {"E": 0, "F": 1, "G": 2}
    encoded = [vocab_index[c] for c in "EEFGGF"]
    windows = make_windows(encoded, 2)
    assert windows == [((0, 0), 1), ((0, 1), 2), ((1, 2), 2), ((2, 2), 1)]


def test_windows_boundary_and_duplicates():
    assert len(make_windows([0, 1, 2, 3], 3)) == 1
    assert make_windows([0, 1, 0, 1, 0], 2) == [((0, 1), 0), ((1, 0), 1), ((0, 1), 0)]


def test_windows_insufficient():
    with pytest.raises(InsufficientDataError, match="at least 4"):
        make_windows([0, 1, 2], 3)


@given(st.lists(st.integers(0, 5), min_size=2, max_size=50), st.integers(1, 10))
def test_window_count(encoded, L):
    if len(encoded) < L + 1:
        with pytest.raises(InsufficientDataError):
            make_windows(encoded, L)
    else:
        windows = make_windows(encoded, L)
        assert len(windows) == len(encoded) - L
        for i, (seq, target) in enumerate(windows):
            assert list(seq) == encoded[i:i + L] and target == encoded[i + L]


def test_normalize_values():
    ds = normalize([((2, 0), 1)], 4)
    assert ds.inputs.shape == (1, 2, 1)
    assert ds.inputs[0, 0, 0] == 0.5 and ds.inputs[0, 1, 0] == 0.0
    ds3 = normalize([((0,), 1)], 3)
    assert ds3.targets.tolist() == [[0.0, 1.0, 0.0]]


def test_normalize_corrupt():
    with pytest.raises(CorruptEncodingError):
        normalize([((3,), 0)], 3)


@given(st.lists(st.integers(0, 6), min_size=3, max_size=40), st.integers(1, 2))
def test_dataset_invariants(encoded, L):
    N = 7
    ds = normalize(make_windows(encoded, L), N)
    assert np.all(ds.inputs >= 0) and np.all(ds.inputs < 1)
    assert np.allclose(ds.inputs * N, np.round(ds.inputs * N))
    assert np.all(ds.targets.sum(axis=1) == 1)
    assert not ds.inputs.flags.writeable


def test_dataset_deterministic(ode_score):
    tokens = extract_horizontal(ode_score, "Violin")
    a, b = build_dataset(tokens, 2), build_dataset(tokens, 2)
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert a.targets.tobytes() == b.targets.tobytes()
    assert a.vocabulary.dumps() == b.vocabulary.dumps()
