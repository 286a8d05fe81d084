"""MusicXML (partwise) reading and writing, plain or zipped as ``.mxl``."""

import io
import zipfile
import zlib
import xml.etree.ElementTree as ET
from collections import Counter
from fractions import Fraction

from ..errors import ParseError, SerializationError
from .model import NoteEvent, Part, Pitch, Score

DIVISIONS = 480

_DOCTYPE = (
    '<!DOCTYPE score-partwise PUBLIC "-//Recordare//DTD MusicXML 3.1 Partwise//EN" '
    '"http://www.musicxml.org/dtds/partwise.dtd">'
)

# Elements that carry layout or derived notation only; dropped without a warning.
_LAYOUT_TAGS = {"print", "barline", "bookmark", "link"}
_NOTE_APPEARANCE = {
    "chord", "pitch", "rest", "duration", "tie", "voice", "type", "dot",
    "accidental", "time-modification", "stem", "notehead", "staff", "beam",
    "instrument", "notations", "play", "listen", "footnote", "level",
}
_ATTRIBUTE_CHILDREN = {"divisions", "key", "time", "clef", "staves", "staff-details",
                       "instruments", "measure-style", "part-symbol", "directive"}

_TYPE_NAMES = {
    Fraction(4): "whole",
    Fraction(2): "half",
    Fraction(1): "quarter",
    Fraction(1, 2): "eighth",
    Fraction(1, 4): "16th",
    Fraction(1, 8): "32nd",
    Fraction(1, 16): "64th",
}


def parse_score(data, format=None):
    """Parse MusicXML bytes into a :class:`Score`.

    ``format`` is ``"mxl"`` or ``"musicxml"``; when omitted it is sniffed from
    the zip signature. Elements the model does not represent (grace notes,
    dynamics, ornaments, ...) are dropped and listed in ``Score.warnings``.
    """
    if format is None:
        format = "mxl" if data[:4] == b"PK\x03\x04" else "musicxml"
    if format == "mxl":
        data = _read_mxl(data)
    elif format != "musicxml":
        raise ValueError(f"unknown score format {format!r}")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ParseError(f"malformed XML: {exc}",
                         position=f"line {line}, column {col}") from exc
    return _ScoreReader(root).read()


def _read_mxl(data):
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise ParseError(f"malformed mxl archive: {exc}", position="byte 0") from exc
    with zf:
        names = zf.namelist()
        root_path = None
        if "META-INF/container.xml" in names:
            try:
                container = ET.fromstring(zf.read("META-INF/container.xml"))
            except ET.ParseError as exc:
                line, col = exc.position
                raise ParseError("malformed META-INF/container.xml",
                                 position=f"line {line}, column {col}") from exc
            rootfile = container.find(".//rootfile")
            if rootfile is not None:
                root_path = rootfile.get("full-path")
        if root_path is None:
            candidates = [n for n in names if not n.startswith("META-INF/")
                          and n.lower().endswith((".xml", ".musicxml"))]
            if not candidates:
                raise ParseError("mxl archive contains no MusicXML document")
            root_path = candidates[0]
        try:
            return zf.read(root_path)
        except KeyError as exc:
            raise ParseError(f"mxl rootfile {root_path!r} missing from archive") from exc
        except (zipfile.BadZipFile, zlib.error) as exc:
            raise ParseError(f"corrupt member {root_path!r}: {exc}") from exc


class _Group:
    __slots__ = ("offset", "duration", "pitches", "voice", "tie_start", "tie_stop")

    def __init__(self, offset, duration, pitches, voice, tie_start, tie_stop):
        self.offset = offset
        self.duration = duration
        self.pitches = pitches
        self.voice = voice
        self.tie_start = tie_start
        self.tie_stop = tie_stop


class _ScoreReader:
    def __init__(self, root):
        self.root = root
        self.warnings = Counter()
        self.key_fifths = None
        self.time_signature = None
        self.tempo = None

    def warn(self, what):
        self.warnings[what] += 1

    def read(self):
        root = self.root
        if root.tag == "score-timewise":
            raise ParseError("timewise MusicXML is not supported")
        if root.tag != "score-partwise":
            raise ParseError(f"unexpected root element <{root.tag}>")
        part_list = root.find("part-list")
        declared = []
        if part_list is not None:
            for sp in part_list.findall("score-part"):
                declared.append((sp.get("id"), _part_name(sp)))
        bodies = {p.get("id"): p for p in root.findall("part")}
        if not declared:
            declared = [(pid, pid or f"Part {i + 1}") for i, pid in enumerate(bodies)]

        parts = []
        for index, (pid, name) in enumerate(declared):
            body = bodies.get(pid)
            events = self._read_part(body, index) if body is not None else []
            parts.append(Part(name, events))

        time = self.time_signature or (4, 4)
        return Score(
            parts=parts,
            key_fifths=self.key_fifths if self.key_fifths is not None else 0,
            time_signature=time,
            tempo_bpm=self.tempo,
            warnings=[f"dropped {n} x {what}" for what, n in self.warnings.items()],
        )

    def _read_part(self, body, part_index):
        divisions = 1
        measure_start = Fraction(0)
        groups = []
        pending = {}
        current = None

        def finalize():
            nonlocal current
            if current is None:
                return
            g, current = current, None
            key = (g.voice, tuple(sorted(p.midi for p in g.pitches)))
            idx = pending.get(key)
            if g.tie_stop and idx is not None and groups[idx].offset + groups[idx].duration == g.offset:
                groups[idx].duration += g.duration
                if not g.tie_start:
                    del pending[key]
                return
            groups.append(g)
            if g.tie_start:
                pending[key] = len(groups) - 1
            else:
                pending.pop(key, None)

        for measure in body.findall("measure"):
            cursor = measure_start
            furthest = measure_start
            for el in measure:
                tag = el.tag
                if tag == "note":
                    parsed = self._read_note(el, divisions)
                    if parsed is None:
                        continue
                    is_chord, duration, pitch, voice, tie_start, tie_stop = parsed
                    if is_chord and current is not None:
                        if pitch is not None:
                            current.pitches.append(pitch)
                        current.tie_start = current.tie_start or tie_start
                        current.tie_stop = current.tie_stop or tie_stop
                        continue
                    finalize()
                    current = _Group(cursor, duration, [pitch] if pitch else [],
                                     voice, tie_start, tie_stop)
                    cursor += duration
                elif tag == "backup":
                    finalize()
                    cursor -= self._duration(el, divisions)
                elif tag == "forward":
                    finalize()
                    cursor += self._duration(el, divisions)
                elif tag == "attributes":
                    divisions = self._read_attributes(el, divisions)
                elif tag == "direction":
                    self._read_direction(el)
                elif tag == "sound":
                    self._read_sound(el)
                elif tag not in _LAYOUT_TAGS:
                    self.warn(f"<{tag}> element")
                furthest = max(furthest, cursor)
            finalize()
            measure_start = furthest

        events = []
        for g in groups:
            try:
                events.append(NoteEvent.from_pitches(g.pitches, g.duration, g.offset, part_index))
            except ValueError as exc:
                raise ParseError(f"invalid event at offset {g.offset}: {exc}") from exc
        events.sort(key=NoteEvent.sort_key)
        return events

    def _duration(self, el, divisions):
        text = el.findtext("duration")
        if text is None:
            raise ParseError(f"<{el.tag}> without <duration>")
        try:
            return Fraction(int(text.strip()), divisions)
        except ValueError as exc:
            raise ParseError(f"bad duration {text!r}") from exc

    def _read_note(self, el, divisions):
        if el.find("grace") is not None:
            self.warn("grace note")
            return None
        if el.find("cue") is not None:
            self.warn("cue note")
            return None
        if el.find("unpitched") is not None:
            self.warn("unpitched note")
            return None
        for child in el:
            if child.tag == "lyric":
                self.warn("lyric")
            elif child.tag not in _NOTE_APPEARANCE:
                self.warn(f"note <{child.tag}>")
        notations = el.find("notations")
        if notations is not None:
            for child in notations:
                if child.tag == "tied":
                    continue
                if child.tag in ("articulations", "ornaments", "technical"):
                    for mark in child:
                        self.warn(f"{child.tag[:-1]} <{mark.tag}>")
                else:
                    self.warn(f"notation <{child.tag}>")

        duration = self._duration(el, divisions)
        pitch = None
        p = el.find("pitch")
        if p is not None:
            pitch = self._read_pitch(p)
        elif el.find("rest") is None:
            raise ParseError("note has neither <pitch> nor <rest>")
        ties = {t.get("type") for t in el.findall("tie")}
        if notations is not None:
            ties |= {t.get("type") for t in notations.findall("tied")}
        voice = (el.findtext("voice") or "1").strip()
        return (el.find("chord") is not None, duration, pitch, voice,
                "start" in ties, "stop" in ties)

    def _read_pitch(self, p):
        step = (p.findtext("step") or "").strip()
        alter_text = p.findtext("alter")
        alter = 0
        if alter_text is not None:
            value = float(alter_text)
            alter = round(value)
            if value != alter:
                self.warn("microtonal alteration (rounded)")
        try:
            octave = int(p.findtext("octave"))
            return Pitch(step, alter, octave)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"invalid pitch: {exc}") from exc

    def _read_attributes(self, el, divisions):
        for child in el:
            if child.tag == "divisions":
                divisions = int(child.text.strip())
                if divisions <= 0:
                    raise ParseError(f"non-positive divisions {divisions}")
            elif child.tag == "key":
                fifths = child.findtext("fifths")
                if fifths is not None and self.key_fifths is None:
                    self.key_fifths = int(fifths)
            elif child.tag == "time":
                beats, beat_type = child.findtext("beats"), child.findtext("beat-type")
                if self.time_signature is None and beats and beat_type:
                    try:
                        self.time_signature = (int(beats), int(beat_type))
                    except ValueError:
                        self.warn(f"composite time signature {beats}/{beat_type}")
            elif child.tag == "transpose":
                self.warn("transpose (pitches kept as written)")
            elif child.tag not in _ATTRIBUTE_CHILDREN:
                self.warn(f"attribute <{child.tag}>")
        return divisions

    def _read_direction(self, el):
        for dt in el.findall("direction-type"):
            for child in dt:
                if child.tag != "metronome":
                    self.warn(f"direction <{child.tag}>")
        sound = el.find("sound")
        if sound is not None:
            self._read_sound(sound)

    def _read_sound(self, el):
        tempo = el.get("tempo")
        if tempo is not None and self.tempo is None:
            self.tempo = int(round(float(tempo)))


def _part_name(score_part):
    for path in ("part-name", "score-instrument/instrument-name"):
        text = score_part.findtext(path)
        if text and text.strip():
            return text.strip()
    return score_part.get("id") or ""


# -- writing -----------------------------------------------------------------

def _ticks(value, what):
    t = value * DIVISIONS
    if t.denominator != 1:
        raise SerializationError(
            f"{what}: {value} quarter-lengths is not a whole number of "
            f"{DIVISIONS}ths of a quarter")
    return int(t)


def _note_type(duration):
    """Return (type-name, dots, is_triplet) for simple durations, else None."""
    for base, name in _TYPE_NAMES.items():
        if duration == base:
            return name, 0, False
        if duration == base * Fraction(3, 2):
            return name, 1, False
        if duration == base * Fraction(7, 4):
            return name, 2, False
        if duration == base * Fraction(2, 3):
            return name, 0, True
    return None


def _sub(parent, tag, text=None, **attrib):
    el = ET.SubElement(parent, tag, attrib)
    if text is not None:
        el.text = str(text)
    return el


def _voice_lanes(events):
    lanes = []
    for e in sorted(events, key=NoteEvent.sort_key):
        for lane in lanes:
            if lane[-1].end <= e.offset:
                lane.append(e)
                break
        else:
            lanes.append([e])
    return lanes


def write_musicxml(score):
    """Serialize ``score`` as an uncompressed MusicXML 3.1 partwise document."""
    beats, beat_type = score.time_signature
    measure_len = Fraction(4 * beats, beat_type)
    for part in score.parts:
        for e in part.events:
            where = f"part {part.name!r}, event at offset {e.offset} ({e.kind})"
            _ticks(e.offset, where)
            _ticks(e.duration, where)
    total = score.length
    n_measures = max(1, -(-total // measure_len)) if total else 1

    root = ET.Element("score-partwise", version="3.1")
    part_list = _sub(root, "part-list")
    for i, part in enumerate(score.parts):
        sp = _sub(part_list, "score-part", id=f"P{i + 1}")
        _sub(sp, "part-name", part.name)

    for i, part in enumerate(score.parts):
        body = _sub(root, "part", id=f"P{i + 1}")
        lanes = _voice_lanes(part.events)
        for m in range(int(n_measures)):
            start = measure_len * m
            stop = start + measure_len
            measure = _sub(body, "measure", number=str(m + 1))
            if m == 0:
                _write_attributes(measure, score)
                if i == 0 and score.tempo_bpm is not None:
                    _write_tempo(measure, score.tempo_bpm)
            position = start
            for v, lane in enumerate(lanes):
                pieces = [e for e in lane if e.offset < stop and e.end > start]
                if not pieces:
                    continue
                if position > start:
                    backup = _sub(measure, "backup")
                    _sub(backup, "duration", _ticks(position - start, "backup"))
                    position = start
                for e in pieces:
                    piece_start = max(e.offset, start)
                    piece_end = min(e.end, stop)
                    if piece_start > position:
                        fwd = _sub(measure, "forward")
                        _sub(fwd, "duration", _ticks(piece_start - position, "forward"))
                    _write_event(measure, e, piece_end - piece_start, v + 1,
                                 tie_stop=piece_start > e.offset,
                                 tie_start=piece_end < e.end)
                    position = piece_end

    ET.indent(root, space="  ")
    body = ET.tostring(root, encoding="unicode")
    text = '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n' + _DOCTYPE + "\n" + body + "\n"
    return text.encode("utf-8")


def _write_attributes(measure, score):
    attrs = _sub(measure, "attributes")
    _sub(attrs, "divisions", DIVISIONS)
    key = _sub(attrs, "key")
    _sub(key, "fifths", score.key_fifths)
    _sub(key, "mode", "major")
    time = _sub(attrs, "time")
    _sub(time, "beats", score.time_signature[0])
    _sub(time, "beat-type", score.time_signature[1])
    clef = _sub(attrs, "clef")
    _sub(clef, "sign", "G")
    _sub(clef, "line", 2)


def _write_tempo(measure, bpm):
    direction = _sub(measure, "direction", placement="above")
    metronome = _sub(_sub(direction, "direction-type"), "metronome")
    _sub(metronome, "beat-unit", "quarter")
    _sub(metronome, "per-minute", bpm)
    _sub(direction, "sound", tempo=str(bpm))


def _write_event(measure, event, length, voice, tie_stop, tie_start):
    heads = event.pitches or (None,)
    ticks = _ticks(length, f"event at offset {event.offset}")
    shape = _note_type(length)
    for n, pitch in enumerate(heads):
        note = _sub(measure, "note")
        if n > 0:
            _sub(note, "chord")
        if pitch is None:
            _sub(note, "rest")
        else:
            p = _sub(note, "pitch")
            _sub(p, "step", pitch.step)
            if pitch.alter:
                _sub(p, "alter", pitch.alter)
            _sub(p, "octave", pitch.octave)
        _sub(note, "duration", ticks)
        # Rests split at a barline are tied as well so they re-read as one event.
        if tie_stop:
            _sub(note, "tie", type="stop")
        if tie_start:
            _sub(note, "tie", type="start")
        _sub(note, "voice", voice)
        if shape is not None:
            name, dots, triplet = shape
            _sub(note, "type", name)
            for _ in range(dots):
                _sub(note, "dot")
            if triplet:
                tm = _sub(note, "time-modification")
                _sub(tm, "actual-notes", 3)
                _sub(tm, "normal-notes", 2)
        if pitch is not None and (tie_stop or tie_start):
            notations = _sub(note, "notations")
            if tie_stop:
                _sub(notations, "tied", type="stop")
            if tie_start:
                _sub(notations, "tied", type="start")
