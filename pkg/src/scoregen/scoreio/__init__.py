from pathlib import Path

from .midi import write_midi
from .model import CHORD, NOTE, REST, NoteEvent, Part, Pitch, Score
from .musicxml import DIVISIONS, parse_score, write_musicxml

__all__ = [
    "CHORD", "NOTE", "REST", "DIVISIONS", "NoteEvent", "Part", "Pitch", "Score",
    "parse_score", "read_score", "write_midi", "write_musicxml",
]


def read_score(path):
    path = Path(path)
    fmt = "mxl" if path.suffix.lower() == ".mxl" else None
    return parse_score(path.read_bytes(), fmt)
