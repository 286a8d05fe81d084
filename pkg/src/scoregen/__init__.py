"""Symbolic music generation with a from-scratch stacked LSTM.

Scores are read from MusicXML, tokenized into (note, duration[, instrument])
tuples, used to train a next-token model, and new scores are generated
under musical constraints and written back as MusicXML and MIDI.
"""

__version__ = "0.1.0"
