import io
import zipfile
from pathlib import Path

import pytest

from scoregen.corpus import build_dataset, extract_horizontal
from scoregen.scoreio import read_score

DATA = Path(__file__).parent / "data"


def fixture_path(name):
    return DATA / name


def make_mxl(xml_bytes, inner="score.musicxml", container=True):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        if container:
            zf.writestr("META-INF/container.xml", (
                '<?xml version="1.0" encoding="UTF-8"?>\n<container><rootfiles>'
                f'<rootfile full-path="{inner}" media-type="application/vnd.recordare.musicxml+xml"/>'
                "</rootfiles></container>"))
        zf.writestr(inner, xml_bytes)
    return buf.getvalue()


@pytest.fixture
def ode_score():
    return read_score(DATA / "ode_to_joy.musicxml")


@pytest.fixture
def two_part_score():
    return read_score(DATA / "two_part.musicxml")


@pytest.fixture
def features_score():
    return read_score(DATA / "features.musicxml")


@pytest.fixture
def toy_dataset(ode_score):
    """The six-token Ode-to-Joy stream windowed with L=2 (4 windows, N=3)."""
    return build_dataset(extract_horizontal(ode_score, "Violin"), 2)
