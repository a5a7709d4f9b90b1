import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from kerndbg.lang import parse

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"

CORPUS_PROGRAMS = sorted(p.name for p in CORPUS.glob("*.kern"))


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def programs() -> dict:
    return {name: parse((CORPUS / name).read_text()) for name in CORPUS_PROGRAMS}


@pytest.fixture(scope="session")
def fig1(programs):
    return programs["fig1.kern"]


@pytest.fixture(scope="session")
def fig1_star(programs):
    return programs["fig1_star.kern"]
