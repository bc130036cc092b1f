import pathlib

import pytest

VECTOR_DIR = pathlib.Path(__file__).parent / "vectors"
SCENARIO_DIR = pathlib.Path(__file__).parent.parent / "scenarios"


@pytest.fixture(scope="session")
def vector_dir() -> pathlib.Path:
    return VECTOR_DIR


@pytest.fixture(scope="session")
def scenario_dir() -> pathlib.Path:
    return SCENARIO_DIR


def vector_lines(name: str) -> list[str]:
    """Data lines of a golden file, comments and blanks stripped."""
    out = []
    for line in (VECTOR_DIR / name).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out
