import io
from pathlib import Path

import numpy as np
import pytest

from ctaparse.corpus import load_transcript
from ctaparse.embeddings import EmbeddingTable
from ctaparse.fixtures import make_fixtures


@pytest.fixture(scope="session")
def separable_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fx_separable")
    make_fixtures(out, n_docs=30, seed=13, family="separable")
    return out


@pytest.fixture(scope="session")
def contextual_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fx_contextual")
    make_fixtures(out, n_docs=30, seed=13, family="contextual")
    return out


@pytest.fixture
def toy_table():
    return EmbeddingTable.from_dict({
        "pass": [1.0, 0.0, 0.0],
        "wire": [0.0, 1.0, 0.0],
        "the": [0.0, 0.0, 1.0],
        "remove": [1.0, 1.0, 0.0],
        "needle": [0.0, 1.0, 1.0],
    })


def transcript(text, doc="d"):
    return load_transcript(io.StringIO(text), doc)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def golden_dir():
    return Path(__file__).parent / "golden"


PIPELINE = ("make-fixtures", "parse-protocol", "match", "gen-datasets", "train-seq", "train-re", "predict",
            "assemble", "evaluate")


def run_pipeline(workdir, stages=PIPELINE, extra=()):
    """Run CLI stages in order inside ``workdir``; returns the exit codes."""
    from ctaparse.cli import main

    return [main([stage, "--workdir", str(workdir), *extra]) for stage in stages]


@pytest.fixture(scope="session")
def cli_run(tmp_path_factory):
    wd = tmp_path_factory.mktemp("cli")
    codes = run_pipeline(wd)
    assert codes == [0] * len(PIPELINE)
    return wd


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; the lines are echoed in the terminal summary."""

    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        print(line)
        _ACCEPTANCE.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
