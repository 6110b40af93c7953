import json

import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from simplex_combine.synthetic import DEFAULT_SAMPLES, write_survey


def random_compositions(rng, T, J):
    return rng.dirichlet(np.ones(J), size=T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def compositions(min_parts=2, max_parts=12):
    """Hypothesis strategy for compositions with parts bounded away from zero."""
    return st.integers(min_parts, max_parts).flatmap(
        lambda J: arrays(np.float64, (J,), elements=st.floats(1e-3, 1e3)).map(lambda v: v / v.sum())
    )


def composition_matrices(max_T=10, max_J=8, min_T=2):
    return st.tuples(st.integers(min_T, max_T), st.integers(2, max_J)).flatmap(
        lambda s: arrays(np.float64, s, elements=st.floats(1e-3, 1e3)).map(
            lambda a: a / a.sum(axis=1, keepdims=True)
        )
    )


@pytest.fixture
def survey_csv(tmp_path):
    return write_survey(tmp_path / "survey.csv")


@pytest.fixture
def run_config(tmp_path, survey_csv):
    cfg = {
        "survey": survey_csv.name,
        "variables": ["NGDP", "UNEMP"],
        "samples": DEFAULT_SAMPLES,
        "evaluation": {"end": 2018},
        "out": "run",
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
