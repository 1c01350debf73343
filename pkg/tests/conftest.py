"""Shared, session-cached collapse runs.

Collapse runs take seconds each; every test module that needs one asks the
``runs`` / ``analyses`` fixtures so each preset is integrated once per session.
"""

import numpy as np
import pytest

from nbcollide.analysis import analyze_collapse
from nbcollide.scenarios import preset, run_scenario

_RUNS = {}
_ANALYSES = {}


def get_run(name):
    if name not in _RUNS:
        _RUNS[name] = run_scenario(preset(name))
    return _RUNS[name]


def get_analysis(name):
    if name not in _ANALYSES:
        run = get_run(name)
        _ANALYSES[name] = analyze_collapse(run.trajectory, run.scenario.A_reference)
    return _ANALYSES[name]


@pytest.fixture(scope="session")
def runs():
    return get_run


@pytest.fixture(scope="session")
def analyses():
    return get_analysis


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
