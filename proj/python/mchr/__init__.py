"""MCHR annotation core: consensus routing, metrics and simulation."""

import json
import os

from ._core import Error, normalize_label, wilson_ci
from . import _core

__all__ = ["Error", "normalize_label", "wilson_ci", "expected_outcome", "simulate", "report", "cli"]


def _text(value):
    return value if isinstance(value, str) else json.dumps(value)


def expected_outcome(profiles, labels, threshold=0.8):
    return _core.expected_outcome(_text(profiles), labels, threshold)


def simulate(profiles, task, n=1000, seed=0, human_accuracy=1.0, workers=1):
    """Report dict for a synthetic run."""
    return json.loads(_core.simulate(_text(profiles), _text(task), n, seed, human_accuracy, workers))


def report(runs, allow_incomplete=False):
    if isinstance(runs, (str, os.PathLike)):
        runs = [runs]
    return json.loads(_core.report([str(r) for r in runs], allow_incomplete))


def cli(*args):
    """(exit code, stdout, stderr) of the mchr tool."""
    return _core.cli([str(a) for a in args])
