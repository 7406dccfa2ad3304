"""Static detection and repair of speculative-execution leaks in IR programs."""

import json

from ._core import ParseError, __version__, normalize, repair
from ._core import analyze_json as _analyze_json
from ._core import simulate_json as _simulate_json

__all__ = ["ParseError", "__version__", "analyze", "normalize", "repair", "simulate"]


def analyze(text, *, name="<string>", mode="program_dep", sew=448, sources=None,
            geometry=None, extra_protected=()):
    """Analyze program text and return the report as a dict."""
    return json.loads(_analyze_json(text, name, mode, sew, sources, geometry,
                                    list(extra_protected)))


def simulate(text, input="", *, mispredict="none", sew=448, geometry=None, max_depth=1):
    """Run a program and return {"status", "events"}."""
    return json.loads(_simulate_json(text, input, mispredict, sew, geometry, max_depth))
