"""ttscheck: model checking of real-time specification patterns.

Verifies timed requirement patterns (presence, absence, response with
`within`/`lasting` modifiers) against time Petri nets extended with data
variables and transition priorities, by composing synthesized observer nets
with the system and checking LTL on its state-class graph.  Every verdict can
be cross-validated at the trace level by two independent pattern semantics.
"""

__version__ = "0.1.0"

from .model import TtsModel, load_tts, parse_tts, validate_model
from .classgraph import build_graph
from .traces import TimedTrace, simulate
from .patterns import parse_pattern
from .oracle import cross_check, fott_holds, mtl_holds

__all__ = [
    "TtsModel",
    "load_tts",
    "parse_tts",
    "validate_model",
    "build_graph",
    "TimedTrace",
    "simulate",
    "parse_pattern",
    "cross_check",
    "fott_holds",
    "mtl_holds",
    "__version__",
]
