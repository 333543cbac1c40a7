"""Timed task planning with tube-controlled execution.

The pipeline: a scenario (workspace, labelled regions, robot model) is
abstracted into a weighted transition system by running a tube-based
navigation controller between regions; the task formula is compiled into a
timed automaton; a search in their product yields a timed plan; the plan is
executed on the disturbed system and independently verified.
"""

from .abstraction import Wts, build_wts, load_wts, save_wts
from .errors import TubeplanError
from .harness import Trace, execute_plan, export_trace, import_trace, verify_trace
from .mitl import TimedWord, monitor, parse, to_string
from .scenario import Scenario, default_scenario, load_scenario
from .synthesis import Plan, find_accepting_run, load_plan, save_plan, synthesize
from .tba import accepts_word, build_tba

__version__ = "0.1.0"

__all__ = [
    "Plan",
    "Scenario",
    "TimedWord",
    "Trace",
    "TubeplanError",
    "Wts",
    "accepts_word",
    "build_tba",
    "build_wts",
    "default_scenario",
    "execute_plan",
    "export_trace",
    "find_accepting_run",
    "import_trace",
    "load_plan",
    "load_scenario",
    "load_wts",
    "monitor",
    "parse",
    "save_plan",
    "save_wts",
    "synthesize",
    "to_string",
    "verify_trace",
    "__version__",
]
