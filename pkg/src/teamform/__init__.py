"""Team Formation: gathering tokens into fixed-size teams over an asynchronous network.

The package simulates the protocol on a deterministic event-driven kernel
and ships the invariant checkers, metrics and applications built on it.
"""

from .adversary import make_policy, random_injections
from .checkers import run_checkers
from .config import ConfigError, RunConfig
from .kernel import ExecutionLog, Simulator
from .principal import PairRule, SizeRule
from .protocol import TeamFormation
from .pugraph import PUGraph, verify_properties
from .runner import run

__all__ = ["ConfigError", "ExecutionLog", "PUGraph", "PairRule", "RunConfig", "Simulator",
           "SizeRule", "TeamFormation", "make_policy", "random_injections", "run",
           "run_checkers", "verify_properties"]
