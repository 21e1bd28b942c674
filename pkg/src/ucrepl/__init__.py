"""Update-consistent replicated objects over a simulated partitionable network."""

from .adt import Counter, IntSet, SequentialType, fold, make_type, register
from .checker import check_ec, check_uc, reachable_converged_values
from .history import History, parse, serialize
from .replica import IgnoreUpdatesReplica, LamportPid, PidSeq, Replica
from .simnet import Scenario, parse_scenario, run, simulate

__version__ = "0.1.0"

__all__ = [
    "Counter", "IntSet", "SequentialType", "fold", "make_type", "register",
    "check_ec", "check_uc", "reachable_converged_values",
    "History", "parse", "serialize",
    "IgnoreUpdatesReplica", "LamportPid", "PidSeq", "Replica",
    "Scenario", "parse_scenario", "run", "simulate",
]
