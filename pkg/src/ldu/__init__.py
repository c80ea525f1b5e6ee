"""Learning to defer with ensemble uncertainty (LDU), with the LD and DT
baselines, on small from-scratch networks."""
from ._backend import BACKEND
from .errors import InvalidArgumentError, ParseError, TrainingDivergedError
from .triage import DEFER

__version__ = "0.1.0"
