"""Simulator for opto-electronic fixed-weight learning networks."""

from . import harness, network, optics, pulse, subnet, zoo
from .errors import CompositionError, InvalidArgument, TrainingFailure

__all__ = ["harness", "network", "optics", "pulse", "subnet", "zoo",
           "CompositionError", "InvalidArgument", "TrainingFailure"]
