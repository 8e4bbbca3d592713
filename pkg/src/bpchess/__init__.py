"""bpchess: behavioral-programming features for opening-move prediction.

A behavioral-programming kernel tracks chess "strategies" as b-threads
whose registers snapshot into feature vectors; classical models trained on
those vectors predict which opening move an intermediate-strength player
actually chooses.
"""

from .board import Board, Move, SanError
from .bp import BThread, Event, EventSet, Kernel
from .strategies import FeatureExtractor, FeatureSchema, build_kernel

__version__ = "0.1.0"

__all__ = ["Board", "Move", "SanError", "BThread", "Event", "EventSet",
           "Kernel", "FeatureExtractor", "FeatureSchema", "build_kernel",
           "__version__"]
