"""Bézier KANs trained by compiling the MSE objective to a binary polynomial and annealing it."""
from .binpoly import BinaryPolynomial
from .encoding import EncodingSpec
from .network import DecodedModel, KanSpec, VariableLayout
from .objective import Dataset, ObjectiveConfig, assemble
from .reduction import QuboProblem, reduce
from .session import add_samples, build_state, load_state, remove_samples, retrain, save_state
from .solver import AnnealSchedule, anneal, brute_force, solve

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule", "BinaryPolynomial", "Dataset", "DecodedModel", "EncodingSpec", "KanSpec",
    "ObjectiveConfig", "QuboProblem", "VariableLayout", "add_samples", "anneal", "assemble",
    "brute_force", "build_state", "load_state", "reduce", "remove_samples", "retrain",
    "save_state", "solve",
]
