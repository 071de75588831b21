"""Allen interval algebra reasoning over a difference-logic engine."""

from .algebra import Base, UNIVERSAL, EMPTY, relation, tokens, converse, converse_rel, compose, build_table
from .diffengine import DiffEngine, DifferenceConstraint, Conflict
from .network import QCN, parse_qcn, serialize_qcn, algebraic_closure
from .solver import SolverOptions, solve_sat, backbone, union_labels, enumerate_scenarios

__version__ = "0.1.0"
