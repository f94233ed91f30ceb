"""Token-guided graph rewriting for three lambda-calculus strategies.

The package pairs a small-step reference evaluator (`smallstep`) with a
graph-rewriting token machine (`machine`) over translated term graphs
(`translate`, `graph`), two read-only token-passing baselines
(`baselines`), scaling benchmarks (`bench`), a random-term corpus
(`corpus`), and a command-line workbench (`cli`).
"""

from .baselines import BaselineReport, JumpMachine, SignatureMachine
from .bench import BenchRow, bench_rows, family_term, ratio_checks
from .corpus import generate
from .graph import Graph, isomorphic, structural_hash, to_dot
from .machine import CosimReport, Machine, MachineReport, cosimulate
from .smallstep import EvalReport, evaluate
from .terms import Strategy, Term, alpha_eq, parse, render, size
from .translate import readback, translate_term

__all__ = [
    "BaselineReport",
    "BenchRow",
    "CosimReport",
    "EvalReport",
    "Graph",
    "JumpMachine",
    "Machine",
    "MachineReport",
    "SignatureMachine",
    "Strategy",
    "Term",
    "alpha_eq",
    "bench_rows",
    "cosimulate",
    "evaluate",
    "family_term",
    "generate",
    "isomorphic",
    "parse",
    "ratio_checks",
    "readback",
    "render",
    "size",
    "structural_hash",
    "to_dot",
    "translate_term",
]

__version__ = "0.1.0"
