"""Verification-problem front end for deep neural networks.

Ingests ONNX models and property specifications, simplifies the operation
graph, reduces the property to canonical reachability problems, translates
them to verifier input formats, runs verifiers (built-in or external
plugins), and validates the verdict.
"""

from .ir import (
    GraphBuilder,
    Operation,
    OperationGraph,
    TensorValue,
    chain_graphs,
    match_pattern,
    structurally_equal,
    topological_order,
)
from .execute import infer, infer_many
from .onnx_io import ModelMetadata, parse_onnx, serialize_onnx
from .simplify import SimplifyReport, simplify
from .properties import bind, canonicalize, holds_at, parse_dnnp, parse_dnnp_file
from .reduce import (
    HalfspacePolytope,
    LinearAtom,
    ReducedProblem,
    construct_suffix,
    disjunct_to_hpolytope,
    map_counterexample,
    negate_and_dnf,
    reduce,
)
from .backends import VerifierOutcome, ibp_verify, sample_falsify, to_layers
from .runner import RunOptions, RunReport, VerifierPlugin, aggregate, run, validate_counterexample

__version__ = "0.1.0"
