"""Verifier back ends: format writers, output parsing, built-in verifiers."""

from .outcome import (
    BackendDescriptor,
    VerifierOutcome,
    parse_verifier_output,
    register_parser,
    OUTPUT_PARSERS,
)
from .layers import Layer, to_layers, layers_to_graph
from .nnet import write_nnet, read_nnet
from .rlv import write_rlv, read_rlv, rlv_evaluate, rlv_output_names, rlv_to_graph
from .vnnlib import write_vnnlib, read_vnnlib
from .ibp import ibp_verify, interval_bounds
from .falsify import sample_falsify

DESCRIPTORS = {
    d.name: d
    for d in (
        BackendDescriptor("ibp", "general", "box"),
        BackendDescriptor("sample", "general", "halfspace-polytope"),
        BackendDescriptor("nnet", "sequential-relu", "box", (".nnet",)),
        BackendDescriptor("rlv", "sequential-relu", "halfspace-polytope", (".rlv",)),
        BackendDescriptor("vnnlib", "general", "halfspace-polytope", (".vnnlib", ".onnx")),
    )
}
