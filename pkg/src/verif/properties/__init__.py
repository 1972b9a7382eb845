"""Property specification language: parsing, binding, canonicalization."""

from . import nodes
from .parser import parse_dnnp, parse_dnnp_file, load_tensor_file
from .binding import bind, fold
from .interp import evaluate, holds_at
from .canonical import LinearAtom, canonicalize
