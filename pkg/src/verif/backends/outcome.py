"""Verifier outcome type and output-text parsing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import PluginError
from ..ir import TensorValue

__all__ = [
    "VerifierOutcome",
    "BackendDescriptor",
    "parse_verifier_output",
    "register_parser",
    "OUTPUT_PARSERS",
]

_STATUSES = ("sat", "unsat", "unknown", "error")


@dataclass
class VerifierOutcome:
    """Result of one verifier run on one reduced problem."""

    status: str
    counterexample: Optional[TensorValue] = None
    reason: Optional[str] = None
    translation_time: float = 0.0
    verification_time: float = 0.0

    def __post_init__(self):
        if self.status not in _STATUSES:
            raise ValueError(f"bad outcome status {self.status!r}")
        if (self.counterexample is not None) != (self.status == "sat"):
            raise ValueError("a counterexample accompanies exactly the sat status")
        if (self.reason is not None) != (self.status == "error"):
            raise ValueError("an error reason accompanies exactly the error status")


@dataclass(frozen=True)
class BackendDescriptor:
    """What a backend can consume, used to pick translators and validate problems."""

    name: str
    network_shape: str  # "sequential-relu" | "general"
    input_support: str  # "box" | "halfspace-polytope"
    extensions: tuple = ()

    def __post_init__(self):
        if self.network_shape not in ("sequential-relu", "general"):
            raise ValueError(f"bad network shape {self.network_shape!r}")
        if self.input_support not in ("box", "halfspace-polytope"):
            raise ValueError(f"bad input support {self.input_support!r}")


_SAT_WORDS = {"sat", "violated", "falsified", "unsafe"}
_UNSAT_WORDS = {"unsat", "holds", "proven", "valid", "safe"}
_UNKNOWN_WORDS = {"unknown", "timeout", "inconclusive"}

_NUM_LINE = re.compile(r"^[\s\[\](),;:xX=+-]*[-+]?(\d|\.\d)")
_NUM = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def _generic_parser(stdout: str, exit_code: int) -> VerifierOutcome:
    """Line-oriented result scan shared by well-behaved verifiers.

    The first line that reads (case-insensitively) sat / unsat / unknown,
    or a listed synonym, decides the status. For sat, all numbers on the
    following numeric-looking lines form the counterexample, until the
    first line that has none.
    """
    lines = stdout.splitlines()
    for i, line in enumerate(lines):
        token = line.strip().lower()
        if token in _UNSAT_WORDS:
            return VerifierOutcome("unsat")
        if token in _UNKNOWN_WORDS:
            return VerifierOutcome("unknown")
        if token in _SAT_WORDS:
            values: list = []
            for rest in lines[i + 1 :]:
                if not rest.strip() or not _NUM_LINE.match(rest):
                    if values:
                        break
                    continue
                values.extend(float(m.group(0)) for m in _NUM.finditer(rest))
            if not values:
                return VerifierOutcome(
                    "error", reason="verifier reported sat without a counterexample"
                )
            return VerifierOutcome("sat", counterexample=TensorValue(np.array(values)))
    if exit_code != 0:
        tail = stdout.strip().splitlines()[-3:]
        return VerifierOutcome("error", reason=f"exit code {exit_code}: {' / '.join(tail) or 'no output'}")
    return VerifierOutcome("error", reason="unrecognized verifier output")


OUTPUT_PARSERS: dict[str, Callable[[str, int], VerifierOutcome]] = {"generic": _generic_parser}


def register_parser(name: str, fn: Callable[[str, int], VerifierOutcome]) -> None:
    OUTPUT_PARSERS[name] = fn


def parse_verifier_output(backend: str, stdout: str, exit_code: int) -> VerifierOutcome:
    """Map a verifier's raw stdout and exit code to an outcome."""
    parser = OUTPUT_PARSERS.get(backend, OUTPUT_PARSERS["generic"])
    try:
        return parser(stdout, exit_code)
    except Exception as e:  # a broken parser must not crash the pipeline
        return VerifierOutcome("error", reason=f"output parser failed: {e}")
