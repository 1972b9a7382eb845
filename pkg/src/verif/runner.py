"""Verification orchestration: dispatch, validation, and aggregation.

The pipeline simplifies the network, reduces the bound property to
canonical reachability problems, re-simplifies each suffixed network,
translates problems to the chosen backend, dispatches (built-in verifier
or external process), validates any claimed counterexample against the
original property, and folds per-problem outcomes into one verdict.
A sat outcome whose counterexample fails validation is downgraded to an
error; the runner never reports sat on an unvalidated witness.
"""

from __future__ import annotations

import configparser
import os
import shlex
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import NotAViolation, PluginError, ShapeMismatch, VerifError
from .ir import OperationGraph, TensorValue
from .properties.canonical import canonicalize
from .properties.interp import holds_at
from .properties.nodes import Forall
from .backends import DESCRIPTORS, parse_verifier_output, write_nnet, write_rlv, write_vnnlib
from .backends.falsify import sample_falsify
from .backends.ibp import ibp_verify
from .backends.outcome import VerifierOutcome
from .reduce import ReducedProblem, map_counterexample, reduce
from .simplify import simplify

__all__ = [
    "VerifierPlugin",
    "RunOptions",
    "RunReport",
    "validate_counterexample",
    "aggregate",
    "run",
    "load_plugins",
    "PLUGIN_PATH_VAR",
    "BUILTIN_VERIFIERS",
]

PLUGIN_PATH_VAR = "VERIF_PLUGIN_PATH"
BUILTIN_VERIFIERS = ("ibp", "sample")

_FORMATS = ("nnet", "rlv", "vnnlib")


@dataclass
class VerifierPlugin:
    """An external verifier: executable, argument template, output parser.

    The argument template may reference {nnet}, {rlv}, {vnnlib}, {onnx},
    {timeout}, and {seed}; emitted files land in a per-problem scratch
    directory.
    """

    name: str
    executable: str
    args: str = "{rlv}"
    format: str = "rlv"
    parser: str = "generic"
    timeout: float = 60.0

    def __post_init__(self):
        if self.format not in _FORMATS:
            raise PluginError(f"plugin {self.name!r}: unknown format {self.format!r}")
        exe = Path(self.executable)
        if not exe.exists():
            raise PluginError(f"plugin {self.name!r}: executable {self.executable!r} does not exist")


@dataclass
class RunOptions:
    seed: int = 0
    timeout: float = 60.0
    jobs: int = 1
    sample_budget: int = 10000


@dataclass
class RunReport:
    """Aggregated verdict plus everything observed along the way."""

    status: str
    counterexample: Optional[TensorValue] = None
    reason: Optional[str] = None
    outcomes: dict = field(default_factory=dict)  # problem index -> VerifierOutcome
    problem_count: int = 0
    translation_time: float = 0.0
    verification_time: float = 0.0


def validate_counterexample(problem, x) -> bool:
    """True iff ``x`` really falsifies the original property.

    ``problem`` is the (graph, bound property) pair as given by the user,
    before simplification. The witness must satisfy the pre-condition and
    its network output must break the post-condition, which is exactly
    "the property body evaluates false at x".
    """
    graph, prop = problem
    arr = np.asarray(x.data if isinstance(x, TensorValue) else x, dtype=np.float64)
    want = tuple(graph.input_shapes[0])
    if int(np.prod(arr.shape)) != int(np.prod(want)):
        raise ShapeMismatch(f"counterexample has shape {arr.shape}, network expects {want}")
    return not holds_at(prop, arr.reshape(want))


def aggregate(outcomes) -> str:
    """Fold per-problem outcomes: the property is falsified by any sat,
    holds when every problem is unsat, and is otherwise error/unknown."""
    statuses = [o.status for o in outcomes]
    if any(s == "sat" for s in statuses):
        return "sat"
    if statuses and all(s == "unsat" for s in statuses):
        return "unsat"
    if not statuses:
        return "unsat"  # an empty reduction is vacuously valid
    if any(s == "error" for s in statuses):
        return "error"
    return "unknown"


def _dispatch_builtin(name: str, rp: ReducedProblem, options: RunOptions) -> VerifierOutcome:
    if name == "ibp":
        return ibp_verify(rp, timeout=options.timeout)
    return sample_falsify(rp, budget=options.sample_budget, seed=options.seed, timeout=options.timeout)


def _dispatch_external(plugin: VerifierPlugin, rp: ReducedProblem, options: RunOptions):
    """Write the problem files, invoke the executable, parse its output.

    Returns (outcome, translation_seconds).
    """
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="verif-") as tmp:
        base = Path(tmp) / f"problem{rp.disjunct_index}"
        mapping = {
            "timeout": str(plugin.timeout or options.timeout),
            "seed": str(options.seed),
        }
        try:
            if plugin.format == "nnet":
                mapping["nnet"] = str(base.with_suffix(".nnet"))
                write_nnet(rp, mapping["nnet"])
            elif plugin.format == "rlv":
                mapping["rlv"] = str(base.with_suffix(".rlv"))
                write_rlv(rp, mapping["rlv"])
            else:
                mapping["onnx"] = str(base.with_suffix(".onnx"))
                mapping["vnnlib"] = str(base.with_suffix(".vnnlib"))
                write_vnnlib(rp, mapping["onnx"], mapping["vnnlib"])
        except VerifError as e:
            return VerifierOutcome("error", reason=f"translation failed: {e}"), time.perf_counter() - t0
        try:
            argv = [plugin.executable] + [
                a.format_map(mapping) for a in shlex.split(plugin.args)
            ]
        except KeyError as e:
            return (
                VerifierOutcome("error", reason=f"argument template references unknown {e}"),
                time.perf_counter() - t0,
            )
        translation = time.perf_counter() - t0
        timeout = plugin.timeout or options.timeout
        try:
            proc = subprocess.run(
                argv,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                text=True,
                timeout=timeout or None,
            )
        except subprocess.TimeoutExpired:
            return VerifierOutcome("unknown"), translation
        except (OSError, ValueError) as e:
            return VerifierOutcome("error", reason=f"executable not found or failed: {e}"), translation
        if proc.returncode == 127:
            return VerifierOutcome("error", reason="executable not found or failed"), translation
        return parse_verifier_output(plugin.parser, proc.stdout, proc.returncode), translation


def _check_sat(outcome: VerifierOutcome, rp: ReducedProblem, original) -> VerifierOutcome:
    """Validate a sat outcome's witness; downgrade to error if it lies."""
    if outcome.status != "sat":
        return outcome
    try:
        mapped = map_counterexample(rp, outcome.counterexample.data)
        if validate_counterexample(original, mapped):
            return replace(outcome, counterexample=mapped)
    except (NotAViolation, ShapeMismatch, VerifError):
        pass
    return VerifierOutcome(
        "error",
        reason="unvalidated counterexample",
        translation_time=outcome.translation_time,
        verification_time=outcome.verification_time,
    )


def run(problem, verifier, options: Optional[RunOptions] = None) -> RunReport:
    """Verify ``problem`` (graph, bound property) with one verifier.

    ``verifier`` is "ibp", "sample", or a VerifierPlugin. Each reduced
    problem is dispatched independently (up to ``options.jobs`` at a
    time); dispatch short-circuits on the first validated violation.
    """
    options = options or RunOptions()
    graph, prop = problem
    if not isinstance(prop, Forall):
        raise VerifError("run() takes a bound property (a Forall)")
    report = RunReport(status="unknown")
    t0 = time.perf_counter()
    try:
        simplified, _ = simplify(graph)
        canon = canonicalize(prop)
        problems = reduce(simplified, canon)
        prepared = []
        for rp in problems:
            net, _ = simplify(rp.network)
            prepared.append(replace(rp, network=net))
    except VerifError as e:
        report.status = "error"
        report.reason = f"translation failed: {e}"
        report.translation_time = time.perf_counter() - t0
        return report
    report.problem_count = len(prepared)
    report.translation_time = time.perf_counter() - t0

    def dispatch(rp: ReducedProblem) -> VerifierOutcome:
        if isinstance(verifier, str):
            if verifier not in BUILTIN_VERIFIERS:
                raise VerifError(f"unknown verifier {verifier!r}")
            try:
                out = _dispatch_builtin(verifier, rp, options)
            except VerifError as e:
                return VerifierOutcome("error", reason=str(e))
            return _check_sat(out, rp, problem)
        out, extra_translation = _dispatch_external(verifier, rp, options)
        out = _check_sat(out, rp, problem)
        return replace(out, translation_time=out.translation_time + extra_translation)

    tv0 = time.perf_counter()
    if options.jobs <= 1:
        for rp in prepared:
            outcome = dispatch(rp)
            report.outcomes[rp.disjunct_index] = outcome
            if outcome.status == "sat":
                break
    else:
        with ThreadPoolExecutor(max_workers=options.jobs) as pool:
            futures = {rp.disjunct_index: pool.submit(dispatch, rp) for rp in prepared}
            for idx, fut in futures.items():
                report.outcomes[idx] = fut.result()
    report.verification_time = time.perf_counter() - tv0
    report.translation_time += sum(o.translation_time for o in report.outcomes.values())

    report.status = aggregate(report.outcomes.values())
    if report.status == "sat":
        # counterexample choice is fixed by disjunct index order
        for idx in sorted(report.outcomes):
            if report.outcomes[idx].status == "sat":
                report.counterexample = report.outcomes[idx].counterexample
                break
    elif report.status == "error":
        reasons = [o.reason for o in report.outcomes.values() if o.reason]
        report.reason = "; ".join(dict.fromkeys(reasons)) or "verifier error"
    return report


def load_plugins(paths=None) -> dict:
    """Read plugin registries into a name -> VerifierPlugin map.

    Files are INI style, one section per plugin, keys: executable (required),
    args, format, parser, timeout. Paths listed in the VERIF_PLUGIN_PATH
    environment variable (``os.pathsep`` separated) are searched first,
    then any ``paths`` given, then ./verif-plugins.cfg.
    """
    search: list = []
    env = os.environ.get(PLUGIN_PATH_VAR, "")
    for entry in env.split(os.pathsep):
        if entry:
            search.append(Path(entry))
    for entry in paths or ():
        search.append(Path(entry))
    search.append(Path("verif-plugins.cfg"))
    plugins: dict[str, VerifierPlugin] = {}
    for path in search:
        if path.is_dir():
            path = path / "verif-plugins.cfg"
        if not path.is_file():
            continue
        cp = configparser.ConfigParser()
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise PluginError(f"cannot parse plugin registry {path}: {e}") from e
        for section in cp.sections():
            if section in plugins:
                continue  # earlier registries win
            items = cp[section]
            if "executable" not in items:
                raise PluginError(f"plugin {section!r} in {path} lacks an executable")
            plugins[section] = VerifierPlugin(
                name=section,
                executable=items["executable"],
                args=items.get("args", "{rlv}"),
                format=items.get("format", "rlv"),
                parser=items.get("parser", "generic"),
                timeout=float(items.get("timeout", 60.0)),
            )
    return plugins
