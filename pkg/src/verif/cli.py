"""Command line entry point.

    verif <property> <verifier> --network <name> <path> [options]

The verifier is one of the built-ins (ibp, sample) or a plugin name from
a registry file. Property parameters are passed as ``--prop.<name>
<value>``. The final verdict prints as ``result: <status>`` with the
translate/verify times; a violation is written next to the property file
as an NPY tensor and its path printed. ``--format line`` instead prints
exactly one machine-readable line:

    result=<status> translate=<seconds> verify=<seconds>
        [counterexample=<path>] [reason=<shell-quoted text>]

(one line; fields space separated, in that order). Exit code 0 for any
completed verdict, 2 for usage errors, 3 for internal errors.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path

import numpy as np

from .errors import MissingNetwork, MissingParameter, VerifError
from .onnx_io import parse_onnx
from .properties import bind, parse_dnnp_file
from .runner import BUILTIN_VERIFIERS, RunOptions, load_plugins, run

__all__ = ["main", "console_main", "build_arg_parser"]


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="verif",
        description="Verify a property of an ONNX network with a chosen verifier.",
        epilog="Property parameters: --prop.<name> <value> (repeatable).",
    )
    p.add_argument("property", help="property specification file (.dnnp)")
    p.add_argument("verifier", help=f"verifier name: {', '.join(BUILTIN_VERIFIERS)}, or a plugin")
    p.add_argument(
        "--network",
        nargs=2,
        action="append",
        metavar=("NAME", "PATH"),
        default=[],
        help="bind a property network name to an ONNX file (repeatable)",
    )
    p.add_argument("--seed", type=int, default=0, help="random seed for sampling verifiers")
    p.add_argument("--timeout", type=float, default=60.0, help="per-problem timeout in seconds")
    p.add_argument("--jobs", type=int, default=1, help="reduced problems verified in parallel")
    p.add_argument("--format", choices=("human", "line"), default="human", help="output style")
    p.add_argument("--save-violation", metavar="PATH", default=None, help="where to write a violation (NPY)")
    p.add_argument("--plugins", metavar="PATH", default=None, help="extra plugin registry file")
    return p


def _split_prop_args(argv):
    """Pull ``--prop.<name> <value>`` pairs out of the raw argument list."""
    rest = []
    params = {}
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg.startswith("--prop."):
            name = arg[len("--prop.") :]
            if "=" in name:
                name, value = name.split("=", 1)
            else:
                if i + 1 >= len(argv):
                    raise VerifError(f"--prop.{name} needs a value")
                value = argv[i + 1]
                i += 1
            if not name:
                raise VerifError("--prop. needs a parameter name")
            params[name] = value
        else:
            rest.append(arg)
        i += 1
    return rest, params


def _property_graph(bound, networks):
    """The graph the property actually applies (not just the first binding)."""
    from .properties.nodes import NetworkApply, walk

    for node in walk(bound):
        if isinstance(node, NetworkApply) and node.network.graph is not None:
            return node.network.graph
    return next(iter(networks.values()))


def _violation_path(args) -> Path:
    if args.save_violation:
        return Path(args.save_violation)
    prop = Path(args.property)
    return prop.with_name(prop.stem + ".counterexample.npy")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_arg_parser()
    try:
        rest, prop_params = _split_prop_args(argv)
    except VerifError as e:
        parser.print_usage(sys.stderr)
        print(f"verif: error: {e}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(rest)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        prop, decls, net_refs = parse_dnnp_file(args.property)
        if not args.network:
            parser.print_usage(sys.stderr)
            print("verif: error: at least one --network <name> <path> is required", file=sys.stderr)
            return 2
        networks = {}
        for name, path in args.network:
            graph, _meta = parse_onnx(path)
            networks[name] = graph
        verifier = args.verifier
        if verifier not in BUILTIN_VERIFIERS:
            plugins = load_plugins([args.plugins] if args.plugins else None)
            if verifier not in plugins:
                parser.print_usage(sys.stderr)
                known = sorted(set(BUILTIN_VERIFIERS) | set(plugins))
                print(
                    f"verif: error: unknown verifier {verifier!r} (known: {', '.join(known)})",
                    file=sys.stderr,
                )
                return 2
            verifier = plugins[verifier]
        bound = bind(prop, prop_params, networks)
    except (MissingParameter, MissingNetwork) as e:
        parser.print_usage(sys.stderr)
        print(f"verif: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        parser.print_usage(sys.stderr)
        print(f"verif: error: {e}", file=sys.stderr)
        return 2
    except VerifError as e:
        print(f"verif: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # unexpected: report and signal an internal failure
        print(f"verif: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3

    try:
        options = RunOptions(seed=args.seed, timeout=args.timeout, jobs=args.jobs)
        report = run((_property_graph(bound, networks), bound), verifier, options)
        cx_path = None
        if report.status == "sat" and report.counterexample is not None:
            cx_path = _violation_path(args)
            np.save(cx_path, report.counterexample.data)
        _print_report(report, cx_path, args.format)
        return 0
    except VerifError as e:
        print(f"verif: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except Exception as e:
        print(f"verif: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


def _print_report(report, cx_path, style: str) -> None:
    if style == "line":
        parts = [
            f"result={report.status}",
            f"translate={report.translation_time:.3f}",
            f"verify={report.verification_time:.3f}",
        ]
        if cx_path is not None:
            parts.append(f"counterexample={cx_path}")
        if report.reason:
            parts.append(f"reason={shlex.quote(report.reason)}")
        print(" ".join(parts))
        return
    print(f"result: {report.status}")
    print(f"time: {report.translation_time:.3f}s + {report.verification_time:.3f}s")
    if cx_path is not None:
        print(f"counterexample: {cx_path}")
    if report.reason:
        print(f"reason: {report.reason}")


def console_main() -> None:
    raise SystemExit(main())
