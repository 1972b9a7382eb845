"""Property specification front end.

A specification is a UTF-8 source file with three sections: whitelisted
imports (``data`` for tensor loading, ``math`` for scalar helpers), a
sequence of variable assignments, and a final property expression that
must be a single ``Forall``. The surface syntax is Python expression
syntax; the stdlib parser does tokenization and precedence, and a strict
node whitelist rejects everything outside the property language
(statements other than import/assign, calls to unknown functions,
comprehensions, and so on).

Concrete subexpressions evaluate eagerly during parsing; parameters,
networks, and the quantified symbol stay symbolic until binding.
"""

from __future__ import annotations

import ast
import math as _math
from pathlib import Path

import numpy as np

from ..errors import (
    DnnpSyntaxError,
    NonTerminalExpression,
    UnboundName,
    UnknownImport,
    UnsupportedExpression,
)
from .nodes import (
    And,
    ArgCmp,
    Arith,
    BoolConst,
    Compare,
    Constant,
    Expr,
    Forall,
    Implies,
    IndexExpr,
    NetworkApply,
    NetworkRef,
    Not,
    Or,
    ParamRef,
    ParameterDecl,
    Symbol,
)

__all__ = ["parse_dnnp", "parse_dnnp_file", "load_tensor_file"]


def load_tensor_file(path) -> np.ndarray:
    """Read an NPY or CSV tensor file as float64 (the ``data.load`` builtin)."""
    p = Path(path)
    if p.suffix.lower() == ".npy":
        arr = np.load(p, allow_pickle=False)
        return np.asarray(arr, dtype=np.float64)
    if p.suffix.lower() == ".csv":
        return np.atleast_1d(np.loadtxt(p, delimiter=",", dtype=np.float64))
    raise UnsupportedExpression(f"data.load supports .npy and .csv files, not {p.suffix!r}")


class _DataModule:
    """The ``data`` import: tensor-file loading only."""

    @staticmethod
    def load(path):
        return load_tensor_file(path)


_WHITELIST_MODULES = {"data": _DataModule, "math": _math}

_CMP_OPS = {
    ast.Lt: "<",
    ast.LtE: "<=",
    ast.Gt: ">",
    ast.GtE: ">=",
    ast.Eq: "==",
    ast.NotEq: "!=",
}

_BIN_OPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}


def _is_concrete(v) -> bool:
    return isinstance(v, (int, float, bool, np.ndarray, np.generic, str))


def _is_boolish(v) -> bool:
    if isinstance(v, (bool, np.bool_)):
        return True
    return isinstance(v, (And, Or, Not, Implies, Compare, BoolConst, Forall))


class _SpecContext:
    """Mutable state threaded through one specification parse."""

    def __init__(self):
        self.env: dict = {"int": int, "float": float, "True": True, "False": False}
        self.params: dict[str, ParameterDecl] = {}
        self.networks: dict[str, NetworkRef] = {}


def _syntax_error(msg, node) -> DnnpSyntaxError:
    return DnnpSyntaxError(msg, getattr(node, "lineno", 0), getattr(node, "col_offset", 0))


def _to_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (bool, np.bool_)):
        return BoolConst(bool(v))
    return Constant(v)


def _fold_compare(op: str, a, b):
    with np.errstate(invalid="ignore"):
        if op == "<":
            r = np.less(a, b)
        elif op == "<=":
            r = np.less_equal(a, b)
        elif op == ">":
            r = np.greater(a, b)
        elif op == ">=":
            r = np.greater_equal(a, b)
        elif op == "==":
            r = np.equal(a, b)
        else:
            r = np.not_equal(a, b)
    return bool(np.all(r))


def _fold_arith(op: str, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b


class _Evaluator:
    def __init__(self, ctx: _SpecContext):
        self.ctx = ctx

    # -- dispatch ---------------------------------------------------------

    def eval(self, node: ast.expr, allow_forall: bool = False):
        meth = getattr(self, f"_eval_{type(node).__name__}", None)
        if meth is None:
            raise _syntax_error(f"{type(node).__name__} syntax is not part of the property language", node)
        return meth(node) if type(node).__name__ != "Call" else meth(node, allow_forall)

    # -- leaves -----------------------------------------------------------

    def _eval_Constant(self, node: ast.Constant):
        if node.value is None or isinstance(node.value, (int, float, str, bool)):
            return node.value
        raise _syntax_error(f"literal {node.value!r} is not supported", node)

    def _eval_Name(self, node: ast.Name):
        try:
            return self.ctx.env[node.id]
        except KeyError:
            raise UnboundName(node.id) from None

    def _eval_Attribute(self, node: ast.Attribute):
        base = self.eval(node.value)
        if base is _math:
            if hasattr(_math, node.attr) and not node.attr.startswith("_"):
                return getattr(_math, node.attr)
            raise UnboundName(f"math.{node.attr}")
        if base is _DataModule:
            if node.attr == "load":
                return _DataModule.load
            raise UnboundName(f"data.{node.attr}")
        raise _syntax_error("attribute access is only allowed on imported modules", node)

    # -- operators ----------------------------------------------------------

    def _eval_UnaryOp(self, node: ast.UnaryOp):
        v = self.eval(node.operand)
        if isinstance(node.op, ast.USub):
            if _is_concrete(v):
                return -v if not isinstance(v, str) else self._bad(node)
            return Arith("*", Constant(-1.0), _to_expr(v))
        if isinstance(node.op, ast.UAdd):
            return v
        if isinstance(node.op, ast.Invert):
            if not _is_boolish(v):
                raise _syntax_error("~ applies to logical expressions only", node)
            if isinstance(v, (bool, np.bool_)):
                return not bool(v)
            return Not(_to_expr(v))
        if isinstance(node.op, ast.Not):
            raise _syntax_error("use ~ or Not(...) for negation", node)
        raise _syntax_error("unsupported unary operator", node)

    def _bad(self, node):
        raise _syntax_error("operands are not numeric", node)

    def _eval_BinOp(self, node: ast.BinOp):
        if isinstance(node.op, (ast.BitAnd, ast.BitOr)):
            a, b = self.eval(node.left), self.eval(node.right)
            if not (_is_boolish(a) and _is_boolish(b)):
                raise _syntax_error("& and | combine logical expressions", node)
            if isinstance(a, (bool, np.bool_)) and isinstance(b, (bool, np.bool_)):
                return bool(a) and bool(b) if isinstance(node.op, ast.BitAnd) else bool(a) or bool(b)
            ctor = And if isinstance(node.op, ast.BitAnd) else Or
            return ctor((_to_expr(a), _to_expr(b)))
        op = _BIN_OPS.get(type(node.op))
        if op is None:
            raise _syntax_error(f"operator {type(node.op).__name__} is not supported", node)
        a, b = self.eval(node.left), self.eval(node.right)
        if _is_concrete(a) and _is_concrete(b):
            if isinstance(a, str) or isinstance(b, str):
                raise _syntax_error("arithmetic on strings", node)
            return _fold_arith(op, a, b)
        return Arith(op, _to_expr(a), _to_expr(b))

    def _eval_BoolOp(self, node: ast.BoolOp):
        raise _syntax_error("use And(...)/Or(...) or &/| instead of 'and'/'or'", node)

    def _eval_Compare(self, node: ast.Compare):
        operands = [self.eval(node.left)] + [self.eval(c) for c in node.comparators]
        parts = []
        for i, op_node in enumerate(node.ops):
            op = _CMP_OPS.get(type(op_node))
            if op is None:
                raise _syntax_error(f"comparison {type(op_node).__name__} is not supported", node)
            a, b = operands[i], operands[i + 1]
            if _is_concrete(a) and _is_concrete(b):
                parts.append(_fold_compare(op, a, b))
            else:
                parts.append(Compare(op, _to_expr(a), _to_expr(b)))
        if len(parts) == 1:
            return parts[0]
        # chained comparison: a <= b <= c is And(a <= b, b <= c)
        if all(isinstance(p, bool) for p in parts):
            return all(parts)
        return And(tuple(_to_expr(p) for p in parts))

    def _eval_Subscript(self, node: ast.Subscript):
        base = self.eval(node.value)
        key = self._eval_key(node.slice)
        if _is_concrete(base) and _key_concrete(key):
            try:
                return np.asarray(base, dtype=np.float64)[key]
            except (IndexError, TypeError) as e:
                raise _syntax_error(f"bad index: {e}", node)
        return IndexExpr(_to_expr(base), key)

    def _eval_key(self, node):
        if isinstance(node, ast.Tuple):
            return tuple(self._eval_key(e) for e in node.elts)
        if isinstance(node, ast.Slice):
            def part(x):
                return None if x is None else self._eval_key(x)

            return slice(part(node.lower), part(node.upper), part(node.step))
        v = self.eval(node)
        if v is None or isinstance(v, (int, np.integer)):
            return v if v is None else int(v)
        if isinstance(v, ParamRef):
            return v
        if isinstance(v, float) and float(v).is_integer():
            return int(v)
        raise _syntax_error("indices must be integers, slices, or None", node)

    def _eval_Tuple(self, node: ast.Tuple):
        return tuple(self.eval(e) for e in node.elts)

    def _eval_List(self, node: ast.List):
        vals = [self.eval(e) for e in node.elts]
        if all(_is_concrete(v) and not isinstance(v, str) for v in vals):
            return np.asarray(vals, dtype=np.float64)
        raise _syntax_error("list literals must be fully concrete", node)

    # -- calls -----------------------------------------------------------

    def _eval_Call(self, node: ast.Call, allow_forall: bool = False):
        fname = node.func.id if isinstance(node.func, ast.Name) else None
        if fname == "Forall":
            if not allow_forall:
                raise _syntax_error("Forall must be the outermost expression of the property", node)
            return self._forall(node)
        if fname in ("And", "Or"):
            args = [self.eval(a) for a in node.args]
            if not args:
                raise _syntax_error(f"{fname}() needs at least one argument", node)
            if not all(_is_boolish(a) for a in args):
                raise _syntax_error(f"{fname}() combines logical expressions", node)
            if all(isinstance(a, (bool, np.bool_)) for a in args):
                return all(map(bool, args)) if fname == "And" else any(map(bool, args))
            ctor = And if fname == "And" else Or
            return ctor(tuple(_to_expr(a) for a in args))
        if fname == "Implies":
            if len(node.args) != 2:
                raise _syntax_error("Implies takes two arguments", node)
            a, b = (self.eval(x) for x in node.args)
            if not (_is_boolish(a) and _is_boolish(b)):
                raise _syntax_error("Implies combines logical expressions", node)
            if isinstance(a, (bool, np.bool_)) and isinstance(b, (bool, np.bool_)):
                return (not a) or bool(b)
            return Implies(_to_expr(a), _to_expr(b))
        if fname == "Not":
            if len(node.args) != 1:
                raise _syntax_error("Not takes one argument", node)
            a = self.eval(node.args[0])
            if isinstance(a, (bool, np.bool_)):
                return not bool(a)
            if not _is_boolish(a):
                raise _syntax_error("Not applies to logical expressions", node)
            return Not(_to_expr(a))
        if fname in ("argmax", "argmin"):
            if len(node.args) != 1:
                raise _syntax_error(f"{fname} takes one argument", node)
            a = self.eval(node.args[0])
            if _is_concrete(a):
                arr = np.asarray(a, dtype=np.float64)
                return int(np.argmax(arr)) if fname == "argmax" else int(np.argmin(arr))
            return ArgCmp(fname, _to_expr(a))
        if fname == "Parameter":
            return self._parameter(node)
        if fname == "Network":
            return self._network(node)
        func = self.eval(node.func)
        if callable(func) and getattr(func, "__module__", "") == "math":
            args = [self.eval(a) for a in node.args]
            if not all(_is_concrete(a) for a in args):
                raise _syntax_error("math functions need concrete arguments", node)
            return func(*args)
        if func is _DataModule.load or func is load_tensor_file:
            args = [self.eval(a) for a in node.args]
            if len(args) != 1 or not isinstance(args[0], str):
                raise _syntax_error("data.load takes one path string", node)
            return _DataModule.load(args[0])
        if isinstance(func, NetworkRef):
            if len(node.args) != 1 or node.keywords:
                raise _syntax_error("a network is applied to exactly one argument", node)
            arg = self.eval(node.args[0])
            return NetworkApply(func, _to_expr(arg))
        raise _syntax_error("call to something that is not a property-language function", node)

    def _forall(self, node: ast.Call):
        if len(node.args) != 2 or node.keywords:
            raise _syntax_error("Forall takes a symbol and a body", node)
        sym_node = node.args[0]
        if not isinstance(sym_node, ast.Name):
            raise _syntax_error("the first argument of Forall must be a fresh name", node)
        name = sym_node.id
        if name in self.ctx.env:
            raise _syntax_error(f"Forall symbol {name!r} shadows an existing definition", node)
        self.ctx.env[name] = Symbol(name)
        try:
            body = self.eval(node.args[1])
        finally:
            del self.ctx.env[name]
        if isinstance(body, (bool, np.bool_)):
            body = BoolConst(bool(body))
        if not isinstance(body, Expr):
            raise _syntax_error("the body of Forall must be a logical expression", node)
        return Forall(name, body)

    def _parameter(self, node: ast.Call):
        if len(node.args) != 1 or not isinstance(node.args[0], ast.Constant) or not isinstance(
            node.args[0].value, str
        ):
            raise _syntax_error("Parameter takes a name string", node)
        name = node.args[0].value
        ptype = None
        default = None
        for kw in node.keywords:
            if kw.arg == "type":
                t = self.eval(kw.value)
                if t is int:
                    ptype = "int"
                elif t is float:
                    ptype = "float"
                else:
                    raise _syntax_error("Parameter type must be int or float", node)
            elif kw.arg == "default":
                default = self.eval(kw.value)
                if not isinstance(default, (int, float)):
                    raise _syntax_error("Parameter default must be a number", node)
            else:
                raise _syntax_error(f"unknown Parameter keyword {kw.arg!r}", node)
        if ptype is None:
            raise _syntax_error("Parameter requires type=int or type=float", node)
        if name in self.ctx.params:
            decl = self.ctx.params[name]
            if decl.type != ptype:
                raise _syntax_error(f"parameter {name!r} redeclared with a different type", node)
        else:
            decl = ParameterDecl(name=name, type=ptype, default=default)
            self.ctx.params[name] = decl
        return ParamRef(decl)

    def _network(self, node: ast.Call):
        if len(node.args) != 1 or node.keywords or not isinstance(node.args[0], ast.Constant):
            raise _syntax_error("Network takes a name string", node)
        name = node.args[0].value
        if not isinstance(name, str):
            raise _syntax_error("Network takes a name string", node)
        # same name, same model
        if name not in self.ctx.networks:
            self.ctx.networks[name] = NetworkRef(name=name)
        return self.ctx.networks[name]


def _key_concrete(key) -> bool:
    if isinstance(key, tuple):
        return all(_key_concrete(k) for k in key)
    if isinstance(key, slice):
        return all(_key_concrete(k) for k in (key.start, key.stop, key.step))
    return key is None or isinstance(key, int)


def parse_dnnp(text: str):
    """Parse a property specification source string.

    Returns ``(property, parameters, networks)``: the unbound Forall
    expression, the declared parameters, and the referenced networks.
    """
    try:
        tree = ast.parse(text)
    except SyntaxError as e:
        raise DnnpSyntaxError(e.msg or "invalid syntax", e.lineno or 0, e.offset or 0) from None
    ctx = _SpecContext()
    ev = _Evaluator(ctx)
    stmts = tree.body
    if not stmts:
        raise DnnpSyntaxError("empty property specification", 0, 0)
    final = stmts[-1]
    if not isinstance(final, ast.Expr):
        raise NonTerminalExpression("the specification must end with the property expression")
    for stmt in stmts[:-1]:
        if isinstance(stmt, ast.Import):
            for alias in stmt.names:
                root = alias.name.split(".")[0]
                if root not in _WHITELIST_MODULES:
                    raise UnknownImport(alias.name)
                ctx.env[alias.asname or root] = _WHITELIST_MODULES[root]
        elif isinstance(stmt, ast.ImportFrom):
            root = (stmt.module or "").split(".")[0]
            if root not in _WHITELIST_MODULES:
                raise UnknownImport(stmt.module or "")
            mod = _WHITELIST_MODULES[root]
            for alias in stmt.names:
                if alias.name == "*":
                    raise _syntax_error("star imports are not supported", stmt)
                if not hasattr(mod, alias.name) or alias.name.startswith("_"):
                    raise UnboundName(f"{root}.{alias.name}")
                ctx.env[alias.asname or alias.name] = getattr(mod, alias.name)
        elif isinstance(stmt, ast.Assign):
            if len(stmt.targets) != 1 or not isinstance(stmt.targets[0], ast.Name):
                raise _syntax_error("assignments bind a single name", stmt)
            ctx.env[stmt.targets[0].id] = ev.eval(stmt.value)
        elif isinstance(stmt, ast.Expr):
            raise NonTerminalExpression("the property expression must appear at the end")
        else:
            raise _syntax_error(
                f"only imports, assignments, and a final property expression are allowed, "
                f"not {type(stmt).__name__}",
                stmt,
            )
    prop = ev.eval(final.value, allow_forall=True)
    if isinstance(prop, Forall):
        pass
    elif isinstance(prop, (bool, np.bool_)):
        raise UnsupportedExpression("the property folded to a constant; it must quantify an input")
    else:
        raise UnsupportedExpression("the property must be a single Forall over the network input")
    return prop, list(ctx.params.values()), list(ctx.networks.values())


def parse_dnnp_file(path):
    """Parse a property specification from a file path."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DnnpSyntaxError(f"cannot read property file: {e}", 0, 0) from None
    return parse_dnnp(text)
