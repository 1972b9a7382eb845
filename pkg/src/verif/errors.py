"""Exception hierarchy shared across the package.

Every error raised by the library derives from :class:`VerifError` so
callers can catch one type at the pipeline boundary.
"""


class VerifError(Exception):
    """Base class for all library errors."""


# --- operation graph / executor ---------------------------------------------

class CycleDetected(VerifError):
    """The edge relation of an operation graph is cyclic."""


class InvalidGraph(VerifError):
    """An operation graph violates a structural invariant."""


class ShapeMismatch(VerifError):
    """Tensor shapes are inconsistent with an operation's shape rule."""


class UnsupportedKind(VerifError):
    """An operation kind (or configuration) the executor cannot evaluate."""


# --- model ingestion ----------------------------------------------------------

class MalformedModel(VerifError):
    """The model file could not be decoded."""


class UnsupportedOperation(VerifError):
    """A model node uses an operation outside the supported subset."""

    def __init__(self, name: str, kind: str, detail: str = ""):
        self.name = name
        self.kind = kind
        msg = f"unsupported operation {kind!r} (node {name!r})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class UnsupportedOpset(MalformedModel):
    """Model opset version outside the accepted range."""

    def __init__(self, version: int, accepted: str = "9-13"):
        self.version = version
        super().__init__(f"opset version {version} not supported (accepted: {accepted})")


class ShapeUnknown(VerifError):
    """A graph input lacks a static shape."""


class IoError(VerifError):
    """Filesystem failure while reading or writing a model or report."""


# --- property DSL -------------------------------------------------------------

class DnnpSyntaxError(VerifError):
    """Syntax error in a property specification source file."""

    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"{message} (line {line}, column {col})")


class UnknownImport(VerifError):
    """Import of a module outside the whitelist."""

    def __init__(self, module: str):
        self.module = module
        super().__init__(f"import of {module!r} is not allowed (whitelist: data, math)")


class UnboundName(VerifError):
    """Reference to a name with no definition in the specification."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"name {name!r} is not defined")


class NonTerminalExpression(VerifError):
    """Statements follow the property formula."""


class UnsupportedExpression(VerifError):
    """Specification uses syntax outside the property language subset."""


class MissingParameter(VerifError):
    """A declared parameter has no runtime value and no default."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"parameter {name!r} requires a value (--prop.{name})")


class MissingNetwork(VerifError):
    """A referenced network name has no bound model."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"network {name!r} has no bound model (--network {name} <path>)")


class NonlinearAtom(VerifError):
    """An atomic constraint is not linear in the input/output variables."""


class MixedAtom(VerifError):
    """An atomic constraint mixes input and output variables."""


# --- reduction ----------------------------------------------------------------

class EmptyPolytope(VerifError):
    """A suffix network was requested for a polytope with no rows."""


class DnfTooLarge(VerifError):
    """Disjunctive normal form would exceed the disjunct budget."""

    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"DNF expansion needs {count} disjuncts (limit {limit})")


class NotAViolation(VerifError):
    """A claimed counterexample does not violate the reduced problem."""


class UnboundedInput(VerifError):
    """The input region has no finite bounding box."""


# --- backends / runner ----------------------------------------------------------

class NotSequential(VerifError):
    """The graph cannot be expressed as a sequential layer stack."""


class UnsupportedInput(VerifError):
    """The input constraint form is not expressible in the target format."""


class NonFlatTensors(VerifError):
    """The network input or output tensor is not flat."""


class PluginError(VerifError):
    """A verifier plugin registration or invocation problem."""
