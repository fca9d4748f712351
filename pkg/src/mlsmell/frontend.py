"""Python source frontend: normalized syntax trees and per-file semantic context.

Analyzed files are parsed with the standard ``ast`` module and converted into
a normalized, immutable-after-build tree of :class:`AstNode`. The tree is
arranged so that pre-order traversal visits nodes in document order: every
node's span is the minimum (line, col) over itself and its descendants, and
children are kept sorted by span. On top of the tree,
:func:`build_context` derives the per-file facts the semantic predicates
need: import aliases, coarse variable taint classes, and statement ordinals.

All analysis is strictly intra-file. No analyzed code is ever imported or
executed.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterator

from .catalog import Catalog, default_catalog


class SyntaxFailure(Exception):
    """Source file could not be parsed; carries the failing position."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


@dataclass(frozen=True)
class SourceFile:
    """One analyzed source file: path, decoded text and physical line count."""

    path: str
    text: str
    loc: int

    @classmethod
    def from_text(cls, path: str, text: str) -> "SourceFile":
        return cls(path=path, text=text, loc=len(text.splitlines()))

    @classmethod
    def from_path(cls, path: str | Path) -> "SourceFile":
        # Lossy decoding is deliberate: a bad byte must not abort a scan.
        raw = Path(path).read_bytes()
        return cls.from_text(str(path), raw.decode("utf-8", errors="replace"))


@dataclass(eq=False)
class AstNode:
    """Normalized syntax-tree node.

    ``kind`` is a backend-independent tag ("call", "attribute-access", ...),
    ``span`` is (1-based line, 0-based col), ``attrs`` holds kind-specific
    fields such as identifier text or literal values, and ``role`` names the
    field this node occupied in its parent ("func", "iter", "body", ...).
    Identity semantics (eq=False) keep nodes hashable for context maps.
    """

    kind: str
    span: tuple[int, int]
    children: list["AstNode"] = field(default_factory=list)
    attrs: dict[str, Any] = field(default_factory=dict)
    role: str | None = None
    parent: "AstNode | None" = field(default=None, repr=False)

    def child(self, role: str) -> "AstNode | None":
        for c in self.children:
            if c.role == role:
                return c
        return None

    def children_with_role(self, role: str) -> list["AstNode"]:
        return [c for c in self.children if c.role == role]


class TaintClass(Enum):
    DATAFRAME = "dataframe"
    SERIES = "series"
    ESTIMATOR = "estimator"
    NEURAL_MODEL = "neural-model"
    OPTIMIZER = "optimizer"
    TENSOR = "tensor"
    SCALER = "scaler"
    SPLIT_RESULT = "split-result"
    UNKNOWN = "unknown"


# Pseudo qualified-name prefix used when resolving method calls on tainted
# variables (e.g. clf.fit -> "sklearn.estimator.fit").
PSEUDO_NAMES: dict[TaintClass, str | None] = {
    TaintClass.DATAFRAME: "pandas.DataFrame",
    TaintClass.SERIES: "pandas.Series",
    TaintClass.ESTIMATOR: "sklearn.estimator",
    TaintClass.NEURAL_MODEL: "neural.model",
    TaintClass.OPTIMIZER: "optim.optimizer",
    TaintClass.TENSOR: "tensor",
    TaintClass.SCALER: "sklearn.scaler",
    TaintClass.SPLIT_RESULT: "split.result",
    TaintClass.UNKNOWN: None,
}

DYNAMIC_IMPORT = "<dynamic>"


@dataclass
class FileContext:
    """Derived per-file facts shared read-only by all predicates."""

    aliases: dict[str, str] = field(default_factory=dict)
    taints: dict[str, TaintClass] = field(default_factory=dict)
    order: dict[AstNode, int] = field(default_factory=dict)
    parse_ok: bool = True
    error: str | None = None
    path: str = ""
    origins: dict[str, str] = field(default_factory=dict)
    neural_classes: set[str] = field(default_factory=set)
    helper_returns: dict[str, tuple[TaintClass, str | None]] = field(default_factory=dict)
    root: AstNode | None = None
    catalog: Catalog = field(default_factory=default_catalog, repr=False)


_KIND_MAP = {
    "Module": "module",
    "FunctionDef": "function-def",
    "AsyncFunctionDef": "function-def",
    "ClassDef": "class-def",
    "Call": "call",
    "Attribute": "attribute-access",
    "Subscript": "subscript",
    "Assign": "assignment",
    "AnnAssign": "assignment",
    "AugAssign": "aug-assignment",
    "For": "loop",
    "AsyncFor": "loop",
    "While": "loop",
    "ListComp": "comprehension",
    "SetComp": "comprehension",
    "DictComp": "comprehension",
    "GeneratorExp": "comprehension",
    "Compare": "comparison",
    "Constant": "literal",
    "Name": "name",
    "keyword": "keyword-argument",
    "Expr": "expression-statement",
    "Import": "import",
    "ImportFrom": "import",
    "BinOp": "binary-op",
    "UnaryOp": "unary-op",
    "BoolOp": "bool-op",
    "Starred": "star-arg",
    "arg": "parameter",
    "arguments": "parameters",
    "comprehension": "comp-clause",
    "ExceptHandler": "except-handler",
    "withitem": "with-item",
    "JoinedStr": "f-string",
    "FormattedValue": "format-value",
    "NamedExpr": "named-expr",
    "IfExp": "if-exp",
}

_BINOP = {
    ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.FloorDiv: "//",
    ast.Mod: "%", ast.Pow: "**", ast.MatMult: "@", ast.LShift: "<<",
    ast.RShift: ">>", ast.BitOr: "|", ast.BitXor: "^", ast.BitAnd: "&",
}
_CMPOP = {
    ast.Eq: "==", ast.NotEq: "!=", ast.Lt: "<", ast.LtE: "<=", ast.Gt: ">",
    ast.GtE: ">=", ast.Is: "is", ast.IsNot: "is not", ast.In: "in",
    ast.NotIn: "not in",
}
_UNARYOP = {ast.UAdd: "+", ast.USub: "-", ast.Not: "not", ast.Invert: "~"}
_BOOLOP = {ast.And: "and", ast.Or: "or"}

_SKIP_FIELDS = {"ctx", "type_ignores", "type_comment", "type_params"}


def _fallback_kind(cls_name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "-", cls_name).lower()


def _own_span(py_node: ast.AST) -> tuple[int, int] | None:
    line = getattr(py_node, "lineno", None)
    if line is None:
        return None
    return (line, getattr(py_node, "col_offset", 0))


def _convert(py_node: ast.AST, role: str | None, inherited: tuple[int, int]) -> AstNode:
    cls_name = type(py_node).__name__
    kind = _KIND_MAP.get(cls_name, _fallback_kind(cls_name))
    own = _own_span(py_node)
    attrs: dict[str, Any] = {}

    if isinstance(py_node, ast.Name):
        attrs["id"] = py_node.id
    elif isinstance(py_node, ast.Attribute):
        attrs["attr"] = py_node.attr
    elif isinstance(py_node, ast.Constant):
        attrs["value"] = py_node.value
    elif isinstance(py_node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
        attrs["name"] = py_node.name
    elif isinstance(py_node, ast.keyword):
        attrs["name"] = py_node.arg
    elif isinstance(py_node, ast.arg):
        attrs["name"] = py_node.arg
    elif isinstance(py_node, ast.Import):
        attrs["names"] = [(a.name, a.asname) for a in py_node.names]
    elif isinstance(py_node, ast.ImportFrom):
        attrs["module"] = py_node.module
        attrs["names"] = [(a.name, a.asname) for a in py_node.names]
        attrs["level"] = py_node.level
    elif isinstance(py_node, ast.BinOp):
        attrs["op"] = _BINOP.get(type(py_node.op), "?")
    elif isinstance(py_node, ast.AugAssign):
        attrs["op"] = _BINOP.get(type(py_node.op), "?")
    elif isinstance(py_node, ast.UnaryOp):
        attrs["op"] = _UNARYOP.get(type(py_node.op), "?")
    elif isinstance(py_node, ast.BoolOp):
        attrs["op"] = _BOOLOP.get(type(py_node.op), "?")
    elif isinstance(py_node, ast.Compare):
        attrs["ops"] = [_CMPOP.get(type(op), "?") for op in py_node.ops]
    elif isinstance(py_node, (ast.For, ast.AsyncFor)):
        attrs["loop_kind"] = "for"
    elif isinstance(py_node, ast.While):
        attrs["loop_kind"] = "while"
    elif isinstance(py_node, ast.ListComp):
        attrs["comp_kind"] = "list"
    elif isinstance(py_node, ast.SetComp):
        attrs["comp_kind"] = "set"
    elif isinstance(py_node, ast.DictComp):
        attrs["comp_kind"] = "dict"
    elif isinstance(py_node, ast.GeneratorExp):
        attrs["comp_kind"] = "generator"

    child_inherit = own or inherited
    children: list[AstNode] = []
    if not isinstance(py_node, (ast.Import, ast.ImportFrom)):
        for fname, value in ast.iter_fields(py_node):
            if fname in _SKIP_FIELDS:
                continue
            if isinstance(value, ast.AST):
                if not isinstance(value, (ast.expr_context, ast.operator,
                                          ast.unaryop, ast.boolop, ast.cmpop)):
                    children.append(_convert(value, fname, child_inherit))
            elif isinstance(value, list):
                for item in value:
                    if isinstance(item, ast.AST) and not isinstance(
                        item, (ast.expr_context, ast.operator, ast.unaryop,
                               ast.boolop, ast.cmpop)
                    ):
                        children.append(_convert(item, fname, child_inherit))

    spans = [c.span for c in children]
    if own is not None:
        spans.append(own)
    span = min(spans) if spans else inherited
    if isinstance(py_node, ast.Module):
        span = (1, 0)

    children.sort(key=lambda c: c.span)
    node = AstNode(kind=kind, span=span, children=children, attrs=attrs, role=role)
    for c in children:
        c.parent = node
    return node


def parse_source(file: SourceFile) -> AstNode:
    """Parse one source file into a normalized tree.

    Raises :class:`SyntaxFailure` with the failing 1-based line and 0-based
    column; callers treat that as "skip this file", never as a scan abort.
    """
    try:
        tree = ast.parse(file.text, filename=file.path)
    except SyntaxError as exc:
        line = exc.lineno or 1
        col = max(0, (exc.offset or 1) - 1)
        raise SyntaxFailure(line, col, exc.msg or "invalid syntax") from None
    except (ValueError, RecursionError, MemoryError) as exc:
        raise SyntaxFailure(1, 0, f"unparseable source: {exc}") from None
    return _convert(tree, None, (1, 0))


def iter_nodes(root: AstNode) -> Iterator[AstNode]:
    """Pre-order, document-order traversal."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def node_count(root: AstNode) -> int:
    return 1 + sum(node_count(c) for c in root.children)


_STMT_ROLES = {"body", "orelse", "finalbody", "handlers"}


def _assign_order(root: AstNode) -> dict[AstNode, int]:
    order: dict[AstNode, int] = {}
    counter = 0

    def walk(node: AstNode, current: int) -> None:
        nonlocal counter
        if node.role in _STMT_ROLES:
            counter += 1
            current = counter
        order[node] = current
        for c in node.children:
            walk(c, current)

    walk(root, 0)
    return order


def _collect_aliases(root: AstNode, ctx: FileContext) -> None:
    for node in iter_nodes(root):
        if node.kind != "import":
            continue
        if "module" in node.attrs:  # from X import Y [as Z]
            level = node.attrs.get("level", 0)
            module = node.attrs.get("module") or ""
            prefix = "." * level + module
            for name, asname in node.attrs["names"]:
                if name == "*":
                    continue
                local = asname or name
                ctx.aliases[local] = f"{prefix}.{name}" if prefix else name
        else:  # import X [as Y]
            for name, asname in node.attrs["names"]:
                if asname:
                    ctx.aliases[asname] = name
                else:
                    # "import a.b" binds the name "a"
                    ctx.aliases[name.split(".")[0]] = name.split(".")[0]


def resolve_qualified_name(node: AstNode, ctx: FileContext) -> str | None:
    """Fully qualified dotted name of a call/attribute, if statically known.

    Method calls on tainted variables resolve to pseudo-names built from
    :data:`PSEUDO_NAMES` (e.g. ``clf.fit`` -> ``sklearn.estimator.fit``).
    Returns None rather than fabricating a name for unaliased, untainted
    receivers.
    """
    if node.kind == "call":
        func = node.child("func")
        return resolve_qualified_name(func, ctx) if func is not None else None
    if node.kind == "name":
        ident = node.attrs.get("id")
        if ident in ctx.aliases:
            fq = ctx.aliases[ident]
            return None if fq == DYNAMIC_IMPORT else fq
        if ident in ctx.neural_classes:
            return PSEUDO_NAMES[TaintClass.NEURAL_MODEL]
        taint = ctx.taints.get(ident)
        if taint is not None:
            return PSEUDO_NAMES[taint]
        return None
    if node.kind == "attribute-access":
        base = node.child("value")
        if base is None:
            return None
        resolved = resolve_qualified_name(base, ctx)
        if resolved is None:
            return None
        return f"{resolved}.{node.attrs['attr']}"
    if node.kind == "subscript":
        base = node.child("value")
        if base is None:
            return None
        resolved = resolve_qualified_name(base, ctx)
        if resolved and resolved.startswith("pandas.DataFrame"):
            return PSEUDO_NAMES[TaintClass.SERIES]
        return None
    return None


def _classify_value(value: AstNode, ctx: FileContext) -> tuple[TaintClass | None, str | None]:
    """Taint class (and originating constructor name) produced by an expression."""
    cat = ctx.catalog
    if value.kind == "name":
        ident = value.attrs.get("id")
        taint = ctx.taints.get(ident)
        if taint is not None:
            return taint, ctx.origins.get(ident)
        return None, None
    if value.kind == "call":
        qn = resolve_qualified_name(value, ctx)
        func = value.child("func")
        if qn is not None:
            if cat.matches(qn, "splitter_calls"):
                return TaintClass.SPLIT_RESULT, qn
            if cat.matches(qn, "estimator_constructors"):
                return TaintClass.ESTIMATOR, qn
            if qn == PSEUDO_NAMES[TaintClass.NEURAL_MODEL] or cat.matches(
                qn, "neural_model_constructors"
            ):
                return TaintClass.NEURAL_MODEL, qn
            if cat.matches(qn, "optimizer_constructors"):
                return TaintClass.OPTIMIZER, qn
            if cat.matches(qn, "scaler_constructors"):
                return TaintClass.SCALER, qn
            if cat.matches(qn, "dataframe_constructors"):
                return TaintClass.DATAFRAME, qn
            if cat.matches(qn, "series_constructors"):
                return TaintClass.SERIES, qn
            if cat.matches(qn, "tensor_constructors"):
                return TaintClass.TENSOR, qn
        if func is not None and func.kind == "attribute-access":
            receiver = func.child("value")
            if receiver is not None:
                taint, origin = _classify_value(receiver, ctx)
                if taint is not None:
                    # df2 = df.dropna() keeps the receiver's class
                    return taint, origin
        if func is not None and func.kind == "name":
            helper = ctx.helper_returns.get(func.attrs.get("id"))
            if helper is not None:
                return helper
        return None, None
    if value.kind == "subscript":
        base = value.child("value")
        if base is not None:
            taint, _ = _classify_value(base, ctx)
            if taint is TaintClass.DATAFRAME:
                return TaintClass.SERIES, None
        return None, None
    if value.kind == "attribute-access":
        attr = value.attrs.get("attr")
        base = value.child("value")
        if base is not None and attr in ("values", "to_numpy"):
            taint, _ = _classify_value(base, ctx)
            if taint in (TaintClass.DATAFRAME, TaintClass.SERIES):
                return TaintClass.TENSOR, None
        return None, None
    return None, None


def _is_dynamic_import(value: AstNode, ctx: FileContext) -> bool:
    if value.kind != "call":
        return False
    func = value.child("func")
    if func is None:
        return False
    if func.kind == "name" and func.attrs.get("id") == "__import__":
        return True
    qn = resolve_qualified_name(value, ctx)
    return qn == "importlib.import_module"


def _apply_assignment(node: AstNode, ctx: FileContext) -> bool:
    """Propagate taint through one assignment; returns True on any change."""
    value = node.child("value")
    if value is None:
        return False
    targets = node.children_with_role("targets") or node.children_with_role("target")
    changed = False

    if _is_dynamic_import(value, ctx):
        for t in targets:
            if t.kind == "name":
                ident = t.attrs["id"]
                if ctx.aliases.get(ident) != DYNAMIC_IMPORT:
                    ctx.aliases[ident] = DYNAMIC_IMPORT
                    ctx.taints[ident] = TaintClass.UNKNOWN
                    changed = True
        return changed

    def put(name: str, taint: TaintClass, origin: str | None) -> None:
        nonlocal changed
        if ctx.taints.get(name) != taint or ctx.origins.get(name) != origin:
            ctx.taints[name] = taint
            if origin is not None:
                ctx.origins[name] = origin
            else:
                ctx.origins.pop(name, None)
            changed = True

    taint, origin = _classify_value(value, ctx)
    for t in targets:
        if t.kind == "name":
            if taint is not None:
                put(t.attrs["id"], taint, origin)
        elif t.kind in ("tuple", "list"):
            elts = [c for c in t.children if c.kind == "name"]
            if taint is not None:
                for elt in elts:
                    put(elt.attrs["id"], taint, origin)
            elif value.kind in ("tuple", "list"):
                pairs = zip(t.children, value.children)
                for tgt, val in pairs:
                    if tgt.kind == "name":
                        sub_taint, sub_origin = _classify_value(val, ctx)
                        if sub_taint is not None:
                            put(tgt.attrs["id"], sub_taint, sub_origin)
    return changed


def _collect_neural_classes(root: AstNode, ctx: FileContext) -> None:
    cat = ctx.catalog
    for node in iter_nodes(root):
        if node.kind != "class-def":
            continue
        for base in node.children_with_role("bases"):
            qn = resolve_qualified_name(base, ctx) if base.kind in (
                "name", "attribute-access") else None
            if cat.matches(qn, "neural_base_classes"):
                ctx.neural_classes.add(node.attrs["name"])
                break


def _collect_helper_returns(root: AstNode, ctx: FileContext) -> bool:
    """Map local function names to the taint class of their returned value."""
    changed = False
    for node in iter_nodes(root):
        if node.kind != "function-def":
            continue
        for sub in iter_nodes(node):
            if sub.kind != "return":
                continue
            value = sub.child("value")
            if value is None:
                continue
            taint, origin = _classify_value(value, ctx)
            if taint is not None:
                entry = (taint, origin)
                if ctx.helper_returns.get(node.attrs["name"]) != entry:
                    ctx.helper_returns[node.attrs["name"]] = entry
                    changed = True
                break
    return changed


_MAX_FIXPOINT_PASSES = 10


def build_context(root: AstNode, catalog: Catalog | None = None) -> FileContext:
    """Derive aliases, taints and statement order for one parsed file.

    One pre-order pass collects imports and ordinals, then a bounded fixpoint
    over same-file assignments propagates taints (flow-insensitive per scope,
    last assignment wins in document order). Idempotent; degenerate inputs
    yield empty maps.
    """
    ctx = FileContext(catalog=catalog or default_catalog(), root=root)
    ctx.order = _assign_order(root)
    _collect_aliases(root, ctx)
    _collect_neural_classes(root, ctx)

    assignments = [n for n in iter_nodes(root) if n.kind == "assignment"]
    for _ in range(_MAX_FIXPOINT_PASSES):
        changed = False
        for node in assignments:
            changed |= _apply_assignment(node, ctx)
        changed |= _collect_helper_returns(root, ctx)
        if not changed:
            break
    return ctx
