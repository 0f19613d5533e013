"""
Chart files and metric-component expressions

Expression grammar (recursive descent):
    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | base ('^' factor)?
    base   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
"""
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from errors import (
    ChartFormatError,
    ChartSyntaxError,
    ExpressionDomainError,
    InputError,
    JetDomainError,
    UnknownIdentifierError,
)
from jets import Jet, int_power, jet_const, jet_elementary, jet_var
from utils import get_logger

logger = get_logger("metric_dsl")

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    index: int
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class App:
    func: str
    arg: "Expr"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    offset: int = field(default=0, compare=False)


Expr = Union[Num, Var, App, BinOp, Neg]


class Token(NamedTuple):
    kind: str    # number | ident | op | end
    text: str
    offset: int  # byte offset into the source


_TOKEN_RE = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise ChartSyntaxError(
                f"unexpected character {text[pos]!r}", _byte_offset(text, pos),
                ["NUMBER", "IDENT", "operator", "(", ")"],
            )
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(), _byte_offset(text, pos)))
        pos = match.end()
    tokens.append(Token("end", "", _byte_offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str, coords: Sequence[str]):
        self.text = text
        self.coords = {name: i for i, name in enumerate(coords)}
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def at(self, *ops: str) -> bool:
        token = self.peek()
        return token.kind == "op" and token.text in ops

    def expect(self, op: str, expected: Sequence[str]):
        token = self.peek()
        if not (token.kind == "op" and token.text == op):
            raise ChartSyntaxError(f"unexpected {self._describe(token)}", token.offset, expected)
        return self.advance()

    @staticmethod
    def _describe(token: Token) -> str:
        return "end of input" if token.kind == "end" else f"'{token.text}'"

    def parse(self) -> Expr:
        if self.peek().kind == "end":
            raise ChartSyntaxError("empty expression", 0, ["NUMBER", "IDENT", "(", "-"])
        node = self.expr()
        token = self.peek()
        if token.kind != "end":
            raise ChartSyntaxError(
                f"unexpected {self._describe(token)}", token.offset,
                ["+", "-", "*", "/", "^", "end of input"],
            )
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.at("+", "-"):
            op = self.advance()
            node = BinOp(op.text, node, self.term(), op.offset)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.at("*", "/"):
            op = self.advance()
            node = BinOp(op.text, node, self.factor(), op.offset)
        return node

    def factor(self) -> Expr:
        if self.at("-"):
            op = self.advance()
            return Neg(self.factor(), op.offset)
        node = self.base()
        if self.at("^"):
            op = self.advance()
            node = BinOp("^", node, self.factor(), op.offset)
        return node

    def base(self) -> Expr:
        token = self.advance()
        if token.kind == "number":
            return Num(float(token.text), token.offset)
        if token.kind == "ident":
            name = token.text
            if self.at("("):
                if name not in FUNCTIONS:
                    if name in self.coords:
                        raise ChartSyntaxError(f"coordinate '{name}' is not a function", token.offset)
                    raise UnknownIdentifierError(name, token.offset)
                self.advance()
                arg = self.expr()
                self.expect(")", [")", "+", "-", "*", "/", "^"])
                return App(name, arg, token.offset)
            if name in self.coords:
                return Var(name, self.coords[name], token.offset)
            if name in FUNCTIONS:
                raise ChartSyntaxError(f"function '{name}' needs an argument", self.peek().offset, ["("])
            raise UnknownIdentifierError(name, token.offset)
        if token.kind == "op" and token.text == "(":
            node = self.expr()
            self.expect(")", [")", "+", "-", "*", "/", "^"])
            return node
        raise ChartSyntaxError(
            f"unexpected {self._describe(token)}", token.offset, ["NUMBER", "IDENT", "(", "-"]
        )


def parse_expression(text: str, coords: Sequence[str]) -> Expr:
    """
    Parse a metric-component expression

    Args:
        text: expression source
        coords: declared coordinate names

    Returns:
        Expression AST

    Raises:
        ChartSyntaxError: with byte offset and expected-token set
        UnknownIdentifierError: identifier that is neither coordinate nor function
    """
    if not text or not text.strip():
        raise ChartSyntaxError("empty expression", 0, ["NUMBER", "IDENT", "(", "-"])
    return _Parser(text, coords).parse()


def pretty_print(e: Expr) -> str:
    """Fully parenthesized source that parses back to the same tree"""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, App):
        return f"{e.func}({pretty_print(e.arg)})"
    if isinstance(e, Neg):
        return f"(-{pretty_print(e.operand)})"
    return f"({pretty_print(e.left)} {e.op} {pretty_print(e.right)})"


def is_constant(e: Expr) -> bool:
    if isinstance(e, Num):
        return True
    if isinstance(e, Var):
        return False
    if isinstance(e, App):
        return is_constant(e.arg)
    if isinstance(e, Neg):
        return is_constant(e.operand)
    return is_constant(e.left) and is_constant(e.right)


_REAL_FUNCTIONS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
    "sinh": math.sinh, "cosh": math.cosh, "tanh": math.tanh,
    "log": math.log, "sqrt": math.sqrt,
}


def eval_real(e: Expr, point: Sequence[float], text: str = "") -> float:
    """Plain float evaluation; mirrors the operation order of eval_expr"""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(point[e.index])
    if isinstance(e, Neg):
        return -eval_real(e.operand, point, text)
    if isinstance(e, App):
        x = eval_real(e.arg, point, text)
        if e.func in ("log", "sqrt") and x <= 0:
            raise ExpressionDomainError(f"{e.func} of non-positive value {x!r}", e.offset, text)
        if e.func == "tan" and math.cos(x) == 0:
            raise ExpressionDomainError(f"tan at a pole {x!r}", e.offset, text)
        return _REAL_FUNCTIONS[e.func](x)
    left = eval_real(e.left, point, text)
    if e.op == "^":
        if is_constant(e.right):
            r = eval_real(e.right, point, text)
            if float(r).is_integer() and abs(r) < 2**31:
                if r < 0 and left == 0:
                    raise ExpressionDomainError("division by zero", e.offset, text)
                return int_power(left, int(r), 1.0)
            if left <= 0:
                raise ExpressionDomainError(f"pow of non-positive base {left!r}", e.offset, text)
            return math.pow(left, r)
        if left <= 0:
            raise ExpressionDomainError(f"pow of non-positive base {left!r}", e.offset, text)
        return math.exp(eval_real(e.right, point, text) * math.log(left))
    right = eval_real(e.right, point, text)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if right == 0:
        raise ExpressionDomainError("division by zero", e.offset, text)
    return left / right


def eval_expr(e: Expr, point: Sequence[float], K: int, text: str = "") -> Jet:
    """
    Jet of an expression at a point

    Args:
        e: expression AST
        point: chart coordinates (length = chart dimension)
        K: truncation order
        text: expression source, used only to locate errors

    Returns:
        Jet of order K; coordinates are seeded with jet_var
    """
    n = len(point)
    try:
        if isinstance(e, Num):
            return jet_const(e.value, n, K)
        if isinstance(e, Var):
            return jet_var(e.index, float(point[e.index]), n, K)
        if isinstance(e, Neg):
            return -eval_expr(e.operand, point, K, text)
        if isinstance(e, App):
            return jet_elementary(e.func, eval_expr(e.arg, point, K, text))
        left = eval_expr(e.left, point, K, text)
        if e.op == "^":
            if is_constant(e.right):
                return jet_elementary("pow", left, eval_real(e.right, point, text))
            if left.value <= 0:
                raise JetDomainError("pow of non-positive base", left.value)
            exponent = eval_expr(e.right, point, K, text)
            return jet_elementary("exp", exponent * jet_elementary("log", left))
        right = eval_expr(e.right, point, K, text)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        return left / right
    except JetDomainError as exc:
        raise ExpressionDomainError(str(exc), e.offset, text) from exc


@dataclass(frozen=True)
class Chart:
    """A coordinate domain with symbolic metric components"""

    coords: Tuple[str, ...]
    metric: Tuple[Tuple[Expr, ...], ...]
    metric_text: Tuple[Tuple[str, ...], ...]
    domain_hints: Tuple[Tuple[float, float], ...]
    source: str = "<text>"

    @property
    def n(self) -> int:
        return len(self.coords)

    def contains(self, point: Sequence[float]) -> bool:
        """Inside every declared open interval"""
        return all(lo < x < hi for x, (lo, hi) in zip(point, self.domain_hints))

    def metric_jets(self, point: Sequence[float], K: int) -> List[List[Jet]]:
        if len(point) != self.n:
            raise InputError(f"point {list(point)} has {len(point)} coordinates, chart has {self.n}")
        cache: Dict[Tuple[int, int], Jet] = {}
        for i in range(self.n):
            for j in range(i, self.n):
                cache[i, j] = eval_expr(self.metric[i][j], point, K, self.metric_text[i][j])
        return [[cache[min(i, j), max(i, j)] for j in range(self.n)] for i in range(self.n)]

    def metric_values(self, point: Sequence[float]) -> np.ndarray:
        return np.array(
            [[eval_real(self.metric[i][j], point, self.metric_text[i][j]) for j in range(self.n)]
             for i in range(self.n)]
        )


_DIM_RE = re.compile(r"^dim\s*=\s*(\S+)$")
_COORDS_RE = re.compile(r"^coords\s*=\s*(.*)$")
_G_RE = re.compile(r"^g\s+(\S+)\s+(\S+)\s*=\s*(.+)$")
_DOMAIN_RE = re.compile(r"^domain\s+(\S+)\s*=\s*\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)$")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _parse_bound(text: str, source: str, line: int) -> float:
    try:
        return float(text)  # accepts inf / -inf
    except ValueError as exc:
        raise ChartFormatError(f"bad domain bound '{text}'", source, line) from exc


def parse_chart_text(text: str, source: str = "<text>") -> Chart:
    """
    Parse the line-oriented chart format

    Args:
        text: chart file contents
        source: name used in error messages

    Returns:
        Chart with symmetric completion of the metric (omitted entries are 0)
    """
    dim: Optional[int] = None
    coords: Optional[List[str]] = None
    entries: Dict[Tuple[int, int], Tuple[str, int]] = {}
    domains: Dict[str, Tuple[str, str, int]] = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if match := _DIM_RE.match(line):
            if dim is not None:
                raise ChartFormatError("duplicate 'dim'", source, number)
            try:
                dim = int(match.group(1))
            except ValueError as exc:
                raise ChartFormatError(f"dim must be an integer, got '{match.group(1)}'", source, number) from exc
            if dim < 1:
                raise ChartFormatError("dim must be positive", source, number)
        elif match := _COORDS_RE.match(line):
            if coords is not None:
                raise ChartFormatError("duplicate 'coords'", source, number)
            coords = match.group(1).split()
            seen = set()
            for name in coords:
                if not _NAME_RE.match(name) or name in FUNCTIONS:
                    raise ChartFormatError(f"invalid coordinate name '{name}'", source, number)
                if name in seen:
                    raise ChartFormatError(f"duplicate coordinate name '{name}'", source, number)
                seen.add(name)
        elif match := _G_RE.match(line):
            try:
                i, j = int(match.group(1)), int(match.group(2))
            except ValueError as exc:
                raise ChartFormatError("metric indices must be integers", source, number) from exc
            if i > j:
                raise ChartFormatError(f"metric entry g {i} {j} needs i <= j", source, number)
            if (i, j) in entries:
                raise ChartFormatError(f"duplicate metric entry g {i} {j}", source, number)
            entries[i, j] = (match.group(3).strip(), number)
        elif match := _DOMAIN_RE.match(line):
            name = match.group(1)
            if name in domains:
                raise ChartFormatError(f"duplicate domain for '{name}'", source, number)
            domains[name] = (match.group(2), match.group(3), number)
        else:
            raise ChartFormatError(f"unrecognized line '{line}'", source, number)

    if dim is None:
        raise ChartFormatError("missing required field 'dim'", source)
    if coords is None:
        raise ChartFormatError("missing required field 'coords'", source)
    if len(coords) != dim:
        raise ChartFormatError(f"dimension mismatch: dim = {dim} but {len(coords)} coordinates", source)

    metric: List[List[Expr]] = [[Num(0.0)] * dim for _ in range(dim)]
    metric_text: List[List[str]] = [["0"] * dim for _ in range(dim)]
    for (i, j), (expr_text, number) in sorted(entries.items()):
        if i < 0 or j >= dim:
            raise ChartFormatError(
                f"dimension mismatch: metric entry g {i} {j} outside a {dim}x{dim} metric", source, number
            )
        try:
            node = parse_expression(expr_text, coords)
        except InputError as exc:
            raise ChartFormatError(f"in '{expr_text}': {exc}", source, number) from exc
        metric[i][j] = metric[j][i] = node
        metric_text[i][j] = metric_text[j][i] = expr_text

    hints = []
    for name in coords:
        if name in domains:
            lo_text, hi_text, number = domains.pop(name)
            lo, hi = _parse_bound(lo_text, source, number), _parse_bound(hi_text, source, number)
            if not lo < hi:
                raise ChartFormatError(f"empty domain for '{name}'", source, number)
            hints.append((lo, hi))
        else:
            hints.append((-math.inf, math.inf))
    if domains:
        name, (_, _, number) = next(iter(domains.items()))
        raise ChartFormatError(f"domain for undeclared coordinate '{name}'", source, number)

    return Chart(
        coords=tuple(coords),
        metric=tuple(tuple(row) for row in metric),
        metric_text=tuple(tuple(row) for row in metric_text),
        domain_hints=tuple(hints),
        source=source,
    )


def load_chart(path) -> Chart:
    """Read and parse a chart file"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ChartFormatError(f"cannot read chart file: {exc.strerror or exc}", str(path)) from exc
    chart = parse_chart_text(text, str(path))
    logger.info(f"Loaded chart {path.name}: dim={chart.n}, coords={' '.join(chart.coords)}")
    return chart
