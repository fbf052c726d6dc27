"""
Scalar expressions of the time variable t.

Grammar (whitespace ignored, identifiers case-sensitive):

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER ['i'] | 't' | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := sin | cos | exp | log | sqrt | abs

'^' binds tightest and associates to the right; unary minus binds looser than
'^' so "-2^2" is -4. A number immediately followed by 'i' is imaginary ("2i").
All arithmetic is complex; a negative real base raised to a non-integer power
is a domain error.
"""

import cmath
import math
import re
from dataclasses import dataclass

from errors import DomainError, ExpressionSyntaxError, UnknownIdentifierError

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)(?P<imag>i(?![A-Za-z_0-9]))?"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)

_CONSTANTS = {"pi": math.pi, "e": math.e}

_FUNCTIONS = {
    "sin": cmath.sin,
    "cos": cmath.cos,
    "exp": cmath.exp,
    "sqrt": cmath.sqrt,
    "abs": lambda z: complex(abs(z)),
}


def _log(z):
    if z == 0:
        raise DomainError("log of zero")
    return cmath.log(z)


_FUNCTIONS["log"] = _log


# ── AST ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Number:
    value: complex


@dataclass(frozen=True)
class Constant:
    name: str


@dataclass(frozen=True)
class Variable:
    name: str = "t"


@dataclass(frozen=True)
class Negate:
    operand: object


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


# ── Tokenizer ────────────────────────────────────────────────────────────


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(source, pos)
        if not match or match.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExpressionSyntaxError(f"Unexpected character {source[start]!r}", start)
        kind = match.lastgroup if match.lastgroup != "imag" else "number"
        start = match.start(kind)
        if kind == "number":
            value = float(match.group("number"))
            tokens.append(("imag" if match.group("imag") else "number", value, start))
        else:
            tokens.append((kind, match.group(kind), start))
        pos = match.end()
    tokens.append(("end", None, len(source)))
    return tokens


# ── Parser ───────────────────────────────────────────────────────────────


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect_op(self, op):
        kind, value, offset = self.advance()
        if kind != "op" or value != op:
            found = "end of input" if kind == "end" else repr(value)
            raise ExpressionSyntaxError(f"Expected {op!r}, found {found}", offset)

    def is_op(self, *ops):
        kind, value, _ = self.peek()
        return kind == "op" and value in ops

    def parse(self):
        tree = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"Unexpected token {value!r}", offset)
        return tree

    def expr(self):
        node = self.term()
        while self.is_op("+", "-"):
            op = self.advance()[1]
            node = BinaryOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.is_op("*", "/"):
            op = self.advance()[1]
            node = BinaryOp(op, node, self.unary())
        return node

    def unary(self):
        if self.is_op("-"):
            self.advance()
            return Negate(self.unary())
        if self.is_op("+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.is_op("^"):
            self.advance()
            return BinaryOp("^", base, self.unary())
        return base

    def atom(self):
        kind, value, offset = self.advance()
        if kind == "number":
            return Number(complex(value, 0.0))
        if kind == "imag":
            return Number(complex(0.0, value))
        if kind == "name":
            if value == "t":
                return Variable()
            if value in _CONSTANTS:
                return Constant(value)
            if value in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            raise UnknownIdentifierError(f"Unknown identifier {value!r}", offset)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExpressionSyntaxError(f"Unexpected {found}", offset)


# ── Evaluation ───────────────────────────────────────────────────────────


def _is_integer(z):
    return z.imag == 0.0 and math.isfinite(z.real) and float(z.real).is_integer()


def _power(base, exponent):
    if base == 0:
        if exponent.real < 0 or (exponent.real == 0 and exponent.imag != 0):
            raise DomainError("division by zero: zero raised to a non-positive power")
        return complex(1.0) if exponent == 0 else complex(0.0)
    if _is_integer(exponent):
        n = int(exponent.real)
        if base.imag == 0.0:
            return complex(base.real**n if n >= 0 else 1.0 / base.real**-n)
        return base**n
    if base.imag == 0.0 and base.real < 0:
        raise DomainError("negative base with non-integer exponent")
    if base.imag == 0.0 and exponent.imag == 0.0:
        return complex(math.pow(base.real, exponent.real))
    return cmath.exp(exponent * cmath.log(base))


def _positive_zero(z):
    # log and sqrt read the sign of a zero imaginary part
    return complex(z.real, 0.0) if z.imag == 0 else z


def _divide(a, b):
    if b == 0:
        raise DomainError("division by zero")
    return a / b


_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _divide,
    "^": _power,
}


def _compile(node):
    """Turn a tree into a closure t -> complex."""
    if isinstance(node, Number):
        value = node.value
        return lambda t: value
    if isinstance(node, Constant):
        value = complex(_CONSTANTS[node.name])
        return lambda t: value
    if isinstance(node, Variable):
        return lambda t: complex(t)
    if isinstance(node, Negate):
        inner = _compile(node.operand)
        return lambda t: 0j - inner(t)
    if isinstance(node, BinaryOp):
        left, right, op = _compile(node.left), _compile(node.right), _BINARY[node.op]
        return lambda t: op(left(t), right(t))
    if isinstance(node, Call):
        inner, func = _compile(node.arg), _FUNCTIONS[node.func]
        return lambda t: func(_positive_zero(inner(t)))
    raise TypeError(f"Not an expression node: {node!r}")


def _format_real(x):
    return repr(float(x))


def unparse(node):
    """Render a tree as fully parenthesized text that parses back to the same tree."""
    if isinstance(node, Number):
        if node.value.imag != 0.0 and node.value.real == 0.0:
            return f"{_format_real(node.value.imag)}i"
        return _format_real(node.value.real)
    if isinstance(node, Constant):
        return node.name
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Negate):
        return f"(-{unparse(node.operand)})"
    if isinstance(node, BinaryOp):
        return f"({unparse(node.left)} {node.op} {unparse(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    raise TypeError(f"Not an expression node: {node!r}")


class Expression:
    """
    A parsed, immutable expression in t.

    Attributes:
        source: Original text
        tree: Root AST node
    """

    __slots__ = ("source", "tree", "_fn")

    def __init__(self, source, tree):
        self.source = source
        self.tree = tree
        self._fn = _compile(tree)

    def __call__(self, t):
        return evaluate(self, t)

    def __eq__(self, other):
        return isinstance(other, Expression) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)

    def __repr__(self):
        return f"Expression({self.source!r})"

    def unparse(self):
        return unparse(self.tree)

    @property
    def is_constant(self):
        """True when the tree does not mention t."""
        return "t" not in _names(self.tree)


def _names(node):
    if isinstance(node, Variable):
        return {"t"}
    if isinstance(node, Negate):
        return _names(node.operand)
    if isinstance(node, BinaryOp):
        return _names(node.left) | _names(node.right)
    if isinstance(node, Call):
        return _names(node.arg)
    return set()


def parse_expression(source):
    """
    Parse expression text.

    Args:
        source: Non-empty expression text (numbers are also accepted)

    Returns:
        Expression

    Raises:
        ExpressionSyntaxError: Malformed text, with the byte offset of the failure
        UnknownIdentifierError: Identifier outside t, pi, e and the function list
    """
    if isinstance(source, int | float) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str) or not source.strip():
        raise ExpressionSyntaxError("Empty expression", 0)
    return Expression(source, _Parser(source).parse())


def evaluate(expr, t):
    """
    Evaluate an expression at real time t.

    Returns:
        complex: Finite value (purely real results carry a zero imaginary part)

    Raises:
        DomainError: Division by zero, log of zero, negative base with
            non-integer exponent, or a non-finite result
    """
    try:
        value = expr._fn(t)
    except ZeroDivisionError as e:
        raise DomainError(f"division by zero in {expr.source!r}") from e
    except OverflowError as e:
        raise DomainError(f"overflow evaluating {expr.source!r} at t={t}") from e
    except ValueError as e:
        # DomainError from the evaluator, or a math-domain ValueError from cmath
        raise DomainError(f"{e} in {expr.source!r} at t={t}") from e
    if not cmath.isfinite(value):
        raise DomainError(f"non-finite value of {expr.source!r} at t={t}")
    return value


def evaluate_real(expr):
    """Evaluate a constant expression (no t) and require a real result."""
    if not expr.is_constant:
        raise DomainError(f"Expected a constant, {expr.source!r} depends on t")
    value = evaluate(expr, 0.0)
    if abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
        raise DomainError(f"Expected a real constant, {expr.source!r} is {value}")
    return value.real
