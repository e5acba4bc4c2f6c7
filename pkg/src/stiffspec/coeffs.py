"""Problem data and the coefficient expression language.

Coefficients are written in a small smooth-function language::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
    func   := 'sin' | 'cos' | 'exp' | 'sqrt'

Expressions are parsed into a tuple tree and compiled to two Python callables,
one over ``math`` for scalar hot loops and one over ``numpy`` for arrays.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

FUNCS = ("sin", "cos", "exp", "sqrt")
CONSTS = {"pi": math.pi, "e": math.e}
SAMPLES = 1000
EDGE_TOL = 1e-12


class ParseError(ValueError):
    """Syntax error in a coefficient expression; ``pos`` is a 0-based offset."""

    def __init__(self, message: str, pos: int, source: str = ""):
        self.pos = pos
        self.source = source
        super().__init__(f"{message} at position {pos}")


class DomainError(ValueError):
    pass


class ProblemError(ValueError):
    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("; ".join(report.failures))


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None:
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ParseError(f"unexpected character {source[bad]!r}", bad, source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.source)

    def parse(self):
        tree = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos, self.source)
        return tree

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("bin", op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ParseError("exponent must be a non-negative integer", pos, self.source)
            node = ("pow", node, int(text))
        return node

    def base(self):
        kind, text, pos = self.take()
        if kind == "num":
            return ("num", float(text))
        if kind == "id":
            if text == "x":
                return ("x",)
            if text in CONSTS:
                return ("const", text)
            if text in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("func", text, arg)
            raise ParseError(f"unknown identifier {text!r}", pos, self.source)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", pos, self.source)


def to_source(tree) -> str:
    """Print a tree back to the language; parsing the result gives the same tree."""
    tag = tree[0]
    if tag == "num":
        text = repr(tree[1])
        return text if "inf" not in text and "nan" not in text else "0"
    if tag == "x":
        return "x"
    if tag == "const":
        return tree[1]
    if tag == "func":
        return f"{tree[1]}({to_source(tree[2])})"
    if tag == "pow":
        return f"({to_source(tree[1])})^{tree[2]}"
    _, op, left, right = tree
    return f"({to_source(left)} {op} {to_source(right)})"


def _emit(tree, lib: str) -> str:
    tag = tree[0]
    if tag == "num":
        return repr(tree[1])
    if tag == "x":
        return "x"
    if tag == "const":
        return repr(CONSTS[tree[1]])
    if tag == "func":
        return f"{lib}.{tree[1]}({_emit(tree[2], lib)})"
    if tag == "pow":
        return f"({_emit(tree[1], lib)})**{tree[2]}"
    _, op, left, right = tree
    return f"({_emit(left, lib)} {op} {_emit(right, lib)})"


def _compile(tree, lib: str):
    code = f"lambda x: {_emit(tree, lib)}"
    env = {"math": math, "np": np}
    return eval(code, env)  # the tree only contains whitelisted tokens


def _denominators(tree, acc):
    tag = tree[0]
    if tag == "bin":
        if tree[1] == "/":
            acc.append(tree[3])
        _denominators(tree[2], acc)
        _denominators(tree[3], acc)
    elif tag == "func":
        _denominators(tree[2], acc)
    elif tag == "pow":
        _denominators(tree[1], acc)
    return acc


def _sqrt_args(tree, acc):
    tag = tree[0]
    if tag == "func":
        if tree[1] == "sqrt":
            acc.append(tree[2])
        _sqrt_args(tree[2], acc)
    elif tag == "bin":
        _sqrt_args(tree[2], acc)
        _sqrt_args(tree[3], acc)
    elif tag == "pow":
        _sqrt_args(tree[1], acc)
    return acc


@dataclass(frozen=True)
class CoeffExpr:
    """A parsed coefficient, optionally bound to the closed interval it lives on."""

    source: str
    tree: tuple
    interval: tuple[float, float] | None = None
    _scalar: object = field(default=None, repr=False, compare=False, hash=False)
    _vector: object = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_scalar", _compile(self.tree, "math"))
        object.__setattr__(self, "_vector", _compile(self.tree, "np"))

    def bind(self, lo: float, hi: float) -> "CoeffExpr":
        return replace(self, interval=(float(lo), float(hi)))

    @property
    def scalar(self):
        """Unchecked scalar evaluator (math module); for ODE right-hand sides."""
        return self._scalar

    def __call__(self, x):
        if np.ndim(x) == 0:
            return float(self._scalar(float(x)))
        xs = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self._vector(xs), dtype=float), xs.shape).copy()

    def evaluate(self, x):
        """Evaluate with the interval check of ``eval_coeff``."""
        if self.interval is not None:
            lo, hi = self.interval
            tol = EDGE_TOL * max(1.0, abs(lo), abs(hi))
            xs = np.asarray(x, dtype=float)
            if np.any(xs < lo - tol) or np.any(xs > hi + tol):
                raise DomainError(f"x outside [{lo}, {hi}] for coefficient {self.source!r}")
        try:
            with np.errstate(all="ignore"):
                val = self(x)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"{self.source!r} undefined at x={x}: {exc}") from exc
        if not np.all(np.isfinite(val)):
            raise DomainError(f"{self.source!r} is not finite at x={x}")
        return val

    def canonical(self) -> str:
        return to_source(self.tree)

    def check_on(self, lo: float, hi: float, samples: int = SAMPLES) -> list[str]:
        """Problems found by sampling: poles, bad sqrt arguments, non-finite values."""
        xs = np.linspace(lo, hi, samples)
        issues = []
        with np.errstate(all="ignore"):
            for den in _denominators(self.tree, []):
                d = np.broadcast_to(_compile(den, "np")(xs), xs.shape)
                if np.any(d == 0) or np.any(np.sign(d[1:]) != np.sign(d[:-1])):
                    issues.append(f"division by zero in {self.source!r} on [{lo}, {hi}]")
                    break
            for arg in _sqrt_args(self.tree, []):
                s = np.broadcast_to(_compile(arg, "np")(xs), xs.shape)
                if np.any(s < 0):
                    issues.append(f"sqrt of negative value in {self.source!r} on [{lo}, {hi}]")
                    break
            vals = np.broadcast_to(self._vector(xs), xs.shape)
            if not np.all(np.isfinite(vals)):
                issues.append(f"non-finite values of {self.source!r} on [{lo}, {hi}]")
        return issues


def parse_coeff(source: str) -> CoeffExpr:
    if not isinstance(source, str):
        source = repr(float(source))
    return CoeffExpr(source, _Parser(source).parse())


def eval_coeff(c: CoeffExpr, x):
    return c.evaluate(x)


@dataclass(frozen=True)
class ProblemSpec:
    """Interval (a,0) U (0,b) with stiffness/density k, r on the left and kappa, rho on the right."""

    a: float
    b: float
    k: CoeffExpr
    r: CoeffExpr
    kappa: CoeffExpr
    rho: CoeffExpr

    @property
    def left(self) -> tuple[float, float]:
        return (self.a, 0.0)

    @property
    def right(self) -> tuple[float, float]:
        return (0.0, self.b)

    def sources(self) -> dict[str, str]:
        return {
            "k": self.k.source,
            "r": self.r.source,
            "kappa": self.kappa.source,
            "rho": self.rho.source,
        }

    def K(self, x):
        """Piecewise stiffness: k on the left, kappa on the right (x=0 taken from the right)."""
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, self.k(np.minimum(x, 0.0)), self.kappa(np.maximum(x, 0.0)))

    def R(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, self.r(np.minimum(x, 0.0)), self.rho(np.maximum(x, 0.0)))

    def is_constant(self) -> bool:
        return all(c.tree[0] in ("num", "const") for c in (self.k, self.r, self.kappa, self.rho))


@dataclass
class ValidationReport:
    ok: bool
    margins: dict[str, float]
    failures: list[str]


def _as_coeff(c) -> CoeffExpr:
    return c if isinstance(c, CoeffExpr) else parse_coeff(c)


def problem(a, b, k="1", r="1", kappa="1", rho="1") -> ProblemSpec:
    """Build a ProblemSpec without validating it."""
    a, b = float(a), float(b)
    return ProblemSpec(
        a,
        b,
        _as_coeff(k).bind(a, 0.0),
        _as_coeff(r).bind(a, 0.0),
        _as_coeff(kappa).bind(0.0, b),
        _as_coeff(rho).bind(0.0, b),
    )


def validate_problem(p: ProblemSpec, samples: int = SAMPLES) -> ValidationReport:
    failures = []
    margins = {}
    if not (p.a < 0):
        failures.append(f"left endpoint a={p.a} must be negative")
    if not (p.b > 0):
        failures.append(f"right endpoint b={p.b} must be positive")
    if failures:
        return ValidationReport(False, margins, failures)
    for name, c, (lo, hi) in (
        ("k", p.k, p.left),
        ("r", p.r, p.left),
        ("kappa", p.kappa, p.right),
        ("rho", p.rho, p.right),
    ):
        issues = c.check_on(lo, hi, samples)
        if issues:
            failures.extend(issues)
            margins[name] = float("nan")
            continue
        m = float(np.min(c(np.linspace(lo, hi, samples))))
        margins[name] = m
        if not m > 0:
            failures.append(f"{name} = {c.source!r} is not positive on [{lo}, {hi}] (min {m:.6g})")
    return ValidationReport(not failures, margins, failures)


def make_problem(a, b, k="1", r="1", kappa="1", rho="1") -> ProblemSpec:
    """Build and validate; raises ProblemError carrying the report."""
    p = problem(a, b, k, r, kappa, rho)
    report = validate_problem(p)
    if not report.ok:
        raise ProblemError(report)
    return p


def demo_problem() -> ProblemSpec:
    """Constant coefficients on (-1,0) U (0,2): double limit eigenvalue at pi^2/4."""
    return make_problem(-1, 2)


def symmetric_problem() -> ProblemSpec:
    """Constant coefficients on (-2,0) U (0,2): eps-independent eigenvalues."""
    return make_problem(-2, 2)


def variable_problem() -> ProblemSpec:
    return make_problem(-1, 2, k="2+x*x", r="1", kappa="1", rho="1+x/4")
