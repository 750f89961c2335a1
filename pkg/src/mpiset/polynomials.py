"""Sparse multivariate polynomials over the reals.

Monomials are plain tuples of non-negative integer exponents, ordered
globally by graded lexicographic order (total degree first, then lex).
Polynomials are immutable maps from monomial to float coefficient and are
the common currency for dynamics, constraints, certificates and
multipliers throughout the package.
"""

from __future__ import annotations

import math
import re
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

Monomial = tuple[int, ...]

# Coefficients below this magnitude are dropped after arithmetic; the SDP
# backends are double-precision anyway.
COEFF_DROP_TOL = 1e-14


def grlex_key(m: Monomial) -> tuple[int, tuple[int, ...]]:
    """Sort key for graded lexicographic order: x1 before x2 at equal degree."""
    return (sum(m), tuple(-e for e in m))


def monomial_degree(m: Monomial) -> int:
    return sum(m)


def monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


class Polynomial:
    """Immutable sparse polynomial in n variables with float coefficients."""

    __slots__ = ("n", "_terms", "_packed")

    def __init__(self, n: int, terms: Mapping[Monomial, float] | None = None):
        if n < 1:
            raise ValueError(f"dimension must be >= 1, got {n}")
        clean: dict[Monomial, float] = {}
        if terms:
            for mono, coef in terms.items():
                mono = tuple(int(e) for e in mono)
                if len(mono) != n:
                    raise ValueError(
                        f"monomial {mono} has {len(mono)} exponents, expected {n}"
                    )
                if any(e < 0 for e in mono):
                    raise ValueError(f"negative exponent in monomial {mono}")
                c = clean.get(mono, 0.0) + float(coef)
                if c == 0.0:
                    clean.pop(mono, None)
                else:
                    clean[mono] = c
        for mono in [m for m, c in clean.items() if abs(c) < COEFF_DROP_TOL]:
            del clean[mono]
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "_terms", clean)
        object.__setattr__(self, "_packed", None)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def zero(n: int) -> "Polynomial":
        return Polynomial(n)

    @staticmethod
    def constant(n: int, c: float) -> "Polynomial":
        return Polynomial(n, {(0,) * n: c})

    @staticmethod
    def variable(n: int, i: int) -> "Polynomial":
        if not 0 <= i < n:
            raise ValueError(f"variable index {i} out of range for dimension {n}")
        mono = tuple(1 if j == i else 0 for j in range(n))
        return Polynomial(n, {mono: 1.0})

    # -- inspection ------------------------------------------------------------

    @property
    def terms(self) -> Mapping[Monomial, float]:
        return MappingProxyType(self._terms)

    def items(self) -> list[tuple[Monomial, float]]:
        """Terms in graded-lex order; deterministic iteration for assembly."""
        return sorted(self._terms.items(), key=lambda kv: grlex_key(kv[0]))

    def degree(self) -> int:
        """Total degree; 0 for the zero polynomial."""
        if not self._terms:
            return 0
        return max(sum(m) for m in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def max_abs_coeff(self) -> float:
        if not self._terms:
            return 0.0
        return max(abs(c) for c in self._terms.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.n, tuple(self.items())))

    def __repr__(self) -> str:
        return f"Polynomial({self.n}, {self.to_text()!r})"

    # -- arithmetic ------------------------------------------------------------

    def _check_same_dim(self, other: "Polynomial") -> None:
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_same_dim(other)
        terms = dict(self._terms)
        for mono, coef in other._terms.items():
            terms[mono] = terms.get(mono, 0.0) + coef
        return Polynomial(self.n, terms)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.n, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            return Polynomial(self.n, {m: c * other for m, c in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_same_dim(other)
        terms: dict[Monomial, float] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                mono = monomial_mul(ma, mb)
                terms[mono] = terms.get(mono, 0.0) + ca * cb
        return Polynomial(self.n, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = Polynomial.constant(self.n, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def partial(self, i: int) -> "Polynomial":
        """Formal partial derivative with respect to variable i (0-based)."""
        if not 0 <= i < self.n:
            raise ValueError(f"variable index {i} out of range for dimension {self.n}")
        terms: dict[Monomial, float] = {}
        for mono, coef in self._terms.items():
            e = mono[i]
            if e == 0:
                continue
            lowered = tuple(x - 1 if j == i else x for j, x in enumerate(mono))
            terms[lowered] = terms.get(lowered, 0.0) + coef * e
        return Polynomial(self.n, terms)

    # -- evaluation ------------------------------------------------------------

    def _pack(self) -> tuple[np.ndarray, np.ndarray]:
        if self._packed is None:
            items = self.items()
            E = np.array([m for m, _ in items], dtype=np.int64).reshape(len(items), self.n)
            c = np.array([c for _, c in items], dtype=np.float64)
            object.__setattr__(self, "_packed", (E, c))
        return self._packed

    def eval(self, x: Sequence[float]) -> float:
        if len(x) != self.n:
            raise ValueError(f"point has {len(x)} coordinates, expected {self.n}")
        total = 0.0
        for mono, coef in self._terms.items():
            val = coef
            for xi, e in zip(x, mono):
                if e:
                    val *= xi ** e
            total += val
        return total

    def eval_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (m, n) array of points; returns shape (m,)."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.n:
            raise ValueError(f"expected shape (m, {self.n}), got {points.shape}")
        if not self._terms:
            return np.zeros(points.shape[0])
        E, c = self._pack()
        return np.prod(points[:, None, :] ** E[None, :, :], axis=2) @ c

    def __call__(self, x):
        if isinstance(x, np.ndarray) and x.ndim == 2:
            return self.eval_batch(x)
        return self.eval(x)

    # -- text form ---------------------------------------------------------

    def to_text(self) -> str:
        """Deterministic text form in the config grammar; parse() inverts it."""
        if not self._terms:
            return "0"
        parts: list[str] = []
        for idx, (mono, coef) in enumerate(self.items()):
            factors = [
                f"x{j + 1}" if e == 1 else f"x{j + 1}^{e}"
                for j, e in enumerate(mono)
                if e > 0
            ]
            mag = abs(coef)
            if not factors:
                body = repr(mag)
            elif mag == 1.0:
                body = "*".join(factors)
            else:
                body = "*".join([repr(mag)] + factors)
            if idx == 0:
                parts.append(body if coef >= 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if coef >= 0 else f"- {body}")
        return " ".join(parts)


def lie_derivative(v: Polynomial, f: Sequence[Polynomial]) -> Polynomial:
    """Derivative of v along the vector field f: sum_i dv/dx_i * f_i."""
    if len(f) != v.n:
        raise ValueError(f"field has {len(f)} components, expected {v.n}")
    out = Polynomial.zero(v.n)
    for i, fi in enumerate(f):
        if fi.n != v.n:
            raise ValueError(f"component {i} has dimension {fi.n}, expected {v.n}")
        out = out + v.partial(i) * fi
    return out


class PolynomialParseError(ValueError):
    """Parse failure; carries the offending text and a 0-based column."""

    def __init__(self, text: str, column: int, message: str):
        self.text = text
        self.column = column
        super().__init__(f"column {column}: {message} in {text!r}")


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x\d+)"
    r"|(?P<op>[-+*^()]))"
)


def parse_polynomial(text: str, n: int) -> Polynomial:
    """Parse `c * x1^a1 * ... * xn^an` sums; `*` and `^` optional.

    Examples accepted: "1 - x1^2 - x2^2", "20.808 x1^2 x2^2", "2*x1*x2",
    "-x2". Variables are x1..xn. Parentheses are not part of the grammar.
    """
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            col = len(text) - len(stripped)
            raise PolynomialParseError(text, col, f"unexpected character {stripped[0]!r}")
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    if not tokens:
        raise PolynomialParseError(text, 0, "empty polynomial")

    terms: dict[Monomial, float] = {}
    i = 0
    while i < len(tokens):
        sign = 1.0
        while i < len(tokens) and tokens[i][0] == "op" and tokens[i][1] in "+-":
            if tokens[i][1] == "-":
                sign = -sign
            i += 1
        if i >= len(tokens):
            raise PolynomialParseError(text, len(text), "dangling sign")

        coef = sign
        expo = [0] * n
        saw_factor = False
        expect_factor = True
        while i < len(tokens):
            kind, val, col = tokens[i]
            if kind == "num":
                coef *= float(val)
                saw_factor = True
                i += 1
            elif kind == "var":
                j = int(val[1:]) - 1
                if not 0 <= j < n:
                    raise PolynomialParseError(
                        text, col, f"variable {val} out of range for dimension {n}"
                    )
                power = 1
                if i + 1 < len(tokens) and tokens[i + 1][0] == "op" and tokens[i + 1][1] == "^":
                    if i + 2 >= len(tokens) or tokens[i + 2][0] != "num":
                        raise PolynomialParseError(text, col, f"exponent expected after {val}^")
                    pval, pcol = tokens[i + 2][1], tokens[i + 2][2]
                    power = float(pval)
                    if power != int(power) or power < 0:
                        raise PolynomialParseError(text, pcol, f"exponent must be a non-negative integer, got {pval}")
                    power = int(power)
                    i += 3
                else:
                    i += 1
                expo[j] += power
                saw_factor = True
            elif kind == "op" and val == "*":
                if not saw_factor:
                    raise PolynomialParseError(text, col, "dangling '*'")
                expect_factor = True
                i += 1
                continue
            elif kind == "op" and val in "+-":
                break
            else:
                raise PolynomialParseError(text, col, f"unexpected token {val!r}")
            expect_factor = False
        if expect_factor and saw_factor:
            raise PolynomialParseError(text, len(text), "dangling '*'")
        if not saw_factor:
            col = tokens[i][2] if i < len(tokens) else len(text)
            raise PolynomialParseError(text, col, "expected a coefficient or variable")
        mono = tuple(expo)
        terms[mono] = terms.get(mono, 0.0) + coef
    return Polynomial(n, terms)
