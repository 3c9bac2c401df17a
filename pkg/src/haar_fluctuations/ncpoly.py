"""
Polynomials in two noncommuting letters x, y without a constant term.

A polynomial is a finite map from reduced words (``x^2*y*x``, never
``x*x*y*x``) to complex coefficients. The module parses the ASCII grammar
used in run configs, prints polynomials back into that grammar, splits them
into the word-shape buckets used by the mixture formulas and evaluates them
on scalars or matrices.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import reduce
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

X = "x"
Y = "y"
LETTERS = (X, Y)

BUCKETS = ("p2", "q2", "p3", "q3")


class PolynomialSyntaxError(ValueError):
    """Malformed polynomial text; ``position`` is the offending character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ConstantTermError(PolynomialSyntaxError):
    """A coefficient-only term (constant) appeared in the input."""


# ============================================================================
# MONOMIALS
# ============================================================================

@dataclass(frozen=True, order=True)
class Monomial:
    """Reduced word: adjacent factors always carry distinct letters."""
    word: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        merged: list[tuple[str, int]] = []
        for letter, power in self.word:
            if letter not in LETTERS:
                raise ValueError(f"Unknown letter: {letter!r}")
            if int(power) < 1:
                raise ValueError(f"Powers must be positive, got {power}")
            if merged and merged[-1][0] == letter:
                merged[-1] = (letter, merged[-1][1] + int(power))
            else:
                merged.append((letter, int(power)))
        if not merged:
            raise ValueError("The empty word is a constant term")
        object.__setattr__(self, "word", tuple(merged))

    @classmethod
    def of(cls, *factors: str | tuple[str, int]) -> "Monomial":
        """Monomial.of("x", ("y", 2), "x") == x*y^2*x."""
        word = [(f, 1) if isinstance(f, str) else f for f in factors]
        return cls(tuple(word))

    @property
    def length(self) -> int:
        # x^k counts as one
        return len(self.word)

    @property
    def degree(self) -> int:
        return sum(power for _, power in self.word)

    @property
    def shape(self) -> str:
        return "".join(letter for letter, _ in self.word)

    @property
    def powers(self) -> tuple[int, ...]:
        return tuple(power for _, power in self.word)

    def scalar(self, x: complex, y: complex) -> complex:
        values = {X: complex(x), Y: complex(y)}
        out = 1 + 0j
        for letter, power in self.word:
            out *= values[letter] ** power
        return out

    def __str__(self) -> str:
        return "*".join(
            letter if power == 1 else f"{letter}^{power}" for letter, power in self.word
        )


def _sort_key(mono: Monomial) -> tuple:
    return (mono.length, mono.degree, mono.word)


# ============================================================================
# POLYNOMIALS
# ============================================================================

@dataclass(frozen=True)
class NCPolynomial:
    """Canonical polynomial: no zero coefficients, no constant monomial."""
    terms: Mapping[Monomial, complex]

    def __post_init__(self) -> None:
        clean = {}
        for mono, coeff in dict(self.terms).items():
            if not isinstance(mono, Monomial):
                raise TypeError(f"Expected Monomial, got {type(mono).__name__}")
            coeff = complex(coeff)
            if not np.isfinite(coeff):
                raise ValueError(f"Non-finite coefficient for {mono}")
            # exact zeros only; tiny user coefficients survive
            if coeff != 0:
                clean[mono] = coeff
        ordered = dict(sorted(clean.items(), key=lambda kv: _sort_key(kv[0])))
        object.__setattr__(self, "terms", MappingProxyType(ordered))

    @classmethod
    def from_terms(cls, items: Iterable[tuple[Monomial, complex]]) -> "NCPolynomial":
        """Sums repeated monomials (e.g. x*x*y and x^2*y) before canonicalising."""
        acc: dict[Monomial, complex] = {}
        for mono, coeff in items:
            acc[mono] = acc.get(mono, 0j) + complex(coeff)
        return cls(acc)

    @classmethod
    def zero(cls) -> "NCPolynomial":
        return cls({})

    @classmethod
    def letter(cls, name: str) -> "NCPolynomial":
        return cls({Monomial(((name, 1),)): 1})

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __reduce__(self):
        # mappingproxy does not pickle; workers receive a plain dict
        return (NCPolynomial, (dict(self.terms),))

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __add__(self, other: "NCPolynomial") -> "NCPolynomial":
        return NCPolynomial.from_terms([*self.terms.items(), *other.terms.items()])

    def __neg__(self) -> "NCPolynomial":
        return NCPolynomial({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "NCPolynomial") -> "NCPolynomial":
        return self + (-other)

    def __mul__(self, other: "NCPolynomial | complex") -> "NCPolynomial":
        if isinstance(other, NCPolynomial):
            return NCPolynomial.from_terms(
                (Monomial(m1.word + m2.word), c1 * c2)
                for m1, c1 in self.terms.items()
                for m2, c2 in other.terms.items()
            )
        return NCPolynomial({m: c * complex(other) for m, c in self.terms.items()})

    __rmul__ = __mul__

    @property
    def max_length(self) -> int:
        return max((m.length for m in self.terms), default=0)

    def scalar(self, x: complex, y: complex) -> complex:
        """Commutative evaluation at complex numbers."""
        return sum((c * m.scalar(x, y) for m, c in self.terms.items()), 0j)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts: list[str] = []
        for i, (mono, coeff) in enumerate(self.terms.items()):
            sign, body = _format_term(mono, coeff)
            if i == 0:
                parts.append(("-" if sign == "-" else "") + body)
            else:
                parts.append(f" {sign} {body}")
        return "".join(parts)


def _format_number(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _format_term(mono: Monomial, coeff: complex) -> tuple[str, str]:
    if coeff.imag == 0:
        sign = "-" if coeff.real < 0 else "+"
        magnitude = abs(coeff.real)
        prefix = "" if magnitude == 1 else f"{_format_number(magnitude)}*"
        return sign, f"{prefix}{mono}"
    im_sign = "-" if coeff.imag < 0 else "+"
    text = f"({_format_number(coeff.real)}{im_sign}{_format_number(abs(coeff.imag))}i)"
    return "+", f"{text}*{mono}"


# ============================================================================
# PARSER
# ============================================================================

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
    |(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
    |(?P<letter>[xy])
    |(?P<imag>i)
    |(?P<op>[-+*^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise PolynomialSyntaxError(f"Unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup or ""
        if kind != "ws":
            tokens.append(_Token(kind, match.group(), pos))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def _is_op(self, *ops: str) -> bool:
        return self.current.kind == "op" and self.current.text in ops

    def _expect_op(self, op: str) -> _Token:
        if not self._is_op(op):
            raise PolynomialSyntaxError(f"Expected {op!r}", self.current.pos)
        return self._advance()

    def parse(self) -> NCPolynomial:
        items: list[tuple[Monomial, complex]] = []
        sign = 1.0
        if self._is_op("+", "-"):
            sign = -1.0 if self._advance().text == "-" else 1.0
        items.append(self._term(sign))
        while self._is_op("+", "-"):
            sign = -1.0 if self._advance().text == "-" else 1.0
            items.append(self._term(sign))
        if self.current.kind != "end":
            raise PolynomialSyntaxError(
                f"Unexpected token {self.current.text!r}", self.current.pos
            )
        return NCPolynomial.from_terms(items)

    def _term(self, sign: float) -> tuple[Monomial, complex]:
        start = self.current.pos
        coeff = 1 + 0j
        if self.current.kind == "number" or self._is_op("("):
            coeff = self._coefficient()
            if self.current.kind == "end" or self._is_op("+", "-"):
                raise ConstantTermError("Constant terms are not allowed", start)
            self._expect_op("*")
        factors = [self._factor()]
        while self._is_op("*"):
            self._advance()
            factors.append(self._factor())
        return Monomial(tuple(factors)), sign * coeff

    def _number(self) -> float:
        if self.current.kind != "number":
            raise PolynomialSyntaxError("Expected a number", self.current.pos)
        return float(self._advance().text)

    def _coefficient(self) -> complex:
        if self.current.kind == "number":
            return complex(self._number())
        self._expect_op("(")
        re_sign = 1.0
        if self._is_op("+", "-"):
            re_sign = -1.0 if self._advance().text == "-" else 1.0
        real = re_sign * self._number()
        if not self._is_op("+", "-"):
            raise PolynomialSyntaxError("Expected '+' or '-' before the imaginary part", self.current.pos)
        im_sign = -1.0 if self._advance().text == "-" else 1.0
        imag = im_sign * self._number()
        if self.current.kind != "imag":
            raise PolynomialSyntaxError("Expected 'i'", self.current.pos)
        self._advance()
        self._expect_op(")")
        return complex(real, imag)

    def _factor(self) -> tuple[str, int]:
        if self.current.kind != "letter":
            raise PolynomialSyntaxError("Expected 'x' or 'y'", self.current.pos)
        letter = self._advance().text
        power = 1
        if self._is_op("^"):
            self._advance()
            token = self.current
            if token.kind != "number" or not token.text.isdigit():
                raise PolynomialSyntaxError("Expected a positive integer power", token.pos)
            power = int(self._advance().text)
            if power < 1:
                raise PolynomialSyntaxError("Powers must be positive", token.pos)
        return letter, power


def parse_polynomial(text: str) -> NCPolynomial:
    """Parses ``"x + y + 0.5*x*y*x"`` style input into a canonical polynomial.

    Args:
        text (str): Polynomial in the config grammar.

    Returns:
        NCPolynomial: Canonical polynomial.

    Raises:
        PolynomialSyntaxError: Malformed input (``.position`` points at it).
        ConstantTermError: A term without any letter.
    """
    return _Parser(text).parse()


# ============================================================================
# DECOMPOSITION
# ============================================================================

@dataclass(frozen=True)
class Decomposition:
    """Word-shape buckets of a polynomial.

    Keys follow the coefficient names of the mixture formulas:
    ``p2[(k, l)]`` is the coefficient of x^k y^l, ``q2[(k, l)]`` of y^l x^k,
    ``p3[(k, l, m)]`` of x^k y^l x^m and ``q3[(k, l, m)]`` of y^l x^k y^m.
    """
    p1: Mapping[int, complex]
    q1: Mapping[int, complex]
    p2: Mapping[tuple[int, int], complex]
    q2: Mapping[tuple[int, int], complex]
    p3: Mapping[tuple[int, int, int], complex]
    q3: Mapping[tuple[int, int, int], complex]
    r: NCPolynomial

    def reassemble(self) -> NCPolynomial:
        items: list[tuple[Monomial, complex]] = []
        items += [(Monomial.of((X, k)), c) for k, c in self.p1.items()]
        items += [(Monomial.of((Y, l)), c) for l, c in self.q1.items()]
        items += [(Monomial.of((X, k), (Y, l)), c) for (k, l), c in self.p2.items()]
        items += [(Monomial.of((Y, l), (X, k)), c) for (k, l), c in self.q2.items()]
        items += [(Monomial.of((X, k), (Y, l), (X, m)), c) for (k, l, m), c in self.p3.items()]
        items += [(Monomial.of((Y, l), (X, k), (Y, m)), c) for (k, l, m), c in self.q3.items()]
        items += list(self.r.terms.items())
        return NCPolynomial.from_terms(items)


def decompose(p: NCPolynomial) -> Decomposition:
    """Splits P into P1 + Q1 + P2 + Q2 + P3 + Q3 + R by word shape."""
    p1: dict[int, complex] = {}
    q1: dict[int, complex] = {}
    p2: dict[tuple[int, int], complex] = {}
    q2: dict[tuple[int, int], complex] = {}
    p3: dict[tuple[int, int, int], complex] = {}
    q3: dict[tuple[int, int, int], complex] = {}
    rest: dict[Monomial, complex] = {}

    for mono, coeff in p.terms.items():
        shape, powers = mono.shape, mono.powers
        if shape == "x":
            p1[powers[0]] = coeff
        elif shape == "y":
            q1[powers[0]] = coeff
        elif shape == "xy":
            p2[(powers[0], powers[1])] = coeff
        elif shape == "yx":
            q2[(powers[1], powers[0])] = coeff
        elif shape == "xyx":
            p3[powers] = coeff
        elif shape == "yxy":
            q3[(powers[1], powers[0], powers[2])] = coeff
        else:
            rest[mono] = coeff

    return Decomposition(
        p1=MappingProxyType(p1),
        q1=MappingProxyType(q1),
        p2=MappingProxyType(p2),
        q2=MappingProxyType(q2),
        p3=MappingProxyType(p3),
        q3=MappingProxyType(q3),
        r=NCPolynomial(rest),
    )


def eval_univariate(poly1d: Mapping[int, complex], z: complex) -> complex:
    """Sum of coeff * z^k, e.g. P1(alpha) or Q1(beta)."""
    z = complex(z)
    return sum((complex(c) * z**k for k, c in poly1d.items()), 0j)


def eval_component(decomposition: Decomposition, bucket: str, alpha: complex, beta: complex) -> complex:
    """Scalar value of P2, Q2, P3 or Q3 at (alpha, beta).

    P2 = sum a_{k,l} a^k b^l, P3 = sum c_{k,l,m} a^(k+m) b^l,
    Q2 = sum b_{k,l} a^k b^l, Q3 = sum d_{k,l,m} a^k b^(l+m).
    """
    a, b = complex(alpha), complex(beta)
    if bucket == "p2":
        return sum((c * a**k * b**l for (k, l), c in decomposition.p2.items()), 0j)
    if bucket == "q2":
        return sum((c * a**k * b**l for (k, l), c in decomposition.q2.items()), 0j)
    if bucket == "p3":
        return sum((c * a ** (k + m) * b**l for (k, l, m), c in decomposition.p3.items()), 0j)
    if bucket == "q3":
        return sum((c * a**k * b ** (l + m) for (k, l, m), c in decomposition.q3.items()), 0j)
    raise ValueError(f"Unknown bucket {bucket!r}; expected one of {BUCKETS}")


# ============================================================================
# MATRIX EVALUATION
# ============================================================================

def eval_matrix(p: NCPolynomial, mx: np.ndarray, my: np.ndarray) -> np.ndarray:
    """Evaluates P on two square matrices of the same size (ordered products).

    Raises:
        ValueError: Non-square inputs or a dimension mismatch.
    """
    mx = np.asarray(mx, dtype=complex)
    my = np.asarray(my, dtype=complex)
    if mx.ndim != 2 or mx.shape[0] != mx.shape[1]:
        raise ValueError(f"mx must be square, got shape {mx.shape}")
    if my.shape != mx.shape:
        raise ValueError(f"Dimension mismatch: mx {mx.shape} vs my {my.shape}")

    base = {X: mx, Y: my}
    powers: dict[tuple[str, int], np.ndarray] = {}

    def power(letter: str, k: int) -> np.ndarray:
        if (letter, k) not in powers:
            powers[(letter, k)] = np.linalg.matrix_power(base[letter], k)
        return powers[(letter, k)]

    out = np.zeros_like(mx)
    for mono, coeff in p.terms.items():
        product = reduce(np.matmul, (power(letter, k) for letter, k in mono.word))
        out = out + coeff * product
    return out
