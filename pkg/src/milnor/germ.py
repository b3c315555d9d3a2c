"""Exact real polynomial map germs f: (R^m, 0) -> (R, 0).

Coefficients and weights are stored as :class:`fractions.Fraction`; numeric
evaluation converts to float at the call boundary and is vectorised over
batches of points with numpy.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, GermParseError

Rational = Union[int, float, str, Fraction]


def as_fraction(value: Rational) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise GermParseError(f"not a rational number: {value!r}") from exc
    return Fraction(value)


@dataclass(frozen=True)
class Monomial:
    exponents: tuple[int, ...]
    coefficient: Fraction

    def __post_init__(self):
        if self.coefficient == 0:
            raise ValueError("zero monomials are never stored")
        if any(e < 0 for e in self.exponents):
            raise ValueError("exponents must be non-negative")

    @property
    def degree(self) -> int:
        return sum(self.exponents)


def _grlex_key(exponents: tuple[int, ...]):
    # graded lexicographic, highest degree first
    return (-sum(exponents), tuple(-e for e in exponents))


class _Compiled:
    """Dense numpy form of a polynomial: exponent matrix and float coefficients."""

    __slots__ = ("exponents", "coefficients", "n_vars")

    def __init__(self, n_vars: int, terms: Iterable[tuple[tuple[int, ...], Fraction]]):
        terms = list(terms)
        self.n_vars = n_vars
        if terms:
            self.exponents = np.array([e for e, _ in terms], dtype=np.int64).reshape(len(terms), n_vars)
            self.coefficients = np.array([float(c) for _, c in terms])
        else:
            self.exponents = np.zeros((0, n_vars), dtype=np.int64)
            self.coefficients = np.zeros(0)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        # points: (N, m) -> (N,)
        if self.coefficients.size == 0:
            return np.zeros(points.shape[0])
        powers = points[:, None, :] ** self.exponents[None, :, :]
        return np.prod(powers, axis=2) @ self.coefficients


def _derivative_terms(terms, var: int):
    out = {}
    for exps, coef in terms:
        e = exps[var]
        if e == 0:
            continue
        new = list(exps)
        new[var] = e - 1
        key = tuple(new)
        out[key] = out.get(key, Fraction(0)) + coef * e
    return [(k, v) for k, v in out.items() if v != 0]


@dataclass(frozen=True)
class PolynomialGerm:
    """A polynomial with rational coefficients and no constant term.

    Build instances with :meth:`from_terms` or :func:`parse_germ`; the raw
    constructor expects terms already canonical.
    """

    n_vars: int
    terms: tuple[Monomial, ...]

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("a germ needs at least one variable")
        seen = set()
        for mono in self.terms:
            if len(mono.exponents) != self.n_vars:
                raise DimensionMismatch(
                    f"monomial {mono.exponents} has {len(mono.exponents)} exponents, germ has {self.n_vars} variables"
                )
            if mono.degree == 0:
                raise GermParseError("a germ has no constant term (f(0) must be 0)")
            if mono.exponents in seen:
                raise ValueError(f"duplicate exponent vector {mono.exponents}")
            seen.add(mono.exponents)

    @classmethod
    def from_terms(
        cls,
        n_vars: int,
        terms: Union[Mapping[Sequence[int], Rational], Iterable[tuple[Sequence[int], Rational]]],
    ) -> "PolynomialGerm":
        """Combine like terms, drop zeros and sort in graded lexicographic order."""
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple[int, ...], Fraction] = {}
        for exps, coef in items:
            key = tuple(int(e) for e in exps)
            if len(key) != n_vars:
                raise DimensionMismatch(f"exponent vector {key} does not have length {n_vars}")
            acc[key] = acc.get(key, Fraction(0)) + as_fraction(coef)
        monos = [Monomial(k, v) for k, v in acc.items() if v != 0]
        monos.sort(key=lambda mono: _grlex_key(mono.exponents))
        return cls(n_vars, tuple(monos))

    def __add__(self, other: "PolynomialGerm") -> "PolynomialGerm":
        if other.n_vars != self.n_vars:
            raise DimensionMismatch("cannot add germs in different numbers of variables")
        pairs = [(m.exponents, m.coefficient) for m in self.terms + other.terms]
        return PolynomialGerm.from_terms(self.n_vars, pairs)

    def scale(self, factor: Rational) -> "PolynomialGerm":
        factor = as_fraction(factor)
        return PolynomialGerm.from_terms(self.n_vars, [(m.exponents, m.coefficient * factor) for m in self.terms])

    @property
    def degree(self) -> int:
        return max((m.degree for m in self.terms), default=0)

    def _pairs(self):
        return [(m.exponents, m.coefficient) for m in self.terms]

    @cached_property
    def _value_fn(self) -> _Compiled:
        return _Compiled(self.n_vars, self._pairs())

    @cached_property
    def _gradient_fns(self) -> tuple[_Compiled, ...]:
        return tuple(_Compiled(self.n_vars, _derivative_terms(self._pairs(), i)) for i in range(self.n_vars))

    @cached_property
    def _hessian_fns(self) -> tuple[tuple[_Compiled, ...], ...]:
        rows = []
        for i in range(self.n_vars):
            di = _derivative_terms(self._pairs(), i)
            rows.append(tuple(_Compiled(self.n_vars, _derivative_terms(di, j)) for j in range(self.n_vars)))
        return tuple(rows)

    def _as_batch(self, x) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        batch = arr.reshape(1, -1) if single else arr
        if batch.ndim != 2 or batch.shape[1] != self.n_vars:
            raise DimensionMismatch(f"expected points with {self.n_vars} coordinates, got shape {arr.shape}")
        return batch, single

    def evaluate_many(self, points) -> np.ndarray:
        batch, _ = self._as_batch(points)
        return self._value_fn(batch)

    def gradient_many(self, points) -> np.ndarray:
        batch, _ = self._as_batch(points)
        return np.stack([g(batch) for g in self._gradient_fns], axis=1)

    def hessian_many(self, points) -> np.ndarray:
        batch, _ = self._as_batch(points)
        m = self.n_vars
        out = np.empty((batch.shape[0], m, m))
        for i in range(m):
            for j in range(i, m):
                vals = self._hessian_fns[i][j](batch)
                out[:, i, j] = vals
                out[:, j, i] = vals
        return out

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def __str__(self) -> str:
        return format_germ(self)


def _single(germ: PolynomialGerm, x) -> np.ndarray:
    batch, single = germ._as_batch(x)
    if not single:
        raise DimensionMismatch("expected a single point, got a batch")
    return batch


def evaluate(f: PolynomialGerm, x) -> float:
    return float(f.evaluate_many(_single(f, x))[0])


def gradient(f: PolynomialGerm, x) -> np.ndarray:
    return f.gradient_many(_single(f, x))[0]


def hessian(f: PolynomialGerm, x) -> np.ndarray:
    return f.hessian_many(_single(f, x))[0]


@dataclass(frozen=True)
class WeightVector:
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        for w in self.weights:
            if not (0 < w <= 1):
                raise ValueError(f"weights lie in (0, 1], got {w}")

    @classmethod
    def of(cls, *weights: Rational) -> "WeightVector":
        if len(weights) == 1 and not isinstance(weights[0], (int, float, str, Fraction)):
            weights = tuple(weights[0])
        return cls(tuple(as_fraction(w) for w in weights))

    @classmethod
    def parse(cls, text: str) -> "WeightVector":
        parts = [p for p in text.replace(",", " ").split() if p]
        if not parts:
            raise GermParseError("empty weight vector")
        try:
            return cls.of(*parts)
        except ValueError as exc:
            raise GermParseError(str(exc)) from exc

    def __len__(self) -> int:
        return len(self.weights)

    def __str__(self) -> str:
        return ",".join(str(w) for w in self.weights)


def is_quasi_homogeneous(f: PolynomialGerm, w: WeightVector) -> bool:
    """True iff every monomial has weighted degree exactly 1."""
    if len(w) != f.n_vars:
        raise DimensionMismatch(f"weight vector has length {len(w)}, germ has {f.n_vars} variables")
    return all(sum(wi * e for wi, e in zip(w.weights, m.exponents)) == 1 for m in f.terms)


def weighted_scaling(w: WeightVector, a: float, x) -> np.ndarray:
    """The point (a^{w_1} x_1, ..., a^{w_m} x_m)."""
    return np.asarray(x, dtype=float) * np.power(a, [float(wi) for wi in w.weights])


def parse_germ(text: str) -> tuple[PolynomialGerm, WeightVector | None]:
    """Parse the germ text format.

    ::

        vars 2
        1 4 0
        -1 0 2
        weights 1/4 1/2

    Blank lines and ``#`` comments are ignored.
    """
    n_vars = None
    weights = None
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0].lower()
        if head == "vars":
            if n_vars is not None or len(tokens) != 2:
                raise GermParseError(f"line {lineno}: malformed 'vars' line")
            try:
                n_vars = int(tokens[1])
            except ValueError as exc:
                raise GermParseError(f"line {lineno}: variable count must be an integer") from exc
            if n_vars < 1:
                raise GermParseError(f"line {lineno}: variable count must be positive")
            continue
        if n_vars is None:
            raise GermParseError(f"line {lineno}: first line must be 'vars m'")
        if head == "weights":
            if len(tokens) - 1 != n_vars:
                raise GermParseError(f"line {lineno}: expected {n_vars} weights")
            try:
                weights = WeightVector.of(*tokens[1:])
            except ValueError as exc:
                raise GermParseError(f"line {lineno}: {exc}") from exc
            continue
        if len(tokens) != n_vars + 1:
            raise GermParseError(f"line {lineno}: expected a coefficient and {n_vars} exponents")
        coef = as_fraction(tokens[0])
        try:
            exps = tuple(int(t) for t in tokens[1:])
        except ValueError as exc:
            raise GermParseError(f"line {lineno}: exponents must be integers") from exc
        if any(e < 0 for e in exps):
            raise GermParseError(f"line {lineno}: negative exponent")
        if sum(exps) == 0:
            raise GermParseError(f"line {lineno}: constant term not allowed in a germ")
        pairs.append((exps, coef))
    if n_vars is None:
        raise GermParseError("missing 'vars m' line")
    germ = PolynomialGerm.from_terms(n_vars, pairs)
    if not germ.terms:
        raise GermParseError("germ has no non-zero terms")
    return germ, weights


def load_germ(path) -> tuple[PolynomialGerm, WeightVector | None]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise GermParseError(f"cannot read germ file {path}: {exc}") from exc
    return parse_germ(text)


def format_germ(f: PolynomialGerm, weights: WeightVector | None = None) -> str:
    lines = [f"vars {f.n_vars}"]
    lines += [" ".join([str(m.coefficient)] + [str(e) for e in m.exponents]) for m in f.terms]
    if weights is not None:
        lines.append("weights " + " ".join(str(w) for w in weights.weights))
    return "\n".join(lines) + "\n"


def to_expression(f: PolynomialGerm, names: Sequence[str] | None = None) -> str:
    """Human readable form, e.g. ``x1^4 - x2^2``."""
    names = names or [f"x{i + 1}" for i in range(f.n_vars)]
    out = []
    for mono in f.terms:
        factors = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, mono.exponents) if e]
        coef = mono.coefficient
        body = "*".join(factors)
        mag = abs(coef)
        text = body if mag == 1 else f"{mag}*{body}"
        sign = "-" if coef < 0 else "+"
        out.append((sign, text))
    if not out:
        return "0"
    first_sign, first = out[0]
    parts = [("-" if first_sign == "-" else "") + first]
    parts += [f" {s} {t}" for s, t in out[1:]]
    return "".join(parts)


# -- constructors used by the catalog and tests -------------------------------


def monomial_germ(n_vars: int, terms: Mapping[Sequence[int], Rational]) -> PolynomialGerm:
    return PolynomialGerm.from_terms(n_vars, terms)


def power_germ(k: int) -> PolynomialGerm:
    """f = x^k."""
    return PolynomialGerm.from_terms(1, {(k,): 1})


def quadratic_form(signs: Sequence[int], scale: Rational = 1) -> PolynomialGerm:
    """sum_i signs[i] * scale * x_i^2."""
    m = len(signs)
    terms = {}
    for i, sg in enumerate(signs):
        e = [0] * m
        e[i] = 2
        terms[tuple(e)] = as_fraction(scale) * sg
    return PolynomialGerm.from_terms(m, terms)
