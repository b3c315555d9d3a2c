"""Numerical side of the real Gauss-Manin systems.

Hypergeometric series with term-wise derivatives, residuals of candidate
differential equations, closed-form periods of quadratic singularities and a
Monte Carlo estimator of the same periods that does not use the sphere-area
formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError, NoConvergence, PoleError, PoleProximity
from .germ import as_fraction, quadratic_form

Number = Union[int, float, Fraction]

SERIES_RTOL = 1e-15
SERIES_MAX_TERMS = 100_000
DEFAULT_SEED = 20240611
SHARD_SIZE = 1 << 17


# -- special functions ---------------------------------------------------------


def pochhammer(q: Number, l: int) -> Fraction:
    """Rising factorial (q)_l = q (q+1) ... (q+l-1), exactly."""
    if l < 0:
        raise ValueError("l must be non-negative")
    q = as_fraction(q)
    out = Fraction(1)
    for i in range(l):
        out *= q + i
    return out


@dataclass(frozen=True)
class HypergeometricParams:
    a: Fraction
    b: Fraction
    c: Fraction

    def __post_init__(self):
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.c <= 0 and self.c.denominator == 1:
            raise DomainError(f"c = {self.c} is a non-positive integer")


def hyp2f1_series(p: HypergeometricParams, z: float, n_derivatives: int = 0) -> tuple[float, ...]:
    """2F1(a, b; c; z) and its first ``n_derivatives`` z-derivatives by term-wise differentiation.

    Terms follow the ratio recurrence t_{l+1} = t_l (a+l)(b+l) / ((c+l)(l+1)) z.
    Summation stops once every running series has a term below 1e-15 of its sum.
    """
    z = float(z)
    if abs(z) >= 1:
        raise DomainError(f"|z| = {abs(z)} >= 1 is outside the disc of convergence")
    a, b, c = float(p.a), float(p.b), float(p.c)
    sums = [0.0] * (n_derivatives + 1)
    # coef_l = (a)_l (b)_l / ((c)_l l!); the j-th derivative term is coef_l * l!/(l-j)! * z^(l-j)
    coef = 1.0
    for l in range(SERIES_MAX_TERMS):
        small = True
        for j in range(n_derivatives + 1):
            if l < j:
                continue
            falling = math.prod(range(l - j + 1, l + 1)) if j else 1
            term = coef * falling * z ** (l - j)
            sums[j] += term
            if abs(term) > SERIES_RTOL * abs(sums[j]):
                small = False
        if small and l > n_derivatives:
            return tuple(sums)
        coef *= (a + l) * (b + l) / ((c + l) * (l + 1))
        if coef == 0.0:
            return tuple(sums)
    if abs(z) > 0.95:
        raise NoConvergence(f"2F1 series did not converge in {SERIES_MAX_TERMS} terms at z = {z}")
    return tuple(sums)


def hyp2f1(p: HypergeometricParams, z: float) -> float:
    return hyp2f1_series(p, z)[0]


def gauss_equation_residual(p: HypergeometricParams, z: float, *, printed_sign: bool = False) -> float:
    """Scale-normalised residual of Gauss's equation at z.

    Evaluates z(1-z)F'' + (c-(a+b+1)z)F' - abF with term-wise series
    derivatives, divided by the sum of the three absolute contributions.
    ``printed_sign=True`` uses z(z-1) for the leading coefficient instead.
    """
    F, F1, F2 = hyp2f1_series(p, z, 2)
    a, b, c = float(p.a), float(p.b), float(p.c)
    lead = z * (z - 1) if printed_sign else z * (1 - z)
    parts = (lead * F2, (c - (a + b + 1) * z) * F1, -a * b * F)
    scale = sum(abs(v) for v in parts)
    return abs(sum(parts)) / scale if scale else 0.0


# -- differential operators ------------------------------------------------------


@dataclass(frozen=True)
class OperatorTerm:
    order: int
    coefficient: Callable[[np.ndarray], np.ndarray]
    label: str = ""


@dataclass(frozen=True)
class DifferentialOperator:
    """sum_j c_j(var) D^j acting on functions of one variable."""

    terms: tuple[OperatorTerm, ...]
    name: str = ""

    def __post_init__(self):
        if not self.terms:
            raise ValueError("an operator needs at least one term")
        orders = [t.order for t in self.terms]
        if len(set(orders)) != len(orders) or min(orders) < 0:
            raise ValueError("term orders must be distinct and non-negative")

    @property
    def order(self) -> int:
        return max(t.order for t in self.terms)

    def apply(self, var, derivatives: Sequence) -> np.ndarray:
        """Evaluate on a function given its derivatives ``derivatives[j]`` at ``var``."""
        var = np.asarray(var, dtype=float)
        total = np.zeros_like(var, dtype=float)
        for term in self.terms:
            total = total + term.coefficient(var) * np.asarray(derivatives[term.order], dtype=float)
        return total

    def __str__(self) -> str:
        return self.name or " + ".join(f"({t.label}) D^{t.order}" for t in self.terms)


def d_t() -> DifferentialOperator:
    return DifferentialOperator((OperatorTerm(1, lambda t: np.ones_like(t), "1"),), "D_t")


def pole_operator(eta: float) -> DifferentialOperator:
    """(t - eta) D_t + 1, which annihilates c / (t - eta)."""
    return DifferentialOperator(
        (OperatorTerm(1, lambda t: t - eta, "t - eta"), OperatorTerm(0, lambda t: np.ones_like(t), "1")),
        f"(t - {eta:g}) D_t + 1",
    )


def xk_operator(k: int, t: float) -> DifferentialOperator:
    """The x-operator printed for f = x^k, with t as a parameter:

    2x^{k-3}(x^k/t - 1) D_xx - ((k+1)/k t/x^2 - (2k+1)/k x^{k-2}) D_x - t/(kx)
    """
    return DifferentialOperator(
        (
            OperatorTerm(2, lambda x: 2 * x ** (k - 3) * (x ** k / t - 1), "2x^(k-3)(x^k/t-1)"),
            OperatorTerm(1, lambda x: -((k + 1) / k * t / x ** 2 - (2 * k + 1) / k * x ** (k - 2)),
                         "-((k+1)/k t/x^2 - (2k+1)/k x^(k-2))"),
            OperatorTerm(0, lambda x: -t / (k * x), "-t/(kx)"),
        ),
        f"S_{k}(t={t:g})",
    )


def xk_solution_derivatives(k: int, x: float, t: float) -> tuple[float, float, float]:
    """u, u_x, u_xx for u(x, t) = x 2F1(1, 1/k; 1+1/k; x^k/t) / t, summed term-wise in x.

    With z = x^k/t the series is u = sum_l x^{1+kl} / ((1+kl) t^{l+1}).
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    z = x ** k / t
    if t <= 0 or not (0 < z < 1):
        raise DomainError(f"need t > 0 and 0 < x^k/t < 1, got x={x}, t={t}")
    u = u1 = u2 = 0.0
    zl = 1.0
    for l in range(SERIES_MAX_TERMS):
        # (1)_l (1/k)_l / ((1+1/k)_l l!) reduces to 1 / (1 + k l)
        c_l = 1.0 / (1 + k * l)
        e = k * l
        tu = c_l * x * zl / t
        tu1 = c_l * (1 + e) * zl / t
        tu2 = c_l * (1 + e) * e * zl / (x * t)
        u, u1, u2 = u + tu, u1 + tu1, u2 + tu2
        if l > 2 and max(abs(tu) / abs(u), abs(tu1) / abs(u1), abs(tu2) / max(abs(u2), 1e-300)) < SERIES_RTOL:
            break
        zl *= z
    else:
        if z > 0.95:
            raise NoConvergence("series for u did not converge")
    return u, u1, u2


def xk_operator_residual(k: int, x: float, t: float) -> float:
    """|S u| at (x, t) for the printed x^k operator and the hypergeometric u."""
    if x == 0:
        raise DomainError("x must be non-zero")
    derivs = xk_solution_derivatives(k, x, t)
    return float(abs(xk_operator(k, t).apply(x, derivs)))


def xk_first_order_residual(k: int, x: float, t: float) -> float:
    """|(t - x^k) u_xx - k x^{k-1} u_x|, an x-operator that does annihilate u.

    Since u_x = 1/(t - x^k), this is the exact first-order relation between
    consecutive derivatives; it serves as a control next to ``xk_operator_residual``.
    """
    u, u1, u2 = xk_solution_derivatives(k, x, t)
    return abs((t - x ** k) * u2 - k * x ** (k - 1) * u1)


@dataclass(frozen=True)
class GMSystemDescriptor:
    operator: DifferentialOperator
    multiplicity: int
    label: str = ""


def xk_system(k: int, t: float) -> GMSystemDescriptor:
    """D/SD for k even, D/SD + D/SD for k odd."""
    return GMSystemDescriptor(xk_operator(k, t), 1 if k % 2 == 0 else 2,
                              "D/SD" if k % 2 == 0 else "D/SD + D/SD")


def quadratic_system(eta: float) -> GMSystemDescriptor:
    """Descriptor carrying the operator validated against the computed period.

    The label keeps the published name of the system, D/D_t D.
    """
    return GMSystemDescriptor(pole_operator(eta), 1, "D/D_t D")


# -- periods of quadratic singularities ---------------------------------------------


def ball_volume(d: int, eta: float) -> float:
    """pi^{d/2} / Gamma(d/2 + 1) * eta^{d/2}.

    d = -1 is allowed (value 1 / (pi sqrt(eta))); it appears for the
    0-dimensional cycle of a form with one positive square.
    """
    if d < -1:
        raise ValueError("d must be >= -1")
    if eta <= 0:
        raise ValueError("eta must be positive")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * eta ** (d / 2)


def closed_form_u(m: int, lam: int, eta: float, t: float) -> float:
    """2 pi V_{n-lam-1}(eta) / (t - eta) with n = m - 1."""
    if not (0 <= lam < m):
        raise ValueError(f"need 0 <= lambda < m, got m={m}, lambda={lam}")
    if t == eta:
        raise PoleError(f"t = eta = {eta} is a pole")
    n = m - 1
    return 2 * math.pi * ball_volume(n - lam - 1, eta) / (t - eta)


def sphere_area(d: int, radius: float) -> float:
    """Surface measure of the (d-1)-sphere of the given radius in R^d (d = 1: two points)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2) * radius ** (d - 1)


@dataclass(frozen=True)
class PeriodEstimate:
    value: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if self.std_error < 0 or self.n_samples < 1:
            raise ValueError("std_error >= 0 and n_samples >= 1 required")


def quadratic_period(m: int, lam: int, eta: float, t: float, n_samples: int = 1_000_000,
                     seed: int = DEFAULT_SEED, shard_size: int = SHARD_SIZE) -> PeriodEstimate:
    """Monte Carlo estimate of the integral of dA / (t - f) over the vanishing cycle.

    f has m - lam positive and lam negative squares; the cycle is the sphere of
    radius sqrt(eta) in the positive coordinate subspace (d = m - lam
    coordinates). For d = 1 the cycle is two points and is summed exactly.

    For d >= 2 the surface integral is turned into a volume integral over the
    shell sqrt(eta)/2 < |y| < 3 sqrt(eta)/2:

        int_S g dA = 1/(2h) int_shell g(rho y/|y|) (rho/|y|)^{d-1} dy,

    sampled with Gaussian draws y ~ N(0, s^2 I) and importance weights 1/p(y).
    The normalised draw y/|y| is uniform on the sphere. Shards use seeds
    spawned from ``seed`` and are reduced by sum and sum of squares.
    """
    if not (0 <= lam < m):
        raise ValueError(f"need 0 <= lambda < m, got m={m}, lambda={lam}")
    if not (t > eta > 0):
        raise DomainError(f"need t > eta > 0, got t={t}, eta={eta}")
    f = quadratic_form([1] * (m - lam) + [-1] * lam)
    d = m - lam
    rho = math.sqrt(eta)

    def g(y: np.ndarray) -> np.ndarray:
        full = np.zeros((y.shape[0], m))
        full[:, :d] = y
        return 1.0 / (t - f.evaluate_many(full))

    if d == 1:
        return PeriodEstimate(float(np.sum(g(np.array([[rho], [-rho]])))), 0.0, 2)

    s = rho / math.sqrt(d - 1)
    h = rho / 2
    log_norm = -0.5 * d * math.log(2 * math.pi * s * s)
    total = total_sq = 0.0
    n_shards = max(1, math.ceil(n_samples / shard_size))
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_shards)):
        n = min(shard_size, n_samples - i * shard_size)
        y = np.random.default_rng(child).standard_normal((n, d)) * s
        r = np.linalg.norm(y, axis=1)
        w = np.zeros(n)
        shell = np.abs(r - rho) < h
        ys, rs = y[shell], r[shell]
        log_p = log_norm - rs * rs / (2 * s * s)
        w[shell] = g(rho * ys / rs[:, None]) * (rho / rs) ** (d - 1) * np.exp(-log_p) / (2 * h)
        total += float(w.sum())
        total_sq += float(np.dot(w, w))
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / max(n_samples - 1, 1)
    return PeriodEstimate(mean, math.sqrt(var / n_samples), n_samples)


@dataclass(frozen=True)
class EtaScalingReport:
    etas: tuple[float, ...]
    periods: tuple[PeriodEstimate, ...]
    alpha: float
    alpha_stderr: float
    printed_exponent: float
    geometric_exponent: float

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.959963984540054 * self.alpha_stderr
        return self.alpha - half, self.alpha + half

    @property
    def ci_width(self) -> float:
        lo, hi = self.ci95
        return hi - lo

    def summary_lines(self) -> list[str]:
        lo, hi = self.ci95
        return [
            f"alpha = {self.alpha:.6f} (95% CI [{lo:.6f}, {hi:.6f}], width {self.ci_width:.6f})",
            f"printed exponent (n-lambda-1)/2 = {self.printed_exponent:g}: distance {abs(self.alpha - self.printed_exponent):.6f}",
            f"geometric exponent (n-lambda)/2 = {self.geometric_exponent:g}: distance {abs(self.alpha - self.geometric_exponent):.6f}",
        ]


def eta_scaling(m: int = 3, lam: int = 0, etas: Sequence[float] = (0.25, 0.5, 1.0, 2.0), gap: float = 1.0,
                n_samples: int = 1_000_000, seed: int = DEFAULT_SEED) -> EtaScalingReport:
    """Fit period ~ eta^alpha at fixed t - eta = gap by weighted least squares in log-log.

    Reports the fit next to both candidate exponents and asserts nothing.
    """
    seeds = np.random.SeedSequence(seed).generate_state(len(etas), dtype=np.uint64)
    periods = tuple(quadratic_period(m, lam, e, e + gap, n_samples, int(sd)) for e, sd in zip(etas, seeds))
    x = np.log(np.asarray(etas, dtype=float))
    y = np.log([p.value for p in periods])
    sig = np.array([p.std_error / p.value for p in periods])
    if np.any(sig == 0):
        sig = np.full_like(sig, 1e-16)
    wts = 1 / sig ** 2
    X = np.stack([x, np.ones_like(x)], axis=1)
    cov = np.linalg.inv(X.T @ (X * wts[:, None]))
    beta = cov @ (X.T @ (wts * y))
    n = m - 1
    return EtaScalingReport(tuple(float(e) for e in etas), periods, float(beta[0]), float(math.sqrt(cov[0, 0])),
                            (n - lam - 1) / 2, (n - lam) / 2)


# -- finite-difference annihilator test ------------------------------------------------


def central_weights(derivative: int, half_width: int) -> np.ndarray:
    """Weights of the (2 half_width + 1)-point central stencil for the given derivative (unit spacing)."""
    offsets = np.arange(-half_width, half_width + 1, dtype=float)
    n = offsets.size
    if derivative >= n:
        raise ValueError("stencil too narrow for this derivative")
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[derivative] = math.factorial(derivative)
    return np.linalg.solve(A, rhs)


def annihilator_residual(op: DifferentialOperator, u, t, eta: float, *, half_width: int = 4) -> float:
    """max over interior points of |op u| / max|u| with central finite differences.

    ``u`` is sampled on the uniform grid ``t`` (at least 2 half_width + 1 points).
    The default 9-point stencils are 8th-order accurate.
    """
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    if u.shape != t.shape or t.ndim != 1:
        raise ValueError("u and t must be 1-D arrays of equal length")
    if t.size < 2 * half_width + 1 or t.size < 9:
        raise ValueError(f"need at least {max(9, 2 * half_width + 1)} grid points")
    steps = np.diff(t)
    h = float(steps.mean())
    if not np.allclose(steps, h, rtol=1e-9, atol=0):
        raise ValueError("grid must be uniformly spaced")
    if np.any(np.abs(t - eta) < 2 * h):
        raise PoleProximity(f"grid point within {2 * h:g} of the pole at t = {eta}")
    interior = slice(half_width, t.size - half_width)
    derivs = {0: u[interior]}
    for j in range(1, op.order + 1):
        w = central_weights(j, half_width)
        derivs[j] = np.convolve(u, w[::-1], mode="valid") / h ** j
    scale = float(np.max(np.abs(u)))
    res = op.apply(t[interior], derivs)
    return float(np.max(np.abs(res)) / scale) if scale else float(np.max(np.abs(res)))


def default_t_grid(eta: float, n: int = 33, start: float = 0.5, stop: float = 4.5) -> np.ndarray:
    return np.linspace(eta + start, eta + stop, n)


def sampled_period(m: int, lam: int, eta: float, t_grid: Sequence[float], n_samples: int = 200_000,
                   seed: int = DEFAULT_SEED) -> np.ndarray:
    """Period estimates along a t grid with common random numbers (one seed for every t)."""
    return np.array([quadratic_period(m, lam, eta, float(t), n_samples, seed).value for t in t_grid])
