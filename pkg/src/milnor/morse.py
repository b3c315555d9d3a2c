"""Morsifications, critical point search and Morse indices.

Critical points of f_s are located by seeding Newton's method for
grad f_s = 0 on a dense axis-aligned grid. The Jacobian of the gradient is the
exact Hessian, so quadratic convergence is the norm near non-degenerate points.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DegenerateCritical, DimensionMismatch, GermParseError
from .germ import PolynomialGerm, as_fraction

GRAD_TOL = 1e-10
DEDUP_RADIUS = 1e-6
DEGENERACY_TOL = 1e-8
MAX_NEWTON_ITER = 50
MIN_GRID = 8

# Newton iterates farther than this (in box diameters) from the box are abandoned.
_ESCAPE_FACTOR = 1e3
_SNAP = 1e-13


@dataclass(frozen=True)
class Morsification:
    """The family f_s = f + s * sum_i q_i x_i^2 + s * sum_i l_i x_i."""

    base: PolynomialGerm
    quadratic_coeffs: tuple[Fraction, ...]
    linear_coeffs: tuple[Fraction, ...] = ()

    def __post_init__(self):
        m = self.base.n_vars
        quad = tuple(as_fraction(c) for c in self.quadratic_coeffs)
        lin = tuple(as_fraction(c) for c in self.linear_coeffs) or (Fraction(0),) * m
        if len(quad) != m or len(lin) != m:
            raise DimensionMismatch(f"morsification coefficients must have length {m}")
        object.__setattr__(self, "quadratic_coeffs", quad)
        object.__setattr__(self, "linear_coeffs", lin)

    @classmethod
    def of(cls, base: PolynomialGerm, quadratic=None, linear=None) -> "Morsification":
        m = base.n_vars
        return cls(base, tuple(quadratic if quadratic is not None else [0] * m), tuple(linear or ()))

    def perturbation(self, s) -> PolynomialGerm | None:
        s = as_fraction(s)
        m = self.base.n_vars
        terms = {}
        for i in range(m):
            if self.quadratic_coeffs[i]:
                e = [0] * m
                e[i] = 2
                terms[tuple(e)] = s * self.quadratic_coeffs[i]
            if self.linear_coeffs[i]:
                e = [0] * m
                e[i] = 1
                terms[tuple(e)] = s * self.linear_coeffs[i]
        germ = PolynomialGerm.from_terms(m, terms)
        return germ if germ.terms else None

    def realize(self, s) -> PolynomialGerm:
        pert = self.perturbation(s)
        return self.base if pert is None else self.base + pert


def realize(M: Morsification, s) -> PolynomialGerm:
    return M.realize(s)


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("box bounds must have equal, positive length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box must be non-empty on every axis")

    @classmethod
    def cube(cls, m: int, half_width: float = 2.0, center: float = 0.0) -> "Box":
        return cls((center - half_width,) * m, (center + half_width,) * m)

    @classmethod
    def parse(cls, text: str, m: int) -> "Box":
        """``lo,hi`` for every axis, or ``lo,hi;lo,hi;...`` per axis."""
        try:
            axes = [tuple(float(v) for v in part.split(",")) for part in text.split(";") if part.strip()]
        except ValueError as exc:
            raise GermParseError(f"malformed box {text!r}") from exc
        if any(len(a) != 2 for a in axes):
            raise GermParseError(f"malformed box {text!r}")
        if len(axes) == 1:
            axes = axes * m
        if len(axes) != m:
            raise GermParseError(f"box {text!r} does not have {m} axes")
        try:
            return cls(tuple(a[0] for a in axes), tuple(a[1] for a in axes))
        except ValueError as exc:
            raise GermParseError(str(exc)) from exc

    @property
    def dim(self) -> int:
        return len(self.lower)

    def scaled(self, factor: float) -> "Box":
        """Scale each axis about its midpoint."""
        lo, hi = np.array(self.lower), np.array(self.upper)
        mid, half = (lo + hi) / 2, (hi - lo) / 2 * factor
        return Box(tuple(mid - half), tuple(mid + half))

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        lo, hi = np.array(self.lower), np.array(self.upper)
        return np.all((points >= lo - slack) & (points <= hi + slack), axis=-1)

    def grid(self, per_axis: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def __str__(self) -> str:
        return ";".join(f"{lo:g},{hi:g}" for lo, hi in zip(self.lower, self.upper))


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple[float, ...]
    value: float
    hessian_eigenvalues: tuple[float, ...]
    morse_index: int
    grad_norm: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class MorseVector:
    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(sorted(int(i) for i in self.indices)))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __str__(self) -> str:
        return "(" + ",".join(str(i) for i in self.indices) + ")"


def newton_solve(f: PolynomialGerm, seeds: np.ndarray, *, max_iter: int = MAX_NEWTON_ITER,
                 grad_tol: float = GRAD_TOL, escape_radius: float = np.inf):
    """Run Newton's method on grad f = 0 from every seed at once.

    Returns ``(points, grad_norms, converged)``. Seeds whose iteration hits a
    singular Hessian, leaves ``escape_radius`` or runs out of iterations are
    marked unconverged.
    """
    x = np.array(seeds, dtype=float, copy=True)
    n = x.shape[0]
    gnorm = np.full(n, np.inf)
    converged = np.zeros(n, dtype=bool)
    alive = np.ones(n, dtype=bool)
    for it in range(max_iter + 1):
        idx = np.flatnonzero(alive & ~converged)
        if idx.size == 0:
            break
        pts = x[idx]
        g = f.gradient_many(pts)
        gn = np.linalg.norm(g, axis=1)
        gnorm[idx] = gn
        done = gn <= grad_tol
        converged[idx[done]] = True
        todo = idx[~done]
        if todo.size == 0:
            break
        if it == max_iter:
            break
        H = f.hessian_many(x[todo])
        g = g[~done]
        det = np.linalg.det(H)
        scale = np.max(np.abs(H), axis=(1, 2)) ** H.shape[1]
        singular = ~np.isfinite(det) | (np.abs(det) <= 1e-14 * np.maximum(scale, 1e-300))
        H[singular] = np.eye(H.shape[1])
        step = np.linalg.solve(H, g[..., None])[..., 0]
        x[todo] -= step
        bad = singular | ~np.all(np.isfinite(x[todo]), axis=1) | (np.linalg.norm(x[todo], axis=1) > escape_radius)
        alive[todo[bad]] = False
    return x, gnorm, converged & alive


def _dedup(points: np.ndarray, gnorms: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Greedy merge of points closer than ``radius``; the smaller gradient wins."""
    order = np.argsort(gnorms, kind="stable")
    pts, gn = points[order], gnorms[order]
    kept_p, kept_g = [], []
    while pts.shape[0]:
        p = pts[0]
        kept_p.append(p)
        kept_g.append(gn[0])
        far = np.linalg.norm(pts - p, axis=1) > radius
        pts, gn = pts[far], gn[far]
    if not kept_p:
        return np.zeros((0, points.shape[1])), np.zeros(0)
    return np.array(kept_p), np.array(kept_g)


def critical_locations(f: PolynomialGerm, box: Box, grid_per_axis: int = 32, *,
                       grad_tol: float = GRAD_TOL, dedup_radius: float = DEDUP_RADIUS,
                       max_iter: int = MAX_NEWTON_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Deduplicated Newton limits inside ``box``, without any Morse check."""
    if box.dim != f.n_vars:
        raise DimensionMismatch(f"box has {box.dim} axes, germ has {f.n_vars} variables")
    if grid_per_axis < MIN_GRID:
        raise ValueError(f"grid_per_axis must be at least {MIN_GRID}")
    seeds = box.grid(grid_per_axis)
    origin = np.zeros((1, f.n_vars))
    if box.contains(origin)[0]:
        seeds = np.vstack([origin, seeds])
    diam = float(np.linalg.norm(np.subtract(box.upper, box.lower)))
    reach = float(np.max(np.abs(np.concatenate([box.lower, box.upper]))))
    slack = 1e-12 * diam

    def solve(s):
        x, gn, ok = newton_solve(f, s, max_iter=max_iter, grad_tol=grad_tol,
                                 escape_radius=reach + _ESCAPE_FACTOR * diam)
        ok &= box.contains(x, slack)
        return x[ok], gn[ok]

    x, gn = solve(seeds)
    pts, gns = _dedup(x, gn, dedup_radius)
    if pts.shape[0]:
        # Critical points closer together than the grid spacing can share one
        # basin-free gap; reseed a finer local grid around every point found.
        spacing = (np.subtract(box.upper, box.lower)) / (grid_per_axis - 1)
        per = 5 if f.n_vars <= 3 else 3
        offsets = np.stack(np.meshgrid(*[np.linspace(-1, 1, per)] * f.n_vars, indexing="ij"), -1)
        offsets = offsets.reshape(-1, f.n_vars) * spacing
        local = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, f.n_vars)
        x2, gn2 = solve(local[box.contains(local)])
        pts, gns = _dedup(np.vstack([pts, x2]), np.concatenate([gns, gn2]), dedup_radius)
    if pts.size:
        snapped = np.where(np.abs(pts) < _SNAP, 0.0, pts)
        gs = np.linalg.norm(f.gradient_many(snapped), axis=1)
        use = gs <= grad_tol
        pts[use] = snapped[use]
        gns[use] = gs[use]
    return pts, gns


def _newton_steps(hess: np.ndarray, grads: np.ndarray) -> np.ndarray:
    out = np.full(grads.shape, np.inf)
    ok = np.abs(np.linalg.det(hess)) > 0
    if np.any(ok):
        out[ok] = np.linalg.solve(hess[ok], grads[ok][..., None])[..., 0]
    return out


def _degeneracy_threshold(eigs: np.ndarray, tol: float) -> float:
    return tol * max(1.0, float(np.max(np.abs(eigs)))) if eigs.size else tol


def morse_index(H, degeneracy_tol: float = DEGENERACY_TOL) -> int:
    """Number of negative Hessian eigenvalues.

    Raises DegenerateCritical if any eigenvalue has absolute value within
    ``degeneracy_tol * max(1, max|eigenvalue|)`` of zero.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatch("Hessian must be a square matrix")
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(H))))):
        raise ValueError("Hessian must be symmetric")
    eigs = np.linalg.eigvalsh(H)
    thr = _degeneracy_threshold(eigs, degeneracy_tol)
    if np.any(np.abs(eigs) <= thr):
        raise DegenerateCritical(f"degenerate Hessian, eigenvalues {eigs.tolist()}", eigenvalues=tuple(eigs))
    return int(np.sum(eigs < -thr))


def find_critical_points(f_s: PolynomialGerm, box: Box, grid_per_axis: int = 32, *,
                         degeneracy_tol: float = DEGENERACY_TOL, grad_tol: float = GRAD_TOL,
                         dedup_radius: float = DEDUP_RADIUS) -> list[CriticalPoint]:
    """All non-degenerate critical points of ``f_s`` in ``box``, sorted by location."""
    pts, gns = critical_locations(f_s, box, grid_per_axis, grad_tol=grad_tol, dedup_radius=dedup_radius)
    if pts.shape[0] == 0:
        return []
    values = f_s.evaluate_many(pts)
    hess = f_s.hessian_many(pts)
    eigs = np.linalg.eigvalsh(hess)
    # Near a degenerate point Newton only converges linearly, so the gradient test
    # passes while the next step is still about as long as the distance to the point.
    steps = np.linalg.norm(_newton_steps(hess, f_s.gradient_many(pts)), axis=1)
    out = []
    for p, v, ev, gn, st in zip(pts, values, eigs, gns, steps):
        thr = _degeneracy_threshold(ev, degeneracy_tol)
        if np.any(np.abs(ev) <= thr) or st > dedup_radius:
            raise DegenerateCritical(
                f"f_s is not Morse at {tuple(p.tolist())}: eigenvalues {ev.tolist()}",
                location=tuple(p.tolist()), eigenvalues=tuple(ev.tolist()),
            )
        out.append(CriticalPoint(tuple(p.tolist()), float(v), tuple(ev.tolist()), int(np.sum(ev < -thr)), float(gn)))
    out.sort(key=lambda c: c.location)
    return out


def morse_vectors(points: Sequence[CriticalPoint]) -> tuple[MorseVector, MorseVector]:
    """(all indices, index-zero indices) as sorted multisets."""
    lam = MorseVector(tuple(p.morse_index for p in points))
    return lam, MorseVector(tuple(i for i in lam.indices if i == 0))


def euler_sum(points: Sequence[CriticalPoint]) -> int:
    """sum over critical points of (-1)^index."""
    return sum((-1) ** p.morse_index for p in points)


def critical_points_csv(points: Sequence[CriticalPoint], n_vars: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(n_vars)] + ["value", "index"] + [f"eig{i + 1}" for i in range(n_vars)])
    for p in points:
        writer.writerow([repr(float(c)) for c in p.location] + [repr(p.value), p.morse_index]
                        + [repr(float(e)) for e in p.hessian_eigenvalues])
    return buf.getvalue()
