"""Milnor fibration data, fiber sampling and component counting.

Only H_0 is measured from samples (single-linkage clustering of a radius graph).
Top-degree ranks come from counting index-zero critical points of a
morsification, and from the closed table for ordinary quadratic singularities.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import NotIsolated
from .germ import PolynomialGerm
from .morse import Box, Morsification, critical_locations, find_critical_points, morse_vectors

ROOT_SEED = 20240611
PROJECTION_TOL = 1e-10
BAND_FRACTION = 0.1
TRANSVERSALITY_SIN = 0.05
ISOLATION_RADIUS = 1e-6
DELTA_CANDIDATES = tuple(2.0 ** -i for i in range(11))


class Sign(enum.IntEnum):
    POSITIVE = 1
    NEGATIVE = -1

    @classmethod
    def parse(cls, text: str) -> "Sign":
        key = text.strip().lower()
        if key in ("+", "positive", "pos", "+1", "1"):
            return cls.POSITIVE
        if key in ("-", "negative", "neg", "-1"):
            return cls.NEGATIVE
        raise ValueError(f"unknown sign {text!r}")


@dataclass(frozen=True)
class MilnorData:
    delta: float
    epsilon: float
    eta: float
    sign: Sign = Sign.POSITIVE

    def __post_init__(self):
        if self.delta <= 0 or self.epsilon <= 0:
            raise ValueError("delta and epsilon must be positive")
        if not (0 < self.eta <= self.epsilon):
            raise ValueError("need 0 < eta <= epsilon")

    @property
    def level(self) -> float:
        return int(self.sign) * self.eta


@dataclass(frozen=True)
class FiberSample:
    points: np.ndarray = field(repr=False)
    eta: float
    tolerance: float
    delta: float = math.inf
    sign: Sign = Sign.POSITIVE

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def level(self) -> float:
        return int(self.sign) * self.eta


@dataclass(frozen=True)
class BettiDatum:
    degree: int
    rank: int
    empty_fiber: bool = False

    def __post_init__(self):
        if self.rank < 0 or self.degree < 0:
            raise ValueError("degree and rank are non-negative")


def _ball_sample(rng: np.random.Generator, n: int, m: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((n, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / m)
    return g * r[:, None]


def _sphere_sample(rng: np.random.Generator, n: int, m: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((n, m))
    return radius * g / np.linalg.norm(g, axis=1, keepdims=True)


def _polish(f: PolynomialGerm, pts: np.ndarray, iters: int = 500) -> np.ndarray:
    # Plain Newton steps; slow (linear) convergence toward a degenerate point is allowed to finish.
    x = pts.copy()
    for _ in range(iters):
        g = f.gradient_many(x)
        if not np.any(g):
            break
        H = f.hessian_many(x)
        det = np.linalg.det(H)
        ok = np.isfinite(det) & (np.abs(det) > 1e-300)
        if not np.any(ok):
            break
        x[ok] -= np.linalg.solve(H[ok], g[ok][..., None])[..., 0]
    return x


def isolated_in_ball(f: PolynomialGerm, delta: float, grid_per_axis: int = 16) -> bool:
    """True iff the origin is a critical point of f and the only one in the open ball of radius delta."""
    origin = np.zeros((1, f.n_vars))
    if np.linalg.norm(f.gradient_many(origin)) > 0:
        return False
    box = Box.cube(f.n_vars, delta)
    pts, _ = critical_locations(f, box, grid_per_axis)
    if pts.shape[0] == 0:
        return True
    pts = pts[np.linalg.norm(pts, axis=1) < delta]
    polished = _polish(f, pts)
    return bool(np.all(np.linalg.norm(polished, axis=1) <= ISOLATION_RADIUS * delta))


def _transverse(f: PolynomialGerm, delta: float, epsilon: float, sign: Sign, rng: np.random.Generator,
                n_probe: int) -> bool:
    pts = _sphere_sample(rng, n_probe, f.n_vars, delta)
    vals = int(sign) * f.evaluate_many(pts)
    band = (vals > 0) & (vals <= epsilon)
    if not np.any(band):
        return True
    pts = pts[band]
    g = f.gradient_many(pts)
    gn = np.linalg.norm(g, axis=1)
    if np.any(gn == 0):
        return False
    cos = np.sum(g * pts, axis=1) / (gn * np.linalg.norm(pts, axis=1))
    sin = np.sqrt(np.clip(1 - cos ** 2, 0, 1))
    return bool(np.all(sin >= TRANSVERSALITY_SIN))


def choose_milnor_data(f: PolynomialGerm, sign: Sign = Sign.POSITIVE, *, seed: int = ROOT_SEED,
                       grid_per_axis: int = 16, n_probe: int = 4096) -> MilnorData:
    """Heuristic Milnor data (delta, epsilon, eta = epsilon / 2).

    delta is the largest of 1, 1/2, 1/4, ... for which 0 is the only critical
    point of f in the ball; epsilon = min(c * delta^2, 1) with c halved until
    the boundary sphere is transverse to every sampled level in the half-interval.
    """
    delta = next((d for d in DELTA_CANDIDATES if isolated_in_ball(f, d, grid_per_axis)), None)
    if delta is None:
        raise NotIsolated(f"no ball of radius >= {DELTA_CANDIDATES[-1]} isolates the origin as the only critical point")
    rng = np.random.default_rng(seed)
    c = 1.0
    for _ in range(40):
        epsilon = min(c * delta ** 2, 1.0)
        if _transverse(f, delta, epsilon, sign, rng, n_probe):
            return MilnorData(delta, epsilon, epsilon / 2, sign)
        c /= 2
    raise NotIsolated("could not find a half-interval transverse to the boundary sphere")


def _project(f: PolynomialGerm, pts: np.ndarray, level: float, tol: float, max_iter: int = 50):
    x = pts.copy()
    ok = np.ones(x.shape[0], dtype=bool)
    for _ in range(max_iter):
        r = f.evaluate_many(x) - level
        done = np.abs(r) <= tol
        if np.all(done | ~ok):
            break
        g = f.gradient_many(x)
        gg = np.sum(g * g, axis=1)
        step = ~done & ok
        ok &= ~(step & (gg == 0))
        step &= ok
        x[step] -= (r[step] / gg[step])[:, None] * g[step]
        ok &= np.all(np.isfinite(x), axis=1)
    r = f.evaluate_many(x) - level
    return x, ok & (np.abs(r) <= tol)


def sample_fiber(f: PolynomialGerm, md: MilnorData, n_points: int, *, seed: int = ROOT_SEED,
                 batch: int = 20000, max_draws: int | None = None) -> FiberSample:
    """Points of {f = sign * eta} inside the closed ball of radius delta.

    Uniform ball draws within 10% of the level are Newton-projected along grad f.
    Each batch has its own seed spawned from ``seed``. An empty sample means an
    empty fiber (or one too thin to hit within ``max_draws``).
    """
    level = md.level
    if max_draws is None:
        max_draws = max(200 * n_points, 200_000)
    children = np.random.SeedSequence(seed).spawn(max(1, math.ceil(max_draws / batch)))
    kept = []
    total = 0
    for child in children:
        if total >= n_points:
            break
        rng = np.random.default_rng(child)
        pts = _ball_sample(rng, batch, f.n_vars, md.delta)
        near = np.abs(f.evaluate_many(pts) - level) < BAND_FRACTION * md.eta
        if not np.any(near):
            continue
        proj, ok = _project(f, pts[near], level, PROJECTION_TOL)
        ok &= np.linalg.norm(proj, axis=1) <= md.delta
        if np.any(ok):
            kept.append(proj[ok])
            total += int(ok.sum())
    points = np.concatenate(kept)[:n_points] if kept else np.zeros((0, f.n_vars))
    return FiberSample(points, md.eta, PROJECTION_TOL, md.delta, md.sign)


def _scale(fs: FiberSample) -> float:
    if math.isfinite(fs.delta):
        return fs.delta
    return max(1.0, float(np.max(np.abs(fs.points)))) if len(fs) else 1.0


def _representatives(points: np.ndarray, quantum: float) -> np.ndarray:
    keys = np.round(points / quantum).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


def _components(points: np.ndarray, r: float) -> int:
    # Near-duplicates (closer than r / 10) are always linked at radius r; collapse them first.
    reps = _representatives(points, r / (10 * math.sqrt(points.shape[1])))
    n = reps.shape[0]
    pairs = cKDTree(reps).query_pairs(r, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    count, _ = connected_components(graph, directed=False)
    return int(count)


def default_link_radius(fs: FiberSample, span: float = 3.0) -> float:
    """Start at three times the median nearest-neighbour distance and grow by
    ``span`` until the component count agrees at r and span * r.

    The start is floored at 1e-6 of the sample scale so that 0-dimensional
    fibers (many projections onto a few points) are not split by rounding noise.
    """
    scale = _scale(fs)
    floor = 1e-6 * scale
    if len(fs) < 2:
        return floor
    d, _ = cKDTree(fs.points).query(fs.points, k=2)
    r = max(3.0 * float(np.median(d[:, 1])), floor)
    count = _components(fs.points, r)
    while r < 2 * scale:
        nxt = _components(fs.points, span * r)
        if nxt == count:
            return r
        r, count = span * r, nxt
    return r


def count_components(fs: FiberSample, link_radius: float | None = None) -> int:
    """Connected components of the link_radius-neighbour graph of the sample (0 for an empty fiber)."""
    if len(fs) == 0:
        return 0
    r = default_link_radius(fs) if link_radius is None else float(link_radius)
    if r <= 0:
        raise ValueError("link_radius must be positive")
    return _components(fs.points, r)


def component_plateau(fs: FiberSample, link_radius: float | None = None, span: float = 3.0,
                      steps: int = 5) -> list[tuple[float, int]]:
    """(radius, components) on a geometric ladder from link_radius to span * link_radius."""
    if len(fs) == 0:
        return []
    r0 = default_link_radius(fs) if link_radius is None else float(link_radius)
    return [(float(r), count_components(fs, r)) for r in np.geomspace(r0, span * r0, steps)]


def top_homology_rank(M: Morsification, s, box: Box | None = None, grid_per_axis: int = 32) -> int:
    """Number of Morse-index-zero critical points of f_s, the top-degree rank of the positive Milnor fiber of f."""
    box = box or Box.cube(M.base.n_vars, 2.0)
    _, lam0 = morse_vectors(find_critical_points(M.realize(s), box, grid_per_axis))
    return len(lam0)


def betti_quadratic(m: int, lam: int) -> BettiDatum:
    """Top Betti datum of the positive fiber of a quadratic form in m variables with lam negative squares.

    The fiber is empty when lam == m; that case returns rank 0 at degree 0 with
    ``empty_fiber`` set.
    """
    if m < 1 or not (0 <= lam <= m):
        raise ValueError(f"need 0 <= lambda <= m, got m={m}, lambda={lam}")
    if lam == m:
        return BettiDatum(0, 0, empty_fiber=True)
    return BettiDatum((m - 1) - lam, 1)


def fiber_csv(fs: FiberSample) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    m = fs.points.shape[1]
    writer.writerow([f"x{i + 1}" for i in range(m)])
    for p in fs.points:
        writer.writerow([repr(float(v)) for v in p])
    return buf.getvalue()
