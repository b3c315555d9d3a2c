"""Numerical check sweep for the Gauss-Manin side, as report rows.

Each row compares one computed quantity with an independent reference and
records the metric it is judged by. Rows with ``asserted=False`` are
diagnostics: they are reported with a verdict but never gate success.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import gaussmanin as gm

DEFAULT_SEED = gm.DEFAULT_SEED
LOG_Z = tuple(round(0.1 * i, 1) for i in range(1, 10))
XK_SAMPLES = ((0.2, 1.0), (0.35, 1.25), (0.5, 1.5), (0.65, 1.75), (0.8, 2.0))
PERIOD_T = (1.5, 2.0, 4.0)

COLUMNS = ("case", "quantity", "computed", "reference", "abs_err", "rel_err", "sigma",
           "metric", "comparator", "threshold", "asserted", "passed")


@dataclass(frozen=True)
class CheckRow:
    case: str
    quantity: str
    computed: float
    reference: float
    metric: str = "rel_err"
    threshold: float = 1e-10
    comparator: str = "<="
    asserted: bool = True
    std_error: float = math.nan

    @property
    def abs_err(self) -> float:
        return abs(self.computed - self.reference)

    @property
    def rel_err(self) -> float:
        return self.abs_err / abs(self.reference) if self.reference else self.abs_err

    @property
    def sigma(self) -> float:
        if math.isnan(self.std_error):
            return math.nan
        return self.abs_err / self.std_error if self.std_error > 0 else (0.0 if self.abs_err == 0 else math.inf)

    @property
    def measured(self) -> float:
        return {"rel_err": self.rel_err, "abs_err": self.abs_err, "sigma": self.sigma,
                "value": self.computed}[self.metric]

    @property
    def passed(self) -> bool:
        v = self.measured
        return v <= self.threshold if self.comparator == "<=" else v >= self.threshold


def _fmt(v: float) -> str:
    return "" if isinstance(v, float) and math.isnan(v) else f"{v:.12g}"


def rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r.case, r.quantity, _fmt(r.computed), _fmt(r.reference), _fmt(r.abs_err), _fmt(r.rel_err),
                    _fmt(r.sigma), r.metric, r.comparator, _fmt(r.threshold), int(r.asserted), int(r.passed)])
    return buf.getvalue()


def hypergeometric_rows(seed: int = DEFAULT_SEED, n_random: int = 20) -> list[CheckRow]:
    rows = []
    p = gm.HypergeometricParams(1, 1, 2)
    for z in LOG_Z:
        rows.append(CheckRow(f"2F1(1,1;2,{z})", "log_identity", gm.hyp2f1(p, z), -math.log1p(-z) / z))
    rng = np.random.default_rng(seed)
    for i in range(n_random):
        a, b = rng.uniform(-3, 3, 2)
        c = rng.uniform(0.5, 4)
        z = rng.uniform(0.05, 0.9)
        q = gm.HypergeometricParams(float(a), float(b), float(c))
        tag = f"gauss#{i}(a={a:.4f},b={b:.4f},c={c:.4f},z={z:.4f})"
        rows.append(CheckRow(tag, "gauss_residual", gm.gauss_equation_residual(q, z), 0.0, "abs_err", 1e-8))
        rows.append(CheckRow(tag, "gauss_residual_printed_sign",
                             gm.gauss_equation_residual(q, z, printed_sign=True), 0.0, "abs_err", 1e-8,
                             asserted=False))
    return rows


def xk_rows() -> list[CheckRow]:
    """Residual of the printed x^k operator, and of the first-order control operator, on the series solution."""
    rows = []
    for k in (2, 3, 4):
        for x, t in XK_SAMPLES:
            tag = f"x^{k}(x={x},t={t})"
            rows.append(CheckRow(tag, "xk_operator_residual", gm.xk_operator_residual(k, x, t), 0.0,
                                 "abs_err", 1e-8))
            rows.append(CheckRow(tag, "xk_control_residual", gm.xk_first_order_residual(k, x, t), 0.0,
                                 "abs_err", 1e-8))
    return rows


def period_rows(n_samples: int = 1_000_000, seed: int = DEFAULT_SEED) -> list[CheckRow]:
    rows = []
    for t in PERIOD_T:
        est = gm.quadratic_period(3, 0, 1.0, t, n_samples, seed)
        rows.append(CheckRow(f"quadratic(m=3,lambda=0,eta=1,t={t})", "period", est.value,
                             4 * math.pi / (t - 1), "sigma", 3.0, std_error=est.std_error))
    est = gm.quadratic_period(2, 1, 1.0, 2.0, n_samples, seed)
    rows.append(CheckRow("quadratic(m=2,lambda=1,eta=1,t=2)", "period_0sphere", est.value,
                         gm.closed_form_u(2, 1, 1.0, 2.0), "rel_err", 1e-12))
    return rows


def annihilator_rows(eta: float = 1.0, n_samples: int = 200_000, seed: int = DEFAULT_SEED) -> list[CheckRow]:
    """Finite-difference residuals of candidate operators on sampled periods.

    The D_t row is the check that the period is constant in t; its verdict is
    reported, and the assertion is that D_t does not annihilate the samples.
    """
    t = gm.default_t_grid(eta)
    u = gm.sampled_period(3, 0, eta, t, n_samples, seed)
    pole = gm.annihilator_residual(gm.pole_operator(eta), u, t, eta)
    dt = gm.annihilator_residual(gm.d_t(), u, t, eta)
    return [
        CheckRow(f"quadratic(m=3,eta={eta:g})", "residual[(t-eta)D_t+1]", pole, 0.0, "abs_err", 1e-3),
        CheckRow(f"quadratic(m=3,eta={eta:g})", "residual[D_t]", dt, 0.0, "value", 1e-2, ">="),
    ]


def eta_rows(report: gm.EtaScalingReport) -> list[CheckRow]:
    return [
        CheckRow("eta_scaling", "alpha_ci95_width", report.ci_width, 0.0, "value", 0.05),
        CheckRow("eta_scaling", "alpha_vs_printed", report.alpha, report.printed_exponent, "abs_err", 0.05,
                 asserted=False, std_error=report.alpha_stderr),
        CheckRow("eta_scaling", "alpha_vs_geometric", report.alpha, report.geometric_exponent, "abs_err", 0.05,
                 asserted=False, std_error=report.alpha_stderr),
    ]


def gm_check(n_samples: int = 1_000_000, seed: int = DEFAULT_SEED, eta: float = 1.0) -> list[CheckRow]:
    """The full sweep."""
    rows = hypergeometric_rows(seed) + xk_rows() + period_rows(n_samples, seed)
    rows += annihilator_rows(eta, min(n_samples, 200_000), seed)
    rows += eta_rows(gm.eta_scaling(n_samples=n_samples, seed=seed))
    return rows


def verdict_lines(rows) -> list[str]:
    asserted = [r for r in rows if r.asserted]
    failed = [r for r in asserted if not r.passed]
    lines = [f"rows: {len(rows)}", f"asserted: {len(asserted)}", f"asserted passing: {len(asserted) - len(failed)}"]
    by_quantity: dict[str, list[CheckRow]] = {}
    for r in failed:
        by_quantity.setdefault(r.quantity, []).append(r)
    for q, rs in sorted(by_quantity.items()):
        worst = max(rs, key=lambda r: r.measured)
        lines.append(f"FAILED {q}: {len(rs)} rows, worst {worst.metric} {worst.measured:.3g} "
                     f"(threshold {worst.comparator} {worst.threshold:g})")
    for r in rows:
        if r.quantity == "residual[D_t]":
            verdict = "not constant in t" if r.passed else "consistent with constant"
            lines.append(f"D_t annihilation (period constant in t): residual {r.computed:.3g}, {verdict}")
        if r.quantity == "residual[(t-eta)D_t+1]":
            lines.append(f"(t-eta)D_t+1 annihilation: residual {r.computed:.3g}, "
                         + ("annihilates" if r.passed else "does not annihilate"))
    return lines


def eta_scaling_csv(report: gm.EtaScalingReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("eta", "period", "stderr"))
    for e, p in zip(report.etas, report.periods):
        w.writerow((repr(e), repr(p.value), repr(p.std_error)))
    return buf.getvalue()
