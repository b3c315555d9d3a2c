"""Command-line front end.

Every run writes its artifacts as ``<command>-<timestamp>.<ext>`` in the
output directory together with a ``.manifest`` file holding the effective
configuration in the same ``key = value`` format that ``--config`` reads.
CSV bodies depend only on the configuration, never on the clock.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

from . import checks, crypto, fiber, gaussmanin
from .errors import DecryptionError, DomainError, GermParseError, MilnorError
from .germ import WeightVector, is_quasi_homogeneous, load_germ, to_expression
from .morse import Box, CriticalPoint, Morsification, critical_points_csv, find_critical_points, morse_vectors

COMMANDS = ("analyze", "morsify", "fiber", "gm-check", "eta-scaling", "crypto-demo", "cca-run")
DEFAULT_SEED = 20240611
DATA_DIR = Path(__file__).with_name("data")


@dataclass
class RunConfig:
    command: str
    germ: str | None = None
    seed: int = DEFAULT_SEED
    out: str = "."
    s: str = "1"
    box: str | None = None
    grid: int = 32
    quad: str | None = None
    linear: str | None = None
    samples: int | None = None
    eta: str | None = None
    t: str | None = None
    sign: str = "positive"
    components: bool = False
    link_radius: float | None = None
    catalog: str | None = None
    scheme: int = 1
    message: str | None = None
    attacker: str = "guess"
    trials: int = 1000
    workers: int = 1
    filter_positive_critical_value: bool = False

    def manifest(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if v is not None:
                lines.append(f"{k} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES[key]
    if "bool" in kind:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise GermParseError(f"config key {key}: expected a boolean, got {value!r}")
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys read as underscores."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise GermParseError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _FIELD_TYPES:
            raise GermParseError(f"config line {lineno}: expected 'key = value' with a known key, got {raw!r}")
        try:
            out[key] = _coerce(key, value.strip())
        except ValueError as exc:
            raise GermParseError(f"config line {lineno}: {exc}") from exc
    return out


# -- plotting ----------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2")
_SIZE = 400
_MARGIN = 40


def plot_critical_points(points: Sequence[CriticalPoint], box: Box) -> str:
    """SVG of the box (first two coordinates) with one marker per critical point, colored by Morse index."""
    lo, hi = box.lower, box.upper
    inner = _SIZE - 2 * _MARGIN

    def px(v, i):
        return _MARGIN + inner * (v - lo[i]) / (hi[i] - lo[i])

    def py(v, i):
        return _SIZE - _MARGIN - inner * (v - lo[i]) / (hi[i] - lo[i])

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE + 120}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE + 120} {_SIZE}">',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="black"/>',
        f'<text x="{_MARGIN}" y="{_SIZE - _MARGIN + 16}" font-size="11">x1 in [{lo[0]:g}, {hi[0]:g}]</text>',
    ]
    if box.dim >= 2:
        out.append(f'<text x="4" y="{_MARGIN - 8}" font-size="11">x2 in [{lo[1]:g}, {hi[1]:g}]</text>')
    if not points:
        out.append(f'<text x="{_SIZE / 2:.1f}" y="{_SIZE / 2:.1f}" font-size="14" text-anchor="middle">'
                   "no critical points</text>")
    for p in points:
        x = px(p.location[0], 0)
        y = py(p.location[1], 1) if box.dim >= 2 else _SIZE / 2
        color = _PALETTE[p.morse_index % len(_PALETTE)]
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="5" fill="{color}" class="index-{p.morse_index}"/>')
    indices = sorted({p.morse_index for p in points})
    for j, idx in enumerate(indices):
        y = _MARGIN + 10 + 18 * j
        out.append(f'<circle cx="{_SIZE + 10}" cy="{y}" r="5" fill="{_PALETTE[idx % len(_PALETTE)]}"/>')
        out.append(f'<text x="{_SIZE + 20}" y="{y + 4}" font-size="12">index {idx}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- helpers ----------------------------------------------------------------------


def _resolve_germ_path(name: str | None) -> Path:
    if not name:
        raise GermParseError("--germ is required for this command")
    path = Path(name)
    if path.exists():
        return path
    for cand in (DATA_DIR / name, DATA_DIR / f"{name}.germ"):
        if cand.exists():
            return cand
    raise GermParseError(f"germ file {name} not found")


def _coeffs(text: str | None, m: int, default) -> list:
    if text is None:
        return default
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != m:
        raise GermParseError(f"expected {m} coefficients, got {text!r}")
    return parts


def _morsification(cfg: RunConfig, germ) -> Morsification:
    m = germ.n_vars
    # Default family perturbs the first variable only: f + 2 s x1^2.
    quad = _coeffs(cfg.quad, m, [2] + [0] * (m - 1))
    lin = _coeffs(cfg.linear, m, [])
    return Morsification.of(germ, quad, lin)


def _box(cfg: RunConfig, m: int) -> Box:
    return Box.parse(cfg.box, m) if cfg.box else Box.cube(m, 2.0)


def _kv_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("key", "value"))
    w.writerows(rows)
    return buf.getvalue()


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise GermParseError(f"bad number list {text!r}") from exc


class _Artifacts:
    def __init__(self, cfg: RunConfig, stamp: str):
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.stem = f"{cfg.command}-{stamp}"
        self.written: list[Path] = []

    def write(self, ext: str, text: str) -> Path:
        path = self.dir / f"{self.stem}.{ext}"
        path.write_text(text)
        self.written.append(path)
        return path


# -- commands -----------------------------------------------------------------------


def _cmd_morsify(cfg, art, echo):
    germ, _ = load_germ(_resolve_germ_path(cfg.germ))
    M = _morsification(cfg, germ)
    box = _box(cfg, germ.n_vars)
    pts = find_critical_points(M.realize(cfg.s), box, cfg.grid)
    lam, lam0 = morse_vectors(pts)
    echo(f"f_s = {to_expression(M.realize(cfg.s))}   (s = {cfg.s})")
    echo(f"{'location':<32} {'value':>14} index")
    for p in pts:
        loc = "(" + ", ".join(f"{v:.6g}" for v in p.location) + ")"
        echo(f"{loc:<32} {p.value:>14.6g} {p.morse_index}")
    echo(f"lambda_s = {lam}   lambda_0,s = {lam0}")
    art.write("csv", critical_points_csv(pts, germ.n_vars))
    art.write("svg", plot_critical_points(pts, box))


def _milnor_and_sample(cfg, germ, sign):
    md = fiber.choose_milnor_data(germ, sign, seed=cfg.seed)
    if cfg.eta is not None:
        eta = float(cfg.eta)
        if not (0 < eta <= md.epsilon):
            raise DomainError(f"eta must lie in (0, {md.epsilon:g}]")
        md = fiber.MilnorData(md.delta, md.epsilon, eta, sign)
    fs = fiber.sample_fiber(germ, md, cfg.samples or 10_000, seed=cfg.seed)
    return md, fs


def _cmd_fiber(cfg, art, echo):
    germ, _ = load_germ(_resolve_germ_path(cfg.germ))
    sign = fiber.Sign.parse(cfg.sign)
    md, fs = _milnor_and_sample(cfg, germ, sign)
    echo(f"delta = {md.delta:g}, epsilon = {md.epsilon:g}, eta = {md.eta:g}, sign = {sign.name.lower()}")
    echo(f"points: {len(fs)}")
    if cfg.components:
        r = cfg.link_radius if cfg.link_radius is not None else (fiber.default_link_radius(fs) if len(fs) else None)
        echo(f"components: {fiber.count_components(fs, r)}")
        if len(fs):
            echo("plateau: " + ", ".join(f"r={rr:.3g}:{c}" for rr, c in fiber.component_plateau(fs, r)))
    art.write("csv", fiber.fiber_csv(fs))


def _cmd_analyze(cfg, art, echo):
    germ, weights = load_germ(_resolve_germ_path(cfg.germ))
    rows = [("expression", to_expression(germ)), ("n_vars", germ.n_vars)]
    if weights is not None:
        rows += [("weights", str(weights)), ("quasi_homogeneous", is_quasi_homogeneous(germ, weights))]
    for sign in (fiber.Sign.POSITIVE, fiber.Sign.NEGATIVE):
        md, fs = _milnor_and_sample(cfg, germ, sign)
        tag = sign.name.lower()
        rows += [(f"{tag}.delta", repr(md.delta)), (f"{tag}.epsilon", repr(md.epsilon)),
                 (f"{tag}.eta", repr(md.eta)), (f"{tag}.points", len(fs)),
                 (f"{tag}.components", fiber.count_components(fs))]
    M = _morsification(cfg, germ)
    box = _box(cfg, germ.n_vars)
    pts = find_critical_points(M.realize(cfg.s), box, cfg.grid)
    lam, lam0 = morse_vectors(pts)
    rows += [("s", cfg.s), ("lambda_s", str(lam)), ("lambda_0_s", str(lam0)),
             ("top_homology_rank", len(lam0))]
    for k, v in rows:
        echo(f"{k}: {v}")
    art.write("csv", _kv_csv(rows))


def _cmd_gm_check(cfg, art, echo):
    n = cfg.samples or 1_000_000
    eta = float(cfg.eta) if cfg.eta is not None else 1.0
    rows = checks.hypergeometric_rows(cfg.seed) + checks.xk_rows()
    if cfg.t is not None:
        for t in _floats(cfg.t):
            est = gaussmanin.quadratic_period(3, 0, eta, t, n, cfg.seed)
            rows.append(checks.CheckRow(f"quadratic(m=3,lambda=0,eta={eta:g},t={t:g})", "period", est.value,
                                        gaussmanin.closed_form_u(3, 0, eta, t), "sigma", 3.0,
                                        asserted=eta == 1.0, std_error=est.std_error))
    else:
        rows += checks.period_rows(n, cfg.seed)
    rows += checks.annihilator_rows(eta, min(n, 200_000), cfg.seed)
    rows += checks.eta_rows(gaussmanin.eta_scaling(n_samples=n, seed=cfg.seed))
    lines = checks.verdict_lines(rows)
    for line in lines:
        echo(line)
    art.write("csv", checks.rows_csv(rows))
    art.write("txt", "\n".join(lines) + "\n")
    return 0 if all(r.passed for r in rows if r.asserted) else 1


def _cmd_eta_scaling(cfg, art, echo):
    etas = tuple(_floats(cfg.eta)) if cfg.eta is not None else (0.25, 0.5, 1.0, 2.0)
    gap = float(cfg.t) if cfg.t is not None else 1.0
    rep = gaussmanin.eta_scaling(etas=etas, gap=gap, n_samples=cfg.samples or 1_000_000, seed=cfg.seed)
    lines = [f"fit of period ~ eta^alpha at t - eta = {gap:g}, m = 3, lambda = 0"] + rep.summary_lines()
    for line in lines:
        echo(line)
    art.write("csv", checks.eta_scaling_csv(rep))
    art.write("txt", "\n".join(lines) + "\n")


def _catalog(cfg):
    return crypto.load_catalog(cfg.catalog)


def _cmd_crypto_demo(cfg, art, echo):
    cat = _catalog(cfg)
    messages = [WeightVector.parse(cfg.message)] if cfg.message else list(cat.messages)
    rows = []
    for m in messages:
        demo = crypto.demo(cat, cfg.scheme, m, cfg.seed,
                           filter_positive_critical_value=cfg.filter_positive_critical_value)
        for k, v in demo:
            echo(f"{k}: {v}")
        echo("")
        rows += [(f"[{m}].{k}", v) for k, v in demo]
    art.write("csv", _kv_csv(rows))
    failed = [v for k, v in rows if k.endswith(".decrypted") and v.startswith("error")]
    if failed:
        print(f"error: DecryptionError: {failed[0][len('error: '):]}", file=sys.stderr)
        return DecryptionError.exit_code


def _cmd_cca_run(cfg, art, echo):
    cat = _catalog(cfg)
    if cfg.attacker not in crypto.ATTACKERS:
        raise GermParseError(f"unknown attacker {cfg.attacker!r}; choose from {sorted(crypto.ATTACKERS)}")
    rep = crypto.cca_experiment(cfg.attacker, cfg.scheme, cat, cfg.trials, cfg.seed, workers=cfg.workers)
    lines = rep.summary_lines()
    for line in lines:
        echo(line)
    art.write("csv", _kv_csv([(line.split(": ", 1)[0], line.split(": ", 1)[1]) for line in lines]))
    art.write("txt", "\n".join(lines) + "\n")
    art.write("log", "\n".join(rep.transcript) + ("\n" if rep.transcript else ""))


_HANDLERS = {
    "analyze": _cmd_analyze,
    "morsify": _cmd_morsify,
    "fiber": _cmd_fiber,
    "gm-check": _cmd_gm_check,
    "eta-scaling": _cmd_eta_scaling,
    "crypto-demo": _cmd_crypto_demo,
    "cca-run": _cmd_cca_run,
}


def run(cfg: RunConfig, *, stamp: str | None = None, echo=print) -> int:
    """Execute one command; returns the exit status. Module errors map to their exit codes."""
    stamp = stamp or _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    try:
        art = _Artifacts(cfg, stamp)
        art.write("manifest", cfg.manifest())
        status = _HANDLERS[cfg.command](cfg, art, echo)
    except MilnorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return status or 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="milnor", description="Milnor fibers, Morse data and Gauss-Manin checks.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="file of 'key = value' lines; flags override it")
    p.add_argument("--germ", help="germ file (or the name of a shipped germ)")
    p.add_argument("--s", help="morsification parameter (exact rational or decimal)")
    p.add_argument("--box", help="'lo,hi' for every axis or 'lo,hi;lo,hi;...'")
    p.add_argument("--grid", type=int, help="Newton seeds per axis")
    p.add_argument("--quad", help="morsification quadratic coefficients q_i")
    p.add_argument("--linear", help="morsification linear coefficients l_i")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, help="fiber points or Monte Carlo draws")
    p.add_argument("--eta", help="regular value (fiber), or eta list (eta-scaling)")
    p.add_argument("--t", help="t values (gm-check) or the gap t - eta (eta-scaling)")
    p.add_argument("--sign", help="positive or negative fiber")
    p.add_argument("--components", action="store_const", const=True, help="count fiber components")
    p.add_argument("--link-radius", type=float)
    p.add_argument("--catalog", help="catalog file (default: the shipped catalog)")
    p.add_argument("--scheme", type=int, choices=(1, 2))
    p.add_argument("--message", help="weight vector, e.g. 1/4,1/2")
    p.add_argument("--attacker", help="guess, reencrypt or oracle")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--filter-positive-critical-value", action="store_const", const=True)
    p.add_argument("--out", help="output directory")
    return p


def config_from_args(argv: Sequence[str] | None = None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    merged = read_config(args.pop("config")) if args.get("config") else {}
    merged.pop("command", None)
    merged.update({k: v for k, v in args.items() if v is not None})
    return RunConfig(**merged)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = config_from_args(argv)
    except MilnorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
