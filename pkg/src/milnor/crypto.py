"""Morse-vector encryption over a catalog of quasi-homogeneous germs, and a
chosen-ciphertext game harness.

A message is the weight vector of a catalog germ f. The public key is a
morsification parameter s, the secret key the Morse vector of f_s. The
receiver recovers f from the count k = |sk| - |c| by catalog lookup.

Two constructions are provided. Construction 1 sends the locations of the
index-zero critical points of f_s, construction 2 only their index vector.
Encryption is deterministic given pk, so nothing here is secure; the game
harness measures attacker advantage rather than asserting anything.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (CatalogError, DecryptionError, DegenerateCritical, GermParseError, ProtocolViolation,
                     UnknownMessage)
from .germ import PolynomialGerm, WeightVector, as_fraction, is_quasi_homogeneous, load_germ
from .morse import Box, Morsification, MorseVector, find_critical_points, morse_vectors

DEFAULT_SEED = 20240611
MAX_KEYGEN_ATTEMPTS = 64
SHIPPED_CATALOG = Path(__file__).with_name("data") / "catalog.txt"


@dataclass(frozen=True)
class CatalogEntry:
    message: WeightVector
    germ: PolynomialGerm
    morsification: Morsification
    rank_k: int
    s0: float = 1.0
    box: Box | None = None
    grid_per_axis: int = 16

    def __post_init__(self):
        if self.s0 <= 0:
            raise CatalogError("s0 must be positive")
        if self.rank_k < 0:
            raise CatalogError("rank_k must be non-negative")
        if self.box is None:
            object.__setattr__(self, "box", Box.cube(self.germ.n_vars, 2.0))

    def critical_points(self, s):
        return find_critical_points(self.morsification.realize(s), self.box, self.grid_per_axis)

    def morse_data(self, s) -> tuple[MorseVector, MorseVector]:
        return morse_vectors(self.critical_points(s))

    def admissible(self, s) -> bool:
        """f_s is Morse on the box and |lambda_s| - |lambda_{0,s}| recovers rank_k."""
        try:
            lam, lam0 = self.morse_data(s)
        except DegenerateCritical:
            return False
        return len(lam) - len(lam0) == self.rank_k


@dataclass(frozen=True)
class GermCatalog:
    entries: tuple[CatalogEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise CatalogError("empty catalog")
        ranks = [e.rank_k for e in entries]
        if len(set(ranks)) != len(ranks):
            raise CatalogError(f"rank_k values must be pairwise distinct, got {ranks}")
        messages = [e.message for e in entries]
        if len(set(messages)) != len(messages):
            raise CatalogError("messages must be pairwise distinct")
        for e in entries:
            if not is_quasi_homogeneous(e.germ, e.message):
                raise CatalogError(f"germ is not quasi-homogeneous with weights ({e.message})")

    def validate(self) -> None:
        """Check every stored rank_k against |lambda_s| - |lambda_{0,s}| at s = s0."""
        for e in self.entries:
            try:
                lam, lam0 = e.morse_data(e.s0)
            except DegenerateCritical as exc:
                raise CatalogError(f"entry ({e.message}): f_s0 is not Morse: {exc}") from exc
            k = len(lam) - len(lam0)
            if k != e.rank_k:
                raise CatalogError(f"entry ({e.message}): stored rank_k={e.rank_k} but f_s0 gives {k}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def messages(self) -> tuple[WeightVector, ...]:
        return tuple(e.message for e in self.entries)

    def entry_for(self, m: WeightVector) -> CatalogEntry:
        for e in self.entries:
            if e.message == m:
                return e
        raise UnknownMessage(f"message ({m}) is not in the catalog")

    def lookup_rank(self, k: int) -> WeightVector:
        """The map phi: rank -> message."""
        for e in self.entries:
            if e.rank_k == k:
                return e.message
        raise DecryptionError(f"no catalog message has rank {k}")

    def encode(self, m: WeightVector) -> bytes:
        """Fixed-width big-endian catalog index, so all messages share one encoded length."""
        width = max(1, math.ceil(math.log2(len(self.entries)) / 8)) if len(self.entries) > 1 else 1
        idx = self.messages.index(self.entry_for(m).message)
        return idx.to_bytes(width, "big")


def _parse_coeffs(text: str, m: int, what: str) -> tuple[Fraction, ...]:
    parts = [p for p in text.split(",") if p]
    if len(parts) != m:
        raise CatalogError(f"{what} needs {m} values, got {text!r}")
    try:
        return tuple(as_fraction(p) for p in parts)
    except (ValueError, ZeroDivisionError) as exc:
        raise CatalogError(f"bad {what} {text!r}") from exc


def parse_catalog(text: str, base_dir: Path | str = ".", validate: bool = True) -> GermCatalog:
    """Parse catalog lines of ``key=value`` tokens.

    Required keys: ``germ`` (path, relative to ``base_dir``), ``message``,
    ``s0``, ``box``, ``rank_k``. Optional: ``quad`` and ``linear`` (morsification
    coefficients, default quad = 1 in every variable) and ``grid``.
    """
    base_dir = Path(base_dir)
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = {}
        for tok in line.split():
            key, sep, val = tok.partition("=")
            if not sep:
                if "germ" in fields:
                    raise CatalogError(f"line {lineno}: token {tok!r} is not key=value")
                key, val = "germ", tok
            fields[key.strip().lower()] = val.strip()
        missing = {"germ", "message", "s0", "box", "rank_k"} - fields.keys()
        if missing:
            raise CatalogError(f"line {lineno}: missing {sorted(missing)}")
        try:
            germ, _ = load_germ(base_dir / fields["germ"])
            m = germ.n_vars
            message = WeightVector.parse(fields["message"])
            box = Box.parse(fields["box"], m)
            s0 = float(as_fraction(fields["s0"]))
            rank_k = int(fields["rank_k"])
            grid = int(fields.get("grid", 16))
        except (GermParseError, ValueError) as exc:
            raise CatalogError(f"line {lineno}: {exc}") from exc
        if len(message) != m:
            raise CatalogError(f"line {lineno}: message has {len(message)} weights, germ has {m} variables")
        quad = _parse_coeffs(fields["quad"], m, "quad") if "quad" in fields else (Fraction(1),) * m
        linear = _parse_coeffs(fields["linear"], m, "linear") if "linear" in fields else ()
        entries.append(CatalogEntry(message, germ, Morsification(germ, quad, linear), rank_k, s0, box, grid))
    catalog = GermCatalog(tuple(entries))
    if validate:
        catalog.validate()
    return catalog


def load_catalog(path=None, validate: bool = True) -> GermCatalog:
    path = Path(path) if path is not None else SHIPPED_CATALOG
    try:
        text = path.read_text()
    except OSError as exc:
        raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
    return parse_catalog(text, path.parent, validate)


@dataclass(frozen=True)
class KeyPair:
    pk: float
    sk: MorseVector


@dataclass(frozen=True)
class Ciphertext1:
    points: tuple[tuple[float, ...], ...]

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Ciphertext2:
    lambda_zero: MorseVector

    def __post_init__(self):
        if any(i != 0 for i in self.lambda_zero):
            raise ValueError("a construction-2 ciphertext holds only zero indices")

    def __len__(self) -> int:
        return len(self.lambda_zero)


def _draw_pk(rng: np.random.Generator, s0: float, scheme: int) -> float:
    if scheme == 1:
        return float(rng.uniform(-s0, s0))
    if scheme == 2:
        # 1 - U lies in (0, 1]
        return float(s0 * (1.0 - rng.random()))
    raise ValueError(f"scheme must be 1 or 2, got {scheme}")


def secret_key_for(entry: CatalogEntry, pk) -> MorseVector:
    """lambda_{pk}, with no admissibility check."""
    lam, _ = entry.morse_data(pk)
    return lam


def keygen(entry: CatalogEntry, seed=DEFAULT_SEED, scheme: int = 1) -> KeyPair:
    """Draw pk and return (pk, lambda_pk).

    Draws where f_pk is not Morse, or where the Morse vector does not give back
    the entry's rank_k, are rejected and redrawn.
    """
    rng = np.random.default_rng(seed)
    last = None
    for _ in range(MAX_KEYGEN_ATTEMPTS):
        pk = _draw_pk(rng, entry.s0, scheme)
        try:
            lam, lam0 = entry.morse_data(pk)
        except DegenerateCritical as exc:
            last = exc
            continue
        if len(lam) - len(lam0) == entry.rank_k:
            return KeyPair(pk, lam)
    raise DegenerateCritical(f"no admissible key after {MAX_KEYGEN_ATTEMPTS} draws"
                             + (f" (last: {last})" if last else ""))


def _index_zero_points(entry: CatalogEntry, pk, positive_value_only: bool):
    pts = [p for p in entry.critical_points(pk) if p.morse_index == 0]
    if positive_value_only:
        pts = [p for p in pts if p.value > 0]
    return pts


def encrypt1(pk, m: WeightVector, catalog: GermCatalog, *,
             filter_positive_critical_value: bool = False) -> Ciphertext1:
    entry = catalog.entry_for(m)
    pts = _index_zero_points(entry, pk, filter_positive_critical_value)
    return Ciphertext1(tuple(p.location for p in pts))


def encrypt2(pk, m: WeightVector, catalog: GermCatalog, *,
             filter_positive_critical_value: bool = False) -> Ciphertext2:
    entry = catalog.entry_for(m)
    pts = _index_zero_points(entry, pk, filter_positive_critical_value)
    return Ciphertext2(MorseVector(tuple(0 for _ in pts)))


def _decrypt(sk: MorseVector, n_c: int, catalog: GermCatalog) -> WeightVector:
    if n_c > len(sk):
        raise DecryptionError(f"ciphertext has {n_c} entries but the secret key only {len(sk)}")
    zeros = sum(1 for i in sk if i == 0)
    if n_c > zeros:
        raise DecryptionError(f"ciphertext lists {n_c} index-zero points, the secret key has {zeros}")
    return catalog.lookup_rank(len(sk) - n_c)


def decrypt1(sk: MorseVector, c: Ciphertext1, catalog: GermCatalog) -> WeightVector:
    return _decrypt(sk, len(c), catalog)


def decrypt2(sk: MorseVector, c: Ciphertext2, catalog: GermCatalog) -> WeightVector:
    return _decrypt(sk, len(c), catalog)


ENCRYPT = {1: encrypt1, 2: encrypt2}
DECRYPT = {1: decrypt1, 2: decrypt2}


def roundtrip_failures(catalog: GermCatalog, scheme: int, n_keys: int = 200, seed=DEFAULT_SEED) -> list[str]:
    """Dec(Enc(m)) for every entry under n_keys fresh keys of that entry; returns failure descriptions."""
    failures = []
    seeds = np.random.SeedSequence(seed).spawn(n_keys)
    for entry in catalog.entries:
        for ss in seeds:
            kp = keygen(entry, ss, scheme)
            c = ENCRYPT[scheme](kp.pk, entry.message, catalog)
            try:
                out = DECRYPT[scheme](kp.sk, c, catalog)
            except DecryptionError as exc:
                failures.append(f"({entry.message}) pk={kp.pk!r}: {exc}")
                continue
            if out != entry.message:
                failures.append(f"({entry.message}) pk={kp.pk!r}: decrypted to ({out})")
    return failures


# ---------------------------------------------------------------- CCA game

def _fmt_ct(c) -> str:
    if isinstance(c, Ciphertext2):
        return f"lambda0={c.lambda_zero}"
    return "[" + ";".join("(" + ",".join(f"{v:.6g}" for v in p) + ")" for p in c.points) + "]"


class DecryptionOracle:
    """Dec_sk for one trial, refusing the challenge once it is fixed. Errors come back as None."""

    def __init__(self, sk: MorseVector, scheme: int, catalog: GermCatalog, trial: int, transcript: list[str]):
        self._sk = sk
        self._scheme = scheme
        self._catalog = catalog
        self._trial = trial
        self._log = transcript
        self.challenge = None
        self.queries = 0

    def __call__(self, c) -> WeightVector | None:
        phase = 1 if self.challenge is None else 2
        if self.challenge is not None and c == self.challenge:
            self._log.append(f"trial={self._trial} phase=2 query={_fmt_ct(c)} -> REFUSED (challenge)")
            raise ProtocolViolation("attacker queried the decryption oracle on the challenge ciphertext")
        self.queries += 1
        try:
            out = DECRYPT[self._scheme](self._sk, c, self._catalog)
            answer = f"({out})"
        except DecryptionError:
            out, answer = None, "error"
        self._log.append(f"trial={self._trial} phase={phase} query={_fmt_ct(c)} -> {answer}")
        return out


@dataclass
class AttackerView:
    """Everything the attacker sees in one trial."""

    pk: float
    scheme: int
    catalog: GermCatalog
    oracle: DecryptionOracle
    rng: np.random.Generator

    def encrypt(self, m: WeightVector):
        return ENCRYPT[self.scheme](self.pk, m, self.catalog)


class Attacker:
    """Base strategy. A fresh instance is created for every trial."""

    name = "base"

    def choose(self, view: AttackerView) -> tuple[WeightVector, WeightVector]:
        return view.catalog.messages[0], view.catalog.messages[1]

    def guess(self, view: AttackerView, challenge) -> int:
        raise NotImplementedError


class GuessAttacker(Attacker):
    name = "guess"

    def guess(self, view, challenge) -> int:
        return int(view.rng.integers(2))


class ReencryptAttacker(Attacker):
    """Encrypts both candidates under pk and compares with the challenge."""

    name = "reencrypt"

    def guess(self, view, challenge) -> int:
        m0, m1 = self.messages
        c0, c1 = view.encrypt(m0), view.encrypt(m1)
        if challenge == c0 and challenge != c1:
            return 0
        if challenge == c1 and challenge != c0:
            return 1
        return int(view.rng.integers(2))

    def choose(self, view):
        self.messages = super().choose(view)
        return self.messages


class OracleAttacker(Attacker):
    """Uses only decryption-oracle answers on ciphertexts it builds itself.

    Construction 1: ask for the decryption of the challenge with each point
    nudged, which decrypts the same as the challenge. Construction 2: ask for
    every other ciphertext length and rule out candidates decoded elsewhere.
    """

    name = "oracle"
    nudge = 1e-3

    def choose(self, view):
        self.messages = super().choose(view)
        return self.messages

    def guess(self, view, challenge) -> int:
        m0, m1 = self.messages
        if isinstance(challenge, Ciphertext1):
            if challenge.points:
                mauled = Ciphertext1(tuple(tuple(v + self.nudge for v in p) for p in challenge.points))
                ans = view.oracle(mauled)
                if ans == m0:
                    return 0
                if ans == m1:
                    return 1
        else:
            n = len(challenge)
            seen = {}
            for length in range(0, n + 4):
                if length == n:
                    continue
                ans = view.oracle(Ciphertext2(MorseVector((0,) * length)))
                if ans is not None:
                    seen[ans] = length
            if m0 in seen and m1 not in seen:
                return 1
            if m1 in seen and m0 not in seen:
                return 0
        return int(view.rng.integers(2))


ATTACKERS: dict[str, type[Attacker]] = {a.name: a for a in (GuessAttacker, ReencryptAttacker, OracleAttacker)}


@dataclass
class TrialResult:
    b: int
    guess: int
    pk: float
    messages: tuple[WeightVector, WeightVector]
    transcript: list[str] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.b == self.guess


@dataclass
class CCAReport:
    attacker: str
    scheme: int
    trials: int
    successes: int
    seed: int
    transcript: list[str] = field(default_factory=list, repr=False)

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    @property
    def advantage(self) -> float:
        return self.success_rate - 0.5

    @property
    def std_error(self) -> float:
        p = self.success_rate
        return math.sqrt(max(p * (1 - p), 0.25 / self.trials) / self.trials)

    def summary_lines(self) -> list[str]:
        return [
            f"attacker: {self.attacker}",
            f"scheme: {self.scheme}",
            f"trials: {self.trials}",
            f"seed: {self.seed}",
            f"successes: {self.successes}",
            f"success_rate: {self.success_rate:.6f}",
            f"std_error: {self.std_error:.6f}",
            f"advantage: {self.advantage:+.6f}",
            f"oracle_queries: {len(self.transcript)}",
            "note: advantage is measured, no security claim is made",
        ]


def _check_messages(catalog: GermCatalog, m0: WeightVector, m1: WeightVector) -> None:
    catalog.entry_for(m0)
    catalog.entry_for(m1)
    if m0 == m1:
        raise ProtocolViolation("the two challenge messages must differ")
    if len(catalog.encode(m0)) != len(catalog.encode(m1)):
        raise ProtocolViolation("the two challenge messages must have equal encoded length")


def run_trial(attacker_cls: type[Attacker], scheme: int, catalog: GermCatalog, trial: int,
              seed_seq: np.random.SeedSequence, key_entry: CatalogEntry | None = None) -> TrialResult:
    """One run of the experiment: keygen, choose, challenge, oracle access, guess."""
    key_seed, bit_seed, att_seed = seed_seq.spawn(3)
    entry = key_entry or catalog.entries[0]
    kp = keygen(entry, key_seed, scheme)
    transcript: list[str] = []
    oracle = DecryptionOracle(kp.sk, scheme, catalog, trial, transcript)
    view = AttackerView(kp.pk, scheme, catalog, oracle, np.random.default_rng(att_seed))
    attacker = attacker_cls()
    m0, m1 = attacker.choose(view)
    _check_messages(catalog, m0, m1)
    b = int(np.random.default_rng(bit_seed).integers(2))
    challenge = ENCRYPT[scheme](kp.pk, (m0, m1)[b], catalog)
    oracle.challenge = challenge
    g = int(attacker.guess(view, challenge))
    return TrialResult(b, g, kp.pk, (m0, m1), transcript)


def _run_chunk(args) -> list[TrialResult]:
    attacker_cls, scheme, catalog, start, seqs, key_entry = args
    return [run_trial(attacker_cls, scheme, catalog, start + i, ss, key_entry) for i, ss in enumerate(seqs)]


def cca_experiment(attacker: str | type[Attacker], scheme: int, catalog: GermCatalog, trials: int,
                   seed: int = DEFAULT_SEED, *, key_entry: CatalogEntry | None = None,
                   workers: int = 1) -> CCAReport:
    """Repeat the chosen-ciphertext experiment ``trials`` times with per-trial seeds.

    Keys are generated on ``key_entry`` (the catalog's first entry by default).
    Results do not depend on ``workers``.
    """
    attacker_cls = ATTACKERS[attacker] if isinstance(attacker, str) else attacker
    if scheme not in (1, 2):
        raise ValueError(f"scheme must be 1 or 2, got {scheme}")
    if len(catalog) < 2:
        raise ProtocolViolation("the game needs at least two messages")
    if trials < 1:
        raise ValueError("trials must be positive")
    seqs = np.random.SeedSequence(seed).spawn(trials)
    if workers <= 1:
        results = _run_chunk((attacker_cls, scheme, catalog, 0, seqs, key_entry))
    else:
        size = math.ceil(trials / workers)
        jobs = [(attacker_cls, scheme, catalog, i, seqs[i:i + size], key_entry) for i in range(0, trials, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for chunk in pool.map(_run_chunk, jobs) for r in chunk]
    transcript = [line for r in results for line in r.transcript]
    return CCAReport(attacker_cls.name, scheme, trials, sum(r.success for r in results), int(seed), transcript)


def demo(catalog: GermCatalog, scheme: int, m: WeightVector, seed=DEFAULT_SEED, *,
         filter_positive_critical_value: bool = False) -> list[tuple[str, str]]:
    """Key generation, encryption and decryption of one message, as (field, value) rows."""
    entry = catalog.entry_for(m)
    kp = keygen(entry, seed, scheme)
    c = ENCRYPT[scheme](kp.pk, m, catalog, filter_positive_critical_value=filter_positive_critical_value)
    try:
        out = str(DECRYPT[scheme](kp.sk, c, catalog))
    except DecryptionError as exc:
        out = f"error: {exc}"
    return [
        ("scheme", str(scheme)),
        ("message", str(m)),
        ("pk", repr(kp.pk)),
        ("sk", str(kp.sk)),
        ("ciphertext", _fmt_ct(c)),
        ("k", str(len(kp.sk) - len(c))),
        ("decrypted", out),
    ]

