import pytest

from milnor import crypto
from milnor.crypto import (Attacker, CatalogEntry, Ciphertext1, Ciphertext2, GermCatalog, cca_experiment, decrypt1,
                           decrypt2, encrypt1, encrypt2, keygen, parse_catalog, secret_key_for)
from milnor.errors import CatalogError, DecryptionError, ProtocolViolation, UnknownMessage
from milnor.germ import PolynomialGerm, WeightVector, power_germ, quadratic_form
from milnor.morse import Morsification, MorseVector

SPHERE = WeightVector.parse("1/2,1/2,1/2")
QUARTIC = WeightVector.parse("1/4,1/2")
HALF = WeightVector.parse("1/2")


@pytest.fixture(scope="module")
def line_catalog():
    # x^2 with the linear morsification x^2 + s x
    x2 = power_germ(2)
    return GermCatalog((CatalogEntry(HALF, x2, Morsification.of(x2, [0], [1]), 0),))


def test_shipped_catalog(shipped_catalog):
    assert shipped_catalog.messages == (SPHERE, QUARTIC)
    assert [e.rank_k for e in shipped_catalog.entries] == [0, 1]
    assert len(shipped_catalog.encode(SPHERE)) == len(shipped_catalog.encode(QUARTIC))


def test_duplicate_ranks_rejected(tmp_path):
    f = quadratic_form([1, 1])
    M = Morsification.of(f, [1, 1])
    e1 = CatalogEntry(WeightVector.parse("1/2,1/2"), f, M, 0)
    g = PolynomialGerm.from_terms(2, {(4, 0): 1, (0, 2): 1})
    e2 = CatalogEntry(WeightVector.parse("1/4,1/2"), g, Morsification.of(g, [1, 1]), 0)
    with pytest.raises(CatalogError):
        GermCatalog((e1, e2))


def test_rank_mismatch_rejected_at_load(tmp_path):
    (tmp_path / "q.germ").write_text("vars 2\n1 4 0\n-1 0 2\n")
    (tmp_path / "cat.txt").write_text("germ=q.germ message=1/4,1/2 s0=1 box=-2,2 rank_k=3 quad=2,0\n")
    with pytest.raises(CatalogError):
        crypto.load_catalog(tmp_path / "cat.txt")


def test_catalog_rejects_wrong_weights(tmp_path):
    (tmp_path / "q.germ").write_text("vars 2\n1 4 0\n-1 0 2\n")
    (tmp_path / "cat.txt").write_text("germ=q.germ message=1/2,1/2 s0=1 box=-2,2 rank_k=1 quad=2,0\n")
    with pytest.raises(CatalogError):
        crypto.load_catalog(tmp_path / "cat.txt")


def test_catalog_missing_field(tmp_path):
    (tmp_path / "cat.txt").write_text("germ=q.germ message=1/2 s0=1\n")
    with pytest.raises(CatalogError):
        parse_catalog((tmp_path / "cat.txt").read_text(), tmp_path)


@pytest.mark.parametrize("seed", range(10))
def test_sphere_key_has_one_entry(shipped_catalog, seed):
    kp = keygen(shipped_catalog.entries[0], seed)
    assert abs(kp.pk) <= 1
    assert kp.sk == MorseVector((0,))


def test_quartic_keys(shipped_catalog):
    entry = shipped_catalog.entries[1]
    assert secret_key_for(entry, 0.5) == MorseVector((1,))
    assert secret_key_for(entry, -0.5) == MorseVector((1, 1, 2))
    for seed in range(20):
        kp = keygen(entry, seed, scheme=1)
        assert kp.sk == MorseVector((1,)) and kp.pk > 0
        kp2 = keygen(entry, seed, scheme=2)
        assert 0 < kp2.pk <= 1


def test_encrypt_examples(shipped_catalog, line_catalog):
    assert encrypt1(0.5, QUARTIC, shipped_catalog) == Ciphertext1(())
    assert encrypt1(0, SPHERE, shipped_catalog) == Ciphertext1(((0.0, 0.0, 0.0),))
    c = encrypt1(1, HALF, line_catalog)
    assert len(c) == 1 and c.points[0] == pytest.approx((-0.5,), abs=1e-12)
    assert encrypt2(0.5, QUARTIC, shipped_catalog).lambda_zero == MorseVector(())
    with pytest.raises(UnknownMessage):
        encrypt1(0.5, WeightVector.parse("1/3,1/2"), shipped_catalog)


def test_linear_family_under_value_filter(line_catalog):
    # x^2 + s x has one index-0 point at -s/2 for every s != 0; its critical value -s^2/4 is negative
    for s in (-1.0, -0.3, 0.4, 1.0):
        assert len(encrypt2(s, HALF, line_catalog)) == 1
        assert len(encrypt2(s, HALF, line_catalog, filter_positive_critical_value=True)) == 0


def test_decrypt_examples(shipped_catalog):
    assert decrypt1(MorseVector((1,)), Ciphertext1(()), shipped_catalog) == QUARTIC
    assert decrypt1(MorseVector((0,)), Ciphertext1(((0.0, 0.0, 0.0),)), shipped_catalog) == SPHERE
    with pytest.raises(DecryptionError):
        decrypt1(MorseVector((1,)), Ciphertext1(((0.3, 0.0),)), shipped_catalog)
    with pytest.raises(DecryptionError):
        decrypt2(MorseVector((0,)), Ciphertext2(MorseVector((0, 0))), shipped_catalog)
    with pytest.raises(DecryptionError):
        decrypt2(MorseVector((1, 1, 2)), Ciphertext2(MorseVector(())), shipped_catalog)


def test_decrypt_is_deterministic(shipped_catalog):
    sk, c = MorseVector((1,)), Ciphertext2(MorseVector(()))
    assert {str(decrypt2(sk, c, shipped_catalog)) for _ in range(20)} == {"1/4,1/2"}


def test_ciphertext2_rejects_nonzero():
    with pytest.raises(ValueError):
        Ciphertext2(MorseVector((0, 1)))


@pytest.mark.parametrize("scheme", [1, 2])
def test_roundtrip_small(shipped_catalog, scheme):
    assert crypto.roundtrip_failures(shipped_catalog, scheme, n_keys=20, seed=99) == []


class ChallengeQuerier(Attacker):
    name = "cheater"

    def guess(self, view, challenge):
        view.oracle(challenge)
        return 0


def test_challenge_query_is_refused(shipped_catalog):
    with pytest.raises(ProtocolViolation):
        cca_experiment(ChallengeQuerier, 1, shipped_catalog, 3)


def test_identical_messages_refused(shipped_catalog):
    class Same(Attacker):
        def choose(self, view):
            return SPHERE, SPHERE

        def guess(self, view, challenge):
            return 0

    with pytest.raises(ProtocolViolation):
        cca_experiment(Same, 1, shipped_catalog, 2)


def test_single_message_catalog_refused(line_catalog):
    with pytest.raises(ProtocolViolation):
        cca_experiment("guess", 1, line_catalog, 2)


def test_cca_harness_small(shipped_catalog):
    guess = cca_experiment("guess", 1, shipped_catalog, 400, seed=3)
    assert 0.4 < guess.success_rate < 0.6
    reenc = cca_experiment("reencrypt", 2, shipped_catalog, 100, seed=3)
    assert reenc.success_rate == 1.0 and reenc.advantage == 0.5
    oracle = cca_experiment("oracle", 2, shipped_catalog, 50, seed=3)
    assert oracle.transcript and all(line.startswith("trial=") for line in oracle.transcript)
    assert any("phase=2" in line for line in oracle.transcript)


def test_cca_is_reproducible_and_worker_independent(shipped_catalog):
    a = cca_experiment("oracle", 1, shipped_catalog, 40, seed=5)
    b = cca_experiment("oracle", 1, shipped_catalog, 40, seed=5, workers=2)
    assert (a.successes, a.transcript) == (b.successes, b.transcript)
