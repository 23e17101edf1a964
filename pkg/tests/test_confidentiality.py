import math
import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.crypto.confidentiality import (
    SALT_SIZE, BallotCommitment, SecretShare, check_claim, ciphertext_from_bytes, ciphertext_to_bytes, commit_ballot,
    consistent_subset, decrypt_ballot, encrypt_ballot, generate_encryption_key, reconstruct_key, share_digest,
    share_key,
)
from src.errors import ThresholdError, ValidationError


class TestThresholdSharing:
    @pytest.mark.parametrize("k,n", [(1, 1), (2, 3), (3, 5), (4, 7)])
    def test_every_k_subset_reconstructs(self, toy, k, n):
        rng = random.Random(k * 10 + n)
        keypair = generate_encryption_key(toy, rng)
        shares = share_key(toy, keypair.dk, k, n, rng)
        assert [s.index for s in shares] == list(range(1, n + 1))
        for subset in combinations(shares, k):
            assert reconstruct_key(toy, subset, k) == keypair.dk

    def test_fewer_than_k_shares(self, toy, rng):
        shares = share_key(toy, 1234, 3, 5, rng)
        with pytest.raises(ThresholdError):
            reconstruct_key(toy, shares[:2], 3)

    def test_duplicate_indices(self, toy, rng):
        shares = share_key(toy, 5, 2, 3, rng)
        with pytest.raises(ValidationError):
            reconstruct_key(toy, [shares[0], shares[0]], 2)

    def test_single_share_distribution_ignores_key(self, toy):
        rng = random.Random(4242)
        buckets = 16
        draws = 2000
        histograms = []
        for dk in (1, toy.order - 1):
            counts = [0] * buckets
            for _ in range(draws):
                value = share_key(toy, dk, 2, 3, rng)[0].value
                counts[value * buckets // toy.order] += 1
            histograms.append(counts)
        statistic = sum((a - b) ** 2 / (a + b) for a, b in zip(*histograms) if a + b)
        assert statistic < 45

    def test_fewer_than_k_shares_fit_every_key(self, toy):
        rng = random.Random(77)
        dk = generate_encryption_key(toy, rng).dk
        first, second = share_key(toy, dk, 3, 5, rng)[:2]
        for candidate in [rng.randrange(toy.order) for _ in range(25)] + [0, dk]:
            third = SecretShare(3, (candidate - 3 * first.value + 3 * second.value) % toy.order)
            assert reconstruct_key(toy, [first, second, third], 3) == candidate

    @pytest.mark.parametrize("k,n", [(0, 3), (4, 3)])
    def test_invalid_threshold(self, toy, rng, k, n):
        with pytest.raises(ValidationError):
            share_key(toy, 5, k, n, rng)

    def test_consistent_subset_skips_corrupt_share(self, toy, rng):
        keypair = generate_encryption_key(toy, rng)
        shares = share_key(toy, keypair.dk, 2, 3, rng)
        corrupt = SecretShare(shares[0].index, (shares[0].value + 1) % toy.order)
        assert reconstruct_key(toy, [corrupt, shares[1]], 2) != keypair.dk
        assert consistent_subset(toy, [corrupt, shares[1], shares[2]], 2, keypair.ek) == keypair.dk
        assert consistent_subset(toy, [corrupt, shares[1]], 2, keypair.ek) is None

    def test_share_digest_binds_value(self, toy, rng):
        share = share_key(toy, 77, 2, 3, rng)[0]
        assert share_digest(toy, share) != share_digest(toy, SecretShare(share.index, share.value + 1))

    def test_share_file(self, toy, rng, tmp_path):
        share = share_key(toy, 77, 2, 3, rng)[1]
        path = tmp_path / "share.json"
        share.save(toy, path)
        assert SecretShare.load(path) == share


class TestEncryption:
    @given(plaintext=st.binary(max_size=200))
    @settings(max_examples=30, deadline=None)
    def test_roundtrip(self, k1, plaintext):
        rng = random.Random(len(plaintext))
        keypair = generate_encryption_key(k1, rng)
        assert decrypt_ballot(k1, keypair.dk, encrypt_ballot(k1, keypair.ek, plaintext, rng)) == plaintext

    def test_byte_frequency_classifier_at_chance(self, k1):
        rng = random.Random(515)
        keypair = generate_encryption_key(k1, rng)
        plaintexts = (b"\x00" * 16, b"\xff" * 16)
        samples = []
        for _ in range(1000):
            label = rng.randrange(2)
            samples.append((label, ciphertext_to_bytes(k1, encrypt_ballot(k1, keypair.ek, plaintexts[label], rng))))

        def train(rows):
            tables = [[[1] * 256 for _ in range(len(rows[0][1]))] for _ in range(2)]
            totals = [256, 256]
            for label, data in rows:
                totals[label] += 1
                for position, byte in enumerate(data):
                    tables[label][position][byte] += 1
            return tables, totals

        def guess(model, data):
            tables, totals = model
            scores = [sum(math.log(tables[label][position][byte] / totals[label])
                          for position, byte in enumerate(data)) for label in (0, 1)]
            return int(scores[1] > scores[0])

        halves = (samples[:500], samples[500:])
        hits = 0
        for trained, held_out in (halves, halves[::-1]):
            model = train(trained)
            hits += sum(guess(model, data) == label for label, data in held_out)
        assert abs(hits / len(samples) - 0.5) < 0.05

    def test_randomized(self, toy, rng):
        keypair = generate_encryption_key(toy, rng)
        first = encrypt_ballot(toy, keypair.ek, b"same ballot", rng)
        second = encrypt_ballot(toy, keypair.ek, b"same ballot", rng)
        assert ciphertext_to_bytes(toy, first) != ciphertext_to_bytes(toy, second)

    def test_wrong_key(self, k1, rng):
        keypair = generate_encryption_key(k1, rng)
        ct = encrypt_ballot(k1, keypair.ek, b"0123456789abcdef", rng)
        assert decrypt_ballot(k1, (keypair.dk + 1) % k1.order, ct) != b"0123456789abcdef"

    def test_wire_format(self, toy, rng):
        keypair = generate_encryption_key(toy, rng)
        ct = encrypt_ballot(toy, keypair.ek, b"ballot", rng)
        encoded = ciphertext_to_bytes(toy, ct)
        assert len(encoded) == toy.point_size + 4 + len(b"ballot")
        decoded = ciphertext_from_bytes(toy, encoded)
        assert decoded.body == ct.body
        assert toy.affine(decoded.R) == toy.affine(ct.R)
        with pytest.raises(ValidationError):
            ciphertext_from_bytes(toy, encoded + b"x")
        with pytest.raises(ValidationError):
            ciphertext_from_bytes(toy, b"\x01\x02")

    def test_infinity_key_rejected(self, toy, rng):
        from ecdsa.ellipticcurve import INFINITY
        with pytest.raises(ValidationError):
            encrypt_ballot(toy, INFINITY, b"x", rng)


class TestCommitments:
    def test_open(self, rng):
        salt = rng.randbytes(SALT_SIZE)
        commitment = commit_ballot(b"yes", salt)
        assert check_claim(commitment, b"yes", salt)
        assert not check_claim(commitment, b"no", salt)
        assert not check_claim(commitment, b"yes", rng.randbytes(SALT_SIZE))
        assert not check_claim(commitment, b"yes", salt[:-1])

    def test_salt_length(self):
        with pytest.raises(ValidationError):
            commit_ballot(b"yes", b"short")

    def test_commitment_shape(self, rng):
        salt = rng.randbytes(SALT_SIZE)
        assert isinstance(commit_ballot(b"yes", salt), BallotCommitment)
        assert len(commit_ballot(b"yes", salt).digest) == 32
