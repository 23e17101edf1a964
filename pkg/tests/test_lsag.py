import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.crypto.lsag import (
    FRAMING_OVERHEAD, PublicKeyRing, RingSignature, VerifyStatus, check_signature, hpk, keygen, link, sign, verify,
)
from src.errors import ValidationError


def make_ring(curve, n, seed=7):
    rng = random.Random(seed)
    keys = [keygen(curve, rng) for _ in range(n)]
    return keys, PublicKeyRing(curve, [k.pk for k in keys])


def replay_chain(curve, ring, message, sig):
    """Challenge chain recomputed with separate multiplications and additions."""
    tag = curve.deserialize_point(sig.tag)
    base = curve.hash_to_point(curve.scalar_to_bytes(hpk(curve, ring.keys)))
    chain, c = [], sig.c
    for s_i, pk in zip(sig.s, ring.keys):
        a = curve.point_add(curve.base_mul(s_i), curve.scalar_mul(c, pk))
        b = curve.point_add(curve.scalar_mul(s_i, base), curve.scalar_mul(c, tag))
        c = curve.hash_scalar(message + sig.tag + curve.serialize_point(a) + curve.serialize_point(b))
        chain.append(c)
    return chain


class TestKeys:
    def test_keygen(self, toy, rng):
        keypair = keygen(toy, rng)
        assert 1 <= keypair.sk < toy.order
        assert toy.affine(keypair.pk) == toy.affine(toy.base_mul(keypair.sk))

    def test_keygen_collisions_follow_birthday_bound(self, toy):
        rng = random.Random(2024)
        draws = 1000
        seen: dict[int, int] = {}
        for _ in range(draws):
            sk = keygen(toy, rng).sk
            seen[sk] = seen.get(sk, 0) + 1
        colliding_pairs = sum(count * (count - 1) // 2 for count in seen.values())
        expected = draws * (draws - 1) / 2 / (toy.order - 1)
        assert abs(colliding_pairs - expected) < 5 * math.sqrt(expected)

    def test_keygen_distinct_on_secp256k1(self, k1):
        rng = random.Random(2025)
        encoded = {k1.serialize_point(keygen(k1, rng).pk) for _ in range(200)}
        assert len(encoded) == 200

    def test_toy_discrete_log_by_exhaustion(self, toy):
        keypair = keygen(toy, random.Random(31))
        target = toy.affine(keypair.pk)
        acc, found = toy.generator, None
        for k in range(1, toy.order):
            if toy.affine(acc) == target:
                found = k
                break
            acc = toy.point_add(acc, toy.generator)
        assert found == keypair.sk

    def test_incremental_digest_matches_recompute(self, toy):
        keys, _ = make_ring(toy, 6)
        ring = PublicKeyRing(toy)
        for i, keypair in enumerate(keys, start=1):
            ring.append(keypair.pk)
            assert ring.digest == hpk(toy, [k.pk for k in keys[:i]])

    def test_empty_ring_has_no_digest(self, toy):
        with pytest.raises(ValidationError):
            hpk(toy, [])

    def test_ring_file_roundtrip(self, toy):
        _, ring = make_ring(toy, 4)
        again = PublicKeyRing.from_dict(toy, ring.to_dict())
        assert again.digest == ring.digest
        assert again.encoded_keys == ring.encoded_keys

    def test_snapshot_is_frozen(self, toy, rng):
        _, ring = make_ring(toy, 3)
        frozen = ring.snapshot()
        ring.append(keygen(toy, rng).pk)
        assert len(frozen) == 3
        assert frozen.digest == hpk(toy, frozen.keys)


class TestSignVerify:
    @pytest.mark.parametrize("n", range(1, 9))
    def test_every_signer_position(self, toy, n):
        keys, ring = make_ring(toy, n, seed=n)
        rng = random.Random(100 + n)
        for index, keypair in enumerate(keys):
            for m in range(3):
                message = f"ballot {n}/{index}/{m}".encode()
                sig = sign(toy, keypair.sk, index, ring, message, rng)
                verification = check_signature(toy, ring, message, sig)
                assert verification.status is VerifyStatus.VALID
                assert list(verification.chain) == replay_chain(toy, ring, message, sig)
                assert verification.chain[-1] == sig.c

    @pytest.mark.slow
    @pytest.mark.parametrize("n", range(1, 9))
    def test_exhaustive_fifty_messages(self, toy, n):
        keys, ring = make_ring(toy, n, seed=n)
        rng = random.Random(n)
        for index, keypair in enumerate(keys):
            for _ in range(50):
                message = rng.randbytes(rng.randrange(0, 40))
                sig = sign(toy, keypair.sk, index, ring, message, rng)
                verification = check_signature(toy, ring, message, sig)
                assert verification
                assert list(verification.chain) == replay_chain(toy, ring, message, sig)

    @given(message=st.binary(max_size=128), index=st.integers(min_value=0, max_value=4))
    @settings(max_examples=25, deadline=None)
    def test_any_message(self, toy, message, index):
        keys, ring = make_ring(toy, 5)
        sig = sign(toy, keys[index].sk, index, ring, message, random.Random(len(message)))
        assert verify(toy, ring, message, sig)

    @pytest.mark.parametrize("n", range(1, 33))
    def test_completeness_toy(self, toy, n):
        keys, ring = make_ring(toy, n, seed=500 + n)
        rng = random.Random(600 + n)
        for _ in range(4):
            index = rng.randrange(n)
            message = rng.randbytes(rng.randrange(0, 64))
            sig = sign(toy, keys[index].sk, index, ring, message, rng)
            verification = check_signature(toy, ring, message, sig)
            assert verification.status is VerifyStatus.VALID
            assert list(verification.chain) == replay_chain(toy, ring, message, sig)

    @pytest.mark.parametrize("n", [1, 10, pytest.param(100, marks=pytest.mark.slow)])
    def test_completeness_secp256k1(self, k1, n):
        keys, ring = make_ring(k1, n, seed=700 + n)
        rng = random.Random(800 + n)
        for index in sorted({0, n - 1, rng.randrange(n)}):
            message = rng.randbytes(32)
            sig = sign(k1, keys[index].sk, index, ring, message, rng)
            assert check_signature(k1, ring, message, sig).status is VerifyStatus.VALID
            assert not verify(k1, ring, message + b"\x00", sig)

    def test_secp256k1(self, k1):
        keys, ring = make_ring(k1, 4)
        sig = sign(k1, keys[2].sk, 2, ring, b"vote", random.Random(3))
        assert verify(k1, ring, b"vote", sig)
        assert not verify(k1, ring, b"vote!", sig)

    def test_sign_rejects_bad_inputs(self, toy, rng):
        keys, ring = make_ring(toy, 3)
        with pytest.raises(ValidationError):
            sign(toy, keys[0].sk, 3, ring, b"m", rng)
        with pytest.raises(ValidationError):
            sign(toy, keys[0].sk, 1, ring, b"m", rng)
        with pytest.raises(ValidationError):
            sign(toy, 0, 0, ring, b"m", rng)


class TestRejection:
    @pytest.fixture
    def signed(self, toy):
        keys, ring = make_ring(toy, 4)
        sig = sign(toy, keys[1].sk, 1, ring, b"ballot", random.Random(9))
        return keys, ring, sig

    def test_tampered_message(self, toy, signed):
        _, ring, sig = signed
        assert check_signature(toy, ring, b"ballot?", sig).status is VerifyStatus.CHAIN_MISMATCH

    def test_other_ring(self, toy, signed):
        _, _, sig = signed
        _, other = make_ring(toy, 4, seed=99)
        assert check_signature(toy, other, b"ballot", sig).status is VerifyStatus.RING_MISMATCH

    def test_wrong_scalar_count(self, toy, signed):
        _, ring, sig = signed
        short = RingSignature(sig.ring_digest, sig.tag, sig.s[:-1], sig.c)
        assert check_signature(toy, ring, b"ballot", short).status is VerifyStatus.MALFORMED

    def test_scalar_out_of_range(self, toy, signed):
        _, ring, sig = signed
        big = RingSignature(sig.ring_digest, sig.tag, sig.s, sig.c + toy.order)
        assert check_signature(toy, ring, b"ballot", big).status is VerifyStatus.SCALAR_OUT_OF_RANGE

    def test_bad_tags(self, toy, signed):
        _, ring, sig = signed
        for tag in (bytes(toy.point_size), b"\xff" * toy.point_size):
            bad = RingSignature(sig.ring_digest, tag, sig.s, sig.c)
            assert check_signature(toy, ring, b"ballot", bad).status is VerifyStatus.BAD_TAG

    def test_every_single_scalar_change_fails(self, toy, signed):
        _, ring, sig = signed
        for i in range(len(sig.s)):
            s = list(sig.s)
            s[i] = (s[i] + 1) % toy.order
            assert not verify(toy, ring, b"ballot", RingSignature(sig.ring_digest, sig.tag, tuple(s), sig.c))
        assert not verify(toy, ring, b"ballot", RingSignature(sig.ring_digest, sig.tag, sig.s, (sig.c + 1) % toy.order))


class TestEncoding:
    def test_raw_and_framed_sizes(self, k1):
        for n in (1, 3, 10):
            keys, ring = make_ring(k1, n)
            sig = sign(k1, keys[0].sk, 0, ring, b"m", random.Random(n))
            assert sig.raw_size(k1) == 32 * (n + 3)
            assert len(sig.to_bytes(k1)) == 32 * (n + 3) + FRAMING_OVERHEAD
        assert FRAMING_OVERHEAD == 36

    def test_bytes_roundtrip(self, toy):
        keys, ring = make_ring(toy, 3)
        sig = sign(toy, keys[0].sk, 0, ring, b"m", random.Random(1))
        assert RingSignature.from_bytes(toy, sig.to_bytes(toy)) == sig

    def test_trailing_bytes_rejected(self, toy):
        keys, ring = make_ring(toy, 3)
        encoded = sign(toy, keys[0].sk, 0, ring, b"m", random.Random(1)).to_bytes(toy)
        with pytest.raises(ValidationError):
            RingSignature.from_bytes(toy, encoded + b"\x00")
        with pytest.raises(ValidationError):
            RingSignature.from_bytes(toy, encoded[:-1])


class TestLinkability:
    def test_same_signer_links(self, toy):
        keys, ring = make_ring(toy, 5)
        rng = random.Random(5)
        first = sign(toy, keys[3].sk, 3, ring, b"one", rng)
        second = sign(toy, keys[3].sk, 3, ring, b"two", rng)
        assert link(first, second)

    def test_distinct_signers_do_not_link(self, toy):
        keys, ring = make_ring(toy, 5)
        rng = random.Random(5)
        tags = {sign(toy, k.sk, i, ring, b"m", rng).tag for i, k in enumerate(keys)}
        assert len(tags) == len(keys)

    def test_different_rings_cannot_be_compared(self, toy):
        keys, ring = make_ring(toy, 3)
        other = PublicKeyRing(toy, list(ring.keys) + [keygen(toy, random.Random(1)).pk])
        rng = random.Random(2)
        with pytest.raises(ValidationError):
            link(sign(toy, keys[0].sk, 0, ring, b"m", rng), sign(toy, keys[0].sk, 0, other, b"m", rng))

    def test_reordered_ring_does_not_link(self, k1):
        keys, ring = make_ring(k1, 4)
        order = [1, 0, 2, 3]
        swapped = PublicKeyRing(k1, [keys[i].pk for i in order])
        assert hpk(k1, swapped.keys) != hpk(k1, ring.keys)
        assert swapped.digest != ring.digest

        rng = random.Random(3)
        original = sign(k1, keys[2].sk, 2, ring, b"m", rng)
        reordered = sign(k1, keys[2].sk, 2, swapped, b"m", rng)
        assert verify(k1, ring, b"m", original) and verify(k1, swapped, b"m", reordered)
        assert original.tag != reordered.tag
        with pytest.raises(ValidationError):
            link(original, reordered)

    def test_tag_depends_on_ring(self, toy):
        keys, ring = make_ring(toy, 3)
        other = PublicKeyRing(toy, list(ring.keys) + [keygen(toy, random.Random(1)).pk])
        rng = random.Random(2)
        assert sign(toy, keys[0].sk, 0, ring, b"m", rng).tag != sign(toy, keys[0].sk, 0, other, b"m", rng).tag


def random_signature(curve, ring, rng):
    g = curve.order
    return RingSignature(
        ring_digest=ring.digest,
        tag=curve.serialize_point(curve.base_mul(rng.randrange(1, g))),
        s=tuple(rng.randrange(0, g) for _ in range(len(ring))),
        c=rng.randrange(0, g),
    )


class TestForgery:
    def test_random_signatures_never_verify(self, k1):
        _, ring = make_ring(k1, 16)
        rng = random.Random(2024)
        assert sum(verify(k1, ring, b"forged", random_signature(k1, ring, rng)) for _ in range(40)) == 0

    @pytest.mark.slow
    def test_ten_thousand_random_signatures(self, k1):
        _, ring = make_ring(k1, 16)
        rng = random.Random(10_000)
        assert sum(verify(k1, ring, b"forged", random_signature(k1, ring, rng)) for _ in range(10_000)) == 0
