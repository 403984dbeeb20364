"""End-to-end sessions over memory and TCP, plus the sealed-manifest flow.

Fixed inputs throughout: modulus 51 with exponents (3, 11), nonce 13,
deposited secret 5, letter key 29. The resulting four frames are pinned
byte for byte.
"""

import hashlib
import threading
from concurrent.futures import ThreadPoolExecutor

import pytest

from piggybank import (
    AliceP1,
    AliceP2,
    AliceSecrets1,
    AliceSecrets2,
    BobP1,
    BobP2,
    HandshakeError,
    Kind,
    Message,
    Outcome2,
    Protocol,
    Recovered1,
    Rng,
    TamperRule,
    Variant1,
    Variant2,
    decode_msg,
    encode_msg,
    memory_pair,
    run_exchange,
    run_pair,
    run_trope_session,
    tap_attach,
    tcp_accept,
    tcp_connect,
    tcp_listen,
)

CHALLENGE_HEX = "50424e4b010101000200000000000000010400000000"
DEPOSIT_HEX = "50424e4b0101020001000000013100000000"
LETTER_HEX = "50424e4b0101030001000000011700000000"
ACK_HEX = "50424e4b010106000000000000"


def _stream(key: int, length: int, alg: str = "sha256") -> bytes:
    """Independent keystream oracle, written from the docstring alone."""
    out = b""
    counter = 0
    while len(out) < length:
        block = hashlib.new(alg)
        block.update(key.to_bytes((key.bit_length() + 7) // 8, "big"))
        block.update(counter.to_bytes(8, "big"))
        out += block.digest()
        counter += 1
    return out[:length]


def _xor(data: bytes, mask: bytes) -> bytes:
    return bytes(a ^ b for a, b in zip(data, mask))


class TestRunPair:
    def test_base_golden_frames(self, desk_rsa):
        params, secret = desk_rsa
        bob_out, alice_out = run_pair(
            BobP1(params, secret, Variant1.BASE, nonce=13),
            AliceP1(params, Variant1.BASE, AliceSecrets1(5, 29)),
        )
        assert bob_out.recovered == Recovered1(5, 29)
        assert bob_out.manifest_ok is None
        assert alice_out.recovered is None
        assert bob_out.transcript.transcript_lines() == [
            f"tx {CHALLENGE_HEX}",
            f"rx {DEPOSIT_HEX}",
            f"rx {LETTER_HEX}",
            f"tx {ACK_HEX}",
        ]
        assert alice_out.transcript.transcript_lines() == [
            f"rx {CHALLENGE_HEX}",
            f"tx {DEPOSIT_HEX}",
            f"tx {LETTER_HEX}",
            f"rx {ACK_HEX}",
        ]

    def test_kind_sequence(self, desk_rsa):
        params, secret = desk_rsa
        bob_out, _ = run_pair(
            BobP1(params, secret, Variant1.BASE, nonce=13),
            AliceP1(params, Variant1.BASE, AliceSecrets1(5, 29)),
        )
        kinds = [m.kind for m in bob_out.transcript.messages()]
        assert kinds == [Kind.CHALLENGE, Kind.DEPOSIT, Kind.LETTER, Kind.ACK]

    def test_secrets_never_ride_the_wire(self, desk_rsa):
        # S = 5 and K = 29 must appear in no field of any frame
        params, secret = desk_rsa
        bob_out, _ = run_pair(
            BobP1(params, secret, Variant1.BASE, nonce=13),
            AliceP1(params, Variant1.BASE, AliceSecrets1(5, 29)),
        )
        on_wire = [f for m in bob_out.transcript.messages() for f in m.fields]
        assert 5 not in on_wire
        assert 29 not in on_wire

    @pytest.mark.parametrize("variant", list(Variant1))
    def test_every_variant_recovers(self, desk_rsa, variant):
        params, secret = desk_rsa
        bob_out, alice_out = run_pair(
            BobP1(params, secret, variant),
            AliceP1(params, variant, AliceSecrets1(7, 30)),
            Rng(900 + int(variant)),
        )
        expected_key = None if variant is Variant1.MULTIPLICATIVE else 30
        assert bob_out.recovered == Recovered1(7, expected_key)
        assert alice_out.recovered is None

    @pytest.mark.parametrize("variant", list(Variant2))
    def test_prime_field_variants(self, desk_dh, variant):
        bob_out, _ = run_pair(
            BobP2(desk_dh, variant, nonce=11),
            AliceP2(desk_dh, variant, AliceSecrets2(3, 10)),
        )
        assert bob_out.recovered == Outcome2(10, 14)

    def test_same_rng_same_transcript(self, desk_rsa):
        params, secret = desk_rsa
        runs = [
            run_pair(
                BobP1(params, secret, Variant1.BASE),
                AliceP1(params, Variant1.BASE, AliceSecrets1(5, 29)),
                Rng(31337),
            )[0]
            for _ in range(2)
        ]
        assert (
            runs[0].transcript.transcript_lines()
            == runs[1].transcript.transcript_lines()
        )
        assert runs[0].recovered == runs[1].recovered

    def test_ack_false_is_three_frames(self, desk_rsa):
        params, secret = desk_rsa
        bob_out, alice_out = run_pair(
            BobP1(params, secret, Variant1.BASE, nonce=13),
            AliceP1(params, Variant1.BASE, AliceSecrets1(5, 29)),
            ack=False,
        )
        assert bob_out.recovered == Recovered1(5, 29)
        assert len(bob_out.transcript.entries) == 3
        assert len(alice_out.transcript.entries) == 3

    def test_variant_mismatch(self, desk_rsa):
        params, secret = desk_rsa
        with pytest.raises(HandshakeError):
            run_pair(
                BobP1(params, secret, Variant1.BASE, nonce=13),
                AliceP1(params, Variant1.UNIT_R, AliceSecrets1(5, 29)),
            )

    def test_protocol_mismatch(self, desk_rsa, desk_dh):
        params, secret = desk_rsa
        with pytest.raises(HandshakeError):
            run_pair(
                BobP1(params, secret, Variant1.BASE, nonce=13),
                AliceP2(desk_dh, Variant2.ADDITIVE, AliceSecrets2(3, 10)),
            )


class TestMalformedPeer:
    def _drive_bob(self, desk_rsa, frames):
        params, secret = desk_rsa
        bob_end, alice_end = memory_pair()

        def peer():
            decode_msg(alice_end.recv())
            for frame in frames:
                alice_end.send(frame)

        thread = threading.Thread(target=peer, daemon=True)
        thread.start()
        try:
            with pytest.raises(HandshakeError):
                run_exchange(BobP1(params, secret, Variant1.BASE, nonce=13), bob_end)
        finally:
            thread.join(timeout=5)

    def test_two_field_deposit(self, desk_rsa):
        self._drive_bob(
            desk_rsa,
            [
                encode_msg(Message(Protocol.P1, Kind.DEPOSIT, (1, 2))),
                encode_msg(Message(Protocol.P1, Kind.LETTER, (1,))),
            ],
        )

    def test_letter_before_deposit(self, desk_rsa):
        self._drive_bob(desk_rsa, [encode_msg(Message(Protocol.P1, Kind.LETTER, (1,)))])


class TestTcpParity:
    def test_tcp_transcript_matches_memory(self, desk_rsa):
        params, secret = desk_rsa
        bob_role = BobP1(params, secret, Variant1.BASE, nonce=13)
        alice_role = AliceP1(params, Variant1.BASE, AliceSecrets1(5, 29))
        mem_bob, _ = run_pair(bob_role, alice_role)

        listener = tcp_listen("127.0.0.1", 0)
        port = listener.getsockname()[1]
        with ThreadPoolExecutor(max_workers=2) as pool:
            bob_future = pool.submit(
                lambda: run_exchange(bob_role, tcp_accept(listener))
            )
            alice_future = pool.submit(
                lambda: run_exchange(alice_role, tcp_connect("127.0.0.1", port))
            )
            tcp_bob = bob_future.result(timeout=30)
            alice_future.result(timeout=30)
        listener.close()
        assert tcp_bob.recovered == mem_bob.recovered
        assert (
            tcp_bob.transcript.transcript_lines()
            == mem_bob.transcript.transcript_lines()
        )


class TestTrope:
    def run_fixed(self, desk_rsa, text, **kwargs):
        params, secret = desk_rsa
        return run_trope_session(
            params,
            secret,
            5,
            text,
            rng=Rng(0),
            nonce=13,
            letter_key=29,
            **kwargs,
        )

    def test_honest_session(self, desk_rsa):
        outcome = self.run_fixed(desk_rsa, "three gold coins")
        assert outcome.manifest_ok is True
        assert outcome.recovered == Recovered1(5, 29)
        kinds = [m.kind for m in outcome.transcript.messages()]
        assert kinds == [
            Kind.CHALLENGE,
            Kind.DEPOSIT,
            Kind.LETTER,
            Kind.LETTER,
            Kind.ACK,
        ]
        protocols = {m.protocol for m in outcome.transcript.messages()}
        assert protocols == {Protocol.TROPE}

    def test_sealed_blob_unseals_with_oracle(self, desk_rsa):
        outcome = self.run_fixed(desk_rsa, "three gold coins")
        sealed = outcome.transcript.entries[3].message.blob
        assert len(sealed) == 4 + 16 + 32
        plain = _xor(sealed, _stream(29, len(sealed)))
        assert int.from_bytes(plain[:4], "big") == 16
        assert plain[4:20] == b"three gold coins"
        assert plain[20:] == hashlib.sha256(b"\x05" + b"three gold coins").digest()

    def test_empty_description_digest(self, desk_rsa):
        # with no description the sealed digest is the hash of the
        # secret's one-byte canonical encoding, nothing else mixed in
        outcome = self.run_fixed(desk_rsa, "")
        sealed = outcome.transcript.entries[3].message.blob
        plain = _xor(sealed, _stream(29, len(sealed)))
        assert plain[:4] == b"\x00\x00\x00\x00"
        assert plain[4:] == hashlib.sha256(b"\x05").digest()
        assert outcome.manifest_ok is True

    def test_sealed_blob_hides_plaintext(self, desk_rsa):
        outcome = self.run_fixed(desk_rsa, "three gold coins")
        sealed = outcome.transcript.entries[3].message.blob
        assert b"gold" not in sealed

    def test_wide_digest(self, desk_rsa):
        outcome = self.run_fixed(desk_rsa, "three gold coins", hash_alg="sha512")
        assert outcome.manifest_ok is True
        sealed = outcome.transcript.entries[3].message.blob
        assert len(sealed) == 4 + 16 + 64

    # blob bytes start at offset 13: header 9, no fields, 4 length bytes
    @pytest.mark.parametrize(
        "byte_index,region",
        [(13, "length prefix"), (20, "description"), (45, "digest")],
    )
    def test_single_bit_tamper_fails_check(self, desk_rsa, byte_index, region):
        params, secret = desk_rsa
        bob_end, alice_end = memory_pair()
        tampered_alice, _ = tap_attach(
            alice_end, tamper=(TamperRule(3, byte_index, 0),)
        )
        outcome = run_trope_session(
            params,
            secret,
            5,
            "three gold coins",
            rng=Rng(0),
            nonce=13,
            letter_key=29,
            transports=(bob_end, tampered_alice),
        )
        assert outcome.manifest_ok is False, f"tamper in {region} went unnoticed"
        # recovery itself is untouched; only the manifest verdict flips
        assert outcome.recovered == Recovered1(5, 29)

    def test_sampled_letter_key(self, desk_rsa):
        params, secret = desk_rsa
        outcome = run_trope_session(
            params, secret, 5, "iron nails", rng=Rng(77), nonce=13
        )
        assert outcome.manifest_ok is True
        assert outcome.recovered.secret == 5
