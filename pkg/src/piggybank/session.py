"""Endpoint state machines that run the exchanges over a transport.

Each exchange is four frames: Bob opens with a challenge carrying the
variant code, Alice answers with deposit and letter frames, Bob closes
with an ack once recovery succeeds. Either endpoint can be driven over
any Transport, and every endpoint records its own wire transcript via an
internal tap.

The trope flow layers a sealed contents manifest on top of a BASE
protocol-1 exchange: Alice's key value doubles as a stream-cipher key
for a fifth frame whose plaintext names the deposited goods and carries
a digest binding them to the secret. Bob reports whether that digest
checks out; a failed check is a verdict, not an abort.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import HandshakeError, PiggyBankError, TransportClosedError
from .numtheory import Rng, RsaParams, RsaSecret, DhParams
from .protocol1 import (
    AliceSecrets1,
    Recovered1,
    Response1,
    Variant1,
    p1_deposit,
    p1_init,
    p1_recover,
)
from .protocol2 import (
    AliceSecrets2,
    Outcome2,
    Response2,
    Variant2,
    p2_deposit,
    p2_init,
    p2_recover,
)
from .transport import TapLog, Transport, memory_pair, tap_attach
from .wire import Kind, Message, Protocol, decode_msg, encode_msg, natural_bytes

_JOIN_TIMEOUT = 60.0


@dataclass(frozen=True)
class BobP1:
    params: RsaParams
    secret: RsaSecret
    variant: Variant1
    nonce: int | None = None  # forced nonce; sampled from rng when None


@dataclass(frozen=True)
class AliceP1:
    params: RsaParams
    variant: Variant1
    secrets: AliceSecrets1


@dataclass(frozen=True)
class BobP2:
    params: DhParams
    variant: Variant2
    nonce: int | None = None


@dataclass(frozen=True)
class AliceP2:
    params: DhParams
    variant: Variant2
    secrets: AliceSecrets2


@dataclass(frozen=True)
class SessionOutcome:
    """What one endpoint got out of a session.

    recovered is None on the depositing side. manifest_ok is None except
    for the trope box owner, who reports the digest verdict here.
    """

    recovered: Recovered1 | Outcome2 | None
    manifest_ok: bool | None
    transcript: TapLog


def _expect(transport: Transport, protocol: Protocol, kind: Kind) -> Message:
    msg = decode_msg(transport.recv())
    if msg.protocol is not protocol:
        raise HandshakeError(
            f"peer speaks {msg.protocol.name}, this endpoint runs {protocol.name}"
        )
    if msg.kind is not kind:
        raise HandshakeError(f"expected {kind.name}, got {msg.kind.name}")
    return msg


def _send(transport: Transport, msg: Message) -> None:
    transport.send(encode_msg(msg))


def run_exchange(
    role: BobP1 | AliceP1 | BobP2 | AliceP2,
    transport: Transport,
    rng: Rng | None = None,
    *,
    ack: bool = True,
) -> SessionOutcome:
    """Drive one endpoint through a full exchange, then close the transport."""
    wrapped, log = tap_attach(transport)
    try:
        if isinstance(role, BobP1):
            recovered: Recovered1 | Outcome2 | None = _bob_p1(role, wrapped, rng, ack)
        elif isinstance(role, AliceP1):
            _alice_p1(role, wrapped, ack)
            recovered = None
        elif isinstance(role, BobP2):
            recovered = _bob_p2(role, wrapped, rng, ack)
        elif isinstance(role, AliceP2):
            _alice_p2(role, wrapped, ack)
            recovered = None
        else:
            raise TypeError(f"not a session role: {role!r}")
        return SessionOutcome(recovered, None, log)
    finally:
        transport.close()


def _bob_p1(role: BobP1, t: Transport, rng: Rng | None, ack: bool) -> Recovered1:
    state = p1_init(role.params, role.secret, role.variant, rng, nonce=role.nonce)
    _send(
        t,
        Message(
            Protocol.P1, Kind.CHALLENGE, (int(role.variant), state.challenge_sent)
        ),
    )
    deposit = _expect(t, Protocol.P1, Kind.DEPOSIT)
    letter = _expect(t, Protocol.P1, Kind.LETTER)
    if len(deposit.fields) != 1 or len(letter.fields) != 1:
        raise HandshakeError("deposit and letter each carry exactly one field")
    recovered = p1_recover(state, Response1(deposit.fields[0], letter.fields[0]))
    if ack:
        _send(t, Message(Protocol.P1, Kind.ACK))
    return recovered


def _alice_p1(role: AliceP1, t: Transport, ack: bool) -> None:
    challenge_msg = _expect(t, Protocol.P1, Kind.CHALLENGE)
    if len(challenge_msg.fields) != 2:
        raise HandshakeError("challenge carries a variant code and a value")
    variant_code, challenge = challenge_msg.fields
    if variant_code != int(role.variant):
        raise HandshakeError(
            f"peer runs variant {variant_code}, "
            f"this endpoint is configured for {int(role.variant)}"
        )
    response = p1_deposit(role.params, role.variant, challenge, role.secrets)
    _send(t, Message(Protocol.P1, Kind.DEPOSIT, (response.deposit,)))
    _send(t, Message(Protocol.P1, Kind.LETTER, (response.letter,)))
    if ack:
        _expect(t, Protocol.P1, Kind.ACK)


def _bob_p2(role: BobP2, t: Transport, rng: Rng | None, ack: bool) -> Outcome2:
    state = p2_init(role.params, rng, nonce=role.nonce)
    _send(
        t,
        Message(
            Protocol.P2, Kind.CHALLENGE, (int(role.variant), state.challenge_sent)
        ),
    )
    deposit = _expect(t, Protocol.P2, Kind.DEPOSIT)
    letter = _expect(t, Protocol.P2, Kind.LETTER)
    if len(deposit.fields) != 1 or len(letter.fields) != 1:
        raise HandshakeError("deposit and letter each carry exactly one field")
    outcome = p2_recover(
        state, role.variant, Response2(deposit.fields[0], letter.fields[0])
    )
    if ack:
        _send(t, Message(Protocol.P2, Kind.ACK))
    return outcome


def _alice_p2(role: AliceP2, t: Transport, ack: bool) -> None:
    challenge_msg = _expect(t, Protocol.P2, Kind.CHALLENGE)
    if len(challenge_msg.fields) != 2:
        raise HandshakeError("challenge carries a variant code and a value")
    variant_code, challenge = challenge_msg.fields
    if variant_code != int(role.variant):
        raise HandshakeError(
            f"peer runs variant {variant_code}, "
            f"this endpoint is configured for {int(role.variant)}"
        )
    response = p2_deposit(role.params, role.variant, challenge, role.secrets)
    _send(t, Message(Protocol.P2, Kind.DEPOSIT, (response.deposit,)))
    _send(t, Message(Protocol.P2, Kind.LETTER, (response.letter,)))
    if ack:
        _expect(t, Protocol.P2, Kind.ACK)


def _join_pair(futures):
    results, errors = [], []
    for future in futures:
        try:
            results.append(future.result(timeout=_JOIN_TIMEOUT))
        except Exception as exc:  # re-raised below, most meaningful first
            errors.append(exc)
            results.append(None)
    if errors:
        for exc in errors:
            if isinstance(exc, PiggyBankError) and not isinstance(
                exc, TransportClosedError
            ):
                raise exc
        raise errors[0]
    return results


def run_pair(
    bob: BobP1 | BobP2,
    alice: AliceP1 | AliceP2,
    rng: Rng | None = None,
    *,
    ack: bool = True,
) -> tuple[SessionOutcome, SessionOutcome]:
    """Run both endpoints over an in-memory pair; rng feeds Bob's nonce.

    When one endpoint fails and the other then dies of the dropped
    connection, the meaningful error is the one re-raised.
    """
    bob_end, alice_end = memory_pair()
    with ThreadPoolExecutor(max_workers=2) as pool:
        bob_future = pool.submit(run_exchange, bob, bob_end, rng, ack=ack)
        alice_future = pool.submit(run_exchange, alice, alice_end, ack=ack)
        bob_outcome, alice_outcome = _join_pair([bob_future, alice_future])
    return bob_outcome, alice_outcome


# --- trope: sealed contents manifest on top of a BASE exchange ---


def _keystream(key: int, length: int, hash_alg: str) -> bytes:
    """Counter-mode stream: hash(key bytes || 8-byte counter), concatenated."""
    out = bytearray()
    counter = 0
    while len(out) < length:
        digest = hashlib.new(hash_alg)
        digest.update(natural_bytes(key))
        digest.update(counter.to_bytes(8, "big"))
        out += digest.digest()
        counter += 1
    return bytes(out[:length])


def _xor(data: bytes, mask: bytes) -> bytes:
    return bytes(a ^ b for a, b in zip(data, mask))


def _manifest_digest(secret: int, description: bytes, hash_alg: str) -> bytes:
    # Binds the deposited secret AND the stated contents: a manifest must
    # not survive edits to either half. With an empty description this is
    # exactly the hash of the secret's canonical encoding.
    digest = hashlib.new(hash_alg)
    digest.update(natural_bytes(secret))
    digest.update(description)
    return digest.digest()


def _pack_manifest(description: bytes, digest: bytes) -> bytes:
    return len(description).to_bytes(4, "big") + description + digest


def _parse_manifest(plain: bytes, digest_len: int) -> tuple[bytes, bytes] | None:
    if len(plain) < 4:
        return None
    desc_len = int.from_bytes(plain[:4], "big")
    if 4 + desc_len + digest_len != len(plain):
        return None
    return plain[4 : 4 + desc_len], plain[4 + desc_len :]


def run_trope_alice(
    params: RsaParams,
    deposit_secret: int,
    manifest_text: str,
    transport: Transport,
    *,
    rng: Rng | None = None,
    letter_key: int | None = None,
    hash_alg: str = "sha256",
    ack: bool = True,
) -> SessionOutcome:
    """Deposit a secret plus a sealed manifest naming what was deposited."""
    wrapped, log = tap_attach(transport)
    try:
        challenge_msg = _expect(wrapped, Protocol.TROPE, Kind.CHALLENGE)
        if len(challenge_msg.fields) != 2:
            raise HandshakeError("challenge carries a variant code and a value")
        variant_code, challenge = challenge_msg.fields
        if variant_code != int(Variant1.BASE):
            raise HandshakeError("trope sessions run the BASE variant only")
        if letter_key is None:
            if rng is None:
                raise ValueError("sampling a letter key requires an rng")
            letter_key = rng.randbelow(params.n)
        secrets = AliceSecrets1(deposit_secret, letter_key)
        response = p1_deposit(params, Variant1.BASE, challenge, secrets)
        _send(wrapped, Message(Protocol.TROPE, Kind.DEPOSIT, (response.deposit,)))
        _send(wrapped, Message(Protocol.TROPE, Kind.LETTER, (response.letter,)))
        description = manifest_text.encode("utf-8")
        digest = _manifest_digest(deposit_secret, description, hash_alg)
        plain = _pack_manifest(description, digest)
        sealed = _xor(plain, _keystream(letter_key, len(plain), hash_alg))
        _send(wrapped, Message(Protocol.TROPE, Kind.LETTER, (), sealed))
        if ack:
            _expect(wrapped, Protocol.TROPE, Kind.ACK)
        return SessionOutcome(None, None, log)
    finally:
        transport.close()


def run_trope_bob(
    params: RsaParams,
    secret: RsaSecret,
    transport: Transport,
    *,
    rng: Rng | None = None,
    nonce: int | None = None,
    hash_alg: str = "sha256",
    ack: bool = True,
) -> SessionOutcome:
    """Open the box: recover S and K, unseal the manifest, check its digest."""
    wrapped, log = tap_attach(transport)
    try:
        state = p1_init(params, secret, Variant1.BASE, rng, nonce=nonce)
        _send(
            wrapped,
            Message(
                Protocol.TROPE,
                Kind.CHALLENGE,
                (int(Variant1.BASE), state.challenge_sent),
            ),
        )
        deposit = _expect(wrapped, Protocol.TROPE, Kind.DEPOSIT)
        letter = _expect(wrapped, Protocol.TROPE, Kind.LETTER)
        if len(deposit.fields) != 1 or len(letter.fields) != 1:
            raise HandshakeError("deposit and letter each carry exactly one field")
        recovered = p1_recover(state, Response1(deposit.fields[0], letter.fields[0]))
        sealed_msg = _expect(wrapped, Protocol.TROPE, Kind.LETTER)
        if sealed_msg.fields:
            raise HandshakeError("the sealed manifest carries only a blob")
        plain = _xor(
            sealed_msg.blob,
            _keystream(recovered.key, len(sealed_msg.blob), hash_alg),
        )
        digest_len = hashlib.new(hash_alg).digest_size
        parsed = _parse_manifest(plain, digest_len)
        manifest_ok = parsed is not None and (
            _manifest_digest(recovered.secret, parsed[0], hash_alg) == parsed[1]
        )
        if ack:
            _send(wrapped, Message(Protocol.TROPE, Kind.ACK))
        return SessionOutcome(recovered, manifest_ok, log)
    finally:
        transport.close()


def run_trope_session(
    params: RsaParams,
    secret: RsaSecret,
    deposit_secret: int,
    manifest_text: str,
    *,
    rng: Rng,
    hash_alg: str = "sha256",
    nonce: int | None = None,
    letter_key: int | None = None,
    transports: tuple[Transport, Transport] | None = None,
    ack: bool = True,
) -> SessionOutcome:
    """Drive both trope endpoints and return the box owner's outcome.

    transports, when given, is the (bob_end, alice_end) pair to run over,
    e.g. pre-wrapped in a tampering tap; default is a fresh memory pair.
    The rng is split deterministically between the two threads.
    """
    if transports is None:
        transports = memory_pair()
    bob_end, alice_end = transports
    with ThreadPoolExecutor(max_workers=2) as pool:
        bob_future = pool.submit(
            run_trope_bob,
            params,
            secret,
            bob_end,
            rng=rng.derive(1),
            nonce=nonce,
            hash_alg=hash_alg,
            ack=ack,
        )
        alice_future = pool.submit(
            run_trope_alice,
            params,
            deposit_secret,
            manifest_text,
            alice_end,
            rng=rng.derive(2),
            letter_key=letter_key,
            hash_alg=hash_alg,
            ack=ack,
        )
        bob_outcome, _ = _join_pair([bob_future, alice_future])
    return bob_outcome
