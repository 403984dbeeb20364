"""Command-line driver: key generation, exchanges, trope sessions, QKD runs.

Exit codes are stable: 0 success, 1 protocol or integrity failure,
2 usage error, 3 I/O error. PIGGYBANK_SEED serves as a seed fallback
when --seed is absent; with neither, entropy is used and the chosen
seed is noted on stderr so the run can be reproduced.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from enum import IntEnum
from pathlib import Path

from .errors import PiggyBankError
from .numtheory import DhParams, Rng, RsaParams, RsaSecret, gen_dh, gen_rsa, rand_residue
from .protocol1 import AliceSecrets1, Recovered1, Variant1
from .protocol2 import AliceSecrets2, Outcome2, Variant2
from .qkd import Scenario, compare_strategies, parse_scenario, render_csv, render_table
from .session import (
    AliceP1,
    AliceP2,
    BobP1,
    BobP2,
    SessionOutcome,
    run_exchange,
    run_pair,
    run_trope_alice,
    run_trope_bob,
    run_trope_session,
)
from .transport import tcp_accept, tcp_connect, tcp_listen


class ExitStatus(IntEnum):
    OK = 0
    PROTOCOL = 1
    USAGE = 2
    IO = 3


_VARIANTS1 = {
    "base": Variant1.BASE,
    "unit-r": Variant1.UNIT_R,
    "multiplicative": Variant1.MULTIPLICATIVE,
    "plain-r": Variant1.PLAIN_R,
    "plain-r-keyed": Variant1.PLAIN_R_KEYED,
}
_VARIANTS2 = {
    "additive": Variant2.ADDITIVE,
    "multiplicative": Variant2.MULTIPLICATIVE,
}

# Flag-supplied moduli are factored by trial division; beyond this bound
# the user must supply a key file generated by keygen instead.
_FACTOR_LIMIT = 1 << 21


def _note(text: str) -> None:
    print(text, file=sys.stderr)


def _resolve_seed(flag_seed: int | None, *, needed: bool = True) -> int:
    """Seed precedence: --seed, then PIGGYBANK_SEED, then entropy. Runs
    whose sampled values are all forced never touch entropy."""
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("PIGGYBANK_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"PIGGYBANK_SEED is not an integer: {env!r}") from None
    if not needed:
        return 0
    seed = int.from_bytes(os.urandom(8), "big")
    _note(f"note: using entropy seed {seed} (pass --seed to reproduce)")
    return seed


def _seed_override(flag_seed: int | None) -> int | None:
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("PIGGYBANK_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"PIGGYBANK_SEED is not an integer: {env!r}") from None


def _write_private(path: str, text: str) -> None:
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w") as handle:
        handle.write(text)


def _emit(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _factor_modulus(n: int) -> tuple[int, int]:
    limit = math.isqrt(n)
    if limit > _FACTOR_LIMIT:
        raise ValueError(
            "modulus too large to factor from flags; "
            "generate a key file with keygen and pass --secret-file"
        )
    factor = 3
    while factor <= limit:
        if n % factor == 0:
            return factor, n // factor
        factor += 2
    raise ValueError("modulus does not factor; need an odd composite n")


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return data


def _rsa_public(args: argparse.Namespace) -> RsaParams:
    if args.public_file:
        data = _load_json(args.public_file)
        return RsaParams(int(data["n"]), int(data["e"]))
    if args.n is None or args.e is None:
        raise ValueError("need --n and --e, or --public-file")
    return RsaParams(args.n, args.e)


def _rsa_private(args: argparse.Namespace) -> tuple[RsaParams, RsaSecret]:
    if args.secret_file:
        data = _load_json(args.secret_file)
        params = RsaParams(int(data["n"]), int(data["e"]))
        secret = RsaSecret(
            int(data["p"]), int(data["q"]), int(data["phi"]), int(data["d"])
        )
        return params, secret
    if args.n is None or args.e is None or args.d is None:
        raise ValueError("need --n, --e and --d, or --secret-file")
    params = RsaParams(args.n, args.e)
    p, q = _factor_modulus(args.n)
    phi = (p - 1) * (q - 1)
    if args.e * args.d % phi != 1:
        raise ValueError("--d is not the inverse of --e modulo phi(n)")
    return params, RsaSecret(p, q, phi, args.d)


def _print_outcome(outcome: SessionOutcome) -> None:
    recovered = outcome.recovered
    if isinstance(recovered, Recovered1):
        print(f"S={recovered.secret}")
        if recovered.key is not None:
            print(f"K={recovered.key}")
    elif isinstance(recovered, Outcome2):
        print(f"K={recovered.key}")
        print(f"shared={recovered.shared}")
    if outcome.manifest_ok is not None:
        print(f"manifest_ok={'true' if outcome.manifest_ok else 'false'}")
    for line in outcome.transcript.transcript_lines():
        print(line)


def _require_port(args: argparse.Namespace) -> None:
    if args.mode in ("listen", "connect") and args.port is None:
        raise ValueError(f"--port is required for --mode {args.mode}")


def cmd_keygen(args: argparse.Namespace) -> int:
    rng = Rng(_resolve_seed(args.seed))
    if args.kind == "rsa":
        params, secret = gen_rsa(args.bits, args.e, rng)
        public = {"kind": "rsa", "bits": args.bits, "n": params.n, "e": params.e}
        _emit(args.out, json.dumps(public, indent=2) + "\n")
        if args.private_out:
            private = {
                "kind": "rsa",
                "n": params.n,
                "e": params.e,
                "p": secret.p,
                "q": secret.q,
                "phi": secret.phi,
                "d": secret.d,
            }
            _write_private(args.private_out, json.dumps(private, indent=2) + "\n")
            _note(f"note: private key written to {args.private_out}")
    else:
        params = gen_dh(args.bits, rng)
        public = {"kind": "dh", "bits": args.bits, "p": params.p, "g": params.g}
        _emit(args.out, json.dumps(public, indent=2) + "\n")
    return int(ExitStatus.OK)


def _exchange_roles_p1(args: argparse.Namespace, rng: Rng):
    variant = _VARIANTS1.get(args.variant or "base")
    if variant is None:
        raise ValueError(f"unknown p1 variant {args.variant!r}")
    bob = alice = None
    if args.mode in ("inproc", "listen"):
        params, secret = _rsa_private(args)
        bob = BobP1(params, secret, variant, nonce=args.R)
    if args.mode in ("inproc", "connect"):
        params = bob.params if bob is not None else _rsa_public(args)
        s = args.S if args.S is not None else rand_residue(params.n, False, rng)
        k = args.K if args.K is not None else rng.randbelow(params.n)
        alice = AliceP1(params, variant, AliceSecrets1(s, k))
    return bob, alice


def _exchange_roles_p2(args: argparse.Namespace, rng: Rng):
    variant = _VARIANTS2.get(args.variant or "additive")
    if variant is None:
        raise ValueError(f"unknown p2 variant {args.variant!r}")
    if args.p is None or args.g is None:
        raise ValueError("need --p and --g for p2")
    params = DhParams(args.p, args.g)
    bob = alice = None
    if args.mode in ("inproc", "listen"):
        bob = BobP2(params, variant, nonce=args.R)
    if args.mode in ("inproc", "connect"):
        s = args.S if args.S is not None else 1 + rng.randbelow(params.p - 2)
        if args.K is not None:
            k = args.K
        elif variant is Variant2.ADDITIVE:
            k = rng.randbelow(params.p)
        else:
            k = 1 + rng.randbelow(params.p - 1)
        alice = AliceP2(params, variant, AliceSecrets2(s, k))
    return bob, alice


def cmd_exchange(args: argparse.Namespace) -> int:
    _require_port(args)
    samples = (args.mode != "connect" and args.R is None) or (
        args.mode != "listen" and (args.S is None or args.K is None)
    )
    base_rng = Rng(_resolve_seed(args.seed, needed=samples))
    build = _exchange_roles_p1 if args.protocol == "p1" else _exchange_roles_p2
    bob, alice = build(args, base_rng.derive(2))
    if args.mode == "inproc":
        bob_outcome, _ = run_pair(bob, alice, base_rng.derive(1))
        _print_outcome(bob_outcome)
    elif args.mode == "listen":
        listener = tcp_listen(args.host, args.port)
        _note(f"note: listening on {args.host}:{args.port}")
        try:
            transport = tcp_accept(listener)
        finally:
            listener.close()
        _print_outcome(run_exchange(bob, transport, base_rng.derive(1)))
    else:
        transport = tcp_connect(args.host, args.port)
        _print_outcome(run_exchange(alice, transport))
    return int(ExitStatus.OK)


def cmd_trope(args: argparse.Namespace) -> int:
    _require_port(args)
    samples = (args.mode != "connect" and args.R is None) or (
        args.mode != "listen" and args.K is None
    )
    rng = Rng(_resolve_seed(args.seed, needed=samples))
    if args.mode == "inproc":
        params, secret = _rsa_private(args)
        if args.S is None:
            raise ValueError("--S is required for a trope session")
        outcome = run_trope_session(
            params,
            secret,
            args.S,
            args.manifest,
            rng=rng,
            hash_alg=args.hash_id,
            nonce=args.R,
            letter_key=args.K,
        )
    elif args.mode == "listen":
        params, secret = _rsa_private(args)
        listener = tcp_listen(args.host, args.port)
        _note(f"note: listening on {args.host}:{args.port}")
        try:
            transport = tcp_accept(listener)
        finally:
            listener.close()
        outcome = run_trope_bob(
            params,
            secret,
            transport,
            rng=rng,
            nonce=args.R,
            hash_alg=args.hash_id,
        )
    else:
        params = _rsa_public(args)
        if args.S is None:
            raise ValueError("--S is required for a trope session")
        transport = tcp_connect(args.host, args.port)
        outcome = run_trope_alice(
            params,
            args.S,
            args.manifest,
            transport,
            rng=rng,
            letter_key=args.K,
            hash_alg=args.hash_id,
        )
    _print_outcome(outcome)
    if outcome.manifest_ok is False:
        return int(ExitStatus.PROTOCOL)
    return int(ExitStatus.OK)


_QKD_OVERRIDES = (
    "pulses",
    "p_noise",
    "eve_fraction",
    "passes",
    "sample_frac",
    "trials",
    "hash_id",
    "truncate_bits",
    "max_rounds",
)


def cmd_qkd(args: argparse.Namespace) -> int:
    if args.scenario:
        scenario = parse_scenario(Path(args.scenario).read_text(encoding="utf-8"))
    else:
        scenario = Scenario()
    overrides = {
        name: getattr(args, name)
        for name in _QKD_OVERRIDES
        if getattr(args, name) is not None
    }
    if overrides:
        scenario = replace(scenario, **overrides)
    seed = _seed_override(args.seed)
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    report = compare_strategies(scenario, Rng(scenario.seed))
    _emit(args.table_out, render_table(report))
    csv_path = args.csv_out or "qkd_report.csv"
    _emit(csv_path, render_csv(report))
    if csv_path != "-":
        _note(f"note: csv written to {csv_path}")
    return int(ExitStatus.OK)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="piggybank",
        description="Piggy-bank key transport protocols and a BB84 reconciliation study.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    keygen = sub.add_parser("keygen", help="generate RSA-style or safe-prime parameters")
    keygen.add_argument("kind", choices=("rsa", "dh"))
    keygen.add_argument("--bits", type=int, required=True)
    keygen.add_argument("--e", type=int, default=3, help="public exponent (rsa only)")
    keygen.add_argument("--seed", type=int)
    keygen.add_argument("--out", help="public parameters file (default stdout)")
    keygen.add_argument(
        "--private-out", help="private parameters file, written with mode 0600"
    )
    keygen.set_defaults(handler=cmd_keygen)

    def add_net_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--mode", choices=("inproc", "listen", "connect"), default="inproc"
        )
        p.add_argument("--host", default="127.0.0.1")
        p.add_argument("--port", type=int)
        p.add_argument("--seed", type=int)

    def add_rsa_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--n", type=int, help="modulus")
        p.add_argument("--e", type=int, help="public exponent")
        p.add_argument("--d", type=int, help="trapdoor exponent (box owner)")
        p.add_argument("--public-file", help="JSON public parameters from keygen")
        p.add_argument("--secret-file", help="JSON private parameters from keygen")

    exchange = sub.add_parser("exchange", help="run one two-party exchange")
    exchange.add_argument("protocol", choices=("p1", "p2"))
    exchange.add_argument("--variant", help="p1: base/unit-r/multiplicative/plain-r/plain-r-keyed; p2: additive/multiplicative")
    add_rsa_flags(exchange)
    exchange.add_argument("--p", type=int, help="prime modulus (p2)")
    exchange.add_argument("--g", type=int, help="generator (p2)")
    exchange.add_argument("--R", type=int, help="force Bob's nonce")
    exchange.add_argument("--S", type=int, help="force Alice's secret")
    exchange.add_argument("--K", type=int, help="force Alice's key value")
    add_net_flags(exchange)
    exchange.set_defaults(handler=cmd_exchange)

    trope = sub.add_parser("trope", help="exchange plus a sealed contents manifest")
    add_rsa_flags(trope)
    trope.add_argument("--S", type=int, help="the deposited secret")
    trope.add_argument("--K", type=int, help="force the letter key")
    trope.add_argument("--R", type=int, help="force Bob's nonce")
    trope.add_argument("--manifest", default="", help="contents description text")
    trope.add_argument("--hash", dest="hash_id", default="sha256")
    add_net_flags(trope)
    trope.set_defaults(handler=cmd_trope)

    qkd = sub.add_parser("qkd", help="compare cascade against digest-retry")
    qkd.add_argument("--scenario", help="key=value scenario file")
    qkd.add_argument("--pulses", type=int)
    qkd.add_argument("--p-noise", dest="p_noise", type=float)
    qkd.add_argument("--eve-fraction", dest="eve_fraction", type=float)
    qkd.add_argument("--passes", type=int)
    qkd.add_argument("--sample-frac", dest="sample_frac", type=float)
    qkd.add_argument("--trials", type=int)
    qkd.add_argument("--hash", dest="hash_id")
    qkd.add_argument("--truncate-bits", dest="truncate_bits", type=int)
    qkd.add_argument("--max-rounds", dest="max_rounds", type=int)
    qkd.add_argument("--seed", type=int)
    qkd.add_argument("--table-out", help="table file (default stdout)")
    qkd.add_argument("--csv-out", help="per-trial CSV (default qkd_report.csv)")
    qkd.set_defaults(handler=cmd_qkd)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else int(ExitStatus.USAGE)
    try:
        return args.handler(args)
    except PiggyBankError as exc:
        _note(f"error: {exc}")
        return int(ExitStatus.PROTOCOL)
    except OSError as exc:
        _note(f"error: {exc}")
        return int(ExitStatus.IO)
    except ValueError as exc:
        _note(f"error: {exc}")
        return int(ExitStatus.USAGE)


def entrypoint() -> None:
    sys.exit(main())
