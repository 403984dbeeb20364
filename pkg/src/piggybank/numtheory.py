"""Arbitrary-precision modular arithmetic and parameter generation.

Every protocol value in this package is a plain Python int restricted to
nonnegative range (a natural); functions here validate that and keep all
results canonical. Randomness flows through an explicit, seedable Rng so
that any run can be reproduced bit for bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import NotInvertibleError

MASK64 = (1 << 64) - 1

# Trial-division bound below which primality is decided exactly: every
# composite under 2048 has a prime factor <= 43.
_EXACT_PRIME_BOUND = 2048


def _sieve(limit: int) -> tuple[int, ...]:
    flags = bytearray(b"\x01") * limit
    flags[0:2] = b"\x00\x00"
    for i in range(2, int(limit**0.5) + 1):
        if flags[i]:
            flags[i * i :: i] = b"\x00" * len(flags[i * i :: i])
    return tuple(i for i in range(limit) if flags[i])


_SMALL_PRIMES = _sieve(256)


class Rng:
    """Deterministic random source identified by (seed, algorithm).

    The same pair always produces the same stream; "pcg64" is the only
    algorithm implemented. The underlying numpy Generator is exposed via
    .np for bulk array sampling, and scalar helpers here stay exact for
    arbitrary-precision bounds.
    """

    def __init__(self, seed: int, algorithm: str = "pcg64"):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if algorithm != "pcg64":
            raise ValueError(f"unknown rng algorithm: {algorithm!r}")
        self.seed = seed
        self.algorithm = algorithm
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, algorithm={self.algorithm!r})"

    @property
    def np(self) -> np.random.Generator:
        return self._gen

    def derive(self, index: int) -> "Rng":
        """Child stream for trial `index`, derived as seed xor index."""
        if not 0 <= index <= MASK64:
            raise ValueError("derivation index must fit in 64 bits")
        return Rng(self.seed ^ index, self.algorithm)

    def getrandbits(self, k: int) -> int:
        if k < 0:
            raise ValueError("bit count must be nonnegative")
        if k == 0:
            return 0
        nbytes = (k + 7) // 8
        value = int.from_bytes(self._gen.bytes(nbytes), "big")
        return value >> (8 * nbytes - k)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling (no modulo bias)."""
        if n < 1:
            raise ValueError("bound must be positive")
        if n == 1:
            return 0
        k = (n - 1).bit_length()
        while True:
            x = self.getrandbits(k)
            if x < n:
                return x

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends included."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.randbelow(hi - lo + 1)

    def random(self) -> float:
        return float(self._gen.random())


def mod_exp(base: int, exp: int, modulus: int) -> int:
    """base**exp mod modulus by square-and-multiply."""
    if modulus < 2:
        raise ValueError("modulus must be at least 2")
    if base < 0 or exp < 0:
        raise ValueError("operands must be nonnegative")
    result = 1 % modulus
    base %= modulus
    while exp:
        if exp & 1:
            result = result * base % modulus
        base = base * base % modulus
        exp >>= 1
    return result


def mod_inv(a: int, m: int) -> int:
    """Inverse of a mod m via the extended Euclidean algorithm.

    Returns x with (a*x) mod m = 1 and 0 < x < m, or raises
    NotInvertibleError carrying gcd(a, m) when no inverse exists.
    """
    if m < 2:
        raise ValueError("modulus must be at least 2")
    if a < 0:
        raise ValueError("operand must be nonnegative")
    r0, r1 = m, a % m
    s0, s1 = 0, 1
    while r1:
        quot = r0 // r1
        r0, r1 = r1, r0 - quot * r1
        s0, s1 = s1, s0 - quot * s1
    if r0 != 1:
        raise NotInvertibleError(a, m, r0)
    return s0 % m


def _witness_rng(n: int) -> Rng:
    # Witnesses are a deterministic function of the candidate so that
    # repeated runs agree; blake2b spreads consecutive candidates apart.
    raw = n.to_bytes((n.bit_length() + 7) // 8 or 1, "big")
    seed = int.from_bytes(hashlib.blake2b(raw, digest_size=8).digest(), "big")
    return Rng(seed)


def is_probable_prime(n: int, rounds: int = 40) -> bool:
    """Miller-Rabin test with `rounds` witnesses.

    Exact (plain trial division) for n below 2048. Above that, False is
    always correct and True is wrong with probability at most 4**-rounds.
    """
    if rounds < 1:
        raise ValueError("at least one round required")
    if n < 2:
        return False
    if n < _EXACT_PRIME_BOUND:
        for p in _SMALL_PRIMES:
            if p * p > n:
                return True
            if n % p == 0:
                return n == p
        return True
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return False
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    witnesses = _witness_rng(n)
    for _ in range(rounds):
        a = 2 + witnesses.randbelow(n - 3)
        x = mod_exp(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _factorize(m: int) -> list[int]:
    """Distinct prime factors by trial division; for small m only."""
    factors = []
    d = 2
    while d * d <= m:
        if m % d == 0:
            factors.append(d)
            while m % d == 0:
                m //= d
        d += 1 if d == 2 else 2
    if m > 1:
        factors.append(m)
    return factors


def multiplicative_order(a: int, p: int) -> int:
    """Exact order of a in the group of units mod prime p.

    Factors p-1 by trial division, so intended for desk-scale p in tests
    and parameter checks, not for cryptographic sizes.
    """
    if p < 3 or not is_probable_prime(p, 16):
        raise ValueError("p must be an odd prime")
    if not 1 <= a <= p - 1:
        raise ValueError("a must lie in [1, p-1]")
    order = p - 1
    for f in _factorize(p - 1):
        while order % f == 0 and mod_exp(a, order // f, p) == 1:
            order //= f
    return order


@dataclass(frozen=True)
class RsaParams:
    """Public half of a trapdoor keypair: modulus and encryption exponent."""

    n: int
    e: int

    def __post_init__(self):
        if self.n < 15 or self.n % 2 == 0:
            raise ValueError("modulus must be an odd semiprime, at least 15")
        if self.e < 3 or self.e % 2 == 0:
            raise ValueError("encryption exponent must be odd and at least 3")


@dataclass(frozen=True)
class RsaSecret:
    """Private half: factorization, totient, and decryption exponent."""

    p: int
    q: int
    phi: int
    d: int

    def __post_init__(self):
        if self.p == self.q:
            raise ValueError("prime factors must be distinct")
        for f in (self.p, self.q):
            if f < 3 or not is_probable_prime(f, 16):
                raise ValueError("factors must be odd primes")
        if self.phi != (self.p - 1) * (self.q - 1):
            raise ValueError("phi is not (p-1)(q-1)")
        if not 0 < self.d < self.phi:
            raise ValueError("decryption exponent must lie in (0, phi)")


@dataclass(frozen=True)
class DhParams:
    """Prime modulus and a generator of the full multiplicative group."""

    p: int
    g: int

    def __post_init__(self):
        if self.p < 3 or not is_probable_prime(self.p, 16):
            raise ValueError("p must be prime")
        if not 2 <= self.g <= self.p - 1:
            raise ValueError("generator must lie in [2, p-1]")


def check_rsa_consistent(params: RsaParams, secret: RsaSecret) -> None:
    """Raise ValueError unless the two halves describe one keypair."""
    if secret.p * secret.q != params.n:
        raise ValueError("modulus does not match its factors")
    if params.e * secret.d % secret.phi != 1:
        raise ValueError("e*d is not 1 mod phi")


def _random_prime(bits: int, rng: Rng) -> int:
    # Top bit forced so a product of two such primes lands at full width.
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if is_probable_prime(candidate, 40):
            return candidate


def gen_rsa(bits: int, e: int, rng: Rng) -> tuple[RsaParams, RsaSecret]:
    """Fresh keypair with n of exactly `bits` bits and gcd(e, phi) = 1.

    Primes are resampled until the width and coprimality conditions hold,
    so the loop terminates with probability 1 for any odd e >= 3.
    """
    if bits < 8:
        raise ValueError("modulus below 8 bits cannot hold two distinct primes")
    if e < 3 or e % 2 == 0:
        raise ValueError("encryption exponent must be odd and at least 3")
    half_hi = (bits + 1) // 2
    half_lo = bits // 2
    while True:
        p = _random_prime(half_hi, rng)
        q = _random_prime(half_lo, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() != bits:
            continue
        phi = (p - 1) * (q - 1)
        if gcd(e, phi) != 1:
            continue
        return RsaParams(n, e), RsaSecret(p, q, phi, mod_inv(e, phi))


def gen_dh(bits: int, rng: Rng) -> DhParams:
    """Safe prime p = 2q+1 of `bits` bits plus a verified generator.

    Any unit's order divides 2q, so ruling out orders 1, 2 and q by two
    exponentiations proves g generates the whole group.
    """
    if bits < 4:
        raise ValueError("safe primes need at least 4 bits")
    while True:
        q = _random_prime(bits - 1, rng)
        p = 2 * q + 1
        if not is_probable_prime(p, 40):
            continue
        while True:
            g = 2 + rng.randbelow(p - 3)
            if mod_exp(g, 2, p) != 1 and mod_exp(g, q, p) != 1:
                return DhParams(p, g)


def rand_residue(n: int, require_unit: bool, rng: Rng) -> int:
    """Uniform residue in [1, n-1]; optionally restricted to units mod n."""
    if n < 2:
        raise ValueError("modulus must be at least 2")
    while True:
        x = 1 + rng.randbelow(n - 1)
        if not require_unit or gcd(x, n) == 1:
            return x
