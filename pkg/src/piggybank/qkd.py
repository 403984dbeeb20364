"""BB84-style channel simulator and the digest-retry reconciliation study.

The channel model supports an intercept-resend adversary measuring a
fraction of pulses in random bases, plus unconditional bit-flip noise.
Two post-processing strategies are compared on identical channels:

  * cascade: sacrifice a sample to estimate the error rate, then repair
    the remainder with parity reconciliation (piggyback.cascade);
  * digest: never repair, announce a truncated hash of the whole sifted
    key and throw the round away on mismatch, repeating until a round
    survives.

Everything is driven by a seeded Rng, so a scenario plus a seed
reproduces byte-identical reports.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np

from .cascade import CascadeConfig, cascade_reconcile
from .errors import NoKeyError
from .numtheory import Rng

BASIS_RECTILINEAR = 0
BASIS_DIAGONAL = 1


@dataclass(frozen=True)
class PulseTrain:
    """Sender-side record of one round: bit and basis per pulse."""

    bits: np.ndarray
    bases: np.ndarray

    def __post_init__(self) -> None:
        if self.bits.shape != self.bases.shape or self.bits.ndim != 1:
            raise ValueError("bits and bases must be equal-length 1-d arrays")

    def __len__(self) -> int:
        return int(self.bits.size)


@dataclass(frozen=True)
class ChannelModel:
    """p_noise flips each received bit independently; eve_fraction is the
    share of pulses measured and resent by an intercept-resend adversary."""

    p_noise: float = 0.0
    eve_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_noise <= 1.0:
            raise ValueError("p_noise must lie in [0, 1]")
        if not 0.0 <= self.eve_fraction <= 1.0:
            raise ValueError("eve_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SiftedPair:
    """Basis-matched bits on both sides, plus where they came from."""

    alice_key: np.ndarray
    bob_key: np.ndarray
    kept_indices: np.ndarray

    def __len__(self) -> int:
        return int(self.alice_key.size)


def generate_round(n_pulses: int, rng: Rng) -> tuple[PulseTrain, np.ndarray]:
    """Alice's random bits and bases, and Bob's independent basis choices."""
    if n_pulses < 1:
        raise ValueError("need at least one pulse")
    gen = rng.np
    bits = gen.integers(0, 2, n_pulses, dtype=np.uint8)
    bases = gen.integers(0, 2, n_pulses, dtype=np.uint8)
    bob_bases = gen.integers(0, 2, n_pulses, dtype=np.uint8)
    return PulseTrain(bits, bases), bob_bases


def channel_transmit(
    train: PulseTrain,
    bob_bases: np.ndarray,
    model: ChannelModel,
    rng: Rng,
) -> np.ndarray:
    """Bob's measured bits after the adversary and the noisy channel.

    A measurement in the pulse's own basis reproduces its bit; any basis
    mismatch yields a uniformly random outcome. The adversary resends in
    her measurement basis, so her wrong guesses poison Bob's statistics
    even where his basis matches Alice's.
    """
    n = len(train)
    if bob_bases.shape != train.bits.shape:
        raise ValueError("bob_bases length must match the pulse train")
    gen = rng.np
    send_bits, send_bases = train.bits, train.bases
    if model.eve_fraction > 0.0:
        hit = gen.random(n) < model.eve_fraction
        eve_bases = gen.integers(0, 2, n, dtype=np.uint8)
        eve_noise = gen.integers(0, 2, n, dtype=np.uint8)
        eve_bits = np.where(eve_bases == train.bases, train.bits, eve_noise)
        send_bits = np.where(hit, eve_bits, train.bits)
        send_bases = np.where(hit, eve_bases, train.bases)
    bob_noise = gen.integers(0, 2, n, dtype=np.uint8)
    bob_bits = np.where(bob_bases == send_bases, send_bits, bob_noise)
    if model.p_noise > 0.0:
        flips = gen.random(n) < model.p_noise
        bob_bits = bob_bits ^ flips.astype(np.uint8)
    return bob_bits.astype(np.uint8)


def sift(
    train: PulseTrain,
    bob_bases: np.ndarray,
    bob_bits: np.ndarray,
) -> SiftedPair:
    """Keep only the positions where Bob guessed Alice's basis."""
    kept = np.flatnonzero(train.bases == bob_bases)
    return SiftedPair(
        train.bits[kept].copy(), np.asarray(bob_bits)[kept].copy(), kept
    )


def estimate_qber(
    pair: SiftedPair,
    sample_frac: float,
    rng: Rng,
) -> tuple[float, SiftedPair]:
    """Sacrifice a random sample to estimate the error rate.

    Returns the estimate and the pair with the sampled positions removed
    (they are public now and cannot stay in the key).
    """
    if not 0.0 < sample_frac <= 1.0:
        raise ValueError("sample_frac must lie in (0, 1]")
    n = len(pair)
    if n == 0:
        raise ValueError("nothing to sample")
    m = math.ceil(sample_frac * n)
    perm = rng.np.permutation(n)
    sample = np.sort(perm[:m])
    rest = np.sort(perm[m:])
    estimate = float(
        np.count_nonzero(pair.alice_key[sample] != pair.bob_key[sample]) / m
    )
    remainder = SiftedPair(
        pair.alice_key[rest].copy(),
        pair.bob_key[rest].copy(),
        pair.kept_indices[rest].copy(),
    )
    return estimate, remainder


@dataclass(frozen=True)
class DigestConfig:
    hash_id: str = "sha256"
    truncate_bits: int = 256

    def __post_init__(self) -> None:
        try:
            size_bits = hashlib.new(self.hash_id).digest_size * 8
        except ValueError as exc:
            raise ValueError(f"unknown hash {self.hash_id!r}") from exc
        if not 32 <= self.truncate_bits <= size_bits:
            raise ValueError(
                f"truncate_bits must lie in [32, {size_bits}] for {self.hash_id}"
            )


def key_digest(key: np.ndarray, config: DigestConfig) -> int:
    """Truncated hash of a bit-string key: hash(8-byte bit count || packed
    bits), keeping the most significant truncate_bits of the digest."""
    digest = hashlib.new(config.hash_id)
    digest.update(int(key.size).to_bytes(8, "big"))
    digest.update(np.packbits(np.asarray(key, dtype=np.uint8)).tobytes())
    value = int.from_bytes(digest.digest(), "big")
    return value >> (digest.digest_size * 8 - config.truncate_bits)


def digest_verify(
    alice_key: np.ndarray, bob_key: np.ndarray, config: DigestConfig
) -> bool:
    return key_digest(alice_key, config) == key_digest(bob_key, config)


@dataclass(frozen=True)
class DigestRun:
    alice_key: np.ndarray
    bob_key: np.ndarray
    rounds: int
    pulses: int


def run_digest_protocol(
    n_pulses: int,
    model: ChannelModel,
    config: DigestConfig,
    max_rounds: int,
    rng: Rng,
) -> DigestRun:
    """Repeat whole rounds until the sifted keys' digests agree.

    No bits are sacrificed for estimation; the digest is the only check.
    Raises NoKeyError when max_rounds rounds all fail.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be positive")
    pulses = 0
    for round_no in range(1, max_rounds + 1):
        train, bob_bases = generate_round(n_pulses, rng)
        bob_bits = channel_transmit(train, bob_bases, model, rng)
        pair = sift(train, bob_bases, bob_bits)
        pulses += n_pulses
        if digest_verify(pair.alice_key, pair.bob_key, config):
            return DigestRun(pair.alice_key, pair.bob_key, round_no, pulses)
    raise NoKeyError(max_rounds, pulses)


# --- scenario files and the strategy comparison ---

_SCENARIO_FIELDS: dict[str, tuple[str, type]] = {
    "pulses": ("pulses", int),
    "p_noise": ("p_noise", float),
    "eve_fraction": ("eve_fraction", float),
    "passes": ("passes", int),
    "sample_frac": ("sample_frac", float),
    "trials": ("trials", int),
    "seed": ("seed", int),
    "hash": ("hash_id", str),
    "truncate_bits": ("truncate_bits", int),
    "max_rounds": ("max_rounds", int),
}


@dataclass(frozen=True)
class Scenario:
    pulses: int = 1024
    p_noise: float = 0.0
    eve_fraction: float = 0.0
    passes: int = 4
    sample_frac: float = 0.1
    trials: int = 100
    seed: int = 0
    hash_id: str = "sha256"
    truncate_bits: int = 256
    max_rounds: int = 10000

    def __post_init__(self) -> None:
        if self.pulses < 1:
            raise ValueError("pulses must be positive")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        ChannelModel(self.p_noise, self.eve_fraction)
        CascadeConfig(passes=self.passes)
        DigestConfig(self.hash_id, self.truncate_bits)
        if not 0.0 < self.sample_frac < 1.0:
            raise ValueError("sample_frac must lie in (0, 1)")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")


def parse_scenario(text: str) -> Scenario:
    """Parse a flat key=value scenario; '#' starts a comment.

    Unknown or duplicate keys are errors so a typo cannot silently run
    the default.
    """
    values: dict[str, object] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {line_no}: expected key=value, got {raw!r}")
        key, value = key.strip(), value.strip()
        if key not in _SCENARIO_FIELDS:
            raise ValueError(f"line {line_no}: unknown key {key!r}")
        attr, cast = _SCENARIO_FIELDS[key]
        if attr in values:
            raise ValueError(f"line {line_no}: duplicate key {key!r}")
        try:
            values[attr] = cast(value)
        except ValueError as exc:
            raise ValueError(f"line {line_no}: bad value for {key!r}: {exc}") from exc
    return Scenario(**values)


@dataclass(frozen=True)
class TrialRecord:
    strategy: str
    trial: int
    rounds: int
    disclosed_bits: int
    pulses: int
    accepted_bits: int
    residual_errors: int
    success: bool


@dataclass(frozen=True)
class StrategyStats:
    trials: int
    mean_rounds: float
    mean_disclosed_bits: float
    pulses_per_accepted_bit: float
    residual_error_rate: float
    success_rate: float


@dataclass(frozen=True)
class StrategyReport:
    scenario: Scenario
    cascade: StrategyStats
    digest: StrategyStats
    records: tuple[TrialRecord, ...]


def _cascade_trial(scenario: Scenario, trial: int, rng: Rng) -> TrialRecord:
    model = ChannelModel(scenario.p_noise, scenario.eve_fraction)
    rounds = 0
    pulses = 0
    while True:
        train, bob_bases = generate_round(scenario.pulses, rng)
        bob_bits = channel_transmit(train, bob_bases, model, rng)
        pair = sift(train, bob_bases, bob_bits)
        rounds += 1
        pulses += scenario.pulses
        # The sample is sacrificed, so the round must leave a remainder.
        if len(pair) >= 2 and math.ceil(scenario.sample_frac * len(pair)) < len(pair):
            break
    estimate, remainder = estimate_qber(pair, scenario.sample_frac, rng)
    config = CascadeConfig(
        passes=scenario.passes,
        qber_hint=estimate,
        shuffle_seed=rng.getrandbits(64),
    )
    result = cascade_reconcile(remainder, config)
    residual = int(
        np.count_nonzero(result.corrected_bob_key != remainder.alice_key)
    )
    return TrialRecord(
        strategy="cascade",
        trial=trial,
        rounds=rounds,
        disclosed_bits=result.parities_disclosed,
        pulses=pulses,
        accepted_bits=len(remainder),
        residual_errors=residual,
        success=result.success,
    )


def _digest_trial(scenario: Scenario, trial: int, rng: Rng) -> TrialRecord:
    model = ChannelModel(scenario.p_noise, scenario.eve_fraction)
    config = DigestConfig(scenario.hash_id, scenario.truncate_bits)
    try:
        run = run_digest_protocol(
            scenario.pulses, model, config, scenario.max_rounds, rng
        )
    except NoKeyError as exc:
        return TrialRecord(
            strategy="digest",
            trial=trial,
            rounds=exc.rounds,
            disclosed_bits=exc.rounds * scenario.truncate_bits,
            pulses=exc.pulses,
            accepted_bits=0,
            residual_errors=0,
            success=False,
        )
    residual = int(np.count_nonzero(run.bob_key != run.alice_key))
    return TrialRecord(
        strategy="digest",
        trial=trial,
        rounds=run.rounds,
        disclosed_bits=run.rounds * scenario.truncate_bits,
        pulses=run.pulses,
        accepted_bits=len(run.alice_key),
        residual_errors=residual,
        success=residual == 0,
    )


def _stats(records: list[TrialRecord]) -> StrategyStats:
    n = len(records)
    total_accepted = sum(r.accepted_bits for r in records)
    total_pulses = sum(r.pulses for r in records)
    total_residual = sum(r.residual_errors for r in records)
    return StrategyStats(
        trials=n,
        mean_rounds=sum(r.rounds for r in records) / n,
        mean_disclosed_bits=sum(r.disclosed_bits for r in records) / n,
        pulses_per_accepted_bit=(
            total_pulses / total_accepted if total_accepted else math.inf
        ),
        residual_error_rate=(
            total_residual / total_accepted if total_accepted else 0.0
        ),
        success_rate=sum(r.success for r in records) / n,
    )


def compare_strategies(scenario: Scenario, rng: Rng) -> StrategyReport:
    """Run both strategies over the same per-trial random streams.

    Trial t uses rng.derive(t); within a trial the cascade arm consumes
    the stream first and the digest arm continues on the same stream, so
    the two arms see identically distributed but independent channels.
    """
    records: list[TrialRecord] = []
    for trial in range(scenario.trials):
        trial_rng = rng.derive(trial)
        records.append(_cascade_trial(scenario, trial, trial_rng))
        records.append(_digest_trial(scenario, trial, trial_rng))
    cascade_records = [r for r in records if r.strategy == "cascade"]
    digest_records = [r for r in records if r.strategy == "digest"]
    return StrategyReport(
        scenario=scenario,
        cascade=_stats(cascade_records),
        digest=_stats(digest_records),
        records=tuple(records),
    )


def render_table(report: StrategyReport) -> str:
    """Human-readable comparison, one row per strategy."""
    header = (
        f"{'strategy':<10} {'trials':>6} {'rounds':>8} {'disclosed':>10} "
        f"{'pulses/bit':>11} {'residual':>10} {'success':>8}"
    )
    lines = [header, "-" * len(header)]
    for name, stats in (("cascade", report.cascade), ("digest", report.digest)):
        lines.append(
            f"{name:<10} {stats.trials:>6} {stats.mean_rounds:>8.3f} "
            f"{stats.mean_disclosed_bits:>10.1f} "
            f"{stats.pulses_per_accepted_bit:>11.3f} "
            f"{stats.residual_error_rate:>10.6f} {stats.success_rate:>8.3f}"
        )
    return "\n".join(lines) + "\n"


def render_csv(report: StrategyReport) -> str:
    """Machine-readable report: one row per (strategy, trial), then one
    summary row per strategy whose numeric columns carry the means
    (success carries the success rate). No timestamps, no environment:
    same scenario and seed give byte-identical output."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "strategy",
            "trial",
            "rounds",
            "disclosed_bits",
            "pulses",
            "accepted_bits",
            "residual_errors",
            "success",
        ]
    )
    for record in sorted(report.records, key=lambda r: (r.strategy, r.trial)):
        writer.writerow(
            [
                record.strategy,
                record.trial,
                record.rounds,
                record.disclosed_bits,
                record.pulses,
                record.accepted_bits,
                record.residual_errors,
                str(record.success).lower(),
            ]
        )
    for name, stats in (("cascade", report.cascade), ("digest", report.digest)):
        writer.writerow(
            [
                name,
                "summary",
                f"{stats.mean_rounds:.6f}",
                f"{stats.mean_disclosed_bits:.6f}",
                f"{stats.pulses_per_accepted_bit:.6f}",
                "",
                f"{stats.residual_error_rate:.6f}",
                f"{stats.success_rate:.6f}",
            ]
        )
    return out.getvalue()
