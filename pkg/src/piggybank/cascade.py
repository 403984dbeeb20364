"""Cascade parity reconciliation over a public channel.

Alice and Bob hold nearly equal bit strings; Bob repairs his copy using
block parities that Alice announces. A mismatched block is bisected down
to the single wrong bit (announcing one half's parity per level; the
other half's parity comes free). Later passes reshuffle the bits with a
doubled block size, and every block whose parity was ever announced or
inferred stays registered: when a flip lands inside an earlier block,
that block's parity flips too, re-exposing any second error it was
masking. Work always proceeds smallest-block-first, so one repair can
cascade back and forth across passes until no registered block is odd.

Alice's key doubles as ground truth in this simulator, so every flip is
audited: a flip that would corrupt a correct bit raises
CascadeAuditError instead of silently diverging.

Disclosure accounting charges exactly one bit per parity Alice
announces; inferred parities are free.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import count
from typing import TYPE_CHECKING

import numpy as np

from .errors import CascadeAuditError
from .numtheory import Rng

if TYPE_CHECKING:
    from .qkd import SiftedPair


@dataclass(frozen=True)
class CascadeConfig:
    passes: int = 4
    qber_hint: float = 0.0
    shuffle_seed: int = 0

    def __post_init__(self) -> None:
        if self.passes < 1:
            raise ValueError("at least one pass is required")
        if not 0.0 <= self.qber_hint < 1.0:
            raise ValueError("qber_hint must lie in [0, 1)")


@dataclass(frozen=True)
class CascadeResult:
    corrected_bob_key: np.ndarray
    parities_disclosed: int
    success: bool


def initial_block_size(qber_hint: float, length: int) -> int:
    """First-pass block size, roughly 0.73 / qber, floored at one error
    per block on average and capped implicitly by later doubling."""
    if length < 1:
        raise ValueError("length must be positive")
    if not 0.0 <= qber_hint < 1.0:
        raise ValueError("qber_hint must lie in [0, 1)")
    return max(1, round(0.73 / max(qber_hint, 1.0 / length)))


class _Block:
    __slots__ = ("order", "alice_par", "bob_par")

    def __init__(self, order: np.ndarray, alice_par: int, bob_par: int) -> None:
        self.order = order
        self.alice_par = alice_par
        self.bob_par = bob_par


def cascade_reconcile(pair: "SiftedPair", config: CascadeConfig) -> CascadeResult:
    """Repair Bob's key against Alice's, counting disclosed parity bits."""
    alice = np.asarray(pair.alice_key, dtype=np.uint8)
    bob = np.asarray(pair.bob_key, dtype=np.uint8).copy()
    if alice.shape != bob.shape or alice.ndim != 1:
        raise ValueError("keys must be equal-length 1-d bit arrays")
    n = int(alice.size)
    if n == 0:
        raise ValueError("nothing to reconcile")

    disclosed = 0
    heap: list[tuple[int, int, _Block]] = []
    seq = count()
    blocks_at: list[list[_Block]] = [[] for _ in range(n)]

    def announce(order: np.ndarray) -> int:
        nonlocal disclosed
        disclosed += 1
        return int(alice[order].sum() & 1)

    def register(order: np.ndarray, alice_par: int) -> _Block:
        block = _Block(order, alice_par, int(bob[order].sum() & 1))
        for i in order.tolist():
            blocks_at[i].append(block)
        if block.alice_par != block.bob_par:
            heapq.heappush(heap, (len(order), next(seq), block))
        return block

    def flip(i: int) -> None:
        if bob[i] == alice[i]:
            raise CascadeAuditError(f"flip at index {i} would corrupt a correct bit")
        bob[i] ^= 1
        for block in blocks_at[i]:
            block.bob_par ^= 1
            if block.alice_par != block.bob_par:
                heapq.heappush(heap, (len(block.order), next(seq), block))

    def bisect_to_error(block: _Block) -> None:
        work, alice_par = block.order, block.alice_par
        while len(work) > 1:
            mid = (len(work) + 1) // 2
            first, second = work[:mid], work[mid:]
            first_block = register(first, announce(first))
            second_block = register(second, alice_par ^ first_block.alice_par)
            if first_block.bob_par != first_block.alice_par:
                work, alice_par = first, first_block.alice_par
            else:
                work, alice_par = second, second_block.alice_par
        flip(int(work[0]))

    def settle() -> None:
        # Smallest odd block first; entries whose block was repaired in
        # the meantime are stale and skipped.
        while heap:
            _, _, block = heapq.heappop(heap)
            if block.alice_par != block.bob_par:
                bisect_to_error(block)

    k1 = initial_block_size(config.qber_hint, n)
    for pass_no in range(1, config.passes + 1):
        block_size = min(n, k1 << (pass_no - 1))
        if pass_no == 1:
            order = np.arange(n)
        else:
            order = Rng(config.shuffle_seed).derive(pass_no).np.permutation(n)
        for start in range(0, n, block_size):
            chunk = order[start : start + block_size]
            register(chunk, announce(chunk))
        settle()

    return CascadeResult(bob, disclosed, bool(np.array_equal(bob, alice)))
