"""Simulated verifiers: majority vote over noisy workers, or a fixed oracle.

A majority-vote verifier asks ``n`` (odd) independent workers, each wrong
with probability ``w``; the cost of a label is the number of votes and its
error probability is the chance that a majority is wrong.  A fixed oracle
answers at unit cost with a fixed error probability; with error 0 it is a
perfect verifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.stats import binom

from .model import AnnotatedDES

MAJORITY_VOTE = "majority-vote"
FIXED_ORACLE = "fixed-oracle"
DEFAULT_WORKER_ERROR = 0.3
DEFAULT_VOTE_CAP = 10001


class VerifierError(ValueError):
    pass


def majority_error(n: int, w: float) -> float:
    """P[Binomial(n, w) >= (n+1)/2] for odd ``n``."""
    if n < 1 or n % 2 == 0:
        raise VerifierError(f"vote count must be a positive odd number, got {n}")
    return float(binom.sf((n - 1) // 2, n, w))


def largest_odd_at_most(k: int) -> int:
    if k < 1:
        return 0
    return k if k % 2 else k - 1


def votes_needed(w: float, target_p: float, cap: int = DEFAULT_VOTE_CAP) -> int:
    """Smallest odd ``n`` whose majority error is at most ``target_p``."""
    if not 0 < w < 0.5:
        raise VerifierError(f"worker error {w} outside (0, 0.5)")
    if target_p <= 0:
        raise VerifierError(f"target probability {target_p} must be positive")
    if target_p >= w:
        return 1
    cap = largest_odd_at_most(cap)
    if majority_error(cap, w) > target_p:
        raise VerifierError(f"target {target_p} unreachable with at most {cap} votes at worker error {w}")
    lo, hi = 0, (cap - 1) // 2  # search over n = 2k+1
    while lo < hi:
        mid = (lo + hi) // 2
        if majority_error(2 * mid + 1, w) <= target_p:
            hi = mid
        else:
            lo = mid + 1
    return 2 * lo + 1


@dataclass(frozen=True)
class VerifierModel:
    kind: str = MAJORITY_VOTE
    error: float = DEFAULT_WORKER_ERROR  # worker error w, or the oracle's error e
    vote_cap: int = DEFAULT_VOTE_CAP

    def __post_init__(self):
        if self.kind == MAJORITY_VOTE:
            if not 0 < self.error <= 0.5 - 1e-6:
                raise VerifierError(f"worker error {self.error} must lie in (0, 0.5 - 1e-6]")
        elif self.kind == FIXED_ORACLE:
            if not 0 <= self.error <= 0.5:
                raise VerifierError(f"oracle error {self.error} outside [0, 0.5]")
        else:
            raise VerifierError(f"unknown verifier kind {self.kind!r}")

    @classmethod
    def perfect(cls) -> "VerifierModel":
        return cls(FIXED_ORACLE, 0.0)

    def cost_for(self, target_p: float) -> int:
        if self.kind == FIXED_ORACLE:
            return 1
        return votes_needed(self.error, target_p, self.vote_cap)

    def error_for(self, n: int) -> float:
        if self.kind == FIXED_ORACLE:
            return self.error
        return majority_error(n, self.error)

    def floor(self, budget_per_tuple: int) -> float:
        """Lowest error probability reachable with this many votes (1 if none)."""
        n = largest_odd_at_most(min(budget_per_tuple, self.vote_cap))
        if n == 0:
            return 1.0
        return self.error_for(n)

    def verify(self, truth: int, n: int, rng: np.random.Generator) -> tuple[int, float]:
        """Draw a label from ``n`` fresh votes; returns (label, error probability)."""
        if self.kind == FIXED_ORACLE:
            wrong = self.error > 0 and rng.random() < self.error
            return (1 - truth if wrong else truth), self.error
        wrong_votes = int(rng.binomial(n, self.error))
        label = 1 - truth if 2 * wrong_votes > n else truth
        return label, majority_error(n, self.error)


@dataclass
class Budget:
    total: int
    spent: int = 0

    def __post_init__(self):
        if self.total < 0:
            raise VerifierError("budget must be non-negative")

    @property
    def remaining(self) -> int:
        return self.total - self.spent

    def charge(self, n: int) -> None:
        if n > self.remaining:
            raise VerifierError(f"charge {n} exceeds remaining budget {self.remaining}")
        self.spent += n


@dataclass(frozen=True)
class VerificationOutcome:
    des: AnnotatedDES
    cost: int
    verified: tuple[int, ...] = ()
    skipped: tuple[int, ...] = ()
    label_changes: Mapping[int, int] = field(default_factory=dict)


def improve_verification(
    des: AnnotatedDES,
    tuples: Iterable[int],
    target_p: float,
    budget: Budget,
    truth: Mapping[int, int],
    model: VerifierModel,
    rng: np.random.Generator,
) -> VerificationOutcome:
    """Re-label ``tuples`` (ascending id) aiming at error ``target_p``.

    A tuple that cannot afford the needed votes gets the largest affordable
    odd count instead; with nothing affordable it is skipped.
    """
    need = model.cost_for(target_p)
    labels, errs = {}, {}
    verified, skipped = [], []
    cost = 0
    for tid in sorted(set(tuples)):
        n = need if budget.remaining >= need else largest_odd_at_most(budget.remaining)
        if n == 0:
            skipped.append(tid)
            continue
        label, err = model.verify(truth[tid], n, rng)
        budget.charge(n)
        cost += n
        labels[tid], errs[tid] = label, err
        verified.append(tid)
    if not verified:
        return VerificationOutcome(des, 0, (), tuple(skipped))
    changes = {t: l for t, l in labels.items() if des.label(t) != l}
    new = des.with_updates(labels=labels, errs=errs)
    return VerificationOutcome(new, cost, tuple(verified), tuple(skipped), changes)
