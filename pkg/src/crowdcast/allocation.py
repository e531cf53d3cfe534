"""Task-selection policies: optimistic knowledge gradient and uniform random.

The optimistic knowledge-gradient policy scores each task by the best-case
one-step improvement in the posterior probability of labeling it correctly,
then requests a response for the highest-scoring task.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from crowdcast.core import TaskState

# Above this posterior size the exact big-integer binomial sum is replaced
# by the regularized incomplete beta function.
_EXACT_LIMIT = 64


class Policy(str, Enum):
    OPTKG = "optkg"
    RANDOM = "random"


@dataclass(frozen=True)
class BetaPosterior:
    """Beta posterior over a task's parameter; uniform prior gives
    alpha_post = 1 + pos_tally, beta_post = 1 + neg_tally."""

    alpha_post: int
    beta_post: int

    def __post_init__(self):
        if self.alpha_post < 1 or self.beta_post < 1:
            raise ValueError("posterior parameters must be >= 1")

    @classmethod
    def from_tallies(cls, pos_tally: int, neg_tally: int) -> "BetaPosterior":
        return cls(1 + pos_tally, 1 + neg_tally)


@lru_cache(maxsize=None)
def _prob_gt_half(alpha: int, beta: int) -> float:
    n = alpha + beta - 1
    if n <= _EXACT_LIMIT:
        # Binomial-tail identity: I_{1/2}(a, b) = 2^-n * sum_{j=a}^{n} C(n, j)
        total = sum(math.comb(n, j) for j in range(alpha, n + 1))
        return 1.0 - total / (1 << n)
    return 1.0 - float(special.betainc(alpha, beta, 0.5))


def prob_theta_gt_half(post: BetaPosterior) -> float:
    """Posterior probability that theta exceeds 1/2."""
    return _prob_gt_half(int(post.alpha_post), int(post.beta_post))


def h_value(post: BetaPosterior) -> float:
    """Probability of labeling the task correctly under the majority
    decision: max(P, 1-P) with P = Pr(theta > 1/2)."""
    p = prob_theta_gt_half(post)
    return max(p, 1.0 - p)


@lru_cache(maxsize=None)
def _score(alpha: int, beta: int) -> float:
    def h(a, b):
        p = _prob_gt_half(a, b)
        return max(p, 1.0 - p)

    return max(h(alpha + 1, beta), h(alpha, beta + 1)) - h(alpha, beta)


def optkg_score(post: BetaPosterior) -> float:
    """Optimistic one-step gain: best reachable h minus the current h."""
    return _score(int(post.alpha_post), int(post.beta_post))


def score_from_tallies(pos_tally: int, neg_tally: int) -> float:
    """Optimistic gain for a task with the given tallies (uniform prior)."""
    return _score(1 + pos_tally, 1 + neg_tally)


def select_task(
    tasks: Sequence[TaskState],
    policy: Policy,
    rng: np.random.Generator,
):
    """Pick a task id: argmax optimistic gain (ties uniform) or uniform draw."""
    if not tasks:
        raise ValueError("cannot select from an empty task set")
    if policy == Policy.RANDOM:
        return tasks[int(rng.integers(len(tasks)))].task_id
    scores = np.array([score_from_tallies(t.pos_tally, t.neg_tally) for t in tasks])
    best = np.flatnonzero(scores == scores.max())
    if len(best) == 1:
        return tasks[best[0]].task_id
    return tasks[int(rng.choice(best))].task_id
