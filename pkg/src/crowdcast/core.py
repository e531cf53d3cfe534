"""Binary-labeling task model: tallies, label inference, and accuracy.

Every task carries a pair of response tallies (count of +1 responses and
count of 0 responses) plus a hidden truth source used only to simulate
worker responses and to score inferred labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class TruthSource:
    """Hidden generative state of one task.

    ``prob`` is the Bernoulli rate used to simulate responses: the task
    parameter theta for synthetic tasks, or the empirical positive-response
    fraction for replayed dataset tasks.  ``label`` is the ground truth.
    """

    prob: float
    label: int
    replay: bool = False

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError(f"response probability must lie in [0, 1], got {self.prob}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def synthetic_truth(theta: float, rng: np.random.Generator) -> TruthSource:
    """Truth source for a synthetic task: label 1 iff theta > 1/2.

    A task at exactly theta == 1/2 gets a fair-coin label drawn once at
    creation, so generation is total and deterministic under a fixed seed.
    """
    if theta == 0.5:
        label = int(rng.integers(0, 2))
    else:
        label = int(theta > 0.5)
    return TruthSource(prob=float(theta), label=label)


def replay_truth(response_prob: float, gold_label: int) -> TruthSource:
    """Truth source for a replayed task: empirical rate plus gold label."""
    return TruthSource(prob=float(response_prob), label=int(gold_label), replay=True)


@dataclass(frozen=True)
class TaskState:
    """One task's identity, response tallies, and truth source."""

    task_id: object
    truth: TruthSource
    pos_tally: int = 0
    neg_tally: int = 0

    def __post_init__(self):
        if self.pos_tally < 0 or self.neg_tally < 0:
            raise ValueError("tallies must be nonnegative")

    @property
    def n(self) -> int:
        """Total responses received so far."""
        return self.pos_tally + self.neg_tally


def record_response(task: TaskState, response: int) -> TaskState:
    """Return a copy of ``task`` with the matching tally incremented."""
    if response not in (0, 1):
        raise ValueError(f"response must be 0 or 1, got {response}")
    if response == 1:
        return replace(task, pos_tally=task.pos_tally + 1)
    return replace(task, neg_tally=task.neg_tally + 1)


def theta_hat(task: TaskState) -> float:
    """Point estimate of the task parameter: pos_tally / n."""
    if task.n == 0:
        raise ValueError(f"task {task.task_id!r} has no responses; estimate undefined")
    return task.pos_tally / task.n


def infer_label(task: TaskState, rng: np.random.Generator) -> int:
    """Majority label; ties (including zero responses) break by fair coin."""
    if task.pos_tally > task.neg_tally:
        return 1
    if task.pos_tally < task.neg_tally:
        return 0
    return int(rng.integers(0, 2))


def accuracy(tasks: Sequence[TaskState], rng: np.random.Generator) -> float:
    """Fraction of tasks whose inferred label matches the truth."""
    if not tasks:
        raise ValueError("accuracy of an empty task set is undefined")
    correct = sum(infer_label(t, rng) == t.truth.label for t in tasks)
    return correct / len(tasks)


@dataclass
class BudgetLedger:
    """Request budget accounting; the clock equals requests spent."""

    total_budget: int
    spent: int = 0

    @property
    def clock(self) -> int:
        return self.spent

    @property
    def remaining(self) -> int:
        return self.total_budget - self.spent

    def charge(self, units: int = 1) -> None:
        if self.spent + units > self.total_budget:
            raise RuntimeError(
                f"budget exhausted: {self.spent} spent of {self.total_budget}, "
                f"cannot charge {units}"
            )
        self.spent += units


@dataclass(frozen=True)
class PriorSpec:
    """Prior distribution over task parameters theta.

    Variants: ``uniform`` on [0, 1], ``beta`` with positive shape
    parameters, or a ``point`` mass at a fixed theta.
    """

    kind: str = "uniform"
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = field(default=0.5)

    def __post_init__(self):
        if self.kind not in ("uniform", "beta", "point"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "beta" and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError("beta prior needs positive shape parameters")
        if self.kind == "point" and not 0.0 <= self.theta <= 1.0:
            raise ValueError("point-mass theta must lie in [0, 1]")

    @classmethod
    def uniform(cls) -> "PriorSpec":
        return cls(kind="uniform")

    @classmethod
    def beta_prior(cls, alpha: float, beta: float) -> "PriorSpec":
        return cls(kind="beta", alpha=alpha, beta=beta)

    @classmethod
    def point(cls, theta: float) -> "PriorSpec":
        return cls(kind="point", theta=theta)

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "uniform":
            return rng.random(size)
        if self.kind == "beta":
            return rng.beta(self.alpha, self.beta, size)
        if size is None:
            return self.theta
        return np.full(size, self.theta)
