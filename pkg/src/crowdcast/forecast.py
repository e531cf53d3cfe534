"""Completion-cost forecasting and growth rules.

Forecasts how many additional responses a task needs before its estimated
parameter is confidently distinguishable from 1/2, estimates the expected
cost of a brand-new task under a prior, and decides when to grow the task
set instead of requesting another response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from crowdcast.core import PriorSpec, TaskState


class GrowthRule(str, Enum):
    """When to request a new task: unseen cost under the min or the median
    of the remaining costs of currently available tasks."""

    GR1 = "gr1"  # grow when expected unseen cost < min remaining cost
    GR2 = "gr2"  # grow when expected unseen cost < median remaining cost


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def n_min(delta: float) -> float:
    """Minimum expected completion cost, attained at theta = 0 or 1."""
    _check_delta(delta)
    return 2.0 * math.log(2.0 / delta)


def hoeffding_sample_size(delta: float, epsilon: float) -> int:
    """Smallest integer n with 2*exp(-2*n*eps^2) <= delta."""
    _check_delta(delta)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    ratio = math.log(2.0 / delta) / (2.0 * epsilon**2)
    # Guard against rounding noise pushing an exact-integer ratio just
    # above the boundary, which would inflate the ceiling by one.
    return math.ceil(ratio - 1e-9 * max(1.0, ratio))


def remaining_cost(pos_tally: int, n: int, delta: float) -> float:
    """Estimated additional responses needed to complete a task.

    Returns the raw real-valued estimate; values <= 0 mean the task is
    already complete.  At a tie (pos_tally/n == 1/2) the estimate assumes
    one more response arrives, which removes the singularity and charges
    for that assumed response.
    """
    _check_delta(delta)
    if n < 1:
        raise ValueError(f"remaining_cost needs n >= 1, got {n}")
    if not 0 <= pos_tally <= n:
        raise ValueError(f"pos_tally must lie in [0, {n}], got {pos_tally}")
    log_term = math.log(2.0 / delta)
    theta = pos_tally / n
    if theta != 0.5:
        return log_term / (2.0 * (theta - 0.5) ** 2) - n
    theta_next = pos_tally / (n + 1)
    return log_term / (2.0 * (theta_next - 0.5) ** 2) - n - 1


def available_set(tasks: Iterable[TaskState], delta: float) -> set:
    """Ids of tasks still needing responses.

    Tasks with n >= 1 are available when their remaining cost is positive;
    tasks with no responses yet are trivially incomplete and included.
    """
    avail = set()
    for task in tasks:
        if task.n == 0 or remaining_cost(task.pos_tally, task.n, delta) > 0:
            avail.add(task.task_id)
    return avail


def expected_unseen_cost(delta: float, n_max: float) -> float:
    """Expected minimum cost of completing an unseen task, uniform prior.

    Closed form sqrt(n_min*n_max)*(2 - eta) - n_min*(1 - eta) with
    eta = sqrt(n_min/n_max); collapses to n_min when n_max == n_min.
    """
    nm = n_min(delta)
    if n_max < nm:
        raise ValueError(f"n_max ({n_max}) must be at least n_min ({nm:.6g})")
    eta = math.sqrt(nm / n_max)
    return math.sqrt(nm * n_max) * (2.0 - eta) - nm * (1.0 - eta)


def expected_unseen_cost_mc(
    prior: PriorSpec,
    delta: float,
    n_max: float,
    samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo estimate of E[min(n(theta), n_max)] under ``prior``.

    n(theta) = ln(2/delta) / (2*(theta - 1/2)^2) is the completion cost of
    a task at parameter theta; the cap at n_max keeps the expectation
    finite for priors with mass near theta = 1/2.

    Numerical oracle for the general-prior expected cost.  Note: under a
    uniform prior this integral evaluates to 2*sqrt(n_min*n_max) - n_min,
    which does not coincide with the closed form used by the growth rules
    (see expected_unseen_cost); both are exposed deliberately.
    """
    _check_delta(delta)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    thetas = np.asarray(prior.sample(rng, samples), dtype=float)
    log_term = math.log(2.0 / delta)
    with np.errstate(divide="ignore"):
        costs = log_term / (2.0 * (thetas - 0.5) ** 2)
    return float(np.mean(np.minimum(costs, n_max)))


def should_grow(
    expected_unseen: float,
    remaining_costs: Sequence[float],
    rule: GrowthRule,
    *,
    include_proposal_cost: bool = False,
    proposal_cost: float = 1.0,
    response_cost: float = 1.0,
) -> bool:
    """Decide whether to request a new task.

    ``remaining_costs`` are the costs of the currently available tasks
    (zero-response tasks contribute the unseen expected cost).  An empty
    list makes the extremum vacuous and the rule fires.  With
    ``include_proposal_cost`` the comparison charges the proposal fee:
    f_t + f_r*E[n] against f_r*m_i.
    """
    costs = np.asarray(remaining_costs, dtype=float)
    if costs.size == 0:
        return True
    if rule == GrowthRule.GR1:
        threshold = float(costs.min())
    elif rule == GrowthRule.GR2:
        threshold = float(np.median(costs))
    else:
        raise ValueError(f"unknown growth rule {rule!r}")
    if include_proposal_cost:
        return proposal_cost + response_cost * expected_unseen < response_cost * threshold
    return expected_unseen < threshold


@dataclass(frozen=True)
class ForecastConfig:
    """Parameters of the cost forecaster.

    delta: confidence parameter of the Hoeffding bound, in (0, 1).
    n_max: theoretical cap on responses per task, used only inside the
        unseen-cost expectation (no task is ever hard-abandoned).
    rule: which growth rule compares unseen vs remaining costs.
    proposal_cost / response_cost: request fees f_t and f_r; the optional
        proposal-cost adjustment is off by default, reproducing the plain
        cost comparison.
    """

    delta: float = 0.9
    n_max: float = 10.0
    rule: GrowthRule = GrowthRule.GR1
    proposal_cost: float = 1.0
    response_cost: float = 1.0
    include_proposal_cost: bool = False

    def __post_init__(self):
        _check_delta(self.delta)
        nm = n_min(self.delta)
        if self.n_max < nm:
            raise ValueError(
                f"n_max ({self.n_max}) must be at least n_min(delta) = {nm:.6g}"
            )
        if self.proposal_cost < 0:
            raise ValueError("proposal_cost must be nonnegative")
        if self.response_cost <= 0:
            raise ValueError("response_cost must be positive")
        if not isinstance(self.rule, GrowthRule):
            object.__setattr__(self, "rule", GrowthRule(self.rule))

    @property
    def n_min(self) -> float:
        return n_min(self.delta)

    def expected_unseen(self) -> float:
        return expected_unseen_cost(self.delta, self.n_max)


@dataclass(frozen=True)
class CostEstimate:
    """Remaining-cost estimate for one task; <= 0 means complete."""

    task_id: object
    remaining: float

    @property
    def complete(self) -> bool:
        return self.remaining <= 0
