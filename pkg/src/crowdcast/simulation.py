"""Run engine: interleaves growth decisions with allocator-driven responses.

One run starts from a seed of tasks and spends a request budget one unit at
a time.  Each step either grows the task set (when the growth rule fires)
or asks the allocation policy for a task and simulates a worker response to
it.  Matched non-growth baselines replay the same task count with the
response share of the budget available from the start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from crowdcast import forecast as fc
from crowdcast.allocation import Policy, score_from_tallies
from crowdcast.core import PriorSpec, TaskState, TruthSource, synthetic_truth
from crowdcast.datasets import CanonicalDataset, build_replay_pool


class BudgetExhausted(RuntimeError):
    pass


class PoolExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class WorkerMode:
    """How new tasks and worker responses are generated.

    synthetic: theta drawn from a fixed prior.
    increasing_cost: theta ~ Beta(c, c) with c = 1 + s*(tasks proposed so
        far), concentrating later tasks near theta = 1/2.
    replay: tasks drawn without replacement from a recorded dataset,
        responses simulated at each task's empirical positive rate.
    """

    kind: str = "synthetic"
    prior: PriorSpec = field(default_factory=PriorSpec.uniform)
    s: float = 0.0
    dataset: Optional[CanonicalDataset] = None

    def __post_init__(self):
        if self.kind not in ("synthetic", "increasing_cost", "replay"):
            raise ValueError(f"unknown worker mode {self.kind!r}")
        if self.s < 0:
            raise ValueError("cost-increase rate s must be nonnegative")
        if self.kind == "replay" and self.dataset is None:
            raise ValueError("replay mode needs a dataset")

    @classmethod
    def synthetic(cls, prior: Optional[PriorSpec] = None) -> "WorkerMode":
        return cls(kind="synthetic", prior=prior or PriorSpec.uniform())

    @classmethod
    def increasing_cost(cls, s: float) -> "WorkerMode":
        return cls(kind="increasing_cost", s=s)

    @classmethod
    def replay(cls, dataset: CanonicalDataset) -> "WorkerMode":
        return cls(kind="replay", dataset=dataset)


@dataclass(frozen=True)
class SimConfig:
    total_budget: int = 3000
    seed_tasks: int = 100
    forecast: fc.ForecastConfig = field(default_factory=fc.ForecastConfig)
    policy: Policy = Policy.OPTKG
    mode: WorkerMode = field(default_factory=WorkerMode.synthetic)
    rng_seed: int = 0
    replications: int = 1
    checkpoint_stride: int = 10

    def __post_init__(self):
        if self.total_budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.seed_tasks < 1:
            raise ValueError("need at least one seed task")
        if self.replications < 1 or self.checkpoint_stride < 1:
            raise ValueError("replications and checkpoint_stride must be >= 1")
        if self.mode.kind == "replay" and self.seed_tasks > self.mode.dataset.n_tasks:
            raise ValueError("seed_tasks exceeds replay dataset size")


@dataclass(frozen=True)
class Event:
    """One budget unit: a task proposal or a recorded response."""

    t: int
    kind: str  # "grow" | "respond"
    task_id: object
    response: Optional[int] = None


@dataclass
class RunTrace:
    events: list
    checkpoints: list  # (t, n_tasks, accuracy)
    final_tasks: list
    growth_times: list
    meta: dict = field(default_factory=dict)

    @property
    def n_final(self) -> int:
        return len(self.final_tasks)

    @property
    def final_accuracy(self) -> float:
        return self.checkpoints[-1][2]


def simulate_response(task: TaskState, rng: np.random.Generator) -> int:
    """Bernoulli response draw at the task's generative rate."""
    return int(rng.random() < task.truth.prob)


def draw_new_task(
    mode: WorkerMode,
    n_t: int,
    n_0: int,
    rng: np.random.Generator,
    task_id: object = None,
    pool: Optional[list] = None,
) -> TaskState:
    """Create the next proposed task under the given worker mode.

    Replay mode pops a uniformly drawn task from ``pool`` (the unrequested
    remainder of the dataset) and raises PoolExhausted when empty.
    """
    if mode.kind == "replay":
        if not pool:
            raise PoolExhausted("no unrequested tasks remain in the replay pool")
        i = int(rng.integers(len(pool)))
        pool[i], pool[-1] = pool[-1], pool[i]
        return pool.pop()
    if mode.kind == "increasing_cost":
        shape = 1.0 + mode.s * (n_t - n_0)
        theta = float(rng.beta(shape, shape))
    else:
        theta = float(mode.prior.sample(rng))
    return TaskState(task_id=task_id, truth=synthetic_truth(theta, rng))


class Engine:
    """Mutable state of one run; step() spends exactly one budget unit."""

    def __init__(
        self,
        tasks: Sequence[TaskState],
        *,
        budget: int,
        forecast_cfg: fc.ForecastConfig,
        policy: Policy,
        rng: np.random.Generator,
        eval_rng: np.random.Generator,
        mode: Optional[WorkerMode] = None,
        seed_tasks: Optional[int] = None,
        grow: bool = True,
        pool: Optional[list] = None,
    ):
        if not tasks:
            raise ValueError("engine needs at least one initial task")
        self.budget = int(budget)
        self.cfg = forecast_cfg
        self.policy = policy
        self.rng = rng
        self.eval_rng = eval_rng
        self.mode = mode or WorkerMode.synthetic()
        self.grow_enabled = grow
        self.pool = pool if pool is not None else []
        self.n0 = len(tasks) if seed_tasks is None else int(seed_tasks)
        self.expected_unseen = forecast_cfg.expected_unseen()

        cap = max(16, len(tasks) + (budget if grow else 0))
        self.n = len(tasks)
        self._prob = np.zeros(cap)
        self._label = np.zeros(cap, dtype=np.int64)
        self._a = np.zeros(cap, dtype=np.int64)
        self._b = np.zeros(cap, dtype=np.int64)
        self._m = np.zeros(cap)
        self._score = np.zeros(cap)
        self._ids: list = []
        self._replay = np.zeros(cap, dtype=bool)
        for task in tasks:
            self._append(task)
        self._next_auto_id = self.n

        self.spent = 0
        self.events: list = []
        self.growth_times: list = []

    def _append(self, task: TaskState) -> None:
        if len(self._ids) >= len(self._prob):
            for name in ("_prob", "_label", "_a", "_b", "_m", "_score", "_replay"):
                arr = getattr(self, name)
                setattr(self, name, np.concatenate([arr, np.zeros_like(arr)]))
        i = len(self._ids)
        self._ids.append(task.task_id)
        self._prob[i] = task.truth.prob
        self._label[i] = task.truth.label
        self._replay[i] = task.truth.replay
        self._a[i] = task.pos_tally
        self._b[i] = task.neg_tally
        self._refresh(i)
        self.n = len(self._ids)

    def _refresh(self, i: int) -> None:
        a, b = int(self._a[i]), int(self._b[i])
        n = a + b
        # zero-response tasks carry the prior's expected unseen cost
        self._m[i] = (
            self.expected_unseen if n == 0 else fc.remaining_cost(a, n, self.cfg.delta)
        )
        self._score[i] = score_from_tallies(a, b)

    def _should_grow(self) -> bool:
        m = self._m[: self.n]
        avail = m[m > 0.0]
        return fc.should_grow(
            self.expected_unseen,
            avail,
            self.cfg.rule,
            include_proposal_cost=self.cfg.include_proposal_cost,
            proposal_cost=self.cfg.proposal_cost,
            response_cost=self.cfg.response_cost,
        )

    def step(self) -> Event:
        if self.spent >= self.budget:
            raise BudgetExhausted(f"budget of {self.budget} already spent")
        self.spent += 1
        t = self.spent

        if self.grow_enabled and self._should_grow():
            can_grow = self.mode.kind != "replay" or bool(self.pool)
            if can_grow:
                task = draw_new_task(
                    self.mode, self.n, self.n0, self.rng,
                    task_id=self._next_auto_id, pool=self.pool,
                )
                self._next_auto_id += 1
                self._append(task)
                event = Event(t=t, kind="grow", task_id=task.task_id)
                self.events.append(event)
                self.growth_times.append(t)
                return event
            # replay pool exhausted: fall through to a response request

        if self.policy == Policy.RANDOM:
            i = int(self.rng.integers(self.n))
        else:
            scores = self._score[: self.n]
            best = np.flatnonzero(scores == scores.max())
            i = int(best[0]) if len(best) == 1 else int(self.rng.choice(best))
        y = int(self.rng.random() < self._prob[i])
        if y:
            self._a[i] += 1
        else:
            self._b[i] += 1
        self._refresh(i)
        event = Event(t=t, kind="respond", task_id=self._ids[i], response=y)
        self.events.append(event)
        return event

    def accuracy(self) -> float:
        a = self._a[: self.n]
        b = self._b[: self.n]
        pred = (a > b).astype(np.int64)
        ties = a == b
        k = int(ties.sum())
        if k:
            pred[ties] = self.eval_rng.integers(0, 2, size=k)
        return float(np.mean(pred == self._label[: self.n]))

    def tasks(self) -> list:
        out = []
        for i in range(self.n):
            truth = TruthSource(
                prob=float(self._prob[i]),
                label=int(self._label[i]),
                replay=bool(self._replay[i]),
            )
            out.append(
                TaskState(
                    task_id=self._ids[i],
                    truth=truth,
                    pos_tally=int(self._a[i]),
                    neg_tally=int(self._b[i]),
                )
            )
        return out


def _drive(engine: Engine, stride: int, meta: dict) -> RunTrace:
    checkpoints = [(0, engine.n, engine.accuracy())]
    while engine.spent < engine.budget:
        engine.step()
        if engine.spent % stride == 0 or engine.spent == engine.budget:
            checkpoints.append((engine.spent, engine.n, engine.accuracy()))
    return RunTrace(
        events=engine.events,
        checkpoints=checkpoints,
        final_tasks=engine.tasks(),
        growth_times=engine.growth_times,
        meta=meta,
    )


def _rng_for(seed: int, replication: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, replication, stream]))


def _synthetic_seed_tasks(config: SimConfig, rng: np.random.Generator) -> list:
    # seed tasks are drawn with zero proposals so far, so the
    # increasing-cost schedule starts from the uniform prior
    mode = config.mode
    tasks = []
    for i in range(config.seed_tasks):
        if mode.kind == "increasing_cost":
            theta = float(rng.beta(1.0, 1.0))
        else:
            theta = float(mode.prior.sample(rng))
        tasks.append(TaskState(task_id=i, truth=synthetic_truth(theta, rng)))
    return tasks


def run(config: SimConfig, replication: int = 0) -> RunTrace:
    """Execute one cost-forecasting run; deterministic in (config, seed,
    replication).  Seed tasks are free; every subsequent request costs one
    budget unit."""
    rng = _rng_for(config.rng_seed, replication, 0)
    eval_rng = _rng_for(config.rng_seed, replication, 1)

    if config.mode.kind == "replay":
        seed_states, pool = build_replay_pool(
            config.mode.dataset, config.seed_tasks, rng
        )
    else:
        seed_states = _synthetic_seed_tasks(config, rng)
        pool = []

    engine = Engine(
        seed_states,
        budget=config.total_budget,
        forecast_cfg=config.forecast,
        policy=config.policy,
        rng=rng,
        eval_rng=eval_rng,
        mode=config.mode,
        seed_tasks=config.seed_tasks,
        grow=True,
        pool=pool,
    )
    meta = {
        "variant": "forecast",
        "rule": config.forecast.rule.value,
        "replication": replication,
        "budget": config.total_budget,
        "seed_tasks": config.seed_tasks,
        "policy": config.policy.value,
    }
    return _drive(engine, config.checkpoint_stride, meta)


def run_baseline(matched: RunTrace, config: SimConfig, replication: int = 0) -> RunTrace:
    """Matched non-growth control for one forecasting realization.

    All of the matched run's final task count is available from t = 0 and
    the budget is reduced to the response share B - (N_final - N_0).
    Synthetic task parameters are regenerated from an independent stream;
    replay keeps the same task identities with fresh tallies.
    """
    n_final = len(matched.final_tasks)
    budget = config.total_budget - (n_final - config.seed_tasks)
    rng = _rng_for(config.rng_seed, replication, 2)
    eval_rng = _rng_for(config.rng_seed, replication, 3)

    mode = config.mode
    if mode.kind == "replay":
        tasks = [
            TaskState(task_id=t.task_id, truth=t.truth) for t in matched.final_tasks
        ]
    else:
        tasks = _synthetic_seed_tasks(config, rng)
        for k in range(n_final - config.seed_tasks):
            if mode.kind == "increasing_cost":
                shape = 1.0 + mode.s * k
                theta = float(rng.beta(shape, shape))
            else:
                theta = float(mode.prior.sample(rng))
            tasks.append(
                TaskState(task_id=config.seed_tasks + k, truth=synthetic_truth(theta, rng))
            )

    engine = Engine(
        tasks,
        budget=budget,
        forecast_cfg=config.forecast,
        policy=config.policy,
        rng=rng,
        eval_rng=eval_rng,
        mode=mode,
        seed_tasks=config.seed_tasks,
        grow=False,
    )
    meta = dict(matched.meta)
    meta.update({"variant": "baseline", "replication": replication, "budget": budget})
    return _drive(engine, config.checkpoint_stride, meta)


def run_fixed(
    tasks: Sequence[TaskState],
    budget: int,
    *,
    policy: Policy = Policy.OPTKG,
    checkpoint_stride: int = 10,
    seed: int = 0,
    replication: int = 0,
    forecast_cfg: Optional[fc.ForecastConfig] = None,
) -> RunTrace:
    """Allocator-only run over a fixed task set (no growth)."""
    rng = _rng_for(seed, replication, 4)
    eval_rng = _rng_for(seed, replication, 5)
    engine = Engine(
        list(tasks),
        budget=budget,
        forecast_cfg=forecast_cfg or fc.ForecastConfig(),
        policy=policy,
        rng=rng,
        eval_rng=eval_rng,
        grow=False,
    )
    meta = {
        "variant": "fixed",
        "rule": "",
        "replication": replication,
        "budget": budget,
        "seed_tasks": len(tasks),
        "policy": policy.value,
    }
    return _drive(engine, checkpoint_stride, meta)


def run_replications(config: SimConfig, with_baselines: bool = False):
    """Run all replications of a config; optionally with matched baselines."""
    traces = [run(config, r) for r in range(config.replications)]
    if not with_baselines:
        return traces
    baselines = [
        run_baseline(trace, config, r) for r, trace in enumerate(traces)
    ]
    return traces, baselines
