"""Canonical dataset representation and loading for replay experiments.

A dataset on disk is a pair of UTF-8 CSV files referenced by a manifest:

    manifest:  header ``name,responses_path,gold_path`` (paths relative to
               the manifest file)
    responses: header ``task_id,worker_id,response`` with response in {0,1}
    gold:      header ``task_id,gold`` with gold in {0,1}

Replay simulates a worker response to a task as a Bernoulli draw with the
task's empirical positive-response fraction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from crowdcast.core import TaskState, replay_truth


class DatasetError(ValueError):
    """Malformed dataset file or manifest."""


@dataclass(frozen=True)
class DatasetTask:
    task_id: str
    gold_label: int
    responses: tuple


@dataclass(frozen=True)
class CanonicalDataset:
    name: str
    tasks: tuple

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_responses(self) -> int:
        return sum(len(t.responses) for t in self.tasks)


def replay_prob(task: DatasetTask) -> float:
    """Empirical fraction of positive responses for one task."""
    if not task.responses:
        raise DatasetError(f"task {task.task_id!r} has no responses")
    return sum(task.responses) / len(task.responses)


def _read_bit(raw: str, path, line_no: int, column: str) -> int:
    value = raw.strip()
    if value not in ("0", "1"):
        raise DatasetError(f"{path}:{line_no}: {column} must be 0 or 1, got {raw!r}")
    return int(value)


def _read_rows(path, expected_header):
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}:1: empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise DatasetError(
                f"{path}:1: expected header {','.join(expected_header)}, "
                f"got {','.join(header)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise DatasetError(
                    f"{path}:{line_no}: expected {len(expected_header)} fields, "
                    f"got {len(row)}"
                )
            yield line_no, row


def load_pair(name: str, responses_path, gold_path) -> CanonicalDataset:
    """Load and validate a (responses file, gold file) pair."""
    gold: dict[str, int] = {}
    for line_no, (task_id, raw_gold) in _read_rows(gold_path, ["task_id", "gold"]):
        task_id = task_id.strip()
        if task_id in gold:
            raise DatasetError(f"{gold_path}:{line_no}: duplicate task id {task_id!r}")
        gold[task_id] = _read_bit(raw_gold, gold_path, line_no, "gold")

    responses: dict[str, list[int]] = {tid: [] for tid in gold}
    header = ["task_id", "worker_id", "response"]
    for line_no, (task_id, _worker, raw_resp) in _read_rows(responses_path, header):
        task_id = task_id.strip()
        if task_id not in responses:
            raise DatasetError(
                f"{responses_path}:{line_no}: task {task_id!r} has no gold label"
            )
        responses[task_id].append(_read_bit(raw_resp, responses_path, line_no, "response"))

    empty = [tid for tid, resp in responses.items() if not resp]
    if empty:
        raise DatasetError(f"task {empty[0]!r} has zero responses in {responses_path}")

    tasks = tuple(
        DatasetTask(task_id=tid, gold_label=gold[tid], responses=tuple(responses[tid]))
        for tid in gold
    )
    return CanonicalDataset(name=name, tasks=tasks)


def read_manifest(path) -> list[dict]:
    """Read a dataset manifest; paths resolve relative to the manifest."""
    path = Path(path)
    entries = []
    header = ["name", "responses_path", "gold_path"]
    for _line_no, (name, resp, gold) in _read_rows(path, header):
        entries.append(
            {
                "name": name.strip(),
                "responses_path": path.parent / resp.strip(),
                "gold_path": path.parent / gold.strip(),
            }
        )
    if not entries:
        raise DatasetError(f"{path}: manifest lists no datasets")
    return entries


def load_canonical(manifest_path, name: Optional[str] = None) -> CanonicalDataset:
    """Load a dataset named in a manifest file (first entry by default)."""
    entries = read_manifest(manifest_path)
    if name is None:
        entry = entries[0]
    else:
        matches = [e for e in entries if e["name"] == name]
        if not matches:
            known = ", ".join(e["name"] for e in entries)
            raise DatasetError(f"dataset {name!r} not in manifest (have: {known})")
        entry = matches[0]
    return load_pair(entry["name"], entry["responses_path"], entry["gold_path"])


def build_replay_pool(dataset: CanonicalDataset, n0: int, rng: np.random.Generator):
    """Split a dataset into n0 seed tasks and the hidden remainder pool.

    Both sides carry replay truth sources (empirical rate + gold label)
    and zero tallies.
    """
    if not 1 <= n0 <= dataset.n_tasks:
        raise ValueError(f"n0 must lie in [1, {dataset.n_tasks}], got {n0}")
    order = rng.permutation(dataset.n_tasks)
    states = [
        TaskState(task_id=t.task_id, truth=replay_truth(replay_prob(t), t.gold_label))
        for t in dataset.tasks
    ]
    seed = [states[i] for i in order[:n0]]
    pool = [states[i] for i in order[n0:]]
    return seed, pool


def write_synthetic_dataset(
    out_dir,
    name: str,
    n_tasks: int,
    n_responses: int,
    seed: int,
) -> dict:
    """Write a shape-matched stand-in dataset in the canonical format.

    Used for demos and loader checks where the original third-party data
    are unavailable: tasks get a gold label by coin flip and responses are
    Bernoulli draws biased toward the gold label, so replay runs behave
    like a real labeling corpus of the same shape.
    """
    if n_responses < n_tasks:
        raise ValueError("need at least one response per task")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([seed, n_tasks, n_responses]))

    base, extra = divmod(n_responses, n_tasks)
    responses_path = out_dir / f"{name}_responses.csv"
    gold_path = out_dir / f"{name}_gold.csv"
    with open(responses_path, "w", newline="", encoding="utf-8") as rf, open(
        gold_path, "w", newline="", encoding="utf-8"
    ) as gf:
        rw = csv.writer(rf)
        gw = csv.writer(gf)
        rw.writerow(["task_id", "worker_id", "response"])
        gw.writerow(["task_id", "gold"])
        for i in range(n_tasks):
            task_id = f"{name}-{i:05d}"
            gold = int(rng.integers(0, 2))
            # per-task agreement rate: mostly easy, some near-ambiguous
            agree = float(rng.uniform(0.55, 0.95))
            k = base + (1 if i < extra else 0)
            draws = rng.random(k) < agree
            gw.writerow([task_id, gold])
            for j, hit in enumerate(draws):
                resp = gold if hit else 1 - gold
                rw.writerow([task_id, f"w{j:03d}", int(resp)])
    return {"name": name, "responses_path": responses_path, "gold_path": gold_path}


def write_demo_datasets(out_dir, seed: int = 0) -> Path:
    """Write stand-in datasets shaped like the three replay corpora plus a
    manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    shapes = [("rte", 800, 8000), ("bluebirds", 108, 4212), ("games", 1682, 179162)]
    entries = [
        write_synthetic_dataset(out_dir, name, n_tasks, n_resp, seed)
        for name, n_tasks, n_resp in shapes
    ]
    manifest = out_dir / "datasets_manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "responses_path", "gold_path"])
        for e in entries:
            writer.writerow(
                [e["name"], e["responses_path"].name, e["gold_path"].name]
            )
    return manifest
