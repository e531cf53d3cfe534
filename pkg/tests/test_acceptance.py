"""Acceptance suite: one numbered criterion per test, one printed verdict each.

Each test prints ``criterion N: PASS`` (or FAIL) so the whole gate can be
read from the captured output with ``pytest -s tests/test_acceptance.py``.
Criterion 2 carries a deliberately failing sub-assertion marked xfail; see
the docstring on the test for the mathematical reason.
"""

import csv
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from crowdcast import analysis, cli, datasets
from crowdcast.allocation import (
    BetaPosterior,
    Policy,
    optkg_score,
    prob_theta_gt_half,
)
from crowdcast.core import PriorSpec, TaskState, synthetic_truth
from crowdcast.forecast import (
    ForecastConfig,
    GrowthRule,
    expected_unseen_cost,
    expected_unseen_cost_mc,
    n_min,
    remaining_cost,
    should_grow,
)
from crowdcast.simulation import SimConfig, WorkerMode, run_fixed, run_replications


def report(number, ok, detail=""):
    verdict = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"criterion {number}: {verdict}{suffix}")
    assert ok, f"criterion {number} failed{suffix}"


def locf_accuracy(trace, t):
    """Accuracy at time t, carrying the last checkpoint forward."""
    times = [tt for tt, _, _ in trace.checkpoints]
    accs = [a for _, _, a in trace.checkpoints]
    idx = int(np.searchsorted(times, t, side="right")) - 1
    return accs[max(idx, 0)]


@pytest.fixture(scope="module")
def synthetic_50reps():
    """50 replications of the synthetic defaults with matched baselines.

    Shared between criteria 5 and 6 so the expensive runs happen once.
    """
    out = {}
    for rule, delta in ((GrowthRule.GR1, 0.9), (GrowthRule.GR2, 0.5)):
        config = SimConfig(
            total_budget=3000,
            seed_tasks=100,
            forecast=ForecastConfig(delta=delta, n_max=10.0, rule=rule),
            rng_seed=1,
            replications=50,
            checkpoint_stride=100,
        )
        out[rule] = run_replications(config, with_baselines=True)
    return out


class TestCriterion1Determinism:
    ARGS = (
        "--budget", "300", "--seed_tasks", "30", "--seed", "11",
        "--rule", "gr1,gr2", "--delta", "0.9,0.5",
        "--checkpoint_stride", "100",
    )

    @staticmethod
    def _strip_stamp(path):
        return Path(path).read_text(encoding="utf-8").splitlines()[1:]

    def test_rerun_byte_identical(self, tmp_path):
        dirs = (tmp_path / "a", tmp_path / "b")
        for d in dirs:
            assert cli.main(["run", *self.ARGS, "--out_dir", str(d)]) == 0
            assert cli.main(
                ["analyze", "--out_dir", str(d / "an"), str(d / "growth_events.csv")]
            ) == 0
        ok = all(
            self._strip_stamp(dirs[0] / rel) == self._strip_stamp(dirs[1] / rel)
            for rel in (
                "curves.csv", "growth_events.csv", "summary.csv",
                "an/interevent.csv", "an/tailfits.csv",
            )
        )
        report(1, ok, "run + analyze reruns identical after the stamp line")


class TestCriterion2ClosedForms:
    def test_quadrature_and_unit_score(self):
        worst = 0.0
        for total in range(2, 41):
            for alpha in range(1, total):
                beta_p = total - alpha
                quad, _ = integrate.quad(
                    lambda x: x ** (alpha - 1) * (1 - x) ** (beta_p - 1)
                    / math.exp(
                        math.lgamma(alpha) + math.lgamma(beta_p)
                        - math.lgamma(total)
                    ),
                    0.5, 1.0, epsabs=1e-12, epsrel=1e-12,
                )
                prob = prob_theta_gt_half(BetaPosterior(alpha, beta_p))
                worst = max(worst, abs(prob - quad))
        score_1_1 = optkg_score(BetaPosterior(1, 1))
        ok = worst < 1e-9 and abs(score_1_1 - 0.25) < 1e-12
        report(2, ok, f"max quadrature gap {worst:.2e}; score(1,1)=0.25")

    @pytest.mark.xfail(
        strict=True,
        reason=(
            "the stated target optkg_score(10,1) = 2**-10 contradicts the "
            "score definition: Pr(theta>1/2 | Beta(10,1)) = 1 - 2**-10, so "
            "the score is h(11,1) - h(10,1) = 2**-10 - 2**-11 = 2**-11 "
            "exactly. The same definition is what makes score(1,1) = 0.25 "
            "above hold, so both cannot be satisfied at once."
        ),
    )
    def test_score_10_1_stated_target(self):
        value = optkg_score(BetaPosterior(10, 1))
        ok = abs(value - 2**-10) < 1e-12
        report(2, ok, f"score(10,1) = {value!r}, stated target 2**-10")


class TestCriterion3RemainingCostOracle:
    def test_brute_force_equivalence(self):
        rng = np.random.default_rng(17)
        checked = 0
        ok = True
        while checked < 1000:
            n = int(rng.integers(1, 80))
            a = int(rng.integers(0, n + 1))
            if 2 * a == n:
                continue
            delta = float(rng.uniform(0.05, 0.95))
            bound = math.log(2 / delta) / (2 * (a / n - 0.5) ** 2)
            m_brute = max(0, math.ceil(bound - n))
            m = remaining_cost(a, n, delta)
            if abs(max(0, math.ceil(m)) - m_brute) > 1:
                ok = False
                break
            checked += 1
        report(3, ok, f"{checked} random states within one unit")


class TestCriterion4ExpectedUnseenCost:
    def test_values_and_mc_discrepancy(self):
        eq_value = expected_unseen_cost(0.9, 10.0)
        ok = abs(eq_value - 5.4368) < 1e-3
        for delta in np.linspace(0.05, 0.95, 20):
            collapse = expected_unseen_cost(float(delta), n_min(float(delta)))
            ok = ok and collapse == pytest.approx(n_min(float(delta)), rel=1e-12)
        mc = expected_unseen_cost_mc(
            PriorSpec.uniform(), 0.9, 10.0, samples=10**6,
            rng=np.random.default_rng(0),
        )
        # The Monte-Carlo estimator measures a different (capped-integral)
        # quantity; its uniform-prior closed form is 2*sqrt(nmin*nmax)-nmin
        # = 6.3955..., and the gap to 5.4368 is real, not an error.
        ok = ok and abs(mc - 6.3955) < 0.02 and abs(mc - eq_value) > 0.9
        report(4, ok, f"formula {eq_value:.4f}, MC estimator {mc:.4f}")


class TestCriterion5Improvement:
    def test_mid_budget_gain_and_final_parity(self, synthetic_50reps):
        ok = True
        details = []
        for rule, (traces, baselines) in synthetic_50reps.items():
            grid = [t for t, _, _ in traces[0].checkpoints]
            rows = analysis.aggregate_runs(traces, baselines, grid=grid)
            mid = [r for r in rows if 1000 <= r["t"] <= 2000]
            best = max(mid, key=lambda r: r["mean_improvement"])
            fore = [locf_accuracy(tr, best["t"]) for tr in traces]
            base = [locf_accuracy(tr, best["t"]) for tr in baselines]
            p = stats.ttest_rel(fore, base, alternative="greater").pvalue
            final_gap = abs(rows[-1]["mean_improvement"])
            ok = ok and best["mean_improvement"] >= 0.01 and p < 0.05
            ok = ok and final_gap <= 0.02
            details.append(
                f"{rule.value}: +{best['mean_improvement']*100:.1f}pp at "
                f"t={best['t']}, p={p:.1e}, final gap {final_gap*100:.2f}pp"
            )
        report(5, ok, "; ".join(details))


class TestCriterion6Burstiness:
    def test_powerlaw_beats_memoryless(self, synthetic_50reps):
        traces, _ = synthetic_50reps[GrowthRule.GR1]
        pooled = analysis.pooled_interevents(traces)
        pl = analysis.fit_powerlaw(pooled, x_min=1)
        memoryless = analysis.fit_exponential(pooled, x_min=1)
        lr = analysis.likelihood_ratio(pooled, pl, memoryless)
        ok = lr.r_statistic > 0 and lr.p_value < 0.05
        report(
            6,
            ok,
            f"n={len(pooled.values)}, alpha={pl.pl_alpha:.2f}, "
            f"r={lr.r_statistic:.1f}, p={lr.p_value:.2e}",
        )


class TestCriterion7RuleDominance:
    def test_gr1_grow_implies_gr2_grow(self):
        rng = np.random.default_rng(29)
        ok = True
        for _ in range(10**4):
            expected = float(rng.uniform(0.0, 20.0))
            costs = rng.uniform(0.1, 30.0, size=int(rng.integers(1, 40)))
            if should_grow(expected, costs, GrowthRule.GR1) and not should_grow(
                expected, costs, GrowthRule.GR2
            ):
                ok = False
                break
        report(7, ok, "10^4 random (E, costs) states")


class TestCriterion8SweepDirections:
    SEED = 3
    REPS = 20

    def _traces(self, rule, delta, n0=100, mode=None):
        config = SimConfig(
            total_budget=3000,
            seed_tasks=n0,
            forecast=ForecastConfig(delta=delta, n_max=10.0, rule=rule),
            mode=mode or WorkerMode.synthetic(),
            rng_seed=self.SEED,
            replications=self.REPS,
            checkpoint_stride=1000,
        )
        return run_replications(config)

    def _mean_rate(self, rule, delta, n0=100):
        traces = self._traces(rule, delta, n0=n0)
        return float(np.mean([analysis.growth_rate(t) for t in traces]))

    def test_directions(self):
        # (a) GR I growth rate increases from delta=0.5 towards delta=1.
        lo = self._mean_rate(GrowthRule.GR1, 0.5)
        hi = self._mean_rate(GrowthRule.GR1, 1 - 1e-6)
        ok_a = hi > lo
        # (b) larger seed pools grow more slowly, for both rules.
        ok_b = True
        for rule, delta in ((GrowthRule.GR1, 0.9), (GrowthRule.GR2, 0.5)):
            ok_b = ok_b and (
                self._mean_rate(rule, delta, n0=200)
                < self._mean_rate(rule, delta, n0=50)
            )
        # (c) increasing proposal cost depresses final accuracy.
        finals = {}
        for s in (0.0, 0.2):
            traces = self._traces(
                GrowthRule.GR2, 0.1, mode=WorkerMode.increasing_cost(s)
            )
            finals[s] = float(np.mean([t.final_accuracy for t in traces]))
        ok_c = finals[0.2] < finals[0.0]
        report(
            8,
            ok_a and ok_b and ok_c,
            f"(a) rate {lo:.4f}->{hi:.4f}; (b) N0 ordering holds; "
            f"(c) final acc {finals[0.0]:.3f} vs {finals[0.2]:.3f} at s=0.2",
        )


class TestCriterion9Allocation:
    def test_optkg_dominates_random(self):
        rng = np.random.default_rng(123)
        thetas = PriorSpec.uniform().sample(rng, 100)
        tasks = [
            TaskState(i, synthetic_truth(float(th), rng), 0, 0)
            for i, th in enumerate(thetas)
        ]
        budget = 1500
        means = {}
        for policy in (Policy.OPTKG, Policy.RANDOM):
            per_checkpoint = {}
            for rep in range(50):
                trace = run_fixed(
                    tasks, budget, policy=policy, checkpoint_stride=125,
                    seed=5, replication=rep,
                )
                for t, _, acc in trace.checkpoints:
                    per_checkpoint.setdefault(t, []).append(acc)
            means[policy] = {t: float(np.mean(v)) for t, v in per_checkpoint.items()}
        late = [t for t in means[Policy.OPTKG] if t > budget / 4]
        ok = all(means[Policy.OPTKG][t] >= means[Policy.RANDOM][t] for t in late)
        gap = min(means[Policy.OPTKG][t] - means[Policy.RANDOM][t] for t in late)
        report(9, ok, f"min gap beyond B/4 is {gap*100:.2f}pp over {len(late)} checkpoints")


class TestCriterion10ReplayIntegrity:
    def _write_pair(self, tmp_path, responses, gold):
        rp = tmp_path / "responses.csv"
        gp = tmp_path / "gold.csv"
        with open(rp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["task_id", "value"])
            w.writerows(responses)
        with open(gp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["task_id", "label"])
            w.writerows(gold)
        return rp, gp

    def test_loaders_counts_and_replay(self, tmp_path):
        rejects = 0
        for responses, gold in (
            ([["t1", "2"]], [["t1", "1"]]),          # non-binary response
            ([["t1", "1"]], [["t1", "1"], ["t1", "0"]]),  # duplicate gold id
            ([["t9", "1"]], [["t1", "1"]]),          # unknown task id
            ([["t1", "1"]], [["t1", "1"], ["t2", "0"]]),  # zero-response task
        ):
            rp, gp = self._write_pair(tmp_path, responses, gold)
            with pytest.raises(datasets.DatasetError):
                datasets.load_pair("bad", rp, gp)
            rejects += 1

        manifest = datasets.write_demo_datasets(tmp_path / "demo", seed=1)
        counts_ok = True
        for name, n_tasks, n_responses in (
            ("rte", 800, 8000),
            ("bluebirds", 108, 4212),
            ("games", 1682, 179162),
        ):
            ds = datasets.load_canonical(manifest, name)
            counts_ok = counts_ok and (ds.n_tasks, ds.n_responses) == (
                n_tasks,
                n_responses,
            )

        rte = datasets.load_canonical(manifest, "rte")
        config = SimConfig(
            total_budget=3000,
            seed_tasks=100,
            forecast=ForecastConfig(delta=0.9, n_max=10.0, rule=GrowthRule.GR1),
            mode=WorkerMode.replay(rte),
            rng_seed=0,
            replications=1,
            checkpoint_stride=500,
        )
        trace = run_replications(config)[0]
        ok = rejects == 4 and counts_ok and trace.final_accuracy > 0.5
        report(
            10,
            ok,
            f"4 malformed inputs rejected; counts match; replay final "
            f"accuracy {trace.final_accuracy:.3f}",
        )
