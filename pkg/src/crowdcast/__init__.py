"""Budget-constrained crowdsourcing with completion-cost forecasting.

A simulation engine and decision library for crowdsourcing where the crowd
both answers binary labeling tasks and proposes new ones.  Cost forecasting
estimates how many responses remain before each task's label can be called
with confidence, and growth rules use those estimates to decide when to
solicit a brand-new task instead of another response.
"""

from crowdcast.core import (
    BudgetLedger,
    PriorSpec,
    TaskState,
    TruthSource,
    accuracy,
    infer_label,
    record_response,
    replay_truth,
    synthetic_truth,
    theta_hat,
)
from crowdcast.forecast import (
    ForecastConfig,
    GrowthRule,
    available_set,
    expected_unseen_cost,
    expected_unseen_cost_mc,
    hoeffding_sample_size,
    n_min,
    remaining_cost,
    should_grow,
)
from crowdcast.allocation import (
    BetaPosterior,
    Policy,
    h_value,
    optkg_score,
    prob_theta_gt_half,
    select_task,
)
from crowdcast.simulation import (
    Event,
    RunTrace,
    SimConfig,
    WorkerMode,
    run,
    run_baseline,
    run_fixed,
    run_replications,
)

__version__ = "0.1.0"
