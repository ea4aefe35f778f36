"""Partial dependence and permutation feature importance with variance
estimates and confidence intervals, for fixed models and for learners."""

__version__ = "0.1.0"

from .data import Dataset, IndexView, load_csv, view  # noqa: E402
from .inference import IntervalEstimate, corrected_mean_ci, t_quantile  # noqa: E402
from .learners import (  # noqa: E402
    ForestParams,
    TreeParams,
    fit_forest,
    fit_linear,
    fit_tree,
    loss_l2,
    make_learner,
)
from .pd import PDCurve, PDGrid, learner_pd, make_grid, model_pd  # noqa: E402
from .pfi import (  # noqa: E402
    PFIEstimate,
    ReplacementSampler,
    compare_learners,
    learner_pfi,
    model_pfi,
    pfi_ranking,
    sample_replacements,
)
from .resampling import (  # noqa: E402
    ResamplePlan,
    bootstrap_plan,
    correction_constant,
    fresh_plan,
    subsample_plan,
)
