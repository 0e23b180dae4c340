"""Nonparametric long-memory dose-finding designs.

Sequential allocation rules (interval/CCD, point, one-parameter CRM),
deterministic convergence classifiers, random scenario generation, and
seeded Monte Carlo trial simulation.
"""

from dosefind.model import (
    EstimateVector,
    NoDataError,
    ToxScenario,
    TrialState,
    fhat,
    monotonize,
    mtd_index,
)
from dosefind.designs import DesignSpec, next_dose, next_dose_with_reason, recommend_mtd
from dosefind.convergence import (
    CcdVerdict,
    CrmVerdict,
    NominationTable,
    ccd_classify,
    crm_classify,
    crm_nominations,
    misspec_distance,
)
from dosefind.scenarios import GenConfig, ScenarioRecord, default_alpha_pool, gen_ensemble, gen_records
from dosefind.simulate import (
    TrialTrace,
    convergence_empirics,
    counterexample_point,
    estimate_limit_set,
    estimation_errors,
    run_trial,
    table1_crosstab,
)

__all__ = [
    "ToxScenario",
    "TrialState",
    "EstimateVector",
    "NoDataError",
    "fhat",
    "monotonize",
    "mtd_index",
    "DesignSpec",
    "next_dose",
    "next_dose_with_reason",
    "recommend_mtd",
    "CcdVerdict",
    "CrmVerdict",
    "NominationTable",
    "ccd_classify",
    "crm_classify",
    "crm_nominations",
    "misspec_distance",
    "GenConfig",
    "ScenarioRecord",
    "default_alpha_pool",
    "gen_ensemble",
    "gen_records",
    "TrialTrace",
    "run_trial",
    "estimate_limit_set",
    "estimation_errors",
    "counterexample_point",
    "table1_crosstab",
    "convergence_empirics",
]
