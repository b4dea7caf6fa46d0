"""Modular active-learning structural reliability engine and benchmark.

Four interchangeable ingredients drive an adaptive analysis: a surrogate
model (Kriging, sparse PCE, PC-Kriging), a reliability estimator (Monte
Carlo, importance sampling, subset simulation), a learning function
(U, EFF, bootstrap fraction) and a stopping criterion (beta bounds, beta
stability, combined). The campaign layer runs seeded strategy grids over
a benchmark problem registry and ranks the outcomes.
"""

from .distributions import Marginal, RandomVector, lhs_sample
from .estimators import (FormResult, ReliabilityResult, SolverConfig,
                         beta_from_pf, form_hlrf, importance_sampling,
                         monte_carlo, pf_from_beta, subset_simulation)
from .kriging import ExperimentalDesign, KrigingConfig, fit_kriging
from .learning import (AlrBudget, Strategy, SurrogateConfigs, lf_eff, lf_fbr,
                       lf_u, run_alr, select_enrichment)
from .metrics import (CampaignRecord, metric_delta, metric_relerr,
                      rank_strategies)
from .campaign import CampaignConfig, expand_strategy_grid, run_campaign
from .pce import PceConfig, bootstrap_replicates, evaluate_basis, fit_pce_lars, hyperbolic_basis
from .pck import PckConfig, fit_pck
from .problems import get_problem, load_registry, registry

__version__ = "0.1.0"
