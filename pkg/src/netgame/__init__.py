"""Multinomial-logit network games: equilibrium computation, subnetwork
approximation, simulation and approximated maximum likelihood."""
from .estimate import (
    ApproxLikelihood,
    Dataset,
    EstimateResult,
    EstimationError,
    IdentDiagnostics,
    OptimizerSettings,
    SingularFisherError,
    amle,
    choose_h,
    fisher_info,
    ident_diagnostics,
    invert_log_odds,
    loglik_approx,
    score_approx,
    std_errors,
)
from .game import (
    ChoiceProfile,
    ConvergenceError,
    GameState,
    PayoffParams,
    SolveReport,
    UniquenessWarning,
    best_response,
    contraction_modulus,
    ndd_bound,
    solve_all_subnetworks,
    solve_equilibrium,
    solve_subnetwork,
)
from .network import (
    DirectedNetwork,
    NetworkError,
    circle_walk,
    generate_circle,
    generate_random,
    make_rng,
    neighborhood,
    subgraph,
)
from .npest import NoMatchError, NpConfig, NpEstimate, default_h, np_estimate, np_estimate_detail
from .simulate import MCDesign, MCResult, draw_actions, draw_covariates, replication_data, run_montecarlo

__version__ = "0.1.0"
