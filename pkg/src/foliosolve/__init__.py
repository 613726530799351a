"""First-order portfolio construction: models, solver, generators, verification."""

from .model import (
    FactorRiskModel,
    ExposureConstraints,
    SinglePeriodProblem,
    MultiPeriodProblem,
    FeasibilityReport,
    risk_matvec,
    eval_single_objective,
    eval_multi_objective,
    check_feasibility,
)
from .prox import (
    TradeCostCoeffs,
    prox_trade_cost_1d,
    prox_trade_cost_vec,
    project_l1_ball,
    project_box,
    conjugate_prox,
)
from .solver import (
    SolverConfig,
    SolveOutcome,
    solve_single,
    solve_multi,
    smooth_gradient_single,
    smooth_gradient_multi,
    estimate_operator_norm,
    fixed_point_residual,
)
from .riskmodel import (
    ReturnPanel,
    estimate_loadings,
    estimate_factor_cov,
    estimate_specific_variance,
    assemble_risk_model,
)
from .generate import (
    MarketPanel,
    GeneratorConfig,
    gen_market_data,
    build_alpha,
    build_costs,
    build_exposures,
    build_single_instance,
    extend_multi,
    intraday_scale,
)
from .oracle import (
    OptimalityCertificate,
    GridSolveResult,
    grid_solve,
    directional_check,
    gradient_check,
)
from .bench import GridSpec, BenchTable, sgm1, run_grid, emit_report
from .serialize import (
    save_instance,
    load_instance,
    save_solution,
    load_solution,
    save_panel,
    load_panel,
)

__version__ = "0.1.0"
