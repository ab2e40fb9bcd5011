"""Energy-balance analysis and ledgered time stepping for DIRK schemes."""
from .tableau import ButcherTableau, OrderReport, catalog, order_report, validate, CATALOG_IDS
from .stability import (
    EnergyCoefficients,
    QuadraticFormMatrix,
    StabilityVerdict,
    certify,
    energy_coefficients,
    extrapolation_weights,
    kappa_analysis,
    quadratic_form,
)
from .problems import CoercivityProfile, EvolutionProblem, parse_problem
from .integrator import RunResult, SolverOptions, StepLedger, TimePartition, convergence_study, run, step
from .bochner import BochnerAudit, audit, derivative_estimate_check, stage_bound_check

__version__ = "0.1.0"

__all__ = [
    "ButcherTableau", "OrderReport", "catalog", "order_report", "validate", "CATALOG_IDS",
    "EnergyCoefficients", "QuadraticFormMatrix", "StabilityVerdict", "certify",
    "energy_coefficients", "extrapolation_weights", "kappa_analysis", "quadratic_form",
    "CoercivityProfile", "EvolutionProblem", "parse_problem",
    "RunResult", "SolverOptions", "StepLedger", "TimePartition", "convergence_study", "run", "step",
    "BochnerAudit", "audit", "derivative_estimate_check", "stage_bound_check",
]
