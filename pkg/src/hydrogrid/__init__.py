"""Annual typical-day scheduling for wind-heavy grids with hydrogen hubs."""

from .formulation import MilpModel, Variant, VariableIndex, build_model
from .grid import (Branch, Bus, CaseError, EnergyHub, Generator, GridCase,
                   ValidationReport, WindPlant, load_case, save_case,
                   validate_case)
from .profiles import (ProfileError, ProfileShape, QuarterProfiles,
                       load_profiles, measure_penetration, save_profiles,
                       scale_to_penetration, synthesize_profiles)
from .report import (AnnualMetrics, ComparisonReport, StorageTrajectory,
                     compare_runs, compute_metrics, emit_report,
                     storage_trajectory)
from .solver import Solution, SolveOptions, SolverError, solve
from .verify import VerificationReport, verify_solution

__all__ = [
    "AnnualMetrics", "Branch", "Bus", "CaseError", "ComparisonReport",
    "EnergyHub", "Generator", "GridCase", "MilpModel", "ProfileError",
    "ProfileShape", "QuarterProfiles", "Solution", "SolveOptions",
    "SolverError", "StorageTrajectory", "ValidationReport", "Variant",
    "VariableIndex", "VerificationReport", "WindPlant", "build_model",
    "compare_runs", "compute_metrics", "emit_report", "load_case",
    "load_profiles", "measure_penetration", "save_case", "save_profiles",
    "scale_to_penetration", "solve", "storage_trajectory", "synthesize_profiles",
    "validate_case", "verify_solution",
]

__version__ = "0.1.0"
