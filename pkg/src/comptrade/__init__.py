"""Joint two-way energy trading and cooperative downlink beamforming for a
CoMP cluster of renewable-powered base stations."""

from .baselines import conventional_optimal, conventional_zf
from .duality import dual_oracle, solve_joint
from .feasibility import FeasibilityReport, check_feasible, check_zf_feasible
from .model import (BeamformingSolution, ChannelSet, ClusterConfig, EnergyInputs, EnergySchedule,
                    InfeasibleError, NotConvergedError, ProblemInstance, QosTargets,
                    SolveOutcome, SolverError, ZfInfeasibleError)
from .options import SolverOptions
from .zf import solve_zf, zf_dual_oracle

__all__ = [
    "BeamformingSolution", "ChannelSet", "ClusterConfig", "EnergyInputs", "EnergySchedule",
    "FeasibilityReport", "InfeasibleError", "NotConvergedError", "ProblemInstance",
    "QosTargets", "SolveOutcome", "SolverError", "SolverOptions", "ZfInfeasibleError",
    "check_feasible", "check_zf_feasible", "conventional_optimal", "conventional_zf",
    "dual_oracle", "solve_joint", "solve_zf", "zf_dual_oracle",
]
