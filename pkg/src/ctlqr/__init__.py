"""Data-driven off-policy policy iteration for continuous-time LQR.

Typical use::

    from ctlqr import LtiSystem, PcpeInput, simulate_pcpe, gen_pe_sequence
    from ctlqr import build_data_matrices, algorithm2

    seq = gen_pe_sequence(m, n + 1, (n + 1) * m + n, seed=0)
    traj = simulate_pcpe(plant, PcpeInput(seq.mu, T=0.2, dt=1e-4))
    policy = algorithm2(build_data_matrices(traj, 0.2), Q, R)
"""
from .bench import BenchConfig, BenchReport, random_stable_system, run_benchmark
from .data_pipeline import (ColumnSelection, DataMatrices, build_data_matrices,
                            read_bundle, select_columns, verify_rank, write_bundle)
from .errors import (ConfigurationError, ConsistencyError, ConvergenceError,
                     CtlqrError, DataError, NumericalError, RankError,
                     SingularityError, StabilityError)
from .excitation import PeSequence, gen_pe_sequence, is_pe
from .init_gain import InitialGain, data_stabilizing_gain
from .kleinman import IterationRecord, IterationTrace, algorithm1, algorithm1_step, kleinman_iterate
from .learner import LearnedPolicy, algorithm2, policy_step
from .matrix_equations import (SylvesterTransposeProblem, solve_are, solve_lyapunov,
                               solve_sylvester_transpose, solve_sylvester_transpose_kron)
from .simulator import LtiSystem, PcpeInput, Trajectory, simulate_pcpe

__version__ = "0.1.0"

__all__ = [
    "BenchConfig", "BenchReport", "ColumnSelection", "ConfigurationError",
    "ConsistencyError", "ConvergenceError", "CtlqrError", "DataError",
    "DataMatrices", "InitialGain", "IterationRecord", "IterationTrace",
    "LearnedPolicy", "LtiSystem", "NumericalError", "PcpeInput", "PeSequence",
    "RankError", "SingularityError", "StabilityError",
    "SylvesterTransposeProblem", "Trajectory", "algorithm1", "algorithm1_step",
    "algorithm2", "build_data_matrices", "data_stabilizing_gain",
    "gen_pe_sequence", "is_pe", "kleinman_iterate", "policy_step",
    "random_stable_system", "read_bundle", "run_benchmark", "select_columns",
    "simulate_pcpe", "solve_are", "solve_lyapunov", "solve_sylvester_transpose",
    "solve_sylvester_transpose_kron", "verify_rank", "write_bundle",
]
