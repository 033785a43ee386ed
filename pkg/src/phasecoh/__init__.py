"""Minimal average cost of phase estimation when the probe network may only use maximally incoherent operations."""
from .costfn import CostFunction, CostMatrix, cost_matrix, parse_cost
from .estimate import (EstimationResult, advantage, cmin_dual, cmin_single, multicopy_dual_numeric,
                       qubit_exact, relaxed_comb_sdp, weight_bound)
from .protocol import CompiledNetwork, ProtocolRun, compile_network, optimal_protocol, simulate_compiled, textbook_qpe
from .sdp import SolverFailure
from .states import DensityMatrix, robustness_of_coherence, weight_of_coherence

__version__ = "0.1.0"
