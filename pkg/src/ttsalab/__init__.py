"""Two-timescale stochastic approximation under Markovian and shuffled noise."""

__version__ = "0.1.0"

from .asymptotics import (  # noqa: E402
    AsymptoticModel,
    HurwitzError,
    asymptotic_model,
    jacobian_blocks,
    k_x,
    loewner_leq,
    lyapunov_solve,
    poisson_solve,
    sampling_cov_closed,
    sampling_cov_mc,
    u_x,
)
from .chains import (  # noqa: E402
    ChainError,
    FiniteChain,
    Graph,
    GraphError,
    Sampler,
    SamplerSpec,
    augment_chain,
    random_connected_graph,
    read_edge_list,
)
from .ttsa import StepSchedule, TTSADivergence, TrialConfig, run_trials, run_ttsa  # noqa: E402

__all__ = [
    "AsymptoticModel", "ChainError", "FiniteChain", "Graph", "GraphError", "HurwitzError", "Sampler",
    "SamplerSpec", "StepSchedule", "TTSADivergence", "TrialConfig", "asymptotic_model", "augment_chain",
    "jacobian_blocks", "k_x", "loewner_leq", "lyapunov_solve", "poisson_solve", "random_connected_graph",
    "read_edge_list", "run_trials", "run_ttsa", "sampling_cov_closed", "sampling_cov_mc", "u_x",
]
