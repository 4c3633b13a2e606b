"""Imitation learning by reduction to average-reward MDP solving."""

from ilrlab.chains import (
    ChainStructure,
    MixingProfile,
    cesaro_average,
    chain_structure,
    limiting_distribution,
    mixing_profile,
    stationary_distribution,
    total_variation,
    tv_decay_sum,
    tv_sup_oracle,
)
from ilrlab.estimators import BehavioralCloning, ILRImitator
from ilrlab.exceptions import (
    DimensionMismatchError,
    IlrLabError,
    InvalidMdpError,
    MixingError,
    NoErgodicExpertError,
    NonCommunicatingError,
    PeriodicChainError,
    ReducibleChainError,
    SolverError,
)
from ilrlab.imitation import (
    ExpertDataset,
    ExpertSpec,
    ILRResult,
    behavioral_cloning,
    ilr,
    intrinsic_reward,
    make_expert,
    optimal_expert,
    sample_trajectory,
    streak_decompose,
)
from ilrlab.mdp import (
    FiniteMdp,
    MarkovChain,
    OccupancyDistribution,
    Policy,
    RewardTable,
    StateDistribution,
    induced_chain,
    load_mdp,
    save_mdp,
    validate_mdp,
)
from ilrlab.solver import SolveResult, enumerate_optimal, policy_gain, solve_average_reward
from ilrlab.verification import RandomMdpSpec, VerificationReport, generate_random_mdp

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
