"""Deposit-based voting with outcome-contingent refunds, plus tools to test its equilibrium claims."""

from .agents import (
    Belief,
    StrategyProfile,
    belief_probability,
    best_response_numeric,
    equilibrium_utility,
    expected_utility,
    feasible_p_bound,
    nominal_participation_gain,
    optimal_deposits,
    optimal_votes,
    participation_gain,
    strategy_profile,
    sybil_expected_utility,
    utility_gradient,
)
from .estimators import DepositVotingMechanism, OptimalDepositor, VoteEncoder
from .exceptions import (
    BeliefInfeasibleError,
    ConfigError,
    DegenerateAlternatives,
    InvalidParticipantCount,
    MechanismError,
    NegativeDepositError,
    NoParticipantsError,
    NonZeroSumError,
    ScenarioError,
    ShapeError,
)
from .mechanism import (
    RoundOutcome,
    TieBreak,
    TransferBreakdown,
    counterfactual_select_only_j,
    counterfactual_select_zeroed,
    deposits_from_votes,
    mean_other_deposits,
    scale_param,
    select,
    settle_round,
    tally,
    transfer_breakdown,
    votes_from_deposits,
)

__version__ = "0.1.0"
