"""scikit-learn style wrappers so the mechanism drops into pipelines.

Rows are envelopes (or players), columns are alternatives::

    pipe = make_pipeline(OptimalDepositor(), DepositVotingMechanism())
    pipe.fit(valuations)
    pipe[-1].selected_
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_non_negative

from .agents import optimal_deposits
from .mechanism import TieBreak, scale_param, settle_round, votes_from_deposits


def _check_round(X, who: str) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_min_features=2)
    check_non_negative(X, who)
    return X


class OptimalDepositor(TransformerMixin, BaseEstimator):
    """Map valuation rows to equilibrium deposits ``(m - 1) / 2 * u``."""

    def __init__(self, omega: float | None = None):
        self.omega = omega

    def fit(self, X, y=None):
        X = _check_round(X, "OptimalDepositor.fit")
        if self.omega is not None and np.any(X > self.omega):
            raise ValueError(f"valuations exceed omega={self.omega}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = _check_round(X, "OptimalDepositor.transform")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} alternatives, got {X.shape[1]}")
        return np.array([optimal_deposits(row) for row in X])


class VoteEncoder(TransformerMixin, BaseEstimator):
    """Deposits to zero-sum votes.

    ``n_envelopes`` fixes the scale; by default it is the number of rows
    passed to ``transform``, i.e. each call is treated as a full round.
    """

    def __init__(self, n_envelopes: int | None = None):
        self.n_envelopes = n_envelopes

    def fit(self, X, y=None):
        X = _check_round(X, "VoteEncoder.fit")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = _check_round(X, "VoteEncoder.transform")
        a = scale_param(self.n_envelopes or X.shape[0])
        return np.array([votes_from_deposits(row, a) for row in X])


class DepositVotingMechanism(BaseEstimator):
    """Settle a round on ``fit``; the learned attributes describe its outcome.

    Attributes set by ``fit``: ``outcome_``, ``selected_``, ``votes_``,
    ``refunds_``, ``surplus_``, ``scale_``.
    """

    def __init__(self, tie_break: str = TieBreak.LOWEST_INDEX.value):
        self.tie_break = tie_break

    def fit(self, X, y=None):
        X = _check_round(X, "DepositVotingMechanism.fit")
        outcome = settle_round(X, TieBreak(self.tie_break))
        self.outcome_ = outcome
        self.selected_ = outcome.selected
        self.votes_ = outcome.votes
        self.refunds_ = outcome.refunds
        self.surplus_ = outcome.surplus
        self.scale_ = outcome.scale
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Winning alternative of the round formed by the rows of ``X``."""
        check_is_fitted(self, "outcome_")
        X = _check_round(X, "DepositVotingMechanism.predict")
        return settle_round(X, TieBreak(self.tie_break)).selected

    def fit_predict(self, X, y=None):
        return self.fit(X).selected_

    def transform(self, X):
        """Per-envelope refunds for the round formed by the rows of ``X``."""
        check_is_fitted(self, "outcome_")
        X = _check_round(X, "DepositVotingMechanism.transform")
        return settle_round(X, TieBreak(self.tie_break)).refunds
