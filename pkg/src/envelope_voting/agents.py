"""Player model: linear beliefs, expected utility, optimal play and Sybil play.

A player believes that casting votes ``x`` moves the selection probability of
alternative ``j`` away from a baseline ``p0[j]`` by ``p * (x[j] - mean of the
other votes)``. Utility is risk-neutral: value of the outcome minus deposits
plus expected refunds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .exceptions import BeliefInfeasibleError, DegenerateAlternatives, ShapeError
from .mechanism import ATOL, scale_param, votes_from_deposits


@dataclass(frozen=True)
class Belief:
    p0: np.ndarray
    p: float

    def __post_init__(self):
        p0 = np.asarray(self.p0, dtype=float)
        if p0.ndim != 1 or p0.size == 0:
            raise ShapeError("p0 must be a non-empty 1-D vector")
        if np.any(p0 < -ATOL) or np.any(p0 > 1 + ATOL):
            raise BeliefInfeasibleError(f"baseline probabilities outside [0, 1]: {p0.tolist()}")
        if abs(p0.sum() - 1.0) > ATOL:
            raise BeliefInfeasibleError(f"baseline probabilities sum to {p0.sum():.12g}, not 1")
        if not self.p > 0:
            raise BeliefInfeasibleError(f"marginal vote effect must be positive, got {self.p}")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p", float(self.p))

    @property
    def m(self) -> int:
        return self.p0.size

    def is_feasible(self, omega: float, a: float) -> bool:
        return self.p <= feasible_p_bound(self.p0, omega, a) * (1 + 1e-12)


def feasible_p_bound(p0, omega: float, a: float) -> float:
    """Largest ``p`` keeping every probability in [0, 1] for zero-sum votes with |x_j| <= omega / a.

    Optimal play stays within half that box; the rest is headroom for Sybil
    and numerical searches.
    """
    p0 = np.asarray(p0, dtype=float)
    m = p0.size
    if m < 2:
        raise DegenerateAlternatives("belief bound needs at least two alternatives")
    slack = float(np.minimum(p0, 1.0 - p0).min())
    return 0.5 * slack * 2.0 * a * (m - 1) / (omega * m)


def check_valuations(u, omega: float | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise ShapeError("valuation vector must be a non-empty 1-D sequence")
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise ShapeError(f"valuations must be finite and non-negative, got {u.tolist()}")
    if omega is not None and np.any(u > omega):
        raise ShapeError(f"valuations exceed the bound omega={omega}")
    return u


def _deviation(x: np.ndarray) -> np.ndarray:
    # x_j minus the mean of the other coordinates
    m = x.shape[-1]
    return x - (x.sum(axis=-1, keepdims=True) - x) / (m - 1)


def _check_probabilities(P: np.ndarray, what: str) -> None:
    if np.any(P < -ATOL) or np.any(P > 1 + ATOL):
        raise BeliefInfeasibleError(
            f"{what} left [0, 1] (min {P.min():.3g}, max {P.max():.3g}); p is too large for these votes"
        )


def belief_probability(b: Belief, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != b.p0.shape:
        raise ShapeError(f"vote vector length {x.size} does not match belief length {b.m}")
    if b.m < 2:
        raise DegenerateAlternatives("beliefs over votes need at least two alternatives")
    P = b.p0 + b.p * _deviation(x)
    _check_probabilities(P, "selection probability")
    return P


def expected_utility(u, b: Belief, x, a: float) -> float:
    """Expected utility of casting votes ``x`` in one envelope.

    Deposits enter as ``a (m - 1) x_j + t_j`` and the mean-of-others refund
    ``t_j`` cancels. The two outcome-contingent refunds are weighted by the
    probability that ``j`` loses in the corresponding counterfactual.
    """
    u = check_valuations(u)
    x = np.asarray(x, dtype=float)
    m = u.size
    P = belief_probability(b, x)
    P1 = b.p0 + b.p * x
    _check_probabilities(P1, "single-coordinate probability")
    rest = x.sum() - x
    terms = (
        u * P
        - a * (m - 1) * x
        + (1.0 - P1) * a * x
        + (1.0 - b.p0) * a * rest
    )
    return float(terms.sum())


def utility_gradient(u, b: Belief, x, a: float) -> np.ndarray:
    u = check_valuations(u)
    x = np.asarray(x, dtype=float)
    m = u.size
    belief_probability(b, x)  # feasibility only
    # d/dx_k of sum_j u_j * p * dev_j(x)
    value = b.p * (u - (u.sum() - u) / (m - 1))
    cost = -a * (m - 1) * np.ones(m)
    own = a * (1.0 - b.p0 - 2.0 * b.p * x)
    cross = a * ((1.0 - b.p0).sum() - (1.0 - b.p0))
    return value + cost + own + cross


def optimal_votes(u, a: float) -> np.ndarray:
    u = check_valuations(u)
    if u.size < 2:
        raise DegenerateAlternatives("optimal votes need at least two alternatives")
    return _deviation(u) / (2.0 * a)


def optimal_deposits(u) -> np.ndarray:
    """Equilibrium deposits ``(m - 1) / 2 * u``; they do not depend on ``a``."""
    u = check_valuations(u)
    if u.size < 2:
        raise DegenerateAlternatives("optimal deposits need at least two alternatives")
    return 0.5 * (u.size - 1) * u


def nominal_participation_gain(u, p: float, a: float) -> float:
    """``p / (4a) * sum_j (m^2 u_j^2 - (sum u)^2)``.

    This is ``(m - 1)**2`` times :func:`participation_gain`; the two agree
    only for two alternatives.
    """
    u = check_valuations(u)
    m = u.size
    return float(p / (4.0 * a) * np.sum(m * m * u * u - u.sum() ** 2))


def participation_gain(u, p: float, a: float) -> float:
    """Exact utility gain of optimal play over abstaining: ``p/(4a) * ||dev(u)||^2``."""
    u = check_valuations(u)
    m = u.size
    if m < 2 or u.max() == u.min():
        return 0.0
    # sum_j (m u_j - S)^2 / (m-1)^2
    centred = m * u - u.sum()
    return float(p / (4.0 * a) * np.sum(centred * centred) / (m - 1) ** 2)


def equilibrium_utility(u, b: Belief, a: float) -> float:
    u = check_valuations(u)
    return float(b.p0 @ u) + participation_gain(u, b.p, a)


@dataclass(frozen=True)
class StrategyProfile:
    deposits: np.ndarray
    votes: np.ndarray
    scale: float = field(default=float("nan"))


def strategy_profile(valuations, a: float | None = None) -> StrategyProfile:
    """Optimal deposits and votes for every row of ``valuations``.

    ``a`` defaults to the scale for one envelope per row.
    """
    U = np.asarray(valuations, dtype=float)
    if U.ndim != 2:
        raise ShapeError("valuations must be a 2-D array, one row per player")
    if a is None:
        a = scale_param(U.shape[0])
    D = np.array([optimal_deposits(row) for row in U])
    X = np.array([votes_from_deposits(row, a) for row in D])
    return StrategyProfile(deposits=D, votes=X, scale=a)


def best_response_numeric(u, b: Belief, a: float, omega: float | None = None,
                          grid: int = 21, sweeps: int = 3, max_newton: int = 25) -> np.ndarray:
    """Numerically maximise :func:`expected_utility` over zero-sum votes.

    Coarse stage: cyclic coordinate search with ``grid`` points per axis of an
    orthonormal basis of the zero-sum subspace, restricted to the box
    |x_j| <= omega / a. Refinement: Newton steps with a Hessian obtained by
    central differences of :func:`utility_gradient`. Knows nothing about the
    closed-form optimum.
    """
    u = check_valuations(u)
    m = u.size
    if m < 2:
        raise DegenerateAlternatives("best response needs at least two alternatives")
    if omega is None:
        omega = max(float(u.max()), 1.0)
    basis = null_space(np.ones((1, m)))  # m x (m-1), orthonormal columns
    k = basis.shape[1]
    radius = omega / a

    def value(z):
        return expected_utility(u, b, basis @ z, a)

    z = np.zeros(k)
    best = value(z)
    offsets = np.linspace(-radius, radius, grid)
    for _ in range(sweeps):
        for axis in range(k):
            for off in offsets:
                cand = z.copy()
                cand[axis] = off
                if np.abs(basis @ cand).max() > radius:
                    continue
                val = value(cand)
                if val > best:
                    best, z = val, cand

    def grad(z):
        return basis.T @ utility_gradient(u, b, basis @ z, a)

    step = max(radius * 1e-3, 1e-12)
    for _ in range(max_newton):
        g = grad(z)
        H = np.empty((k, k))
        for col in range(k):
            e = np.zeros(k)
            e[col] = step
            H[:, col] = (grad(z + e) - grad(z - e)) / (2 * step)
        H = 0.5 * (H + H.T)
        delta = np.linalg.solve(H, -g)
        z = z + delta
        if np.abs(delta).max() <= 1e-13 * max(1.0, radius):
            break
    return basis @ z


def sybil_expected_utility(u, b: Belief, envelopes, n_others: int) -> float:
    """Total expected utility of one player who submits every vector in ``envelopes``.

    The value of the outcome uses the combined votes. Each envelope pays its
    own deposit and collects its own refunds, whose counterfactuals remove only
    that envelope: the mechanism cannot tell the envelopes belong together.
    """
    u = check_valuations(u)
    X = np.atleast_2d(np.asarray(envelopes, dtype=float))
    if X.shape[0] == 0 or X.shape[1] != u.size:
        raise ShapeError(f"envelopes must be a non-empty list of length-{u.size} vectors")
    w, m = X.shape
    a = scale_param(n_others + w)
    combined = X.sum(axis=0)
    total = float(u @ belief_probability(b, combined))
    for xq in X:
        P0 = belief_probability(b, combined - xq)
        P1 = P0 + b.p * xq
        _check_probabilities(P1, "single-coordinate probability")
        rest = xq.sum() - xq
        total += float(np.sum(-a * (m - 1) * xq + (1.0 - P1) * a * xq + (1.0 - P0) * a * rest))
    return total
