"""Randomised property suites for the mechanism's equilibrium claims.

Each ``check_*`` function tests concrete inputs; each ``run_*`` function draws
random instances from a root seed and aggregates them into a
:class:`PropertyReport`. Trial ``k`` of a suite is reproducible on its own
via :func:`envelope_voting.seeding.trial_rng` with the suite's stream id.
Violations are collected, never raised.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .agents import (
    Belief,
    equilibrium_utility,
    expected_utility,
    feasible_p_bound,
    nominal_participation_gain,
    optimal_deposits,
    optimal_votes,
    participation_gain,
    sybil_expected_utility,
)
from .exceptions import ShapeError
from .mechanism import ATOL, TieBreak, scale_param, settle_round, votes_from_deposits
from .seeding import trial_rng

MAX_EXAMPLES = 20

STREAMS = {
    "efficiency": 1,
    "sybil-split": 2,
    "sybil-random": 3,
    "split-inequality": 4,
    "participation": 5,
    "surplus": 6,
    "sybil-coordinated": 7,
}


@dataclass
class PropertyReport:
    name: str
    trials: int = 0
    violations: int = 0
    worst_margin: float = float("inf")
    example_seeds: list = field(default_factory=list)
    seed: int | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, margin: float, ok: bool, trial: int | None = None) -> None:
        self.trials += 1
        self.worst_margin = min(self.worst_margin, float(margin))
        if not ok:
            self.violations += 1
            if trial is not None and len(self.example_seeds) < MAX_EXAMPLES:
                self.example_seeds.append(trial)

    def bump(self, key: str, by: int = 1) -> None:
        self.details[key] = self.details.get(key, 0) + by

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class SybilPlan:
    """One player's split of ``u`` over ``w`` envelopes, with optional explicit votes."""

    split: np.ndarray
    strategies: np.ndarray | None = None

    def __post_init__(self):
        split = np.atleast_2d(np.asarray(self.split, dtype=float))
        if split.shape[0] < 2:
            raise ShapeError("a Sybil plan needs at least two envelopes")
        if np.any(split < 0):
            raise ShapeError("split valuations must be non-negative")
        object.__setattr__(self, "split", split)
        if self.strategies is not None:
            strat = np.atleast_2d(np.asarray(self.strategies, dtype=float))
            if strat.shape != split.shape:
                raise ShapeError(f"strategies {strat.shape} do not match split {split.shape}")
            object.__setattr__(self, "strategies", strat)

    @property
    def w(self) -> int:
        return self.split.shape[0]

    def valuation(self) -> np.ndarray:
        return self.split.sum(axis=0)

    def votes(self, a: float) -> np.ndarray:
        if self.strategies is not None:
            return self.strategies
        return np.array([optimal_votes(uq, a) for uq in self.split])


# ---------------------------------------------------------------- random draws


def random_belief(rng: np.random.Generator, m: int, omega: float, a: float) -> Belief:
    p0 = rng.exponential(size=m)
    p0 /= p0.sum()
    p_max = feasible_p_bound(p0, omega, a)
    return Belief(p0, p_max * (1.0 - rng.random()))


def random_split(rng: np.random.Generator, u: np.ndarray, w: int) -> np.ndarray:
    weights = rng.dirichlet(np.ones(w), size=u.size).T  # w x m, columns sum to 1
    split = weights * u
    # put rounding residue on the last row so columns sum to u exactly enough
    split[-1] = np.maximum(u - split[:-1].sum(axis=0), 0.0)
    return split


# ------------------------------------------------------------------ efficiency


def _efficiency_margin(valuations: np.ndarray, tie: TieBreak) -> tuple[float, bool, bool]:
    U = np.asarray(valuations, dtype=float)
    n, m = U.shape
    D = np.array([optimal_deposits(u) for u in U])
    outcome = settle_round(D, tie)
    S = U.sum(axis=0)
    T = outcome.tallies
    tol_u = 1e-9 * max(1.0, float(np.abs(S).max()))
    u_top = set(np.flatnonzero(S.max() - S <= tol_u).tolist())
    # tallies are an affine image of S with slope m / (2a(m-1))
    slope = m / (2.0 * outcome.scale * (m - 1))
    tol_v = tol_u * slope
    v_top = set(np.flatnonzero(T.max() - T <= tol_v).tolist())
    if len(u_top) == 1:
        (best,) = u_top
        others = np.delete(T, best)
        margin = float((T[best] - others.max()) / slope) if others.size else float("inf")
        return margin, outcome.selected == best, False
    ok = u_top == v_top and outcome.selected in u_top
    return (0.0 if ok else -1.0), ok, True


def check_efficiency(valuations, tie: TieBreak = TieBreak.LOWEST_INDEX) -> PropertyReport:
    """Winner under optimal deposits vs the alternative with the largest total valuation."""
    report = PropertyReport("efficiency")
    margin, ok, tied = _efficiency_margin(valuations, tie)
    report.record(margin, ok, 0)
    if tied:
        report.bump("tie_cases")
    return report


def run_efficiency(trials: int, seed: int, n_max: int = 20, m_max: int = 6,
                   omega: float = 100.0, tie_fraction: float = 0.05) -> PropertyReport:
    """Random equilibrium rounds; a small share use integer valuations to force ties."""
    report = PropertyReport("efficiency", seed=seed)
    for k in range(trials):
        rng = trial_rng(seed, k, STREAMS["efficiency"])
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(2, m_max + 1))
        if rng.random() < tie_fraction:
            U = rng.integers(0, 3, size=(n, m)).astype(float)
        else:
            U = rng.uniform(0.0, omega, size=(n, m))
        margin, ok, tied = _efficiency_margin(U, TieBreak.LOWEST_INDEX)
        report.record(margin, ok, k)
        if tied:
            report.bump("tie_cases")
    return report


# ---------------------------------------------------------------- Sybil attacks


def check_sybil_proofness(u, b: Belief, n_others: int, plans, name: str = "sybil") -> PropertyReport:
    """Every plan's total utility must not exceed one optimal envelope."""
    u = np.asarray(u, dtype=float)
    report = PropertyReport(name)
    single = equilibrium_utility(u, b, scale_param(n_others + 1))
    for idx, plan in enumerate(plans):
        if not np.allclose(plan.valuation(), u, atol=ATOL, rtol=0):
            raise ShapeError("plan split does not add up to the player's valuation")
        a_h = scale_param(n_others + plan.w)
        total = sybil_expected_utility(u, b, plan.votes(a_h), n_others)
        margin = single - total
        report.record(margin, margin >= -ATOL, idx)
    return report


def _sybil_instance(rng: np.random.Generator, omega: float, n_max: int, m_max: int):
    m = int(rng.integers(2, m_max + 1))
    n_others = int(rng.integers(0, n_max))
    u = rng.uniform(0.0, omega, size=m)
    b = random_belief(rng, m, omega, scale_param(n_others + 1))
    return u, b, n_others


def run_sybil_splits(trials: int, seed: int, ws=(2, 3, 4, 5), omega: float = 100.0,
                     n_max: int = 20, m_max: int = 6) -> PropertyReport:
    """Envelopes play optimally for random non-negative shares of the player's valuation.

    Trial 0 of every ``w`` uses the equal split, the tightest case.
    """
    report = PropertyReport("sybil-split", seed=seed)
    for wi, w in enumerate(ws):
        rep_w = PropertyReport(f"w={w}")
        for k in range(trials):
            trial = wi * trials + k
            rng = trial_rng(seed, trial, STREAMS["sybil-split"])
            u, b, n_others = _sybil_instance(rng, omega, n_max, m_max)
            split = np.tile(u / w, (w, 1)) if k == 0 else random_split(rng, u, w)
            sub = check_sybil_proofness(u, b, n_others, [SybilPlan(split)])
            rep_w.record(sub.worst_margin, sub.passed)
            report.record(sub.worst_margin, sub.passed, trial)
        report.details[f"w={w}"] = {"trials": rep_w.trials, "violations": rep_w.violations,
                                    "worst_margin": rep_w.worst_margin}
    return report


def run_sybil_random(trials: int, seed: int, ws=(2, 3, 4, 5), omega: float = 100.0,
                     n_max: int = 20, m_max: int = 6) -> PropertyReport:
    """Envelopes submit independent uniform deposits in the equilibrium deposit range.

    The range ``[0, (m-1)/2 * omega]`` is where any optimal deposit lives and
    keeps the combined votes inside the belief's feasible region.
    """
    report = PropertyReport("sybil-random", seed=seed)
    per_w = {w: [0, 0, float("inf"), -float("inf")] for w in ws}
    for k in range(trials):
        rng = trial_rng(seed, k, STREAMS["sybil-random"])
        w = ws[k % len(ws)]
        u, b, n_others = _sybil_instance(rng, omega, n_max, m_max)
        m = u.size
        a_h = scale_param(n_others + w)
        D = rng.uniform(0.0, 0.5 * (m - 1) * omega, size=(w, m))
        X = np.array([votes_from_deposits(d, a_h) for d in D])
        plan = SybilPlan(np.tile(u / w, (w, 1)), strategies=X)
        sub = check_sybil_proofness(u, b, n_others, [plan])
        report.record(sub.worst_margin, sub.passed, k)
        gain = participation_gain(u, b.p, scale_param(n_others + 1))
        stats = per_w[w]
        stats[0] += 1
        stats[1] += not sub.passed
        stats[2] = min(stats[2], sub.worst_margin)
        if gain > 0:
            stats[3] = max(stats[3], -sub.worst_margin / gain)
    for w, (n, v, worst, rel) in per_w.items():
        report.details[f"w={w}"] = {"trials": n, "violations": v, "worst_margin": worst,
                                    "max_relative_gain": rel}
    return report


def coordinated_sybil_gain(w: int) -> float:
    """Ratio of the best ``w``-envelope utility gain to the single-envelope gain.

    With the envelope counterfactuals blind to each other, the player's
    excess utility is ``p c.X - a_h p sum_q |x_q|^2`` for combined votes
    ``X``, maximised by ``w`` identical envelopes at ``X = w c / (2 a_h)``.
    That gives ``w / 1.5**(w-1)`` times the single-envelope gain.
    """
    return w / 1.5 ** (w - 1)


def run_sybil_coordinated(trials: int, seed: int, ws=(2, 3, 4, 5), omega: float = 100.0,
                          n_max: int = 20, m_max: int = 6) -> PropertyReport:
    """Each envelope repeats the single-envelope optimal deposits (``optimal_deposits(u)``)."""
    report = PropertyReport("sybil-coordinated", seed=seed)
    for k in range(trials):
        rng = trial_rng(seed, k, STREAMS["sybil-coordinated"])
        w = ws[k % len(ws)]
        u, b, n_others = _sybil_instance(rng, omega, n_max, m_max)
        a_h = scale_param(n_others + w)
        x = votes_from_deposits(optimal_deposits(u), a_h)
        plan = SybilPlan(np.tile(u / w, (w, 1)), strategies=np.tile(x, (w, 1)))
        sub = check_sybil_proofness(u, b, n_others, [plan])
        report.record(sub.worst_margin, sub.passed, k)
    report.details["predicted_gain_ratio"] = {f"w={w}": coordinated_sybil_gain(w) for w in ws}
    return report


# ------------------------------------------------------------ split inequality


def scale_ratio(n: int, w: int) -> Fraction:
    """Exact ``a_n / a_{n+w-1}`` from the float scales (exact for these sizes)."""
    return Fraction(scale_param(n)) / Fraction(scale_param(n + w - 1))


def split_inequality_sides(split) -> tuple[float, float, float]:
    """Left side and the bracketed right-hand quadratic mass for a split.

    Returns ``(lhs, rhs_mass, scale)`` where ``lhs`` is
    ``m^2 sum_j (sum_q u_qj)^2 - (sum_qj u_qj)^2`` and ``rhs_mass`` is
    ``m^2 sum_qj u_qj^2 - sum_q (sum_j u_qj)^2``.
    """
    V = np.atleast_2d(np.asarray(split, dtype=float))
    m = V.shape[1]
    col = V.sum(axis=0)
    lhs = m * m * float(col @ col) - float(V.sum()) ** 2
    rhs = m * m * float((V * V).sum()) - float((V.sum(axis=1) ** 2).sum())
    scale = max(1.0, m * m * float((V * V).sum()), m * m * float(col @ col))
    return lhs, rhs, scale


def check_split_inequality(split, n: int = 1) -> PropertyReport:
    """Split inequality at factor ``(2/3)**w`` plus the exact scale-ratio identity.

    ``w`` is the number of rows. The identity ``a_n / a_{n+w-1} == (2/3)**w``
    is checked in rational arithmetic; the ratio actually equals
    ``(2/3)**(w-1)``, which is recorded alongside.
    """
    V = np.atleast_2d(np.asarray(split, dtype=float))
    w = V.shape[0]
    report = PropertyReport("split-inequality")
    lhs, rhs, scale = split_inequality_sides(V)
    margin = lhs - (2.0 / 3.0) ** w * rhs
    ok_ineq = margin >= -1e-12 * scale
    ratio = scale_ratio(n, w)
    ok_ratio = ratio == Fraction(2, 3) ** w
    report.record(margin, ok_ineq and ok_ratio, 0)
    if not ok_ineq:
        report.bump("inequality_violations")
    if not ok_ratio:
        report.bump("ratio_identity_violations")
    if ratio == Fraction(2, 3) ** (w - 1):
        report.bump("ratio_equals_two_thirds_pow_w_minus_1")
    # same inequality at the true ratio
    if lhs - float(ratio) * rhs < -1e-12 * scale:
        report.bump("inequality_violations_at_true_ratio")
    return report


def run_split_inequality(trials: int, seed: int, ws=(2, 3, 4, 5), omega: float = 100.0,
                         m_max: int = 6, n_max: int = 20) -> PropertyReport:
    report = PropertyReport("split-inequality", seed=seed)
    for wi, w in enumerate(ws):
        for k in range(trials):
            trial = wi * trials + k
            rng = trial_rng(seed, trial, STREAMS["split-inequality"])
            m = int(rng.integers(2, m_max + 1))
            n = int(rng.integers(1, n_max + 1))
            u = rng.uniform(0.0, omega, size=m)
            split = np.tile(u / w, (w, 1)) if k == 0 else random_split(rng, u, w)
            sub = check_split_inequality(split, n)
            report.record(sub.worst_margin, sub.passed, trial)
            for key, val in sub.details.items():
                report.bump(key, val)
    return report


# ----------------------------------------------------------------- participation


def check_participation(u, b: Belief, a: float, rtol: float = 1e-9) -> PropertyReport:
    """Gain from optimal play over abstaining.

    The realised gain is ``expected_utility(x*) - expected_utility(0)``. It must
    be positive exactly when ``u`` is non-constant and match
    :func:`nominal_participation_gain` to ``rtol``. Agreement with the exact
    :func:`participation_gain` is tracked separately in ``details``.
    """
    u = np.asarray(u, dtype=float)
    report = PropertyReport("participation")
    x_star = optimal_votes(u, a)
    realised = expected_utility(u, b, x_star, a) - expected_utility(u, b, np.zeros_like(u), a)
    nominal = nominal_participation_gain(u, b.p, a)
    exact = participation_gain(u, b.p, a)
    constant = float(u.max() - u.min()) <= 1e-9
    # absolute floor for the cancellation in realised (two utilities of size ~ u)
    floor = 1e-12 * max(1.0, float(np.abs(u).sum()))

    sign_ok = (realised <= floor) if constant else (realised > 0)
    nominal_ok = abs(realised - nominal) <= rtol * abs(nominal) + floor
    exact_ok = abs(realised - exact) <= rtol * abs(exact) + floor
    if not sign_ok:
        report.bump("sign_violations")
    if not nominal_ok:
        report.bump("nominal_term_mismatches")
    if not exact_ok:
        report.bump("exact_term_mismatches")
    margin = realised if not constant else -abs(realised)
    report.record(margin if sign_ok and nominal_ok else -abs(realised - nominal),
                  sign_ok and nominal_ok, 0)
    return report


def run_participation(trials: int, seed: int, omega: float = 100.0, m_max: int = 6,
                      n_max: int = 20, constant_fraction: float = 0.1) -> PropertyReport:
    report = PropertyReport("participation", seed=seed)
    by_m: dict[int, list[int]] = {}
    for k in range(trials):
        rng = trial_rng(seed, k, STREAMS["participation"])
        m = int(rng.integers(2, m_max + 1))
        n = int(rng.integers(1, n_max + 1))
        a = scale_param(n)
        if rng.random() < constant_fraction:
            u = np.full(m, rng.uniform(0.0, omega))
        else:
            u = rng.uniform(0.0, omega, size=m)
        b = random_belief(rng, m, omega, a)
        sub = check_participation(u, b, a)
        report.record(sub.worst_margin, sub.passed, k)
        for key, val in sub.details.items():
            report.bump(key, val)
        stats = by_m.setdefault(m, [0, 0])
        stats[0] += 1
        stats[1] += not sub.passed
    report.details["by_m"] = {str(m): {"trials": t, "violations": v} for m, (t, v) in sorted(by_m.items())}
    return report


# ----------------------------------------------------------------------- surplus


def check_surplus(deposits, tie: TieBreak = TieBreak.LOWEST_INDEX) -> PropertyReport:
    """Non-negative refunds, non-negative surplus, and deposits covering refunds."""
    report = PropertyReport("surplus")
    outcome = settle_round(deposits, tie)
    refunds = outcome.refunds
    total_d = float(outcome.deposits.sum())
    margin = min(float(refunds.min()), outcome.surplus, total_d - float(refunds.sum()))
    ok = margin >= -ATOL
    if refunds.min() < -ATOL:
        report.bump("negative_refunds")
    if outcome.surplus < -ATOL:
        report.bump("negative_surplus")
    report.record(margin, ok, 0)
    return report


def run_surplus(trials: int, seed: int, h_max: int = 8, m_max: int = 6,
                omega: float = 100.0) -> PropertyReport:
    """Half the rounds use equilibrium deposits, half arbitrary non-negative deposits."""
    report = PropertyReport("surplus", seed=seed)
    modes = {"equilibrium": [0, 0], "arbitrary": [0, 0]}
    for k in range(trials):
        rng = trial_rng(seed, k, STREAMS["surplus"])
        h = int(rng.integers(1, h_max + 1))
        m = int(rng.integers(2, m_max + 1))
        mode = "equilibrium" if k % 2 == 0 else "arbitrary"
        if mode == "equilibrium":
            U = rng.uniform(0.0, omega, size=(h, m))
            D = np.array([optimal_deposits(u) for u in U])
        else:
            D = rng.uniform(0.0, omega, size=(h, m)) * (rng.random((h, m)) < 0.8)
        sub = check_surplus(D)
        report.record(sub.worst_margin, sub.passed, k)
        for key, val in sub.details.items():
            report.bump(key, val)
        modes[mode][0] += 1
        modes[mode][1] += not sub.passed
    report.details["by_mode"] = {k: {"trials": t, "violations": v} for k, (t, v) in modes.items()}
    return report


SUITES = {
    "efficiency": [run_efficiency],
    "sybil": [run_sybil_splits, run_sybil_random, run_sybil_coordinated],
    "split-inequality": [run_split_inequality],
    "participation": [run_participation],
    "surplus": [run_surplus],
}


def run_suite(prop: str, trials: int, seed: int) -> list[PropertyReport]:
    if prop == "all":
        return [rep for name in SUITES for rep in run_suite(name, trials, seed)]
    try:
        runners = SUITES[prop]
    except KeyError:
        raise ValueError(f"unknown property {prop!r}") from None
    return [run(trials, seed) for run in runners]
