"""Deposit-based voting round: deposits -> votes -> winner -> transfers -> surplus.

Every function here is pure. Vectors are 1-D float arrays indexed by
alternative (0-based); a round is a 2-D array with one row per envelope.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateAlternatives,
    InvalidParticipantCount,
    NegativeDepositError,
    NoParticipantsError,
    NonZeroSumError,
    ShapeError,
)

ATOL = 1e-9
SCALE_BASE = 1.5


class TieBreak(str, enum.Enum):
    LOWEST_INDEX = "lowest-index"


@dataclass(frozen=True)
class TransferBreakdown:
    """Per-alternative components of one envelope's refund.

    ``r0`` is paid on alternatives that lose once the envelope is removed,
    ``r1`` on alternatives that lose when the envelope keeps only that
    coordinate, ``t`` is the mean of the envelope's other deposits.
    """

    r0: np.ndarray
    r1: np.ndarray
    t: np.ndarray
    total: float

    def to_dict(self) -> dict:
        return {
            "r0": self.r0.tolist(),
            "r1": self.r1.tolist(),
            "t": self.t.tolist(),
            "total": self.total,
        }


@dataclass(frozen=True)
class RoundOutcome:
    selected: int
    scale: float
    deposits: np.ndarray
    votes: np.ndarray
    tallies: np.ndarray
    transfers: tuple[TransferBreakdown, ...]
    surplus: float

    @property
    def refunds(self) -> np.ndarray:
        return np.array([tb.total for tb in self.transfers])

    def to_dict(self) -> dict:
        return {
            "selected": self.selected,
            "scale": self.scale,
            "deposits": self.deposits.tolist(),
            "votes": self.votes.tolist(),
            "tallies": self.tallies.tolist(),
            "transfers": [tb.to_dict() for tb in self.transfers],
            "surplus": self.surplus,
        }


def scale_param(h: int) -> float:
    """Return ``a = 1.5 ** h`` for ``h`` submitted envelopes."""
    if isinstance(h, bool) or int(h) != h or h < 1:
        raise InvalidParticipantCount(f"participant count must be a positive integer, got {h!r}")
    return SCALE_BASE ** int(h)


def _as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"{name} must be a non-empty 1-D sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite entries")
    return arr


def _as_deposits(d) -> np.ndarray:
    arr = _as_vector(d, "deposit vector")
    if np.any(arr < 0):
        raise NegativeDepositError(f"deposits must be non-negative, got {arr.tolist()}")
    return arr


def _as_matrix(rows, name: str) -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=float)
    except ValueError as exc:  # ragged input
        raise ShapeError(f"{name}: all vectors must have the same length") from exc
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected a list of equal-length vectors, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ShapeError(f"{name} is empty")
    return arr


def mean_other_deposits(d, j: int) -> float:
    """Mean of the deposits placed on every alternative except ``j``."""
    d = _as_deposits(d)
    m = d.size
    if m < 2:
        raise DegenerateAlternatives("need at least two alternatives")
    if not 0 <= j < m:
        raise IndexError(f"alternative {j} out of range for m={m}")
    return float((d.sum() - d[j]) / (m - 1))


def _other_means(d: np.ndarray) -> np.ndarray:
    m = d.shape[-1]
    return (d.sum(axis=-1, keepdims=True) - d) / (m - 1)


def votes_from_deposits(d, a: float) -> np.ndarray:
    """Convert one envelope's deposits into zero-sum votes.

    Each vote is the deposit's excess over the mean of the other deposits,
    scaled by ``1 / (a (m - 1))``.
    """
    d = _as_deposits(d)
    m = d.size
    if m < 2:
        raise DegenerateAlternatives("votes are undefined for fewer than two alternatives")
    return (d - _other_means(d)) / (a * (m - 1))


def deposits_from_votes(x, a: float, shift: float = 0.0) -> np.ndarray:
    """Smallest-form inverse of :func:`votes_from_deposits` plus a uniform ``shift``."""
    x = _as_vector(x, "vote vector")
    m = x.size
    if m < 2:
        raise DegenerateAlternatives("votes are undefined for fewer than two alternatives")
    if abs(x.sum()) > ATOL:
        raise NonZeroSumError(f"votes must sum to zero, sum is {x.sum():.3g}")
    coef = a * (m - 1) ** 2 / m
    d = coef * x + shift
    # tolerate rounding on the boundary entry
    if np.any(d < -ATOL):
        need = max(0.0, float(-(coef * x).min()))
        raise NegativeDepositError(f"shift {shift} too small; at least {need} required")
    return np.maximum(d, 0.0)


def tally(votes) -> np.ndarray:
    """Sum votes per alternative over all envelopes."""
    if isinstance(votes, np.ndarray):
        arr = votes
    else:
        lengths = {len(v) for v in votes}
        if len(lengths) > 1:
            raise ShapeError(f"vote vectors have mixed lengths {sorted(lengths)}")
        arr = np.asarray(votes, dtype=float)
    arr = _as_matrix(arr, "votes")
    return arr.sum(axis=0)


def select(totals, tie: TieBreak = TieBreak.LOWEST_INDEX) -> int:
    """Index of the alternative with the largest tally.

    Ties are exact float ties; the lowest index wins.
    """
    totals = np.asarray(totals, dtype=float)
    if totals.ndim != 1 or totals.size == 0:
        raise ShapeError("cannot select from an empty tally")
    if TieBreak(tie) is TieBreak.LOWEST_INDEX:
        return int(np.argmax(totals))
    raise ValueError(f"unsupported tie-break policy {tie!r}")  # pragma: no cover


def _check_participant(votes: np.ndarray, i: int) -> None:
    if not 0 <= i < votes.shape[0]:
        raise IndexError(f"participant {i} out of range for h={votes.shape[0]}")


def _replaced_tally(votes: np.ndarray, i: int, keep: int | None = None) -> np.ndarray:
    # re-tally with row i replaced, so exact ties resolve as in the real tally
    modified = votes.copy()
    modified[i] = 0.0
    if keep is not None:
        modified[i, keep] = votes[i, keep]
    return modified.sum(axis=0)


def counterfactual_select_zeroed(votes, i: int, tie: TieBreak = TieBreak.LOWEST_INDEX) -> int:
    """Winner when envelope ``i`` casts no votes at all."""
    votes = _as_matrix(votes, "votes")
    _check_participant(votes, i)
    return select(_replaced_tally(votes, i), tie)


def counterfactual_select_only_j(votes, i: int, j: int, tie: TieBreak = TieBreak.LOWEST_INDEX) -> int:
    """Winner when envelope ``i`` keeps its vote on ``j`` and zeroes the rest."""
    votes = _as_matrix(votes, "votes")
    _check_participant(votes, i)
    if not 0 <= j < votes.shape[1]:
        raise IndexError(f"alternative {j} out of range for m={votes.shape[1]}")
    return select(_replaced_tally(votes, i, j), tie)


def transfer_breakdown(votes, deposits, i: int, a: float,
                       tie: TieBreak = TieBreak.LOWEST_INDEX) -> TransferBreakdown:
    votes = _as_matrix(votes, "votes")
    deposits = _as_matrix(deposits, "deposits")
    if votes.shape != deposits.shape:
        raise ShapeError(f"votes {votes.shape} and deposits {deposits.shape} disagree")
    _check_participant(votes, i)
    m = votes.shape[1]
    if m < 2:
        raise DegenerateAlternatives("transfers are undefined for fewer than two alternatives")
    x = votes[i]

    w0 = select(_replaced_tally(votes, i), tie)
    r0 = a * (x.sum() - x)
    r0[w0] = 0.0

    r1 = np.empty(m)
    for j in range(m):
        r1[j] = 0.0 if select(_replaced_tally(votes, i, j), tie) == j else a * x[j]

    t = _other_means(deposits[i])
    total = float(np.sum(r0 + r1 + t))
    return TransferBreakdown(r0=r0, r1=r1, t=t, total=total)


def settle_round(deposits, tie: TieBreak = TieBreak.LOWEST_INDEX) -> RoundOutcome:
    """Run one full round over the submitted envelopes.

    ``a`` is derived from the number of envelopes actually submitted, so
    extra envelopes from one player raise it for everybody.
    """
    if deposits is None or len(deposits) == 0:
        raise NoParticipantsError("a round needs at least one envelope")
    D = _as_matrix(deposits, "deposits")
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise NegativeDepositError("deposits must be finite and non-negative")
    h, m = D.shape
    a = scale_param(h)

    if m == 1:
        # single alternative: nothing to decide, everything is refunded
        transfers = tuple(
            TransferBreakdown(r0=np.zeros(1), r1=np.zeros(1), t=D[k].copy(), total=float(D[k, 0]))
            for k in range(h)
        )
        return RoundOutcome(selected=0, scale=a, deposits=D, votes=np.zeros_like(D),
                            tallies=np.zeros(1), transfers=transfers, surplus=0.0)

    X = (D - _other_means(D)) / (a * (m - 1))
    totals = X.sum(axis=0)
    winner = select(totals, tie)
    transfers = tuple(transfer_breakdown(X, D, k, a, tie) for k in range(h))
    surplus = float(D.sum() - sum(tb.total for tb in transfers))
    return RoundOutcome(selected=winner, scale=a, deposits=D, votes=X, tallies=totals,
                        transfers=transfers, surplus=surplus)
