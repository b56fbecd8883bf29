"""Shared fixtures and slow-but-obvious reference implementations.

The ``ref_*`` helpers use plain Python loops and lists, written straight from
the round's rules, so they share no code with the vectorised package.
"""
from __future__ import annotations

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def ref_votes(d, a):
    m = len(d)
    out = []
    for j in range(m):
        t = sum(d[r] for r in range(m) if r != j) / (m - 1)
        out.append((d[j] - t) / (a * (m - 1)))
    return out


def ref_argmax(totals):
    best = 0
    for j in range(1, len(totals)):
        if totals[j] > totals[best]:
            best = j
    return best


def ref_transfers(votes, deposits, i, a):
    """Replay of the refund rules for envelope ``i``; returns (r0, r1, t, total)."""
    h, m = len(votes), len(votes[0])

    def tally_with(row):
        rows = [row if k == i else votes[k] for k in range(h)]
        return [sum(r[j] for r in rows) for j in range(m)]

    w0 = ref_argmax(tally_with([0.0] * m))
    r0, r1, t = [], [], []
    for j in range(m):
        r0.append(0.0 if w0 == j else a * sum(votes[i][r] for r in range(m) if r != j))
        only = [votes[i][j] if r == j else 0.0 for r in range(m)]
        r1.append(0.0 if ref_argmax(tally_with(only)) == j else a * votes[i][j])
        t.append(sum(deposits[i][r] for r in range(m) if r != j) / (m - 1))
    total = sum(r0) + sum(r1) + sum(t)
    return r0, r1, t, total


@pytest.fixture
def worked_example():
    """Two envelopes whose votes at a = 2.25 are (3, 1, -4) and (-3, 2, 1)."""
    return {
        "a": 2.25,
        "votes": np.array([[3.0, 1.0, -4.0], [-3.0, 2.0, 1.0]]),
        "deposits": np.array([[21.0, 15.0, 0.0], [0.0, 15.0, 12.0]]),
    }


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
