import json
from fractions import Fraction

import numpy as np
import pytest

from envelope_voting import Belief, ShapeError, scale_param
from envelope_voting.verification import (
    SybilPlan,
    check_efficiency,
    check_participation,
    check_split_inequality,
    check_surplus,
    check_sybil_proofness,
    coordinated_sybil_gain,
    run_efficiency,
    run_suite,
    run_surplus,
    scale_ratio,
    split_inequality_sides,
)

UNIFORM3 = np.full(3, 1 / 3)


def test_efficiency_examples():
    assert check_efficiency([[3.0, 9.0, 1.0]]).passed
    rep = check_efficiency([[10, 4, 1], [0, 9, 2]])
    assert rep.passed and rep.worst_margin == pytest.approx(3.0)  # (10,13,3): 13 - 10


def test_efficiency_ignores_indifferent_player():
    U = np.array([[10, 4, 1], [0, 9, 2], [50, 50, 50.0]])
    assert check_efficiency(U).passed


def test_efficiency_tie_sets():
    rep = check_efficiency([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0]])
    assert rep.passed and rep.details["tie_cases"] == 1


def test_sybil_plan_validation():
    with pytest.raises(ShapeError):
        SybilPlan([[1.0, 2.0]])
    with pytest.raises(ShapeError):
        SybilPlan([[1.0, -2.0], [0.0, 3.0]])
    with pytest.raises(ShapeError):
        SybilPlan([[1.0, 2.0], [1.0, 1.0]], strategies=[[0.0, 0.0, 0.0]] * 2)


def test_sybil_equal_split_is_break_even():
    u = np.array([10.0, 4.0, 1.0])
    rep = check_sybil_proofness(u, Belief(UNIFORM3, 1e-3), 1, [SybilPlan([u / 2, u / 2])])
    assert rep.passed
    assert abs(rep.worst_margin) <= 1e-12


def test_sybil_null_envelopes_are_strictly_worse():
    u = np.array([10.0, 4.0, 1.0])
    b = Belief(UNIFORM3, 1e-3)
    for w in (2, 3, 4):
        x = np.zeros((w, 3))
        x[0] = np.array([5 / 3, -1 / 3, -4 / 3]) / 1.5 ** (w - 1)
        rep = check_sybil_proofness(u, b, 1, [SybilPlan(np.tile(u / w, (w, 1)), strategies=x)])
        assert rep.passed and rep.worst_margin > 0


def test_sybil_indifferent_player_has_nothing_to_gain():
    u = np.full(3, 6.0)
    rep = check_sybil_proofness(u, Belief(UNIFORM3, 1e-3), 2, [SybilPlan([u / 2, u / 2])])
    assert rep.passed and rep.worst_margin == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("w", [2, 3, 4, 5])
def test_duplicated_envelopes_gain_as_derived(w):
    u = np.array([10.0, 4.0, 1.0])
    b = Belief(UNIFORM3, 1e-3)
    n_others = 1
    a_n, a_h = scale_param(n_others + 1), scale_param(n_others + w)
    x = np.array([7.5, -1.5, -6.0]) / (2 * a_h)  # optimal votes for u at a_h
    rep = check_sybil_proofness(u, b, n_others, [SybilPlan(np.tile(u / w, (w, 1)), np.tile(x, (w, 1)))])
    single_gain = 1e-3 * 94.5 / (4 * a_n)
    attack_gain = single_gain - rep.worst_margin
    assert attack_gain / single_gain == pytest.approx(coordinated_sybil_gain(w), rel=1e-9)
    assert rep.passed == (coordinated_sybil_gain(w) <= 1.0)


def test_split_inequality_examples():
    lhs, rhs, _ = split_inequality_sides([[5, 2, 0.5], [5, 2, 0.5]])
    assert lhs == pytest.approx(828.0)
    assert rhs == pytest.approx(414.0)
    assert (4 / 9) * rhs == pytest.approx(184.0)
    rep = check_split_inequality([[5, 2, 0.5], [5, 2, 0.5]])
    assert rep.worst_margin == pytest.approx(828 - 184)
    assert rep.details.get("inequality_violations", 0) == 0


def test_split_inequality_single_row_and_zero():
    rep = check_split_inequality([[3.0, 1.0, 0.0]])
    assert rep.details.get("inequality_violations", 0) == 0
    rep = check_split_inequality(np.zeros((2, 3)))
    assert rep.worst_margin == 0.0
    assert rep.details.get("inequality_violations", 0) == 0


@pytest.mark.parametrize("w", [1, 2, 3, 4, 5])
def test_scale_ratio_is_two_thirds_to_w_minus_one(w):
    for n in (1, 2, 7, 20):
        assert scale_ratio(n, w) == Fraction(2, 3) ** (w - 1)
        assert scale_ratio(n, w) != Fraction(2, 3) ** w


def test_participation_examples():
    b = Belief(UNIFORM3, 1e-3)
    rep = check_participation([5, 5, 5], b, 2.25)
    assert rep.passed
    rep = check_participation([10, 4, 1], b, 2.25)
    # realised gain 0.0105 is a quarter of the (m-1)^2-scaled 0.042
    assert not rep.passed
    assert rep.details == {"nominal_term_mismatches": 1}
    rep = check_participation([6, 2], Belief([0.5, 0.5], 1e-3), 1.5)
    assert rep.passed and rep.worst_margin > 0


def test_surplus_examples(worked_example):
    rep = check_surplus(worked_example["deposits"])
    assert rep.passed and rep.worst_margin == pytest.approx(6.75)
    assert check_surplus([[3.0, 3.0, 3.0], [1.0, 1.0, 1.0]]).worst_margin == pytest.approx(0.0)
    rep = check_surplus([[5.0, 0.0], [0.0, 0.5]])
    assert not rep.passed and rep.details == {"negative_refunds": 1}


def test_suites_are_reproducible():
    a = run_efficiency(50, seed=9)
    b = run_efficiency(50, seed=9)
    assert a.to_json() == b.to_json()
    s1, s2 = run_surplus(200, seed=3), run_surplus(200, seed=3)
    assert s1.to_json() == s2.to_json()


def test_surplus_violation_seeds_replay():
    from envelope_voting.seeding import trial_rng
    from envelope_voting.verification import STREAMS

    rep = run_surplus(400, seed=1)
    assert rep.violations > 0
    k = rep.example_seeds[0]
    # re-draw the recorded trial by hand
    rng = trial_rng(1, k, STREAMS["surplus"])
    h, m = int(rng.integers(1, 9)), int(rng.integers(2, 7))
    if k % 2 == 0:
        D = 0.5 * (m - 1) * rng.uniform(0.0, 100.0, size=(h, m))
    else:
        D = rng.uniform(0.0, 100.0, size=(h, m)) * (rng.random((h, m)) < 0.8)
    assert not check_surplus(D).passed


def test_run_suite_all_report_names():
    reports = run_suite("all", 5, 0)
    names = [r.name for r in reports]
    assert names == ["efficiency", "sybil-split", "sybil-random", "sybil-coordinated",
                     "split-inequality", "participation", "surplus"]
    for rep in reports:
        json.loads(rep.to_json())
    with pytest.raises(ValueError):
        run_suite("nope", 1, 0)
