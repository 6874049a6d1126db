import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fairlens import group as G
from fairlens.data import GroupPartition
from fairlens.errors import EmptyCellError, PreconditionError


def part_of(codes, k, priv):
    return GroupPartition(np.asarray(codes), k, priv)


def three_groups():
    # 5 rows per group, DP rates 0.2 / 0.4 / 0.6, privileged = the 0.6 group
    codes = np.repeat([0, 1, 2], 5)
    yhat = np.array([1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0])
    return codes, yhat


def test_group_rate_examples():
    p = part_of([0, 0, 0, 0], 2, 0)
    assert G.group_rate("DP", [1, 1, 0, 0], [0, 0, 0, 0], p, 0) == 0.5
    p = part_of([0, 0, 0], 2, 0)
    assert G.group_rate("EOpp", [1, 0, 0], [1, 1, 0], p, 0) == 0.5
    assert G.group_rate("PP", [1, 1, 1], [1, 1, 1], p, 0) == 1.0
    with pytest.raises(EmptyCellError):
        G.group_rate("EOpp", [1, 0, 0], [0, 0, 0], p, 0)


def test_forms_hand_example():
    codes, yhat = three_groups()
    part = part_of(codes, 3, 2)
    y = np.zeros_like(yhat)
    got = {f: G.probe_metric("DP", yhat, y, part, f).value for f in G.FORMS if f != "orig"}
    assert got["binarised"] == pytest.approx(0.3, abs=1e-12)
    assert got["ext"] == pytest.approx(0.2, abs=1e-12)
    assert got["alt"] == pytest.approx(0.4, abs=1e-12)
    assert got["alt_avg"] == pytest.approx(0.8 / 3, abs=1e-12)
    assert got["ext_avg"] == pytest.approx(0.4 / 3, abs=1e-12)
    with pytest.raises(PreconditionError):
        G.probe_metric("DP", yhat, y, part, "orig")


def test_names_and_term_counts():
    codes, yhat = three_groups()
    part = part_of(codes, 3, 2)
    res = G.probe_metric("peq", yhat, np.zeros_like(yhat), part, "alt")
    assert res.name == "peq.alt" and res.kind == "FPRBalance" and res.n_terms == 3
    assert G.probe_metric("DP", yhat, yhat, part, "binarised").n_terms == 1
    assert res.wall_time_ns > 0


def test_equal_rates_give_zero():
    codes = np.repeat([0, 1, 2], 4)
    yhat = np.tile([1, 0, 1, 0], 3)
    y = np.tile([1, 1, 0, 0], 3)
    part = part_of(codes, 3, 0)
    for kind in ("DP", "EOpp", "FPRBalance", "PP", "NPVParity"):
        for form in G.FORMS[1:]:
            assert G.probe_metric(kind, yhat, y, part, form).value == 0


def test_empty_cells_skip_and_flag():
    codes = np.array([0, 0, 1, 1, 2, 2])
    y = np.array([1, 0, 1, 0, 0, 0])  # group 2 has no y=1 rows
    yhat = np.array([1, 0, 0, 0, 1, 1])
    part = part_of(codes, 3, 0)
    res = G.probe_metric("EOpp", yhat, y, part, "alt_avg")
    assert res.skipped_groups == (2,)
    assert "skipped_empty_cells" in res.flags and "avg_divisor:1/3" in res.flags
    assert res.value == 1.0
    with pytest.raises(EmptyCellError):
        G.probe_metric("EOpp", yhat, y, part, "alt", strict=True)
    with pytest.raises(EmptyCellError):
        G.probe_metric("EOpp", yhat, np.zeros(6, dtype=int), part, "alt")


def test_equalized_odds_example():
    # group 0: TPR 0.8, FPR 0.1; group 1: TPR 0.6, FPR 0.3
    y0 = [1] * 5 + [0] * 10
    f0 = [1] * 4 + [0] + [1] + [0] * 9
    y1 = [1] * 5 + [0] * 10
    f1 = [1] * 3 + [0] * 2 + [1] * 3 + [0] * 7
    codes = [0] * 15 + [1] * 15
    res = G.equalized_odds(np.array(f0 + f1), np.array(y0 + y1), part_of(codes, 2, 1))
    assert res.value == pytest.approx(0.2, abs=1e-12)
    assert G.equalized_odds(np.array(y0 + y1), np.array(y0 + y1), part_of(codes, 2, 1)).value == 0


def test_equalized_odds_single_term():
    codes = np.array([0, 0, 1, 1])
    y = np.array([1, 0, 1, 1])  # group 1 has no y=0 rows
    yhat = np.array([1, 0, 0, 1])
    res = G.equalized_odds(yhat, y, part_of(codes, 2, 0))
    assert res.flags == ("single_term:EOpp",)
    assert res.value == 0.5


@pytest.mark.parametrize("r_marg,r_priv,value,passed", [
    (0.4, 0.5, 0.8, True), (0.5, 0.5, 1.0, True), (0.2, 0.5, 0.4, False)])
def test_disparate_impact(r_marg, r_priv, value, passed):
    codes = np.array([0] * 10 + [1] * 10)
    yhat = np.array([1] * int(r_priv * 10) + [0] * (10 - int(r_priv * 10))
                    + [1] * int(r_marg * 10) + [0] * (10 - int(r_marg * 10)))
    res = G.disparate_impact(yhat, part_of(codes, 2, 0))
    assert res.value == pytest.approx(value, abs=1e-12)
    assert res.detail["pass"] is passed


def test_disparate_impact_zero_privileged_rate():
    with pytest.raises(PreconditionError):
        G.disparate_impact(np.array([0, 0, 1, 1]), part_of([0, 0, 1, 1], 2, 0))


def test_disparate_treatment_examples():
    codes, yhat = three_groups()
    assert G.disparate_treatment(yhat, part_of(codes, 3, 2)).value == pytest.approx(0.2, abs=1e-12)
    res = G.disparate_treatment(np.array([0, 1, 1, 1]), part_of([0, 1, 1, 1], 2, 1))
    assert res.value == pytest.approx(0.75)
    assert res.name == "dt"


def test_conditional_statistical_parity():
    codes = np.array([0, 0, 1, 1, 0, 0, 1, 1])
    strata = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    yhat = np.array([1, 1, 1, 1, 0, 0, 0, 0])  # equal within strata, different between
    part = part_of(codes, 2, 0)
    assert G.conditional_statistical_parity(yhat, yhat, part, strata).value == 0
    one = G.conditional_statistical_parity(yhat, yhat, part, np.zeros(8))
    assert one.value == G.probe_metric("DP", yhat, yhat, part, "ext").value
    strata2 = np.array([0, 0, 0, 0, 1, 1, 1, 2])
    codes2 = np.array([0, 0, 1, 1, 0, 0, 1, 1])
    res = G.conditional_statistical_parity(yhat, yhat, part_of(codes2, 2, 0), strata2)
    assert "stratum_skipped:2" in res.flags


def test_bounded_group_loss():
    codes = np.array([0] * 10 + [1] * 10)
    losses = np.array([0.1] * 10 + [0.4] * 10)
    res = G.bounded_group_loss(losses, part_of(codes, 2, 0), 0.3)
    assert res.detail["pass"] is False and res.detail["offending"] == [1]
    assert G.bounded_group_loss(losses, part_of(codes, 2, 0), 1.0).detail["pass"] is True
    y = np.array([0, 1] * 10)
    perfect = G.bounded_group_loss(G.absolute_loss(y, y), part_of(codes, 2, 0), 0.0)
    assert perfect.value == 0 and perfect.detail["pass"]


def test_gamma_subgroup_fairness():
    # 10 rows, all y=0; group 0 (5 rows) FPR 0.4, group 1 FPR 0.0; overall 0.2
    codes = np.array([0] * 5 + [1] * 5)
    yhat = np.array([1, 1, 0, 0, 0] + [0] * 5)
    res = G.gamma_subgroup_fairness(yhat, np.zeros(10, dtype=int), part_of(codes, 2, 0))
    assert res.detail["alpha"][0] == 0.5
    assert res.detail["beta"][0] == pytest.approx(0.2)
    assert res.value == pytest.approx(0.1)
    same = G.gamma_subgroup_fairness(np.zeros(10, dtype=int), np.zeros(10, dtype=int),
                                     part_of(codes, 2, 0))
    assert same.value == 0


def test_gamma_tiny_group_weighting():
    codes = np.array([1] + [0] * 99)
    yhat = np.array([1] + [0] * 99)
    res = G.gamma_subgroup_fairness(yhat, np.zeros(100, dtype=int), part_of(codes, 2, 0))
    assert res.detail["beta"][1] == pytest.approx(0.99)
    assert res.detail["product"][1] == pytest.approx(0.0099)


def test_minimax_gap():
    y = np.zeros(10, dtype=int)
    codes = np.array([0] * 5 + [1] * 5)
    a = np.array([1, 0, 0, 0, 0, 1, 0, 0, 0, 0])  # group errors 0.2, 0.2
    b = np.array([1, 1, 0, 0, 0, 0, 0, 0, 0, 0])  # 0.4, 0.0
    res = G.minimax_gap([b, a], y, part_of(codes, 2, 0))
    assert res.detail["max_group_error"] == [0.4, 0.2]
    assert res.detail["gap"] == pytest.approx([0.2, 0.0])
    assert G.minimax_gap([a], y, part_of(codes, 2, 0)).value == 0
    assert G.minimax_gap([a, y], y, part_of(codes, 2, 0)).detail["gap"][1] == 0


def random_case(seed, n=None, k=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 201))
    k = k or int(rng.integers(2, 7))
    return (rng.integers(0, k, n), rng.integers(0, 2, n), rng.integers(0, 2, n), k,
            int(rng.integers(0, k)))


@pytest.mark.parametrize("seed", range(30))
def test_forms_match_oracle(seed):
    codes, yhat, y, k, priv = random_case(seed)
    part = part_of(codes, k, priv)
    for kind in oracles.EVENTS:
        want = oracles.forms(kind, yhat.tolist(), y.tolist(), codes.tolist(), k, priv)
        for form, value in want.items():
            if value is None:
                continue
            got = G.probe_metric(kind, yhat, y, part, form).value
            assert abs(got - value) <= 1e-12, (kind, form)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_form_ordering(seed):
    codes, yhat, y, k, priv = random_case(seed)
    part = part_of(codes, k, priv)
    for kind in ("DP", "EOpp", "FPRBalance", "PP"):
        v = {f: r.value for f, r in G.probe_forms(kind, yhat, y, part).items()}
        if "alt" in v:
            assert v["alt"] >= v["ext"] and v["alt"] >= v["alt_avg"] and v["ext"] >= v["ext_avg"]
            if "binarised" in v:
                assert v["alt"] >= v["binarised"]
        assert all(0 <= x <= 1 for x in v.values())


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_binary_degeneration(seed):
    codes, yhat, y, _, _ = random_case(seed, k=2)
    priv = seed % 2
    part = part_of(codes, 2, priv)
    for kind in ("DP", "EOpp", "FPRBalance", "PP"):
        v = {f: r.value for f, r in G.probe_forms(kind, yhat, y, part).items()}
        if "orig" in v:
            assert v["orig"] == v["binarised"] == v["alt"] == v["alt_avg"]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariances(seed):
    codes, yhat, y, k, priv = random_case(seed, k=4)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(codes))
    others = [j for j in range(k) if j != priv]
    relabel = np.arange(k)
    relabel[others] = rng.permutation(others)
    base = G.probe_forms("DP", yhat, y, part_of(codes, k, priv))
    shuffled = G.probe_forms("DP", yhat[order], y[order], part_of(codes[order], k, priv))
    renamed = G.probe_forms("DP", yhat, y, part_of(relabel[codes], k, priv))
    for f, r in base.items():
        assert shuffled[f].value == pytest.approx(r.value, abs=1e-15)
        assert renamed[f].value == pytest.approx(r.value, abs=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_other_group_metrics_match_oracle(seed):
    codes, yhat, y, k, priv = random_case(seed + 100)
    part = part_of(codes, k, priv)
    lists = yhat.tolist(), y.tolist(), codes.tolist()
    assert abs(G.gamma_subgroup_fairness(yhat, y, part).value
               - oracles.gamma_sf(*lists, k)) <= 1e-12
    if yhat[codes == priv].any():
        assert abs(G.disparate_impact(yhat, part).value
                   - oracles.disparate_impact(lists[0], lists[2], priv)) <= 1e-12
