import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mutakill.killdefs import (
    InsufficientInstancesError,
    KillParams,
    KillVerdict,
    kd1_from_matrices,
    kd1_killed,
    kd2_killed,
    kd3_killed_class,
    kd4_killed,
    kdf_input_kills,
    kdf_killed,
    mutation_score,
    nki,
)
from mutakill.matrixio import CorrectnessMatrix, GroundTruth
from mutakill.stats import ContingencyTable
from oracles import textbook_cohens_d, textbook_pooled_ttest


def column(correct, total):
    return [True] * correct + [False] * (total - correct)


def matrix_from_columns(model_id, columns):
    return CorrectnessMatrix(model_id, np.array(columns, dtype=bool).T)


class TestKillParams:
    @pytest.mark.parametrize(
        "kwargs", [{"alpha": 0}, {"alpha": 1}, {"beta": -0.1}, {"tau": 0}, {"ttest_variant": "paired"}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            KillParams(**kwargs)


class TestKD1:
    def test_identical_samples(self):
        v = kd1_killed([0.8, 0.9, 0.85], [0.8, 0.9, 0.85])
        assert not v.killed and v.p_value == 1.0 and v.effect_size == 0.0

    def test_large_separation(self):
        rng = random.Random(7)
        a_n = [0.95 + rng.uniform(-0.005, 0.005) for _ in range(10)]
        a_m = [0.55 + rng.uniform(-0.005, 0.005) for _ in range(10)]
        t, p = textbook_pooled_ttest(a_n, a_m)
        d = textbook_cohens_d(a_n, a_m)
        assert p < 0.05 and d >= 0.2
        v = kd1_killed(a_n, a_m)
        assert v.killed
        assert v.p_value == pytest.approx(p, abs=1e-12)
        assert v.effect_size == pytest.approx(d, rel=1e-9)
        assert v.statistic == pytest.approx(t, rel=1e-9)

    def test_direction_clause(self):
        better_mutant = kd1_killed([0.55, 0.56, 0.54], [0.95, 0.96, 0.94])
        assert better_mutant.p_value < 0.05
        assert not better_mutant.killed
        assert not kd1_killed([0.55, 0.56, 0.54], [0.95, 0.96, 0.94], KillParams(directional=False)).killed
        # effect size is signed original minus mutant, so beta blocks it too

    def test_small_effect_blocked_by_beta(self):
        rng = np.random.default_rng(0)
        a_n = 0.80 + rng.normal(0, 0.02, 5000)
        a_m = 0.799 + rng.normal(0, 0.02, 5000)
        v = kd1_killed(a_n, a_m, KillParams(alpha=0.5))
        assert v.p_value < 0.5 and v.effect_size < 0.2 and not v.killed

    def test_needs_two_instances(self):
        cm = CorrectnessMatrix("m", [[True, False]])
        with pytest.raises(InsufficientInstancesError):
            kd1_from_matrices(cm, cm)


class TestKD2:
    def test_second_input(self):
        v = kd2_killed([True, True], [True, False], ["a", "b"])
        assert v.killed and v.killing_input_ids == ("b",)

    def test_both_wrong(self):
        assert not kd2_killed([False, False], [False, False]).killed

    def test_mutant_never_uniquely_wrong(self):
        assert not kd2_killed([False, True], [True, True]).killed

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kd2_killed([True], [True, False])


class TestKD3:
    def test_definition(self):
        gt = GroundTruth(("i1", "i2"), ("A", "B"))
        v = kd3_killed_class(["A", "B"], ["A", "C"], gt)
        assert v.per_class == {"A": False, "B": True}
        assert v.killed and v.killing_input_ids == ("i2",)
        assert v.class_score == 0.5

    def test_original_always_wrong(self):
        gt = GroundTruth(("i1", "i2", "i3"), ("A", "B", "C"))
        v = kd3_killed_class(["B", "C", "A"], ["A", "A", "A"], gt)
        assert v.per_class == {"A": False, "B": False, "C": False}
        assert not v.killed

    @pytest.mark.parametrize("seed", range(20))
    def test_brute_force(self, seed):
        rng = random.Random(seed)
        classes = ["A", "B", "C"]
        truth = [rng.choice(classes) for _ in range(12)]
        orig = [t if rng.random() < 0.7 else rng.choice(classes) for t in truth]
        mut = [t if rng.random() < 0.5 else rng.choice(classes) for t in truth]
        expected = {
            c: any(truth[t] == c and orig[t] == c and mut[t] != c for t in range(12)) for c in set(truth)
        }
        gt = GroundTruth(tuple(f"x{j}" for j in range(12)), tuple(truth))
        v = kd3_killed_class(orig, mut, gt)
        assert v.per_class == expected
        assert v.killed == any(expected.values())


class TestKD4:
    def test_identical(self):
        assert not kd4_killed(["A", "B"], ["A", "B"]).killed

    def test_truth_independent(self):
        v = kd4_killed(["A", "B"], ["B", "B"], ["t1", "t2"])
        assert v.killed and v.killing_input_ids == ("t1",)

    def test_single(self):
        assert kd4_killed(["A"], ["B"]).killed

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kd4_killed(["A"], ["A", "B"])


class TestKDFInput:
    def test_table1(self):
        kills, p, table = kdf_input_kills(column(17, 20), column(11, 20), 0.05)
        assert table == ContingencyTable(17, 3, 11, 9)
        assert not kills and p == pytest.approx(0.082, abs=5e-4)

    def test_table1_variant(self):
        kills, p, _ = kdf_input_kills(column(18, 20), column(11, 20), 0.05)
        assert kills and p == pytest.approx(0.031, abs=5e-4)

    def test_identical(self):
        kills, p, _ = kdf_input_kills(column(12, 20), column(12, 20))
        assert not kills and p == 1.0

    @given(st.permutations(column(14, 20)), st.permutations(column(6, 20)))
    def test_instance_order_irrelevant(self, o, m):
        assert kdf_input_kills(o, m)[1] == kdf_input_kills(column(14, 20), column(6, 20))[1]


class TestKDF:
    def test_one_killing_column(self):
        cols_o = [column(20, 20)] * 99 + [column(20, 20)]
        cols_m = [column(20, 20)] * 99 + [column(11, 20)]
        v = kdf_killed(matrix_from_columns("o", cols_o), matrix_from_columns("m", cols_m))
        assert v.killed and v.nki == 1 and v.killing_input_ids == ("99",)

    def test_tau_threshold(self):
        o = matrix_from_columns("o", [column(20, 20)] * 4)
        m = matrix_from_columns("m", [column(10, 20)] * 2 + [column(20, 20)] * 2)
        v = kdf_killed(o, m, params=KillParams(tau=3))
        assert v.nki == 2 and not v.killed

    def test_table1_variant_columns(self):
        o = matrix_from_columns("o", [column(18, 20)] * 5)
        m = matrix_from_columns("m", [column(11, 20)] * 5)
        v = kdf_killed(o, m, [0, 1, 2, 3, 4])
        assert v.killed and v.nki == 5
        assert nki(o, m, [0, 1, 2, 3, 4]) == 5
        assert nki(o, m, [0, 1, 2, 3, 4], alpha=0.01) == 0

    def test_bonferroni(self):
        o = matrix_from_columns("o", [column(18, 20)] * 5)
        m = matrix_from_columns("m", [column(11, 20)] * 5)
        assert kdf_killed(o, m, params=KillParams(bonferroni=True)).nki == 0

    def test_one_sided(self):
        o = matrix_from_columns("o", [column(17, 20)])
        m = matrix_from_columns("m", [column(11, 20)])
        assert not kdf_killed(o, m).killed
        assert kdf_killed(o, m, params=KillParams(one_sided=True)).killed

    def test_empty_subset(self):
        o = matrix_from_columns("o", [column(18, 20)])
        with pytest.raises(ValueError):
            kdf_killed(o, o, [])


class TestMutationScore:
    def test_ratio(self):
        vs = [KillVerdict("KDF", k) for k in (True, True, True, False)]
        assert mutation_score(vs) == 0.75

    def test_none_and_all(self):
        assert mutation_score([KillVerdict("KD2", False)] * 3) == 0.0
        assert mutation_score([KillVerdict("KD2", True)] * 3) == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            mutation_score([])
        with pytest.raises(ValueError):
            mutation_score([KillVerdict("KD2", True), KillVerdict("KDF", True)])

    @given(st.lists(st.booleans(), min_size=1), st.lists(st.booleans(), min_size=1))
    def test_union_is_weighted_mean(self, x, y):
        vx = [KillVerdict("KDF", k) for k in x]
        vy = [KillVerdict("KDF", k) for k in y]
        weighted = (mutation_score(vx) * len(x) + mutation_score(vy) * len(y)) / (len(x) + len(y))
        assert mutation_score(vx + vy) == pytest.approx(weighted, abs=1e-12)


@st.composite
def matrix_pairs(draw):
    r_o, r_m = draw(st.integers(1, 12)), draw(st.integers(1, 12))
    n = draw(st.integers(2, 25))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    p_o = rng.uniform(0, 1, n)
    p_m = rng.uniform(0, 1, n)
    o = CorrectnessMatrix("o", rng.random((r_o, n)) < p_o)
    m = CorrectnessMatrix("m", rng.random((r_m, n)) < p_m)
    k = draw(st.integers(1, n - 1))
    sub = sorted(rng.choice(n, size=k, replace=False).tolist())
    sup = sorted(set(sub) | set(rng.choice(n, size=draw(st.integers(0, n)), replace=True).tolist()))
    return o, m, sub, sup


class TestMonotoneProperties:
    @settings(max_examples=200)
    @given(matrix_pairs(), st.integers(1, 3))
    def test_kdf_and_nki(self, data, tau):
        o, m, sub, sup = data
        params = KillParams(tau=tau)
        small, big = kdf_killed(o, m, sub, params), kdf_killed(o, m, sup, params)
        assert small.nki <= big.nki
        assert not small.killed or big.killed

    @settings(max_examples=200)
    @given(matrix_pairs())
    def test_kd2_kd4_and_implication(self, data):
        o, m, sub, sup = data
        # label view: correct -> "T", wrong -> per-model wrong label
        lo = np.where(o.bits[0], "T", "W")
        lm = np.where(m.bits[0], "T", "V")
        assert not kd2_killed(o.bits[0, sub], m.bits[0, sub]).killed or kd2_killed(o.bits[0, sup], m.bits[0, sup]).killed
        assert not kd4_killed(lo[sub], lm[sub]).killed or kd4_killed(lo[sup], lm[sup]).killed
        kd2 = kd2_killed(o.bits[0], m.bits[0])
        kd4 = kd4_killed(lo, lm)
        assert set(kd2.killing_input_ids) <= set(kd4.killing_input_ids)

    @settings(max_examples=100)
    @given(matrix_pairs())
    def test_kd3(self, data):
        o, m, sub, sup = data
        truth = np.array(["A", "B", "C"] * 10)[: o.n_inputs]
        lo = np.where(o.bits[0], truth, "Z")
        lm = np.where(m.bits[0], truth, "Z")
        small = kd3_killed_class(lo[sub], lm[sub], truth[sub])
        big = kd3_killed_class(lo[sup], lm[sup], truth[sup])
        assert not small.killed or big.killed
        assert all(big.per_class[c] for c, k in small.per_class.items() if k)
