import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairrecip.core import (
    ExaminationModel,
    Instance,
    InstanceError,
    Policy,
    examination_vector,
    load_instance,
    policy_from_rankings,
    rankings_from_scores,
    save_instance,
    uniform_policy,
    validate_policy,
)


def test_inverse_rank_with_threshold():
    np.testing.assert_array_equal(examination_vector(ExaminationModel("inv", 2), 3), [1.0, 0.5, 0.0])


def test_inverse_log_single_position():
    assert examination_vector(ExaminationModel("log", 1), 1).tolist() == [1.0]


def test_inverse_log_against_high_precision():
    got = examination_vector(ExaminationModel("log"), 3)
    mpmath.mp.dps = 50
    want = [float(1 / mpmath.log(k + 1, 2)) for k in (1, 2, 3)]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)
    np.testing.assert_allclose(got, [1.0, 1 / np.log2(3), 0.5], rtol=0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(["log", "inv"]), d=st.integers(1, 30), k=st.one_of(st.none(), st.integers(1, 10)))
def test_examination_non_increasing_and_zero_tail(kind, d, k):
    e = examination_vector(ExaminationModel(kind, k), d)
    assert np.all(np.diff(e) <= 0)
    cut = d if k is None else min(k, d)
    assert np.all(e[:cut] > 0)
    assert np.all(e[cut:] == 0)


def test_exam_rejects_bad_input():
    with pytest.raises(ValueError):
        ExaminationModel("quadratic")
    with pytest.raises(ValueError):
        ExaminationModel("log", 0)
    with pytest.raises(ValueError):
        examination_vector(ExaminationModel(), 0)


def test_exam_aliases():
    assert ExaminationModel("InverseLog").kind == "log"
    assert ExaminationModel("InverseRank").kind == "inv"


def test_instance_validation():
    with pytest.raises(InstanceError, match="p2 must have shape"):
        Instance(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(InstanceError, match=r"p1\[0, 1\]"):
        Instance(np.array([[0.5, 1.5]]), np.ones((2, 1)))
    with pytest.raises(InstanceError, match="non-finite"):
        Instance(np.array([[np.nan]]), np.ones((1, 1)))


def test_instance_is_immutable_copy():
    p1 = np.full((2, 2), 0.5)
    inst = Instance(p1, p1.T)
    p1[0, 0] = 0.9
    assert inst.p1[0, 0] == 0.5
    with pytest.raises(ValueError):
        inst.p1[0, 0] = 0.1
    np.testing.assert_allclose(inst.p, 0.25)


def test_uniform_two_by_one():
    inst = Instance(np.ones((2, 1)), np.ones((1, 2)))
    pol = uniform_policy(inst)
    np.testing.assert_array_equal(pol.a, np.ones((2, 1, 1)))
    np.testing.assert_array_equal(pol.b[0], np.full((2, 2), 0.5))


def test_uniform_one_by_one_and_margins():
    pol = uniform_policy(Instance(np.ones((1, 1)), np.ones((1, 1))))
    assert pol.a.tolist() == [[[1.0]]] and pol.b.tolist() == [[[1.0]]]
    inst = Instance(np.ones((3, 2)), np.ones((2, 3)))
    assert validate_policy(uniform_policy(inst), inst, tol=1e-9) == []


def test_validate_reports_row_violation():
    inst = Instance(np.ones((2, 2)), np.ones((2, 2)))
    a = np.stack([np.eye(2), np.eye(2)])
    a[0, 0, 0] = 1.5
    bad = validate_policy(Policy(a, np.stack([np.eye(2)] * 2)), inst, tol=1e-6)
    rows = [v for v in bad if v.kind == "row_sum"]
    assert rows and rows[0].matrix == "A" and rows[0].index == 0 and rows[0].position == 0
    assert "A[0]" in str(rows[0])


def test_validate_reports_shape_and_negative():
    inst = Instance(np.ones((2, 2)), np.ones((2, 2)))
    bad = validate_policy(Policy(np.ones((2, 3, 3)) / 3, np.stack([np.eye(2)] * 2)), inst)
    assert [v.kind for v in bad] == ["shape"]
    a = np.stack([np.array([[1.2, -0.2], [-0.2, 1.2]]), np.eye(2)])
    kinds = {v.kind for v in validate_policy(Policy(a, np.stack([np.eye(2)] * 2)), inst)}
    assert "negative" in kinds


def test_permutations_pass_with_zero_tolerance(rng):
    n, m = 4, 3
    left = [rng.permutation(m) for _ in range(n)]
    right = [rng.permutation(n) for _ in range(m)]
    inst = Instance(np.ones((n, m)), np.ones((m, n)))
    assert validate_policy(policy_from_rankings(left, right), inst, tol=0.0) == []


def test_policy_from_rankings_layout():
    pol = policy_from_rankings([[1, 0]], [[0], [0]])
    np.testing.assert_array_equal(pol.a[0], [[0, 1], [1, 0]])
    ident = policy_from_rankings([[0, 1, 2]] * 2, [[0, 1]] * 3)
    np.testing.assert_array_equal(ident.a, np.stack([np.eye(3)] * 2))
    np.testing.assert_array_equal(ident.b, np.stack([np.eye(2)] * 3))


def test_policy_from_rankings_rejects_non_bijection():
    with pytest.raises(ValueError, match="not a permutation"):
        policy_from_rankings([[0, 0]], [[0], [0]])


def test_rankings_tie_break_lowest_index():
    np.testing.assert_array_equal(rankings_from_scores([[0.2, 0.9, 0.5]]), [[1, 2, 0]])
    np.testing.assert_array_equal(rankings_from_scores([[0.5, 0.7, 0.5, 0.7]]), [[1, 3, 0, 2]])


def test_csv_roundtrip_and_missing_path(tmp_path, rng):
    inst = Instance(rng.random((3, 2)), rng.random((2, 3)))
    save_instance(inst, tmp_path / "a.csv", tmp_path / "b.csv")
    back = load_instance(tmp_path / "a.csv", tmp_path / "b.csv")
    np.testing.assert_array_equal(back.p1, inst.p1)
    np.testing.assert_array_equal(back.p2, inst.p2)
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_instance(tmp_path / "nope.csv", tmp_path / "b.csv")


def test_csv_rejects_out_of_range(tmp_path):
    (tmp_path / "a.csv").write_text("0.5,1.2\n")
    (tmp_path / "b.csv").write_text("0.5\n0.5\n")
    with pytest.raises(InstanceError, match="outside"):
        load_instance(tmp_path / "a.csv", tmp_path / "b.csv")
