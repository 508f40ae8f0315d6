import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylab.geometry import (HormanderSystem, PhasePoint, check_hormander_order2,
                             commutator_value, constant_field, dilate,
                             homogeneous_norm, japanese_bracket, nilpotent_data,
                             pointwise_diagonalize, pointwise_rank,
                             scaled_axis_field)


def grushin_fields():
    X1 = constant_field(2, 0)
    X2 = scaled_axis_field(2, 1, lambda x: x[0], lambda x: np.array([1.0, 0.0]),
                           name="x1 d2")
    return X1, X2


def test_phase_point_validation():
    with pytest.raises(ValueError):
        PhasePoint(np.array([1.0, 2.0]), np.array([1.0]))
    p = PhasePoint(np.array([3.0, 4.0]), np.array([0.0, 0.0]))
    assert p.n == 2
    assert japanese_bracket(p) == pytest.approx(np.sqrt(26.0))


def test_constant_field_value_and_jacobian():
    f = constant_field(3, 1, scale=2.5)
    x = np.array([0.3, -1.0, 7.0])
    assert np.array_equal(f.value(x), np.array([0.0, 2.5, 0.0]))
    assert np.array_equal(f.jacobian(x), np.zeros((3, 3)))


def test_field_without_gradients_rejects_jacobian():
    from weylab.geometry import VectorField
    f = VectorField(2, [lambda x: x[0], lambda x: 0.0], name="no grads")
    assert f.value(np.array([2.0, 0.0]))[0] == 2.0
    with pytest.raises(ValueError):
        f.jacobian(np.array([1.0, 0.0]))


def test_commutator_recovers_missing_direction():
    X1, X2 = grushin_fields()
    for x in (np.array([0.0, 0.0]), np.array([2.0, -3.0]), np.array([-0.5, 1.0])):
        c = commutator_value(X1, X2, x)
        # [d1, x1 d2] = d2 exactly, independent of the base point
        assert np.allclose(c, np.array([0.0, 1.0]), atol=1e-14)


def test_pointwise_rank_drops_on_degenerate_line():
    sys = HormanderSystem(list(grushin_fields()), 2)
    assert pointwise_rank(sys, np.array([1.0, 0.0])) == 2
    assert pointwise_rank(sys, np.array([0.0, 5.0])) == 1


def test_order2_bracket_condition():
    sys = HormanderSystem(list(grushin_fields()), 2)
    sample = [np.array([0.0, 0.0]), np.array([0.0, 2.0]), np.array([1.0, 1.0])]
    rep = check_hormander_order2(sys, sample)
    assert rep.passed
    # a single field can never span the plane, brackets included
    lone = HormanderSystem([constant_field(2, 0)], 2)
    assert not check_hormander_order2(lone, sample).passed


def test_nilpotent_data_on_degenerate_sample():
    sys = HormanderSystem(list(grushin_fields()), 2)
    sample = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.3, 2.0])]
    data = nilpotent_data(sys, sample)
    assert data.r0 == 1
    assert data.Q == 3  # 2n - r0
    assert data.degree_sum == 3  # r0 + 2(n - r0)


def test_nilpotent_data_nondegenerate_sample():
    sys = HormanderSystem(list(grushin_fields()), 2)
    sample = [np.array([1.0, 0.0]), np.array([-2.0, 1.0])]
    data = nilpotent_data(sys, sample)
    assert data.r0 == 2
    assert data.Q == 2


def test_dilate_layers():
    v = np.array([1.0, 2.0, 3.0])
    out = dilate(2.0, v, 1)
    assert np.array_equal(out, np.array([2.0, 8.0, 12.0]))
    with pytest.raises(ValueError):
        dilate(2.0, v, 4)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.01, max_value=100.0),
       st.integers(min_value=1, max_value=3),
       st.lists(st.floats(min_value=-10.0, max_value=10.0),
                min_size=3, max_size=3))
def test_homogeneous_norm_scales_exactly(a, r0, coords):
    v = np.array(coords)
    lhs = homogeneous_norm(dilate(a, v, r0), r0)
    rhs = a * homogeneous_norm(v, r0)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_pointwise_diagonalize_degenerate_block(profile):
    def a2_matrix(x):
        return np.array([[1.0, 0.0], [0.0, profile(x[0])]])

    d = pointwise_diagonalize(a2_matrix, np.array([1.5, 0.0]))
    lam = np.sort(d.eigenvalues)[::-1]
    assert lam[0] == pytest.approx(2.25)  # profile(1.5) = 2.25 > 1
    assert lam[1] == pytest.approx(1.0)
    assert abs(np.linalg.det(d.theta) - 1.0) < 1e-10
    # quadratic form is reproduced by the rotated frame
    rng = np.random.default_rng(5)
    for _ in range(20):
        xi = rng.normal(size=2)
        direct = xi @ a2_matrix(np.array([1.5, 0.0])) @ xi
        rotated = np.sum(d.eigenvalues * (d.theta @ xi) ** 2)
        assert direct == pytest.approx(rotated, rel=1e-12)


def test_pointwise_diagonalize_rejects_bad_input():
    with pytest.raises(ValueError):
        pointwise_diagonalize(lambda x: np.array([[0.0, 1.0], [0.0, 0.0]]),
                              np.zeros(2))
    with pytest.raises(ValueError):
        pointwise_diagonalize(lambda x: np.array([[-1.0, 0.0], [0.0, 1.0]]),
                              np.zeros(2))
