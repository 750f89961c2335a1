import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpiset.polynomials import Polynomial, parse_polynomial
from mpiset.sets import Membership, SemialgebraicSet

X1 = Polynomial.variable(2, 0)
X2 = Polynomial.variable(2, 1)

DISK = SemialgebraicSet([1.0 - X1 ** 2 - X2 ** 2])
BOX = SemialgebraicSet([1.0 - X1 ** 2, 1.0 - X2 ** 2])


def test_membership_trivia():
    assert DISK.contains([0.0, 0.0]) is Membership.INTERIOR
    assert DISK.contains([1.0, 0.0]) is Membership.BOUNDARY
    assert DISK.contains([1.1, 0.0]) is Membership.OUTSIDE


def test_membership_boundary_band():
    r = 1.0 + 4e-10  # g = -8e-10, inside the 1e-9 band
    assert DISK.contains([r, 0.0]) is Membership.BOUNDARY
    assert DISK.contains([1.0 + 1e-6, 0.0]) is Membership.OUTSIDE


def test_membership_dimension_mismatch():
    with pytest.raises(ValueError):
        DISK.contains([0.0, 0.0, 0.0])


def test_degree_bookkeeping():
    g1 = parse_polynomial("1 - x1^2 - x2^2", 2)
    g2 = parse_polynomial("0.5 + x1", 2)
    X = SemialgebraicSet([g1, g2])
    assert X.degrees == (2, 1)
    assert X.half_degrees == (1, 1)
    assert X.k_min == 1


def test_half_degree_rounds_up():
    g = parse_polynomial("1 - x1^2*x2", 2)  # degree 3
    X = SemialgebraicSet([g, 4.0 - X1 ** 2 - X2 ** 2])
    assert X.half_degrees[0] == 2
    assert X.k_min == 2


def test_ball_detection_unit_disk():
    assert DISK.ball_index == 0
    assert DISK.ball_radius == pytest.approx(1.0)


def test_ball_detection_rejects_non_ball():
    assert BOX.ball_index is None
    # ellipse is not a ball: coefficients differ
    ell = SemialgebraicSet([1.0 - X1 ** 2 - 2.0 * X2 ** 2])
    assert ell.ball_index is None


def test_ensure_ball_is_identity_when_present():
    same = DISK.ensure_ball_constraint(1.0)
    assert same is DISK


def test_ensure_ball_appends_constraint():
    X = BOX.ensure_ball_constraint(2.0)
    assert len(X.constraints) == 3
    assert X.ball_index == 2
    assert X.ball_radius == pytest.approx(2.0)
    assert X.k_min == 1
    # idempotent: second call does nothing
    assert X.ensure_ball_constraint(2.0) is X


def test_ensure_ball_radius_must_be_positive():
    with pytest.raises(ValueError):
        BOX.ensure_ball_constraint(0.0)
    with pytest.raises(ValueError):
        BOX.ensure_ball_constraint(-1.0)


def test_require_ball_raises_without_one():
    with pytest.raises(ValueError):
        BOX.require_ball()
    assert DISK.require_ball() == pytest.approx(1.0)


def test_constructor_rejects_bad_input():
    with pytest.raises(ValueError):
        SemialgebraicSet([])
    with pytest.raises(ValueError):
        SemialgebraicSet([Polynomial.zero(2)])
    with pytest.raises(ValueError):
        SemialgebraicSet([X1, Polynomial.variable(3, 0)])


def test_min_constraint_batch():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    vals = DISK.min_constraint_batch(pts)
    assert np.allclose(vals, [1.0, 0.0, -3.0])
    mask = DISK.interior_mask(pts)
    assert mask.tolist() == [True, False, False]


# -- sampling -----------------------------------------------------------------

def test_sample_in_ball_stays_in_ball():
    X = BOX.ensure_ball_constraint(2.0)
    pts = X.sample_in_ball(500, np.random.default_rng(3))
    assert pts.shape == (500, 2)
    assert np.all(np.linalg.norm(pts, axis=1) <= 2.0 + 1e-12)


def test_sample_interior_lands_inside():
    pts = DISK.sample_interior(200, seed=0)
    assert pts.shape == (200, 2)
    assert DISK.interior_mask(pts).all()


def test_sample_interior_deterministic():
    a = DISK.sample_interior(50, seed=11)
    b = DISK.sample_interior(50, seed=11)
    assert np.array_equal(a, b)
    c = DISK.sample_interior(50, seed=12)
    assert not np.array_equal(a, c)


def test_sample_interior_empty_set_raises():
    # {x1 >= 0} and {-x1 >= 0} has measure zero inside the ball
    thin = SemialgebraicSet([X1, -1.0 * X1]).ensure_ball_constraint(1.0)
    with pytest.raises(ValueError):
        thin.sample_interior(10, seed=0, max_batches=5)


def test_sample_boundary_disk():
    pts = np.array(DISK.sample_boundary(16, seed=5))
    assert pts.shape == (16, 2)
    radii = np.linalg.norm(pts, axis=1)
    assert np.all(np.abs(radii - 1.0) <= 1e-9)
    for x in pts:
        assert DISK.contains(x) is Membership.BOUNDARY


def test_sample_boundary_box():
    X = BOX.ensure_ball_constraint(2.0)
    pts = np.array(X.sample_boundary(16, seed=7))
    # every point sits on a face: some |x_i| = 1 (ball at R=2 is inactive)
    peak = np.max(np.abs(pts), axis=1)
    assert np.all(np.abs(peak - 1.0) <= 1e-9)


def test_sample_boundary_deterministic():
    a = np.array(DISK.sample_boundary(8, seed=9))
    b = np.array(DISK.sample_boundary(8, seed=9))
    assert np.array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_boundary_points_have_tiny_min_constraint(seed):
    pts = np.array(DISK.sample_boundary(4, seed=seed))
    vals = DISK.min_constraint_batch(pts)
    assert np.all(np.abs(vals) <= 1e-9)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-1.5, 1.5, allow_nan=False),
    st.floats(-1.5, 1.5, allow_nan=False),
)
def test_membership_cases_are_exclusive(x, y):
    m = DISK.contains([x, y])
    g = 1.0 - x * x - y * y
    if g > 1e-9:
        assert m is Membership.INTERIOR
    elif g < -1e-9:
        assert m is Membership.OUTSIDE
    else:
        assert m is Membership.BOUNDARY
