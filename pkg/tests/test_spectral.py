import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from minperiod.errors import DimensionTooLarge, NonSquare, NormNotComplexHomogeneous, ZeroEigenvalue
from minperiod.norms import custom, induced_norm, linf, lp, weighted
from minperiod.spectral import (
    charpoly,
    check_attainment,
    durand_kerner,
    eigenvalues,
    probe_complex_homogeneity,
    rotate_to_imaginary,
    spectral_radius,
)
from minperiod.systems import random_antihermitian, random_antisymmetric, random_normal


def test_rotation_generator_spectrum():
    ev = eigenvalues([[0, 3], [-3, 0]]).eigenvalues
    # equal moduli: ascending argument, so -3i (arg -pi/2) comes first
    np.testing.assert_allclose(ev, [-3j, 3j], atol=1e-12)


def test_diagonal_spectrum_sorted_by_modulus():
    ev = eigenvalues(np.diag([1.0, 2.0, -5.0])).eigenvalues
    np.testing.assert_allclose(ev, [-5, 2, 1], atol=1e-12)


def test_companion_matrix_roots():
    # lambda^3 - 6 lambda^2 + 11 lambda - 6 = (lambda - 1)(lambda - 2)(lambda - 3)
    C = np.array([[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    info = eigenvalues(C)
    np.testing.assert_allclose(info.eigenvalues, [3, 2, 1], atol=1e-10)
    np.testing.assert_allclose(charpoly(C), [1, -6, 11, -6], atol=1e-12)


def test_ties_ordered_by_argument_in_half_open_interval():
    ev = eigenvalues(np.diag([-1.0, 1.0, 1j, -1j])).eigenvalues
    # arguments -pi/2, 0, pi/2, pi
    np.testing.assert_allclose(ev, [-1j, 1, 1j, -1], atol=1e-12)


def test_multiple_roots_are_recovered():
    ev = eigenvalues(np.eye(4)).eigenvalues
    np.testing.assert_allclose(ev, np.ones(4), atol=1e-12)
    ev = eigenvalues([[2.0, 1.0], [0.0, 2.0]]).eigenvalues
    np.testing.assert_allclose(ev, [2, 2], atol=1e-7)


def test_zero_matrix():
    info = eigenvalues(np.zeros((3, 3)))
    assert info.max_modulus == 0.0
    np.testing.assert_array_equal(info.eigenvalues, np.zeros(3))


def test_scale_invariance_of_solver():
    for s in (1e-6, 1e6):
        ev = eigenvalues(s * np.diag([1.0, 2.0, 3.0])).eigenvalues
        np.testing.assert_allclose(ev, s * np.array([3, 2, 1]), rtol=1e-10)


def test_durand_kerner_direct():
    np.testing.assert_allclose(np.sort_complex(durand_kerner([1, 0, -4])), [-2, 2], atol=1e-12)
    np.testing.assert_allclose(durand_kerner([1, -5]), [5])


def test_size_limits():
    with pytest.raises(DimensionTooLarge):
        eigenvalues(np.eye(17))
    with pytest.raises(NonSquare):
        eigenvalues(np.ones((2, 3)))


def test_max_modulus_is_exact_maximum(rng):
    info = eigenvalues(rng.standard_normal((5, 5)))
    assert info.max_modulus == np.abs(info.eigenvalues).max()


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 10), st.booleans())
def test_trace_and_determinant_consistency(seed, n, complex_entries):
    r = np.random.default_rng(seed)
    A = r.standard_normal((n, n))
    if complex_entries:
        A = A + 1j * r.standard_normal((n, n))
    info = eigenvalues(A)
    assert len(info.eigenvalues) == n
    tr = np.trace(A)
    assert abs(info.eigenvalues.sum() - tr) <= 1e-8 * max(1.0, np.abs(A).sum())
    det = np.linalg.det(A)
    prod = np.prod(info.eigenvalues)
    assert abs(prod - det) <= 1e-8 * max(1.0, abs(det), info.max_modulus ** n)
    assert np.all(info.residuals <= 1e-8)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
def test_antihermitian_spectrum_is_imaginary(seed, n):
    ev = eigenvalues(random_antihermitian(n, seed=seed).A).eigenvalues
    assert np.all(np.abs(ev.real) <= 1e-8 * max(1.0, np.abs(ev).max()))


def test_real_input_gives_exact_real_roots():
    ev = eigenvalues(np.diag([4.0, -1.0])).eigenvalues
    assert np.all(ev.imag == 0)


# --- attainment --------------------------------------------------------------

def test_antisymmetric_attains():
    res = check_attainment(random_antisymmetric(4, seed=42).A, lp(2))
    assert res.attained and abs(res.gap) <= 1e-6


def test_non_normal_control():
    res = check_attainment([[0.0, 1.0], [-4.0, 0.0]], lp(2))
    assert not res.attained
    assert res.induced == pytest.approx(4.0, abs=1e-8)
    assert res.rho == pytest.approx(2.0, abs=1e-8)
    assert res.gap == pytest.approx(2.0, abs=1e-8)


@pytest.mark.parametrize("norm", [lp(1), lp(2), linf(), lp(1.7), weighted([1, 2, 3])])
def test_identity_attains(norm):
    res = check_attainment(np.eye(3), norm)
    assert res.attained and abs(res.gap) <= 1e-9


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 5))
def test_normal_matrices_attain_under_l2(seed, n):
    res = check_attainment(random_normal(n, seed=seed), lp(2, "complex"))
    assert abs(res.gap) <= 1e-8 * max(1.0, res.induced)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1.0, 2.0, math.inf]))
def test_spectral_radius_never_exceeds_induced_norm(seed, p):
    A = np.random.default_rng(seed).standard_normal((4, 4))
    res = check_attainment(A, lp(p))
    assert res.gap >= -res.tol
    assert res.attained == (res.gap <= res.tol)


def test_tolerance_scales_with_norm():
    res = check_attainment(1e3 * np.eye(2), lp(2), attainment_tol=1e-6)
    assert res.tol == pytest.approx(1e-3)


# --- rotation to the imaginary axis ----------------------------------------------

def test_rotate_diagonal():
    B = rotate_to_imaginary(np.diag([2.0, 1j]), 0)
    np.testing.assert_allclose(B, np.diag([2j, -1]), atol=1e-15)


def test_rotate_already_imaginary_is_identity_factor():
    A = 1.5j * np.eye(3)
    np.testing.assert_allclose(rotate_to_imaginary(A, 1), A, atol=1e-15)


def test_rotate_antihermitian_preserves_norm():
    A = random_antihermitian(3, seed=5).A
    info = eigenvalues(A)
    for j in range(3):
        lam = info.eigenvalues[j]
        if abs(lam) < 1e-9:
            continue
        B = rotate_to_imaginary(A, j)
        rotated = eigenvalues(B).eigenvalues
        assert np.min(np.abs(rotated - 1j * abs(lam))) <= 1e-8
        before = induced_norm(A, lp(2, "complex")).value
        after = induced_norm(B, lp(2, "complex")).value
        assert after == pytest.approx(before, rel=1e-9)


def test_rotate_general_complex_matrix(rng):
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    B = rotate_to_imaginary(A, 0)
    ev = eigenvalues(B).eigenvalues
    rho = spectral_radius(A)
    assert np.min(np.abs(ev - 1j * rho)) <= 1e-8 * rho


def test_rotate_zero_eigenvalue():
    with pytest.raises(ZeroEigenvalue):
        rotate_to_imaginary(np.diag([1.0, 0.0]), 1)


def test_rotate_needs_complex_homogeneous_norm():
    # l1 of the realified vector: |Re| + |Im| is not invariant under e^{i phi}
    bad = custom(lambda v: float(np.sum(np.abs(v.real) + np.abs(v.imag))), "complex")
    with pytest.raises(NormNotComplexHomogeneous):
        rotate_to_imaginary(np.diag([1.0, 2.0]), 0, norm=bad)
    with pytest.raises(NormNotComplexHomogeneous):
        probe_complex_homogeneity(bad, 2)
    assert probe_complex_homogeneity(lp(3, "complex"), 3) <= 1e-12
