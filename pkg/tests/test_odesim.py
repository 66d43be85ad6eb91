import io
import math

import numpy as np
import pytest

from minperiod.errors import (
    ConstantSolution,
    DimensionMismatch,
    InputError,
    NoPeriodFound,
    NonfiniteState,
    NotApplicable,
    StepTooLarge,
)
from minperiod.norms import linf
from minperiod.odesim import (
    analytic_period,
    detect_period,
    dominant_period_fft,
    integrate,
    max_step,
    realify_matrix,
)
from minperiod.systems import (
    complex_diagonal,
    from_matrix,
    make_field,
    planar_rotation,
    random_antisymmetric,
)

TWO_PI = 2 * math.pi


def test_realification_block():
    R = realify_matrix(np.array([[2j]]))
    np.testing.assert_array_equal(R, [[0, -2], [2, 0]])


def test_planar_rotation_returns_after_one_period():
    traj = integrate(planar_rotation(1).field, [1.0, 0.0], TWO_PI, TWO_PI / 4000)
    np.testing.assert_allclose(traj.states[-1], [1.0, 0.0], atol=1e-8)


def test_planar_rotation_matches_closed_form():
    traj = integrate(planar_rotation(2).field, [1.0, 0.0], 3.0, 0.005)
    t = traj.times
    exact = np.column_stack([np.cos(2 * t), -np.sin(2 * t)])
    assert np.max(np.abs(traj.states - exact)) <= 1e-9


def test_zero_field_is_constant():
    s = from_matrix(np.zeros((2, 2)))
    traj = integrate(s.field, [1.0, -2.0], 5.0, 0.5)
    assert np.all(traj.states == np.array([1.0, -2.0]))


def test_complex_diagonal_period_pi():
    s = complex_diagonal(2.0, 1, c=[1])
    traj = integrate(s.field, [1 + 0j], math.pi, max_step(s.field))
    assert traj.t_end == pytest.approx(math.pi, rel=1e-15)
    assert abs(traj.states[-1, 0] - 1) <= 1e-8
    np.testing.assert_allclose(traj.states[:, 0], s.solution(traj.times)[:, 0], atol=1e-9)


def test_step_is_an_upper_bound_dividing_the_interval():
    traj = integrate(planar_rotation(1).field, [1.0, 0.0], 1.0, 0.003)
    assert traj.h <= 0.003 and len(traj.states) - 1 == math.ceil(1 / 0.003)
    assert traj.t_end == pytest.approx(1.0, rel=1e-14)


def test_step_guard():
    with pytest.raises(StepTooLarge):
        integrate(planar_rotation(1).field, [1.0, 0.0], 1.0, 0.02)
    with pytest.raises(StepTooLarge):
        integrate(planar_rotation(1).field, [1.0, 0.0], 0.001, 0.005)
    with pytest.raises(StepTooLarge):
        integrate(planar_rotation(1).field, [1.0, 0.0], 1.0, -0.001)


def test_local_error_tolerance():
    traj = integrate(planar_rotation(1).field, [1.0, 0.0], 1.0, 0.01, tol=1e-10)
    assert traj.max_local_error <= 1e-10
    with pytest.raises(StepTooLarge):
        integrate(planar_rotation(1).field, [1.0, 0.0], 1.0, 0.01, tol=1e-16)


def test_nonlinear_field_step_halving_error():
    f = make_field(lambda x: np.array([x[1], -np.sin(x[0])]), 2, L=1.0)
    traj = integrate(f, [0.5, 0.0], 2.0, 0.01)
    assert 0 < traj.max_local_error <= 1e-10
    energy = 0.5 * traj.states[:, 1] ** 2 - np.cos(traj.states[:, 0])
    assert np.ptp(energy) <= 1e-9


def test_nonfinite_state():
    f = make_field(lambda x: x * np.nan, 1, L=1.0)
    with pytest.raises(NonfiniteState):
        integrate(f, [1.0], 1.0, 0.01)


def test_initial_state_dimension():
    with pytest.raises(DimensionMismatch):
        integrate(planar_rotation(1).field, [1.0, 0.0, 0.0], 1.0, 0.01)


def test_fourth_order_convergence():
    fld = planar_rotation(1).field
    errors = []
    for N in (700, 1400, 2800, 5600):
        traj = integrate(fld, [1.0, 0.0], TWO_PI, TWO_PI / N)
        errors.append(np.linalg.norm(traj.states[-1] - [1.0, 0.0]))
    ratios = [errors[i] / errors[i + 1] for i in range(3)]
    assert all(12 <= r <= 20 for r in ratios), ratios


def test_state_at_off_grid():
    traj = integrate(planar_rotation(1).field, [1.0, 0.0], 2.0, 0.01)
    np.testing.assert_allclose(traj.state_at(1.2345), [math.cos(1.2345), -math.sin(1.2345)],
                               atol=1e-11)


def test_csv_export():
    s = complex_diagonal(1.0, 2)
    traj = integrate(s.field, s.x0, 0.02, 0.01)
    text = traj.to_csv()
    lines = text.splitlines()
    assert lines[0] == "t,x_0_re,x_0_im,x_1_re,x_1_im"
    assert lines[1] == "0,1,0,1,0"
    assert len(lines) == 4
    buf = io.StringIO()
    traj.to_csv(buf)
    assert buf.getvalue() == text


# --- period detection ---------------------------------------------------------------

def test_period_planar_three():
    est = detect_period(planar_rotation(3).field, [1.0, 0.0])
    assert abs(est.T - TWO_PI / 3) <= 1e-6
    assert est.method == "return_map" and est.refined
    assert est.fft_agrees


def test_period_non_normal():
    est = detect_period(from_matrix([[0.0, 1.0], [-4.0, 0.0]]).field, [1.0, 0.0])
    assert abs(est.T - math.pi) <= 1e-6


def test_period_of_constant_solution():
    with pytest.raises(ConstantSolution):
        detect_period(from_matrix(np.zeros((2, 2))).field, [1.0, 1.0])
    with pytest.raises(ConstantSolution):
        detect_period(complex_diagonal(1.0, 1, c=[0]).field, [0j])


@pytest.mark.parametrize("L", [0.1, 1.0, 3.0, 10.0])
def test_normalized_period_of_planar_rotation(L):
    est = detect_period(planar_rotation(L).field, [1.0, 0.0])
    assert abs(est.T * L - TWO_PI) <= 1e-4


def test_period_is_fundamental():
    s = complex_diagonal(2.0, 3, c=[1, -1j, 0.5])
    est = detect_period(s.field, s.x0)
    assert est.T < 1.5 * TWO_PI / 2.0
    assert est.T == pytest.approx(math.pi, abs=1e-6)


def test_period_residual_in_attached_norm():
    s = planar_rotation(1, linf())
    est = detect_period(s.field, [2.0, 0.0])
    x_T = integrate(s.field, [2.0, 0.0], est.T, 0.01).states[-1]
    assert est.residual == pytest.approx(np.max(np.abs(x_T - [2.0, 0.0])), abs=1e-9)
    assert est.residual <= 1e-6 * 2.0


def test_horizon_below_floor_rejected():
    with pytest.raises(InputError):
        detect_period(planar_rotation(1).field, [1.0, 0.0], search_horizon=6.0)


def test_decaying_solution_has_no_period():
    s = from_matrix([[-0.2, 1.0], [-1.0, -0.2]])
    with pytest.raises(NoPeriodFound):
        detect_period(s.field, [1.0, 0.0], search_horizon=8 * math.pi)


def test_quasi_periodic_orbit_extends_horizon():
    # eigenfrequencies 1 and 2 on the same orbit: period 2*pi, longer than 4*pi/L = 2*pi
    A = np.zeros((4, 4))
    A[0, 1], A[1, 0] = 1.0, -1.0
    A[2, 3], A[3, 2] = 2.0, -2.0
    est = detect_period(from_matrix(A).field, [1.0, 0.0, 1.0, 0.0])
    assert est.T == pytest.approx(TWO_PI, abs=1e-6)


def test_fft_period_alone():
    traj = integrate(planar_rotation(1).field, [1.0, 0.0], 4 * TWO_PI, 0.01)
    assert dominant_period_fft(traj) == pytest.approx(TWO_PI, rel=1e-4)


def test_period_antisymmetric_dominant_plane():
    from minperiod.verify import periodic_initial_state

    s = random_antisymmetric(4, seed=3)
    est = detect_period(s.field, periodic_initial_state(s))
    assert est.T * s.L == pytest.approx(TWO_PI, abs=1e-6)


def test_period_estimate_json():
    est = detect_period(planar_rotation(1).field, [1.0, 0.0])
    data = est.to_json()
    assert list(data)[:3] == ["T", "residual", "method"]


# --- closed form ---------------------------------------------------------------------

def test_analytic_period_planar():
    est = analytic_period(planar_rotation(5))
    assert est.T == TWO_PI / 5 and est.residual == 0 and est.method == "analytic"


def test_analytic_period_complex():
    assert analytic_period(complex_diagonal(1.0, 4, c=[1, 2, 3, 4j])).T == TWO_PI


def test_analytic_period_generic():
    with pytest.raises(NotApplicable):
        analytic_period(from_matrix([[0.0, 1.0], [-4.0, 0.0]]))


def test_analytic_period_zero_amplitude():
    with pytest.raises(ConstantSolution):
        analytic_period(complex_diagonal(1.0, 1, c=[0]))


def test_detected_matches_closed_form():
    for s in (planar_rotation(0.7), complex_diagonal(2.5, 2, c=[1, 1j])):
        x0 = s.x0 if s.x0 is not None else [1.0, 0.0]
        assert detect_period(s.field, x0).T == pytest.approx(analytic_period(s).T, rel=1e-6)
