"""Fixed-step RK4 integration and minimal-period detection.

Complex states are integrated in realified form: C^n is stored as
interleaved (re, im) pairs in R^2n, which is exactly the memory layout of
a complex128 array, so the conversion is a view.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    ConstantSolution,
    DimensionMismatch,
    InputError,
    NoPeriodFound,
    NonfiniteState,
    NotApplicable,
    StepTooLarge,
)
from .norms import norm_eval
from .systems import LinearSystem, LipschitzField

# h * L may not exceed this
STEP_GUARD = 0.01
PERIOD_RTOL = 1e-6
AMPLITUDE_FLOOR = 1e-12
FFT_AGREEMENT = 0.01


def realify_matrix(A: np.ndarray) -> np.ndarray:
    """Real 2n x 2n matrix acting on interleaved (re, im) coordinates."""
    n = A.shape[0]
    R = np.zeros((2 * n, 2 * n))
    R[0::2, 0::2] = A.real
    R[0::2, 1::2] = -A.imag
    R[1::2, 0::2] = A.imag
    R[1::2, 1::2] = A.real
    return R


def _real_rhs(fld: LipschitzField):
    if not fld.is_complex:
        return lambda y: np.asarray(fld(y), dtype=float)
    return lambda y: np.ascontiguousarray(np.asarray(fld(y.view(complex)), dtype=complex)).view(float)


def _rk4_step(rhs, y, h):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_increment(R: np.ndarray, h: float) -> np.ndarray:
    """``P - I`` for the RK4 step matrix ``P`` of ``y' = R y`` (Taylor degree 4 in hR)."""
    hR = h * R
    eye = np.eye(R.shape[0])
    return hR @ (eye + hR @ (eye / 2 + hR @ (eye / 6 + hR / 24)))


@dataclass(frozen=True)
class Trajectory:
    """States ``x(t0 + m h)`` on a uniform grid."""

    t0: float
    h: float
    states: np.ndarray
    field: LipschitzField = dc_field(repr=False)
    local_errors: np.ndarray = dc_field(repr=False, default=None)

    @property
    def scalar_field(self) -> str:
        return self.field.scalar_field

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(len(self.states))

    @property
    def t_end(self) -> float:
        return self.t0 + self.h * (len(self.states) - 1)

    @property
    def max_local_error(self) -> float:
        if self.local_errors is None or len(self.local_errors) == 0:
            return 0.0
        return float(self.local_errors.max())

    def grid_index(self, t: float):
        """Nearest grid index to ``t`` and the rounding error ``t - t_m``."""
        m = int(round((t - self.t0) / self.h))
        return m, t - (self.t0 + m * self.h)

    def state_at(self, t: float) -> np.ndarray:
        """Dense output: one RK4 sub-step from the grid point at or before ``t``."""
        m = int(math.floor((t - self.t0) / self.h))
        m = min(max(m, 0), len(self.states) - 1)
        dt = t - (self.t0 + m * self.h)
        if dt == 0:
            return self.states[m].copy()
        y = _as_real(self.states[m])
        y = _rk4_step(_real_rhs(self.field), y, dt)
        return y.view(complex) if self.field.is_complex else y

    def to_csv(self, fh=None) -> Optional[str]:
        """Write ``t, x_0_re, x_0_im, ...``; returns the text if ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        n = self.states.shape[1]
        header = ["t"]
        for k in range(n):
            header += [f"x_{k}_re", f"x_{k}_im"]
        w.writerow(header)
        for t, x in zip(self.times, self.states):
            row = [format(float(t), ".17g")]
            for v in x:
                row += [format(float(np.real(v)), ".17g"), format(float(np.imag(v)), ".17g")]
            w.writerow(row)
        return out.getvalue() if fh is None else None


def _as_real(x) -> np.ndarray:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return np.ascontiguousarray(x, dtype=complex).view(float).copy()
    return np.array(x, dtype=float)


def max_step(fld: LipschitzField) -> float:
    return math.inf if fld.L == 0 else STEP_GUARD / fld.L


def integrate(fld: LipschitzField, x0, t_end: float, h: float, t0: float = 0.0,
              tol: Optional[float] = None) -> Trajectory:
    """Classical RK4 on ``[t0, t_end]`` with step ``h``.

    ``h`` is an upper bound: the uniform step actually used is the largest
    one that divides ``t_end - t0`` into whole steps. Each step's local error is estimated by
    comparison with two half steps; with ``tol`` given, exceeding it raises
    ``StepTooLarge``.
    """
    if isinstance(fld, LinearSystem):
        fld = fld.field
    if not h > 0:
        raise StepTooLarge(f"step must be positive, got {h}")
    if h > max_step(fld) * (1 + 1e-12):
        raise StepTooLarge(f"h = {h:.6g} exceeds {STEP_GUARD}/L = {max_step(fld):.6g}")
    duration = t_end - t0
    if duration < h * (1 - 1e-12):
        raise StepTooLarge("t_end must lie at least one step after t0")
    x0 = np.asarray(x0, dtype=complex if fld.is_complex else float)
    if x0.shape != (fld.dimension,):
        raise DimensionMismatch(f"x0 has shape {x0.shape}, field dimension is {fld.dimension}")
    steps = int(math.ceil(duration / h * (1 - 1e-12)))
    h = duration / steps
    y0 = _as_real(x0)
    Y = np.empty((steps + 1, y0.size))
    Y[0] = y0
    with np.errstate(over="ignore", invalid="ignore"):
        if fld.is_linear:
            R = realify_matrix(fld.matrix) if fld.is_complex else np.asarray(fld.matrix, float)
            D = _rk4_increment(R, h)
            Dh = _rk4_increment(R, h / 2)
            # y + D y with compensated summation: the increments are small
            # against y, and plain addition loses their low bits every step
            comp = np.zeros_like(y0)
            for m in range(steps):
                inc = D @ Y[m] - comp
                Y[m + 1] = Y[m] + inc
                comp = (Y[m + 1] - Y[m]) - inc
            E = Y[:-1] @ (D - 2 * Dh - Dh @ Dh).T
        else:
            rhs = _real_rhs(fld)
            E = np.empty_like(Y[:-1])
            for m in range(steps):
                y = Y[m]
                full = _rk4_step(rhs, y, h)
                half = _rk4_step(rhs, _rk4_step(rhs, y, h / 2), h / 2)
                Y[m + 1] = full
                E[m] = full - half
                if not np.all(np.isfinite(full)):
                    break
        bad = ~np.all(np.isfinite(Y), axis=1)
    if bad.any():
        raise NonfiniteState(f"non-finite state at step {int(np.argmax(bad))}")
    # Richardson: the halved solution is ~16x more accurate, so full-step error ~ 16/15 |diff|
    errs = np.linalg.norm(E, axis=1) * (16.0 / 15.0)
    if tol is not None and errs.size and errs.max() > tol:
        raise StepTooLarge(f"local error estimate {errs.max():.3e} exceeds tol {tol:.1e}")
    states = Y.view(complex) if fld.is_complex else Y
    return Trajectory(float(t0), float(h), states, fld, errs)


@dataclass
class PeriodEstimate:
    T: float
    residual: float
    method: str
    refined: bool = False
    fft_T: Optional[float] = None
    fft_agrees: Optional[bool] = None
    h: Optional[float] = None
    horizon: Optional[float] = None
    candidates: int = 0

    def to_json(self) -> dict:
        out = {"T": self.T, "residual": self.residual, "method": self.method}
        extra = {"refined": self.refined, "fft_T": self.fft_T, "fft_agrees": self.fft_agrees,
                 "h": self.h, "horizon": self.horizon, "candidates": self.candidates}
        out.update({k: v for k, v in extra.items() if v is not None})
        return out


def dominant_period_fft(traj: Trajectory, component: int = 0) -> Optional[float]:
    """Period of the strongest Fourier mode of one component.

    The peak of a zero-padded Hann-windowed DFT is refined within one bin
    by maximizing the power of a least-squares fit of one Fourier mode plus
    a constant (a cos/sin pair for real signals), which removes the bias
    from the mirror frequency and from the mean. None if the component is
    flat.
    """
    x = traj.states[:, component]
    x = x - x.mean()
    if np.max(np.abs(x)) <= AMPLITUDE_FLOOR * max(1.0, float(np.max(np.abs(traj.states)))):
        return None
    N = len(x)
    t = traj.h * np.arange(N)
    pad = 16 * N
    w = np.hanning(N)
    if np.iscomplexobj(x):
        X = np.abs(np.fft.fft(x * w, pad))
        freqs = np.fft.fftfreq(pad, traj.h)
    else:
        X = np.abs(np.fft.rfft(x * w, pad))
        freqs = np.fft.rfftfreq(pad, traj.h)
    X[0] = 0
    k = int(np.argmax(X))
    if k == 0:
        return None
    f0 = freqs[k]
    bin_width = 1.0 / (N * traj.h)
    if np.iscomplexobj(x):
        def power(f):
            basis = np.column_stack([np.exp(2j * np.pi * f * t), np.ones(N)])
            coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
            return float(np.sum(np.abs(basis @ coef) ** 2))
    else:
        def power(f):
            basis = np.column_stack([np.cos(2 * np.pi * f * t), np.sin(2 * np.pi * f * t),
                                     np.ones(N)])
            coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
            return float(np.sum((basis @ coef) ** 2))
    res = minimize_scalar(lambda f: -power(f), bounds=(f0 - bin_width, f0 + bin_width),
                          method="bounded",
                          options={"xatol": 1e-12 * abs(f0)})
    f = abs(res.x)
    return 1.0 / f if f > 0 else None


def _refine_return(traj: Trajectory, x0, s: float, iterations: int = 8) -> float:
    """Newton steps on g(s) = Re<x(s) - x0, f(x(s))>, using g'(s) ~ |f(x(s))|^2."""
    fld = traj.field
    for _ in range(iterations):
        x = traj.state_at(s)
        fx = np.asarray(fld(x))
        g = float(np.real(np.vdot(fx, x - x0)))
        gp = float(np.real(np.vdot(fx, fx)))
        if gp == 0:
            break
        step = -g / gp
        s += step
        if abs(step) <= 1e-15 * max(1.0, abs(s)):
            break
    return s


def detect_period(fld, x0, search_horizon: Optional[float] = None, h: Optional[float] = None,
                  period_tol: Optional[float] = None, max_extensions: int = 6) -> PeriodEstimate:
    """Smallest ``T > 0`` with ``x(T) = x(0)``, from the return map ``|x(s) - x0|``.

    Local minima of the squared Euclidean return distance on the grid are
    located by a three-point parabola and polished with Newton steps on its
    derivative. The first candidate whose residual (in the field's norm) is
    within ``period_tol`` times the largest state norm (default 1e-6) is
    returned. A windowed DFT of one component gives an independent period.

    Without an explicit ``search_horizon`` the scan starts at ``4*pi/L``
    and doubles up to ``max_extensions`` times before giving up.
    """
    if isinstance(fld, LinearSystem):
        fld = fld.field
    x0 = np.asarray(x0, dtype=complex if fld.is_complex else float)
    L = fld.L
    if L == 0:
        # f is constant: either a rest point or uniform drift
        if np.all(np.asarray(fld(x0)) == 0):
            raise ConstantSolution("L = 0 and f(x0) = 0: constant solution")
        raise NoPeriodFound("L = 0 with f(x0) != 0: solution drifts, no period")
    floor = 4 * math.pi / L
    if search_horizon is None:
        horizons = [floor * 2 ** i for i in range(max_extensions + 1)]
    else:
        if search_horizon < floor * (1 - 1e-12):
            raise InputError(f"search horizon {search_horizon:.6g} below 4*pi/L = {floor:.6g}")
        horizons = [search_horizon]
    h = max_step(fld) if h is None else h
    for horizon in horizons:
        traj = integrate(fld, x0, horizon, h)
        est = _scan_returns(traj, x0, period_tol)
        if est is not None:
            _fft_cross_check(traj, est)
            return est
    raise NoPeriodFound(f"no return to x0 on [0, {traj.t_end:.6g}]")


def _scan_returns(traj: Trajectory, x0, period_tol) -> Optional[PeriodEstimate]:
    fld, h = traj.field, traj.h
    X = traj.states
    scale = float(np.max(norm_eval(X, fld.norm)))
    D = np.sum(np.abs(X - x0) ** 2, axis=1)
    diameter = math.sqrt(float(D.max()))
    if scale == 0 or diameter <= AMPLITUDE_FLOOR * scale:
        raise ConstantSolution("trajectory diameter below the amplitude floor")
    tol = (PERIOD_RTOL if period_tol is None else period_tol) * scale
    interior = np.arange(1, len(D) - 1)
    is_min = (D[interior] <= D[interior - 1]) & (D[interior] < D[interior + 1])
    checked = 0
    for m in interior[is_min]:
        checked += 1
        a, b, c = D[m - 1], D[m], D[m + 1]
        curv = a - 2 * b + c
        s = traj.times[m] + (0.5 * h * (a - c) / curv if curv > 0 else 0.0)
        s = _refine_return(traj, x0, s)
        if not (h <= s <= traj.t_end):
            continue
        resid = float(norm_eval(traj.state_at(s) - x0, fld.norm))
        if resid <= tol:
            return PeriodEstimate(float(s), resid, "return_map", True, h=h,
                                  horizon=traj.t_end, candidates=checked)
    return None


def _fft_cross_check(traj: Trajectory, est: PeriodEstimate) -> None:
    amp = np.max(np.abs(traj.states - traj.states.mean(axis=0)), axis=0)
    comp = 0 if amp[0] > AMPLITUDE_FLOOR * max(1.0, float(amp.max())) else int(np.argmax(amp))
    T_fft = dominant_period_fft(traj, comp)
    if T_fft is None:
        return
    est.fft_T = T_fft
    est.fft_agrees = bool(abs(T_fft - est.T) <= FFT_AGREEMENT * est.T)


def analytic_period(system: LinearSystem, x0=None) -> PeriodEstimate:
    """``T = 2*pi / L`` for the planar rotation and the complex diagonal system."""
    if system.kind not in ("planar", "complex_diagonal") or system.frequency is None:
        raise NotApplicable(f"no closed-form period for a {system.kind!r} system")
    x = system.x0 if x0 is None else np.asarray(x0)
    if x is not None and not np.any(np.asarray(x) != 0):
        raise ConstantSolution("zero initial state: constant solution")
    return PeriodEstimate(2 * math.pi / system.frequency, 0.0, "analytic", False)
