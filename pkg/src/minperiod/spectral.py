"""Spectra of small dense matrices, the norm/spectral-radius attainment
test, and the unimodular rotation that puts an eigenvalue on the
positive imaginary axis.

Eigenvalues come from the characteristic polynomial (Faddeev-LeVerrier)
and its roots (Durand-Kerner, then one Newton step each). That is only
well conditioned for small n, hence the dimension cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionTooLarge,
    NonSquare,
    NormNotComplexHomogeneous,
    RootSolverDiverged,
    ZeroEigenvalue,
)
from .norms import VectorNorm, as_complex_field, induced_norm, lp, norm_eval

MAX_DIM = 16
ROOT_TOL = 1e-10
ATTAINMENT_TOL = 1e-6


@dataclass
class SpectralInfo:
    eigenvalues: np.ndarray
    max_modulus: float
    residuals: np.ndarray
    coefficients: np.ndarray

    def to_json(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "max_modulus": float(self.max_modulus),
            "residuals": [float(r) for r in self.residuals],
        }


@dataclass
class AttainmentResult:
    induced: float
    rho: float
    attained: bool
    gap: float
    tol: float
    exact: bool = True

    def to_json(self) -> dict:
        return {"induced": self.induced, "rho": self.rho, "attained": self.attained,
                "gap": self.gap, "tol": self.tol, "exact": self.exact}


def _square(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise NonSquare(f"expected an n x n matrix with n >= 1, got shape {A.shape}")
    return A


def charpoly(A) -> np.ndarray:
    """Monic characteristic polynomial, highest degree first.

    Faddeev-LeVerrier: M_k = A M_{k-1} + c_{n-k+1} I, c_{n-k} = -tr(A M_k)/k.
    """
    A = _square(A).astype(np.result_type(A.dtype, float))
    n = A.shape[0]
    coeffs = np.zeros(n + 1, dtype=A.dtype)
    coeffs[0] = 1
    M = np.zeros_like(A)
    eye = np.eye(n, dtype=A.dtype)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ M) / k
    return coeffs


def _polyval_with_scale(coeffs, z):
    """p(z) and sum |c_j| |z|^j, the natural size of the terms."""
    val = 0j
    scale = 0.0
    az = abs(z)
    for c in coeffs:
        val = val * z + c
        scale = scale * az + abs(c)
    return val, scale


def _residuals(coeffs, roots):
    out = []
    for z in roots:
        val, scale = _polyval_with_scale(coeffs, z)
        out.append(abs(val) / scale if scale > 0 else 0.0)
    return np.array(out)


def durand_kerner(coeffs, tol: float = ROOT_TOL, max_iter: int = 5000) -> np.ndarray:
    """All roots of a monic polynomial (highest degree first)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    n = len(coeffs) - 1
    if n == 0:
        return np.array([], dtype=complex)
    if n == 1:
        return np.array([-coeffs[1]])
    # Cauchy bound on the root moduli sets the radius of the start circle
    radius = 1 + np.max(np.abs(coeffs[1:]))
    seed = complex(0.4, 0.9)
    roots = radius * (seed / abs(seed)) ** np.arange(n)
    best = np.inf
    stale = 0
    for _ in range(max_iter):
        vals = np.polyval(coeffs, roots)
        diff = roots[:, None] - roots[None, :]
        np.fill_diagonal(diff, 1)
        delta = vals / diff.prod(axis=1)
        roots = roots - delta
        size = float(np.max(np.abs(delta) / np.maximum(1, np.abs(roots))))
        if size <= 1e-15:
            break
        # corrections of clustered roots stagnate at rounding level
        if size < 0.5 * best:
            best, stale = size, 0
        else:
            stale += 1
            if stale > 200:
                break
    roots = _merge_clusters(coeffs, roots)
    # one Newton polish per simple root
    dcoeffs = np.polyder(coeffs)
    for i, z in enumerate(roots):
        if np.sum(roots == z) > 1:
            continue
        d = np.polyval(dcoeffs, z)
        if d != 0:
            step = np.polyval(coeffs, z) / d
            if np.isfinite(step):
                cand = z - step
                if _residuals(coeffs, [cand])[0] <= _residuals(coeffs, [z])[0]:
                    roots[i] = cand
    res = _residuals(coeffs, roots)
    if not np.all(np.isfinite(roots)) or res.max() > tol:
        raise RootSolverDiverged(f"Durand-Kerner residual {res.max():.3e} above {tol:.1e}")
    return roots


def _merge_clusters(coeffs, roots, eps: float = 1e-15, deriv_tol: float = 1e-7):
    """Replace each numerically multiple root by one accurate value.

    Near an m-fold root p is rounding noise, so Durand-Kerner scatters the
    m copies over a disc of radius about eps^(1/m). The (m-1)-th derivative
    has a simple root there, which Newton's method finds from the cluster
    mean. The merge is kept only if p and its first m-1 derivatives vanish
    at that point.
    """
    n = len(roots)
    roots = roots.copy()
    derivs = [np.asarray(coeffs, dtype=complex)]
    for _ in range(n):
        derivs.append(np.polyder(derivs[-1]))
    free = set(range(n))
    for i in range(n):
        if i not in free:
            continue
        others = sorted(free - {i}, key=lambda j: abs(roots[j] - roots[i]))
        for m in range(len(others) + 1, 1, -1):
            members = [i] + others[: m - 1]
            c = roots[members].mean()
            radius = 10 * eps ** (1.0 / m) * max(1.0, abs(c))
            if np.max(np.abs(roots[members] - c)) > radius:
                continue
            q, dq = derivs[m - 1], derivs[m]
            for _ in range(50):
                d = np.polyval(dq, c)
                if d == 0:
                    break
                step = np.polyval(q, c) / d
                c = c - step
                if abs(step) <= 1e-16 * max(1.0, abs(c)):
                    break
            if not np.isfinite(c) or np.max(np.abs(roots[members] - c)) > radius:
                continue
            ok = True
            for k in range(m):
                val, scale = _polyval_with_scale(derivs[k], c)
                if scale > 0 and abs(val) / scale > deriv_tol:
                    ok = False
                    break
            if ok:
                roots[members] = c
                free -= set(members)
                break
    return roots


def _arg(z: complex) -> float:
    # principal argument in (-pi, pi]; a signed zero imaginary part must not give -pi
    return math.atan2(z.imag, z.real) if z.imag != 0 else (math.pi if z.real < 0 else 0.0)


def _order(roots: np.ndarray) -> np.ndarray:
    """Descending modulus; equal moduli by ascending argument."""
    mods = np.abs(roots)
    scale = max(1.0, float(mods.max())) if len(mods) else 1.0
    order = sorted(range(len(roots)), key=lambda i: -mods[i])
    groups, cur = [], []
    for i in order:
        if cur and abs(mods[cur[0]] - mods[i]) > 1e-9 * scale:
            groups.append(cur)
            cur = []
        cur.append(i)
    if cur:
        groups.append(cur)
    out = []
    for g in groups:
        out.extend(sorted(g, key=lambda i: _arg(roots[i])))
    return roots[out]


def eigenvalues(A) -> SpectralInfo:
    """All n eigenvalues with multiplicity, ordered for stable indexing."""
    A = _square(A)
    n = A.shape[0]
    if n > MAX_DIM:
        raise DimensionTooLarge(f"n = {n} exceeds the desk-scale limit {MAX_DIM}")
    real_input = not np.iscomplexobj(A)
    s = float(np.abs(A).max())
    if s == 0:
        roots = np.zeros(n, dtype=complex)
        coeffs = np.zeros(n + 1)
        coeffs[0] = 1
        return SpectralInfo(roots, 0.0, np.zeros(n), coeffs)
    coeffs = charpoly(A / s)
    if real_input:
        coeffs = coeffs.real
    roots = durand_kerner(coeffs)
    residuals = _residuals(coeffs, roots)
    if real_input:
        # real polynomial: drop rounding-level imaginary parts of real roots
        tiny = np.abs(roots.imag) <= 1e-12 * np.maximum(1, np.abs(roots))
        roots = np.where(tiny, roots.real + 0j, roots)
    roots = _order(roots * s)
    scaled = coeffs * s ** np.arange(n + 1)
    return SpectralInfo(roots, float(np.abs(roots).max()), residuals, scaled)


def spectral_radius(A) -> float:
    return eigenvalues(A).max_modulus


def check_attainment(A, norm: VectorNorm, attainment_tol: float = ATTAINMENT_TOL,
                     **induced_kwargs) -> AttainmentResult:
    """Compare ``||A||`` with ``max |lambda_i|``; equality means the linear
    system attains the normalized period 2*pi after rotation."""
    res = induced_norm(A, norm, **induced_kwargs)
    rho = spectral_radius(A)
    gap = res.value - rho
    tol = attainment_tol * max(1.0, res.value)
    return AttainmentResult(res.value, rho, bool(gap <= tol), float(gap), tol, res.exact)


def probe_complex_homogeneity(norm: VectorNorm, n: int, samples: int = 200, seed: int = 0,
                              tol: float = 1e-9) -> float:
    """Largest relative change of ``||e^{i phi} v||`` versus ``||v||``; raises if above tol."""
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n))
    phase = np.exp(1j * rng.uniform(-np.pi, np.pi, size=(samples, 1)))
    base = norm_eval(V, norm)
    dev = float(np.max(np.abs(norm_eval(phase * V, norm) - base) / base))
    if dev > tol:
        raise NormNotComplexHomogeneous(
            f"norm changes by {dev:.3e} under unimodular complex scalars")
    return dev


def rotate_to_imaginary(A, j: int = 0, norm: VectorNorm | None = None,
                        tol: float = 1e-9, **induced_kwargs) -> np.ndarray:
    """Return ``e^{i(pi/2 - mu)} A`` with ``mu = arg lambda_j``.

    The j-th eigenvalue becomes ``i|lambda_j|`` and, for a norm that is
    homogeneous under unimodular complex scalars, the induced norm is
    unchanged. Both facts are checked before returning.
    """
    A = _square(A).astype(complex)
    n = A.shape[0]
    norm = as_complex_field(norm if norm is not None else lp(2))
    info = eigenvalues(A)
    lam = info.eigenvalues[j]
    scale = max(1.0, info.max_modulus)
    if abs(lam) <= 1e-12 * scale:
        raise ZeroEigenvalue(f"eigenvalue {j} is zero; no rotation defined")
    probe_complex_homogeneity(norm, n, tol=tol)
    # e^{i(pi/2 - arg lam)} written as i * conj(lam) / |lam|
    factor = 1j * np.conj(lam) / abs(lam)
    B = factor * A
    target = 1j * abs(lam)
    rotated = eigenvalues(B).eigenvalues
    miss = float(np.min(np.abs(rotated - target)))
    if miss > 1e-8 * scale:
        raise RootSolverDiverged(f"rotated eigenvalue misses i|lambda| by {miss:.3e}")
    before = induced_norm(A, norm, **induced_kwargs).value
    after = induced_norm(B, norm, **induced_kwargs).value
    if abs(after - before) > 1e-6 * max(1.0, before):
        raise NormNotComplexHomogeneous(
            f"induced norm changed from {before!r} to {after!r} under rotation")
    return B
