"""Lipschitz fields and the linear systems used as extremal and test cases."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import jsonio
from .errors import DimensionMismatch, DimensionTooSmall, InputError, MissingL, NonpositiveL
from .norms import VectorNorm, as_complex_field, check_rotation_invariance, induced_norm, lp

EXACT, DECLARED, ESTIMATED = "exact", "declared", "estimated"


@dataclass
class LipschitzField:
    """A vector field ``f`` with Lipschitz constant ``L`` under ``norm``.

    ``matrix`` is set for linear fields ``x -> A x``; the integrator and
    the batch evaluator use it directly.
    """

    func: Callable
    dimension: int
    scalar_field: str
    norm: VectorNorm
    L: float
    provenance: str
    matrix: Optional[np.ndarray] = None

    def __call__(self, x):
        return self.func(x)

    @property
    def is_complex(self) -> bool:
        return self.scalar_field == "complex"

    @property
    def is_linear(self) -> bool:
        return self.matrix is not None

    def eval_many(self, X) -> np.ndarray:
        """Evaluate on each row of ``X``."""
        X = np.asarray(X)
        if self.matrix is not None:
            return X @ self.matrix.T
        return np.array([self.func(x) for x in X])


@dataclass
class LinearSystem:
    """``x' = A x`` together with its norm and Lipschitz constant.

    ``frequency`` is known in closed form only for the planar rotation
    and the complex diagonal system; ``solution`` is the closed form of
    the latter.
    """

    A: np.ndarray
    norm: VectorNorm
    L: float
    field: LipschitzField
    kind: str = "matrix"
    spec: dict = dc_field(default_factory=dict)
    frequency: Optional[float] = None
    solution: Optional[Callable] = None
    x0: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    @property
    def is_complex(self) -> bool:
        return self.field.is_complex


def _linear_field(A, norm, L, provenance) -> LipschitzField:
    A = np.asarray(A)
    sf = "complex" if np.iscomplexobj(A) else "real"
    return LipschitzField(lambda x: A @ x, A.shape[0], sf, norm, float(L), provenance, A)


def from_matrix(A, norm: Optional[VectorNorm] = None, kind: str = "matrix",
                spec: Optional[dict] = None, seed: int = 0, **induced_kwargs) -> LinearSystem:
    """Linear system with L taken as the induced norm of A."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"system matrix must be square, got shape {A.shape}")
    if np.iscomplexobj(A) and not np.any(A.imag):
        A = A.real.copy()
    norm = norm if norm is not None else lp(2)
    if np.iscomplexobj(A):
        norm = as_complex_field(norm)
    res = induced_norm(A, norm, seed=seed, **induced_kwargs)
    prov = EXACT if res.exact else ESTIMATED
    fld = _linear_field(A, norm, res.value, prov)
    spec = spec if spec is not None else {"type": "matrix", "A": jsonio.encode_matrix(A),
                                          "norm": _norm_json(norm)}
    return LinearSystem(A, norm, res.value, fld, kind, spec)


def _norm_json(norm: VectorNorm):
    try:
        return norm.to_json()
    except InputError:
        return {"kind": "custom"}


def planar_rotation(L: float, norm: Optional[VectorNorm] = None) -> LinearSystem:
    """``x1' = L x2, x2' = -L x1``: circles of period 2*pi/L."""
    if not L > 0:
        raise NonpositiveL(f"L must be positive, got {L}")
    L = float(L)
    A = np.array([[0.0, L], [-L, 0.0]])
    norm = norm if norm is not None else lp(2)
    spec = {"type": "planar", "L": L, "norm": _norm_json(norm)}
    invariant, _ = check_rotation_invariance(norm, 2, sample_count=1000)
    if invariant:
        # A = L * (an isometry of the norm)
        fld = _linear_field(A, norm, L, EXACT)
        return LinearSystem(A, norm, L, fld, "planar", spec, frequency=L)
    system = from_matrix(A, norm, kind="planar", spec=spec)
    system.frequency = L
    return system


def complex_diagonal(L: float, n: int = 1, c=None,
                     norm: Optional[VectorNorm] = None) -> LinearSystem:
    """``x' = i L x`` on C^n; solution ``x_k(t) = c_k e^{iLt}``."""
    if not L > 0:
        raise NonpositiveL(f"L must be positive, got {L}")
    if n < 1:
        raise DimensionTooSmall("n must be >= 1")
    L = float(L)
    c = np.ones(n, dtype=complex) if c is None else np.asarray(c, dtype=complex)
    if c.shape != (n,):
        raise DimensionMismatch(f"amplitude vector has shape {c.shape}, expected ({n},)")
    norm = as_complex_field(norm if norm is not None else lp(2))
    A = 1j * L * np.eye(n)
    fld = _linear_field(A, norm, L, EXACT)

    def solution(t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * L * t)[..., None] * c

    spec = {"type": "complex_diagonal", "L": L, "n": n, "c": jsonio.encode_vector(c)}
    return LinearSystem(A, norm, L, fld, "complex_diagonal", spec, frequency=L,
                        solution=solution, x0=c.copy())


def skew_pair(a: float, b: float, norm: Optional[VectorNorm] = None) -> LinearSystem:
    """``[[0, a], [-b, 0]]``: ellipses of frequency sqrt(ab), L = max(a, b) in l2."""
    if not (a > 0 and b > 0):
        raise NonpositiveL("a and b must be positive")
    A = np.array([[0.0, float(a)], [-float(b), 0.0]])
    spec = {"type": "skew2", "a": float(a), "b": float(b)}
    if norm is not None:
        spec["norm"] = _norm_json(norm)
    return from_matrix(A, norm, kind="skew2", spec=spec)


def random_antisymmetric(n: int, scale: float = 1.0, seed: int = 0) -> LinearSystem:
    """``A = S - S^T`` with ``S`` uniform on [-scale, scale]; l2 norm attached."""
    if n < 2:
        raise DimensionTooSmall("anti-symmetric systems need n >= 2")
    rng = np.random.default_rng(seed)
    S = rng.uniform(-scale, scale, size=(n, n))
    A = S - S.T
    spec = {"type": "random_antisym", "n": n, "scale": float(scale), "seed": seed}
    return from_matrix(A, lp(2), kind="antisym", spec=spec)


def random_antihermitian(n: int, scale: float = 1.0, seed: int = 0) -> LinearSystem:
    """``A = M - M^*`` with complex uniform ``M``; l2 norm attached."""
    if n < 1:
        raise DimensionTooSmall("n must be >= 1")
    rng = np.random.default_rng(seed)
    M = rng.uniform(-scale, scale, size=(n, n)) + 1j * rng.uniform(-scale, scale, size=(n, n))
    A = M - M.conj().T
    spec = {"type": "random_antiherm", "n": n, "scale": float(scale), "seed": seed}
    return from_matrix(A, lp(2, "complex"), kind="antiherm", spec=spec)


def random_normal(n: int, scale: float = 1.0, seed: int = 0) -> np.ndarray:
    """Complex normal matrix ``U diag(lambda) U^*`` with Haar-like unitary ``U``."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    Q = Q * (np.diag(R) / np.abs(np.diag(R)))
    lam = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return (Q * lam) @ Q.conj().T


def rotated_normal(n: int, scale: float = 1.0, seed: int = 0) -> LinearSystem:
    """Random normal matrix rotated so its dominant eigenvalue is ``i rho``."""
    from .spectral import rotate_to_imaginary

    A = rotate_to_imaginary(random_normal(n, scale, seed), 0)
    spec = {"type": "rotated_normal", "n": n, "scale": float(scale), "seed": seed}
    return from_matrix(A, lp(2, "complex"), kind="rotated_normal", spec=spec)


def make_field(func: Callable, n: int, scalar_field: str = "real",
               norm: Optional[VectorNorm] = None, L: Optional[float] = None,
               box=None, pairs: int = 10_000, seed: int = 0) -> LipschitzField:
    """Wrap an arbitrary field.

    With ``L`` given the constant is taken as declared; otherwise it is
    estimated by sampling pairs in ``box`` (a lower bound on the true L).
    """
    norm = norm if norm is not None else lp(2)
    if scalar_field == "complex":
        norm = as_complex_field(norm)
    if L is not None:
        if L < 0 or not math.isfinite(L):
            raise NonpositiveL(f"declared L must be finite and >= 0, got {L}")
        return LipschitzField(func, n, scalar_field, norm, float(L), DECLARED)
    if box is None:
        raise MissingL("no Lipschitz constant declared and no domain box to estimate it on")
    from .verify import estimate_lipschitz

    fld = LipschitzField(func, n, scalar_field, norm, math.nan, ESTIMATED)
    fld.L = estimate_lipschitz(fld, box, pairs=pairs, seed=seed)
    return fld


SPEC_KEYS = {
    "planar": ({"type", "L"}, {"norm"}),
    "matrix": ({"type", "A"}, {"norm"}),
    "complex_diagonal": ({"type", "L", "n"}, {"c", "norm"}),
    "random_antisym": ({"type", "n"}, {"scale", "seed"}),
    "random_antiherm": ({"type", "n"}, {"scale", "seed"}),
    "skew2": ({"type", "a", "b"}, {"norm"}),
    "rotated_normal": ({"type", "n"}, {"scale", "seed"}),
}


def system_from_spec(spec: dict) -> LinearSystem:
    """Build a system from its JSON description (unknown keys rejected)."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise InputError("system spec must be an object with a 'type'")
    kind = spec["type"]
    if kind not in SPEC_KEYS:
        raise InputError(f"unknown system type {kind!r}")
    required, optional = SPEC_KEYS[kind]
    missing = required - set(spec)
    extra = set(spec) - required - optional
    if missing:
        raise InputError(f"system spec missing keys {sorted(missing)}")
    if extra:
        raise InputError(f"system spec has unknown keys {sorted(extra)}")
    norm = VectorNorm.from_json(spec["norm"]) if "norm" in spec else None
    if kind == "planar":
        return planar_rotation(float(spec["L"]), norm)
    if kind == "matrix":
        return from_matrix(jsonio.parse_matrix(spec["A"]), norm, spec=dict(spec))
    if kind == "complex_diagonal":
        c = jsonio.parse_vector(spec["c"]) if "c" in spec else None
        return complex_diagonal(float(spec["L"]), int(spec["n"]), c, norm)
    if kind == "skew2":
        return skew_pair(float(spec["a"]), float(spec["b"]), norm)
    scale = float(spec.get("scale", 1.0))
    seed = int(spec.get("seed", 0))
    n = int(spec["n"])
    if kind == "random_antisym":
        return random_antisymmetric(n, scale, seed)
    if kind == "random_antiherm":
        return random_antihermitian(n, scale, seed)
    return rotated_normal(n, scale, seed)
