"""Vector norms on R^n / C^n and the matrix norms they induce.

Vectors may be real or complex. Every norm evaluates along the last
axis, so a ``(m, n)`` batch yields ``m`` values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooSmall,
    MalformedNorm,
    NonSquare,
    OptimizerStall,
)

# Above this exponent lp is evaluated as l-infinity.
P_INF_THRESHOLD = 64.0

# Step-size adaptation of the hill climber.
STEP_GROW = 1.5
STEP_SHRINK = 0.9

KINDS = ("lp", "linf", "weighted", "custom")
FIELDS = ("real", "complex")


@dataclass(frozen=True)
class VectorNorm:
    """A norm specification.

    ``kind`` is one of ``lp``, ``linf``, ``weighted`` or ``custom``. A
    weighted norm is ``||w * x||_p`` with ``p`` defaulting to 2. A custom
    norm wraps ``func``; set ``vectorized=True`` if ``func`` already
    reduces over the last axis of a batch.
    """

    kind: str = "lp"
    p: float = 2.0
    weights: Optional[tuple] = None
    func: Optional[Callable] = field(default=None, compare=False)
    scalar_field: str = "real"
    vectorized: bool = False
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MalformedNorm(f"unknown norm kind {self.kind!r}")
        if self.scalar_field not in FIELDS:
            raise MalformedNorm(f"unknown scalar field {self.scalar_field!r}")
        if self.kind in ("lp", "weighted"):
            p = float(self.p)
            if math.isnan(p) or p < 1:
                raise MalformedNorm(f"exponent p must lie in [1, inf], got {self.p}")
        if self.kind == "weighted":
            if self.weights is None or len(self.weights) == 0:
                raise MalformedNorm("weighted norm needs a weight vector")
            w = np.asarray(self.weights, dtype=float)
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise MalformedNorm("weights must be positive and finite")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if self.kind == "custom" and not callable(self.func):
            raise MalformedNorm("custom norm needs a callable")

    @property
    def effective_p(self) -> float:
        """Exponent actually used: ``inf`` for linf and for p above the threshold."""
        if self.kind == "linf":
            return math.inf
        if self.kind in ("lp", "weighted"):
            return math.inf if self.p > P_INF_THRESHOLD else float(self.p)
        return math.nan

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "custom":
            return "custom"
        p = self.effective_p
        base = "linf" if math.isinf(p) else f"l{p:g}"
        if self.kind == "weighted":
            return f"weighted-{base}{list(self.weights)}"
        return base

    def __call__(self, v):
        return norm_eval(v, self)

    def to_json(self) -> dict:
        if self.kind == "lp":
            return {"kind": "lp", "p": float(self.p)}
        if self.kind == "linf":
            return {"kind": "linf"}
        if self.kind == "weighted":
            out = {"kind": "weighted", "weights": list(self.weights)}
            if self.p != 2.0:
                out["p"] = float(self.p)
            return out
        raise MalformedNorm("custom norms have no JSON form")

    @classmethod
    def from_json(cls, spec: dict, scalar_field: str = "real") -> "VectorNorm":
        if not isinstance(spec, dict) or "kind" not in spec:
            raise MalformedNorm(f"norm spec must be an object with 'kind': {spec!r}")
        kind = str(spec["kind"]).lower()
        allowed = {"lp": {"kind", "p"}, "linf": {"kind"}, "weighted": {"kind", "weights", "p"}}
        if kind not in allowed:
            raise MalformedNorm(f"unknown norm kind {kind!r}")
        extra = set(spec) - allowed[kind]
        if extra:
            raise MalformedNorm(f"unexpected keys in norm spec: {sorted(extra)}")
        if kind == "lp":
            if "p" not in spec:
                raise MalformedNorm("lp norm needs 'p'")
            p = spec["p"]
            p = math.inf if isinstance(p, str) and p.lower() in ("inf", "infinity") else p
            if math.isinf(float(p)):
                return cls("linf", scalar_field=scalar_field)
            return cls("lp", p=float(p), scalar_field=scalar_field)
        if kind == "linf":
            return cls("linf", scalar_field=scalar_field)
        return cls("weighted", p=float(spec.get("p", 2.0)),
                   weights=tuple(spec.get("weights") or ()), scalar_field=scalar_field)


def lp(p: float, scalar_field: str = "real") -> VectorNorm:
    if math.isinf(p):
        return VectorNorm("linf", scalar_field=scalar_field)
    return VectorNorm("lp", p=p, scalar_field=scalar_field)


def linf(scalar_field: str = "real") -> VectorNorm:
    return VectorNorm("linf", scalar_field=scalar_field)


def weighted(weights, p: float = 2.0, scalar_field: str = "real") -> VectorNorm:
    return VectorNorm("weighted", p=p, weights=tuple(weights), scalar_field=scalar_field)


def custom(func: Callable, scalar_field: str = "real", vectorized: bool = False,
           name: Optional[str] = None) -> VectorNorm:
    return VectorNorm("custom", func=func, scalar_field=scalar_field,
                      vectorized=vectorized, name=name)


def as_complex_field(norm: VectorNorm) -> VectorNorm:
    """Same norm, declared over C^n."""
    if norm.scalar_field == "complex":
        return norm
    return VectorNorm(norm.kind, p=norm.p, weights=norm.weights, func=norm.func,
                      scalar_field="complex", vectorized=norm.vectorized, name=norm.name)


def _lp_abs(a: np.ndarray, p: float):
    """p-norm of nonnegative entries along the last axis, overflow-safe."""
    if math.isinf(p):
        return a.max(axis=-1)
    if p == 1.0:
        return a.sum(axis=-1)
    if p == 2.0:
        scale = a.max(axis=-1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        return np.sqrt(((a / safe) ** 2).sum(axis=-1)) * safe[..., 0]
    scale = a.max(axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    return ((a / safe) ** p).sum(axis=-1) ** (1.0 / p) * safe[..., 0]


def norm_eval(v, norm: VectorNorm):
    """Evaluate ``norm`` on ``v`` (reduces the last axis)."""
    v = np.asarray(v)
    if v.ndim == 0 or v.shape[-1] < 1:
        raise DimensionMismatch("vector must have dimension >= 1")
    if norm.kind == "custom":
        if norm.vectorized or v.ndim == 1:
            out = norm.func(v)
        else:
            flat = v.reshape(-1, v.shape[-1])
            out = np.array([norm.func(row) for row in flat]).reshape(v.shape[:-1])
        return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)
    a = np.abs(v)
    if norm.kind == "weighted":
        if len(norm.weights) != v.shape[-1]:
            raise DimensionMismatch(
                f"weights have length {len(norm.weights)}, vector has {v.shape[-1]}")
        a = a * np.asarray(norm.weights)
    out = _lp_abs(a, norm.effective_p)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class InducedNormResult:
    value: float
    witness: np.ndarray
    exact: bool
    restarts_used: int
    method: str = ""
    stalled: bool = False

    @property
    def lower_bound(self) -> bool:
        """Non-exact values come from a witness vector, hence bound ||A|| from below."""
        return not self.exact

    def to_json(self) -> dict:
        w = self.witness
        if np.iscomplexobj(w):
            wj = [[float(x.real), float(x.imag)] for x in w]
        else:
            wj = [float(x) for x in w]
        return {"value": float(self.value), "exact": self.exact,
                "lower_bound": self.lower_bound, "restarts_used": self.restarts_used,
                "method": self.method, "stalled": self.stalled, "witness": wj}


def _check_square(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise NonSquare(f"expected an n x n matrix with n >= 1, got shape {A.shape}")
    return A


def _l2_power(A: np.ndarray, rtol: float, max_iter: int = 1000):
    """Largest singular value by power iteration on A*A.

    The iteration is started from a column of (A*A)^(2^m), obtained by
    repeated squaring, so that clustered top singular values do not
    stall it.
    """
    n = A.shape[0]
    B = A.conj().T @ A
    scale = np.abs(B).max()
    if scale == 0:
        e = np.zeros(n, dtype=A.dtype)
        e[0] = 1
        return 0.0, e
    M = B / scale
    for _ in range(64):
        M2 = M @ M
        s = np.abs(M2).max()
        if s == 0:
            break
        M2 /= s
        done = np.max(np.abs(M2 - M)) <= 1e-15
        M = M2
        if done:
            break
    v = M[:, int(np.argmax(np.linalg.norm(M, axis=0)))]
    v = v / np.linalg.norm(v)
    lam = float(np.vdot(v, B @ v).real)
    for _ in range(max_iter):
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
        lam_new = float(np.vdot(v, B @ v).real)
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return float(np.linalg.norm(A @ v)), v


def _exact_route(A: np.ndarray, norm: VectorNorm, rtol: float):
    """Closed form for (weighted) l1, l2 and l-infinity, else None."""
    if norm.kind not in ("lp", "linf", "weighted"):
        return None
    p = norm.effective_p
    if p not in (1.0, 2.0, math.inf):
        return None
    if norm.kind == "weighted":
        w = np.asarray(norm.weights)
        if len(w) != A.shape[0]:
            raise DimensionMismatch("weights do not match the matrix dimension")
        # ||A||_W = ||W A W^-1||_p with witness W^-1 y
        Aw = (w[:, None] * A) / w[None, :]
    else:
        w = None
        Aw = A
    n = A.shape[0]
    if p == 1.0:
        cols = np.abs(Aw).sum(axis=0)
        j = int(np.argmax(cols))
        y = np.zeros(n, dtype=A.dtype)
        y[j] = 1
        method = "max-column-sum"
    elif math.isinf(p):
        rows = np.abs(Aw).sum(axis=1)
        i = int(np.argmax(rows))
        r = Aw[i]
        mag = np.abs(r)
        y = np.where(mag > 0, np.conj(r) / np.where(mag > 0, mag, 1), 1).astype(
            np.result_type(A.dtype, float))
        method = "max-row-sum"
    else:
        _, y = _l2_power(Aw.astype(np.result_type(Aw.dtype, float)), rtol)
        method = "power-iteration"
    z = y / w if w is not None else y
    z = z / norm_eval(z, norm)
    value = float(norm_eval(A @ z, norm))
    return InducedNormResult(value, z, True, 0, method)


def _structured_starts(n: int, budget: int) -> list:
    """Coordinate axes and sign vertices, the extreme points of the l1/linf balls."""
    starts = [np.eye(n)[j] for j in range(n)]
    if n <= 16 and 2 ** (n - 1) + n <= budget // 2:
        for bits in range(2 ** (n - 1)):
            s = np.ones(n)
            for j in range(1, n):
                if bits >> (j - 1) & 1:
                    s[j] = -1.0
            starts.append(s)
    return starts[: budget // 2]


def _multistart(A, norm, restarts, iterations, rng, complex_domain, step_floor=1e-13):
    n = A.shape[0]
    R = max(1, int(restarts))
    dtype = complex if complex_domain else float

    def draw(shape):
        g = rng.standard_normal(shape)
        if complex_domain:
            g = g + 1j * rng.standard_normal(shape)
        return g

    structured = _structured_starts(n, R)
    Z = draw((R, n)).astype(dtype)
    for i, s in enumerate(structured):
        Z[i] = s
    Z = Z / norm_eval(Z, norm)[:, None]
    AT = A.T

    def ratio(X):
        return norm_eval(X @ AT, norm) / norm_eval(X, norm)

    f = ratio(Z)
    f_start = f.copy()
    sigma = np.full(R, 0.5)
    for _ in range(iterations):
        active = sigma > step_floor
        if not active.any():
            break
        D = draw((R, n))
        zz = np.sum(np.abs(Z) ** 2, axis=1)
        D = D - (np.sum(np.conj(Z) * D, axis=1) / zz)[:, None] * Z
        dn = np.linalg.norm(D, axis=1)
        D = D / np.where(dn > 0, dn, 1)[:, None]
        step = (sigma * np.sqrt(zz))[:, None] * D
        Cp, Cm = Z + step, Z - step
        fp, fm = ratio(Cp), ratio(Cm)
        use_p = fp >= fm
        C = np.where(use_p[:, None], Cp, Cm)
        fc = np.where(use_p, fp, fm)
        better = (fc > f) & active
        if better.any():
            Z[better] = C[better] / norm_eval(C[better], norm)[:, None]
            f = np.where(better, fc, f)
        sigma = np.where(better, np.minimum(sigma * STEP_GROW, 1.0), sigma * STEP_SHRINK)
    best = int(np.argmax(f))  # first index wins ties
    # a constant ratio (e.g. an isometry) leaves nothing to improve
    flat = np.ptp(f_start) <= 1e-12 * max(float(np.max(f_start)), 1e-300)
    stalled = not flat and not np.any(f > f_start)
    return float(f[best]), Z[best].copy(), R, stalled


def induced_norm(A, norm: VectorNorm, restarts: int = 64, iterations: int = 500,
                 seed: int = 0, rtol: float = 1e-12, method: str = "auto") -> InducedNormResult:
    """Induced norm ``sup ||Az|| / ||z||``.

    ``method`` is ``auto`` (closed form when one exists, otherwise
    multistart), ``exact`` or ``multistart``. Multistart values are the
    ratio at an explicit witness, so they never exceed the true norm.
    """
    A = _check_square(A)
    if norm.kind == "weighted" and len(norm.weights) != A.shape[0]:
        raise DimensionMismatch("weights do not match the matrix dimension")
    A = A.astype(np.result_type(A.dtype, float))
    if method not in ("auto", "exact", "multistart"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "exact"):
        res = _exact_route(A, norm, rtol)
        if res is not None:
            return res
        if method == "exact":
            raise MalformedNorm(f"no closed form for the {norm.label} induced norm")
    complex_domain = np.iscomplexobj(A) or norm.scalar_field == "complex"
    rng = np.random.default_rng(seed)
    value, z, used, stalled = _multistart(A, norm, restarts, iterations, rng, complex_domain)
    if stalled:
        warnings.warn(OptimizerStall("no restart improved over its initial iterate"),
                      stacklevel=2)
    return InducedNormResult(value, z, False, used, "multistart", stalled)


def rotate_plane(v):
    """Apply (x1, x2) -> (-x2, x1) to the first two coordinates (batched)."""
    w = np.array(v, copy=True)
    w[..., 0], w[..., 1] = -v[..., 1], v[..., 0]
    return w


def check_rotation_invariance(norm: VectorNorm, n: int, sample_count: int = 1000,
                              seed: int = 0, tol: float = 1e-9):
    """Is ``||x||`` unchanged by the quarter turn of the first coordinate plane?

    Returns ``(invariant, max_relative_deviation)`` over random samples.
    """
    if n < 2:
        raise DimensionTooSmall("rotation invariance needs n >= 2")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((sample_count, n))
    if norm.scalar_field == "complex":
        X = X + 1j * rng.standard_normal((sample_count, n))
    base = norm_eval(X, norm)
    dev = np.abs(norm_eval(rotate_plane(X), norm) - base) / base
    worst = float(dev.max())
    return worst <= tol, worst
