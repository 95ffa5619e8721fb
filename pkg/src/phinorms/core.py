"""Finite measure spaces, orthonormal systems, normed spaces and linear maps.

Everything here is exact linear algebra.  Vectors in a weighted space are
plain numpy arrays; the weights only enter through :func:`norm` and the
inner products.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

ORTHO_TOL = 1e-8
ENUM_LIMIT = 16


class Field(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @classmethod
    def of(cls, *objs) -> "Field":
        """Complex as soon as any argument is complex."""
        for obj in objs:
            if isinstance(obj, np.ndarray):
                if np.iscomplexobj(obj):
                    return cls.COMPLEX
                continue
            if getattr(obj, "field", obj) == cls.COMPLEX:
                return cls.COMPLEX
        return cls.REAL

    @property
    def dtype(self):
        return np.complex128 if self is Field.COMPLEX else np.float64


class GramViolation(ValueError):
    def __init__(self, pair, deviation):
        self.pair = pair
        self.deviation = deviation
        super().__init__(f"Gram matrix deviates from identity by {deviation:.3e} at {pair}")


class RankDeficient(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


def _as_exponent(p) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity", "oo"):
            return np.inf
        p = float(p)
    p = float(p)
    if not p >= 1:
        raise ValueError(f"exponent must lie in [1, inf], got {p}")
    return p


def dual_exponent(p: float) -> float:
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1)


@dataclass(frozen=True, eq=False)
class MeasureSpace:
    """Finitely many atoms with positive masses."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size < 1 or not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("a measure space needs at least one atom and positive weights")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, N: int, total: float = 1.0) -> "MeasureSpace":
        return cls(np.full(N, total / N))

    @property
    def N(self) -> int:
        return self.weights.size

    @property
    def total(self) -> float:
        return float(self.weights.sum())


def inner_product(f, g, space: MeasureSpace):
    """Weighted inner product sum_j p_j f_j conj(g_j)."""
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != (space.N,) or g.shape != (space.N,):
        raise DimensionMismatch(f"vectors of length {space.N} expected, got {f.shape} and {g.shape}")
    val = np.sum(space.weights * f * np.conj(g))
    return val if np.iscomplexobj(val) else float(val)


def gram_matrix(values: np.ndarray, space: MeasureSpace) -> np.ndarray:
    values = np.asarray(values)
    return (values * space.weights) @ values.conj().T


@dataclass(frozen=True, eq=False)
class OrthonormalSystem:
    """n functions on a finite measure space; row k holds phi_k(omega_j)."""

    space: MeasureSpace
    values: np.ndarray
    field: Field = Field.REAL
    label: str = ""

    def __post_init__(self):
        vals = np.array(self.values, dtype=Field(self.field).dtype, copy=True)
        if vals.ndim == 1:
            vals = vals[None, :]
        object.__setattr__(self, "field", Field(self.field))
        if vals.shape[1] != self.space.N:
            raise DimensionMismatch(f"{vals.shape[1]} columns for {self.space.N} atoms")
        if vals.shape[0] > self.space.N:
            raise ValueError("more orthonormal functions than atoms")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.space.N

    @property
    def weights(self) -> np.ndarray:
        return self.space.weights

    def gram(self) -> np.ndarray:
        return gram_matrix(self.values, self.space)

    def gram_deviation(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(self.n))))

    def conjugate(self) -> "OrthonormalSystem":
        return OrthonormalSystem(self.space, self.values.conj(), self.field, self.label + "~")

    def unweighted_rows(self) -> np.ndarray:
        """Isometric copy in unweighted l2^N: f -> (sqrt(p_j) f(omega_j))_j."""
        return self.values * np.sqrt(self.weights)

    def probability_normalized(self) -> "OrthonormalSystem":
        """Same system on the rescaled probability space (still orthonormal)."""
        total = self.space.total
        if abs(total - 1.0) < 1e-14:
            return self
        return OrthonormalSystem(MeasureSpace(self.weights / total), self.values * np.sqrt(total),
                                 self.field, self.label)

    def rotated(self, O: np.ndarray) -> "OrthonormalSystem":
        """The system with rows sum_k O[l, k] phi_k."""
        return OrthonormalSystem(self.space, np.asarray(O) @ self.values,
                                 Field.of(self, np.asarray(O)), self.label)


def validate_system(values, space: MeasureSpace, ortho_tol: float = ORTHO_TOL,
                    field: Optional[Field] = None, label: str = "") -> OrthonormalSystem:
    values = np.asarray(values)
    if field is None:
        field = Field.of(values)
    system = OrthonormalSystem(space, values, field, label)
    dev = np.abs(system.gram() - np.eye(system.n))
    k, l = np.unravel_index(np.argmax(dev), dev.shape)
    if dev[k, l] > ortho_tol:
        raise GramViolation((int(k), int(l)), float(dev[k, l]))
    return system


def gram_schmidt(values, space: MeasureSpace, rank_tol: float = 1e-10,
                 ortho_tol: float = ORTHO_TOL, field: Optional[Field] = None) -> OrthonormalSystem:
    """Modified Gram-Schmidt in the weighted inner product, run twice for stability."""
    values = np.array(values, dtype=np.complex128 if np.iscomplexobj(values) else float)
    if values.ndim == 1:
        values = values[None, :]
    w = space.weights
    out = np.zeros_like(values)
    for k, row in enumerate(values):
        scale = np.sqrt(np.sum(w * np.abs(row) ** 2))
        v = row.copy()
        for _ in range(2):
            for l in range(k):
                v = v - np.sum(w * v * out[l].conj()) * out[l]
        nv = np.sqrt(np.sum(w * np.abs(v) ** 2))
        if scale == 0 or nv <= rank_tol * scale:
            raise RankDeficient(f"row {k} lies in the span of the previous rows")
        out[k] = v / nv
    return validate_system(out, space, ortho_tol, field)


@dataclass(frozen=True, eq=False)
class FiniteNormedSpace:
    """K^m with an l_p norm, optionally weighted.

    With weights ``w`` the norm is ``(sum_j w_j |x_j|^p)^(1/p)`` for finite p
    and ``max_j w_j |x_j|`` for p = inf (so ``L_p^N`` uses ``w = 1/N`` and
    ``L_inf^N`` is simply ``l_inf^N``).
    """

    dim: int
    p: float = 2.0
    weights: Optional[np.ndarray] = None
    field: Field = Field.REAL

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "p", _as_exponent(self.p))
        object.__setattr__(self, "field", Field(self.field))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.size != self.dim or not np.all(w > 0):
                raise ValueError("weights must be positive and match the dimension")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @classmethod
    def lp(cls, m: int, p=2.0, field: Field = Field.REAL) -> "FiniteNormedSpace":
        return cls(m, p, None, field)

    @classmethod
    def Lp(cls, N: int, p=2.0, field: Field = Field.REAL) -> "FiniteNormedSpace":
        """The averaged space L_p^N of the discrete measure with masses 1/N."""
        p = _as_exponent(p)
        return cls(N, p, None if np.isinf(p) else np.full(N, 1.0 / N), field)

    @property
    def scale(self) -> np.ndarray:
        """Diagonal s with ||x|| = ||s * x||_{l_p}."""
        if self.weights is None:
            return np.ones(self.dim)
        if np.isinf(self.p):
            return self.weights
        return self.weights ** (1.0 / self.p)

    @property
    def is_hilbert(self) -> bool:
        return self.p == 2

    def with_field(self, field: Field) -> "FiniteNormedSpace":
        return FiniteNormedSpace(self.dim, self.p, self.weights, field)

    def dual(self) -> "FiniteNormedSpace":
        """Dual space for the pairing <x, b> = sum_j x_j conj(b_j)."""
        q = dual_exponent(self.p)
        if self.weights is None:
            return FiniteNormedSpace(self.dim, q, None, self.field)
        s = 1.0 / self.scale
        w = s if np.isinf(q) else s ** q
        return FiniteNormedSpace(self.dim, q, w, self.field)

    def describe(self) -> str:
        p = "inf" if np.isinf(self.p) else f"{self.p:g}"
        kind = "L" if self.weights is not None else "l"
        return f"{kind}_{p}^{self.dim}"


def column_norms(Z: np.ndarray, X: FiniteNormedSpace) -> np.ndarray:
    """Norms of the columns of Z (axis 0 is the coordinate axis)."""
    A = np.abs(Z) * X.scale.reshape((-1,) + (1,) * (Z.ndim - 1))
    if np.isinf(X.p):
        return A.max(axis=0)
    if X.p == 2:
        return np.sqrt(np.sum(A * A, axis=0))
    if X.p == 1:
        return A.sum(axis=0)
    return np.sum(A ** X.p, axis=0) ** (1.0 / X.p)


def norm(x, X: FiniteNormedSpace) -> float:
    x = np.asarray(x)
    if x.shape != (X.dim,):
        raise DimensionMismatch(f"vector of length {X.dim} expected, got shape {x.shape}")
    return float(column_norms(x[:, None], X)[0])


def pairing(x, b):
    val = np.sum(np.asarray(x) * np.conj(b))
    return val if np.iscomplexobj(val) else float(val)


@dataclass(frozen=True, eq=False)
class LinearMap:
    """matrix: codomain.dim x domain.dim."""

    domain: FiniteNormedSpace
    codomain: FiniteNormedSpace
    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix)
        dtype = np.complex128 if (np.iscomplexobj(M) or Field.of(self.domain, self.codomain)
                                  is Field.COMPLEX) else float
        M = np.array(M, dtype=dtype, copy=True)
        if M.ndim != 2 or M.shape != (self.codomain.dim, self.domain.dim):
            raise DimensionMismatch(
                f"matrix shape {M.shape} does not match {self.codomain.dim}x{self.domain.dim}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def field(self) -> Field:
        return Field.of(self.domain, self.codomain, self.matrix)

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, x):
        return self.matrix @ np.asarray(x)

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        if isinstance(other, LinearMap):
            if other.codomain.dim != self.domain.dim:
                raise DimensionMismatch("cannot compose maps with mismatched dimensions")
            return LinearMap(other.domain, self.codomain, self.matrix @ other.matrix)
        return NotImplemented

    def with_matrix(self, M) -> "LinearMap":
        return LinearMap(self.domain, self.codomain, M)

    def scaled_matrix(self) -> np.ndarray:
        """D_Y M D_X^{-1}: the same operator between unweighted l_p spaces."""
        return (self.codomain.scale[:, None] * self.matrix) / self.domain.scale[None, :]

    def adjoint(self) -> "LinearMap":
        return LinearMap(self.codomain.dual(), self.domain.dual(), self.matrix.conj().T)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)


def identity_map(n: int, p=2.0, q=None, field: Field = Field.REAL) -> LinearMap:
    """Formal identity l_p^n -> l_q^n (q defaults to p)."""
    q = p if q is None else q
    return LinearMap(FiniteNormedSpace.lp(n, p, field), FiniteNormedSpace.lp(n, q, field), np.eye(n))


def family_map(vectors, X: FiniteNormedSpace) -> LinearMap:
    """u = sum_k e_k (x) x_k from l_2^n into X; column k of ``vectors`` is x_k."""
    V = np.asarray(vectors)
    if V.ndim == 1:
        V = V[:, None]
    field = Field.of(X, V)
    return LinearMap(FiniteNormedSpace.lp(V.shape[1], 2, field), X.with_field(field), V)


@dataclass
class EstimateReport:
    """Value of an estimated quantity together with what produced it.

    ``direction`` is ``exact``, ``lower`` (the true quantity is at least
    ``value`` up to the stated Monte-Carlo spread) or ``bracket``.
    ``lo``/``hi`` carry a bracket whenever one is known.
    """

    value: float
    direction: str = "exact"
    witness: Any = None
    method: str = ""
    seed: Optional[int] = None
    restarts: int = 0
    iterations: int = 0
    lo: Optional[float] = None
    hi: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.value = float(self.value)
        if self.direction not in ("exact", "lower", "bracket"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.direction == "bracket":
            if self.lo is None or self.hi is None:
                raise ValueError("a bracket needs lo and hi")
            if not self.lo - 1e-12 * abs(self.value) <= self.value <= self.hi + 1e-12 * abs(self.value):
                raise ValueError("bracket does not contain the value")

    @property
    def bracket(self):
        lo = self.value if self.lo is None else self.lo
        hi = self.value if self.hi is None else self.hi
        return lo, hi

    def to_dict(self) -> dict:
        from .io import encode_array

        return {
            "value": self.value,
            "direction": self.direction,
            "lo": self.lo,
            "hi": self.hi,
            "method": self.method,
            "seed": self.seed,
            "restarts": self.restarts,
            "iterations": self.iterations,
            "witness": encode_array(self.witness) if isinstance(self.witness, np.ndarray) else self.witness,
            "extra": self.extra,
        }


# ---------------------------------------------------------------- operator norms

def _grid_bracket_2d(A: np.ndarray, p: float, q: float, points: int = 10000):
    """Lower and upper bound for ||A: l_p^2 -> l_q|| (real) from a circle grid."""
    th = np.linspace(0, 2 * np.pi, points, endpoint=False)
    X = np.vstack([np.cos(th), np.sin(th)])
    X = X / column_norms(X, FiniteNormedSpace.lp(2, p))
    vals = column_norms(A @ X, FiniteNormedSpace.lp(A.shape[0], q))
    Xn = np.roll(X, -1, axis=1)
    gaps = column_norms(Xn - X, FiniteNormedSpace.lp(2, p))
    seg = np.maximum(vals, np.roll(vals, -1))
    k = int(np.argmax(vals))
    # the segment between neighbours has norm >= 1 - gap/2; ||A.|| is convex along it
    hi = float(np.max(seg / (1 - gaps / 2)))
    return float(vals[k]), hi, X[:, k]


def _ascend_operator_norm(A, p, q, field, restarts, seed, iters):
    from .optim import norm_value_grad, ratio_ascent

    n = A.shape[1]
    Xs = FiniteNormedSpace.lp(n, p, field)
    Ys = FiniteNormedSpace.lp(A.shape[0], q, field)

    def num(x):
        v, g = norm_value_grad(A @ x, Ys)
        return v[0], A.conj().T @ g

    def den(x):
        v, g = norm_value_grad(x, Xs)
        return v[0], g

    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    starts = [np.eye(n, 1, dtype=field.dtype)]
    # right singular vector and coordinate directions are cheap good starts
    _, _, vh = np.linalg.svd(A)
    starts.append(vh[0].conj()[:, None].astype(field.dtype))
    for _ in range(max(restarts - 2, 0)):
        z = rng.standard_normal((n, 1))
        if field is Field.COMPLEX:
            z = z + 1j * rng.standard_normal((n, 1))
        starts.append(z)
    best = None
    total = 0
    for x0 in starts[:max(restarts, 1)]:
        x, val, it = ratio_ascent(num, den, x0, max_iter=iters)
        total += it
        if best is None or val > best[1]:
            best = (x, val)
    return best[0][:, 0], total


def operator_norm(u: LinearMap, restarts: int = 8, seed: int = 0, max_iter: int = 500) -> EstimateReport:
    """Norm of u; exact where a closed form or a finite enumeration exists."""
    A = u.scaled_matrix()
    p, q = u.domain.p, u.codomain.p
    field = u.field
    m, n = A.shape
    if not np.any(A):
        return EstimateReport(0.0, "exact", np.eye(n, 1)[:, 0], "zero")
    pd = dual_exponent(p)
    Ys = FiniteNormedSpace.lp(m, q)
    if p == 2 and q == 2:
        U, s, Vh = np.linalg.svd(A)
        x = Vh[0].conj() / u.domain.scale
        return EstimateReport(s[0], "exact", x, "svd")
    if np.isinf(q):
        rows = column_norms(A.T, FiniteNormedSpace.lp(n, pd))
        i = int(np.argmax(rows))
        return EstimateReport(rows[i], "exact", None, f"max-row-l{pd:g}", extra={"row": i})
    if p == 1:
        cols = column_norms(A, Ys)
        j = int(np.argmax(cols))
        x = np.zeros(n)
        x[j] = 1.0 / u.domain.scale[j]
        return EstimateReport(cols[j], "exact", x, "max-column")
    if field is Field.REAL and q == 1 and m <= ENUM_LIMIT:
        signs = _sign_matrix(m)
        vals = column_norms(A.T @ signs, FiniteNormedSpace.lp(n, pd))
        k = int(np.argmax(vals))
        return EstimateReport(vals[k], "exact", None, "sign-enumeration", extra={"signs": signs[:, k].tolist()})
    if field is Field.REAL and np.isinf(p) and n <= ENUM_LIMIT:
        signs = _sign_matrix(n)
        vals = column_norms(A @ signs, Ys)
        k = int(np.argmax(vals))
        return EstimateReport(vals[k], "exact", signs[:, k] / u.domain.scale, "vertex-enumeration")
    x, its = _ascend_operator_norm(A, p, q, field, restarts, seed, max_iter)
    Xs = FiniteNormedSpace.lp(n, p)
    val = float(column_norms((A @ x)[:, None], Ys)[0] / column_norms(x[:, None], Xs)[0])
    lo, hi = val, None
    if field is Field.REAL and n <= 2:
        if n == 1:
            return EstimateReport(column_norms(A, Ys)[0], "exact", np.ones(1) / u.domain.scale, "rank-one")
        glo, ghi, gx = _grid_bracket_2d(A, p, q)
        if glo > val:
            val, x = glo, gx
        lo, hi = val, max(ghi, val)
        return EstimateReport(val, "bracket", x / u.domain.scale, "ascent+grid", seed, restarts, its, lo, hi)
    return EstimateReport(val, "lower", x / u.domain.scale, "ratio-ascent", seed, restarts, its, lo, hi)


def _sign_matrix(m: int) -> np.ndarray:
    """All sign vectors with first entry +1, as columns (m x 2^(m-1))."""
    if m == 1:
        return np.ones((1, 1))
    rest = np.array(list(itertools.product([1.0, -1.0], repeat=m - 1))).T
    return np.vstack([np.ones((1, rest.shape[1])), rest])


def holder_dual(a: np.ndarray, p: float) -> np.ndarray:
    """z with ||z||_p = 1 and sum a_j z_j = ||a||_{p'} (unweighted coordinates)."""
    a = np.asarray(a)
    mag = np.abs(a)
    if not np.any(mag):
        z = np.zeros(a.shape, dtype=a.dtype if np.iscomplexobj(a) else float)
        z[0] = 1.0
        return z
    phase = np.where(mag > 0, np.conj(a) / np.where(mag > 0, mag, 1), 0)
    if p == 1:
        z = np.zeros(a.shape, dtype=phase.dtype)
        j = int(np.argmax(mag))
        z[j] = phase[j]
        return z
    if np.isinf(p):
        return np.where(mag > 0, phase, 1.0)
    pd = dual_exponent(p)
    w = mag ** (pd - 1)
    return phase * w / np.linalg.norm(w, p)


def norming_vector(u: LinearMap) -> np.ndarray:
    """A unit vector x of the domain with ||u x|| equal to (or estimating) ||u||."""
    rep = operator_norm(u)
    if rep.witness is not None:
        x = np.asarray(rep.witness)
    else:
        A = u.scaled_matrix()
        if "row" in rep.extra:
            r = A[rep.extra["row"]]
        else:
            r = np.asarray(rep.extra["signs"]) @ A
        x = holder_dual(r, u.domain.p) / u.domain.scale
    nx = norm(x, u.domain)
    return x / nx if nx > 0 else x


def exact_operator_norm(u: LinearMap) -> float:
    """Operator norm, insisting on an exact method."""
    rep = operator_norm(u)
    if rep.direction != "exact":
        raise NotImplementedError(f"no exact operator norm for {u.domain.describe()} -> {u.codomain.describe()}")
    return rep.value


def adjoint(u: LinearMap) -> LinearMap:
    """Conjugate transpose between the dual spaces."""
    return u.adjoint()
