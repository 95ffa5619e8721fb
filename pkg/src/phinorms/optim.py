"""Small optimizers shared by the estimators.

Gradients follow the real convention ``df = Re tr(G^H dX)``, so for complex
matrices ``G`` is the gradient with respect to the real and imaginary parts
packed back into one complex array.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .core import Field, FiniteNormedSpace, column_norms
from .stochastic import RngPolicy


def norm_value_grad(Z: np.ndarray, X: FiniteNormedSpace):
    """Column norms of Z in X and the (sub)gradient of each column norm."""
    Z = np.asarray(Z)
    if Z.ndim == 1:
        Z = Z[:, None]
    s = X.scale[:, None]
    A = s * Z
    absA = np.abs(A)
    with np.errstate(invalid="ignore", divide="ignore"):
        sgn = np.where(absA > 0, A / np.where(absA > 0, absA, 1), 0)
    vals = column_norms(Z, X)
    if np.isinf(X.p):
        G = np.zeros_like(A)
        idx = np.argmax(absA, axis=0)
        cols = np.arange(A.shape[1])
        G[idx, cols] = sgn[idx, cols]
    elif X.p == 1:
        G = sgn.astype(A.dtype)
    elif X.p == 2:
        G = A / np.where(vals > 0, vals, 1)
    else:
        G = absA ** (X.p - 1) * sgn / np.where(vals > 0, vals, 1) ** (X.p - 1)
    G = G * s
    G[:, vals == 0] = 0
    return vals, G


def polar(G: np.ndarray) -> np.ndarray:
    """Closest partial isometry: U V^H from the thin SVD of G."""
    U, _, Vh = np.linalg.svd(G, full_matrices=False)
    return U @ Vh


def phi_sq_value_grad(M: np.ndarray, values: np.ndarray, weights: np.ndarray, Y: FiniteNormedSpace):
    """sum_j p_j ||(M values)_j||_Y^2 and its gradient in M."""
    Z = M @ values
    vals, Gn = norm_value_grad(Z, Y)
    f = float(np.sum(weights * vals ** 2))
    GZ = Gn * (2 * weights * vals)
    return f, GZ @ values.conj().T


def gpm(value_grad, step, U0, max_iter=300, tol=1e-10):
    """Maximize a convex function over a convex set by linearization.

    ``step(G)`` must return a maximizer of ``Re tr(G^H U)`` over the set.
    Each iterate does at least as well as the previous one.
    """
    U = U0
    f, G = value_grad(U)
    it = 0
    for it in range(1, max_iter + 1):
        Un = step(G)
        fn, Gn = value_grad(Un)
        if fn < f:
            # subgradient ties can break monotonicity only by rounding
            break
        done = fn - f <= tol * max(abs(f), 1e-300)
        U, f, G = Un, fn, Gn
        if done:
            break
    return U, f, it


def ratio_ascent(num, den, x0, max_iter=500, tol=1e-10, armijo=1e-4):
    """Maximize num(x)/den(x) for 0-homogeneous ratios by gradient ascent on the log.

    ``num`` and ``den`` return ``(value, gradient)``.  Iterates are kept at
    unit Frobenius norm; steps use Armijo backtracking.
    """
    x = np.array(x0, dtype=np.result_type(x0, float), copy=True)
    x /= np.linalg.norm(x)

    def evaluate(y):
        a, ga = num(y)
        b, gb = den(y)
        if a <= 0 or b <= 0:
            return -np.inf, None
        return np.log(a) - np.log(b), ga / a - gb / b

    f, g = evaluate(x)
    if g is None:
        return x, 0.0, 0
    t = 1.0
    it = 0
    stall = 0
    for it in range(1, max_iter + 1):
        # remove the radial component (the ratio is constant along it)
        g = g - np.real(np.vdot(x, g)) * x
        gg = float(np.real(np.vdot(g, g)))
        if gg <= 1e-30:
            break
        accepted = False
        for _ in range(40):
            y = x + t * g
            y /= np.linalg.norm(y)
            fy, gy = evaluate(y)
            if fy >= f + armijo * t * gg:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        gain = fy - f
        x, f, g = y, fy, gy
        t *= 2.0
        stall = stall + 1 if gain <= tol else 0
        if stall >= 3:
            break
    return x, float(np.exp(f)), it


@dataclass(frozen=True)
class OptBudget:
    """Restart and iteration budget shared by the estimators.

    ``surrogate_log2`` sets the size (a power of two) of the fixed
    quasi-Monte-Carlo gaussian sample used inside ratio objectives.
    """

    restarts: int = 8
    max_iterations: int = 400
    convergence_tol: float = 1e-10
    policy: RngPolicy = field(default_factory=RngPolicy)
    surrogate_log2: int = 12

    def __post_init__(self):
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("restarts and max_iterations must be positive")

    def rng(self, *tags: int) -> np.random.Generator:
        return self.policy.rng(1000, *tags)

    def replace(self, **kw) -> "OptBudget":
        return dataclasses.replace(self, **kw)


def haar_isometry(rng: np.random.Generator, m: int, n: int, complex_: bool = False) -> np.ndarray:
    """m x n matrix with orthonormal columns (or rows if n > m), Haar distributed."""
    G = rng.standard_normal((m, n))
    if complex_:
        G = G + 1j * rng.standard_normal((m, n))
    return polar(G)


def cast_starts(warm_starts, target: Field) -> list:
    # a complex start for a real problem contributes its real and imaginary parts
    out = []
    for w in warm_starts:
        w = np.asarray(w)
        if target is Field.REAL and np.iscomplexobj(w):
            out.extend([w.real.copy(), w.imag.copy()])
        else:
            out.append(w.astype(target.dtype))
    return out
