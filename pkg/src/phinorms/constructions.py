"""Factories for orthonormal systems and the K_q / Lambda_2 diagnostics."""
from __future__ import annotations

import itertools
from typing import Dict, Optional, Sequence

import numpy as np

from .core import (
    EstimateReport,
    Field,
    FiniteNormedSpace,
    MeasureSpace,
    OrthonormalSystem,
    gram_schmidt,
    validate_system,
)
from .optim import OptBudget, norm_value_grad, ratio_ascent


class CardinalityOverflow(ValueError):
    pass


def fourier_system(n: int, N: int, frequencies: Optional[Sequence[int]] = None) -> OrthonormalSystem:
    """Characters exp(2 pi i k j / N) on Z_N with masses 1/N; frequencies default to 1..n."""
    if frequencies is None:
        if not 1 <= n <= N:
            raise ValueError("need 1 <= n <= N")
        frequencies = np.arange(1, n + 1)
    freqs = np.asarray(frequencies, dtype=np.int64)
    if len(set((freqs % N).tolist())) != freqs.size:
        raise ValueError("frequencies collide modulo N")
    j = np.arange(N)
    values = np.exp(2j * np.pi * np.outer(freqs % N, j) / N)
    return validate_system(values, MeasureSpace.uniform(N), field=Field.COMPLEX, label=f"fourier({freqs.size},{N})")


def canonical_system(n: int, N: Optional[int] = None) -> OrthonormalSystem:
    """sqrt(N) e_k, k = 1..n, on N atoms of mass 1/N."""
    N = n if N is None else N
    if not 1 <= n <= N:
        raise ValueError("need 1 <= n <= N")
    values = np.sqrt(N) * np.eye(n, N)
    return validate_system(values, MeasureSpace.uniform(N), field=Field.REAL, label=f"canonical({n},{N})")


def haar_orthogonal(N: int, rng: np.random.Generator, field: Field = Field.REAL) -> np.ndarray:
    """Haar-distributed orthogonal or unitary N x N matrix (QR with phase correction)."""
    Z = rng.standard_normal((N, N))
    if field is Field.COMPLEX:
        Z = (Z + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))[None, :]


def haar_random_system(n: int, N: int, seed: int = 0, field: Field = Field.REAL) -> OrthonormalSystem:
    """sqrt(N) times the first n rows of a Haar orthogonal (unitary) matrix."""
    if not 1 <= n <= N:
        raise ValueError("need 1 <= n <= N")
    field = Field(field)
    O = haar_orthogonal(N, np.random.default_rng(np.random.SeedSequence([seed, 31])), field)
    return validate_system(np.sqrt(N) * O[:n], MeasureSpace.uniform(N), field=field,
                           label=f"haar({n},{N},{seed})")


def l1_subspace_system(n: int, N: int, seed: int = 0, field: Field = Field.REAL) -> OrthonormalSystem:
    """Orthonormal basis (in L_2^N) of a gaussian random n-dimensional subspace."""
    if not 1 <= n < N:
        raise ValueError("need 1 <= n < N")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 37]))
    G = rng.standard_normal((n, N))
    if Field(field) is Field.COMPLEX:
        G = G + 1j * rng.standard_normal((n, N))
    sys = gram_schmidt(G, MeasureSpace.uniform(N), field=Field(field))
    return OrthonormalSystem(sys.space, sys.values, sys.field, f"l1sub({n},{N},{seed})")


def bourgain_subset(q: float, kmax: int, seed: int = 0) -> Dict[int, np.ndarray]:
    """Random S_k in [2^k, 2^(k+1)) with |S_k| = floor(4^(k/q)), k = 1..kmax."""
    if not q > 2:
        raise ValueError("q must exceed 2")
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 41]))
    sets = {}
    for k in range(1, kmax + 1):
        size = int(np.floor(4.0 ** (k / q) + 1e-12))
        if size > 2 ** k:
            raise CardinalityOverflow(f"block {k} cannot hold {size} frequencies")
        sets[k] = np.sort(rng.choice(np.arange(2 ** k, 2 ** (k + 1)), size=size, replace=False))
    return sets


def bourgain_system(sets: Dict[int, np.ndarray]) -> OrthonormalSystem:
    """Characters with the union of the sets as frequencies, sampled on Z_{2^(kmax+1)}."""
    kmax = max(sets)
    freqs = np.concatenate([sets[k] for k in sorted(sets)])
    return fourier_system(freqs.size, 2 ** (kmax + 1), frequencies=freqs)


class RecipeError(ValueError):
    pass


_RECIPE_KEYS = {
    "canonical": ("n",),
    "fourier": ("n", "N"),
    "haarRandom": ("n", "N"),
    "l1Subspace": ("n", "N"),
    "bourgainSubset": ("q", "kmax"),
}


def make_system(recipe: dict) -> OrthonormalSystem:
    """Build a system from a recipe dictionary (see the README for the keys)."""
    if not isinstance(recipe, dict):
        raise RecipeError("recipe must be a JSON object")
    kind = recipe.get("kind")
    if kind not in _RECIPE_KEYS:
        raise RecipeError(f"unknown system kind {kind!r}; expected one of {sorted(_RECIPE_KEYS)}")
    missing = [k for k in _RECIPE_KEYS[kind] if recipe.get(k) is None]
    if missing:
        raise RecipeError(f"recipe of kind {kind!r} is missing {missing}")
    for key in ("n", "N", "kmax"):
        v = recipe.get(key)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
            raise RecipeError(f"{key} must be a positive integer, got {v!r}")
    n = recipe.get("n")
    N = recipe.get("N")
    seed = int(recipe.get("seed", 0))
    field = Field(recipe.get("field", "real"))
    if kind == "canonical":
        return canonical_system(int(n), int(N if N is not None else n))
    if kind == "fourier":
        return fourier_system(int(n), int(N), recipe.get("frequencies"))
    if kind == "haarRandom":
        return haar_random_system(int(n), int(N), seed, field)
    if kind == "l1Subspace":
        return l1_subspace_system(int(n), int(N), seed, field)
    if kind == "bourgainSubset":
        return bourgain_system(bourgain_subset(float(recipe["q"]), int(recipe["kmax"]), seed))
    raise RecipeError(f"unknown system kind {kind!r}")


# ----------------------------------------------------------------- diagnostics

def _synthesis(phi: OrthonormalSystem) -> np.ndarray:
    """B with B @ alpha = sum_k alpha_k phi_k (N x n)."""
    return phi.values.T


def _sphere_grid(n: int, field: Field, points: int = 10000) -> np.ndarray:
    """Unit vectors covering the sphere of K^n for n <= 2 (columns)."""
    if n == 1:
        return np.ones((1, 1))
    if field is Field.REAL:
        th = np.linspace(0, np.pi, points, endpoint=False)
        return np.vstack([np.cos(th), np.sin(th)])
    m = int(np.sqrt(points))
    th, ps = np.meshgrid(np.linspace(0, np.pi / 2, m), np.linspace(0, 2 * np.pi, m, endpoint=False))
    th, ps = th.ravel(), ps.ravel()
    return np.vstack([np.cos(th), np.exp(1j * ps) * np.sin(th)])


def _sphere_starts(phi: OrthonormalSystem, budget: OptBudget, tag: int):
    n = phi.n
    starts = [np.eye(n, dtype=phi.field.dtype)[k] for k in range(n)]
    rng = budget.rng(tag)
    for _ in range(budget.restarts):
        z = rng.standard_normal(n)
        if phi.field is Field.COMPLEX:
            z = z + 1j * rng.standard_normal(n)
        starts.append(z)
    return starts


def _norm_ratio_search(phi: OrthonormalSystem, Lspace: FiniteNormedSpace, maximize_lq: bool,
                       budget: OptBudget, tag: int):
    """Extremize ||sum alpha_k phi_k||_L / ||alpha||_2 over the sphere."""
    B = _synthesis(phi)

    def lq(a):
        v, g = norm_value_grad(B @ a, Lspace)
        return v[0], B.conj().T @ g[:, 0]

    def l2(a):
        r = float(np.linalg.norm(a))
        return r, a / r

    num, den = (lq, l2) if maximize_lq else (l2, lq)
    best, total = None, 0
    for x0 in _sphere_starts(phi, budget, tag):
        x, val, it = ratio_ascent(num, den, x0, max_iter=budget.max_iterations, tol=budget.convergence_tol)
        total += it
        if best is None or val > best[1]:
            best = (x, val)
    x = best[0]
    method = "sphere-ascent"
    if phi.n <= 2:
        A = _sphere_grid(phi.n, phi.field)
        vals = norm_value_grad(B @ A, Lspace)[0]
        ratios = vals if maximize_lq else 1.0 / np.where(vals > 0, vals, np.inf)
        k = int(np.argmax(ratios))
        if ratios[k] > best[1]:
            x = A[:, k]
        method = "sphere-ascent+grid"
    x = x / np.linalg.norm(x)
    lval = float(norm_value_grad(B @ x, Lspace)[0][0])
    return x, lval, method, total


def kq_constant(phi: OrthonormalSystem, q: float, budget: OptBudget = OptBudget()) -> EstimateReport:
    """Lower estimate of the best c with ||sum a_k phi_k||_q <= c ||a||_2."""
    phi = phi.probability_normalized()
    Lq = FiniteNormedSpace(phi.N, q, phi.weights if not np.isinf(float(q)) else None, phi.field)
    if float(q) == 2:
        return EstimateReport(1.0, "exact", np.eye(phi.n, 1)[:, 0], "orthonormality")
    if phi.n == 1:
        x = np.ones(1)
        return EstimateReport(float(norm_value_grad(phi.values[0], Lq)[0][0]), "exact", x, "single-function")
    x, val, method, its = _norm_ratio_search(phi, Lq, True, budget, 51)
    return EstimateReport(val, "lower", x, method, budget.policy.master_seed, budget.restarts, its,
                          extra={"q": float(q)})


def lambda2_constant(phi: OrthonormalSystem, budget: OptBudget = OptBudget()) -> EstimateReport:
    """Lower estimate of sup ||f||_2 / ||f||_1 over the span (probability normalization)."""
    phi = phi.probability_normalized()
    L1 = FiniteNormedSpace(phi.N, 1, phi.weights, phi.field)
    if phi.n == 1:
        v = float(norm_value_grad(phi.values[0], L1)[0][0])
        return EstimateReport(1.0 / v, "exact", np.ones(1), "single-function")
    x, l1, method, its = _norm_ratio_search(phi, L1, False, budget, 53)
    return EstimateReport(1.0 / l1, "lower", x, method, budget.policy.master_seed, budget.restarts, its)


def lq_norm_of_combination(phi: OrthonormalSystem, alpha, q: float) -> float:
    """||sum alpha_k phi_k||_{L_q} on the probability-normalized space."""
    phi = phi.probability_normalized()
    f = phi.values.T @ np.asarray(alpha)
    if np.isinf(float(q)):
        return float(np.max(np.abs(f)))
    return float(np.sum(phi.weights * np.abs(f) ** q) ** (1.0 / q))


def even_moment_tensor(phi: OrthonormalSystem, r: int) -> np.ndarray:
    """M with int |sum a_k phi_k|^(2r) = v^H M v, v = a (x) ... (x) a (r factors).

    Independent of the direct evaluation; only sensible for small n and r.
    """
    phi = phi.probability_normalized()
    n = phi.n
    # sum_k a_k phi_k raised to r expands over ordered index tuples
    idx = list(itertools.product(range(n), repeat=r))
    P = np.ones((len(idx), phi.N), dtype=complex)
    for row, tup in enumerate(idx):
        for k in tup:
            P[row] *= phi.values[k]
    return (P * phi.weights) @ P.conj().T


def even_moment(phi: OrthonormalSystem, alpha, r: int) -> float:
    a = np.asarray(alpha)
    v = a
    for _ in range(r - 1):
        v = np.kron(v, a)
    M = even_moment_tensor(phi, r)
    # int |F|^(2r) = int F^r conj(F^r) with F^r = sum_tuples a_tuple prod phi
    return float(np.real(v @ M @ v.conj()))
