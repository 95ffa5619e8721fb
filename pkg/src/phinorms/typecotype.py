"""Estimators for the system-indexed cotype and type constants.

All four constants are suprema of 0-homogeneous ratios over vector families
(or vector-valued functions).  The optimizer works on a deterministic
surrogate: gaussian averages use a fixed scrambled Sobol sample, or the exact
formula for l_2 targets.  The witness is then re-evaluated with
:func:`gaussian_average` (exact where possible, a fresh large Monte-Carlo
stream otherwise), and the spread of that evaluation is stored in lo/hi.
"""
from __future__ import annotations

from typing import Iterable, List, Optional

import numpy as np

from .core import EstimateReport, Field, FiniteNormedSpace, LinearMap, OrthonormalSystem
from .idealnorms import phi_norm_matrix, pi_phi
from .optim import OptBudget, cast_starts, norm_value_grad, phi_sq_value_grad, ratio_ascent
from .stochastic import GaussianSurrogate, gaussian_average


class DegenerateDenominator(ZeroDivisionError):
    pass


def _field(phi, T) -> Field:
    return Field.of(phi, T)


def _family_ell(V: np.ndarray, X: FiniteNormedSpace, field: Field, budget: OptBudget) -> EstimateReport:
    """l(u) for u = sum e_k (x) x_k, the columns of V."""
    u = LinearMap(FiniteNormedSpace.lp(V.shape[1], 2, field), X.with_field(field), V)
    return gaussian_average(u, budget.policy)


def _sqrt_vg(vg):
    def inner(x):
        f, G = vg(x)
        r = np.sqrt(max(f, 0.0))
        return r, (G / (2 * r) if r > 0 else G)
    return inner


def _random_family(rng, m, n, field):
    G = rng.standard_normal((m, n))
    if field is Field.COMPLEX:
        G = G + 1j * rng.standard_normal((m, n))
    return G


def _run(num, den, starts, budget):
    best, total = None, 0
    for idx, x0 in enumerate(starts):
        if not np.any(x0):
            continue
        x, val, it = ratio_ascent(num, den, x0, budget.max_iterations, budget.convergence_tol)
        total += it
        if best is None or val > best[1]:
            best = (x, val, idx)
    return best, total


def _family_starts(m: int, n: int, field: Field, budget: OptBudget, tag: int, warm_starts) -> List[np.ndarray]:
    dtype = field.dtype
    E = np.zeros((m, n), dtype=dtype)
    for k in range(n):
        E[k % m, k] = 1.0
    starts = [E]
    rng = budget.rng(tag)
    for _ in range(budget.restarts - 1):
        starts.append(_random_family(rng, m, n, field).astype(dtype))
    if warm_starts is not None:
        starts.extend(cast_starts(warm_starts, field))
    return starts



def _rotation_start(phi: OrthonormalSystem, m: int, budget: OptBudget):
    """The sup-integral rotation as a family (x_k = O e_k), when shapes allow."""
    if m != phi.n:
        return []
    from .geometry import g_double_prime_functional

    O = g_double_prime_functional(phi, budget.replace(restarts=min(budget.restarts, 4))).witness
    return [O]


def _zero(m, n, name):
    return EstimateReport(0.0, "exact", np.zeros((m, 0)), name)


def cotype_const(phi: OrthonormalSystem, T: LinearMap, budget: OptBudget = OptBudget(),
                 warm_starts: Optional[Iterable[np.ndarray]] = None, rotation_start: bool = True) -> EstimateReport:
    """sup Phi(T u) / l(u) over families u = (x_k) in T.domain."""
    X, Y, n = T.domain, T.codomain, phi.n
    field = _field(phi, T)
    if T.is_zero:
        return _zero(X.dim, n, "zero")
    Tm = T.matrix
    sur = GaussianSurrogate(n, X.with_field(field), field, budget.surrogate_log2, budget.policy.master_seed)

    def num_sq(V):
        f, G = phi_sq_value_grad(Tm @ V, phi.values, phi.weights, Y)
        return f, Tm.conj().T @ G

    starts = _family_starts(X.dim, n, field, budget, 21, warm_starts)
    if rotation_start:
        starts += _rotation_start(phi, X.dim, budget)
    best, total = _run(_sqrt_vg(num_sq), _sqrt_vg(sur.value_grad), starts, budget)
    V = best[0]
    num = phi_norm_matrix(phi, Tm @ V, Y)
    ell = _family_ell(V, X, field, budget)
    lo, hi = ell.bracket
    return EstimateReport(num / ell.value, "lower", V, "ratio-ascent", budget.policy.master_seed,
                          len(starts), total, num / hi, num / lo if lo > 0 else np.inf,
                          extra={"numerator": num, "gaussian": ell.value, "gaussian_method": ell.method,
                                 "best_restart": best[2]})


def type_const(phi: OrthonormalSystem, T: LinearMap, budget: OptBudget = OptBudget(),
               warm_starts: Optional[Iterable[np.ndarray]] = None) -> EstimateReport:
    """sup l(T u) / Phi(u) over families u = (x_k) in T.domain."""
    X, Y, n = T.domain, T.codomain, phi.n
    field = _field(phi, T)
    if T.is_zero:
        return _zero(X.dim, n, "zero")
    Tm = T.matrix
    sur = GaussianSurrogate(n, Y.with_field(field), field, budget.surrogate_log2, budget.policy.master_seed)

    def num_sq(V):
        f, G = sur.value_grad(Tm @ V)
        return f, Tm.conj().T @ G

    def den_sq(V):
        return phi_sq_value_grad(V, phi.values, phi.weights, X)

    starts = _family_starts(X.dim, n, field, budget, 22, warm_starts)
    best, total = _run(_sqrt_vg(num_sq), _sqrt_vg(den_sq), starts, budget)
    V = best[0]
    den = phi_norm_matrix(phi, V, X)
    if den <= 0:
        raise DegenerateDenominator("Phi(u) vanished on a nonzero family")
    ell = _family_ell(Tm @ V, Y, field, budget)
    lo, hi = ell.bracket
    return EstimateReport(ell.value / den, "lower", V, "ratio-ascent", budget.policy.master_seed,
                          len(starts), total, lo / den, hi / den,
                          extra={"gaussian": ell.value, "denominator": den, "gaussian_method": ell.method,
                                 "best_restart": best[2]})


def coefficients(phi: OrthonormalSystem, F: np.ndarray) -> np.ndarray:
    """c_k(f) = sum_j p_j f(w_j) conj(phi_k(w_j)) as columns (for f given by the columns F_j)."""
    return F @ (phi.weights[:, None] * phi.values.conj().T)


def _l2x(F: np.ndarray, p: np.ndarray, X: FiniteNormedSpace):
    vals, G = norm_value_grad(F, X)
    return float(np.sum(p * vals ** 2)), G * (2 * p * vals)


def modified_type_const(phi: OrthonormalSystem, T: LinearMap, budget: OptBudget = OptBudget(),
                        warm_start: Optional[np.ndarray] = None) -> EstimateReport:
    """sup l(T c(f)) / ||f||_{L_2(X)} over functions f, witness F with columns f(w_j).

    ``warm_start`` is a family (x_k) and is embedded as f = sum_k phi_k x_k;
    by default it comes from :func:`type_const`, so the result is never below it.
    """
    X, Y, n = T.domain, T.codomain, phi.n
    field = _field(phi, T)
    if T.is_zero:
        return _zero(X.dim, phi.N, "zero")
    Tm = T.matrix
    p = phi.weights
    B = p[:, None] * phi.values.conj().T  # N x n
    sur = GaussianSurrogate(n, Y.with_field(field), field, budget.surrogate_log2, budget.policy.master_seed)

    def num_sq(F):
        f, G = sur.value_grad(Tm @ F @ B)
        return f, Tm.conj().T @ G @ B.conj().T

    def den_sq(F):
        return _l2x(F, p, X)

    if warm_start is None:
        warm_start = type_const(phi, T, budget).witness
    F0 = np.asarray(warm_start) @ phi.values
    rng = budget.rng(23)
    starts = [F0]
    for _ in range(budget.restarts - 1):
        starts.append(_random_family(rng, X.dim, phi.N, field).astype(field.dtype))
    best, total = _run(_sqrt_vg(num_sq), _sqrt_vg(den_sq), starts, budget)

    def evaluate(F):
        den = np.sqrt(_l2x(F, p, X)[0])
        ell = _family_ell(Tm @ F @ B, Y, field, budget)
        return ell, den

    cands = [(best[0], "ascent"), (F0, "embedded-family")]
    results = []
    for F, tag in cands:
        ell, den = evaluate(F)
        results.append((ell.value / den, F, ell, den, tag))
    val, F, ell, den, tag = max(results, key=lambda r: r[0])
    lo, hi = ell.bracket
    return EstimateReport(val, "lower", F, "ratio-ascent", budget.policy.master_seed, len(starts), total,
                          lo / den, hi / den,
                          extra={"gaussian": ell.value, "denominator": float(den), "chosen": tag,
                                 "gaussian_method": ell.method})


def _canonical(m: int) -> OrthonormalSystem:
    from .constructions import canonical_system

    return canonical_system(m, m)


def c2n(T: LinearMap, n: int, budget: OptBudget = OptBudget(), k: int = 1,
        warm_starts: Optional[Iterable[np.ndarray]] = None) -> EstimateReport:
    """sup (sum ||T x_i||^2)^(1/2) / l(x) over families of k*n vectors."""
    rep = cotype_const(_canonical(k * n), T, budget, warm_starts, rotation_start=False)
    rep.method = "c2n/" + rep.method
    rep.extra["family_size"] = k * n
    return rep


def t2n(T: LinearMap, n: int, budget: OptBudget = OptBudget(), k: int = 1,
        warm_starts: Optional[Iterable[np.ndarray]] = None) -> EstimateReport:
    """sup l(T x) / (sum ||x_i||^2)^(1/2) over families of k*n vectors."""
    rep = type_const(_canonical(k * n), T, budget, warm_starts)
    rep.method = "t2n/" + rep.method
    rep.extra["family_size"] = k * n
    return rep


def c2n_starts_from_cotype(phi: OrthonormalSystem, T: LinearMap, witness: np.ndarray,
                           budget: OptBudget = OptBudget()) -> List[np.ndarray]:
    """Families u W where W maximizes sum ||T u W e_i||^2 over contractions of l_2^n.

    Since l(u W) <= l(u), these inherit most of a cotype witness' ratio.
    """
    U = np.asarray(witness)
    n = U.shape[1]
    field = Field.of(phi, T, U)
    inner = LinearMap(FiniteNormedSpace.lp(n, 2, field), T.codomain.with_field(field), T.matrix @ U)
    rep = pi_phi(_canonical(n), inner, budget.replace(restarts=min(budget.restarts, 4)))
    return [U @ rep.witness, U]


def t2n_starts_from_modified(phi: OrthonormalSystem, F: np.ndarray) -> List[np.ndarray]:
    """The coefficient family c_k(f) of a modified-type witness."""
    return [coefficients(phi, np.asarray(F))]
