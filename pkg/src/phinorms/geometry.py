"""Constructive algorithms on orthonormal systems.

Greedy coordinate bases, the sup-integral functionals over the span of a
system, disjoint-support extraction, phase-aware Procrustes alignment, dyadic
bucketing of vector families, the contact measure and the Minkowski gauge of
the normalized value vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import sparse
from scipy.linalg import null_space
from scipy.optimize import linprog

from .core import (
    EstimateReport,
    Field,
    LinearMap,
    MeasureSpace,
    OrthonormalSystem,
    column_norms,
)
from .optim import OptBudget, gpm, haar_isometry, polar

GAUGE_SIDES = 72


class HypothesisViolated(ValueError):
    pass


class AllZeroImages(ValueError):
    pass


class RankLoss(ArithmeticError):
    pass


# ------------------------------------------------------------ greedy basis

@dataclass
class GreedyBasisResult:
    """Greedy orthonormal basis h_1..h_n of H in unweighted l_2^N coordinates.

    ``guarantees[k]`` is |<h_k, e_{j_k}>|^2; ``bounds[k]`` the value
    (n - 2k + 2)/N it must exceed for the certified steps k <= n/3 (1-based).
    ``rotation`` expresses the basis in the input rows: basis = rotation @ rows.
    """

    basis: np.ndarray
    indices: List[int]
    guarantees: np.ndarray
    bounds: np.ndarray
    certified_steps: int
    rotation: np.ndarray

    @property
    def certified_ok(self) -> bool:
        k = self.certified_steps
        return bool(np.all(self.guarantees[:k] >= self.bounds[:k] * (1 - 1e-12)))

    def to_dict(self) -> dict:
        from .io import encode_array

        return {"basis": encode_array(self.basis), "indices": list(map(int, self.indices)),
                "guarantees": self.guarantees.tolist(), "bounds": self.bounds.tolist(),
                "certified_steps": self.certified_steps}


def greedy_coordinate_basis(H, N: Optional[int] = None, rank_tol: float = 1e-9) -> GreedyBasisResult:
    """Pick the atom of largest leverage, take the normalized projection of its
    coordinate vector, deflate, repeat.

    ``H`` is either an OrthonormalSystem (pushed to unweighted coordinates
    f -> sqrt(p_j) f(w_j)) or an n x N matrix with orthonormal rows in l_2^N.
    """
    rows = H.unweighted_rows() if isinstance(H, OrthonormalSystem) else np.asarray(H)
    n, NN = rows.shape
    if N is not None and N != NN:
        raise ValueError("N does not match the number of columns")
    N = NN
    if np.max(np.abs(rows @ rows.conj().T - np.eye(n))) > 1e-8:
        raise ValueError("rows must be orthonormal")
    Q = rows.T.copy()  # N x d, orthonormal columns spanning the current subspace
    used = np.zeros(N, dtype=bool)
    basis = np.zeros((n, N), dtype=rows.dtype)
    indices, guarantees = [], []
    for k in range(n):
        lev = np.sum(np.abs(Q) ** 2, axis=1)
        lev[used] = -1.0
        j = int(np.argmax(lev))
        if lev[j] <= rank_tol:
            raise RankLoss(f"no atom with positive leverage at step {k + 1}")
        h = Q @ Q[j].conj()
        h = h / np.linalg.norm(h)
        basis[k] = h
        indices.append(j)
        guarantees.append(abs(h[j]) ** 2)
        used[j] = True
        if Q.shape[1] > 1:
            c = Q.conj().T @ h
            Q = Q @ null_space(c[None, :].conj())
    kk = np.arange(1, n + 1)
    bounds = (n - 2 * kk + 2) / N
    rotation = basis @ rows.conj().T
    return GreedyBasisResult(basis, indices, np.asarray(guarantees), bounds, n // 3, rotation)


# ------------------------------------------------------- sup functionals

def sup_integral(values: np.ndarray, weights: np.ndarray) -> float:
    """sum_j p_j max_l |h_l(w_j)|^2 for the rows h_l of ``values``."""
    return float(np.sum(weights * np.max(np.abs(values) ** 2, axis=0)))


def _rotation_objective(phi: OrthonormalSystem):
    F = phi.values
    p = phi.weights

    def value_grad(O):
        Z = O @ F
        A = np.abs(Z) ** 2
        idx = np.argmax(A, axis=0)
        mask = np.zeros_like(A)
        mask[idx, np.arange(Z.shape[1])] = 1.0
        f = float(np.sum(p * A[idx, np.arange(Z.shape[1])]))
        G = 2 * (mask * Z) * p @ F.conj().T
        return f, G

    return value_grad


def g_double_prime_functional(phi: OrthonormalSystem, budget: OptBudget = OptBudget()) -> EstimateReport:
    """max over orthonormal bases psi of span(phi) of (int max_l |psi_l|^2)^(1/2).

    Linearize-and-project ascent over the unitary group, started from the
    greedy coordinate basis, the identity and Haar rotations.  The witness is
    the rotation O (psi = O phi); ``extra['integral']`` is the squared value.
    """
    n = phi.n
    complex_ = phi.field is Field.COMPLEX
    vg = _rotation_objective(phi)
    greedy = greedy_coordinate_basis(phi)
    starts = [greedy.rotation, np.eye(n)]
    rng = budget.rng(7)
    for _ in range(max(budget.restarts - 2, 0)):
        starts.append(haar_isometry(rng, n, n, complex_))
    warm = vg(greedy.rotation)[0]
    best, total = None, 0
    for idx, O0 in enumerate(starts):
        O, f, it = gpm(vg, polar, O0.astype(phi.values.dtype), budget.max_iterations, budget.convergence_tol)
        total += it
        if best is None or f > best[1]:
            best = (O, f, idx)
    O = best[0]
    J = sup_integral(O @ phi.values, phi.weights)
    return EstimateReport(np.sqrt(J), "lower", O, "gpm-unitary", budget.policy.master_seed, len(starts), total,
                          extra={"integral": J, "greedy_integral": warm, "best_restart": best[2]})


def g_prime_functional(phi: OrthonormalSystem, budget: OptBudget = OptBudget(),
                       rotation: Optional[np.ndarray] = None) -> EstimateReport:
    """max of (int max_l |h_l|^2)^(1/2) over n functions h_l in span(phi) with ||h_l|| <= 1.

    Block-coordinate ascent: assign atoms to the function attaining the max,
    then replace each h_l by the top eigenvector of its compressed Gram matrix.
    Warm-started from the unitary optimum so it never falls below it.
    The witness has rows a_l with h_l = sum_k a_lk phi_k.
    """
    n = phi.n
    F = phi.values
    p = phi.weights
    if rotation is None:
        rotation = g_double_prime_functional(phi, budget).witness
    A = np.array(rotation, dtype=np.result_type(rotation, F))
    f = sup_integral(A @ F, p)
    it = 0
    for it in range(1, budget.max_iterations + 1):
        assign = np.argmax(np.abs(A @ F) ** 2, axis=0)
        An = A.copy()
        for l in range(n):
            sel = assign == l
            if not np.any(sel):
                continue
            M = (F[:, sel] * p[sel]) @ F[:, sel].conj().T
            w, vecs = np.linalg.eigh(M)
            An[l] = vecs[:, -1].conj()
        fn = sup_integral(An @ F, p)
        if fn <= f * (1 + budget.convergence_tol):
            if fn > f:
                A, f = An, fn
            break
        A, f = An, fn
    return EstimateReport(np.sqrt(f), "lower", A, "block-ascent", budget.policy.master_seed, 1, it,
                          extra={"integral": f})


# ------------------------------------------------------- disjoint supports

@dataclass
class DisjointSupportResult:
    selected: List[int]
    assignment: np.ndarray
    masses: np.ndarray
    threshold: float

    @property
    def mass_total(self) -> float:
        return float(self.masses.sum())

    def to_dict(self) -> dict:
        return {"selected": self.selected, "assignment": self.assignment.tolist(),
                "masses": self.masses.tolist(), "threshold": self.threshold}


def disjoint_support_extract(psi: OrthonormalSystem, eta: float) -> DisjointSupportResult:
    """Give each atom to the function of largest modulus there and keep those with mass >= eta."""
    A = np.abs(psi.values) ** 2
    assign = np.argmax(A, axis=0)
    masses = np.zeros(psi.n)
    np.add.at(masses, assign, psi.weights * A[assign, np.arange(psi.N)])
    selected = [int(l) for l in np.flatnonzero(masses >= eta)]
    return DisjointSupportResult(selected, assign, masses, float(eta))


# ------------------------------------------------------------- Procrustes

@dataclass
class AlignmentResult:
    psi: OrthonormalSystem
    overlaps: np.ndarray
    selected: List[int]
    rotation: np.ndarray
    tau: float
    objective: float
    iterations: int


def procrustes_align(f: np.ndarray, T: np.ndarray, space: MeasureSpace, tau: float = 0.0,
                     tol: float = 1e-9, max_iter: int = 500, restarts: int = 8, seed: int = 0) -> AlignmentResult:
    """Orthonormal basis psi of span(T) maximizing sum_l |(f_l, psi_l)|^2, with (f_l, psi_l) >= 0.

    ``f`` holds the functions f_l as rows (values on the atoms); ``T`` holds an
    orthonormal basis of H as rows.  The Bessel-type hypothesis
    sum_l |(f_l, h)|^2 <= ||h||^2 on H is checked first.
    """
    f = np.atleast_2d(np.asarray(f))
    T = np.atleast_2d(np.asarray(T))
    nf, d = f.shape[0], T.shape[0]
    if nf > d:
        raise ValueError("more functions than the dimension of H")
    C = (f * space.weights) @ T.conj().T  # C[l, i] = (f_l, t_i)
    smax = float(np.linalg.svd(C, compute_uv=False)[0])
    if smax > 1 + 1e-8:
        raise HypothesisViolated(f"sum |(f_l, h)|^2 exceeds ||h||^2 by factor {smax ** 2:.6f}")
    complex_ = np.iscomplexobj(C)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 61]))

    def run(c):
        obj_prev = -np.inf
        Ocols = None
        it = 0
        for it in range(1, max_iter + 1):
            K = (np.conj(c)[:, None] * C).T  # d x nf
            Ocols = polar(K)
            a = np.sum(C * np.conj(Ocols.T), axis=1)
            obj = float(np.sum(np.abs(a) ** 2))
            c = np.where(np.abs(a) > 0, a / np.where(np.abs(a) > 0, np.abs(a), 1), 1.0)
            if obj - obj_prev <= tol * max(obj, 1e-300):
                break
            obj_prev = obj
        return Ocols, obj, it

    best = None
    total = 0
    for r in range(max(restarts, 1)):
        if r == 0:
            c0 = np.ones(nf, dtype=C.dtype)
        elif complex_:
            c0 = np.exp(2j * np.pi * rng.random(nf))
        else:
            c0 = rng.choice([-1.0, 1.0], size=nf)
        Oc, obj, it = run(c0)
        total += it
        if best is None or obj > best[1] + 1e-14:
            best = (Oc, obj)
    Ocols = best[0]
    rest = null_space(Ocols.conj().T) if nf < d else np.zeros((d, 0))
    O = np.hstack([Ocols, rest])
    Psi = O.T @ T  # psi_l = sum_i O[i, l] t_i
    a = np.diag((f * space.weights) @ Psi[:nf].conj().T)
    phase = np.where(np.abs(a) > 0, a / np.where(np.abs(a) > 0, np.abs(a), 1), 1.0)
    Psi = Psi.astype(np.result_type(Psi, phase))
    Psi[:nf] = Psi[:nf] * phase[:, None]
    overlaps = np.real(np.sum((f * space.weights) * Psi[:nf].conj(), axis=1))
    psi = OrthonormalSystem(space, Psi, Field.of(Psi))
    selected = [int(l) for l in np.flatnonzero(overlaps >= tau)]
    return AlignmentResult(psi, overlaps, selected, O, float(tau), float(best[1]), total)


# ------------------------------------------------------------- bucketing

@dataclass
class BucketingResult:
    family: np.ndarray
    pairs: List[tuple]
    selected: List[tuple]
    m0: int
    classes: dict
    certificate: dict = field(default_factory=dict)


def _dyadic_class(t2: float) -> int:
    """m with 2^-m < t2 <= 2^(1-m)."""
    m = int(np.floor(-np.log2(t2))) + 1
    while t2 > 2.0 ** (1 - m):
        m -= 1
    while t2 <= 2.0 ** (-m):
        m += 1
    return m


def equal_norm_bucketing(T: LinearMap, family: np.ndarray) -> BucketingResult:
    """Replicate each x_i / ||T x_i|| according to its dyadic image-norm class.

    Returns the first n replicated vectors in round-robin order; all of them
    have ||T y|| = 1.  The certificate records |I| and checks n <= |I| < 6n.
    """
    V = np.asarray(family)
    if V.ndim == 1:
        V = V[:, None]
    t = column_norms(T.matrix @ V, T.codomain)
    keep = np.flatnonzero(t > 0)
    if keep.size == 0:
        raise AllZeroImages("every vector of the family is mapped to zero")
    # the family size n (zero images included) fixes m0; the counting bounds still hold
    n = V.shape[1]
    V = V[:, keep]
    t = t[keep]
    k = keep.size
    scale = np.sqrt(np.sum(t ** 2))
    t2 = (t / scale) ** 2
    m0 = (3 * n - 1).bit_length()
    classes = {}
    mult = np.zeros(k, dtype=int)
    for i in range(k):
        m = _dyadic_class(float(t2[i]))
        classes.setdefault(m, []).append(int(keep[i]))
        if m <= m0:
            mult[i] = 2 ** (m0 - m)
    pairs = [(int(keep[i]), j) for i in range(k) for j in range(1, mult[i] + 1)]
    order = sorted(pairs, key=lambda ij: (ij[1], ij[0]))
    selected = order[:n]
    pos = {int(k): i for i, k in enumerate(keep)}
    Y = np.stack([V[:, pos[i]] / t[pos[i]] for i, _ in selected], axis=1)
    size = len(pairs)
    cert = {"n": n, "size_I": size, "m0": m0, "bound": 2 ** m0, "ok": bool(n <= size < 6 * n),
            "dropped_zero_images": int(n - k)}
    return BucketingResult(Y, pairs, selected, m0, classes, cert)


# ------------------------------------------------------- contact measure

@dataclass
class ContactMeasure:
    points: np.ndarray  # n x M, unit columns
    masses: np.ndarray
    atoms: np.ndarray   # index of the atom behind each point

    def covariance(self) -> np.ndarray:
        return (self.points * self.masses) @ self.points.conj().T

    def phi_norm_of(self, M: np.ndarray, Y) -> float:
        """sqrt(n) (sum_j mass_j ||u x_j||^2)^(1/2) for u with matrix M into Y."""
        n = self.points.shape[0]
        return float(np.sqrt(n * np.sum(self.masses * column_norms(M @ self.points, Y) ** 2)))


def contact_measure(phi: OrthonormalSystem) -> ContactMeasure:
    F = phi.values
    r = np.linalg.norm(F, axis=0)
    keep = np.flatnonzero(r > 0)
    pts = F[:, keep] / r[keep]
    masses = phi.weights[keep] * r[keep] ** 2 / phi.n
    return ContactMeasure(pts, masses, keep)


def gauge_bracket(phi: OrthonormalSystem, x, sides: int = GAUGE_SIDES):
    """Lower and upper bound for the gauge of x with respect to B_Phi.

    B_Phi is the absolute convex hull of the normalized value vectors.  Real
    systems are solved exactly by a linear program.  For complex systems the
    modulus constraint |c_j| <= t_j is relaxed to a circumscribed regular
    polygon, whose optimum is within a factor cos(pi/sides) of the gauge.  The
    bounds are then sharpened: ||x||_2 is always a lower bound (all generators
    are unit vectors), and a multiple of a single generator has gauge equal to
    its length.
    """
    P = contact_measure(phi).points
    x = np.asarray(x)
    n, M = P.shape
    if x.shape != (n,):
        raise ValueError(f"vector of length {n} expected")
    r = float(np.linalg.norm(x))
    if r == 0:
        return 0.0, 0.0
    if phi.field is Field.REAL and not np.iscomplexobj(x):
        P = np.real(P)
        res = linprog(np.ones(2 * M), A_eq=np.hstack([P, -P]), b_eq=np.real(x), bounds=(0, None), method="highs")
        if res.status != 0:
            raise ValueError(f"gauge LP failed: {res.message}")
        return float(res.fun), float(res.fun)
    if np.max(np.abs(P.conj().T @ x)) >= r * (1 - 1e-13):
        return r, r
    Pr, Pi = np.real(P), np.imag(P)
    A_eq = np.block([[Pr, -Pi, np.zeros((n, M))], [Pi, Pr, np.zeros((n, M))]])
    b_eq = np.concatenate([np.real(x), np.imag(x)])
    th = 2 * np.pi * np.arange(sides) / sides
    I = sparse.identity(M, format="csr")
    A_ub = sparse.vstack([sparse.hstack([np.cos(a) * I, np.sin(a) * I, -I]) for a in th], format="csr")
    c = np.concatenate([np.zeros(2 * M), np.ones(M)])
    bounds = [(None, None)] * (2 * M) + [(0, None)] * M
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(sides * M), A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise ValueError(f"gauge LP failed: {res.message}")
    coef = res.x[:M] + 1j * res.x[M:2 * M]
    lo = max(float(res.fun), r)
    hi = max(float(np.sum(np.abs(coef))), lo)
    return lo, hi


def minkowski_gauge(phi: OrthonormalSystem, x, sides: int = GAUGE_SIDES) -> float:
    """Gauge of x for B_Phi (exact for real systems; the lower bound of :func:`gauge_bracket` otherwise)."""
    return gauge_bracket(phi, x, sides)[0]


def gauge_identity_phi_norm(phi: OrthonormalSystem) -> float:
    """Phi of the identity l_2^n -> E_Phi, where E_Phi carries the gauge norm."""
    F = phi.values
    g = np.array([minkowski_gauge(phi, F[:, j]) for j in range(phi.N)])
    return float(np.sqrt(np.sum(phi.weights * g ** 2)))
