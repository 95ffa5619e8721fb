"""Gaussian and Rademacher averages of vector sums.

``l(u) = (E ||sum_k g_k u e_k||^2)^(1/2)`` and the Rademacher analogue
``r(u)``.  Closed forms are used where they exist; otherwise a seeded
Monte-Carlo estimate is returned as a bracket (mean +/- 3 standard errors of
the squared norm, then square roots).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .core import (
    ENUM_LIMIT,
    EstimateReport,
    Field,
    FiniteNormedSpace,
    LinearMap,
    _sign_matrix,
    column_norms,
)

TAG_GAUSS = 1
TAG_RADEMACHER = 2
TAG_SPHERE = 3


class ComplexUnsupported(ValueError):
    pass


@dataclass(frozen=True)
class RngPolicy:
    """Seeds every random stream from one master seed.

    Chunk ``c`` of a stream tagged ``tag`` uses ``SeedSequence([seed, tag, c])``,
    so results do not depend on how the work is scheduled.
    """

    master_seed: int = 0
    sample_count: int = 200_000
    chunk_size: int = 25_000

    def __post_init__(self):
        if self.sample_count < 2 or self.chunk_size < 1:
            raise ValueError("sample_count must be >= 2 and chunk_size >= 1")

    def rng(self, *tags: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([int(self.master_seed) & (2**64 - 1), *tags]))

    def chunks(self):
        done = 0
        c = 0
        while done < self.sample_count:
            size = min(self.chunk_size, self.sample_count - done)
            yield c, size
            done += size
            c += 1

    def derive(self, *tags: int) -> "RngPolicy":
        """An independent policy for a sub-computation."""
        seed = int(np.random.SeedSequence([int(self.master_seed) & (2**64 - 1), 99, *tags]).generate_state(1, np.uint64)[0])
        return RngPolicy(seed, self.sample_count, self.chunk_size)


def standard_gaussians(rng: np.random.Generator, shape, field: Field) -> np.ndarray:
    """Real N(0,1) or complex (a + ib)/sqrt(2) entries."""
    g = rng.standard_normal(shape)
    if field is Field.COMPLEX:
        g = (g + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return g


def qmc_gaussians(n: int, log2_count: int, field: Field, seed: int = 0) -> np.ndarray:
    """A fixed scrambled-Sobol gaussian sample matrix of shape (n, 2**log2_count)."""
    d = 2 * n if field is Field.COMPLEX else n
    sob = stats.qmc.Sobol(d, scramble=True, seed=np.random.default_rng(np.random.SeedSequence([seed, 7])))
    u = sob.random_base2(log2_count)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = stats.norm.ppf(u).T
    if field is Field.COMPLEX:
        g = (g[:n] + 1j * g[n:]) / np.sqrt(2)
    return g


def _require_hilbert_domain(u: LinearMap):
    if u.domain.p != 2:
        raise ValueError("averages are defined for maps out of l_2^n")


def basis_images(u: LinearMap) -> np.ndarray:
    """Columns u(e_k) for an orthonormal basis e_k of the (possibly weighted) domain."""
    return u.matrix / u.domain.scale[None, :]


def _mc_report(sq_sum, sq_sq_sum, count, method, policy, n_iter=0):
    mean = sq_sum / count
    var = max(sq_sq_sum / count - mean * mean, 0.0) * count / (count - 1)
    se = np.sqrt(var / count)
    lo = np.sqrt(max(mean - 3 * se, 0.0))
    hi = np.sqrt(mean + 3 * se)
    return EstimateReport(np.sqrt(mean), "bracket", None, method, policy.master_seed, 0, n_iter,
                          lo, hi, extra={"samples": count, "stderr_sq": float(se)})


def _mc_average(A: np.ndarray, Y: FiniteNormedSpace, policy: RngPolicy, tag: int, draw, method):
    s1 = 0.0
    s2 = 0.0
    for c, size in policy.chunks():
        rng = policy.rng(tag, c)
        X = draw(rng, (A.shape[1], size))
        sq = column_norms(A @ X, Y) ** 2
        s1 += float(sq.sum())
        s2 += float((sq * sq).sum())
    return _mc_report(s1, s2, policy.sample_count, method, policy)


def l1_gaussian_second_moment(A: np.ndarray, scale: np.ndarray, field: Field) -> float:
    """E ||A g||_1^2 for weighted l_1 (weights = ``scale``), in closed form."""
    C = A @ A.conj().T if field is Field.COMPLEX else A @ A.T
    sig = np.sqrt(np.maximum(np.real(np.diag(C)), 0))
    keep = sig > 0
    if not np.any(keep):
        return 0.0
    C = C[np.ix_(keep, keep)]
    sig = sig[keep]
    sc = scale[keep]
    rho = C / np.outer(sig, sig)
    if field is Field.COMPLEX:
        r2 = np.clip(np.abs(rho) ** 2, 0, 1)
        E = (np.pi / 4) * special.hyp2f1(-0.5, -0.5, 1.0, r2)
    else:
        r = np.clip(np.real(rho), -1, 1)
        E = (2 / np.pi) * (np.sqrt(1 - r * r) + r * np.arcsin(r))
    np.fill_diagonal(E, 1.0)
    W = np.outer(sig * sc, sig * sc)
    return float(np.sum(W * E))


def gaussian_average(u: LinearMap, policy: RngPolicy = RngPolicy()) -> EstimateReport:
    """l(u), exact for l_2 and l_1 codomains, Monte-Carlo bracket otherwise."""
    _require_hilbert_domain(u)
    A = basis_images(u)
    Y = u.codomain
    field = u.field
    if not np.any(A):
        return EstimateReport(0.0, "exact", None, "zero")
    if Y.p == 2:
        return EstimateReport(np.linalg.norm(Y.scale[:, None] * A), "exact", None, "hilbert-schmidt")
    if Y.p == 1:
        return EstimateReport(np.sqrt(l1_gaussian_second_moment(A, Y.scale, field)), "exact", None,
                              "l1-closed-form")
    return _mc_average(A, Y, policy, TAG_GAUSS, lambda rng, shape: standard_gaussians(rng, shape, field),
                       "monte-carlo")


def rademacher_average(u: LinearMap, policy: RngPolicy = RngPolicy()) -> EstimateReport:
    """r(u) for real maps; exact sign enumeration when n <= 16."""
    _require_hilbert_domain(u)
    if u.field is Field.COMPLEX:
        raise ComplexUnsupported("Rademacher averages are implemented for real maps only")
    A = basis_images(u)
    n = A.shape[1]
    if n <= ENUM_LIMIT:
        S = _sign_matrix(n)
        sq = column_norms(A @ S, u.codomain) ** 2
        return EstimateReport(np.sqrt(sq.mean()), "exact", None, "sign-enumeration")
    return _mc_average(A, u.codomain, policy, TAG_RADEMACHER,
                       lambda rng, shape: rng.choice([-1.0, 1.0], size=shape), "monte-carlo")


def sphere_average_identity(u: LinearMap, policy: RngPolicy = RngPolicy()) -> EstimateReport:
    """sqrt(n) (int ||u x||^2 d sigma(x))^(1/2) by uniform sampling of the unit sphere."""
    _require_hilbert_domain(u)
    A = basis_images(u)
    n = A.shape[1]
    field = u.field

    def draw(rng, shape):
        g = standard_gaussians(rng, shape, field)
        return g / np.linalg.norm(g, axis=0)

    rep = _mc_average(A, u.codomain, policy, TAG_SPHERE, draw, "sphere-monte-carlo")
    r = np.sqrt(n)
    return EstimateReport(rep.value * r, "bracket", None, rep.method, rep.seed, 0, 0, rep.lo * r, rep.hi * r,
                          extra=rep.extra)


class GaussianSurrogate:
    """Deterministic stand-in for l(.)^2 used inside optimizers.

    Closed form for l_2 codomains, a fixed quasi-Monte-Carlo sample otherwise.
    """

    def __init__(self, n: int, Y: FiniteNormedSpace, field: Field, log2_count: int = 12, seed: int = 0):
        self.Y = Y
        self.field = field
        self.n = n
        self.G = None if Y.p == 2 else qmc_gaussians(n, log2_count, field, seed)

    def value_grad(self, A: np.ndarray):
        """Mean squared norm of A g and its gradient in A (A is m x n)."""
        if self.G is None:
            s2 = (self.Y.scale ** 2)[:, None]
            return float(np.sum(s2 * np.abs(A) ** 2)), 2 * s2 * A
        from .optim import norm_value_grad

        Z = A @ self.G
        vals, Gn = norm_value_grad(Z, self.Y)
        S = self.G.shape[1]
        f = float(np.mean(vals ** 2))
        return f, (2.0 / S) * (Gn * vals) @ self.G.conj().T
