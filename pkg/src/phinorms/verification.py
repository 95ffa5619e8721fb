"""Verification suites: the inequality checks, run at desk scale.

Each ``criterion_*`` function returns a :class:`CheckResult` holding one
:class:`Assertion` per measured instance.  Suites group criteria for the
command line.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import constructions as cons
from . import geometry as geo
from .core import Field, FiniteNormedSpace, LinearMap, identity_map
from .idealnorms import family_ratio, phi_norm_matrix, pi2n, pi_phi
from .optim import OptBudget
from .stochastic import RngPolicy, gaussian_average, sphere_average_identity
from .typecotype import (
    c2n,
    c2n_starts_from_cotype,
    cotype_const,
    modified_type_const,
    t2n,
    t2n_starts_from_modified,
    type_const,
)

MIN_SANDWICH_RESTARTS = 32


@dataclass
class Assertion:
    name: str
    passed: bool
    measured: Dict[str, float] = field(default_factory=dict)
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "measured": self.measured, "detail": self.detail}


@dataclass
class CheckResult:
    key: str
    title: str
    assertions: List[Assertion] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.assertions) and all(a.passed for a in self.assertions)

    @property
    def failures(self) -> List[Assertion]:
        return [a for a in self.assertions if not a.passed]

    def add(self, name, passed, detail="", **measured):
        self.assertions.append(Assertion(name, bool(passed), {k: _num(v) for k, v in measured.items()}, detail))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"[{status}] {self.key}: {self.title} ({len(self.assertions) - len(self.failures)}/{len(self.assertions)} checks, {self.seconds:.1f}s)"
        if self.failures:
            f = self.failures[0]
            msg += f" first failure: {f.name} {f.detail} {f.measured}"
        return msg

    def to_dict(self, timing: bool = False) -> dict:
        out = {"key": self.key, "title": self.title, "passed": self.passed,
               "assertions": [a.to_dict() for a in self.assertions]}
        if timing:
            out["seconds"] = self.seconds
        return out


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    try:
        return float(v)
    except (TypeError, ValueError):
        return v


@dataclass(frozen=True)
class VerifyConfig:
    seed: int = 0
    restarts: Optional[int] = None
    samples: int = 200_000
    tol: Optional[float] = None
    iterations: Optional[int] = None

    def budget(self, default_restarts: int, **kw) -> OptBudget:
        r = self.restarts if self.restarts is not None else default_restarts
        if self.iterations is not None:
            kw["max_iterations"] = self.iterations
        return OptBudget(restarts=r, policy=RngPolicy(self.seed, self.samples), **kw)

    def rng(self, tag: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, 500, tag]))


def _timed(fn: Callable[[VerifyConfig], CheckResult]):
    def wrapper(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
        t = time.perf_counter()
        res = fn(cfg)
        res.seconds = time.perf_counter() - t
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _random_matrix(rng, m, n, field=Field.REAL):
    A = rng.standard_normal((m, n))
    if field is Field.COMPLEX:
        A = (A + 1j * rng.standard_normal((m, n))) / np.sqrt(2)
    return A


def factory_catalogue(seed: int = 0):
    """One instance of every system factory (small sizes)."""
    return [
        cons.canonical_system(4, 8),
        cons.fourier_system(5, 12),
        cons.fourier_system(16, 16),
        cons.haar_random_system(6, 10, seed),
        cons.haar_random_system(4, 9, seed, Field.COMPLEX),
        cons.l1_subspace_system(5, 11, seed),
        cons.bourgain_system(cons.bourgain_subset(4, 4, seed)),
    ]


# ---------------------------------------------------------------- criterion 1

@_timed
def criterion_1(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """Exact identities: Gram validation, Phi = Hilbert-Schmidt into l_2, covariance, Phi(iota) = sqrt(n)."""
    tol = cfg.tol or 1e-10
    res = CheckResult("criterion 1", "core identities")
    rng = cfg.rng(1)
    for phi in factory_catalogue(cfg.seed):
        dev = phi.gram_deviation()
        res.add(f"gram {phi.label}", dev <= tol, deviation=dev)
        for _ in range(3):
            m = int(rng.integers(1, 7))
            M = _random_matrix(rng, m, phi.n, phi.field)
            Y = FiniteNormedSpace.lp(m, 2, phi.field)
            a, b = phi_norm_matrix(phi, M, Y), np.linalg.norm(M)
            res.add(f"phi=hs {phi.label}", abs(a - b) <= tol * max(1, b), phi=a, hs=b)
        mu = geo.contact_measure(phi)
        cov = float(np.max(np.abs(mu.covariance() - np.eye(phi.n) / phi.n)))
        res.add(f"covariance {phi.label}", cov <= tol, deviation=cov)
        val = geo.gauge_identity_phi_norm(phi)
        res.add(f"phi(iota) {phi.label}", abs(val - np.sqrt(phi.n)) <= tol * np.sqrt(phi.n),
                value=val, target=np.sqrt(phi.n))
        worst = max(geo.minkowski_gauge(phi, mu.points[:, j]) for j in range(mu.points.shape[1]))
        res.add(f"gauge(contact) {phi.label}", worst <= 1 + tol, worst=worst)
    return res


@_timed
def gauge_checks(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """Contact-measure identities and the gauge lower bound ||x||_2 <= gauge(x)."""
    tol = cfg.tol or 1e-10
    res = CheckResult("gauge", "contact measure and gauge")
    rng = cfg.rng(2)
    for phi in factory_catalogue(cfg.seed):
        mu = geo.contact_measure(phi)
        cov = float(np.max(np.abs(mu.covariance() - np.eye(phi.n) / phi.n)))
        res.add(f"covariance {phi.label}", cov <= tol, deviation=cov)
        for _ in range(3):
            m = int(rng.integers(1, 5))
            M = _random_matrix(rng, m, phi.n, phi.field)
            Y = FiniteNormedSpace.lp(m, [1, 2, np.inf][int(rng.integers(3))], phi.field)
            a, b = phi_norm_matrix(phi, M, Y), mu.phi_norm_of(M, Y)
            res.add(f"polar identity {phi.label}", abs(a - b) <= tol * max(1, a), phi=a, contact=b)
        val = geo.gauge_identity_phi_norm(phi)
        res.add(f"phi(iota) {phi.label}", abs(val - np.sqrt(phi.n)) <= tol * np.sqrt(phi.n), value=val)
        slack = 1e-3 if phi.field is Field.COMPLEX else 1e-9
        for _ in range(3):
            x = _random_matrix(rng, phi.n, 1, phi.field)[:, 0]
            g = geo.minkowski_gauge(phi, x)
            r = np.linalg.norm(x)
            res.add(f"gauge>=l2 {phi.label}", g >= r * (1 - slack), gauge=g, l2=r)
    return res


# ---------------------------------------------------------------- criterion 2

def _sandwich_pairs(cfg: VerifyConfig, count: int = 30):
    rng = cfg.rng(3)
    pairs = []
    kinds = ["fourier", "haar", "canonical", "l1sub"]
    codomains = [np.inf, 1, 2]
    for i in range(count):
        n = int(rng.integers(2, 9))
        kind = kinds[i % 4]
        if kind == "fourier":
            phi = cons.fourier_system(n, int(rng.integers(n, 3 * n + 1)))
        elif kind == "haar":
            phi = cons.haar_random_system(n, int(rng.integers(n, 3 * n + 1)), seed=cfg.seed + i)
        elif kind == "canonical":
            phi = cons.canonical_system(n, int(rng.integers(n, 2 * n + 1)))
        else:
            phi = cons.l1_subspace_system(n, int(rng.integers(n + 1, 3 * n + 1)), seed=cfg.seed + i)
        m = int(rng.integers(2, 13))
        q = codomains[i % 3]
        field = phi.field
        u = LinearMap(FiniteNormedSpace.lp(n, 2, field), FiniteNormedSpace.lp(m, q, field),
                      _random_matrix(rng, m, n, field))
        pairs.append((phi, u))
    return pairs


@_timed
def criterion_2(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """l(u) <= pi_Phi(u); Phi(u) <= pi_2(u) = HS(u) into l_2; gaussian vs sphere averages agree."""
    res = CheckResult("criterion 2", "sandwich l <= pi_Phi <= pi_2")
    budget = cfg.budget(MIN_SANDWICH_RESTARTS, max_iterations=300)
    if budget.restarts < MIN_SANDWICH_RESTARTS:
        res.add("budget guard", False, f"insufficient restarts: {budget.restarts} < {MIN_SANDWICH_RESTARTS}",
                restarts=budget.restarts)
        return res
    for phi, u in _sandwich_pairs(cfg):
        tag = f"{phi.label} -> {u.codomain.describe()}"
        ell = gaussian_average(u, budget.policy)
        pp = pi_phi(phi, u, budget)
        res.add(f"l<=piPhi {tag}", ell.bracket[0] <= 1.05 * pp.value, ell_lo=ell.bracket[0], pi_phi=pp.value)
        if u.codomain.p == 2:
            a = phi_norm_matrix(phi, u.matrix, u.codomain)
            hs = float(np.linalg.norm(u.matrix))
            res.add(f"phi<=pi2 {tag}", a <= hs * (1 + 1e-12), phi=a, pi2=hs)
        sph = sphere_average_identity(u, budget.policy.derive(7))
        lo1, hi1 = ell.bracket
        lo2, hi2 = sph.bracket
        res.add(f"polar agreement {tag}", lo1 <= hi2 and lo2 <= hi1, ell=ell.value, sphere=sph.value)
    return res


# ---------------------------------------------------------------- criterion 3

@_timed
def criterion_3(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """Dyadic bucketing: n <= |I| < 6n and equal-norm ratio >= 0.98 * ratio / sqrt(6)."""
    res = CheckResult("criterion 3", "equal-norm reduction")
    rng = cfg.rng(4)
    for i in range(20):
        n = int(rng.integers(1, 13))
        mx = int(rng.integers(2, 11))
        my = int(rng.integers(2, 9))
        X = FiniteNormedSpace.lp(mx, [np.inf, 2, 1][i % 3])
        Y = FiniteNormedSpace.lp(my, [2, 1, np.inf][(i // 3) % 3])
        T = LinearMap(X, Y, rng.standard_normal((my, mx)))
        V = rng.standard_normal((mx, n)) * 2.0 ** (-rng.uniform(0, 6, size=n))
        b = geo.equal_norm_bucketing(T, V)
        r_in = family_ratio(T, V)
        r_out = family_ratio(T, b.family)
        res.add(f"certificate #{i}", b.certificate["ok"], size_I=b.certificate["size_I"], n=n)
        res.add(f"ratio #{i}", r_out >= 0.98 * r_in / np.sqrt(6), ratio_in=r_in, ratio_out=r_out)
    return res


# ---------------------------------------------------------------- criterion 4

@_timed
def criterion_4(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """Greedy coordinate basis: step bounds (n-2k+2)/N and the sup-integral floor n^2/(12N)."""
    res = CheckResult("criterion 4", "greedy guarantee")
    rng = cfg.rng(5)
    for n, N in [(6, 12), (9, 27), (12, 48)]:
        worst = np.inf
        ok = True
        floor_ok = True
        min_floor_ratio = np.inf
        for _ in range(100):
            Q, _ = np.linalg.qr(rng.standard_normal((N, n)))
            g = geo.greedy_coordinate_basis(Q.T)
            k = g.certified_steps
            margin = g.guarantees[:k] - g.bounds[:k]
            worst = min(worst, float(margin.min()))
            ok &= g.certified_ok
            if n >= 12:
                J = geo.sup_integral(g.basis, np.ones(N))
                floor = n * n / (12 * N)
                min_floor_ratio = min(min_floor_ratio, np.sqrt(J / floor))
                floor_ok &= J >= floor * (1 - 1e-12)
        res.add(f"step bounds (n={n}, N={N})", ok, worst_margin=worst)
        if n >= 12:
            res.add(f"warm-start floor (n={n}, N={N})", floor_ok, min_value_over_floor=min_floor_ratio)
    return res


# ---------------------------------------------------------------- criterion 5

@_timed
def criterion_5(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """c_2^n(T) <= 1.1 * 12 sqrt(N/n) c_Phi(T) for Fourier and Haar systems with N <= 4n."""
    res = CheckResult("criterion 5", "proportional cotype")
    budget = cfg.budget(4, max_iterations=200)
    rng = cfg.rng(6)
    for n in (4, 8, 16):
        N = 4 * n
        systems = [cons.fourier_system(n, N), cons.haar_random_system(n, N, seed=cfg.seed + n)]
        ops = {"I_linf": identity_map(n, np.inf),
               "random_l2": LinearMap(FiniteNormedSpace.lp(n, 2), FiniteNormedSpace.lp(n, 2),
                                      rng.standard_normal((n, n)) / np.sqrt(n))}
        c2 = {k: c2n(T, n, budget) for k, T in ops.items()}
        for phi in systems:
            for k, T in ops.items():
                cp = cotype_const(phi, T, budget)
                bound = 1.1 * 12 * np.sqrt(N / n) * cp.value
                res.add(f"{phi.label} {k}", c2[k].value <= bound, c2n=c2[k].value, c_phi=cp.value, bound=bound)
    return res


# ---------------------------------------------------------------- criterion 6

def dft_rotation(n: int) -> np.ndarray:
    """P / sqrt(n) with P[k, l] = exp(2 pi i k l / n), k = 1..n."""
    k = np.arange(1, n + 1)[:, None]
    l = np.arange(n)[None, :]
    return np.exp(2j * np.pi * k * l / n) / np.sqrt(n)


@_timed
def criterion_6(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """pi_2^n(u) <= 2 pi_{E_n}(u) for the characters 1..n on Z_{4n}, u into l_inf^n."""
    res = CheckResult("criterion 6", "Marcinkiewicz-Zygmund direction")
    budget = cfg.budget(4, max_iterations=300)
    rng = cfg.rng(7)
    for n in (2, 4, 8, 16):
        phi = cons.fourier_system(n, 4 * n)
        D = dft_rotation(n)
        worst = 0.0
        for i in range(20):
            u = LinearMap(FiniteNormedSpace.lp(n, 2), FiniteNormedSpace.lp(n, np.inf), rng.standard_normal((n, n)))
            p2 = pi2n(u, n, budget)
            # the sub-grid 4Z_{4n} turns a pi_2^n witness into an E_n witness losing at most 2
            pe = pi_phi(phi, u, budget, warm_starts=[p2.witness @ D.conj().T])
            ratio = p2.value / pe.value
            worst = max(worst, ratio)
            res.add(f"n={n} #{i}", ratio <= 2.0, ratio=ratio, pi2n=p2.value, pi_E=pe.value)
    return res


# ---------------------------------------------------------------- criterion 7

@_timed
def criterion_7(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """Haar systems (8, 64), q = 4: K_q bound and the cotype bound through K_q."""
    res = CheckResult("criterion 7", "random-system cotype smallness")
    n, N, q = 8, 64, 4
    budget = cfg.budget(4, max_iterations=200)
    kq = []
    for s in range(20):
        phi = cons.haar_random_system(n, N, seed=cfg.seed + s)
        k = cons.kq_constant(phi, q, budget).value
        kq.append(k)
        c = cotype_const(phi, identity_map(n, np.inf), budget).value
        lhs = c * np.sqrt(np.log(n + 1)) / n ** (1 / q)
        res.add(f"cotype via K_q seed {s}", lhs <= 20 * k, lhs=lhs, kq=k, c_phi=c)
    bound = 10 * max(np.sqrt(q), np.sqrt(n) * N ** (-1 / q))
    res.add("mean K_q", np.mean(kq) <= bound, mean_kq=np.mean(kq), bound=bound)
    return res


# ---------------------------------------------------------------- criterion 8

@_timed
def criterion_8(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """Random subspaces (16, 32): Lambda_2 bound and modified type of l_1^16 through Lambda_2."""
    res = CheckResult("criterion 8", "l1-subspace type smallness")
    n, N = 16, 32
    budget = cfg.budget(3, max_iterations=150)
    lam = []
    T = identity_map(n, 1)
    for s in range(20):
        phi = cons.l1_subspace_system(n, N, seed=cfg.seed + s)
        l2 = cons.lambda2_constant(phi, budget).value
        lam.append(l2)
        th = modified_type_const(phi, T, budget).value
        res.add(f"modified type via Lambda_2 seed {s}", th <= 20 * l2, t_hat=th, lambda2=l2)
    bound = 10 * np.sqrt(2 * np.log(3))
    res.add("median Lambda_2", np.median(lam) <= bound, median=np.median(lam), bound=bound)
    return res


# ---------------------------------------------------------------- criterion 9

def _chain_pairs(cfg: VerifyConfig, count: int = 20):
    rng = cfg.rng(9)
    out = []
    exps = [np.inf, 1, 2]
    for i in range(count):
        n = int(rng.integers(2, 5))
        N = int(rng.integers(n, 2 * n + 2))
        phi = [cons.fourier_system(n, N), cons.haar_random_system(n, N, seed=cfg.seed + i),
               cons.l1_subspace_system(n, N + 1, seed=cfg.seed + i)][i % 3]
        mx, my = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        X = FiniteNormedSpace.lp(mx, exps[i % 3])
        Y = FiniteNormedSpace.lp(my, exps[(i // 3) % 3])
        out.append((phi, LinearMap(X, Y, rng.standard_normal((my, mx)))))
    return out


@_timed
def criterion_9(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """t_Phi <= t_hat_Phi <= sqrt(2) t_2^n and c_Phi <= sqrt(2) c_2^n, on re-evaluated witnesses."""
    res = CheckResult("criterion 9", "type/cotype chain")
    budget = cfg.budget(4, max_iterations=200)
    r2 = np.sqrt(2)
    for phi, T in _chain_pairs(cfg):
        tag = f"{phi.label} {T.domain.describe()}->{T.codomain.describe()}"
        n = phi.n
        t = type_const(phi, T, budget)
        th = modified_type_const(phi, T, budget, warm_start=t.witness)
        tn = t2n(T, n, budget, warm_starts=t2n_starts_from_modified(phi, th.witness) + [t.witness])
        c = cotype_const(phi, T, budget)
        cn = c2n(T, n, budget, warm_starts=c2n_starts_from_cotype(phi, T, c.witness, budget))
        res.add(f"t<=t_hat {tag}", t.value <= 1.05 * th.value, t=t.value, t_hat=th.value)
        res.add(f"t_hat<=sqrt2 t2n {tag}", th.value <= 1.05 * r2 * tn.value, t_hat=th.value, t2n=tn.value)
        res.add(f"c<=sqrt2 c2n {tag}", c.value <= 1.05 * r2 * cn.value, c=c.value, c2n=cn.value)
    return res


# ---------------------------------------------------------------- criterion 10

@_timed
def criterion_10(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """Full Fourier on Z_16 is rotated to disjoint supports; canonical systems are already disjoint."""
    res = CheckResult("criterion 10", "disjoint-support loop")
    n = 16
    budget = cfg.budget(4)
    phi = cons.fourier_system(n, n)
    g = geo.g_double_prime_functional(phi, budget)
    J = g.extra["integral"]
    res.add("sup-integral", J >= 0.9 * n, integral=J, target=0.9 * n)
    psi = phi.rotated(g.witness)
    ext = geo.disjoint_support_extract(psi, 0.45)
    res.add("extraction |J|", len(ext.selected) >= 8, selected=len(ext.selected))
    res.add("mass identity", abs(ext.mass_total - geo.sup_integral(psi.values, psi.weights)) <= 1e-10,
            masses=ext.mass_total)
    for nn, N in [(4, 4), (5, 9), (16, 16)]:
        e = geo.disjoint_support_extract(cons.canonical_system(nn, N), 0.9)
        res.add(f"canonical({nn},{N}) masses", np.allclose(e.masses, 1.0, atol=1e-12) and len(e.selected) == nn,
                min_mass=float(e.masses.min()))
    return res


# ---------------------------------------------------------------- criterion 11

@_timed
def criterion_11(cfg: VerifyConfig = VerifyConfig()) -> CheckResult:
    """Growth from n = 4 to 16: c_2^n(l_inf^n) and c_Fourier(l_inf^n) grow, Haar (n = sqrt N) grows less."""
    res = CheckResult("criterion 11", "growth-rate contrast")
    budget = cfg.budget(4, max_iterations=300)
    vals = {}
    for n in (4, 16):
        T = identity_map(n, np.inf)
        vals[("c2n", n)] = c2n(T, n, budget).value
        vals[("fourier", n)] = cotype_const(cons.fourier_system(n, 4 * n), T, budget).value
        vals[("haar", n)] = cotype_const(cons.haar_random_system(n, n * n, seed=cfg.seed), T, budget).value
    g = {k: vals[(k, 16)] / vals[(k, 4)] for k in ("c2n", "fourier", "haar")}
    res.add("c2n growth", g["c2n"] >= 1.25, growth=g["c2n"], at4=vals[("c2n", 4)], at16=vals[("c2n", 16)])
    res.add("fourier growth", g["fourier"] >= 1.25, growth=g["fourier"], at4=vals[("fourier", 4)],
            at16=vals[("fourier", 16)])
    res.add("haar grows less", g["haar"] <= g["fourier"], haar=g["haar"], fourier=g["fourier"],
            at4=vals[("haar", 4)], at16=vals[("haar", 16)])
    return res


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}

SUITES = {
    "core": [criterion_1],
    "sandwich": [criterion_2, criterion_9],
    "epz": [criterion_3],
    "greedy": [criterion_4],
    "geometryLoop": [criterion_5, criterion_10],
    "mz": [criterion_6],
    "randomSystems": [criterion_7, criterion_11],
    "l1Systems": [criterion_8],
    "gauge": [gauge_checks],
}


@dataclass
class SuiteReport:
    suite: str
    results: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self, timing: bool = False) -> dict:
        return {"suite": self.suite, "passed": self.passed, "checks": [r.to_dict(timing) for r in self.results]}


def run_suite(name: str, cfg: VerifyConfig = VerifyConfig()) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SuiteReport(name, [fn(cfg) for fn in SUITES[name]])
