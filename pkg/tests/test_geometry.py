import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phinorms.constructions import canonical_system, fourier_system, haar_random_system, l1_subspace_system
from phinorms.core import FiniteNormedSpace, LinearMap, MeasureSpace, OrthonormalSystem
from phinorms.geometry import (
    AllZeroImages,
    HypothesisViolated,
    contact_measure,
    disjoint_support_extract,
    equal_norm_bucketing,
    g_double_prime_functional,
    g_prime_functional,
    gauge_bracket,
    gauge_identity_phi_norm,
    greedy_coordinate_basis,
    minkowski_gauge,
    procrustes_align,
    sup_integral,
)
from phinorms.idealnorms import phi_norm_matrix
from phinorms.optim import OptBudget

SETTINGS = settings(max_examples=20, deadline=None)
FAST = OptBudget(restarts=4, max_iterations=200)


def random_rows(rng, n, N, cplx=False):
    G = rng.standard_normal((N, n)) + (1j * rng.standard_normal((N, n)) if cplx else 0)
    return np.linalg.qr(G)[0].T


# ------------------------------------------------------------ greedy basis

@SETTINGS
@given(st.integers(1, 6), st.integers(0, 6), st.booleans(), st.integers(0, 10_000))
def test_greedy_basis_certified(n, extra, cplx, seed):
    rows = random_rows(np.random.default_rng(seed), n, n + extra, cplx)
    g = greedy_coordinate_basis(rows)
    assert g.certified_ok
    np.testing.assert_allclose(g.basis @ g.basis.conj().T, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(g.rotation @ rows, g.basis, atol=1e-10)
    assert len(set(g.indices)) == n
    np.testing.assert_allclose(g.guarantees, np.abs(g.basis[np.arange(n), g.indices]) ** 2)


def test_greedy_on_coordinate_subspace_is_exact():
    g = greedy_coordinate_basis(np.eye(3, 5))
    np.testing.assert_allclose(g.guarantees, 1.0)
    assert sorted(g.indices) == [0, 1, 2]


def test_greedy_rejects_non_orthonormal_rows():
    with pytest.raises(ValueError):
        greedy_coordinate_basis(2 * np.eye(2, 4))


def test_greedy_accepts_systems():
    phi = fourier_system(3, 8)
    g = greedy_coordinate_basis(phi)
    assert g.basis.shape == (3, 8) and g.certified_ok


# ------------------------------------------------------------ sup functionals

def test_canonical_sup_functionals_attain_sqrt_n():
    phi = canonical_system(3, 7)
    assert sup_integral(phi.values, phi.weights) == pytest.approx(3.0)
    assert g_double_prime_functional(phi, FAST).value == pytest.approx(np.sqrt(3))
    assert g_prime_functional(phi, FAST).value == pytest.approx(np.sqrt(3))


def test_single_function_functional_is_one():
    assert g_double_prime_functional(fourier_system(1, 5), FAST).value == pytest.approx(1.0)


def test_two_dimensional_rotation_against_grid():
    phi = haar_random_system(2, 6, seed=9)
    th = np.linspace(0, np.pi, 20001)
    c, s = np.cos(th), np.sin(th)
    f0, f1 = phi.values
    h0 = np.abs(c[:, None] * f0 + s[:, None] * f1) ** 2
    h1 = np.abs(-s[:, None] * f0 + c[:, None] * f1) ** 2
    grid = np.max(np.sum(phi.weights * np.maximum(h0, h1), axis=1))
    r = g_double_prime_functional(phi, FAST)
    assert r.extra["integral"] == pytest.approx(grid, rel=1e-6)


@SETTINGS
@given(st.sampled_from([fourier_system(3, 8), haar_random_system(3, 7, 1), l1_subspace_system(3, 9, 2),
                        haar_random_system(2, 5, 3)]))
def test_sup_functional_chain(phi):
    gpp = g_double_prime_functional(phi, FAST)
    gp = g_prime_functional(phi, FAST, rotation=gpp.witness)
    assert 1 - 1e-12 <= gpp.value <= gp.value * (1 + 1e-12)
    assert gp.value <= np.sqrt(phi.n) * (1 + 1e-12)
    assert gpp.value ** 2 >= gpp.extra["greedy_integral"] * (1 - 1e-12)
    O = gpp.witness
    np.testing.assert_allclose(O @ O.conj().T, np.eye(phi.n), atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(gp.witness, axis=1), 1.0, atol=1e-10)


# ------------------------------------------------------------ disjoint supports

@SETTINGS
@given(st.integers(1, 5), st.integers(0, 5), st.floats(0.01, 0.9), st.integers(0, 10_000))
def test_disjoint_support_counts(n, extra, eta, seed):
    psi = haar_random_system(n, n + extra, seed)
    r = disjoint_support_extract(psi, eta)
    assert r.mass_total == pytest.approx(sup_integral(psi.values, psi.weights), rel=1e-12)
    assert np.all(r.masses <= 1 + 1e-12)
    assert len(r.selected) >= r.mass_total - n * eta - 1e-12
    assert all(r.masses[l] >= eta for l in r.selected)


def test_disjoint_support_on_canonical():
    r = disjoint_support_extract(canonical_system(3, 6), 0.5)
    assert r.selected == [0, 1, 2]
    np.testing.assert_allclose(r.masses, 1.0)


# ------------------------------------------------------------ Procrustes

def _space(N):
    return MeasureSpace(np.full(N, 1.0 / N))


def test_procrustes_recovers_the_basis():
    phi = haar_random_system(3, 6, seed=2)
    r = procrustes_align(phi.values, phi.values[::-1], phi.space)
    np.testing.assert_allclose(r.overlaps, 1.0, atol=1e-8)


def test_procrustes_grid_two_dimensions():
    N = 6
    phi = haar_random_system(2, N, seed=4)
    other = haar_random_system(2, N, seed=8)
    f = 0.7 * other.values
    r = procrustes_align(f, phi.values, _space(N))
    C = (f / N) @ phi.values.T
    best = 0.0
    for th in np.linspace(0, 2 * np.pi, 20001):
        for refl in (1, -1):
            O = np.array([[np.cos(th), -refl * np.sin(th)], [np.sin(th), refl * np.cos(th)]])
            best = max(best, np.sum(np.diag(C @ O) ** 2))
    assert r.objective == pytest.approx(best, rel=1e-6)
    assert np.all(r.overlaps >= -1e-12)
    np.testing.assert_allclose(r.psi.values @ np.diag(r.psi.weights) @ r.psi.values.T, np.eye(2), atol=1e-10)


@SETTINGS
@given(st.integers(1, 4), st.integers(0, 3), st.booleans(), st.floats(0.0, 0.5), st.integers(0, 10_000))
def test_procrustes_invariants(nf, extra, cplx, tau, seed):
    rng = np.random.default_rng(seed)
    d = nf + extra
    N = d + 3
    T = np.sqrt(N) * random_rows(rng, d, N, cplx)
    f = 0.9 * np.sqrt(N) * random_rows(rng, nf, N, cplx)
    space = _space(N)
    r = procrustes_align(f, T, space, tau=tau, restarts=4, seed=seed)
    G = (r.psi.values * space.weights) @ r.psi.values.conj().T
    np.testing.assert_allclose(G, np.eye(d), atol=1e-9)
    # psi stays inside span(T)
    P = (T * space.weights) @ r.psi.values.conj().T
    np.testing.assert_allclose(np.linalg.norm(P, axis=0), 1.0, atol=1e-9)
    assert np.all(r.overlaps >= -1e-12)
    assert np.sum(r.overlaps ** 2) == pytest.approx(r.objective, rel=1e-9, abs=1e-12)
    assert r.selected == [l for l in range(nf) if r.overlaps[l] >= tau]


def test_procrustes_checks_the_hypothesis():
    phi = haar_random_system(2, 5, seed=1)
    with pytest.raises(HypothesisViolated):
        procrustes_align(2 * phi.values, phi.values, phi.space)


# ------------------------------------------------------------ bucketing

@SETTINGS
@given(st.integers(1, 8), st.integers(0, 10_000))
def test_bucketing_invariants(n, seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((4, n)) * np.exp(3 * rng.standard_normal(n))
    T = LinearMap(FiniteNormedSpace.lp(4, 1.5), FiniteNormedSpace.lp(3, 1), rng.standard_normal((3, 4)))
    r = equal_norm_bucketing(T, V)
    assert r.family.shape == (4, n)
    imgs = np.sum(np.abs(T.matrix @ r.family), axis=0)
    np.testing.assert_allclose(imgs, 1.0, rtol=1e-12)
    assert r.certificate["ok"]
    assert n <= r.certificate["size_I"] < 6 * n


def test_bucketing_with_zero_images_and_all_zero():
    T = LinearMap(FiniteNormedSpace.lp(2), FiniteNormedSpace.lp(2), np.diag([1.0, 0.0]))
    V = np.array([[1.0, 0.0, 2.0], [0.0, 1.0, 0.0]])
    r = equal_norm_bucketing(T, V)
    assert r.family.shape == (2, 3) and r.certificate["dropped_zero_images"] == 1
    with pytest.raises(AllZeroImages):
        equal_norm_bucketing(T, np.array([[0.0], [1.0]]))


# ------------------------------------------------------------ contact measure and gauge

@pytest.mark.parametrize("phi", [fourier_system(3, 7), haar_random_system(3, 6, 1), canonical_system(2, 5)],
                         ids=["fourier", "haar", "canonical"])
def test_contact_measure(phi):
    cm = contact_measure(phi)
    assert cm.masses.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(cm.covariance(), np.eye(phi.n) / phi.n, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(cm.points, axis=0), 1.0)
    M = np.random.default_rng(0).standard_normal((2, phi.n))
    Y = FiniteNormedSpace.lp(2, 1)
    assert cm.phi_norm_of(M, Y) == pytest.approx(phi_norm_matrix(phi, M, Y), rel=1e-12)


def test_gauge_of_canonical_is_l1():
    phi = canonical_system(3, 3)
    x = np.array([0.5, -2.0, 1.0])
    assert minkowski_gauge(phi, x) == pytest.approx(3.5)


@SETTINGS
@given(st.integers(0, 10_000), st.floats(0.1, 5.0))
def test_gauge_is_a_norm_above_l2(seed, c):
    rng = np.random.default_rng(seed)
    phi = haar_random_system(3, 6, seed=seed)
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    gx, gy = minkowski_gauge(phi, x), minkowski_gauge(phi, y)
    assert gx >= np.linalg.norm(x) * (1 - 1e-9)
    assert minkowski_gauge(phi, c * x) == pytest.approx(c * gx, rel=1e-7)
    assert minkowski_gauge(phi, x + y) <= (gx + gy) * (1 + 1e-7)


def test_complex_gauge_bracket_width():
    phi = fourier_system(2, 5)
    x = np.array([1.0, 0.3 + 0.4j])
    lo, hi = gauge_bracket(phi, x, sides=72)
    assert np.linalg.norm(x) <= lo <= hi <= lo / np.cos(np.pi / 72) * (1 + 1e-7)
    # generators have gauge equal to their length
    g = contact_measure(phi).points[:, 2]
    assert gauge_bracket(phi, 2 * g) == pytest.approx((2.0, 2.0))


@pytest.mark.parametrize("phi", [canonical_system(3, 3), haar_random_system(3, 5, 0), fourier_system(2, 4)],
                         ids=["canonical", "haar", "fourier"])
def test_gauge_identity_phi_norm_is_sqrt_n(phi):
    assert gauge_identity_phi_norm(phi) == pytest.approx(np.sqrt(phi.n), rel=1e-7)


def test_gauge_rejects_bad_shape():
    with pytest.raises(ValueError):
        minkowski_gauge(canonical_system(2), np.ones(3))


def test_orthonormal_system_from_procrustes_is_valid():
    phi = l1_subspace_system(2, 5, seed=3)
    r = procrustes_align(phi.values[:1], phi.values, phi.space)
    assert isinstance(r.psi, OrthonormalSystem) and r.psi.gram_deviation() < 1e-10
