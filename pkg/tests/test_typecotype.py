import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phinorms.constructions import canonical_system, fourier_system, haar_random_system, l1_subspace_system
from phinorms.core import Field, FiniteNormedSpace, LinearMap, identity_map
from phinorms.optim import OptBudget
from phinorms.typecotype import (
    c2n,
    c2n_starts_from_cotype,
    coefficients,
    cotype_const,
    modified_type_const,
    t2n,
    t2n_starts_from_modified,
    type_const,
)

SETTINGS = settings(max_examples=10, deadline=None)
FAST = OptBudget(restarts=3, max_iterations=150)


def phi_direct(phi, V, q):
    """(sum_j p_j ||sum_k phi_k(w_j) x_k||_q^2)^(1/2), written out without the package."""
    F = V @ phi.values
    norms = np.max(np.abs(F), axis=0) if np.isinf(q) else np.sum(np.abs(F) ** q, axis=0) ** (1 / q)
    return np.sqrt(np.sum(phi.weights * norms ** 2))


def op(A, p, q):
    A = np.asarray(A)
    field = Field.COMPLEX if np.iscomplexobj(A) else Field.REAL
    return LinearMap(FiniteNormedSpace.lp(A.shape[1], p, field), FiniteNormedSpace.lp(A.shape[0], q, field), A)


SYSTEMS = [canonical_system(3), fourier_system(3, 7), haar_random_system(3, 5, 2), l1_subspace_system(3, 6, 1)]


# ------------------------------------------------------------ Hilbert spaces

@pytest.mark.parametrize("phi", SYSTEMS, ids=lambda s: s.label or "system")
def test_hilbert_identity_constants_are_one(phi):
    T = identity_map(3, 2, field=phi.field)
    for fn in (cotype_const, type_const, modified_type_const):
        assert fn(phi, T, FAST).value == pytest.approx(1.0, rel=1e-9)


def test_c2n_t2n_of_hilbert_identity():
    T = identity_map(4)
    assert c2n(T, 4, FAST).value == pytest.approx(1.0, rel=1e-9)
    assert t2n(T, 4, FAST).value == pytest.approx(1.0, rel=1e-9)


# ------------------------------------------------------------ report consistency

def test_cotype_value_matches_its_witness():
    A = np.random.default_rng(0).standard_normal((3, 3))
    phi = fourier_system(3, 5)
    T = op(A.astype(complex), 2, 1)
    r = cotype_const(phi, T, FAST)
    expected = phi_direct(phi, A @ r.witness, 1) / np.linalg.norm(r.witness)
    assert r.direction == "lower"
    assert r.value == pytest.approx(expected, rel=1e-10)
    assert r.lo == pytest.approx(r.value) == r.hi  # l_2 gaussian averages are exact


def test_type_value_matches_its_witness():
    A = np.random.default_rng(1).standard_normal((3, 3))
    phi = haar_random_system(3, 6, seed=4)
    r = type_const(phi, op(A, 1, 2), FAST)
    expected = np.linalg.norm(A @ r.witness) / phi_direct(phi, r.witness, 1)
    assert r.value == pytest.approx(expected, rel=1e-10)


@SETTINGS
@given(st.integers(0, 10_000))
def test_estimates_dominate_random_families(seed):
    rng = np.random.default_rng(seed)
    phi = haar_random_system(3, 5, seed=seed)
    A = rng.standard_normal((3, 3))
    V = rng.standard_normal((3, 3))
    c = cotype_const(phi, op(A, 2, 1), FAST).value
    assert c >= phi_direct(phi, A @ V, 1) / np.linalg.norm(V) * (1 - 1e-9)
    t = type_const(phi, op(A, 1, 2), FAST).value
    assert t >= np.linalg.norm(A @ V) / phi_direct(phi, V, 1) * (1 - 1e-9)


@SETTINGS
@given(st.floats(0.1, 10.0), st.integers(0, 1000))
def test_constants_scale_with_the_operator(c, seed):
    A = np.random.default_rng(seed).standard_normal((3, 3))
    phi = fourier_system(3, 6)
    base = cotype_const(phi, op(A.astype(complex), 2, 1), FAST).value
    scaled = cotype_const(phi, op(c * A.astype(complex), 2, 1), FAST).value
    assert scaled == pytest.approx(c * base, rel=1e-3)


def test_zero_operator_gives_zero():
    T = op(np.zeros((2, 3)), 1, 2)
    phi = canonical_system(3)
    for fn in (cotype_const, type_const, modified_type_const):
        r = fn(phi, T, FAST)
        assert r.value == 0.0 and r.direction == "exact"


# ------------------------------------------------------------ known growth

@pytest.mark.parametrize("n", [4, 8])
def test_c2n_of_linf_grows(n):
    assert c2n(identity_map(n, np.inf), n, FAST).value >= 0.1 * np.sqrt(n / np.log(n + 1))


@pytest.mark.parametrize("n", [4, 8])
def test_fourier_cotype_of_linf_grows(n):
    r = cotype_const(fourier_system(n, 4 * n), identity_map(n, np.inf, field=Field.COMPLEX), FAST)
    assert r.value >= 0.1 * np.sqrt(n / np.log(n + 1))


def test_t2n_of_l1_plane_at_least_one():
    assert t2n(identity_map(2, 1), 2, FAST).value >= 1 - 1e-9


@pytest.mark.parametrize("n", [4, 9])
def test_canonical_type_of_l1_grows(n):
    assert type_const(canonical_system(n), identity_map(n, 1), FAST).value >= 0.1 * np.sqrt(n)


def test_canonical_cotype_is_c2n():
    T = op(np.random.default_rng(3).standard_normal((4, 3)), 1.5, np.inf)
    a = cotype_const(canonical_system(3), T, FAST, rotation_start=False).value
    b = c2n(T, 3, FAST).value
    assert a == pytest.approx(b, rel=1e-12)


# ------------------------------------------------------------ chains and warm starts

def test_modified_type_dominates_type():
    phi = l1_subspace_system(3, 6, seed=2)
    T = identity_map(3, 1)
    assert modified_type_const(phi, T, FAST).value >= type_const(phi, T, FAST).value * (1 - 1e-9)


def test_coefficients_invert_the_embedding():
    phi = haar_random_system(3, 7, seed=1)
    V = np.random.default_rng(0).standard_normal((2, 3))
    np.testing.assert_allclose(coefficients(phi, V @ phi.values), V, atol=1e-12)


def test_t2n_warm_start_from_modified_type():
    phi = fourier_system(3, 6)
    T = identity_map(3, 1, field=Field.COMPLEX)
    F = modified_type_const(phi, T, FAST).witness
    (start,) = t2n_starts_from_modified(phi, F)
    start_ratio = t2n(T, 3, FAST.replace(restarts=1, max_iterations=1), warm_starts=[start]).value
    assert t2n(T, 3, FAST, warm_starts=[start]).value >= start_ratio * (1 - 1e-9)


def test_c2n_warm_start_from_cotype():
    phi = fourier_system(4, 16)
    T = identity_map(4, np.inf, field=Field.COMPLEX)
    r = cotype_const(phi, T, FAST)
    starts = c2n_starts_from_cotype(phi, T, r.witness, FAST)
    assert len(starts) == 2 and starts[0].shape == (4, 4)
    warm = c2n(T, 4, FAST, warm_starts=starts).value
    assert warm >= c2n(T, 4, FAST.replace(max_iterations=1), warm_starts=[starts[1]]).value * (1 - 1e-9)


def test_witness_rescaling_leaves_the_ratio_unchanged():
    from phinorms.idealnorms import phi_norm_matrix
    from phinorms.stochastic import gaussian_average

    phi = haar_random_system(3, 5, seed=6)
    T = identity_map(3, 1, np.inf)
    r = type_const(phi, T, FAST)

    def ratio(V):
        ell = gaussian_average(LinearMap(FiniteNormedSpace.lp(3), T.codomain, T.matrix @ V), FAST.policy)
        return ell.value / phi_norm_matrix(phi, V, T.domain)

    for lam in (1e-3, 7.0, -2.5):
        assert ratio(lam * r.witness) == pytest.approx(ratio(r.witness), rel=1e-9)
    assert ratio(r.witness) == pytest.approx(r.value, rel=1e-9)


def _stability_operator(name, n):
    if name == "rand":
        rng = np.random.default_rng(np.random.SeedSequence([n, 5]))
        A = rng.standard_normal((n, n)) / np.sqrt(n) + 0j
        return LinearMap(FiniteNormedSpace.lp(n, np.inf, Field.COMPLEX), FiniteNormedSpace.lp(n, 2, Field.COMPLEX), A)
    return identity_map(n, np.inf if name == "linf" else 1, field=Field.COMPLEX)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["linf", "l1", "rand"])
def test_fourier_c2n_over_cotype_is_stable_in_n(name):
    ratios = []
    for n in (4, 8, 16):
        phi, T = fourier_system(n, 4 * n), _stability_operator(name, n)
        c = cotype_const(phi, T, FAST)
        d = c2n(T, n, FAST, warm_starts=c2n_starts_from_cotype(phi, T, c.witness, FAST))
        ratios.append(d.value / c.value)
    ratios = np.array(ratios)
    assert np.max(np.abs(ratios / ratios.mean() - 1)) <= 0.25
