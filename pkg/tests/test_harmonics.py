import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import lpmv

from soler3d.errors import InvalidArgument
from soler3d.harmonics import (
    HarmonicIndex,
    assoc_legendre,
    basis_index,
    coupling_coefficients,
    dtheta_harmonic,
    eval_harmonic,
    grid_for_degree,
    identity_report_json,
    make_angular_grid,
    pauli_spherical,
    project,
    srso_apply,
    srso_leakage,
    srso_matrix_elements,
    srso_on_harmonic,
    verify_spin_orbit_identities,
)

SIGMA2 = np.array([[0, -1j], [1j, 0]])


def test_legendre_examples():
    assert assoc_legendre(0, 0, 0.3) == pytest.approx(1.0)
    assert assoc_legendre(1, 1, 0.0) == pytest.approx(1.0)
    assert assoc_legendre(2, 3, 0.5) == 0.0


def test_legendre_rejects_outside_interval():
    with pytest.raises(InvalidArgument):
        assoc_legendre(2, 1, 1.5)


@given(ell=st.integers(0, 12), data=st.data(), w=st.floats(-1.0, 1.0))
def test_legendre_matches_definition(ell, data, w):
    # (1 - w^2)^{m/2} d^m/dw^m P_l(w), with P_l from numpy's Legendre basis
    m = data.draw(st.integers(0, ell))
    ref = (1 - w * w) ** (m / 2) * np.polynomial.Legendre.basis(ell).deriv(m)(w)
    assert assoc_legendre(ell, m, w) == pytest.approx(ref, rel=1e-11, abs=1e-11 * max(1.0, abs(ref)))


@pytest.mark.parametrize("ell", range(0, 9))
def test_legendre_matches_scipy_without_condon_shortley(ell):
    w = np.linspace(-0.95, 0.95, 11)
    for m in range(ell + 1):
        ref = (-1) ** m * lpmv(m, ell, w)
        np.testing.assert_allclose(assoc_legendre(ell, m, w), ref, rtol=1e-9, atol=1e-9)


def test_harmonic_examples():
    assert eval_harmonic(0, 0, 0.7, 2.1) == pytest.approx(1 / math.sqrt(4 * math.pi))
    assert eval_harmonic(1, 0, 0.0, 0.0) == pytest.approx(math.sqrt(3 / (4 * math.pi)))


def test_harmonic_index_validation():
    assert HarmonicIndex(3, -2).kappa == 12
    with pytest.raises(InvalidArgument):
        HarmonicIndex(1, 2)


@given(ell=st.integers(0, 8), data=st.data(), th=st.floats(0.0, math.pi), ph=st.floats(0.0, 2 * math.pi))
def test_conjugation_symmetry(ell, data, th, ph):
    m = data.draw(st.integers(-ell, ell))
    assert eval_harmonic(ell, -m, th, ph) == pytest.approx(np.conj(eval_harmonic(ell, m, th, ph)), abs=1e-13)


def test_orthonormality_up_to_six():
    grid = grid_for_degree(6)
    th, ph = grid.mesh
    idx = [(l, m) for l in range(7) for m in range(-l, l + 1)]
    hs = np.array([eval_harmonic(l, m, th, ph) for l, m in idx])
    gram = np.einsum("aij,bij,ij->ab", np.conj(hs), hs, grid.weights)
    assert np.max(np.abs(gram - np.eye(len(idx)))) <= 1e-12


def test_no_condon_shortley_phase():
    # h_{1,1} = sqrt(3/8pi) sin(theta) e^{i phi}, positive at theta = pi/2, phi = 0
    assert eval_harmonic(1, 1, math.pi / 2, 0.0).real == pytest.approx(math.sqrt(3 / (8 * math.pi)))


@given(ell=st.integers(0, 7), data=st.data(), th=st.floats(0.1, math.pi - 0.1), ph=st.floats(0.0, 6.28))
def test_dtheta_matches_finite_difference(ell, data, th, ph):
    m = data.draw(st.integers(-ell, ell))
    eps = 1e-6
    fd = (eval_harmonic(ell, m, th + eps, ph) - eval_harmonic(ell, m, th - eps, ph)) / (2 * eps)
    assert dtheta_harmonic(ell, m, th, ph) == pytest.approx(fd, abs=1e-7 * (1 + ell) ** 2)


def test_pauli_sigma_r_is_unitary_and_hermitian():
    grid = make_angular_grid(5, 9)
    th, ph = grid.mesh
    sig_r, _, _ = pauli_spherical(th, ph)
    prod = np.einsum("ij...,jk...->ik...", sig_r, sig_r)
    assert np.allclose(prod[0, 0], 1) and np.allclose(prod[1, 1], 1) and np.allclose(prod[0, 1], 0)
    assert np.allclose(sig_r[0, 1], np.conj(sig_r[1, 0]))


@pytest.mark.parametrize("ell", range(0, 7))
def test_mssm_diagonal_and_corners(ell):
    mat = srso_matrix_elements(ell)
    n = 2 * ell + 1
    assert mat.shape == (2 * n, 2 * n)
    for m in range(-ell, ell + 1):
        assert mat[basis_index(ell, m, 0), basis_index(ell, m, 0)] == pytest.approx(-m, abs=1e-10)
        assert mat[basis_index(ell, m, 1), basis_index(ell, m, 1)] == pytest.approx(m, abs=1e-10)
    assert abs(mat[basis_index(ell, ell, 1), basis_index(ell, ell, 0)]) <= 1e-10
    assert abs(mat[basis_index(ell, -ell, 0), basis_index(ell, -ell, 1)]) <= 1e-10


@pytest.mark.parametrize("ell", range(1, 6))
def test_mssm_band(ell):
    mat = srso_matrix_elements(ell)
    for s in range(2):
        for t in range(2):
            for m in range(-ell, ell + 1):
                for k in range(-ell, ell + 1):
                    if abs(m - k) > 1:
                        assert abs(mat[basis_index(ell, m, s), basis_index(ell, k, t)]) <= 1e-12


@pytest.mark.parametrize("ell", range(0, 7))
def test_srso_eigenvalues(ell):
    # T^2 - T - l(l+1) = 0: spectrum {-l, l+1} with multiplicities 2l+2 and 2l
    ev = np.sort(np.linalg.eigvals(srso_matrix_elements(ell)).real)
    expected = np.array([-ell] * (2 * ell + 2) + [ell + 1] * (2 * ell), dtype=float)
    assert np.allclose(ev, expected, atol=1e-9)


def test_srso_apply_matches_matrix():
    ell = 3
    grid = grid_for_degree(ell)
    rng = np.random.default_rng(4)
    coeffs = {(ell, m): rng.normal(size=2) + 1j * rng.normal(size=2) for m in range(-ell, ell + 1)}
    image = srso_apply(coeffs, grid)
    mat = srso_matrix_elements(ell)
    vec = np.zeros(2 * (2 * ell + 1), dtype=complex)
    for (l, m), c in coeffs.items():
        vec[basis_index(l, m, 0)], vec[basis_index(l, m, 1)] = c
    out = mat @ vec
    for m in range(-ell, ell + 1):
        got = [project(image[s], ell, m, grid) for s in range(2)]
        assert got[0] == pytest.approx(out[basis_index(ell, m, 0)], abs=1e-12)
        assert got[1] == pytest.approx(out[basis_index(ell, m, 1)], abs=1e-12)


def test_srso_annihilates_constants():
    grid = grid_for_degree(0)
    assert np.max(np.abs(srso_on_harmonic(0, 0, grid))) <= 1e-14


@pytest.mark.parametrize("ell", range(0, 7))
def test_leakage(ell):
    assert srso_leakage(ell) <= 1e-10


@pytest.mark.parametrize("ell", [1, 2, 4])
def test_coupling_parallel_case(ell):
    xi, eta = np.array([1.3, 0]), np.array([0.4j, 0])
    c = coupling_coefficients(ell, xi, eta)
    norm2 = 1.3**2 + 0.4**2
    expected = -norm2 * np.diag(np.arange(-ell, ell + 1))
    assert np.max(np.abs(c - expected)) <= 1e-10


@pytest.mark.parametrize("ell", [1, 3])
@pytest.mark.parametrize("s", [0.3, 0.9])
def test_coupling_sigma2_case(ell, s):
    xi = np.array([1.0, 0.0])
    eta = s * (SIGMA2 @ np.conj(xi))
    c = coupling_coefficients(ell, xi, eta)
    expected = -(1 - s * s) * np.diag(np.arange(-ell, ell + 1))
    assert np.max(np.abs(c - expected)) <= 1e-10


def test_coupling_degree_zero_and_band():
    assert np.allclose(coupling_coefficients(0, [1, 0], [0, 0]), 0.0)
    rng = np.random.default_rng(1)
    c = coupling_coefficients(3, rng.normal(size=2) + 1j * rng.normal(size=2), rng.normal(size=2))
    for i in range(7):
        for j in range(7):
            if abs(i - j) > 1:
                assert abs(c[i, j]) <= 1e-12
    with pytest.raises(InvalidArgument):
        coupling_coefficients(2, [0, 0], [0, 0])


def test_identity_suite():
    records = verify_spin_orbit_identities(6)
    names = {r.check_name for r in records}
    assert names == {"anticommutator", "spin_orbit_laplacian", "degree_leakage"}
    assert {r.ell for r in records} == set(range(7))
    for r in records:
        tol = 1e-8 if r.check_name == "spin_orbit_laplacian" else 1e-10
        assert r.max_abs_deviation <= tol, r
    assert '"check_name"' in identity_report_json(records[:2])
    with pytest.raises(InvalidArgument):
        verify_spin_orbit_identities(0)
