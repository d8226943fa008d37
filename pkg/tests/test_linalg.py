import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from splitkit.errors import BranchCutError, ClusteringError, InvalidInputError
from splitkit.linalg import (
    Spectrum,
    allclose,
    as_matrix,
    branch_cut_distance,
    commutator,
    eig_residual,
    eigenvalue_clusters,
    eigvals,
    expm,
    logm_principal,
    match_spectra,
    spectral_projector,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def square(n):
    return arrays(np.float64, (n, n), elements=finite)


def test_as_matrix_rejects_bad_shapes():
    with pytest.raises(InvalidInputError):
        as_matrix(np.zeros((2, 3)))
    with pytest.raises(InvalidInputError):
        as_matrix(np.zeros((0, 0)))
    with pytest.raises(InvalidInputError):
        as_matrix([[np.nan]])


def test_expm_of_zero_is_identity():
    assert allclose(expm(np.zeros((3, 3))), np.eye(3), 0)


def test_expm_diagonal():
    d = np.diag([1.0, -2.0, 0.5j])
    assert allclose(expm(d, 0.3), np.diag(np.exp(0.3 * np.diag(d))), 1e-14)


@given(square(4))
@settings(max_examples=30, deadline=None)
def test_expm_group_property(a):
    assert np.allclose(expm(a, 0.2) @ expm(a, 0.3), expm(a, 0.5), atol=1e-9 * (1 + np.abs(expm(a, 0.5)).max()))


@given(square(5))
@settings(max_examples=30, deadline=None)
def test_eigvals_backward_stable(a):
    sigma = eigvals(a)
    assert len(sigma) == 5
    assert eig_residual(a, sigma) < 1e-10


def test_spectrum_canonical_order():
    s = Spectrum.from_values([2, 1 + 1j, 1 - 1j])
    assert s.eigenvalues == (1 - 1j, 1 + 1j, 2)


def test_match_spectra_respects_multiplicity():
    assert match_spectra([1, 1, 2], [1, 2, 2]) == pytest.approx(1.0)
    assert match_spectra([1, 2], [2, 1]) == 0.0
    with pytest.raises(InvalidInputError):
        match_spectra([1], [1, 2])


def test_commutator_antisymmetric(rng):
    a, b = rng.standard_normal((2, 4, 4))
    assert allclose(commutator(a, b), -commutator(b, a), 0)


def test_logm_inverts_expm(rng):
    a = rng.standard_normal((4, 4)) * 0.3
    assert allclose(expm(logm_principal(expm(a))), expm(a), 1e-12)


def test_logm_branch_cut_raises():
    with pytest.raises(BranchCutError) as exc:
        logm_principal(np.diag([1.0, -1.0]))
    assert exc.value.eigenvalue == pytest.approx(-1.0)


def test_branch_cut_distance():
    assert branch_cut_distance(-2 + 0.5j) == pytest.approx(0.5)
    assert branch_cut_distance(3 + 4j) == pytest.approx(5.0)


def test_projector_on_known_eigenspace(rng):
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
    lam = np.array([1.0, 1.0, 2.0, 3.0, 3.0])
    a = q @ np.diag(lam) @ q.conj().T
    p = spectral_projector(a, 1.0, 1e-3)
    expected = q[:, :2] @ q[:, :2].conj().T
    assert allclose(p, expected, 1e-10)
    assert allclose(p @ p, p, 1e-10)


def test_projector_dead_zone():
    with pytest.raises(ClusteringError):
        spectral_projector(np.diag([1.0, 1.005]), 1.0, 1e-3)


def test_projector_empty_cluster_is_zero():
    assert allclose(spectral_projector(np.diag([1.0, 2.0]), 5.0, 1e-3), np.zeros((2, 2)), 0)


def test_clusters():
    cl = eigenvalue_clusters(np.diag([1.0, 1.0 + 1e-9, 2.0]), 1e-6)
    assert [m for _, m in cl] == [2, 1]
