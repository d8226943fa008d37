"""Dense complex linear algebra for small matrices.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Every public
function validates its input (square, finite, non-empty) and returns fresh
arrays, so results can be shared freely between threads.

The heavy lifting is delegated to LAPACK through numpy/scipy:

* :func:`expm` uses scaling and squaring with Pade approximants
  (``scipy.linalg.expm``).
* :func:`eigvals` uses Hessenberg reduction followed by shifted QR
  (LAPACK ``zgeev``).
* :func:`logm_principal` uses the inverse scaling and squaring algorithm on
  the Schur form (``scipy.linalg.logm``) after an explicit branch-cut check.
* :func:`spectral_projector` evaluates the Riesz contour integral with the
  trapezoidal rule, which converges geometrically and needs no eigenvectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from splitkit.errors import (
    BranchCutError,
    ClusteringError,
    InvalidInputError,
    NumericFailureError,
)

#: Iteration cap used by LAPACK's complex Hessenberg QR (``zhseqr``):
#: at most ``30 * max(10, n)`` sweeps per matrix.
QR_ITERATION_FACTOR = 30

#: Default distance below which an eigenvalue counts as lying on the cut.
BRANCH_CUT_TOL = 1e-10

#: Number of quadrature nodes on the Riesz contour.
CONTOUR_NODES = 64


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a validated square complex array (copy)."""
    m = np.array(a, dtype=np.complex128, copy=True)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise InvalidInputError(f"{name} has dimension zero")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return m


def allclose(a, b, tol: float = 1e-12) -> bool:
    """Tolerance-based matrix equality in the Frobenius norm."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    return bool(np.linalg.norm(a - b) <= tol)


def fro(a) -> float:
    return float(np.linalg.norm(a))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def expm(a, t: complex = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(t * a)``.

    Accurate to a few units of roundoff times the condition number of the
    problem for ``||t a|| <= 50``; larger arguments still work but lose
    accuracy in the squaring phase.
    """
    m = as_matrix(a, "A")
    out = scipy.linalg.expm(complex(t) * m)
    if not np.all(np.isfinite(out)):
        raise NumericFailureError("matrix exponential overflowed")
    return out


def _canonical_order(values: np.ndarray) -> np.ndarray:
    return np.lexsort((values.imag, values.real))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with algebraic multiplicity, sorted by (real, imag)."""

    eigenvalues: tuple[complex, ...]

    @classmethod
    def from_values(cls, values) -> "Spectrum":
        v = np.asarray(values, dtype=np.complex128).ravel()
        return cls(tuple(complex(x) for x in v[_canonical_order(v)]))

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def __iter__(self):
        return iter(self.eigenvalues)

    def array(self) -> np.ndarray:
        return np.array(self.eigenvalues, dtype=np.complex128)

    def sorted(self) -> "Spectrum":
        return Spectrum.from_values(self.eigenvalues)

    def distance(self, other: "Spectrum | Sequence[complex]") -> float:
        """Largest pair distance under the optimal pairing, see :func:`match_spectra`."""
        return match_spectra(self.array(), np.asarray(list(other), dtype=np.complex128))


def eigvals(a) -> Spectrum:
    """Eigenvalues of a dense complex matrix.

    Raises:
        NumericFailureError: if the QR iteration exceeds LAPACK's cap of
            ``30 * max(10, n)`` sweeps; the cap is carried on the exception.
    """
    m = as_matrix(a, "A")
    try:
        values = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        cap = QR_ITERATION_FACTOR * max(10, m.shape[0])
        raise NumericFailureError(
            f"eigenvalue iteration failed to converge within {cap} sweeps", cap
        ) from exc
    return Spectrum.from_values(values)


def eig_residual(a, spectrum: Spectrum) -> float:
    """Consistency check ``max_j sigma_min(A - lambda_j I) / ||A||``.

    Small values certify that every reported eigenvalue is an eigenvalue of a
    nearby matrix (backward error).
    """
    m = as_matrix(a, "A")
    scale = max(np.linalg.norm(m, 2), np.finfo(float).tiny)
    eye = np.eye(m.shape[0])
    worst = 0.0
    for lam in spectrum:
        s = np.linalg.svd(m - lam * eye, compute_uv=False)[-1]
        worst = max(worst, s / scale)
    return float(worst)


def match_spectra(a, b) -> float:
    """Bottleneck distance between two equally sized eigenvalue multisets.

    Pairs the values by an optimal assignment on ``|a_i - b_j|`` and returns
    the largest paired distance, so multiplicities are respected.
    """
    a = np.asarray(a, dtype=np.complex128).ravel()
    b = np.asarray(b, dtype=np.complex128).ravel()
    if a.size != b.size:
        raise InvalidInputError(f"cannot pair {a.size} values with {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def branch_cut_distance(z: complex) -> float:
    """Distance from ``z`` to the closed negative real axis."""
    if z.real <= 0:
        return abs(z.imag)
    return abs(z)


def logm_principal(s, tol: float = BRANCH_CUT_TOL) -> np.ndarray:
    """Principal matrix logarithm.

    Raises:
        BranchCutError: some eigenvalue is within ``tol`` of ``(-inf, 0]``.
    """
    m = as_matrix(s, "S")
    for lam in eigvals(m):
        if branch_cut_distance(lam) <= tol:
            raise BranchCutError(
                f"eigenvalue {lam:.6g} lies on the branch cut of the principal log",
                lam,
            )
    out, _ = scipy.linalg.logm(m, disp=False)
    out = np.asarray(out, dtype=np.complex128)
    if not np.all(np.isfinite(out)):
        raise NumericFailureError("matrix logarithm produced non-finite entries")
    return out


def spectral_projector(a, cluster_center: complex, cluster_tol: float) -> np.ndarray:
    """Riesz projector onto the eigenvalues within ``cluster_tol`` of a center.

    The contour is the circle of radius ``sqrt(10) * cluster_tol``, halfway
    (geometrically) between the cluster and the excluded eigenvalues, so the
    trapezoidal rule converges like ``10**(-nodes/2)``.

    Raises:
        ClusteringError: an eigenvalue lies between ``cluster_tol`` and
            ``10 * cluster_tol`` from the center.
    """
    m = as_matrix(a, "A")
    if cluster_tol <= 0:
        raise InvalidInputError("cluster_tol must be positive")
    c = complex(cluster_center)
    dist = np.abs(eigvals(m).array() - c)
    dead = (dist > cluster_tol) & (dist <= 10 * cluster_tol)
    if np.any(dead):
        raise ClusteringError(
            f"eigenvalue at distance {dist[dead].min():.3g} from {c} is ambiguous "
            f"for cluster_tol={cluster_tol:g}"
        )
    n = m.shape[0]
    if not np.any(dist <= cluster_tol):
        return np.zeros((n, n), dtype=np.complex128)
    radius = np.sqrt(10.0) * cluster_tol
    eye = np.eye(n, dtype=np.complex128)
    proj = np.zeros((n, n), dtype=np.complex128)
    for theta in 2 * np.pi * np.arange(CONTOUR_NODES) / CONTOUR_NODES:
        w = radius * np.exp(1j * theta)
        # dz/(2 pi i) = w dtheta/(2 pi); the 1/nodes weight is applied below
        proj += w * np.linalg.solve((c + w) * eye - m, eye)
    return proj / CONTOUR_NODES


def eigenvalue_clusters(a, tol: float) -> list[tuple[complex, int]]:
    """Group eigenvalues that lie within ``tol`` of each other.

    Returns ``(center, multiplicity)`` pairs in canonical order; the center is
    the mean of the cluster members.
    """
    values = eigvals(a).array()
    remaining = list(values)
    clusters: list[tuple[complex, int]] = []
    while remaining:
        seed = remaining.pop(0)
        members = [seed]
        grew = True
        while grew:
            grew = False
            for z in list(remaining):
                if min(abs(z - w) for w in members) <= tol:
                    members.append(z)
                    remaining.remove(z)
                    grew = True
        clusters.append((complex(np.mean(members)), len(members)))
    clusters.sort(key=lambda cm: (cm[0].real, cm[0].imag))
    return clusters
