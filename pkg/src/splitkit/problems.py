"""Seeded test systems, each split into two parts ``H = A + B``.

Random numbers come from numpy's PCG64 bit generator.  The stream for a
problem is ``SeedSequence([seed, kind_code, attempt])`` where ``attempt``
counts rejections (spectral gap too small), so a given seed always yields the
same matrices on any platform with IEEE doubles.

Splits:

* real symmetric: ``B`` is a general real matrix with entries in (0, 1).
* Hermitian, simple spectrum: ``B`` is the Hermitian part of a complex
  matrix with real and imaginary parts in (0, 1); ``split="general"`` keeps
  the general complex matrix instead.
* Hermitian, multiple spectrum: ``B`` is a random Hermitian matrix.
* Hamiltonian: ``B`` is a random real symmetric matrix scaled by
  ``split_scale * max(omega)``.

In every case ``A = H - B`` and ``H`` is then re-formed as ``A + B`` so the
split is exact to the last bit.  Uniform draws are rounded to a ``2**-40``
grid, which makes ``H - B`` exact for the two "simple" kinds.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from splitkit.errors import GenerationError, InvalidInputError
from splitkit.linalg import as_matrix, eigvals, expm
from splitkit.schemes import GeneratorSet

GAP_THRESHOLD = 1e-6
MAX_ATTEMPTS = 100
_GRID = 2.0**40

DEFAULT_OMEGA_RANGE = (0.2077, 0.8443)
DEFAULT_SPLIT_SCALE = 0.25


class ProblemKind(str, enum.Enum):
    REAL_SYMMETRIC = "real-symmetric"
    HERMITIAN_SIMPLE = "hermitian-simple"
    HERMITIAN_MULTIPLE = "hermitian-multiple"
    HAMILTONIAN = "hamiltonian"

    @property
    def is_unitary(self) -> bool:
        return self is not ProblemKind.HAMILTONIAN


_KIND_CODE = {
    ProblemKind.REAL_SYMMETRIC: 1,
    ProblemKind.HERMITIAN_SIMPLE: 2,
    ProblemKind.HERMITIAN_MULTIPLE: 3,
    ProblemKind.HAMILTONIAN: 4,
}


def symplectic_form(n_dof: int) -> np.ndarray:
    """Canonical ``J = [[0, I], [-I, 0]]`` of size ``2 n_dof``."""
    if n_dof < 1:
        raise InvalidInputError("need at least one degree of freedom")
    eye = np.eye(n_dof)
    zero = np.zeros((n_dof, n_dof))
    return np.block([[zero, eye], [-eye, zero]])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SplitProblem:
    """A linear test system ``u' = G u`` with ``G = G_A + G_B``.

    ``H`` is the Hermitian/symmetric matrix of the system and ``parts`` its
    two summands.  Generators are ``iA, iB`` for unitary kinds and
    ``JA, JB`` for Hamiltonian ones.
    """

    kind: ProblemKind
    seed: int
    H: np.ndarray
    parts: tuple[np.ndarray, np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def generator_matrix(self) -> np.ndarray:
        """The full generator ``iH`` or ``JH``."""
        if self.kind.is_unitary:
            return 1j * self.H
        return symplectic_form(self.dim // 2) @ self.H

    @property
    def generators(self) -> GeneratorSet:
        if self.kind.is_unitary:
            return GeneratorSet([1j * p for p in self.parts])
        j = symplectic_form(self.dim // 2)
        return GeneratorSet([j @ p for p in self.parts])

    def describe(self) -> str:
        return f"{self.kind.value}/n={self.dim}/seed={self.seed}"

    def random_state(self, salt: int = 0) -> np.ndarray:
        """Deterministic random initial vector of unit norm.

        Real for Hamiltonian problems, complex otherwise.
        """
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, _KIND_CODE[self.kind], 1000 + salt]))
        )
        if self.kind.is_unitary:
            u = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        else:
            u = rng.standard_normal(self.dim).astype(np.complex128)
        return u / np.linalg.norm(u)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        meta = {}
        for k, v in self.metadata.items():
            if isinstance(v, np.ndarray):
                meta[k] = {"array": _encode(v)}
            else:
                meta[k] = v
        return {
            "kind": self.kind.value,
            "seed": self.seed,
            "dim": self.dim,
            "H": _encode(self.H),
            "A": _encode(self.parts[0]),
            "B": _encode(self.parts[1]),
            "metadata": meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SplitProblem":
        meta = {}
        for k, v in d.get("metadata", {}).items():
            if isinstance(v, dict) and "array" in v:
                meta[k] = _frozen(_decode(v["array"]))
            else:
                meta[k] = v
        H = _decode(d["H"])
        if H.shape[0] != d["dim"]:
            raise InvalidInputError("serialized dimension does not match H")
        return cls(
            kind=ProblemKind(d["kind"]),
            seed=int(d["seed"]),
            H=_frozen(H),
            parts=(_frozen(_decode(d["A"])), _frozen(_decode(d["B"]))),
            metadata=meta,
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitProblem":
        return cls.from_dict(json.loads(text))


def _encode(a: np.ndarray):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def _decode(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _rng(kind: ProblemKind, seed: int, attempt: int) -> np.random.Generator:
    if seed < 0:
        raise InvalidInputError("seed must be non-negative")
    ss = np.random.SeedSequence([seed, _KIND_CODE[kind], attempt])
    return np.random.Generator(np.random.PCG64(ss))


def _uniform_grid(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform (0, 1) draws rounded to multiples of ``2**-40``."""
    u = np.floor(rng.random(shape) * _GRID) + 0.5
    return u / _GRID


def min_gap(values: Sequence[complex]) -> float:
    v = np.sort(np.real(np.asarray(values)))
    if v.size < 2:
        return np.inf
    return float(np.min(np.diff(v)))


def _build(kind, seed, H, A, B, metadata) -> SplitProblem:
    H = A + B
    return SplitProblem(kind, seed, _frozen(H), (_frozen(A), _frozen(B)), metadata)


def gen_real_symmetric(n: int, seed: int) -> SplitProblem:
    """Real symmetric ``H`` with entries in (0, 1) and a general real split."""
    if n < 2:
        raise InvalidInputError("n must be at least 2")
    kind = ProblemKind.REAL_SYMMETRIC
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng(kind, seed, attempt)
        x = _uniform_grid(rng, (n, n))
        H = (x + x.T) / 2
        gap = min_gap(np.linalg.eigvalsh(H))
        if gap <= GAP_THRESHOLD:
            continue
        B = _uniform_grid(rng, (n, n))
        A = H - B
        meta = {"attempts": attempt + 1, "min_gap": gap, "split": "B general real U(0,1)"}
        return _build(kind, seed, H, A.astype(np.complex128), B.astype(np.complex128), meta)
    raise GenerationError(f"no simple spectrum after {MAX_ATTEMPTS} attempts (seed {seed})")


def _haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def _hermitian_part(x: np.ndarray) -> np.ndarray:
    # entry (j, i) is computed as the conjugate of entry (i, j) bit for bit
    return (x + x.conj().T) / 2


SPLITS = ("hermitian", "general")


def gen_hermitian(
    n: int,
    seed: int,
    multiplicities: Sequence[int] | None = None,
    split: str = "hermitian",
) -> SplitProblem:
    """Random Hermitian problem.

    Without ``multiplicities`` the spectrum is simple.  With them,
    ``H = U diag(lambda) U*`` has the requested repeated eigenvalues.

    ``split="hermitian"`` makes both parts Hermitian, so ``iA`` and ``iB`` are
    skew-Hermitian.  ``split="general"`` (simple spectrum only) uses general
    complex parts, for which alternating-conjugate schemes lose their
    unitarity guarantee.
    """
    if n < 2:
        raise InvalidInputError("n must be at least 2")
    if split not in SPLITS:
        raise InvalidInputError(f"split must be one of {SPLITS}, got {split!r}")
    if multiplicities is None:
        return _hermitian_simple(n, seed, split)
    if split != "hermitian":
        raise InvalidInputError("multiple-eigenvalue problems use a Hermitian split")
    mult = [int(m) for m in multiplicities]
    if any(m < 1 for m in mult) or sum(mult) != n:
        raise InvalidInputError(
            f"multiplicities {list(multiplicities)} must be positive and sum to n={n}"
        )
    return _hermitian_multiple(n, seed, mult)


def _hermitian_simple(n: int, seed: int, split: str) -> SplitProblem:
    kind = ProblemKind.HERMITIAN_SIMPLE
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng(kind, seed, attempt)
        x = _uniform_grid(rng, (n, n)) + 1j * _uniform_grid(rng, (n, n))
        H = _hermitian_part(x)
        gap = min_gap(np.linalg.eigvalsh(H))
        if gap <= GAP_THRESHOLD:
            continue
        B = _uniform_grid(rng, (n, n)) + 1j * _uniform_grid(rng, (n, n))
        if split == "hermitian":
            B = _hermitian_part(B)
        A = H - B
        meta = {"attempts": attempt + 1, "min_gap": gap,
                "split": f"B {split} from complex U(0,1)"}
        return _build(kind, seed, H, A, B, meta)
    raise GenerationError(f"no simple spectrum after {MAX_ATTEMPTS} attempts (seed {seed})")


def _hermitian_multiple(n: int, seed: int, mult: list[int]) -> SplitProblem:
    kind = ProblemKind.HERMITIAN_MULTIPLE
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng(kind, seed, attempt)
        distinct = rng.uniform(-1.0, 1.0, len(mult))
        if len(mult) > 1 and min_gap(distinct) <= 0.05:
            continue
        lam = np.repeat(distinct, mult)
        U = _haar_unitary(rng, n)
        H = _hermitian_part((U * lam) @ U.conj().T)
        y = rng.uniform(-0.5, 0.5, (n, n)) + 1j * rng.uniform(-0.5, 0.5, (n, n))
        B = _hermitian_part(y)
        A = H - B
        meta = {
            "attempts": attempt + 1,
            "multiplicities": mult,
            "eigenvalues": [float(v) for v in distinct],
            "split": "B Hermitian U(-1/2,1/2)",
        }
        return _build(kind, seed, H, A, B, meta)
    raise GenerationError(f"could not separate eigenvalues after {MAX_ATTEMPTS} attempts")


def _random_symplectic(rng: np.random.Generator, N: int) -> np.ndarray:
    """Product of ``2 N**2`` elementary symplectic maps.

    Factors are rotations in a ``(q_j, p_j)`` plane, simultaneous Givens
    rotations of ``q`` and ``p``, and unit-bounded upper or lower shears
    ``[[I, S], [0, I]]`` with ``S`` symmetric and a single nonzero pair.
    """
    dim = 2 * N
    P = np.eye(dim)
    for _ in range(2 * N * N):
        kind = rng.integers(0, 4)
        F = np.eye(dim)
        if kind == 0:
            j = rng.integers(0, N)
            t = rng.uniform(0, 2 * np.pi)
            c, s = np.cos(t), np.sin(t)
            F[j, j], F[j, N + j], F[N + j, j], F[N + j, N + j] = c, s, -s, c
        elif kind == 1 and N > 1:
            j, k = rng.choice(N, size=2, replace=False)
            t = rng.uniform(0, 2 * np.pi)
            c, s = np.cos(t), np.sin(t)
            for off in (0, N):
                F[off + j, off + j], F[off + j, off + k] = c, s
                F[off + k, off + j], F[off + k, off + k] = -s, c
        else:
            j, k = rng.integers(0, N, size=2)
            v = rng.uniform(-1.0, 1.0)
            S = np.zeros((N, N))
            S[j, k] += v
            if j != k:
                S[k, j] += v
            if kind == 3:
                F[:N, N:] = S
            else:
                F[N:, :N] = S
        P = F @ P
    return P


def gen_hamiltonian(
    N: int,
    seed: int,
    omega_range: tuple[float, float] = DEFAULT_OMEGA_RANGE,
    split_scale: float = DEFAULT_SPLIT_SCALE,
) -> SplitProblem:
    """Completely integrable linear Hamiltonian system ``y' = J H y``.

    ``H = P^T D P`` with ``D = diag(omega, omega)`` and ``P`` symplectic.
    ``B`` is a random symmetric matrix with entries of size
    ``split_scale * max(omega)``, ``A = H - B``.
    """
    if N < 1:
        raise InvalidInputError("N must be at least 1")
    lo, hi = float(omega_range[0]), float(omega_range[1])
    if not (0 < lo < hi):
        raise InvalidInputError("omega_range must satisfy 0 < lo < hi")
    if split_scale < 0:
        raise InvalidInputError("split_scale must be non-negative")
    kind = ProblemKind.HAMILTONIAN
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng(kind, seed, attempt)
        omega = np.sort(rng.uniform(lo, hi, N))
        # omega > 0 already separates omega_j from -omega_k
        if N > 1 and min_gap(omega) <= GAP_THRESHOLD:
            continue
        P = _random_symplectic(rng, N)
        D = np.diag(np.concatenate([omega, omega]))
        H = _hermitian_part(P.T @ D @ P).real
        y = rng.uniform(-1.0, 1.0, (2 * N, 2 * N))
        B = split_scale * hi * _hermitian_part(y).real
        A = H - B
        meta = {
            "attempts": attempt + 1,
            "omega": _frozen(omega.astype(np.complex128)),
            "P": _frozen(P.astype(np.complex128)),
            "cond_P": float(np.linalg.cond(P)),
            "split": f"B symmetric, scale {split_scale:g}*max(omega)",
        }
        return _build(kind, seed, H, A.astype(np.complex128), B.astype(np.complex128), meta)
    raise GenerationError(f"could not draw distinct frequencies after {MAX_ATTEMPTS} attempts")


def exact_flow(p: SplitProblem, t: float) -> np.ndarray:
    """Reference propagator ``exp(t G)`` of the unsplit system."""
    return expm(p.generator_matrix, t)


def problem_spectrum(p: SplitProblem):
    return eigvals(as_matrix(p.H))


def make_problem(kind: ProblemKind | str, n: int, seed: int, **options) -> SplitProblem:
    """Dispatch by kind; ``n`` is the matrix size (``2N`` for Hamiltonian)."""
    kind = ProblemKind(kind)
    if kind is ProblemKind.REAL_SYMMETRIC:
        return gen_real_symmetric(n, seed, **options)
    if kind is ProblemKind.HERMITIAN_SIMPLE:
        return gen_hermitian(n, seed, **options)
    if kind is ProblemKind.HERMITIAN_MULTIPLE:
        if "multiplicities" not in options:
            raise InvalidInputError("hermitian-multiple needs multiplicities")
        return gen_hermitian(n, seed, **options)
    if n % 2:
        raise InvalidInputError("Hamiltonian problems have even dimension 2N")
    return gen_hamiltonian(n // 2, seed, **options)
