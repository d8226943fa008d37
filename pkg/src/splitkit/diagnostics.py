"""Measurements on one-step propagators and trajectories.

Every function is pure.  Long runs return plain numpy arrays wrapped in small
result objects; :class:`DiagnosticRecord` rows carry the provenance needed to
replay a measurement (scheme, problem kind, size, seed, step size, step).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from splitkit.errors import (
    BranchCutError,
    FitError,
    InvalidInputError,
    UnsupportedError,
)
from splitkit.linalg import (
    as_matrix,
    commutator,
    eigenvalue_clusters,
    eigvals,
    logm_principal,
    match_spectra,
    spectral_projector,
)
from splitkit.problems import ProblemKind, SplitProblem, exact_flow, symplectic_form
from splitkit.schemes import (
    ALTERNATING_CONJUGATE,
    BasicMethod,
    Composition,
    GeneratorSet,
    catalog,
    propagator,
)

UNITARY_TOL = 1e-12
ORDER_FLOOR = 1e-14
FIT_RELIABLE = 1e-6
HSTAR_BRACKET = (1e-3, 5.0)
HSTAR_RTOL = 1e-3
BLOWUP_NORM = 1e100


@dataclass(frozen=True)
class DiagnosticRecord:
    scheme: str
    problem_kind: str
    n: int
    seed: int
    h: float
    step: int
    observable: str
    value: float

    def row(self) -> list[str]:
        return [self.scheme, self.problem_kind, str(self.n), str(self.seed),
                repr(float(self.h)), str(self.step), self.observable, repr(float(self.value))]

    def sort_key(self):
        return (self.scheme, self.problem_kind, self.n, self.seed, self.h,
                self.observable, self.step)


# -- spectra of one-step maps ----------------------------------------------


@dataclass(frozen=True)
class UnitarityDefect:
    signed: float
    absolute: float
    operator: float


def unitarity_defect(S) -> float:
    """Signed ``D_h = max_j (|omega_j| - 1)`` over the eigenvalues of ``S``."""
    mods = np.abs(eigvals(S).array())
    return float(np.max(mods) - 1.0)


def unitarity_defects(S) -> UnitarityDefect:
    """Signed and absolute spectral defects plus ``||S* S - I||_2``.

    The operator defect can be large even when the spectrum is on the unit
    circle, since a map conjugate to a unitary one need not be unitary.
    """
    m = as_matrix(S, "S")
    mods = np.abs(eigvals(m).array())
    op = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]), 2)
    return UnitarityDefect(float(mods.max() - 1), float(np.max(np.abs(mods - 1))), float(op))


class SpectrumLaw(str, enum.Enum):
    CONJ_CLOSED = "conj-closed"
    CONJ_INV_CLOSED = "conj-inv-closed"


def spectrum_symmetry_defect(S, law: SpectrumLaw | str) -> float:
    """Distance between ``sigma(S)`` and its image under the law's map.

    ``conj-closed`` compares with the conjugated spectrum, ``conj-inv-closed``
    with the conjugated reciprocals.
    """
    law = SpectrumLaw(law)
    values = eigvals(S).array()
    if law is SpectrumLaw.CONJ_CLOSED:
        image = values.conj()
    else:
        if np.min(np.abs(values)) <= 1e-14 * max(1.0, np.max(np.abs(values))):
            raise InvalidInputError("S is singular; conj-inv law undefined")
        image = 1.0 / values.conj()
    return match_spectra(values, image)


def symplecticity_defect(S) -> float:
    """``||S^T J S - J||_F`` for a map on ``R^{2N}`` (complex entries allowed)."""
    m = as_matrix(S, "S")
    if m.shape[0] % 2:
        raise InvalidInputError("symplectic maps act on even dimensions")
    J = symplectic_form(m.shape[0] // 2)
    return float(np.linalg.norm(m.T @ J @ m - J))


# -- modified generator ----------------------------------------------------


class Convention(str, enum.Enum):
    UNITARY = "unitary"
    PLAIN = "plain"


def modified_generator(S, h: float, factor: Convention | str = Convention.UNITARY) -> np.ndarray:
    """``(ih)^{-1} log S`` (unitary convention) or ``h^{-1} log S``.

    Raises:
        BranchCutError: the step is too large for the principal logarithm.
    """
    if h == 0:
        raise InvalidInputError("h must be nonzero")
    L = logm_principal(S)
    if Convention(factor) is Convention.UNITARY:
        return L / (1j * h)
    return L / h


def realness_defect(G) -> float:
    """Largest imaginary part among the eigenvalues of ``G``."""
    return float(np.max(np.abs(eigvals(G).array().imag)))


def _loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


@dataclass(frozen=True)
class RateFit:
    rate: float
    h: tuple[float, ...]
    values: tuple[float, ...]


def eigenvalue_convergence(c: Composition, p: SplitProblem, h_grid: Sequence[float],
                           floor: float | None = None, dps: int | None = None) -> RateFit:
    """Slope of ``dist(sigma(H_h), sigma(H))`` against ``h``.

    Uses the unitary convention, so only unitary problem kinds apply.  With
    ``dps`` the logarithm and both spectra are computed in that precision,
    which keeps high-order schemes above the floor.
    """
    if not p.kind.is_unitary:
        raise InvalidInputError("eigenvalue convergence needs a unitary problem kind")
    if floor is None:
        floor = 1e-13 if dps is None else 10.0 ** (-(dps - 4))
    if dps is None:
        ref = eigvals(p.H).array()
        g = p.generators
        dists = [match_spectra(eigvals(modified_generator(propagator(c, g, h), h)).array(), ref)
                 for h in h_grid]
    else:
        dists = _precise_spectral_distances(c, p, h_grid, dps)
    pts = [(float(h), d) for h, d in zip(h_grid, dists) if d > floor]
    if len(pts) < 3:
        raise FitError(f"only {len(pts)} usable points above floor {floor:g}")
    hs, vals = zip(*pts)
    return RateFit(_loglog_slope(hs, vals), tuple(hs), tuple(vals))


def _precise_spectral_distances(c, p, h_grid, dps):
    from scipy.optimize import linear_sum_assignment

    from splitkit.precise import precise_generators, precise_logs, to_object

    pg = precise_generators(p.generators, dps)
    ctx = pg.ctx
    ref, _ = ctx.eig(ctx.matrix(to_object(p.H, ctx).tolist()))
    out = []
    for h, L in zip(h_grid, precise_logs(c, pg, h_grid)):
        vals, _ = ctx.eig(ctx.matrix((L / ctx.mpc(0, 1)).tolist()))
        cost = np.array([[abs(complex(a - b)) for b in ref] for a in vals])
        rows, cols = linear_sum_assignment(cost)
        out.append(float(max(abs(vals[i] - ref[j]) for i, j in zip(rows, cols))))
    return out


def precise_unitarity_defect(c: Composition, p: SplitProblem, h: float, dps: int = 40) -> float:
    """Signed ``D_h`` with the map and its spectrum formed in ``dps`` digits.

    Resolves defects far below double roundoff, e.g. a power law
    ``C h**s`` at the small end of a scan.
    """
    from splitkit.precise import precise_generators, precise_propagator

    pg = precise_generators(p.generators, dps)
    ctx = pg.ctx
    vals = ctx.eig(ctx.matrix(precise_propagator(c, pg, h).tolist()), left=False, right=False)
    return float(max(abs(v) for v in vals) - 1)


# -- D_h scans and h* ------------------------------------------------------


def dh_scan(c: Composition, p: SplitProblem, h_values: Iterable[float]) -> list[tuple[float, float]]:
    g = p.generators
    return [(float(h), unitarity_defect(propagator(c, g, h))) for h in h_values]


class OnsetKind(str, enum.Enum):
    NONE = "none"              # unitary over the whole bracket
    COLLISION = "collision"    # defect jumps from roundoff: h* found
    POWER_LAW = "power-law"    # defect grows smoothly like C h^s: no h*


@dataclass(frozen=True)
class HStarResult:
    """Outcome of the unitarity-threshold search.

    ``h_star`` is ``None`` when the defect follows a power law in ``h``, in
    which case ``D_h ~ coefficient * h**exponent > 0`` for every ``h > 0``
    and ``extrapolated_min`` gives that estimate at the smallest tested step.
    """

    h_star: float | None
    onset: OnsetKind
    exponent: float | None = None
    coefficient: float | None = None
    extrapolated_min: float | None = None
    scan: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    @property
    def positive(self) -> bool:
        return self.h_star is not None and self.h_star > 0


def _power_law(points: list[tuple[float, float]], noise: float, cap: float):
    """Fit ``log D`` vs ``log h`` on the smooth pre-onset stretch, if any."""
    above = [(h, d) for h, d in points if noise < d < cap]
    if len(above) < 3:
        return None
    # the stretch must be contiguous from its first point: a smooth rise
    first = points.index(above[0])
    run = []
    for h, d in points[first:]:
        if not (noise < d < cap):
            break
        run.append((h, d))
    # a collision lands far above the floor; a power law climbs out of it
    if len(run) < 3 or run[0][1] > 1e3 * noise:
        return None
    lx = np.log([h for h, _ in run])
    ly = np.log([d for _, d in run])
    s, b = np.polyfit(lx, ly, 1)
    resid = ly - (s * lx + b)
    if s <= 0 or np.max(np.abs(resid)) > 1.0:
        return None
    return float(s), float(math.exp(b))


def find_hstar(
    c: Composition,
    p: SplitProblem,
    tol: float = UNITARY_TOL,
    bracket: tuple[float, float] = HSTAR_BRACKET,
    n_grid: int = 40,
    rtol: float = HSTAR_RTOL,
    noise: float = 1e-13,
) -> HStarResult:
    """Largest step below which ``|D_h| <= tol``.

    A geometric grid over ``bracket`` locates the first step where the
    defect exceeds ``tol``.  If the defect below that point already rises
    smoothly out of the roundoff floor (``noise``) along a power law, the
    spectrum is off the unit circle for every ``h`` and no threshold exists.
    Otherwise the onset is an eigenvalue collision and the transition is
    refined by bisection to relative width ``rtol``.
    """
    lo, hi = bracket
    grid = np.geomspace(lo, hi, n_grid)
    g = p.generators

    def D(h):
        try:
            return abs(unitarity_defect(propagator(c, g, h)))
        except ArithmeticError:
            return math.inf

    scan = [(float(h), D(h)) for h in grid]
    bad = [k for k, (_, d) in enumerate(scan) if d > tol]
    fit = _power_law(scan, noise, 1e-3)
    if fit is not None:
        s, C = fit
        return HStarResult(None, OnsetKind.POWER_LAW, s, C, C * lo**s, tuple(scan))
    if not bad:
        return HStarResult(float(hi), OnsetKind.NONE, scan=tuple(scan))
    k = bad[0]
    if k == 0:
        return HStarResult(None, OnsetKind.COLLISION, scan=tuple(scan))
    a, b = scan[k - 1][0], scan[k][0]
    while (b - a) > rtol * a:
        mid = math.sqrt(a * b)
        if D(mid) > tol:
            b = mid
        else:
            a = mid
    return HStarResult(float(a), OnsetKind.COLLISION, scan=tuple(scan))


# -- long-time runs --------------------------------------------------------

OBSERVABLES = (
    "mass",
    "energy",
    "hamiltonian_energy",
    "actions",
    "imaginary_part_norm",
    "state_norm",
)

_UNITARY_ONLY = {"energy"}
_HAMILTONIAN_ONLY = {"hamiltonian_energy", "actions", "imaginary_part_norm"}


@dataclass(frozen=True)
class LongtimeResult:
    """Per-step observable series; index 0 is the initial state.

    ``actions`` has shape ``(n_steps + 1, N)``; other series are 1-D.  After a
    blow-up (non-finite state or norm above ``1e100``) values are ``inf``.
    """

    series: dict
    h: float
    n_steps: int
    blew_up_at: int | None = None

    def deviation(self, name: str) -> np.ndarray:
        """``|x_n - x_0|``, the max over components for vector observables."""
        x = self.series[name]
        d = np.abs(x - x[0])
        return d.max(axis=1) if d.ndim == 2 else d


def check_observables(p: SplitProblem, observables: Iterable[str]) -> list[str]:
    obs = list(observables)
    for name in obs:
        if name not in OBSERVABLES:
            raise InvalidInputError(f"unknown observable {name!r}; valid: {', '.join(OBSERVABLES)}")
        if name in _UNITARY_ONLY and not p.kind.is_unitary:
            raise InvalidInputError(f"observable {name!r} needs a unitary problem kind")
        if name in _HAMILTONIAN_ONLY and p.kind.is_unitary:
            raise InvalidInputError(f"observable {name!r} needs a Hamiltonian problem")
    return obs


def _observe(name: str, u: np.ndarray, p: SplitProblem):
    if name == "mass":
        return float(np.vdot(u, u).real)
    if name == "state_norm":
        return float(np.linalg.norm(u))
    if name == "energy":
        return float(np.vdot(u, p.H @ u).real)
    if name == "hamiltonian_energy":
        return float(0.5 * (u @ p.H @ u).real)
    if name == "imaginary_part_norm":
        return float(np.linalg.norm(u.imag))
    # actions: 1/2 (q_j^2 + p_j^2) in normal-form coordinates
    z = p.metadata["P"] @ u
    N = p.dim // 2
    return (0.5 * (z[:N] ** 2 + z[N:] ** 2)).real


def _step_matrix(c, p: SplitProblem, h: float) -> np.ndarray:
    if isinstance(c, Composition):
        return propagator(c, p.generators, h)
    if isinstance(c, str) and c == "exact":
        return exact_flow(p, h)
    return as_matrix(c, "S")


def longtime_run(
    c,
    p: SplitProblem,
    h: float,
    n_steps: int,
    u0=None,
    observables: Iterable[str] = ("mass",),
) -> LongtimeResult:
    """Iterate ``u <- S_h u`` and record observables at every step.

    ``c`` may be a composition, a precomputed one-step matrix, or the string
    ``"exact"`` for the exact flow.
    """
    if n_steps < 0:
        raise InvalidInputError("n_steps must be non-negative")
    obs = check_observables(p, observables)
    S = _step_matrix(c, p, h)
    u = p.random_state() if u0 is None else np.asarray(u0, dtype=np.complex128).copy()
    if u.shape != (p.dim,):
        raise InvalidInputError(f"u0 has shape {u.shape}, expected ({p.dim},)")
    N = p.dim // 2
    series = {}
    for name in obs:
        shape = (n_steps + 1, N) if name == "actions" else (n_steps + 1,)
        series[name] = np.full(shape, np.inf)
    blew = None
    for k in range(n_steps + 1):
        if k:
            u = S @ u
            nrm = np.linalg.norm(u)
            if not np.isfinite(nrm) or nrm > BLOWUP_NORM:
                blew = k
                break
        for name in obs:
            series[name][k] = _observe(name, u, p)
    return LongtimeResult(series, float(h), int(n_steps), blew)


def decade_ratio(x: Sequence[float]) -> float:
    """Mean of the last tenth of a series over the mean of its first tenth.

    The first sample is skipped (deviations vanish there by construction).
    """
    x = np.asarray(x, dtype=float)[1:]
    if x.size < 10:
        raise InvalidInputError("need at least 10 samples for a decade ratio")
    m = x.size // 10
    first, last = np.mean(x[:m]), np.mean(x[-m:])
    if not np.isfinite(last):
        return math.inf
    if first == 0:
        return 1.0 if last == 0 else math.inf
    return float(last / first)


def trend_slope(x: Sequence[float]) -> float:
    """Least-squares slope per step, normalised by the series mean."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        return math.inf
    t = np.arange(x.size)
    slope = np.polyfit(t, x, 1)[0]
    scale = np.mean(np.abs(x)) or 1.0
    return float(slope * x.size / scale)


def superaction_series(
    c,
    p: SplitProblem,
    h: float,
    n_steps: int,
    u0=None,
    cluster_tol: float = 1e-6,
) -> dict[float, np.ndarray]:
    """``|Pi_omega S^n u|`` for each distinct eigenvalue ``omega`` of ``H``."""
    if not p.kind.is_unitary:
        raise InvalidInputError("super-actions are defined for Hermitian problem kinds")
    S = _step_matrix(c, p, h)
    u = p.random_state() if u0 is None else np.asarray(u0, dtype=np.complex128).copy()
    projectors = [(center.real, spectral_projector(p.H, center, cluster_tol))
                  for center, _ in eigenvalue_clusters(p.H, cluster_tol)]
    out = {w: np.empty(n_steps + 1) for w, _ in projectors}
    for k in range(n_steps + 1):
        if k:
            u = S @ u
        for w, P in projectors:
            out[w][k] = np.linalg.norm(P @ u)
    return out


# -- orders ----------------------------------------------------------------


@dataclass(frozen=True)
class OrderFit:
    order: float
    h: tuple[float, ...]
    errors: tuple[float, ...]


def local_errors(c: Composition, p: SplitProblem, h_grid: Sequence[float],
                 dps: int | None = None) -> list[float]:
    """One-step Frobenius errors; ``dps`` switches to extended precision."""
    g = p.generators
    if dps is not None:
        from splitkit.precise import precise_local_errors
        return precise_local_errors(c, g.generators, p.generator_matrix, h_grid, dps)
    return [float(np.linalg.norm(propagator(c, g, h) - exact_flow(p, h))) for h in h_grid]


def precision_floor(dps: int | None) -> float:
    """Error floor matching the working precision."""
    return ORDER_FLOOR if dps is None else 10.0 ** (-(dps - 2))


def empirical_order_fit(c: Composition, p: SplitProblem, h_grid: Sequence[float],
                        floor: float | None = None, dps: int | None = None) -> OrderFit:
    if len(h_grid) < 4:
        raise InvalidInputError("need at least 4 step sizes")
    if floor is None:
        floor = precision_floor(dps)
    errs = local_errors(c, p, h_grid, dps)
    pts = [(h, e) for h, e in zip(h_grid, errs) if e > floor]
    if len(pts) < 3:
        raise FitError(f"{c.name}: only {len(pts)} errors above the floor {floor:g}")
    slope = _loglog_slope([h for h, _ in pts], [e for _, e in pts])
    return OrderFit(slope - 1.0, tuple(h for h, _ in pts), tuple(e for _, e in pts))


def empirical_order(c: Composition, p: SplitProblem, h_grid: Sequence[float],
                    floor: float | None = None, dps: int | None = None) -> float:
    """Local order from the slope of the one-step error against ``h``.

    Errors at or below ``floor`` are dropped.  With ``dps`` set the maps are
    formed in that many digits and the default floor drops accordingly.
    """
    return empirical_order_fit(c, p, h_grid, floor, dps).order


# -- modified vector field -------------------------------------------------


@dataclass(frozen=True)
class LieBasisFit:
    """Coefficients ``k[(grade, j)]`` of ``K(h) = log Psi_h`` in the basis
    ``M``, ``Y3``, ``[M, Y3]`` built from the Strang modified field.

    ``residual`` is the worst misfit per grade, in units of the basis
    element norm, so a coefficient whose true value is zero comes out with
    modulus of order ``residual``.
    """

    coefficients: dict
    residual: float
    grade_residuals: dict
    max_grade: int

    @property
    def reliable(self) -> bool:
        return self.residual <= FIT_RELIABLE

    def k(self, grade: int, j: int = 1) -> complex:
        return self.coefficients[(grade, j)]


def _poly_coefficients(hs: np.ndarray, mats: list[np.ndarray], powers: Sequence[int]):
    """Least-squares ``mats[i] ~ sum_d C_d hs[i]**d`` over the given powers."""
    scale = hs.max()
    x = hs / scale
    V = np.stack([x**d for d in powers], axis=1)
    Y = np.stack([m.ravel() for m in mats])
    coef, *_ = np.linalg.lstsq(V, Y, rcond=None)
    shape = mats[0].shape
    return {d: coef[i].reshape(shape) / scale**d for i, d in enumerate(powers)}


def default_fit_grid(g: GeneratorSet, points: int = 8) -> np.ndarray:
    nrm = np.linalg.norm(g.total(), 2)
    return np.geomspace(1e-3, 1e-1, points) / nrm


FIT_DPS = 40


def _fit_grid(g: GeneratorSet, h_grid) -> np.ndarray:
    return np.asarray(default_fit_grid(g) if h_grid is None else h_grid, dtype=float)


def strang_y3(g: GeneratorSet, h_grid: Sequence[float] | None = None,
              dps: int | None = FIT_DPS) -> np.ndarray:
    """``Y3`` of the Strang map ``exp(h M + h^3 Y3 + h^5 Y5 + ...)``.

    Extracted by an even-polynomial fit of ``log(Strang_h) / h``.
    """
    hs = _fit_grid(g, h_grid)
    if dps is None:
        strang = catalog("strang")
        mats = [logm_principal(propagator(strang, g, h)) / h for h in hs]
        return _poly_coefficients(hs, mats, (0, 2, 4, 6))[2]
    from splitkit.precise import to_complex
    return to_complex(_cached_y3(g, hs, dps)[1])


_PRECISE_CACHE: dict = {}


def _cached_y3(g: GeneratorSet, hs: np.ndarray, dps: int):
    """Precise generator set and Strang ``Y3``, reused across fits."""
    from splitkit.precise import precise_generators

    key = (tuple(m.tobytes() for m in g.generators), g.generators[0].shape, hs.tobytes(), dps)
    hit = _PRECISE_CACHE.get(key)
    if hit is None:
        if len(_PRECISE_CACHE) > 16:
            _PRECISE_CACHE.clear()
        pg = precise_generators(g, dps)
        hit = _PRECISE_CACHE[key] = (pg, _precise_y3(pg, hs))
    return hit


def _precise_y3(pg, hs):
    from splitkit.precise import poly_coefficients, precise_logs
    powers = tuple(range(0, 2 * min(len(hs) - 1, 5) + 1, 2))
    return poly_coefficients(pg.ctx, hs, precise_logs(catalog("strang"), pg, hs), powers)[2]


def _basis(g: GeneratorSet, Y3: np.ndarray, max_grade: int) -> dict[int, list[np.ndarray]]:
    M = g.total()
    basis = {1: [M], 2: [], 3: [Y3], 4: [commutator(M, Y3)]}
    return {k: v for k, v in basis.items() if k <= max_grade}


def fit_modified_field(
    c: Composition,
    g: GeneratorSet,
    h_grid: Sequence[float] | None = None,
    max_grade: int = 4,
    dps: int | None = FIT_DPS,
) -> LieBasisFit:
    """Fit ``K(h) = log Psi_h`` against the graded basis up to ``max_grade``.

    For alternating-conjugate compositions ``Psi`` is the leading half only.
    The grade-2 subspace is empty for a time-symmetric basic method; its
    fitted polynomial coefficient enters the residual.

    Logarithms and the polynomial fit run in ``dps`` digits; in double
    precision (``dps=None``) the small steps of the default grid are
    swamped by roundoff and the fit is typically flagged unreliable.
    """
    if c.basic is not BasicMethod.STRANG:
        raise UnsupportedError("modified-field fits need a Strang-based composition")
    if not 1 <= max_grade <= 4:
        raise InvalidInputError("max_grade must be between 1 and 4")
    psi = c.half() if ALTERNATING_CONJUGATE in c.tags else c
    hs = _fit_grid(g, h_grid)
    if hs.size < max_grade + 3:
        raise InvalidInputError(f"need at least {max_grade + 3} step sizes")
    powers = tuple(range(0, min(hs.size, max_grade + 4)))
    if dps is None:
        Y3 = strang_y3(g, hs, None)
        mats = [logm_principal(propagator(psi, g, h)) / h for h in hs]
        coef = _poly_coefficients(hs, mats, powers)
        basis = _basis(g, Y3, max_grade)
        return _project(coef, basis, g, max_grade, np)

    from splitkit.precise import poly_coefficients, precise_logs, to_object
    pg, Y3 = _cached_y3(g, hs, dps)
    ctx = pg.ctx
    coef = poly_coefficients(ctx, hs, precise_logs(psi, pg, hs), powers)
    M = to_object(g.total(), ctx)
    basis = {1: [M], 2: [], 3: [Y3], 4: [M @ Y3 - Y3 @ M]}
    basis = {k: v for k, v in basis.items() if k <= max_grade}
    return _project(coef, basis, g, max_grade, None)


def _project(coef, basis, g, max_grade, _np) -> LieBasisFit:
    """Least-squares coordinates of each grade's coefficient in its basis."""
    import mpmath

    def norm(x):
        return float(mpmath.sqrt(sum(abs(z) ** 2 for z in np.ravel(x))))

    ks, res = {}, {}
    ref1 = norm(g.total())
    for grade, elems in basis.items():
        C = coef[grade - 1]
        if not elems:
            res[grade] = norm(C) / ref1**grade
            continue
        # basis grades hold one element each, so projection is a single ratio
        (e,) = elems
        flat_e, flat_c = np.ravel(e), np.ravel(C)
        num = sum(np.conj(a) * b for a, b in zip(flat_e, flat_c))
        den = sum(abs(a) ** 2 for a in flat_e)
        k = num / den
        ks[(grade, 1)] = complex(k)
        res[grade] = norm(np.asarray(flat_c) - k * np.asarray(flat_e)) / norm(e)
    return LieBasisFit(ks, max(res.values()), res, max_grade)


def closed_form_k(c: Composition) -> dict[tuple[int, int], complex]:
    """Exact ``k_{1,1}, k_{3,1}, k_{4,1}`` of ``Psi`` from its coefficients.

    ``k11 = sum a``, ``k31 = sum a^3`` and
    ``k41 = 1/2 sum_{i<j} (a_j a_i^3 - a_j^3 a_i)`` with ``i`` applied first.
    """
    if c.basic is not BasicMethod.STRANG:
        raise UnsupportedError("closed forms assume a Strang basic method")
    psi = c.half() if ALTERNATING_CONJUGATE in c.tags else c
    a = list(psi.exact)
    k11 = sum(a)
    k31 = sum(x**3 for x in a)
    k41 = sum(a[j] * a[i] ** 3 - a[j] ** 3 * a[i]
              for j in range(len(a)) for i in range(j)) / 2
    return {(1, 1): complex(k11), (3, 1): complex(k31), (4, 1): complex(k41)}
