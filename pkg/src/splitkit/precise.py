"""Extended-precision one-step maps for order measurements.

High-order schemes on a grid such as ``h in [1e-3, 1e-1]`` have truncation
errors far below double-precision roundoff.  Here every generator is
diagonalised once in ``mpmath`` arithmetic, ``G = V diag(lambda) V^-1``, and
each exponential becomes a diagonal scaling in that basis.  Products are
carried out on numpy object arrays of ``mpc`` values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from splitkit.errors import InvalidInputError, NumericFailureError
from splitkit.schemes import Composition, GeneratorSet, expand


@dataclass(frozen=True)
class _Eig:
    values: np.ndarray   # object array of mpc
    V: np.ndarray
    Vinv: np.ndarray


def _to_obj(a: np.ndarray, ctx) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    out = np.empty(a.shape, dtype=object)
    for idx, z in np.ndenumerate(a):
        out[idx] = ctx.mpc(z.real, z.imag)
    return out


def _mat_to_obj(m, ctx) -> np.ndarray:
    out = np.empty((m.rows, m.cols), dtype=object)
    for i in range(m.rows):
        for j in range(m.cols):
            out[i, j] = ctx.mpc(m[i, j])
    return out


class PreciseGenerators:
    """Generator set held in ``dps``-digit arithmetic with cached eigenbases."""

    def __init__(self, g: GeneratorSet | Sequence[np.ndarray], dps: int = 32):
        if dps < 16:
            raise InvalidInputError("dps below 16 gains nothing over doubles")
        self.ctx = mpmath.mp.clone()
        self.ctx.dps = dps
        mats = g.generators if isinstance(g, GeneratorSet) else tuple(g)
        self.dim = mats[0].shape[0]
        self._eigs = [self._diagonalise(m) for m in mats]
        self._changes: dict = {}

    @property
    def dps(self) -> int:
        return self.ctx.dps

    def _diagonalise(self, m: np.ndarray) -> _Eig:
        ctx = self.ctx
        M = ctx.matrix(_to_obj(m, ctx).tolist())
        E, ER = ctx.eig(M)
        V = _mat_to_obj(ER, ctx)
        Vinv = _mat_to_obj(ctx.inverse(ER), ctx)
        vals = np.array([ctx.mpc(x) for x in E], dtype=object)
        recon = (V * vals[None, :]) @ Vinv
        err = max(abs(x) for x in (recon - _to_obj(m, ctx)).ravel())
        scale = max(1, max(abs(complex(x)) for x in np.asarray(m).ravel()))
        if err > ctx.mpf(10) ** (-(ctx.dps - 6)) * scale:
            raise NumericFailureError("generator is too close to defective for the precise path")
        return _Eig(vals, V, Vinv)

    def exp_times(self, k: int, t: complex, X: np.ndarray) -> np.ndarray:
        """``exp(t G_k) @ X``."""
        e = self._eigs[k]
        ctx = self.ctx
        tt = ctx.mpmathify(t)
        scale = np.array([ctx.exp(tt * lam) for lam in e.values], dtype=object)
        return e.V @ (scale[:, None] * (e.Vinv @ X))

    def change(self, src: int, dst: int) -> np.ndarray:
        """``V_dst^-1 V_src``: eigen-coordinates of ``src`` to those of ``dst``."""
        key = (src, dst)
        T = self._changes.get(key)
        if T is None:
            T = self._changes[key] = self._eigs[dst].Vinv @ self._eigs[src].V
        return T

    def identity(self) -> np.ndarray:
        out = np.empty((self.dim, self.dim), dtype=object)
        zero, one = self.ctx.mpc(0), self.ctx.mpc(1)
        for i in range(self.dim):
            for j in range(self.dim):
                out[i, j] = one if i == j else zero
        return out


_CACHE: dict = {}


def precise_generators(mats: GeneratorSet | Sequence[np.ndarray], dps: int = 32) -> PreciseGenerators:
    """Cached :class:`PreciseGenerators`; the eigen-decompositions dominate cost."""
    seq = mats.generators if isinstance(mats, GeneratorSet) else tuple(mats)
    key = (tuple((m.shape, np.asarray(m, dtype=np.complex128).tobytes()) for m in seq), dps)
    pg = _CACHE.get(key)
    if pg is None:
        if len(_CACHE) > 32:
            _CACHE.clear()
        pg = _CACHE[key] = PreciseGenerators(seq, dps)
    return pg


def _merged(seq: list[tuple[int, complex]]) -> list[tuple[int, object]]:
    out: list[list] = []
    for k, a in seq:
        if out and out[-1][0] == k:
            out[-1][1] += a
        else:
            out.append([k, a])
    return [(k, a) for k, a in out]


def precise_propagator(c: Composition, pg: PreciseGenerators, h) -> np.ndarray:
    """One-step map of ``c`` as an object array in ``pg``'s precision.

    Coefficients are taken from the composition's stored high-precision
    values, and adjacent exponentials of the same generator are merged.  The
    running product is kept in the eigenbasis of the generator applied last,
    so each exponential costs a single basis change.
    """
    ctx = pg.ctx
    m = len(pg._eigs)
    # expand on the exact coefficients rather than their double images
    seq = _merged([(k, ctx.mpmathify(a)) for k, a in expand(_exact_view(c), m)])
    hh = ctx.mpmathify(h)
    X, cur = None, None
    for k, a in seq:
        e = pg._eigs[k]
        if X is None:
            X = e.Vinv.copy()
        elif k != cur:
            X = pg.change(cur, k) @ X
        scale = np.array([ctx.exp(a * hh * lam) for lam in e.values], dtype=object)
        X = scale[:, None] * X
        cur = k
    if X is None:
        return pg.identity()
    return pg._eigs[cur].V @ X


def _exact_view(c: Composition):
    """A stand-in exposing ``stages`` as the stored mpmath numbers."""

    class View:
        name = c.name
        basic = c.basic
        stages = c.exact

    return View()


def precise_exact_flow(G: np.ndarray, h, dps: int = 32) -> np.ndarray:
    """``exp(h G)`` in ``dps``-digit arithmetic."""
    pg = precise_generators([G, np.zeros_like(G)], dps)
    return pg.exp_times(0, h, pg.identity())


def precise_local_errors(c: Composition, G_parts: Sequence[np.ndarray], G: np.ndarray,
                         h_grid: Sequence[float], dps: int = 32) -> list[float]:
    """Frobenius one-step errors ``||S_h - exp(hG)||`` at ``dps`` digits."""
    pg = precise_generators(G_parts, dps)
    ref = precise_generators([G, np.zeros_like(G)], dps)
    out = []
    for h in h_grid:
        S = precise_propagator(c, pg, h)
        E = ref.exp_times(0, h, ref.identity())
        out.append(frobenius(S - E))
    return out


def frobenius(X: np.ndarray) -> float:
    return float(mpmath.sqrt(mpmath.fsum(abs(x) ** 2 for x in X.ravel())))


def precise_logs(c: Composition, pg: PreciseGenerators, h_grid: Sequence[float]) -> list[np.ndarray]:
    """``log(S_h) / h`` for each step, principal branch, at ``pg``'s precision."""
    ctx = pg.ctx
    out = []
    for h in h_grid:
        S = precise_propagator(c, pg, h)
        L = ctx.logm(ctx.matrix(S.tolist()))
        out.append(np.array(L.tolist(), dtype=object) / ctx.mpf(h))
    return out


def poly_coefficients(ctx, h_grid: Sequence[float], mats: list[np.ndarray],
                      powers: Sequence[int]) -> dict[int, np.ndarray]:
    """Least-squares ``mats[i] ~ sum_d C_d h_i**d`` solved by QR in ``ctx``."""
    if len(h_grid) < len(powers):
        raise InvalidInputError(f"{len(powers)} powers need at least as many step sizes")
    sc = ctx.mpf(max(h_grid))
    x = [ctx.mpf(h) / sc for h in h_grid]
    V = ctx.matrix([[xi**d for d in powers] for xi in x])
    shape = mats[0].shape
    out = {d: np.empty(shape, dtype=object) for d in powers}
    for idx in np.ndindex(*shape):
        sol, _ = ctx.qr_solve(V, ctx.matrix([m[idx] for m in mats]))
        for k, d in enumerate(powers):
            out[d][idx] = sol[k] / sc**d
    return out


def to_object(a: np.ndarray, ctx) -> np.ndarray:
    return _to_obj(a, ctx)


def to_complex(a: np.ndarray) -> np.ndarray:
    return np.array([[complex(z) for z in row] for row in a], dtype=np.complex128)
