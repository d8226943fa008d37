"""Composition schemes with complex coefficients.

A :class:`Composition` is a sequence of stage coefficients applied to a basic
method.  Stages are stored in *application order*: the first coefficient acts
first on the state vector.  Matrix products in the literature are written
right to left, so a product ``Phi(a1 h) Phi(a2 h) Phi(a3 h)`` is stored as
``(a3, a2, a1)``.

Coefficients are kept twice: as ``mpmath`` numbers with 40 significant
digits (``exact``), which is what the JSON catalog prints, and as complex
doubles (``stages``) for numerical work.

Basic methods for generators ``G_1, ..., G_m``:

* Lie--Trotter applies ``exp(a h G_1)``, then ``G_2``, ... up to ``G_m``.
* Strang applies ``G_1, ..., G_{m-1}`` at half step, ``G_m`` at full step,
  then ``G_{m-1}, ..., G_1`` at half step.
* Exact stages list one coefficient per generator; each stage applies
  ``G_1, ..., G_m`` with its own coefficients.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import mpmath
import numpy as np

from splitkit.errors import CatalogError, InvalidInputError, UnsupportedError
from splitkit.linalg import as_matrix, expm

MP_DPS = 40
DUMP_DIGITS = 30

PALINDROMIC = "palindromic"
SYMMETRIC_CONJUGATE = "symmetric-conjugate"
ALTERNATING_CONJUGATE = "alternating-conjugate"
TAG_ORDER = (PALINDROMIC, SYMMETRIC_CONJUGATE, ALTERNATING_CONJUGATE)

COEFF_TOL = 1e-15

_mp = mpmath.mp.clone()
_mp.dps = MP_DPS


class BasicMethod(str, enum.Enum):
    EXACT_STAGE = "exact-stage"
    LIE_TROTTER = "lie-trotter"
    STRANG = "strang"


class GeneratorSet:
    """Ordered list of ``m >= 2`` same-sized generator matrices.

    For unitary problems these are ``iA_j``; for Hamiltonian ones ``J A_j``.
    """

    def __init__(self, generators: Iterable):
        mats = [as_matrix(g, f"generator {k}") for k, g in enumerate(generators)]
        if len(mats) < 2:
            raise InvalidInputError("a generator set needs at least two matrices")
        dim = mats[0].shape[0]
        for k, g in enumerate(mats):
            if g.shape[0] != dim:
                raise InvalidInputError(
                    f"generator {k} has dimension {g.shape[0]}, expected {dim}"
                )
            g.setflags(write=False)
        self._mats = tuple(mats)

    @property
    def generators(self) -> tuple[np.ndarray, ...]:
        return self._mats

    @property
    def dim(self) -> int:
        return self._mats[0].shape[0]

    def __len__(self) -> int:
        return len(self._mats)

    def __getitem__(self, k: int) -> np.ndarray:
        return self._mats[k]

    def total(self) -> np.ndarray:
        """Sum of the generators, the vector field being approximated."""
        return np.sum(self._mats, axis=0)


@dataclass(frozen=True)
class Composition:
    """A splitting scheme: basic method plus stage coefficients.

    For Lie--Trotter and Strang bases ``exact`` holds one coefficient per
    stage.  For exact-stage splittings it holds one tuple per stage with a
    coefficient for each generator.
    """

    name: str
    basic: BasicMethod
    exact: tuple
    nominal_order: int
    tags: frozenset = field(default_factory=frozenset)
    family: str | None = None

    @property
    def stages(self) -> tuple:
        if self.basic is BasicMethod.EXACT_STAGE:
            return tuple(tuple(complex(x) for x in st) for st in self.exact)
        return tuple(complex(x) for x in self.exact)

    @property
    def n_stages(self) -> int:
        return len(self.exact)

    def coefficient_array(self) -> np.ndarray:
        return np.array(self.stages, dtype=np.complex128)

    def is_real(self) -> bool:
        return all(x.imag == 0 for x in _flat(self.exact))

    def half(self) -> "Composition":
        """The leading factor ``Psi`` of an alternating-conjugate pair.

        With ``S = Psi Psi~`` (``Psi~`` applied first) this returns the last
        half of the application-order stages.  Non-alternating compositions
        are returned unchanged.
        """
        if ALTERNATING_CONJUGATE not in self.tags:
            return self
        r = self.n_stages // 2
        return Composition(
            name=f"half({self.name})",
            basic=self.basic,
            exact=self.exact[r:],
            nominal_order=self.nominal_order,
            tags=compute_tags(self.exact[r:]),
        )


def _flat(exact) -> list:
    out = []
    for x in exact:
        if isinstance(x, tuple):
            out.extend(x)
        else:
            out.append(x)
    return out


def _mpc(re, im=0) -> mpmath.mpc:
    return _mp.mpc(_mp.mpf(re), _mp.mpf(im))


def _conj(x):
    if isinstance(x, tuple):
        return tuple(_conj(y) for y in x)
    return _mp.conj(x)


def _scale(x, f):
    if isinstance(x, tuple):
        return tuple(_scale(y, f) for y in x)
    return x * f


def _close(a, b, tol) -> bool:
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_close(x, y, tol) for x, y in zip(a, b))
    return abs(complex(a) - complex(b)) <= tol


def _seq_close(a: Sequence, b: Sequence, tol: float) -> bool:
    return len(a) == len(b) and all(_close(x, y, tol) for x, y in zip(a, b))


def _pal_seq(exact, tol) -> bool:
    return _seq_close(exact, exact[::-1], tol)


def _sc_seq(exact, tol) -> bool:
    return _seq_close(exact[::-1], [_conj(x) for x in exact], tol)


def _ac_seq(exact, tol) -> bool:
    n = len(exact)
    if n < 2 or n % 2:
        return False
    r = n // 2
    return _seq_close(exact[:r], [_conj(x) for x in exact[r:]], tol)


def compute_tags(exact, tol: float = COEFF_TOL) -> frozenset:
    tags = set()
    if _pal_seq(exact, tol):
        tags.add(PALINDROMIC)
    if _sc_seq(exact, tol):
        tags.add(SYMMETRIC_CONJUGATE)
    if _ac_seq(exact, tol):
        tags.add(ALTERNATING_CONJUGATE)
    return frozenset(tags)


def make_composition(
    name: str,
    basic: BasicMethod,
    exact: Sequence,
    nominal_order: int,
    family: str | None = None,
) -> Composition:
    """Build a composition with tags computed from its coefficients."""
    if nominal_order < 1:
        raise InvalidInputError("nominal_order must be a positive integer")
    if len(exact) == 0:
        raise InvalidInputError("a composition needs at least one stage")
    exact = tuple(
        tuple(_mp.mpmathify(y) for y in x) if isinstance(x, tuple) else _mp.mpmathify(x)
        for x in exact
    )
    for x in _flat(exact):
        if not (_mp.isfinite(x.real) and _mp.isfinite(x.imag)):
            raise InvalidInputError(f"non-finite coefficient in {name}")
    return Composition(name, BasicMethod(basic), exact, int(nominal_order),
                       compute_tags(exact), family)


def is_palindromic(c: Composition, tol: float = COEFF_TOL) -> bool:
    """True iff the coefficient sequence equals its reversal within ``tol``."""
    return _pal_seq(c.exact, tol)


def is_symmetric_conjugate(c: Composition, tol: float = COEFF_TOL) -> bool:
    """True iff the reversed sequence equals the conjugated sequence."""
    return _sc_seq(c.exact, tol)


def is_alternating_conjugate(c: Composition, tol: float = COEFF_TOL) -> bool:
    """True iff the first half is the elementwise conjugate of the second."""
    return _ac_seq(c.exact, tol)


def verify_tags(c: Composition, tol: float = COEFF_TOL) -> dict[str, bool]:
    """Re-run the predicate behind every tag carried by ``c``."""
    predicates = {
        PALINDROMIC: is_palindromic,
        SYMMETRIC_CONJUGATE: is_symmetric_conjugate,
        ALTERNATING_CONJUGATE: is_alternating_conjugate,
    }
    return {t: predicates[t](c, tol) for t in sorted(c.tags)}


def consistency_sum(c: Composition) -> complex | tuple[complex, ...]:
    """Sum of first-order coefficients per step; 1 for a consistent scheme."""
    if c.basic is BasicMethod.EXACT_STAGE:
        return tuple(complex(sum(col)) for col in zip(*c.exact))
    return complex(_mp.fsum(c.exact))


def consistency_defect(c: Composition) -> float:
    s = consistency_sum(c)
    return max(abs(x - 1) for x in (s if isinstance(s, tuple) else (s,)))


def closed_form_residuals(c: Composition) -> dict[str, float]:
    """Low-order conditions that have closed forms in the coefficients.

    Alternating-conjugate pairs ``Psi Psi~`` are judged on ``Psi``:
    ``Re(sum a) = 1/2`` always, then ``Re(sum a^3) = 0`` at order 3 or
    ``sum a^3 = 0`` from order 4 (Strang stages); with Lie--Trotter stages
    the order-2 conditions are ``Re a = 1/2`` and ``Re a^2 = 0``.  Other
    Strang compositions of order 3 or more need ``sum a^3 = 0``.
    """
    if c.basic is BasicMethod.EXACT_STAGE:
        return {}
    out: dict[str, float] = {}
    p = c.nominal_order
    if ALTERNATING_CONJUGATE in c.tags:
        a = list(c.half().exact)
        out["re_k11_minus_half"] = float(abs(_mp.re(_mp.fsum(a)) - _mp.mpf(1) / 2))
        if c.basic is BasicMethod.LIE_TROTTER:
            if p >= 2:
                out["re_a2"] = float(abs(_mp.re(_mp.fsum(x**2 for x in a))))
        elif p == 3:
            out["re_k31"] = float(abs(_mp.re(_mp.fsum(x**3 for x in a))))
        elif p >= 4:
            out["k31"] = float(abs(_mp.fsum(x**3 for x in a)))
    elif c.basic is BasicMethod.STRANG and p >= 3:
        out["sum_cubes"] = float(abs(_mp.fsum(x**3 for x in c.exact)))
    return out


def is_consistent(c: Composition, tol: float = COEFF_TOL) -> bool:
    s = consistency_sum(c)
    if isinstance(s, tuple):
        return all(abs(x - 1) <= tol for x in s)
    return abs(s - 1) <= tol


def conjugate_scheme(c: Composition) -> Composition:
    """Replace every coefficient by its complex conjugate."""
    if c.is_real():
        return c
    if c.name.startswith("conj(") and c.name.endswith(")"):
        name = c.name[5:-1]
    else:
        name = f"conj({c.name})"
    exact = tuple(_conj(x) for x in c.exact)
    return Composition(name, c.basic, exact, c.nominal_order, compute_tags(exact),
                       c.family)


def alternate(
    c: Composition,
    halve_step: bool = True,
    name: str | None = None,
    order: int | None = None,
) -> Composition:
    """Alternating-conjugate composition ``S = Psi Psi~``.

    The conjugated copy is applied first.  With ``halve_step`` every
    coefficient is multiplied by 1/2 beforehand, so a consistent ``c`` gives a
    consistent result.  Without halving, ``c`` must carry half the step
    (real part of its coefficient sum equal to 1/2).

    The nominal order is ``p + 1`` when ``c`` is symmetric-conjugate of odd
    order ``p`` and ``p`` otherwise, unless ``order`` overrides it.
    """
    if c.basic is BasicMethod.EXACT_STAGE:
        raise UnsupportedError("alternate() needs a one-parameter composition")
    f = _mp.mpf(1) / 2 if halve_step else _mp.mpf(1)
    base = tuple(_scale(x, f) for x in c.exact)
    exact = tuple(_conj(x) for x in base) + base
    total = complex(_mp.fsum(exact))
    if abs(total - 1) > 1e-12:
        raise InvalidInputError(
            f"alternate({c.name}, halve_step={halve_step}) is inconsistent: "
            f"coefficients sum to {total}"
        )
    if order is None:
        order = c.nominal_order
        if SYMMETRIC_CONJUGATE in c.tags and c.nominal_order % 2 == 1:
            order += 1
    if name is None:
        name = f"alt({c.name})" if halve_step else f"altfull({c.name})"
    return Composition(name, c.basic, exact, order, compute_tags(exact), c.family)


def expand(c: Composition, m: int) -> list[tuple[int, complex]]:
    """Exponential sequence ``[(generator index, coefficient), ...]``.

    Application order; no merging of adjacent factors.
    """
    if m < 2:
        raise InvalidInputError("need at least two generators")
    seq: list[tuple[int, complex]] = []
    if c.basic is BasicMethod.EXACT_STAGE:
        for stage in c.stages:
            if len(stage) != m:
                raise InvalidInputError(
                    f"{c.name}: stage has {len(stage)} coefficients for {m} generators"
                )
            seq.extend((k, a) for k, a in enumerate(stage) if a != 0)
    elif c.basic is BasicMethod.LIE_TROTTER:
        for a in c.stages:
            seq.extend((k, a) for k in range(m))
    else:
        for a in c.stages:
            half = a / 2
            seq.extend((k, half) for k in range(m - 1))
            seq.append((m - 1, a))
            seq.extend((k, half) for k in range(m - 2, -1, -1))
    return seq


def exponential_count(c: Composition, m: int) -> int:
    """Exponentials per step after merging adjacent same-generator factors."""
    count = 0
    prev = None
    for k, _ in expand(c, m):
        if k != prev:
            count += 1
        prev = k
    return count


def propagator(c: Composition, g: GeneratorSet, h: complex) -> np.ndarray:
    """One-step matrix of ``c`` with step ``h`` on generators ``g``.

    The returned matrix maps ``u_n`` to ``u_{n+1}``; the first stage in
    application order is the rightmost factor.
    """
    h = complex(h)
    if not np.isfinite(h):
        raise InvalidInputError("step size must be finite")
    cache: dict[tuple[int, complex], np.ndarray] = {}
    out = np.eye(g.dim, dtype=np.complex128)
    for k, a in expand(c, len(g)):
        key = (k, a)
        e = cache.get(key)
        if e is None:
            e = cache[key] = expm(g[k], a * h)
        out = e @ out
    return out


def stage_count(c: Composition) -> int:
    """Applications of the basic Strang method per step."""
    if c.basic is not BasicMethod.STRANG:
        raise UnsupportedError(
            f"stage_count is defined for Strang compositions, {c.name} uses {c.basic.value}"
        )
    return c.n_stages


def mobius(n: int) -> int:
    if n < 1:
        raise InvalidInputError("mobius is defined for positive integers")
    result = 1
    d = 2
    while d * d <= n:
        if n % d == 0:
            n //= d
            if n % d == 0:
                return 0
            result = -result
        d += 1
    if n > 1:
        result = -result
    return result


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def lie_dimension(n: int, m: int) -> int:
    """Dimension of the degree-``n`` part of the free Lie algebra on ``m`` letters.

    Witt's necklace formula ``(1/n) sum_{d|n} mu(d) m^(n/d)``.
    """
    if n < 1 or m < 2:
        raise InvalidInputError("lie_dimension needs n >= 1 and m >= 2")
    total = sum(mobius(d) * m ** (n // d) for d in _divisors(n))
    return total // n


def graded_lie_dimension(n: int, weights: Sequence[int]) -> int:
    """Degree-``n`` dimension of a free Lie algebra with weighted generators.

    ``weights`` lists the degree of each generator (e.g. ``1, 3, 5`` for the
    odd terms of a symmetric method's modified field).  Uses the weighted
    Witt formula ``(1/n) sum_{d|n} mu(d) r_{n/d}`` with ``r_k = k [t^k]
    -log(1 - W(t))``, ``W(t) = sum_g t^{w_g}``.
    """
    if n < 1:
        raise InvalidInputError("degree must be positive")
    # word counts: a_k = [t^k] 1/(1 - W)
    words = [1] + [0] * n
    for k in range(1, n + 1):
        words[k] = sum(words[k - w] for w in weights if w <= k)
    # r_k via the Newton-type identity r_k = k a_k - sum_{j<k} r_j a_{k-j}
    r = [0] * (n + 1)
    for k in range(1, n + 1):
        r[k] = k * words[k] - sum(r[j] * words[k - j] for j in range(1, k))
    total = sum(mobius(d) * r[n // d] for d in _divisors(n))
    return total // n


def symmetric_basis_dimension(n: int) -> int:
    """``c(n)`` for compositions of a time-symmetric 2nd-order basic method."""
    return graded_lie_dimension(n, [w for w in range(1, n + 1, 2)])


def ac_condition_count(p: int) -> int:
    """Real order conditions for an alternating-conjugate method of order ``p``.

    One for ``Re k_{1,1} = 1/2``, two per complex ``k_{l,j} = 0`` with
    ``2 <= l <= p-1`` and one per ``Re k_{p,j} = 0``.
    """
    if p < 2:
        raise InvalidInputError("order must be at least 2")
    c = symmetric_basis_dimension
    return 1 + sum(2 * c(ell) for ell in range(2, p)) + c(p)


# -- catalog ---------------------------------------------------------------

_MINUS_SUFFIX = ":minus"


def _dec(re: str, im: str = "0") -> mpmath.mpc:
    return _mpc(re, im)


def _conj_pairs(values: Sequence) -> list:
    return [_mp.conj(v) for v in values]


def _from_product(values: Sequence) -> tuple:
    """Convert a right-to-left matrix product listing to application order."""
    return tuple(reversed(list(values)))


def _gamma3():
    return _mpc(_mp.mpf(1) / 2, _mp.sqrt(3) / 6)


def _p3sc() -> Composition:
    g = _gamma3()
    return make_composition("p3sc", BasicMethod.STRANG,
                            _from_product([g, _mp.conj(g)]), 3, family="SC")


def _p4pal() -> Composition:
    g1 = 1 / (2 - _mp.cbrt(2) * _mp.expjpi(_mp.mpf(2) / 3))
    g2 = 1 - 2 * g1
    return make_composition("p4pal", BasicMethod.STRANG, (g1, g2, g1), 4, family="P")


def _p4sc() -> Composition:
    g1 = _mpc(_mp.mpf(1) / 4, _mp.sqrt(_mp.mpf(5) / 3) / 4)
    g2 = _mpc(_mp.mpf(1) / 2)
    return make_composition("p4sc", BasicMethod.STRANG,
                            _from_product([g1, g2, _mp.conj(g1)]), 4, family="SC")


def _ac2() -> Composition:
    a = _mpc(_mp.mpf(1) / 2, _mp.mpf(1) / 2)
    return make_composition("ac2", BasicMethod.LIE_TROTTER,
                            _from_product([a, _mp.conj(a)]), 2)


def _ac_from_half(name: str, half_product: Sequence, order: int) -> Composition:
    full = list(half_product) + _conj_pairs(half_product)
    return make_composition(name, BasicMethod.STRANG, _from_product(full), order,
                            family="AC")


def ac4_new_root():
    s3 = _mp.sqrt(3)
    return _mpc((1 + 1 / s3) / 4, (1 - 1 / s3) / 4)


def _ac4_new() -> Composition:
    a = ac4_new_root()
    return _ac_from_half("ac4-new", [a, _mpc(0, 1) * _mp.conj(a)], 4)


AC5_PRINTED = (
    ("0.13073364974455472155", "0"),
    ("0.10154067971150062704", "0.13578392847671735429"),
    ("0.16195992616393787750", "-0.05016739165848310348"),
    ("0.10576574438000677391", "0.07684331129821891226"),
)

AC6_PRINTED = (
    ("0.051834036182240306862", "0"),
    ("0.075584762328805037429", "0.068952097954972525370"),
    ("0.126191199798221549793", "-0.022451017530352466819"),
    ("0.067883683573696296147", "-0.098039677222465976320"),
    ("0.099243916328147654969", "0.049312230362166446543"),
    ("0.079262401788889154800", "-0.041953102069126791785"),
)

SC5_PRINTED = (
    ("0.17526840907207411405", "0.05761474413053870201"),
    ("0.18487368019298416043", "-0.19412192275724958851"),
    ("0.27971582146988345102", "0"),
)

SC7_PRINTED = (
    ("0.05211820743645156337", "-0.05814624289751311388"),
    ("0.10923197827620526541", "0.02935068872383690377"),
    ("0.09943629453321852209", "-0.06231578289901792940"),
    ("0.08136441998830503070", "0.11683729387729571634"),
    ("0.14644914726793223517", "0.04299436701496493366"),
    ("0.02279990499577476650", "0"),
)


# Printed tables carry about 20 digits.  They are polished to working
# precision by Gauss-Newton on the order conditions, written in a truncated
# free algebra on the odd-grade terms Y1, Y3, Y5, ... of the Strang
# modified field: the composition must agree with exp(Y1) through grade p.


def _word_mul(x: dict, y: dict, p: int) -> dict:
    out: dict = {}
    for u, a in x.items():
        wu = sum(u)
        for v, b in y.items():
            if wu + sum(v) <= p:
                w = u + v
                out[w] = out.get(w, 0) + a * b
    return out


def _word_exp(x: dict, p: int) -> dict:
    out = {(): _mp.mpf(1)}
    term = {(): _mp.mpf(1)}
    for k in range(1, p + 1):
        term = {w: a / k for w, a in _word_mul(term, x, p).items()}
        if not term:
            break
        for w, a in term.items():
            out[w] = out.get(w, 0) + a
    return out


def _condition_residual(stages: Sequence, p: int) -> list:
    """Word coefficients of ``prod exp(a Y1 + a^3 Y3 + ...) - exp(Y1)``."""
    total = {(): _mp.mpf(1)}
    for a in stages:  # later stages multiply on the left
        gen = {(k,): a ** k for k in range(1, p + 1, 2)}
        total = _word_mul(_word_exp(gen, p), total, p)
    target = _word_exp({(1,): _mp.mpf(1)}, p)
    words = sorted(set(total) | set(target))
    res = []
    for w in words:
        if w:
            d = total.get(w, 0) - target.get(w, 0)
            res.extend([_mp.re(d), _mp.im(d)])
    return res


def _polish(build, x0: list, p: int, iterations: int = 8) -> list:
    ctx = _mp.clone()
    ctx.dps = MP_DPS + 20
    x = [ctx.mpf(v) for v in x0]
    eps = ctx.mpf(10) ** (-(MP_DPS + 5))
    with _mp.workdps(ctx.dps):
        for _ in range(iterations):
            r = _condition_residual(build(x), p)
            if max(abs(v) for v in r) < ctx.mpf(10) ** (-(MP_DPS + 5)):
                break
            J = ctx.matrix(len(r), len(x))
            for j in range(len(x)):
                xp = list(x)
                xp[j] += eps
                rp = _condition_residual(build(xp), p)
                for i in range(len(r)):
                    J[i, j] = (rp[i] - r[i]) / eps
            U, S, V = ctx.svd_r(J)
            cut = S[0] * ctx.mpf(10) ** (-20)
            rv = ctx.matrix(r)
            step = [ctx.mpf(0)] * len(x)
            for k in range(len(S)):
                if S[k] > cut:
                    coef = sum(U[i, k] * rv[i] for i in range(len(r))) / S[k]
                    for j in range(len(x)):
                        step[j] += coef * V[k, j]
            x = [xi - si for xi, si in zip(x, step)]
        r = _condition_residual(build(x), p)
    if max(abs(v) for v in r) > _mp.mpf(10) ** (-(MP_DPS - 5)):
        raise CatalogError(f"order conditions did not converge (residual {max(abs(v) for v in r)})")
    return [_mp.mpf(v) for v in x]


def _sc_product(x: list, k: int) -> list:
    head = [_mpc(x[2 * i], x[2 * i + 1]) for i in range(k)]
    return head + [_mpc(x[2 * k])] + _conj_pairs(head[::-1])


def _sc_from_printed(name: str, printed, order: int) -> Composition:
    k = len(printed) - 1
    x0 = [_mp.mpf(v) for re, im in printed[:-1] for v in (re, im)] + [_mp.mpf(printed[-1][0])]
    x = _polish(lambda y: _from_product(_sc_product(y, k)), x0, order)
    product = _sc_product(x, k)
    return make_composition(name, BasicMethod.STRANG, _from_product(product), order,
                            family="SC")


def _ac_half(x: list, k: int) -> list:
    # the first coefficient of each printed AC table is real
    return [_mpc(x[0])] + [_mpc(x[2 * i - 1], x[2 * i]) for i in range(1, k)]


def _ac_from_printed(name: str, printed, order: int) -> Composition:
    k = len(printed)
    x0 = [_mp.mpf(printed[0][0])] + [_mp.mpf(v) for re, im in printed[1:] for v in (re, im)]

    def full(y):
        half = _ac_half(y, k)
        return _from_product(half + _conj_pairs(half))

    return _ac_from_half(name, _ac_half(_polish(full, x0, order), k), order)


PRINTED_TABLES = {
    "ac5-new": AC5_PRINTED,
    "ac6-new": AC6_PRINTED,
    "sc5": SC5_PRINTED,
    "sc7": SC7_PRINTED,
}


def printed_deviation(name: str) -> float:
    """Worst ``|coefficient - printed decimal|`` in units of the last printed digit.

    Values below 1 mean every printed digit is reproduced (the tables are
    truncated, so agreement is judged up to one unit in the last place).
    """
    if name not in PRINTED_TABLES:
        raise CatalogError(f"no printed table for {name!r}")
    product = list(reversed(_CATALOG[name].exact))
    worst = 0.0
    for z, (re, im) in zip(product, PRINTED_TABLES[name]):
        for text, part in ((re, _mp.re(z)), (im, _mp.im(z))):
            digits = len(text.split(".")[1]) if "." in text else 0
            dev = abs(part - _mp.mpf(text)) * _mp.mpf(10) ** digits
            worst = max(worst, float(dev))
    return worst


def _build_catalog() -> dict[str, Composition]:
    cat: dict[str, Composition] = {}
    cat["lt"] = make_composition("lt", BasicMethod.LIE_TROTTER, (1,), 1)
    cat["strang"] = make_composition("strang", BasicMethod.STRANG, (1,), 2)
    cat["p3sc"] = _p3sc()
    cat["p4pal"] = _p4pal()
    cat["p4sc"] = _p4sc()
    cat["ac4-s1"] = replace(alternate(cat["p3sc"], name="ac4-s1"), family="SC-SC~")
    cat["ac4-s2"] = replace(alternate(cat["p4pal"], name="ac4-s2"), family="P-P~")
    cat["ac4-s3"] = replace(alternate(cat["p4sc"], name="ac4-s3"), family="SC-SC~")
    cat["ac2"] = _ac2()
    cat["ac4-new"] = _ac4_new()
    cat["ac5-new"] = _ac_from_printed("ac5-new", AC5_PRINTED, 5)
    cat["ac6-new"] = _ac_from_printed("ac6-new", AC6_PRINTED, 6)
    cat["sc5"] = _sc_from_printed("sc5", SC5_PRINTED, 5)
    cat["sc7"] = _sc_from_printed("sc7", SC7_PRINTED, 7)
    cat["ac6-scsc"] = replace(alternate(cat["sc5"], name="ac6-scsc"), family="SC-SC~")
    cat["ac8-scsc"] = replace(alternate(cat["sc7"], name="ac8-scsc"), family="SC-SC~")
    return cat


_CATALOG = _build_catalog()

CATALOG_NAMES: tuple[str, ...] = tuple(_CATALOG)


def catalog(name: str) -> Composition:
    """Look up a scheme by identifier.

    Append ``:minus`` to select the other sign branch of the complex
    coefficients (the complex-conjugate scheme).
    """
    base = name[: -len(_MINUS_SUFFIX)] if name.endswith(_MINUS_SUFFIX) else name
    try:
        c = _CATALOG[base]
    except KeyError:
        raise CatalogError(
            f"unknown scheme {name!r}; valid names: {', '.join(CATALOG_NAMES)}"
        ) from None
    if base != name:
        return replace(conjugate_scheme(c), name=name)
    return c


# Minimum stage counts per order and composition type; None marks an
# order the type cannot reach.  Columns: P, SC, P-P~, SC-SC~, AC.
STAGE_TABLE: dict[int, dict[str, int | None]] = {
    3: {"P": None, "SC": 2, "P-P~": None, "SC-SC~": None, "AC": 2},
    4: {"P": 3, "SC": 3, "P-P~": 6, "SC-SC~": 4, "AC": 4},
    5: {"P": None, "SC": 5, "P-P~": None, "SC-SC~": None, "AC": 8},
    6: {"P": 7, "SC": 7, "P-P~": 14, "SC-SC~": 10, "AC": 12},
    7: {"P": None, "SC": 11, "P-P~": None, "SC-SC~": None, "AC": 18},
    8: {"P": 15, "SC": 16, "P-P~": 30, "SC-SC~": 22, "AC": 26},
}

# Catalog entries that realise a minimal entry of STAGE_TABLE.
MINIMAL_ENTRIES: dict[str, tuple[tuple[int, str], ...]] = {
    "p3sc": ((3, "SC"), (3, "AC")),
    "p4pal": ((4, "P"),),
    "p4sc": ((4, "SC"),),
    "ac4-s1": ((4, "SC-SC~"),),
    "ac4-s2": ((4, "P-P~"),),
    "ac4-new": ((4, "AC"),),
    "ac5-new": ((5, "AC"),),
    "sc5": ((5, "SC"),),
    "ac6-new": ((6, "AC"),),
    "ac6-scsc": ((6, "SC-SC~"),),
    "sc7": ((7, "SC"),),
    "ac8-scsc": ((8, "SC-SC~"),),
}


def order_condition_residual(c: Composition, order: int | None = None) -> float:
    """Largest violated order-condition coefficient through ``order``.

    Valid for compositions of the Strang map, whose modified field only has
    odd-grade terms.  Zero (to working precision) iff the composition is of
    at least that order.
    """
    if c.basic is not BasicMethod.STRANG:
        raise UnsupportedError("order conditions are tabulated for Strang compositions")
    p = c.nominal_order if order is None else order
    with _mp.workdps(MP_DPS):
        res = _condition_residual(c.exact, p)
    return float(max((abs(v) for v in res), default=0.0))


def parse_scheme(expr: str) -> Composition:
    """Resolve a scheme expression.

    Grammar: ``name | conj(expr) | alt(expr) | altfull(expr)``, where
    ``alt`` halves the step before alternating and ``altfull`` does not.
    """
    s = expr.strip()
    for prefix, fn in (
        ("conj(", conjugate_scheme),
        ("altfull(", lambda c: alternate(c, halve_step=False)),
        ("alt(", alternate),
    ):
        if s.startswith(prefix):
            if not s.endswith(")"):
                raise CatalogError(f"unbalanced parentheses in scheme {expr!r}")
            return fn(parse_scheme(s[len(prefix):-1]))
    if "(" in s or ")" in s:
        raise CatalogError(f"malformed scheme expression {expr!r}")
    return catalog(s)


# -- serialization ---------------------------------------------------------


def _fmt(x) -> str:
    return _mp.nstr(x, DUMP_DIGITS, strip_zeros=True, min_fixed=-_mp.inf,
                    max_fixed=_mp.inf)


def _coeff_json(x):
    if isinstance(x, tuple):
        return [_coeff_json(y) for y in x]
    return [_fmt(x.real), _fmt(x.imag)]


def _coeff_load(x):
    if isinstance(x[0], list):
        return tuple(_coeff_load(y) for y in x)
    return _mpc(x[0], x[1])


def composition_to_dict(c: Composition) -> dict:
    try:
        stages = stage_count(c)
    except UnsupportedError:
        stages = None
    return {
        "name": c.name,
        "basic": c.basic.value,
        "nominal_order": c.nominal_order,
        "tags": [t for t in TAG_ORDER if t in c.tags],
        "family": c.family,
        "stage_count": stages,
        "coefficients": [_coeff_json(x) for x in c.exact],
    }


def composition_from_dict(d: dict) -> Composition:
    exact = tuple(_coeff_load(x) for x in d["coefficients"])
    c = make_composition(d["name"], BasicMethod(d["basic"]), exact,
                         d["nominal_order"], family=d.get("family"))
    declared = set(d.get("tags", []))
    if declared != set(c.tags):
        raise InvalidInputError(
            f"{c.name}: declared tags {sorted(declared)} fail verification "
            f"(computed {sorted(c.tags)})"
        )
    return c


def catalog_dump(compositions: Iterable[Composition] | None = None) -> str:
    """Machine-readable catalog as a JSON document (stable formatting)."""
    if compositions is None:
        compositions = (_CATALOG[n] for n in CATALOG_NAMES)
    doc = {"schemes": [composition_to_dict(c) for c in compositions]}
    return json.dumps(doc, indent=2) + "\n"


def catalog_load(text: str) -> list[Composition]:
    doc = json.loads(text)
    return [composition_from_dict(d) for d in doc["schemes"]]
