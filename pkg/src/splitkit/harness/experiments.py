"""Experiment runners that turn a config into sorted CSV rows."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from splitkit import diagnostics as dg
from splitkit.errors import FitError, InvalidInputError, SplitkitError
from splitkit.harness.config import ConfigError, ExperimentConfig, ProblemConfig
from splitkit.problems import ProblemKind, SplitProblem, make_problem
from splitkit.schemes import (
    ALTERNATING_CONJUGATE,
    CATALOG_NAMES,
    MINIMAL_ENTRIES,
    PRINTED_TABLES,
    STAGE_TABLE,
    BasicMethod,
    Composition,
    catalog_dump,
    closed_form_residuals,
    compute_tags,
    consistency_defect,
    exponential_count,
    order_condition_residual,
    parse_scheme,
    printed_deviation,
    propagator,
    stage_count,
    verify_tags,
)

CSV_COLUMNS = ("scheme", "problem_kind", "n", "seed", "h", "step", "observable", "value")

CLOSED_FORM_TOL = 1e-14
ORDER_TOL = 0.3
VERIFY_PROBLEM = ProblemConfig(kind=ProblemKind.HERMITIAN_SIMPLE, n=4, seed=0)
VERIFY_GRID = tuple(float(h) for h in np.geomspace(1e-3, 1e-1, 8))
VERIFY_DPS = 32


@dataclass(frozen=True)
class Row:
    scheme: str
    problem_kind: str
    n: int | None
    seed: int | None
    h: float | None
    step: int | None
    observable: str
    value: float

    def sort_key(self):
        h = -math.inf if self.h is None else self.h
        step = -1 if self.step is None else self.step
        return (self.scheme, self.observable, h, step)

    def cells(self) -> list[str]:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, float):
                return repr(x)
            return str(x)

        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


@dataclass(frozen=True)
class Check:
    scheme: str
    name: str
    value: float
    threshold: str
    passed: bool


@dataclass
class ExperimentResult:
    rows: list[Row]
    checks: list[Check] = field(default_factory=list)
    text: str | None = None  # non-CSV payload (catalog dump)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in sorted(self.rows, key=Row.sort_key):
            w.writerow(r.cells())
        return buf.getvalue()

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]


# -- helpers ----------------------------------------------------------------


def build_problem(setup: ProblemConfig, seed: int | None = None) -> SplitProblem:
    try:
        return make_problem(setup.kind, setup.n, setup.seed if seed is None else seed, **setup.options)
    except (TypeError, InvalidInputError) as exc:
        raise ConfigError(f"problem: {exc}") from None


def _resolve(expr: str):
    return "exact" if expr == "exact" else parse_scheme(expr)


def _row_factory(scheme: str, p: SplitProblem):
    def make(h, step, observable, value):
        return Row(scheme, p.kind.value, p.dim, p.seed,
                   None if h is None else float(h),
                   None if step is None else int(step),
                   observable, float(value))
    return make


def _parallel(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def pre_saturation_slope(cost: Sequence[float], err: Sequence[float],
                         floor: float = 1e-11, cap: float = 1e-6, window: int = 5) -> float:
    """Order implied by an error-vs-cost curve just before roundoff saturation.

    Walking from the cheapest point, the last contiguous run of errors
    strictly between ``floor`` and ``cap`` is kept; its ``window`` most
    expensive points (closest to saturation, hence most asymptotic) give
    minus the log-log slope.
    """
    pts = sorted(zip(cost, err))
    run: list = []
    last: list = []
    for c, e in pts:
        if math.isfinite(e) and floor < e < cap:
            run.append((c, e))
            last = run
        else:
            run = []
    best = last[-window:]
    if len(best) < 3:
        raise FitError(f"only {len(best)} points before saturation")
    lx = np.log([c for c, _ in best])
    ly = np.log([e for _, e in best])
    return float(-np.polyfit(lx, ly, 1)[0])


# -- dh-scan ----------------------------------------------------------------

_ONSET_CODE = {dg.OnsetKind.NONE: 0.0, dg.OnsetKind.COLLISION: 1.0, dg.OnsetKind.POWER_LAW: 2.0}


def run_dh_scan(cfg: ExperimentConfig, seed: int | None = None, threads: int = 1) -> ExperimentResult:
    p = build_problem(cfg.problem, seed)
    if p.kind is ProblemKind.HAMILTONIAN:
        raise ConfigError("problem.kind: dh-scan needs a unitary problem kind")
    steps = cfg.steps()

    def one(expr):
        c = _resolve(expr)
        row = _row_factory(expr, p)
        g = p.generators
        rows = []
        for h in steps:
            S = propagator(c, g, h)
            rows.append(row(h, None, "D_h", dg.unitarity_defect(S)))
            rows.append(row(h, None, "conj_closed_defect",
                            dg.spectrum_symmetry_defect(S, dg.SpectrumLaw.CONJ_CLOSED)))
            rows.append(row(h, None, "conj_inv_closed_defect",
                            dg.spectrum_symmetry_defect(S, dg.SpectrumLaw.CONJ_INV_CLOSED)))
        hs = dg.find_hstar(c, p)
        rows.append(row(None, None, "h_star", math.nan if hs.h_star is None else hs.h_star))
        rows.append(row(None, None, "onset", _ONSET_CODE[hs.onset]))
        rows.append(row(None, None, "power_law_exponent",
                        math.nan if hs.exponent is None else hs.exponent))
        return rows

    return ExperimentResult([r for rs in _parallel(one, cfg.schemes, threads) for r in rs])


# -- long-time runs -----------------------------------------------------------


def default_observables(p: SplitProblem) -> list[str]:
    if p.kind is ProblemKind.HAMILTONIAN:
        return ["imaginary_part_norm", "hamiltonian_energy", "actions"]
    return ["mass", "energy"]


def run_longtime(cfg: ExperimentConfig, seed: int | None = None, threads: int = 1) -> ExperimentResult:
    p = build_problem(cfg.problem, seed)
    requested = list(cfg.observables) or default_observables(p)
    want_super = "super_actions" in requested
    obs = [o for o in requested if o != "super_actions"]
    if want_super and not p.kind.is_unitary:
        raise ConfigError("observables: super_actions need a unitary problem kind")
    try:
        dg.check_observables(p, obs)
    except SplitkitError as exc:
        raise ConfigError(f"observables: {exc}") from None
    u0 = p.random_state()
    stride = cfg.record_every
    cells = [(expr, h) for expr in cfg.schemes for h in cfg.steps()]

    def one(cell):
        expr, h = cell
        c = _resolve(expr)
        row = _row_factory(expr, p)
        res = dg.longtime_run(c, p, h, cfg.n_steps, u0, obs)
        rows = []
        for name, series in res.series.items():
            for k in range(0, cfg.n_steps + 1, stride):
                if name == "actions":
                    for j, v in enumerate(series[k], start=1):
                        rows.append(row(h, k, f"action_{j}", v))
                else:
                    rows.append(row(h, k, name, series[k]))
        if want_super:
            sa = dg.superaction_series(c, p, h, cfg.n_steps, u0)
            for j, (_, series) in enumerate(sorted(sa.items()), start=1):
                for k in range(0, cfg.n_steps + 1, stride):
                    rows.append(row(h, k, f"super_action_{j}", series[k]))
        if c != "exact":
            S = propagator(c, p.generators, h)
            rows.append(row(h, None, "D_h", dg.unitarity_defect(S)))
            if p.kind is ProblemKind.HAMILTONIAN:
                rows.append(row(h, None, "symplecticity_defect", dg.symplecticity_defect(S)))
        if res.blew_up_at is not None:
            rows.append(row(h, None, "blew_up_at", res.blew_up_at))
        return rows

    return ExperimentResult([r for rs in _parallel(one, cells, threads) for r in rs])


# -- orders ---------------------------------------------------------------------


def run_order(cfg: ExperimentConfig, seed: int | None = None, threads: int = 1) -> ExperimentResult:
    p = build_problem(cfg.problem, seed)
    steps = cfg.steps()

    def one(expr):
        c = _resolve(expr)
        row = _row_factory(expr, p)
        errs = dg.local_errors(c, p, steps, cfg.dps)
        rows = [row(h, None, "local_error", e) for h, e in zip(steps, errs)]
        try:
            order = dg.empirical_order(c, p, steps, dps=cfg.dps)
        except FitError:
            order = math.nan
        rows.append(row(None, None, "empirical_order", order))
        return rows

    return ExperimentResult([r for rs in _parallel(one, cfg.schemes, threads) for r in rs])


# -- work-precision ---------------------------------------------------------------


def _energy(p: SplitProblem):
    if p.kind is ProblemKind.HAMILTONIAN:
        return lambda y: 0.5 * float((y @ p.H @ y).real)
    return lambda y: float(np.vdot(y, p.H @ y).real)


def work_precision_curve(c: Composition, p: SplitProblem, t_final: float,
                         steps: Iterable[float], u0=None) -> list[tuple[float, int, int, int, float]]:
    """``(h, n_steps, stage cost, exponential cost, relative energy error)``.

    Each requested ``h`` is adjusted to ``t_final / n`` with integer ``n``.
    """
    energy = _energy(p)
    y0 = p.random_state() if u0 is None else u0
    e0 = energy(y0)
    per_step_stages = stage_count(c) if c.basic is BasicMethod.STRANG else c.n_stages
    per_step_exp = exponential_count(c, len(p.generators))
    out = []
    for n in sorted({max(1, round(t_final / h)) for h in steps}, reverse=True):
        h = t_final / n
        S = propagator(c, p.generators, h)
        with np.errstate(all="ignore"):
            y = np.linalg.matrix_power(S, n) @ y0
            err = abs(energy(y) - e0) / abs(e0)
        if not math.isfinite(err):
            err = math.inf
        out.append((h, n, per_step_stages * n, per_step_exp * n, err))
    return out


def equal_cost_errors(a: Composition, b: Composition, p: SplitProblem, t_final: float,
                      steps: Iterable[float], u0=None, count: int = 3
                      ) -> list[tuple[int, float, float]]:
    """``(stage cost, error of a, error of b)`` at ``a``'s ``count`` finest steps.

    ``b`` is run with the step count giving exactly the same number of
    stages, so no interpolation along its curve is needed.  That requires
    ``b``'s stages per step to divide ``a``'s.
    """
    sa, sb = stage_count(a), stage_count(b)
    if sa % sb:
        raise InvalidInputError(f"{b.name} has {sb} stages per step, which does not divide {sa}")
    finest = work_precision_curve(a, p, t_final, steps, u0)[:count]
    out = []
    for h, n, cost, _, err_a in finest:
        (_, _, cost_b, _, err_b), = work_precision_curve(b, p, t_final, [t_final / (n * sa // sb)], u0)
        out.append((cost, err_a, err_b))
    return out


def run_work_precision(cfg: ExperimentConfig, seed: int | None = None,
                       threads: int = 1) -> ExperimentResult:
    p = build_problem(cfg.problem, seed)
    u0 = p.random_state()

    def one(expr):
        c = _resolve(expr)
        if c == "exact":
            raise ConfigError("schemes: the exact flow has no cost")
        row = _row_factory(expr, p)
        curve = work_precision_curve(c, p, cfg.t_final, cfg.steps(), u0)
        rows = []
        for h, n, cost, cost_exp, err in curve:
            rows.append(row(h, n, "energy_error", err))
            rows.append(row(h, n, "cost_stages", cost))
            rows.append(row(h, n, "cost_exponentials", cost_exp))
        try:
            slope = pre_saturation_slope([x[2] for x in curve], [x[4] for x in curve])
        except FitError:
            slope = math.nan
        rows.append(row(None, None, "pre_saturation_order", slope))
        return rows

    return ExperimentResult([r for rs in _parallel(one, cfg.schemes, threads) for r in rs])


# -- coefficient verification -------------------------------------------------------


def verify_scheme(c: Composition, p: SplitProblem, grid: Sequence[float] = VERIFY_GRID,
                  dps: int | None = VERIFY_DPS) -> list[Check]:
    """Every check applicable to ``c``; see :func:`run_verify_coeffs`."""
    checks: list[Check] = []

    def add(name, value, limit, ok=None, kind="<="):
        passed = (value <= limit) if ok is None else ok
        checks.append(Check(c.name, name, float(value), f"{kind} {limit:g}", bool(passed)))

    add("consistency", consistency_defect(c), CLOSED_FORM_TOL)
    if c.basic is BasicMethod.STRANG and c.nominal_order >= 2:
        add("order_conditions", order_condition_residual(c), CLOSED_FORM_TOL)
    for name, value in closed_form_residuals(c).items():
        add(name, value, CLOSED_FORM_TOL)
    tags_ok = all(verify_tags(c).values()) and compute_tags(c.exact) == c.tags
    add("tags", 0.0 if tags_ok else 1.0, 0.0)

    if ALTERNATING_CONJUGATE in c.tags and c.basic is BasicMethod.STRANG:
        fit = dg.fit_modified_field(c, p.generators, dps=dps)
        add("fit_residual", fit.residual, dg.FIT_RELIABLE)
        closed = dg.closed_form_k(c)
        tol = max(10 * fit.residual, 1e-12)
        for key in ((1, 1), (3, 1), (4, 1)):
            add(f"fit_k{key[0]}{key[1]}", abs(fit.k(*key) - closed[key]), tol)

    try:
        order = dg.empirical_order(c, p, grid, dps=dps)
    except FitError:
        order = math.nan
    ok = math.isfinite(order) and abs(order - c.nominal_order) <= ORDER_TOL
    checks.append(Check(c.name, "empirical_order", order,
                        f"{c.nominal_order} +- {ORDER_TOL}", ok))

    if c.basic is BasicMethod.STRANG:
        n = stage_count(c)
        for order_, column in MINIMAL_ENTRIES.get(c.name, ()):
            expected = STAGE_TABLE[order_][column]
            checks.append(Check(c.name, f"stages_{column}_{order_}", n, f"== {expected}",
                                n == expected))
    if c.name in PRINTED_TABLES:
        add("printed_digits", printed_deviation(c.name), 1.0, kind="<")
    return checks


def run_verify_coeffs(cfg: ExperimentConfig, seed: int | None = None,
                      threads: int = 1) -> ExperimentResult:
    setup = cfg.problem or VERIFY_PROBLEM
    p = build_problem(setup, seed)
    grid = cfg.steps() or list(VERIFY_GRID)
    dps = cfg.dps if cfg.dps is not None else VERIFY_DPS
    names = cfg.schemes or list(CATALOG_NAMES)
    comps = []
    for expr in names:
        c = _resolve(expr)
        if c == "exact":
            raise ConfigError("schemes: 'exact' is not a composition")
        comps.append(c)
    checks = [ch for cs in _parallel(lambda c: verify_scheme(c, p, grid, dps), comps, threads)
              for ch in cs]
    rows = [Row(ch.scheme, p.kind.value, p.dim, p.seed, None, None, ch.name, ch.value)
            for ch in checks]
    return ExperimentResult(rows, checks)


def run_catalog_dump(cfg: ExperimentConfig, seed: int | None = None,
                     threads: int = 1) -> ExperimentResult:
    comps = [parse_scheme(s) for s in cfg.schemes] if cfg.schemes else None
    return ExperimentResult([], text=catalog_dump(comps))


RUNNERS = {
    "dh-scan": run_dh_scan,
    "longtime": run_longtime,
    "order": run_order,
    "work-precision": run_work_precision,
    "verify-coeffs": run_verify_coeffs,
    "catalog-dump": run_catalog_dump,
}


def run_experiment(cfg: ExperimentConfig, seed: int | None = None, threads: int = 1) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg, seed, threads)


def failure_report(result: ExperimentResult) -> str:
    lines = [f"{c.scheme}: {c.name} = {c.value!r} (required {c.threshold})"
             for c in result.failures()]
    return "\n".join(lines)
