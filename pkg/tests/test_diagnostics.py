import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitkit.diagnostics import (
    OnsetKind,
    SpectrumLaw,
    check_observables,
    closed_form_k,
    decade_ratio,
    default_fit_grid,
    dh_scan,
    eigenvalue_convergence,
    empirical_order,
    find_hstar,
    fit_modified_field,
    local_errors,
    longtime_run,
    modified_generator,
    precision_floor,
    realness_defect,
    spectrum_symmetry_defect,
    superaction_series,
    symplecticity_defect,
    trend_slope,
    unitarity_defect,
    unitarity_defects,
)
from splitkit.errors import BranchCutError, FitError, InvalidInputError, UnsupportedError
from splitkit.problems import exact_flow
from splitkit.schemes import CATALOG_NAMES, catalog, make_composition, propagator

AC_STRANG = ["ac4-s1", "ac4-s2", "ac4-s3", "ac4-new", "ac5-new", "ac6-new", "ac6-scsc", "ac8-scsc"]


def test_unitarity_defect_of_exact_flow(hs4):
    assert abs(unitarity_defect(exact_flow(hs4, 3.0))) < 1e-13


def test_unitarity_defect_sign():
    assert unitarity_defect(np.diag([1.1, 0.5])) == pytest.approx(0.1)
    assert unitarity_defect(np.diag([0.9, 0.5])) == pytest.approx(-0.1)
    d = unitarity_defects(np.array([[1, 5], [0, 1]]))
    assert d.absolute == 0 and d.operator > 1


@given(st.floats(0.01, 3.0))
@settings(max_examples=20, deadline=None)
def test_real_maps_have_conjugation_closed_spectra(h):
    from splitkit.problems import gen_real_symmetric
    from splitkit.schemes import GeneratorSet
    p = gen_real_symmetric(5, 0)
    g = GeneratorSet([p.parts[0].real, p.parts[1].real])
    R = propagator(catalog("strang"), g, h)
    scale = max(1.0, np.abs(np.linalg.eigvals(R)).max())
    assert spectrum_symmetry_defect(R, SpectrumLaw.CONJ_CLOSED) < 1e-10 * scale


def test_conj_inv_law_for_unitary_map(hs4):
    U = exact_flow(hs4, 1.3)
    assert spectrum_symmetry_defect(U, "conj-inv-closed") < 1e-12
    with pytest.raises(InvalidInputError):
        spectrum_symmetry_defect(np.zeros((2, 2)), "conj-inv-closed")


def test_symplecticity(ham3):
    assert symplecticity_defect(propagator(catalog("ac4-new"), ham3.generators, 0.7)) < 1e-12
    assert symplecticity_defect(2 * np.eye(4)) > 1
    with pytest.raises(InvalidInputError):
        symplecticity_defect(np.eye(3))


def test_modified_generator_recovers_hamiltonian(hs4):
    G = modified_generator(exact_flow(hs4, 0.2), 0.2)
    assert np.allclose(G, hs4.H, atol=1e-12)
    assert realness_defect(G) < 1e-12
    with pytest.raises(BranchCutError):
        modified_generator(-np.eye(2), 1.0)
    with pytest.raises(InvalidInputError):
        modified_generator(np.eye(2), 0)


@pytest.mark.parametrize("name", ["ac4-new", "ac6-new"])
def test_ac_modified_generator_has_real_spectrum(hs8, name):
    S = propagator(catalog(name), hs8.generators, 0.01)
    assert realness_defect(modified_generator(S, 0.01)) <= 1e-12


def test_empirical_order_double_precision(hs4):
    grid = np.geomspace(0.02, 0.2, 6)
    assert empirical_order(catalog("strang"), hs4, grid) == pytest.approx(2, abs=0.1)
    assert empirical_order(catalog("ac4-new"), hs4, grid) == pytest.approx(4, abs=0.2)


def test_empirical_order_precise(hs4):
    grid = np.geomspace(1e-3, 1e-1, 8)
    assert empirical_order(catalog("ac6-new"), hs4, grid, dps=32) == pytest.approx(6, abs=0.1)


def test_empirical_order_floor(hs4):
    with pytest.raises(FitError):
        empirical_order(catalog("ac8-scsc"), hs4, np.geomspace(1e-4, 1e-3, 5))
    with pytest.raises(InvalidInputError):
        empirical_order(catalog("strang"), hs4, [0.1, 0.2, 0.3])
    assert precision_floor(None) == 1e-14 and precision_floor(40) == 1e-38


def test_local_errors_agree_between_paths(hs4):
    grid = [0.05, 0.1]
    a = local_errors(catalog("p4sc"), hs4, grid)
    b = local_errors(catalog("p4sc"), hs4, grid, dps=30)
    assert np.allclose(a, b, rtol=1e-6)


def test_eigenvalue_convergence(hs8):
    fit = eigenvalue_convergence(catalog("ac4-new"), hs8, np.geomspace(0.02, 0.4, 8))
    assert fit.rate >= 4 - 0.2


def test_eigenvalue_convergence_needs_unitary(ham3):
    with pytest.raises(InvalidInputError):
        eigenvalue_convergence(catalog("strang"), ham3, [0.1, 0.2, 0.3])


@pytest.mark.parametrize("name", AC_STRANG)
def test_fit_matches_closed_forms(hs4, name):
    c = catalog(name)
    fit = fit_modified_field(c, hs4.generators)
    assert fit.reliable
    cf = closed_form_k(c)
    tol = max(10 * fit.residual, 1e-12)
    for key in ((1, 1), (3, 1), (4, 1)):
        assert abs(fit.coefficients[key] - cf[key]) <= tol, key


def test_fit_of_strang_is_m_plus_y3(hs4):
    fit = fit_modified_field(catalog("strang"), hs4.generators)
    assert fit.k(1) == pytest.approx(1, abs=1e-12)
    assert fit.k(3) == pytest.approx(1, abs=1e-10)
    assert abs(fit.k(4)) < 1e-10


def test_fit_validation(hs4):
    with pytest.raises(UnsupportedError):
        fit_modified_field(catalog("lt"), hs4.generators)
    with pytest.raises(InvalidInputError):
        fit_modified_field(catalog("strang"), hs4.generators, max_grade=5)
    assert len(default_fit_grid(hs4.generators)) == 8


def test_closed_form_values():
    c = make_composition("two", "strang", (0.25, 0.75), 2)
    k = closed_form_k(c)
    assert k[(1, 1)] == pytest.approx(1)
    assert k[(3, 1)] == pytest.approx(0.25**3 + 0.75**3)
    assert k[(4, 1)] == pytest.approx(0.5 * (0.75 * 0.25**3 - 0.75**3 * 0.25))


def test_find_hstar_exact_controls(hs4):
    r = find_hstar(catalog("strang"), hs4)
    assert r.onset in (OnsetKind.NONE, OnsetKind.COLLISION)
    assert r.h_star is not None and r.h_star > 0


def test_find_hstar_power_law(rs10):
    r = find_hstar(catalog("p4pal"), rs10)
    assert r.onset is OnsetKind.POWER_LAW
    assert r.h_star is None and r.exponent > 0 and r.extrapolated_min > 0


def test_dh_scan_shape(hs4):
    out = dh_scan(catalog("p3sc"), hs4, [0.1, 0.2])
    assert [h for h, _ in out] == [0.1, 0.2]


def test_longtime_exact_is_flat(ham3):
    res = longtime_run("exact", ham3, 2.5, 500,
                       observables=["hamiltonian_energy", "actions", "imaginary_part_norm"])
    assert res.blew_up_at is None
    # only roundoff accumulates over 500 steps
    assert np.max(res.deviation("hamiltonian_energy")) < 1e-10
    assert np.max(res.deviation("actions")) < 1e-10
    assert res.series["actions"].shape == (501, 3)


def test_longtime_blow_up(ham3):
    res = longtime_run(10 * np.eye(6), ham3, 1.0, 200, observables=["state_norm"])
    assert res.blew_up_at is not None
    assert math.isinf(res.series["state_norm"][-1])


def test_observable_checks(hs4, ham3):
    with pytest.raises(InvalidInputError):
        check_observables(hs4, ["actions"])
    with pytest.raises(InvalidInputError):
        check_observables(ham3, ["energy"])
    with pytest.raises(InvalidInputError):
        check_observables(hs4, ["bogus"])
    assert check_observables(hs4, ["mass", "energy"]) == ["mass", "energy"]


def test_decade_ratio_and_trend():
    assert decade_ratio(np.ones(101)) == 1.0
    assert decade_ratio(np.arange(101.0)) > 5
    assert decade_ratio(np.r_[0, np.zeros(50), np.full(50, np.inf)]) == math.inf
    assert abs(trend_slope(np.ones(50))) < 1e-12
    with pytest.raises(InvalidInputError):
        decade_ratio([1, 2, 3])


def test_superactions_conserved_by_exact_flow(hm10):
    out = superaction_series("exact", hm10, 0.5, 20)
    assert len(out) == 4
    for series in out.values():
        assert np.ptp(series) < 1e-12
    total = sum(s[0] ** 2 for s in out.values())
    assert total == pytest.approx(1.0)


def test_precise_unitarity_defect(hs4):
    from splitkit.diagnostics import precise_unitarity_defect
    d_ac = precise_unitarity_defect(catalog("ac4-new"), hs4, 0.01, 40)
    d_pal = precise_unitarity_defect(catalog("p4pal"), hs4, 0.01, 40)
    assert abs(d_ac) < 1e-35
    assert d_pal > 1e-30
    double = unitarity_defect(propagator(catalog("p4pal"), hs4.generators, 0.5))
    assert precise_unitarity_defect(catalog("p4pal"), hs4, 0.5, 30) == pytest.approx(double, rel=1e-6)


AC_ALL = [n for n in CATALOG_NAMES
          if "alternating-conjugate" in catalog(n).tags]


@pytest.mark.parametrize("name", AC_ALL)
def test_every_ac_scheme_has_hstar_on_hermitian(hs10, name):
    r = find_hstar(catalog(name), hs10)
    assert r.h_star is not None and r.h_star > 0
    assert all(d <= 1e-12 for h, d in r.scan if h < r.h_star)


@pytest.mark.parametrize("name", [n for n in AC_ALL if n not in ("ac2", "ac4-new")])
def test_ac_hstar_on_real_symmetric(rs10, name):
    r = find_hstar(catalog(name), rs10)
    assert r.h_star is not None and r.h_star > 0


@pytest.mark.parametrize("name", ["ac2", "ac4-new"])
def test_non_symmetric_ac_schemes_leave_circle_on_real_split(rs10, name):
    # the real split is non-symmetric, so these two lose the unit circle at every h
    from splitkit.diagnostics import precise_unitarity_defect
    r = find_hstar(catalog(name), rs10)
    assert r.onset is OnsetKind.POWER_LAW
    assert precise_unitarity_defect(catalog(name), rs10, 1e-3, 50) > 1e-45
