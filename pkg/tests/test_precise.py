import mpmath
import numpy as np
import pytest

from splitkit.errors import InvalidInputError
from splitkit.linalg import allclose, expm
from splitkit.precise import (
    PreciseGenerators,
    frobenius,
    poly_coefficients,
    precise_exact_flow,
    precise_generators,
    precise_local_errors,
    precise_propagator,
    to_complex,
    to_object,
)
from splitkit.schemes import catalog, propagator


def test_propagator_matches_double(hs4):
    g = hs4.generators
    pg = precise_generators(g, 32)
    for name in ("lt", "strang", "p4sc", "ac4-new"):
        S = to_complex(precise_propagator(catalog(name), pg, 0.37))
        assert allclose(S, propagator(catalog(name), g, 0.37), 1e-13)


def test_exact_flow_matches_double(hs4):
    E = to_complex(precise_exact_flow(hs4.generator_matrix, 0.5, 30))
    assert allclose(E, expm(hs4.generator_matrix, 0.5), 1e-13)


def test_local_errors_resolve_below_double_roundoff(hs4):
    g = hs4.generators
    errs = precise_local_errors(catalog("ac6-new"), g.generators, hs4.generator_matrix,
                                [1e-3, 2e-3], 40)
    assert 0 < errs[0] < 1e-16
    assert np.log2(errs[1] / errs[0]) == pytest.approx(7, abs=0.05)


def test_cache_returns_same_object(hs4):
    g = hs4.generators
    assert precise_generators(g, 30) is precise_generators(g, 30)
    assert precise_generators(g, 30) is not precise_generators(g, 31)


def test_low_precision_rejected(hs4):
    with pytest.raises(InvalidInputError):
        PreciseGenerators(hs4.generators, 10)


def test_poly_coefficients_recovers_polynomial():
    ctx = mpmath.mp.clone()
    ctx.dps = 40
    hs = [0.1 * k for k in range(1, 7)]
    C0, C2 = to_object(np.eye(2), ctx), to_object(np.array([[1, 2], [3, 4]]), ctx)
    mats = [C0 + C2 * ctx.mpf(h) ** 2 for h in hs]
    out = poly_coefficients(ctx, hs, mats, (0, 1, 2, 3))
    assert frobenius(out[2] - C2) < 1e-30
    assert frobenius(out[1]) < 1e-30
    with pytest.raises(InvalidInputError):
        poly_coefficients(ctx, hs[:2], mats[:2], (0, 1, 2))
