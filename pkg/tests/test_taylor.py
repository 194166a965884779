import numpy as np
import pytest

from spillsim.taylor import (
    EXPANSION_NAMES,
    PolynomialMapping,
    apply_expansion,
    bilinear_mapping,
    coefficients_from_partials,
    direct_recursion,
    expansion_coefficients,
    finite_diff_partials,
    linear_mapping,
    taylor_propagate,
)

# Catalog mappings exercised everywhere below: linear forms, the bilinear
# product, mixed multilinear forms, and genuinely cubic ones.
CATALOG = {
    "identity_y": linear_mapping(y=1.0),
    "pure_w": linear_mapping(w=1.0),
    "affine": linear_mapping(const=0.3, w=1.2, y=0.7, v=-0.4),
    "bilinear_wy": bilinear_mapping(),
    "bilinear_wv": PolynomialMapping({(1, 0, 1): 1.0}),
    "quadratic_w": PolynomialMapping({(2, 0, 0): 1.0}),
    "multilinear_mix": PolynomialMapping(
        {(0, 0, 0): 0.1, (1, 0, 0): 0.5, (0, 1, 0): 0.8, (0, 0, 1): 0.2, (1, 1, 0): -0.3, (1, 0, 1): 0.4}
    ),
    "cubic": PolynomialMapping({(1, 1, 1): 0.2, (0, 2, 0): 0.3, (3, 0, 0): 0.1, (0, 1, 0): 0.9}),
}

GENERIC_BASELINES = [(0.7, 0.3), (-1.2, 0.9), (0.0, 0.0), (2.5, -0.5)]


def test_identity_mapping_coefficients():
    coeffs = expansion_coefficients(CATALOG["identity_y"], y0=1.7, v0=0.4).by_name()
    assert coeffs == {"w": 0.0, "y_prev": 1.0, "v": 0.0, "w_y_prev": 0.0, "w_v": 0.0, "const": 0.0}


def test_pure_w_mapping_coefficients():
    coeffs = expansion_coefficients(CATALOG["pure_w"], y0=0.7, v0=0.1).by_name()
    assert coeffs == {"w": 1.0, "y_prev": 0.0, "v": 0.0, "w_y_prev": 0.0, "w_v": 0.0, "const": 0.0}


def test_bilinear_mapping_coefficients():
    # S = w*y at baseline y0: the direct w term cancels against the
    # recentering, leaving exactly the interaction term.
    y0 = 1.3
    coeffs = expansion_coefficients(CATALOG["bilinear_wy"], y0=y0, v0=0.2).by_name()
    assert coeffs["w"] == pytest.approx(0.0, abs=1e-15)
    assert coeffs["w_y_prev"] == 1.0
    assert coeffs["y_prev"] == 0.0 and coeffs["v"] == 0.0 and coeffs["const"] == 0.0
    # the expansion therefore reproduces next = w * y for any (w, y):
    got = apply_expansion(expansion_coefficients(CATALOG["bilinear_wy"], y0, 0.2), 1.0, -2.0, 5.0)
    assert got == -2.0


def test_binary_treatment_absorbs_quadratic_term():
    coeffs = expansion_coefficients(CATALOG["quadratic_w"], y0=0.5, v0=0.5).by_name()
    assert coeffs["w"] == 1.0  # half the second derivative
    for w in (0.0, 1.0):
        assert apply_expansion(expansion_coefficients(CATALOG["quadratic_w"], 0.5, 0.5), w, 0.5, 0.5) == w**2


@pytest.mark.parametrize("name", sorted(CATALOG))
@pytest.mark.parametrize("baseline", GENERIC_BASELINES)
def test_finite_differences_match_exact_partials(name, baseline):
    mapping = CATALOG[name]
    y0, v0 = baseline
    at = (0.0, y0, v0)
    fd = finite_diff_partials(mapping, y0, v0, h=1e-4)
    exact = {
        "dx": mapping.partial((1, 0, 0), at),
        "dy": mapping.partial((0, 1, 0), at),
        "dz": mapping.partial((0, 0, 1), at),
        "dxx": mapping.partial((2, 0, 0), at),
        "dxy": mapping.partial((1, 1, 0), at),
        "dxz": mapping.partial((1, 0, 1), at),
    }
    for key, val in exact.items():
        tol = 1e-8 if key in ("dx", "dy", "dz") else 1e-6
        assert fd[key] == pytest.approx(val, abs=tol), f"{name}.{key}"


@pytest.mark.parametrize("name", sorted(CATALOG))
@pytest.mark.parametrize("baseline", GENERIC_BASELINES)
def test_coefficients_from_finite_differences_close(name, baseline):
    mapping = CATALOG[name]
    y0, v0 = baseline
    exact = expansion_coefficients(mapping, y0, v0)
    fd = coefficients_from_partials(finite_diff_partials(mapping, y0, v0), mapping.value(0.0, y0, v0), y0, v0)
    assert np.allclose(exact.values, fd.values, atol=1e-4)


def test_constant_mapping_all_partials_zero():
    mapping = linear_mapping(const=4.2)
    fd = finite_diff_partials(mapping, 1.0, 1.0)
    assert all(v == pytest.approx(0.0, abs=1e-10) for v in fd.values())


def test_finite_diff_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_diff_partials(CATALOG["affine"], 0.0, 0.0, h=0.0)


MULTILINEAR = ["identity_y", "pure_w", "affine", "bilinear_wy", "bilinear_wv", "quadratic_w", "multilinear_mix"]


@pytest.mark.parametrize("name", MULTILINEAR)
def test_multilinear_propagation_exact_over_ten_rounds(name):
    # No surviving remainder: the expansion matches the direct recursion
    # round for round.
    mapping = CATALOG[name]
    rng = np.random.default_rng(31)
    w_seq = (rng.random(10) < 0.5).astype(float)
    v_seq = rng.normal(size=10)
    base_v = rng.normal(size=10) * 0.3
    y_start = 0.8
    direct = direct_recursion(mapping, y_start, w_seq, v_seq)
    expanded = taylor_propagate(mapping, y_start, w_seq, v_seq, baseline_v_seq=base_v)
    assert np.allclose(direct, expanded, atol=1e-10, rtol=0)


def test_cubic_mapping_leaves_remainder():
    # A mapping with curvature in (y, v) is not reproduced exactly once the
    # trajectory leaves the baseline.
    mapping = CATALOG["cubic"]
    w_seq = np.ones(6)
    v_seq = np.full(6, 1.5)
    direct = direct_recursion(mapping, 1.0, w_seq, v_seq)
    expanded = taylor_propagate(mapping, 1.0, w_seq, v_seq)
    assert not np.allclose(direct, expanded, atol=1e-6)


def test_expansion_names_stable():
    coeffs = expansion_coefficients(CATALOG["affine"], 0.0, 0.0)
    assert tuple(coeffs.names) == EXPANSION_NAMES


def test_mapping_validation():
    with pytest.raises(ValueError):
        PolynomialMapping({(2, 1, 1): 1.0})  # degree 4
    with pytest.raises(ValueError):
        PolynomialMapping({(1, 0, 0): float("inf")})
