import math

import numpy as np
import pytest

from hoflab.dirac import (
    VF_SMALL_FIELD,
    cone_slope,
    dirac_momentum,
    dirac_report,
    hessian_E1,
    k_to_symplectic,
    symplectic_to_k,
    verify_touching,
)
from hoflab.floquet import ContractError

CASES = [(0, 1), (1, 2), (1, 3), (2, 5), (1, 4)]


@pytest.mark.parametrize("p,q", CASES)
def test_touching(p, q):
    assert verify_touching(p, q) < 1e-8


@pytest.mark.parametrize("p,q", CASES)
def test_hessian(p, q):
    hm, hf = hessian_E1(p, q)
    assert np.max(np.abs(hm - hf)) / np.max(np.abs(hf)) < 1e-3


def test_chart_roundtrip():
    for q in (1, 2, 3, 4):
        k = symplectic_to_k(q, 0.013, -0.021)
        y, eta = k_to_symplectic(q, k)
        assert y == pytest.approx(0.013) and eta == pytest.approx(-0.021)
        assert symplectic_to_k(q, 0.0, 0.0) == pytest.approx(dirac_momentum(1, q))


def test_small_field_velocity():
    cs = cone_slope(0, 1)
    assert cs["fermi_velocity"] == pytest.approx(VF_SMALL_FIELD, rel=5e-3)
    assert VF_SMALL_FIELD == pytest.approx(3 ** -0.75)


def test_report_fields():
    rep = dirac_report(1, 2)
    d = rep.to_dict()
    for key in ("p", "q", "k_tilde", "residual", "slope_fit", "slope_formula_fermivel", "slope_formula_well",
                "hessian_measured", "hessian_formula"):
        assert key in d
    assert rep.matches != "none"


def test_no_touching_raises():
    # away from the Dirac momentum the zero-energy residual is large
    import hoflab.dirac as dm

    orig = dm.dirac_momentum
    try:
        dm.dirac_momentum = lambda p, q: (0.3, 0.1)
        with pytest.raises(ContractError):
            dm.verify_touching(1, 3)
    finally:
        dm.dirac_momentum = orig
