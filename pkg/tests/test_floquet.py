import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoflab.dos import torus_spectrum_clean
from hoflab.floquet import (
    ContractError,
    band_edges,
    bands,
    butterfly,
    chambers,
    char_poly_mt,
    floquet_family,
    floquet_hex,
    g_extremes,
    g_q,
    mt_hat_matrix,
    mt_matrix,
    spectrum_from_chambers,
    supercell_bloch,
)

pq = st.tuples(st.integers(0, 7), st.integers(1, 7)).filter(lambda t: math.gcd(*t) == 1 and t[0] < t[1] or t == (0, 1))
angles = st.floats(0, 2 * math.pi, allow_nan=False)


@given(pq, angles, angles)
def test_hex_floquet_chiral(t, k1, k2):
    p, q = t
    ev = np.linalg.eigvalsh(floquet_hex(p, q, (k1, k2)))
    assert np.max(np.abs(ev + ev[::-1])) < 1e-12


@given(pq, angles, angles)
def test_mt_blocks_isospectral(t, k1, k2):
    p, q = t
    a = np.linalg.eigvalsh(mt_matrix(p, q, (k1, k2)))
    b = np.linalg.eigvalsh(mt_hat_matrix(p, q, (k1, k2)))
    assert np.max(np.abs(a - b)) < 1e-11


@given(pq, angles, angles)
def test_chambers_k_dependence(t, k1, k2):
    p, q = t
    d = chambers(p, q, n=8)
    lam = np.array([-2.5, 0.3, 4.1])
    lhs = char_poly_mt(p, q, (k1, k2), lam) + g_q(q, (k1, k2))
    assert np.max(np.abs(lhs - d.poly(lam))) < 1e-9 * max(1.0, np.max(np.abs(d.poly(lam))))


@pytest.mark.parametrize("q", range(1, 9))
def test_chambers_anchor_and_leading(q):
    for p in range(q):
        if math.gcd(p, q) != 1:
            continue
        d = chambers(p, q)
        assert abs(d.f_at_minus3 - 3.0) < 1e-9
        assert abs(d.leading - (-1) ** q) < 1e-9
        assert d.poly.degree == q


def test_g_extremes():
    lo, hi = g_extremes(3)
    assert lo == pytest.approx(-6.0) and hi == pytest.approx(3.0)


@given(pq, st.sampled_from(["square", "hex"]), angles, angles)
def test_branches_inside_band_edges(t, kind, k1, k2):
    p, q = t
    ev = np.linalg.eigvalsh(floquet_family(kind, p, q)((k1, k2)))
    e = band_edges(kind, p, q)
    assert np.all(ev >= e[:, 0] - 1e-12) and np.all(ev <= e[:, 1] + 1e-12)


@pytest.mark.parametrize("kind,p,q", [("square", 1, 3), ("hex", 1, 3), ("square", 2, 5), ("hex", 1, 4)])
def test_band_edges_match_sampled(kind, p, q):
    bs = bands(floquet_family(kind, p, q), 12 * q, q)
    e = band_edges(kind, p, q)
    assert np.max(np.abs(bs.intervals - e)) < 1e-7


def test_bands_resolution_floor():
    with pytest.raises(ValueError):
        bands(floquet_family("hex", 1, 5), 24, 5)


@pytest.mark.parametrize("kind", ["square", "hex"])
def test_supercell_matches_floquet_spectrum(kind):
    # the real-space supercell Bloch matrices and the Floquet matrices sweep the same bands
    p, q = 1, 4
    e = band_edges(kind, p, q)
    ths = 2 * np.pi * np.arange(10) / 10
    ev = np.array([np.linalg.eigvalsh(supercell_bloch(kind, p, q, (a, b))) for a in ths for b in ths])
    assert np.all(ev.min(axis=0) >= e[:, 0] - 1e-12)
    assert np.all(ev.max(axis=0) <= e[:, 1] + 1e-12)
    assert np.max(np.abs(ev.min(axis=0) - e[:, 0])) < 0.05


@pytest.mark.parametrize("kind", ["square", "hex"])
def test_torus_block_route_matches_dense(kind):
    from hoflab.lattice import Flux
    from hoflab.operator import Region, build_hamiltonian

    dense = np.linalg.eigvalsh(build_hamiltonian(kind, Flux.rational(1, 3), Region.torus(6)).dense())
    block = torus_spectrum_clean(kind, 1, 3, 6).eigenvalues
    assert np.max(np.abs(np.sort(block) - dense)) < 1e-12


def test_spectrum_from_chambers_matches_edges():
    p, q = 1, 3
    hexi = spectrum_from_chambers(chambers(p, q))["hex_intervals"]
    e = band_edges("hex", p, q)
    lo = np.sort(e[:, 0])
    assert hexi[0][0] == pytest.approx(lo[0], abs=1e-9)
    assert hexi[-1][1] == pytest.approx(e[:, 1].max(), abs=1e-9)


def test_butterfly_records():
    recs = butterfly("square", 4)
    assert {(r.p, r.q) for r in recs} == {(0, 1), (1, 2), (1, 3), (2, 3), (1, 4), (3, 4)}
    for r in recs:
        assert -1 - 1e-12 <= r.lo <= r.hi <= 1 + 1e-12
    # q = 2 square: two bands touching at zero merge into one interval
    assert sum(1 for r in recs if (r.p, r.q) == (1, 2)) == 1
    with pytest.raises(ValueError):
        butterfly("hex", 121)


def test_chambers_contract_error_type():
    assert issubclass(ContractError, RuntimeError)
