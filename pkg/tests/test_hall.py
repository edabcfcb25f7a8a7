import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoflab.floquet import ContractError, band_edges
from hoflab.hall import (
    GapClosedError,
    _zero_pair,
    chern_band,
    gap_between,
    gap_window,
    hall_from_count,
    hall_in_gap,
    ids_at_gap,
    ids_vs_flux,
    near_rational_fluxes,
    streda,
)


def test_gap_between_picks_widest():
    edges = np.array([[0.0, 1.0], [1.5, 2.0], [2.1, 3.0]])
    assert gap_between(edges, 0.5, 2.9) == (1.0, 1.5)
    with pytest.raises(GapClosedError):
        gap_between(edges, 3.1, 4.0)


def test_gap_window_hex_tracks_levels():
    h = 2 * math.pi / 40
    lo, hi = gap_window("hex", 1, h)
    assert 0 < lo < hi
    lo0, hi0 = gap_window("hex", 0, h, below_zero=True)
    assert lo0 < 0 and hi0 == 0.0


def test_ids_sample_branch_count():
    e = band_edges("square", 1, 5)
    s = ids_at_gap("square", 1, 5, (e[0, 1] - 1e-9, e[1, 0] + 1e-9))
    assert s.branches_below == 1
    assert s.ids == pytest.approx(1 / 5)


@pytest.mark.parametrize("kind,p,q,band,expected", [("square", 1, 3, 0, 1), ("square", 1, 5, 0, 1)])
def test_chern_lowest_band(kind, p, q, band, expected):
    assert chern_band(kind, p, q, band) == expected


def test_tknn_diophantine_square():
    # square lattice, flux p/q: the Hall integer m of gap r solves r = q s + p m with |m| <= q/2
    p, q = 2, 5
    for r in (1, 2):
        m = hall_from_count("square", p, q, r)
        s = (r - p * m) / q
        assert s == int(s) and abs(m) <= q / 2


def test_hex_above_zero_level():
    e = band_edges("hex", 1, 5)
    assert hall_in_gap("hex", 1, 5, 6) == 1
    assert hall_in_gap("hex", 1, 5, (0.0, e[6, 1])) == 1


@given(st.floats(0.0, 1.0), st.integers(-6, 6))
def test_streda_recovers_slope(c0, m):
    # synthetic affine IDS: slope m/(2 pi |b|) must be returned as m
    from hoflab.hall import IDSSample

    samples = []
    for q in (40, 42, 44):
        h = 2 * math.pi / q
        val = c0 + m * h / (2 * math.pi)
        samples.append(IDSSample((1, q), h, 0.0, (0, 0), 0, val, val))
    res = streda("square", samples)
    assert res.m == m
    assert res.two_pi_cH == pytest.approx(m, abs=1e-9)


def test_streda_rejects_nonaffine():
    from hoflab.hall import IDSSample

    samples = [IDSSample((1, q), 2 * math.pi / q, 0, (0, 0), 0, v, v) for q, v in ((40, 0.1), (42, 0.3), (44, 0.1))]
    with pytest.raises(ContractError):
        streda("square", samples)


def test_streda_small_ladder_square():
    samples = ids_vs_flux("square", 1, [Fraction(1, q) for q in (30, 32, 34)])
    assert streda("square", samples, 1).m == 1


def test_zero_pair_spans_zero_cluster():
    assert _zero_pair(1, 48) == (47, 49)
    assert _zero_pair(61, 120) == (118, 122)


def test_streda_needs_three_samples():
    with pytest.raises(ValueError):
        ids_vs_flux("square", 1, [Fraction(1, 30), Fraction(1, 32)])


def test_near_rational_fluxes():
    assert near_rational_fluxes(1, 2, [120]) == [Fraction(61, 120)]
