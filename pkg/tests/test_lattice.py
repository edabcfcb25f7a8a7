import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoflab.lattice import Flux, build_lattice, edge_phase, flux_from_field, hop_phase, plaquette_loops


def test_square_geometry():
    lat = build_lattice("square")
    assert lat.n_sites == 1 and lat.cell_area == 1.0
    assert lat.edge("up").offset == (0, 1)
    assert lat.edge("right").offset == (1, 0)


def test_hex_geometry():
    lat = build_lattice("hex")
    b = np.array(lat.basis)
    assert abs(abs(np.linalg.det(b)) - lat.cell_area) < 1e-14
    assert lat.cell_area == pytest.approx(3 * math.sqrt(3) / 2)
    # every bond has unit length
    for e in lat.edge_types:
        x0 = lat.position(0, 0, e.init_site)
        x1 = lat.position(*e.offset, e.term_site)
        assert np.linalg.norm(x1 - x0) == pytest.approx(1.0, abs=1e-14)


def test_hopping_magnitudes():
    assert build_lattice("square").hop == 0.25
    assert build_lattice("hex").hop == pytest.approx(1 / 3)


def test_unknown_kind():
    with pytest.raises(ValueError):
        build_lattice("kagome")


def test_square_edge_phases():
    lat = build_lattice("square")
    h = 0.7
    assert edge_phase(lat, "up", (3, 5), h) == pytest.approx(h / 2 * 3)
    assert edge_phase(lat, "right", (3, 5), h) == pytest.approx(-h / 2 * 5)


@given(
    kind=st.sampled_from(["square", "hex"]),
    g1=st.integers(-50, 50),
    g2=st.integers(-50, 50),
    h=st.floats(-6.0, 6.0, allow_nan=False),
)
def test_plaquette_flux(kind, g1, g2, h):
    lat = build_lattice(kind)
    for loop in plaquette_loops(lat, (g1, g2)):
        total = sum(hop_phase(lat, loop[i], loop[(i + 1) % len(loop)], h) for i in range(len(loop)))
        assert abs(total - h) < 1e-9 * max(1.0, abs(g1) + abs(g2))


@given(st.integers(0, 40), st.integers(1, 40))
def test_flux_rational_roundtrip(p, q):
    f = Flux.rational(p, q)
    fr = Fraction(p, q)
    assert (f.p, f.q) == (fr.numerator, fr.denominator)
    assert f.hbar == pytest.approx(p / q)


def test_flux_validation():
    with pytest.raises(ValueError):
        Flux(1.0, 1, None)
    with pytest.raises(ValueError):
        Flux(2 * math.pi / 3, 2, 4)
    with pytest.raises(ValueError):
        Flux(1.0, 1, 3)


def test_flux_from_field():
    lat = build_lattice("hex")
    assert flux_from_field(lat, 2.0).value == pytest.approx(2.0 * lat.cell_area)
