import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoflab.lattice import Flux
from hoflab.operator import DisorderSpec, Region, build_hamiltonian
from hoflab.semiclassics import measured_clusters
from hoflab.transport import (
    BoxTooSmallError,
    FilterSpec,
    energy_filter,
    evolution_coefficients,
    evolve,
    free_square_state,
    laguerre_schedule,
    moments_and_cesaro,
    origin_index,
    required_box,
)


def _delta(op):
    e = np.zeros(op.dim, dtype=complex)
    e[origin_index(op)] = 1.0
    return e


def test_t_zero_is_identity():
    op = build_hamiltonian("hex", Flux.rational(1, 10), Region.box(20))
    psi = np.random.default_rng(0).normal(size=op.dim) + 0j
    assert np.array_equal(evolve(op, psi, 0.0), psi)


@given(st.floats(0.1, 15.0))
def test_free_lattice_oracle(t):
    L = required_box(1.0, t)
    op = build_hamiltonian("square", 0.0, Region.box(L))
    psi = evolve(op, _delta(op), t)
    assert np.max(np.abs(psi - free_square_state(L, t))) < 1e-12


def test_backward_evolution_inverts():
    op = build_hamiltonian("hex", Flux.rational(1, 12), Region.box(40), DisorderSpec.uniform(0, 1, 0.1, 1))
    psi0 = _delta(op)
    back = evolve(op, evolve(op, psi0, 6.0, check_box=False), -6.0, check_box=False)
    assert np.max(np.abs(back - psi0)) < 1e-12


def test_norm_drift_long_time():
    op = build_hamiltonian("square", Flux.rational(1, 20), Region.box(required_box(1.0, 100.0)))
    psi = evolve(op, _delta(op), 100.0)
    assert abs(np.vdot(psi, psi).real - 1.0) < 1e-9


def test_box_too_small():
    op = build_hamiltonian("square", 0.0, Region.box(30))
    with pytest.raises(BoxTooSmallError, match="need L >="):
        evolve(op, _delta(op), 20.0)


def test_evolution_coefficient_tail():
    c = evolution_coefficients(50.0, 1.0)
    assert abs(c[-1]) < 1e-13 and c.size > 50


def test_full_filter_is_delta():
    op = build_hamiltonian("hex", Flux.rational(1, 10), Region.box(20))
    f = energy_filter(op, FilterSpec(full=True))
    assert np.array_equal(f.psi, _delta(op)) and f.mass == 1.0


def _hex_gap(q):
    cl = measured_clusters("hex", 1, q, 1e-4)
    i0 = int(np.argmin(np.abs(cl.mean(axis=1))))
    return cl, i0


def test_gap_filter_two_routes():
    cl, i0 = _hex_gap(40)
    lo, hi = cl[i0 + 1, 1], cl[i0 + 2, 0]
    zeta = FilterSpec(0.5 * (lo + hi), 0.45 * (hi - lo))
    dense = energy_filter(build_hamiltonian("hex", Flux.rational(1, 40), Region.box(44)), zeta)
    cheb = energy_filter(build_hamiltonian("hex", Flux.rational(1, 40), Region.box(90)), zeta)
    assert dense.method == "dense" and cheb.method == "chebyshev"
    assert dense.mass < 1e-6 and cheb.mass < 1e-6
    assert cheb.approx_error < 1e-8


def test_band_filter_mass_matches_weight():
    q = 60
    cl, i0 = _hex_gap(q)
    b = cl[i0 + 1]
    g = min(b[0] - cl[i0, 1], cl[i0 + 2, 0] - b[1])
    f = energy_filter(build_hamiltonian("hex", Flux.rational(1, q), Region.box(90)), FilterSpec(b.mean(), 0.5 * g))
    # band 1 carries h/(pi |b1 ^ b2|) states per area, i.e. a fraction 1/q of all sites
    assert f.mass == pytest.approx(1 / q, rel=0.10)


def test_laguerre_schedule_exact_for_polynomials():
    times, plan = laguerre_schedule([3.0], u_max=1e9)
    keep, drop = plan[3.0]
    assert not drop
    # (1/T) int e^{-t/T} (1 + t^2/4) dt = 1 + T^2/2
    val = sum(w * (1 + t * t / 4) for _, t, w in keep)
    assert val == pytest.approx(1 + 9 / 2, rel=1e-12)


def test_moments_free_lattice_small():
    T = [1.0, 2.0]
    t_max = laguerre_schedule(T)[0][-1]
    op = build_hamiltonian("square", 0.0, Region.box(required_box(1.0, t_max)))
    run = moments_and_cesaro(op, FilterSpec(full=True), T, (2,))
    for Tv, c in zip(run.T_ladder, run.cesaro[2]):
        assert c == pytest.approx(1 + Tv * Tv / 2, rel=1e-6)
    assert run.norm_drift < 1e-9 and run.energy_drift < 1e-9
    assert max(run.outside_mass) < 1e-8
    assert -0.2 <= run.beta[2] <= 1.2


def test_gap_filtered_cesaro_small():
    cl, i0 = _hex_gap(40)
    lo, hi = cl[i0 + 1, 1], cl[i0 + 2, 0]
    zeta = FilterSpec(0.5 * (lo + hi), 0.45 * (hi - lo))
    op = build_hamiltonian("hex", Flux.rational(1, 40), Region.box(90))
    run = moments_and_cesaro(op, zeta, [0.25, 0.5], (2,))
    assert all(c < 1e-4 for c in run.cesaro[2])


def test_ladder_shrinks_with_warning():
    op = build_hamiltonian("square", 0.0, Region.box(81))
    with pytest.warns(UserWarning, match="dropped"):
        run = moments_and_cesaro(op, FilterSpec(full=True), [0.5, 1.0, 50.0], (2,))
    assert run.T_ladder == [0.5]
    with pytest.raises(BoxTooSmallError), pytest.warns(UserWarning):
        moments_and_cesaro(op, FilterSpec(full=True), [50.0], (2,))


def test_determinism():
    d = DisorderSpec.uniform(-0.5, 0.5, 0.1, 4)
    op = build_hamiltonian("hex", Flux.rational(1, 12), Region.box(91), d)
    a = moments_and_cesaro(op, FilterSpec(full=True), [0.5], (2, 4))
    op2 = build_hamiltonian("hex", Flux.rational(1, 12), Region.box(91), d)
    b = moments_and_cesaro(op2, FilterSpec(full=True), [0.5], (2, 4))
    assert a.to_dict() == b.to_dict()
