import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoflab.dos import (
    BandOverlapError,
    SpectralData,
    bump,
    chebyshev_coefficients,
    dos_curve,
    hex_weight,
    ids,
    ids_floquet,
    jackson,
    kpm_moments,
    kpm_trace,
    kpm_window,
    lambda_scaling,
    random_phase_vectors,
    rational_torus_mass,
    spectral_bound,
    spectrum_finite,
    torus_spectrum_clean,
    trace_formula_check,
    trace_formula_check_rational,
)
from hoflab.floquet import band_edges
from hoflab.lattice import Flux
from hoflab.operator import DisorderSpec, Region, build_hamiltonian


def test_ids_counts_ties_half():
    d = SpectralData("square", 0.0, (1, 2), "torus", None, np.array([-1.0, 0.0, 0.0, 1.0]), 1.0)
    assert ids(d, 0.0) == pytest.approx(2 / 2)
    assert ids(d, 0.5) == pytest.approx(3 / 2)
    assert ids(d, -2.0) == 0.0


@pytest.mark.parametrize("kind", ["square", "hex"])
def test_torus_ids_equals_band_count_in_gaps(kind):
    p, q, L = 1, 3, 12
    data = torus_spectrum_clean(kind, p, q, L)
    e = band_edges(kind, p, q)
    for j in range(e.shape[0] - 1):
        if e[j + 1, 0] - e[j, 1] > 1e-6:
            mu = 0.5 * (e[j, 1] + e[j + 1, 0])
            assert data.ids(mu) == pytest.approx(ids_floquet(kind, p, q, mu), abs=1e-12)


def test_dense_limit():
    op = build_hamiltonian("hex", Flux.rational(1, 2), Region.torus(102))
    with pytest.raises(ValueError):
        spectrum_finite(op)


def test_jackson_kernel():
    g = jackson(200)
    assert g[0] == pytest.approx(1.0)
    assert np.all(np.diff(g) <= 1e-15) and g[-1] >= 0


@given(st.integers(0, 2**31), st.integers(0, 50))
def test_random_phase_vectors(seed, r):
    a = random_phase_vectors(40, 3, seed, r)
    assert np.allclose(np.abs(a), 1.0)
    assert np.array_equal(a, random_phase_vectors(40, 3, seed, r))
    assert not np.array_equal(a, random_phase_vectors(40, 3, seed, r + 1))


def _small_op(lam=0.0):
    d = DisorderSpec.uniform(0, 1, lam, 5) if lam else None
    return build_hamiltonian("hex", Flux.rational(1, 4), Region.torus(8), d)


def test_kpm_moments_exact_with_basis_vectors():
    op = _small_op(0.3)
    s = spectral_bound(op)
    ev = np.linalg.eigvalsh(op.dense())
    mu = kpm_moments(op.matrix, 40, np.eye(op.dim, dtype=complex), s).sum(axis=0)
    exact = np.array([np.mean(np.cos(n * np.arccos(ev / s))) for n in range(40)])
    assert np.max(np.abs(mu - exact)) < 1e-12


def test_kpm_trace_smooth_function():
    op = _small_op(0.3)
    s = spectral_bound(op)
    ev = np.linalg.eigvalsh(op.dense())
    f = lambda E: np.exp(-4 * (E - 0.2) ** 2)  # noqa: E731
    mu = kpm_moments(op.matrix, 120, np.eye(op.dim, dtype=complex), s).sum(axis=0)
    est = kpm_trace(mu, chebyshev_coefficients(f, 120, s))[0]
    assert est == pytest.approx(np.mean(f(ev)), abs=1e-10)


def test_kpm_window_in_gaps():
    op = build_hamiltonian("hex", Flux.rational(1, 10), Region.torus(20))
    s = spectral_bound(op)
    ev = np.linalg.eigvalsh(op.dense())
    # basis vectors have unit norm; the estimator expects |r|^2 = N
    basis = math.sqrt(op.dim) * np.eye(op.dim, dtype=complex)[:, ::7]
    mu = kpm_moments(op.matrix, 3000, basis, s).mean(axis=0, keepdims=True)
    e = band_edges("hex", 1, 10)
    lo, hi = 0.5 * (e[10, 1] + e[11, 0]), 0.5 * (e[11, 1] + e[12, 0])
    frac, centre = kpm_window(mu, lo, hi, s)
    sel = ev[(ev > lo) & (ev < hi)]
    assert frac == pytest.approx(sel.size / ev.size, rel=0.05)
    assert centre == pytest.approx(sel.mean(), abs=2e-3)


@pytest.mark.parametrize("kind", ["square", "hex"])
def test_dos_curve_total_weight(kind):
    c = dos_curve(kind, Flux.rational(1, 4), 8)
    n_sites = 1 if kind == "square" else 2
    area = 1.0 if kind == "square" else 1.5 * math.sqrt(3)
    assert c.total() == pytest.approx(n_sites / area, rel=1e-12)
    assert np.all(c.stderr == 0)


def test_dos_curve_kpm_vs_histogram():
    d = DisorderSpec.uniform(0, 1, 0.2, 3)
    edges = np.linspace(-1.2, 1.3, 11)
    a = dos_curve("square", Flux.rational(1, 4), 16, d, R=2, edges=edges, method="histogram")
    b = dos_curve("square", Flux.rational(1, 4), 16, d, R=2, edges=edges, method="kpm", n_moments=400, n_vec=64)
    assert b.total() == pytest.approx(a.total(), rel=1e-3)
    assert np.max(np.abs(a.density - b.density)) < 0.1 * a.density.max()


def test_dos_curve_validation():
    with pytest.raises(ValueError):
        dos_curve("square", 0.0, 4, R=0)


def test_bump():
    f = bump(0.3, 0.1)
    assert f(0.3) == pytest.approx(1.0)
    assert f(0.41) == 0.0 and f(0.19) == 0.0
    assert 0 < f(0.35) < 1


def test_trace_small_instance():
    d = DisorderSpec.uniform(0, 1, 0.01, seed=2)
    rep = trace_formula_check("hex", 30, 30, d, R=4, lambdas=(0.01,), n_moments=1000)
    h = 2 * math.pi / 30
    assert rep.band_mass_expected == pytest.approx(hex_weight(h))
    assert rep.band_mass[0] == pytest.approx(hex_weight(h), rel=0.05)
    assert rep.band_center_shift[0] == pytest.approx(0.005, rel=0.5)
    assert abs(rep.residual[0]) < 5 * rep.residual_stderr[0] + 1e-6


def test_trace_overlap_error():
    with pytest.raises(BandOverlapError):
        trace_formula_check("hex", 30, 30, DisorderSpec.uniform(0, 1, 0.5, seed=2), R=1, lambdas=(0.5,))


def test_rational_weight_two_routes():
    rep = trace_formula_check_rational(1, 2, 120)
    assert rep.flux == (61, 120)
    assert rep.mass == pytest.approx(rational_torus_mass(1, 2, 120), rel=1e-12)
    assert rep.rel_err < 0.05


def test_lambda_scaling_quadratic():
    rep = lambda_scaling("hex", 30, 30, DisorderSpec.uniform(-0.5, 0.5, 0.0, seed=3), R=1)
    assert 1.7 <= rep.lambda_scaling_exponent <= 2.3
