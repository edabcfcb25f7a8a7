import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoflab.lattice import Flux
from hoflab.operator import (
    CommensurabilityError,
    DisorderSpec,
    Region,
    a_hex,
    build_hamiltonian,
    hash_product,
    involution,
    magnetic_matrix,
    magnetic_translation,
    sample_potential,
)
from hoflab.selfcheck import (
    chiral_gauge_symmetry,
    hash_vs_matrix,
    square_symbol_match,
    translation_commutation,
    unitary_equivalence,
)

kinds = st.sampled_from(["square", "hex"])


@given(kind=kinds, p=st.integers(0, 6), q=st.integers(1, 6), mult=st.integers(1, 2), lam=st.floats(0, 1))
def test_hermitian_torus(kind, p, q, mult, lam):
    if math.gcd(p, q) != 1:
        return
    op = build_hamiltonian(kind, Flux.rational(p, q), Region.torus(q * mult), DisorderSpec.uniform(0, 1, lam, 3))
    assert abs(op.matrix - op.matrix.conj().T).max() < 1e-15


@given(kind=kinds, h=st.floats(-3, 3, allow_nan=False), L=st.integers(2, 9))
def test_box_norm_bound(kind, h, L):
    op = build_hamiltonian(kind, h, Region.box(L))
    ev = np.linalg.eigvalsh(op.dense())
    assert np.max(np.abs(ev)) <= 1.0 + 1e-12


def test_zero_flux_torus_spectrum_square():
    L = 8
    ev = np.sort(np.linalg.eigvalsh(build_hamiltonian("square", 0.0, Region.torus(L)).dense()))
    k = 2 * np.pi * np.arange(L) / L
    exact = np.sort((-0.5 * (np.cos(k)[:, None] + np.cos(k)[None, :])).ravel())
    assert np.max(np.abs(ev - exact)) < 1e-13


def test_commensurability_error():
    with pytest.raises(CommensurabilityError):
        build_hamiltonian("hex", Flux.rational(1, 5), Region.torus(7))
    with pytest.raises(CommensurabilityError):
        build_hamiltonian("square", Flux(0.3), Region.torus(5))
    # supercells only need integer total flux
    build_hamiltonian("square", Flux.rational(1, 5), Region.torus((5, 1)))


def test_disorder_moments():
    d = DisorderSpec.uniform(0, 1, 0.1, seed=4)
    v = sample_potential(d, 200000)
    assert abs(v.mean() - d.mean) < 5e-3
    assert abs(v.var() - d.variance) < 5e-3
    assert d.centered().mean == pytest.approx(0.0)
    b = sample_potential(DisorderSpec.bernoulli(0.5, 1.0, 1), 1000)
    assert set(np.unique(b)) <= {-0.5, 0.5}
    t = DisorderSpec.two_point(0.0, 2.0, 0.25, 1.0, 2)
    assert t.mean == pytest.approx(1.5)


def test_disorder_validation():
    with pytest.raises(ValueError):
        DisorderSpec("uniform", (1.0, 0.0), 0.1)
    with pytest.raises(ValueError):
        DisorderSpec("gauss", (), 0.1)
    with pytest.raises(ValueError):
        DisorderSpec.uniform(0, 1, -0.1)


@given(seed=st.integers(0, 2**32), r=st.integers(0, 100))
def test_potential_deterministic(seed, r):
    d = DisorderSpec.uniform(0, 1, 1.0, seed)
    a = sample_potential(d, 50, r)
    b = sample_potential(d, 80, r)
    assert np.array_equal(a, b[:50])
    assert not np.array_equal(a, sample_potential(d, 50, r + 1))


def test_potential_enters_diagonal():
    d = DisorderSpec.uniform(0, 1, 0.3, 9)
    op = build_hamiltonian("hex", Flux.rational(1, 4), Region.torus(4), d, realization=2)
    assert np.allclose(op.matrix.diagonal().real, 0.3 * sample_potential(d, op.dim, 2))


def test_translation_requires_torus():
    with pytest.raises(ValueError):
        magnetic_translation("square", Flux.rational(1, 4), Region.box(4), (1, 0))


def test_translation_incompatible_shift():
    with pytest.raises(CommensurabilityError):
        magnetic_translation("square", Flux.rational(1, 4), Region.torus((4, 2)), (1, 0))


@given(kind=kinds, g1=st.integers(-5, 5), g2=st.integers(-5, 5), q=st.integers(2, 5))
def test_translation_unitary_and_commuting(kind, g1, g2, q):
    fl = Flux.rational(1, q)
    reg = Region.torus(2 * q)
    T = magnetic_translation(kind, fl, reg, (g1, g2))
    H = build_hamiltonian(kind, fl, reg).matrix
    n = T.shape[0]
    assert abs(T @ T.conj().T - np.eye(n)).max() < 1e-13
    assert abs(T @ H - H @ T).max() < 1e-12


def test_algebra_suite():
    assert unitary_equivalence() < 1e-9
    assert square_symbol_match() < 1e-9
    assert hash_vs_matrix() < 1e-10
    assert translation_commutation() < 1e-12
    assert chiral_gauge_symmetry() < 1e-10


def _sym(rng):
    return {(a, b): rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for a in (-1, 0, 1) for b in (-1, 0)}


@given(seed=st.integers(0, 10**6), h=st.floats(-3, 3, allow_nan=False))
def test_hash_associative(seed, h):
    rng = np.random.default_rng(seed)
    f, g, k = _sym(rng), _sym(rng), _sym(rng)
    lhs = hash_product(hash_product(f, g, h), k, h)
    rhs = hash_product(f, hash_product(g, k, h), h)
    assert set(lhs) == set(rhs)
    assert max(np.abs(lhs[z] - rhs[z]).max() for z in lhs) < 1e-11


@given(seed=st.integers(0, 10**6), h=st.floats(-3, 3, allow_nan=False))
def test_involution_antimultiplicative(seed, h):
    rng = np.random.default_rng(seed)
    f, g = _sym(rng), _sym(rng)
    lhs = involution(hash_product(f, g, h))
    rhs = hash_product(involution(g), involution(f), h)
    assert max(np.abs(lhs[z] - rhs[z]).max() for z in lhs) < 1e-11


def test_magnetic_matrix_box_is_hermitian_for_selfadjoint_symbol():
    A = magnetic_matrix(a_hex(), 0.4, Region.box(5)).matrix
    assert abs(A - A.conj().T).max() < 1e-15
