"""Fast invariant suite behind ``hoflab selfcheck`` (well under two minutes on one core)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Flux
from .operator import (
    DisorderSpec,
    Region,
    a_hex,
    a_square,
    build_hamiltonian,
    hash_product,
    hex_gauge_unitary,
    hex_matched_twist,
    involution,
    magnetic_matrix,
    magnetic_translation,
)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return bool(self.value < self.tol)


def _random_symbol(rng, n, reach=1):
    r = range(-reach, reach + 1)
    return {(a, b): rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for a in r for b in r}


def unitary_equivalence(q: int = 5, L: int = 10) -> float:
    """max spectral mismatch between H and -A^h(a_hex), box and matched-twist torus."""
    h = 2 * math.pi / q
    worst = 0.0
    for reg in (Region.box(L), Region.torus(L)):
        H = build_hamiltonian("hex", Flux.rational(1, q), reg).dense()
        twist = hex_matched_twist(h, reg) if reg.kind == "torus" else (0.0, 0.0)
        A = magnetic_matrix(a_hex(), h, Region(reg.kind, reg.shape, twist)).matrix.toarray()
        U = hex_gauge_unitary(h, reg)
        worst = max(worst, float(np.max(np.abs(np.linalg.eigvalsh(H) - np.sort(-np.linalg.eigvalsh(A))))))
        worst = max(worst, float(np.max(np.abs(U[:, None] * H * U.conj()[None, :] + A))))
    return worst


def square_symbol_match(q: int = 5, L: int = 10) -> float:
    """H_square = -A^h(a_square) on the torus."""
    h = 2 * math.pi / q
    reg = Region.torus(L)
    H = build_hamiltonian("square", Flux.rational(1, q), reg).dense()
    A = magnetic_matrix(a_square(), h, reg).matrix.toarray()
    return float(np.max(np.abs(np.linalg.eigvalsh(H) - np.sort(-np.linalg.eigvalsh(A)))))


def hash_vs_matrix(q: int = 5, L: int = 10, seed: int = 0) -> float:
    """max |A(f) A(g) - A(f # g)| and |A(f*) - A(f)^*|, relative to max |A(f # g)|."""
    rng = np.random.default_rng(seed)
    h = 2 * math.pi / q
    reg = Region.torus(L)
    f, g = _random_symbol(rng, 2), _random_symbol(rng, 2)
    Af = magnetic_matrix(f, h, reg).matrix
    Ag = magnetic_matrix(g, h, reg).matrix
    Afg = magnetic_matrix(hash_product(f, g, h), h, reg).matrix
    scale = abs(Afg).max()
    d1 = abs(Af @ Ag - Afg).max() / scale
    d2 = abs(magnetic_matrix(involution(f), h, reg).matrix - Af.conj().T).max() / abs(Af).max()
    return float(max(d1, d2))


def translation_commutation(q: int = 5, L: int = 10) -> float:
    """[T_gamma, H] = 0 and T_(1,0) T_(0,1) = e^{ih} T_(0,1) T_(1,0), both lattices."""
    fl = Flux.rational(1, q)
    reg = Region.torus(L)
    worst = 0.0
    for kind in ("square", "hex"):
        H = build_hamiltonian(kind, fl, reg).matrix
        for gam in ((1, 0), (0, 1), (2, 3), (-1, 4)):
            T = magnetic_translation(kind, fl, reg, gam)
            worst = max(worst, abs(T @ H - H @ T).max())
        T1 = magnetic_translation(kind, fl, reg, (1, 0))
        T2 = magnetic_translation(kind, fl, reg, (0, 1))
        worst = max(worst, abs(T1 @ T2 - np.exp(1j * fl.value) * (T2 @ T1)).max())
    return float(worst)


def chiral_gauge_symmetry(L: int = 12) -> float:
    """Bipartite E -> -E symmetry (clean), h -> 2pi - h conjugation, and diagonal gauge invariance."""
    worst = 0.0
    for kind in ("square", "hex"):
        for p, q in ((1, 3), (1, 4), (2, 3)):
            reg = Region.torus(L)
            ev = np.linalg.eigvalsh(build_hamiltonian(kind, Flux.rational(p, q), reg).dense())
            worst = max(worst, float(np.max(np.abs(ev + ev[::-1]))))
            ev2 = np.linalg.eigvalsh(build_hamiltonian(kind, Flux.rational(q - p, q), reg).dense())
            worst = max(worst, float(np.max(np.abs(ev - ev2))))
        # a random diagonal gauge leaves the disordered spectrum unchanged
        rng = np.random.default_rng(1)
        op = build_hamiltonian(kind, Flux.rational(1, 4), Region.box(L), DisorderSpec.uniform(0, 1, 0.3, 7))
        H = op.dense()
        u = np.exp(2j * math.pi * rng.random(op.dim))
        ev_a = np.linalg.eigvalsh(H)
        ev_b = np.linalg.eigvalsh(u[:, None] * H * u.conj()[None, :])
        worst = max(worst, float(np.max(np.abs(ev_a - ev_b))))
    return worst


def chambers_small(q_max: int = 5) -> float:
    from .floquet import chambers

    worst = 0.0
    for q in range(1, q_max + 1):
        for p in range(q):
            if math.gcd(p, q) != 1:
                continue
            d = chambers(p, q)
            worst = max(worst, d.residual, abs(d.f_at_minus3 - 3.0))
    return worst


def dirac_small() -> float:
    from .dirac import verify_touching

    return max(verify_touching(p, q) for p, q in ((0, 1), (1, 2), (1, 3)))


def free_evolution(L: int = 81, t: float = 10.0) -> float:
    from .transport import evolve, free_square_state, origin_index

    op = build_hamiltonian("square", Flux(0.0), Region.box(L))
    e0 = np.zeros(op.dim, dtype=complex)
    e0[origin_index(op)] = 1.0
    psi = evolve(op, e0, t)
    return float(max(np.max(np.abs(psi - free_square_state(L, t))), abs(np.vdot(psi, psi).real - 1.0)))


def run_checks() -> list[Check]:
    return [
        Check("unitary equivalence H ~ -A(a_hex)", unitary_equivalence(), 1e-9),
        Check("square operator = -A(a_square)", square_symbol_match(), 1e-9),
        Check("twisted product and involution", hash_vs_matrix(), 1e-10),
        Check("magnetic translations", translation_commutation(), 1e-12),
        Check("chiral and gauge symmetries", chiral_gauge_symmetry(), 1e-10),
        Check("Chambers identity q <= 5", chambers_small(), 1e-9),
        Check("Dirac touching q <= 3", dirac_small(), 1e-8),
        Check("free evolution oracle", free_evolution(), 1e-10),
    ]
