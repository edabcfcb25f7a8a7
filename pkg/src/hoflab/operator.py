"""Finite-volume magnetic Hamiltonians, disorder, magnetic translations and magnetic matrices.

Hopping convention: ``H = -(1/4) * (square hops)`` and ``H = -(1/3) * (hex hops)``
plus ``lam * V``.  An edge ``e`` from ``i(e)`` to ``t(e)`` contributes
``H[i, t] = -t0 * exp(-i A_e)`` and the Hermitian partner.

Torus regions are magnetic-periodic: a function on the torus is a function
on the whole lattice with ``u = exp(-i theta.m) T_{Lm} u`` for the magnetic
translations ``T`` defined below, so the operator commutes with the
translations that survive on the torus.  The optional twist ``theta`` turns a
``q x 1`` magnetic supercell torus into a Bloch-Floquet matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lattice import Flux, LatticeSpec, build_lattice, edge_phase

SIGN_CONVENTION = "negative hopping: -1/4 (square), -1/3 (hex)"


class CommensurabilityError(ValueError):
    """Raised when a torus is incompatible with the flux."""


# --------------------------------------------------------------------------- disorder


@dataclass(frozen=True)
class DisorderSpec:
    """i.i.d. single-site potential law, coupling and seed.

    ``kind``/``params``: ``none``; ``uniform`` (a, b); ``bernoulli`` (w,) for
    values +-w with equal probability; ``two_point`` (v1, v2, p) with
    P(V=v1)=p.
    """

    kind: str = "none"
    params: tuple = ()
    coupling: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.coupling < 0:
            raise ValueError("coupling must be >= 0")
        n = {"none": 0, "uniform": 2, "bernoulli": 1, "two_point": 3}
        if self.kind not in n:
            raise ValueError(f"unknown disorder kind {self.kind!r}")
        if len(self.params) != n[self.kind]:
            raise ValueError(f"{self.kind} takes {n[self.kind]} parameters, got {self.params}")
        if self.kind == "uniform" and not self.params[0] <= self.params[1]:
            raise ValueError("uniform(a, b) needs a <= b")
        if self.kind == "two_point" and not 0.0 <= self.params[2] <= 1.0:
            raise ValueError("two_point probability must lie in [0, 1]")

    @classmethod
    def uniform(cls, a, b, coupling, seed=0):
        return cls("uniform", (float(a), float(b)), float(coupling), int(seed))

    @classmethod
    def bernoulli(cls, w, coupling, seed=0):
        return cls("bernoulli", (float(w),), float(coupling), int(seed))

    @classmethod
    def two_point(cls, v1, v2, p, coupling, seed=0):
        return cls("two_point", (float(v1), float(v2), float(p)), float(coupling), int(seed))

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            a, b = self.params
            return 0.5 * (a + b)
        if self.kind == "two_point":
            v1, v2, p = self.params
            return p * v1 + (1 - p) * v2
        return 0.0

    @property
    def variance(self) -> float:
        if self.kind == "uniform":
            a, b = self.params
            return (b - a) ** 2 / 12.0
        if self.kind == "bernoulli":
            return self.params[0] ** 2
        if self.kind == "two_point":
            v1, v2, p = self.params
            return p * (1 - p) * (v1 - v2) ** 2
        return 0.0

    @property
    def sup_abs(self) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "bernoulli":
            return abs(self.params[0])
        return max(abs(v) for v in self.params[:2])

    def centered(self) -> "DisorderSpec":
        """Same law shifted to zero mean."""
        m = self.mean
        if self.kind == "uniform":
            a, b = self.params
            return DisorderSpec("uniform", (a - m, b - m), self.coupling, self.seed)
        if self.kind == "two_point":
            v1, v2, p = self.params
            return DisorderSpec("two_point", (v1 - m, v2 - m, p), self.coupling, self.seed)
        return self

    def with_coupling(self, coupling: float) -> "DisorderSpec":
        return DisorderSpec(self.kind, self.params, float(coupling), self.seed)


def sample_potential(spec: DisorderSpec, n_sites: int, seed_offset: int = 0) -> np.ndarray:
    """Site potential for realization ``seed_offset``.

    Values come from a Philox stream keyed by ``(seed, seed_offset)`` and are
    drawn in site-index order, so the value at a site depends only on
    ``(seed, seed_offset, site)``.
    """
    if spec.kind == "none":
        return np.zeros(n_sites)
    key = np.array([spec.seed % 2**64, seed_offset % 2**64], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    u = rng.random(n_sites)
    if spec.kind == "uniform":
        a, b = spec.params
        return a + (b - a) * u
    if spec.kind == "bernoulli":
        w = spec.params[0]
        return np.where(u < 0.5, -w, w)
    v1, v2, p = spec.params
    return np.where(u < p, v1, v2)


# --------------------------------------------------------------------------- regions


@dataclass(frozen=True)
class Region:
    """``torus`` (magnetic-periodic) or open ``box`` of ``L1 x L2`` cells."""

    kind: str
    shape: tuple[int, int]
    twist: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("torus", "box"):
            raise ValueError(f"region kind must be 'torus' or 'box', got {self.kind!r}")
        if min(self.shape) < 1:
            raise ValueError("region sides must be positive")

    @classmethod
    def torus(cls, L, twist=(0.0, 0.0)):
        shape = (L, L) if np.isscalar(L) else tuple(L)
        return cls("torus", (int(shape[0]), int(shape[1])), (float(twist[0]), float(twist[1])))

    @classmethod
    def box(cls, L):
        shape = (L, L) if np.isscalar(L) else tuple(L)
        return cls("box", (int(shape[0]), int(shape[1])))

    @property
    def n_cells(self) -> int:
        return self.shape[0] * self.shape[1]


def symp(g, d):
    """Symplectic form sigma(g, d) = g1*d2 - d1*g2 (broadcasting)."""
    return g[0] * d[1] - d[0] * g[1]


def _alpha(h, g):
    return (h / 6.0) * (g[0] - g[1])


def _translation_factor(lat: LatticeSpec, h: float, shift, cell, s):
    """Phase of the magnetic translation by ``shift`` at site ``(cell, s)``.

    (T_shift u)(v) = exp(i * this) * u(v - shift).
    """
    ph = 0.5 * h * symp(shift, cell)
    if lat.kind == "hex":
        ph = ph + np.where(np.asarray(s) == 1, _alpha(h, shift), 0.0)
    return ph


def check_torus(lat: LatticeSpec, flux: Flux, region: Region) -> None:
    """Validate that the flux threads the torus an integer number of times.

    Square tori ``L x L`` need ``L`` to be a multiple of ``q``; other shapes
    (supercells) need ``h*L1*L2`` in ``2*pi*Z``.
    """
    if region.kind != "torus":
        return
    L1, L2 = region.shape
    if flux.value == 0.0:
        return
    if not flux.is_rational:
        raise CommensurabilityError(
            "a torus needs a rational flux 2*pi*p/q; give p and q explicitly"
        )
    q = flux.q
    if L1 == L2:
        if L1 % q:
            raise CommensurabilityError(
                f"torus side L={L1} is incompatible with flux 2*pi*{flux.p}/{q}: "
                f"L must be a multiple of {q}"
            )
    elif (flux.p * L1 * L2) % q:
        raise CommensurabilityError(
            f"torus {L1}x{L2} carries non-integer total flux at 2*pi*{flux.p}/{q}"
        )


def _wrap(lat: LatticeSpec, h: float, region: Region, c1, c2, s):
    """Reduce possibly out-of-box cells to the torus.

    Returns ``(r1, r2, phase)`` with ``u(c, s) = exp(i*phase) * u(r, s)`` on the
    magnetic-periodic space.
    """
    L1, L2 = region.shape
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    m1 = np.floor_divide(c1, L1)
    m2 = np.floor_divide(c2, L2)
    r1 = c1 - m1 * L1
    r2 = c2 - m2 * L2
    G = (L1 * m1, L2 * m2)
    ph = region.twist[0] * m1 + region.twist[1] * m2 + _translation_factor(lat, h, G, (r1, r2), s)
    return r1, r2, ph


def site_index(region: Region, n_sites: int, c1, c2, s):
    return (np.asarray(c1) * region.shape[1] + np.asarray(c2)) * n_sites + np.asarray(s)


def _cells(region: Region):
    L1, L2 = region.shape
    g1, g2 = np.meshgrid(np.arange(L1), np.arange(L2), indexing="ij")
    return g1.ravel(), g2.ravel()


# --------------------------------------------------------------------------- Hamiltonian


@dataclass
class MagneticOperator:
    lattice: LatticeSpec
    flux: Flux
    region: Region
    coupling: float
    potential: np.ndarray
    matrix: sp.csr_matrix = field(repr=False)
    disorder: DisorderSpec | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def positions(self) -> np.ndarray:
        """Geometric positions of all sites in index order, shape (dim, 2)."""
        g1, g2 = _cells(self.region)
        ns = self.lattice.n_sites
        c1 = np.repeat(g1, ns)
        c2 = np.repeat(g2, ns)
        s = np.tile(np.arange(ns), g1.size)
        return self.lattice.position(c1, c2, s)

    def cell_index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g1, g2 = _cells(self.region)
        ns = self.lattice.n_sites
        return np.repeat(g1, ns), np.repeat(g2, ns), np.tile(np.arange(ns), g1.size)


def hopping_matrix(lat: LatticeSpec, h: float, region: Region) -> sp.csr_matrix:
    ns = lat.n_sites
    g1, g2 = _cells(region)
    rows, cols, vals = [], [], []
    for e in lat.edge_types:
        t1 = g1 + e.offset[0]
        t2 = g2 + e.offset[1]
        amp = -lat.hop * np.exp(-1j * edge_phase(lat, e, (g1, g2), h))
        if region.kind == "torus":
            r1, r2, ph = _wrap(lat, h, region, t1, t2, e.term_site)
            amp = amp * np.exp(1j * ph)
            keep = np.ones(g1.size, dtype=bool)
        else:
            r1, r2 = t1, t2
            L1, L2 = region.shape
            keep = (t1 >= 0) & (t1 < L1) & (t2 >= 0) & (t2 < L2)
        i = site_index(region, ns, g1[keep], g2[keep], e.init_site)
        j = site_index(region, ns, r1[keep], r2[keep], e.term_site)
        a = amp[keep]
        rows += [i, j]
        cols += [j, i]
        vals += [a, np.conj(a)]
    n = ns * region.n_cells
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return m.tocsr()


def build_hamiltonian(
    lat: LatticeSpec | str,
    flux: Flux | float,
    region: Region,
    disorder: DisorderSpec | None = None,
    realization: int = 0,
    potential: np.ndarray | None = None,
) -> MagneticOperator:
    """Magnetic Hamiltonian ``H = hop + lam*V`` on a torus or an open box.

    ``potential`` overrides sampling from ``disorder``; ``realization`` selects
    the disorder stream.
    """
    if isinstance(lat, str):
        lat = build_lattice(lat)
    if not isinstance(flux, Flux):
        flux = Flux(float(flux))
    check_torus(lat, flux, region)
    mat = hopping_matrix(lat, flux.value, region)
    n = mat.shape[0]
    lam = 0.0 if disorder is None else disorder.coupling
    if potential is None:
        potential = (
            np.zeros(n) if disorder is None else sample_potential(disorder, n, realization)
        )
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (n,):
        raise ValueError(f"potential must have shape ({n},)")
    if lam != 0.0:
        mat = (mat + sp.diags(lam * potential)).tocsr()
    return MagneticOperator(lat, flux, region, lam, potential, mat, disorder)


# --------------------------------------------------------------------------- translations


def magnetic_translation(lat: LatticeSpec | str, flux: Flux, region: Region, gamma) -> sp.csr_matrix:
    """Matrix of the magnetic translation ``T_gamma`` on a torus.

    ``(T u)(c, s) = exp(i (h/2) sigma(gamma, c)) [exp(i alpha(gamma)) on r1] u(c - gamma, s)``
    with ``alpha(gamma) = (h/6)(g1 - g2)`` on the hexagonal lattice.
    """
    if isinstance(lat, str):
        lat = build_lattice(lat)
    if region.kind != "torus":
        raise ValueError("magnetic translations are defined on torus regions")
    check_torus(lat, flux, region)
    h = flux.value
    L1, L2 = region.shape
    gam = (int(gamma[0]), int(gamma[1]))
    # T_gamma must commute with the torus-defining translations T_{L e_i}
    for Lm in ((L1, 0), (0, L2)):
        if abs(math.remainder(h * symp(gam, Lm), 2 * math.pi)) > 1e-9:
            raise CommensurabilityError(
                f"translation by {gam} does not preserve the {L1}x{L2} magnetic torus"
            )
    ns = lat.n_sites
    g1, g2 = _cells(region)
    rows, cols, vals = [], [], []
    for s in range(ns):
        ph = _translation_factor(lat, h, gam, (g1, g2), s)
        r1, r2, ph2 = _wrap(lat, h, region, g1 - gam[0], g2 - gam[1], s)
        rows.append(site_index(region, ns, g1, g2, s))
        cols.append(site_index(region, ns, r1, r2, s))
        vals.append(np.exp(1j * (ph + ph2)))
    n = ns * region.n_cells
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


# --------------------------------------------------------------------------- magnetic matrices


def a_square() -> dict:
    """Hopping symbol of the square lattice (positive convention)."""
    one = np.array([[0.25 + 0j]])
    return {(1, 0): one, (-1, 0): one, (0, 1): one, (0, -1): one}


def a_hex() -> dict:
    """2x2 hopping symbol of the honeycomb lattice (positive convention)."""
    t = 1.0 / 3.0
    up = np.array([[0, t], [0, 0]], dtype=complex)
    return {
        (0, 0): np.array([[0, t], [t, 0]], dtype=complex),
        (1, 0): up,
        (0, 1): up,
        (-1, 0): up.T.copy(),
        (0, -1): up.T.copy(),
    }


def _sym_dim(f: dict) -> int:
    return next(iter(f.values())).shape[0]


def involution(f: dict) -> dict:
    """f*(gamma) = conj(f(-gamma))^T."""
    return {(-z[0], -z[1]): np.conj(v).T.copy() for z, v in f.items()}


def hash_product(f: dict, g: dict, h: float) -> dict:
    """Twisted convolution (f # g)(gamma) = sum_z f(gamma - z) g(z) exp(-i (h/2) sigma(gamma, z))."""
    out: dict = {}
    for zf, vf in f.items():
        for zg, vg in g.items():
            gam = (zf[0] + zg[0], zf[1] + zg[1])
            term = (vf @ vg) * np.exp(-0.5j * h * symp(gam, zg))
            out[gam] = out.get(gam, 0) + term
    return out


@dataclass
class MagneticMatrix:
    symbol: dict
    h: float
    region: Region
    matrix: sp.csr_matrix = field(repr=False)


def magnetic_matrix(symbol: dict, h: float, region: Region) -> MagneticMatrix:
    """Realize ``A^h(f)`` with kernel ``exp(-i (h/2) sigma(g, d)) f(g - d)``.

    On a box the kernel is truncated; on a torus columns outside the box are
    folded back with the translations ``exp(i (h/2) sigma(shift, pos))`` that
    commute with every magnetic matrix, times the region twist.
    """
    n = _sym_dim(symbol)
    L1, L2 = region.shape
    if region.kind == "torus" and abs(math.remainder(h * L1 * L2, 2 * math.pi)) > 1e-9:
        raise CommensurabilityError(f"torus {L1}x{L2} carries non-integer flux at h={h}")
    g1, g2 = _cells(region)
    rows, cols, vals = [], [], []
    for z, v in symbol.items():
        d1 = g1 - z[0]
        d2 = g2 - z[1]
        kern = np.exp(-0.5j * h * symp((g1, g2), (d1, d2)))
        if region.kind == "torus":
            m1 = np.floor_divide(d1, L1)
            m2 = np.floor_divide(d2, L2)
            r1 = d1 - m1 * L1
            r2 = d2 - m2 * L2
            ph = (
                region.twist[0] * m1
                + region.twist[1] * m2
                + 0.5 * h * symp((L1 * m1, L2 * m2), (r1, r2))
            )
            kern = kern * np.exp(1j * ph)
            keep = np.ones(g1.size, dtype=bool)
        else:
            r1, r2 = d1, d2
            keep = (d1 >= 0) & (d1 < L1) & (d2 >= 0) & (d2 < L2)
        for a in range(n):
            for b in range(n):
                if v[a, b] == 0:
                    continue
                rows.append((g1[keep] * L2 + g2[keep]) * n + a)
                cols.append((r1[keep] * L2 + r2[keep]) * n + b)
                vals.append(v[a, b] * kern[keep])
    N = n * region.n_cells
    if not rows:
        mat = sp.csr_matrix((N, N), dtype=complex)
    else:
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
        ).tocsr()
    return MagneticMatrix(symbol, h, region, mat)


def hex_gauge_unitary(h: float, region: Region) -> np.ndarray:
    """Diagonal of the multiplication operator ``U`` with ``U H U* = -A^h(a_hex)`` on boxes.

    ``U = exp(i (h/6)(g1 - g2))`` on r0-sites and ``1`` on r1-sites.
    """
    g1, g2 = _cells(region)
    d = np.ones(2 * g1.size, dtype=complex)
    d[0::2] = np.exp(1j * (h / 6.0) * (g1 - g2))
    return d


def hex_matched_twist(h: float, region: Region) -> tuple[float, float]:
    """Torus twist under which ``A^h(a_hex)`` is unitarily equivalent to the untwisted ``-H``."""
    L1, L2 = region.shape
    return (_alpha(h, (L1, 0)), _alpha(h, (0, L2)))
