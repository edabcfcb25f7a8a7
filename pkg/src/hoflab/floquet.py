"""Floquet matrices at rational flux, band structures, the Chambers polynomial and butterflies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from scipy.optimize import minimize

from .lattice import build_lattice
from .operator import Region, build_hamiltonian
from .lattice import Flux

TOUCH_TOL = 1e-7


class ContractError(RuntimeError):
    """A numerical self-consistency contract failed."""


def _check_pq(p: int, q: int) -> None:
    if q < 1 or math.gcd(p, q) != 1:
        raise ValueError(f"need q >= 1 and gcd(p, q) = 1, got p={p}, q={q}")


def J_matrix(p: int, q: int) -> np.ndarray:
    """diag(exp(i (j-1) phi)), phi = 2 pi p / q."""
    return np.diag(np.exp(2j * np.pi * p * np.arange(q) / q))


def K_matrix(q: int) -> np.ndarray:
    """Cyclic shift with K[j, k] = 1 iff k = j + 1 (mod q)."""
    return np.roll(np.eye(q, dtype=complex), 1, axis=1)


def _A_block(p, q, k):
    return np.eye(q) + np.exp(1j * k[0]) * J_matrix(p, q) + np.exp(1j * k[1]) * K_matrix(q)


def floquet_hex(p: int, q: int, k) -> np.ndarray:
    """M(k) = (1/3) [[0, A], [A*, 0]], A = I + e^{ik1} J + e^{ik2} K."""
    _check_pq(p, q)
    A = _A_block(p, q, k)
    Z = np.zeros((q, q), dtype=complex)
    return np.block([[Z, A], [A.conj().T, Z]]) / 3.0


def mt_matrix(p: int, q: int, k) -> np.ndarray:
    """Upper diagonal block of 9 M(k)^2 minus 3I."""
    _check_pq(p, q)
    A = _A_block(p, q, k)
    return A @ A.conj().T - 3 * np.eye(q)


def mt_hat_matrix(p: int, q: int, k) -> np.ndarray:
    """Lower diagonal block of 9 M(k)^2 minus 3I."""
    _check_pq(p, q)
    A = _A_block(p, q, k)
    return A.conj().T @ A - 3 * np.eye(q)


def floquet_square(p: int, q: int, k) -> np.ndarray:
    """q x q Harper matrix (Landau gauge, negative hopping convention).

    ``k[0]`` is conjugate to the q-cell supercell period, ``k[1]`` to the
    unit period transverse to it.
    """
    _check_pq(p, q)
    phi = 2 * np.pi * p / q
    H = np.diag(-0.5 * np.cos(k[1] + phi * np.arange(q))).astype(complex)
    for j in range(q):
        nxt = (j + 1) % q
        amp = -0.25 * (np.exp(1j * k[0]) if nxt == 0 else 1.0)
        H[j, nxt] += amp
        H[nxt, j] += np.conj(amp)
    return H


def floquet_family(kind: str, p: int, q: int):
    if kind == "hex":
        return lambda k: floquet_hex(p, q, k)
    if kind == "square":
        return lambda k: floquet_square(p, q, k)
    raise ValueError(f"unknown lattice kind {kind!r}")


def supercell_bloch(kind: str, p: int, q: int, theta) -> np.ndarray:
    """Bloch matrix of the real-space operator on the q x 1 magnetic supercell.

    ``theta`` are the twists across the two supercell periods; the matrix is
    the operator built by ``build_hamiltonian`` on the twisted ``q x 1`` torus.
    """
    _check_pq(p, q)
    reg = Region("torus", (q, 1), (float(theta[0]), float(theta[1])))
    return build_hamiltonian(build_lattice(kind), Flux.rational(p, q), reg).dense()


# --------------------------------------------------------------------------- bands


@dataclass
class BandStructure:
    n: int
    kgrid: np.ndarray = field(repr=False)
    branches: np.ndarray = field(repr=False)  # shape (n, n, m)
    intervals: np.ndarray  # shape (m, 2)

    @property
    def n_branches(self) -> int:
        return self.intervals.shape[0]

    def gaps(self, tol: float = TOUCH_TOL) -> list[tuple[int, float, float]]:
        """Open gaps as ``(branches_below, lo, hi)``."""
        out = []
        top = self.intervals[0, 1]
        for j in range(1, self.n_branches):
            lo = self.intervals[j, 0]
            if lo - top > tol:
                out.append((j, top, lo))
            top = max(top, self.intervals[j, 1])
        return out


def _branch(family, j):
    def f(k):
        return np.linalg.eigvalsh(family(k))[j]

    return f


def bands(family, n: int, q: int | None = None, polish: bool = True) -> BandStructure:
    """Sample eigenvalue branches on an n x n grid over [0, 2pi)^2 and extract band intervals.

    Grid extrema are refined by a bounded local optimization inside the
    neighbouring grid cells.
    """
    if q is not None and n < 12 * q:
        raise ValueError(f"k-grid n={n} below the resolution floor 12q={12 * q}")
    ks = 2 * np.pi * np.arange(n) / n
    K1, K2 = np.meshgrid(ks, ks, indexing="ij")
    mats = np.array([family((a, b)) for a, b in zip(K1.ravel(), K2.ravel())])
    ev = np.linalg.eigvalsh(mats).reshape(n, n, -1)
    m = ev.shape[-1]
    intervals = np.empty((m, 2))
    step = 2 * np.pi / n
    for j in range(m):
        br = ev[:, :, j]
        lo_i = np.unravel_index(np.argmin(br), br.shape)
        hi_i = np.unravel_index(np.argmax(br), br.shape)
        lo, hi = br[lo_i], br[hi_i]
        if polish:
            f = _branch(family, j)
            for idx, sign in ((lo_i, 1.0), (hi_i, -1.0)):
                k0 = np.array([ks[idx[0]], ks[idx[1]]])
                res = minimize(
                    lambda k: sign * f(k),
                    k0,
                    method="L-BFGS-B",
                    bounds=[(k0[0] - step, k0[0] + step), (k0[1] - step, k0[1] + step)],
                    options={"ftol": 1e-15, "gtol": 1e-12},
                )
                val = sign * res.fun
                if sign > 0:
                    lo = min(lo, val)
                else:
                    hi = max(hi, val)
        intervals[j] = lo, hi
    return BandStructure(n, np.stack([K1, K2], axis=-1), ev, intervals)


# --------------------------------------------------------------------------- Chambers


def g_q(q: int, k) -> np.ndarray:
    """2 (-1)^q (cos q k1 + cos q k2 + (-1)^(q+1) cos q (k1 - k2))."""
    k1, k2 = np.asarray(k[0]), np.asarray(k[1])
    s = (-1) ** q
    return 2 * s * (np.cos(q * k1) + np.cos(q * k2) - s * np.cos(q * (k1 - k2)))


def g_extremes(q: int) -> tuple[float, float]:
    return -6.0, 3.0


def g_max_points(q: int) -> list[tuple[float, float]]:
    a = (2 * np.pi / 3 if q % 2 else np.pi / 3) / q
    return [(a, -a), (-a, a)]


def g_min_point(q: int) -> tuple[float, float]:
    return (0.0, 0.0) if q % 2 else (np.pi / q, np.pi / q)


def char_poly_mt(p: int, q: int, k, lam) -> np.ndarray:
    """det(M_T(k) - lam) evaluated through the eigenvalues of M_T(k)."""
    E = np.linalg.eigvalsh(mt_matrix(p, q, k))
    lam = np.asarray(lam, dtype=float)
    return np.prod(E[:, None] - lam.ravel()[None, :], axis=0).reshape(lam.shape)


K0 = (0.137, 0.731)


class ChambersPoly:
    """f_{p,q}(lam) = (-1)^q prod_j (lam - E_j(k0)) + g_q(k0), evaluated in product form."""

    def __init__(self, roots: np.ndarray, shift: float):
        self.roots_k0 = np.sort(np.asarray(roots, dtype=float))
        self.shift = float(shift)
        self.degree = self.roots_k0.size

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        prod = np.prod(lam.ravel()[None, :] - self.roots_k0[:, None], axis=0).reshape(lam.shape)
        return (-1) ** self.degree * prod + self.shift

    def __sub__(self, c: float) -> "ChambersPoly":
        return ChambersPoly(self.roots_k0, self.shift - c)

    def roots(self) -> np.ndarray:
        coef = (-1) ** self.degree * np.poly(self.roots_k0)[::-1]
        coef[0] += self.shift
        return Polynomial(coef).roots()


@dataclass
class ChambersData:
    p: int
    q: int
    poly: ChambersPoly
    cheb: Chebyshev  # interpolant through q+1 Chebyshev nodes on [-4, 7]
    residual: float
    f_at_minus3: float
    g_min: float
    g_max: float
    interp_dev: float  # max |interpolant - product form| on [-3, 6] relative to max |f|

    @property
    def coeffs(self) -> np.ndarray:
        """Power-basis coefficients from the interpolant, ``coeffs[i]`` multiplies ``lam**i``."""
        return self.cheb.convert(kind=Polynomial, domain=[-1, 1], window=[-1, 1]).coef

    @property
    def leading(self) -> float:
        """Leading power coefficient, read off the top Chebyshev coefficient."""
        q = self.q
        lo, hi = self.cheb.domain
        c = self.cheb.coef[-1] * (2.0 / (hi - lo)) ** q
        return float(c * 2 ** (q - 1)) if q >= 1 else float(c)


def chambers_residual(p: int, q: int, f, n: int = 40, n_lam: int = 10, seed: int = 0) -> float:
    """Std-dev over an n x n k-grid and random lam in [-3, 6] of det(M_T - lam) + g_q - f."""
    rng = np.random.default_rng(seed)
    lam = rng.uniform(-3.0, 6.0, n_lam)
    ks = 2 * np.pi * np.arange(n) / n
    vals = []
    fl = f(lam)
    for a in ks:
        for b in ks:
            vals.append(char_poly_mt(p, q, (a, b), lam) + g_q(q, (a, b)) - fl)
    return float(np.std(np.concatenate(vals)))


def chambers(p: int, q: int, tol: float = 1e-9, n: int = 40) -> ChambersData:
    """Extract f_{p,q} at the reference momentum and validate k-independence."""
    _check_pq(p, q)
    E0 = np.linalg.eigvalsh(mt_matrix(p, q, K0))
    poly = ChambersPoly(E0, float(g_q(q, K0)))
    nodes = Chebyshev.basis(q + 1, domain=[-4, 7]).roots()
    cheb = Chebyshev.fit(nodes, poly(nodes), q, domain=[-4, 7])
    probe = np.linspace(-3.0, 6.0, 97)
    scale = max(1.0, float(np.max(np.abs(poly(probe)))))
    dev = float(np.max(np.abs(cheb(probe) - poly(probe)))) / scale
    res = chambers_residual(p, q, poly, n=n)
    data = ChambersData(p, q, poly, cheb, res, float(poly(-3.0)), -6.0, 3.0, dev)
    if res > tol:
        raise ContractError(f"Chambers residual {res:.3e} above {tol:.1e} at p/q={p}/{q}")
    return data


def spectrum_from_chambers(data: ChambersData, lam_grid=None) -> dict:
    """Spectrum of M_T as {lam : min g <= f(lam) <= max g} and the hexagonal energies.

    Interval ends are roots of ``f - g_min`` and ``f - g_max``; ``lam_grid``
    (optional) returns the membership mask on a grid as well.
    """
    f = data.poly
    roots = []
    for c in (data.g_min, data.g_max):
        r = (f - c).roots()
        r = r[np.abs(r.imag) < 1e-7].real
        roots.extend(r.tolist())
    roots = np.sort(np.array(roots))
    ivals = []
    for a, b in zip(roots[:-1], roots[1:]):
        m = f(0.5 * (a + b))
        if data.g_min - 1e-12 <= m <= data.g_max + 1e-12:
            ivals.append((a, b))
    merged = _merge(ivals)
    energies = []
    for a, b in merged:
        lo = math.sqrt(max(a + 3.0, 0.0)) / 3.0
        hi = math.sqrt(max(b + 3.0, 0.0)) / 3.0
        energies.append((lo, hi))
    hexe = _merge(sorted([(-b, -a) for a, b in energies] + energies))
    out = {"E_intervals": np.array(merged), "hex_intervals": np.array(hexe)}
    if lam_grid is not None:
        lam_grid = np.asarray(lam_grid)
        fv = f(lam_grid)
        out["mask"] = (fv >= data.g_min) & (fv <= data.g_max)
    return out


def _merge(ivals, tol: float = 1e-12):
    out: list[list[float]] = []
    for a, b in sorted(ivals):
        if out and a <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [tuple(x) for x in out]


# --------------------------------------------------------------------------- exact band edges


def band_edges(kind: str, p: int, q: int) -> np.ndarray:
    """Exact band intervals from the two extremal momenta of the k-dependent Chambers term.

    Each band is the preimage of an interval under a polynomial, so its ends
    are the branch values at the momenta where the trigonometric term is
    maximal and minimal.  Returns an (m, 2) array, m = q (square) or 2q (hex).
    """
    _check_pq(p, q)
    if kind == "square":
        a = np.linalg.eigvalsh(floquet_square(p, q, (0.0, 0.0)))
        b = np.linalg.eigvalsh(floquet_square(p, q, (np.pi, np.pi / q)))
        return np.sort(np.stack([a, b], axis=1), axis=1)
    if kind == "hex":
        # F = +-(1/3) sqrt(E + 3) is monotone in E, so the same two momenta give the hex edges;
        # diagonalizing M(k) directly keeps the zero modes accurate to rounding
        a = np.linalg.eigvalsh(floquet_hex(p, q, g_max_points(q)[0]))
        b = np.linalg.eigvalsh(floquet_hex(p, q, g_min_point(q)))
        return np.sort(np.stack([a, b], axis=1), axis=1)
    raise ValueError(f"unknown lattice kind {kind!r}")


# --------------------------------------------------------------------------- butterfly


@dataclass(frozen=True)
class ButterflyRecord:
    p: int
    q: int
    flux: float
    band_index: int
    lo: float
    hi: float


def butterfly(kind: str, q_max: int) -> list[ButterflyRecord]:
    """Band intervals for every reduced flux 2 pi p/q with 0 <= p < q <= q_max.

    Touching branches (within 1e-7) are merged into one band.
    """
    if q_max > 120:
        raise ValueError("q_max must be <= 120")
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    fracs = sorted({Fraction(p, q) for q in range(1, q_max + 1) for p in range(q)})
    out = []
    for fr in fracs:
        p, q = fr.numerator, fr.denominator
        ivals = _merge([tuple(x) for x in band_edges(kind, p, q)], tol=TOUCH_TOL)
        for i, (lo, hi) in enumerate(ivals):
            out.append(ButterflyRecord(p, q, 2 * np.pi * p / q, i, float(lo), float(hi)))
    return out
