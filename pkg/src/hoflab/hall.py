"""Hall conductivity in spectral gaps: Streda slopes of the IDS and lattice Chern numbers.

Both routes return the integer m = 2 pi c_H with c_H = |b1 ^ b2| dIDS/dh.
The Chern route uses Fukui-Hatsugai link variables on the twist torus of the
q x 1 magnetic supercell; with the link orientation used here m = +C.  Hex values
are measured from half filling: IDS minus half the site density, and Chern
sums minus the mean of the sums just below and just above the zero band.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .floquet import ContractError, band_edges, supercell_bloch
from .lattice import build_lattice

GAP_MIN = 1e-6


class GapClosedError(ContractError):
    pass


# --------------------------------------------------------------------------- gap tracking


def _merged(edges: np.ndarray, tol: float = 1e-9) -> list[list[float]]:
    out: list[list[float]] = []
    for lo, hi in sorted(map(tuple, edges)):
        if out and lo <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return out


def gap_between(edges: np.ndarray, a: float, b: float) -> tuple[float, float]:
    """Widest spectral gap whose midpoint lies in (a, b); returns (lower edge, upper edge)."""
    cl = _merged(edges)
    best = None
    for (l0, h0), (l1, h1) in zip(cl[:-1], cl[1:]):
        mid = 0.5 * (h0 + l1)
        if a < mid < b and (best is None or l1 - h0 > best[1] - best[0]):
            best = (h0, l1)
    if best is None or best[1] - best[0] < GAP_MIN:
        raise GapClosedError(f"no open gap between {a:.6g} and {b:.6g}")
    return best


def _levels(kind: str, h: float, n_hi: int, p: int = 0, q: int = 1) -> dict[int, float]:
    from .semiclassics import landau_levels_hex, landau_levels_square

    if kind == "square":
        tab = landau_levels_square(h, n_hi)
    else:
        tab = landau_levels_hex(h, n_hi, p, q)
    return {lv.n: lv.z for lv in tab.levels}


def gap_window(kind: str, n: int, h: float, p: int = 0, q: int = 1, below_zero: bool = False):
    """Energy interval (z_lo, z_hi) holding the gap tracked by Landau index.

    square: gap above level n (n >= 1) is (z_n, z_{n+1}).
    hex: gap above z_n is (z_n, z_{n+1}); ``below_zero`` selects (z_{-1}, z_0).
    """
    need = abs(n) + 1
    z = _levels(kind, h, need, p, q)
    if below_zero:
        return z[-1], z[0]
    if n not in z:
        raise GapClosedError(f"level {n} outside the trusted window at h={h:.4g}")
    if n + 1 not in z:
        # next level beyond the trusted window: extrapolate the local spacing
        return z[n], 2 * z[n] - z[n - 1]
    return z[n], z[n + 1]


# --------------------------------------------------------------------------- Streda route


@dataclass
class IDSSample:
    flux_pq: tuple[int, int]
    h: float
    mu: float
    gap: tuple[float, float]
    branches_below: int
    ids: float
    ids_rel: float  # measured from half filling for hex, raw for square


def ids_at_gap(kind: str, P: int, Q: int, window: tuple[float, float]) -> IDSSample:
    lat = build_lattice(kind)
    edges = band_edges(kind, P, Q)
    g = gap_between(edges, *window)
    mu = 0.5 * (g[0] + g[1])
    nb = int(np.count_nonzero(edges[:, 1] < mu))
    val = nb / (Q * lat.cell_area)
    rel = val - (0.5 * lat.n_sites / lat.cell_area if kind == "hex" else 0.0)
    return IDSSample((P, Q), 2 * math.pi * P / Q, mu, g, nb, val, rel)


def ids_vs_flux(kind: str, n: int, fluxes, below_zero: bool = False, rational=(0, 1)) -> list[IDSSample]:
    """IDS in the gap tracked by Landau index ``n`` at each flux.

    ``fluxes`` are Fractions (flux / 2 pi).  ``rational=(p, q)`` tracks the
    near-rational levels, with h = flux - 2 pi p/q.
    """
    fluxes = [Fraction(f) for f in fluxes]
    if len(fluxes) < 3:
        raise ValueError("need at least 3 fluxes")
    p, q = rational
    out = []
    for fr in fluxes:
        h = 2 * math.pi * float(fr - Fraction(p, q))
        try:
            win = gap_window(kind, n, h, p, q, below_zero)
            out.append(ids_at_gap(kind, fr.numerator, fr.denominator, win))
        except GapClosedError as exc:
            raise GapClosedError(f"gap n={n} not open at flux 2pi*{fr}: {exc}") from exc
    return out


@dataclass
class HallResult:
    lattice: str
    gap_index: int
    below_zero: bool
    flux_list: list
    ids: list
    slope: float
    intercept: float
    gamma1: float
    gamma2: float
    two_pi_cH: float
    m: int
    fit_residual: float
    chern_sum: int | None = None
    agree: bool | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def streda(kind: str, samples: list[IDSSample], gap_index: int = 0, below_zero: bool = False,
           rational=(0, 1)) -> HallResult:
    """Least-squares slope of IDS against h; m = round(2 pi |b1 ^ b2| slope)."""
    if len(samples) < 3:
        raise ValueError("need at least 3 samples")
    lat = build_lattice(kind)
    p, q = rational
    hs = np.array([s.h - 2 * math.pi * p / q for s in samples])
    y = np.array([s.ids_rel for s in samples])
    A = np.stack([np.ones_like(hs), hs], axis=1)
    (c0, c1), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.max(np.abs(A @ np.array([c0, c1]) - y)))
    span = float(np.ptp(y)) or 1.0
    if resid > 1e-4 * span:
        raise ContractError(f"IDS is not affine in h (residual {resid:.2e}); gap mis-tracked")
    two_pi_cH = 2 * math.pi * lat.cell_area * c1
    m = int(round(two_pi_cH))
    # IDS = (gamma1 + gamma2 * flux/2pi) / |b1 ^ b2| in the total flux
    g2 = lat.cell_area * c1 * 2 * math.pi
    g1 = lat.cell_area * (c0 - c1 * 2 * math.pi * p / q)
    return HallResult(kind, gap_index, below_zero, [s.flux_pq for s in samples],
                      [s.ids for s in samples], float(c1), float(c0), float(g1), float(g2),
                      float(two_pi_cH), m, resid)


# --------------------------------------------------------------------------- Chern route


_CHERN_CACHE: dict[tuple, int] = {}


def chern_sums(kind: str, p: int, q: int, groups, n: int = 24, gap_tol: float = 1e-8) -> dict:
    """Fukui-Hatsugai Chern numbers of branch groups ``[(j0, j1), ...]`` in one grid sweep.

    Branches inside a group may touch; each group must stay separated from
    the branches just below and above it at every grid point.  Link
    variables are determinants of the group blocks of the full overlap
    matrices, so all groups share one eigen-decomposition per momentum.
    """
    if n < 4:
        raise ValueError("grid too small")
    groups = [tuple(g) for g in groups]
    todo = [g for g in groups if (kind, p, q, n, g) not in _CHERN_CACHE]
    if todo:
        ths = 2 * math.pi * np.arange(n) / n

        def row(i):
            ws, vs = [], []
            for t2 in ths:
                w, v = np.linalg.eigh(supercell_bloch(kind, p, q, (ths[i % n], t2)))
                ws.append(w)
                vs.append(v)
            ws = np.array(ws)
            for j0, j1 in todo:
                if j0 > 0 and np.min(ws[:, j0] - ws[:, j0 - 1]) < gap_tol:
                    raise GapClosedError(f"group [{j0},{j1}) touches the branch below at theta1 index {i % n}")
                if j1 < ws.shape[1] and np.min(ws[:, j1] - ws[:, j1 - 1]) < gap_tol:
                    raise GapClosedError(f"group [{j0},{j1}) touches the branch above at theta1 index {i % n}")
            return vs

        def links(a, b):
            M = a.conj().T @ b
            out = np.empty(len(todo), dtype=complex)
            for g, (j0, j1) in enumerate(todo):
                d = np.linalg.det(M[j0:j1, j0:j1])
                out[g] = d / abs(d)
            return out

        first = row(0)
        cur = first
        hcur = np.array([links(cur[j], cur[(j + 1) % n]) for j in range(n)])
        total = np.zeros(len(todo))
        for i in range(n):
            nxt = row(i + 1) if i + 1 < n else first
            vert = np.array([links(cur[j], nxt[j]) for j in range(n)])
            hnxt = np.array([links(nxt[j], nxt[(j + 1) % n]) for j in range(n)])
            vshift = np.roll(vert, -1, axis=0)
            total += np.angle(vert * hnxt / (vshift * hcur)).sum(axis=0)
            cur, hcur = nxt, hnxt
        for g, val in zip(todo, total / (2 * math.pi)):
            ci = int(round(val))
            if abs(val - ci) > 1e-6:
                raise ContractError(f"non-integer link-variable sum {val} for group {g}")
            _CHERN_CACHE[(kind, p, q, n, g)] = ci
    return {g: _CHERN_CACHE[(kind, p, q, n, g)] for g in groups}


def chern_group(kind: str, p: int, q: int, j0: int, j1: int, n: int = 24, gap_tol: float = 1e-8) -> int:
    """Chern number of branches [j0, j1) (0-indexed, ascending) of the q x 1 supercell."""
    return chern_sums(kind, p, q, [(j0, j1)], n, gap_tol)[(j0, j1)]


def chern_band(kind: str, p: int, q: int, band: int, n: int = 24) -> int:
    """Chern number of the single branch ``band``; requires n >= 24."""
    if n < 24:
        raise ValueError("chern_band needs a grid n >= 24")
    return chern_group(kind, p, q, band, band + 1, n)


def _zero_pair(p: int, q: int) -> tuple[int, int]:
    """Branch counts just below and just above the hex band cluster holding zero.

    Two branches (F_q, F_{q+1}) in the small-field case, more near other rationals.
    """
    e = band_edges("hex", p, q)
    lo, hi = min(_merged(e, tol=1e-7), key=lambda c: 0.0 if c[0] <= 0.0 <= c[1] else min(abs(c[0]), abs(c[1])))
    below = int(np.count_nonzero(e[:, 1] < lo))
    above = int(np.count_nonzero(e[:, 0] <= hi))
    return below, above


def hall_from_count(kind: str, p: int, q: int, n_below: int, n: int = 24, check_double: bool = True) -> int:
    """m = Chern sum of the lowest ``n_below`` branches, hex measured from half filling.

    For hex the half-filling value is the mean of the Chern sums of the
    branches below and through the zero band, which fixes the additive
    constant left free by the affine IDS structure.
    """
    groups = [(0, k) for k in {n_below} | (set(_zero_pair(p, q)) if kind == "hex" else set()) if k > 0]

    def sums(grid):
        d = chern_sums(kind, p, q, groups, grid)
        return lambda k: d[(0, k)] if k > 0 else 0

    csum = sums(n)
    if check_double:
        c2 = sums(2 * n)
        for g in groups:
            if c2(g[1]) != csum(g[1]):
                raise ContractError(f"Chern sum not grid-stable for {g}: n={n} gives {csum(g[1])}, 2n gives {c2(g[1])}")

    c = csum(n_below)
    if kind == "square":
        return c
    lo, hi = _zero_pair(p, q)
    c_half2 = csum(lo) + csum(hi)  # twice the half-filling value
    if c_half2 % 2:
        raise ContractError("half-filling Chern value is not an integer")
    return c - c_half2 // 2


def hall_in_gap(kind: str, p: int, q: int, gap: tuple[float, float] | int, n: int = 24) -> int:
    """Chern-route integer for a gap given as an energy window or a branch count."""
    if isinstance(gap, (int, np.integer)):
        nb = int(gap)
    else:
        edges = band_edges(kind, p, q)
        g = gap_between(edges, *gap)
        nb = int(np.count_nonzero(edges[:, 1] < 0.5 * (g[0] + g[1])))
    return hall_from_count(kind, p, q, nb, n)


# --------------------------------------------------------------------------- staircases


def small_field_hall(kind: str, n: int, qs=(48, 46, 44, 42, 40), below_zero: bool = False,
                     chern: bool = True, n_grid: int = 24) -> HallResult:
    """Streda integer over fluxes 2 pi / q, with the Chern-sum route at each flux."""
    return hall_staircase(kind, [(n, below_zero)], qs, chern, n_grid)[0]


def hall_staircase(kind: str, gaps, qs=(48, 46, 44, 42, 40), chern: bool = True,
                   n_grid: int = 24) -> list[HallResult]:
    """Several tracked gaps ``[(n, below_zero), ...]`` sharing one Chern sweep per flux."""
    fl = [Fraction(1, qq) for qq in qs]
    runs = []
    for n, below in gaps:
        samples = ids_vs_flux(kind, n, fl, below)
        runs.append((samples, streda(kind, samples, n, below)))
    if chern:
        for i, qq in enumerate(qs):
            counts = {r[0][i].branches_below for r in runs}
            groups = [(0, k) for k in counts | (set(_zero_pair(1, qq)) if kind == "hex" else set()) if k > 0]
            for grid in (n_grid, 2 * n_grid):
                chern_sums(kind, 1, qq, groups, grid)  # fills the cache for hall_from_count
        for samples, res in runs:
            ms = [hall_from_count(kind, s.flux_pq[0], s.flux_pq[1], s.branches_below, n_grid) for s in samples]
            res.extra["chern_per_flux"] = ms
            res.chern_sum = ms[0] if len(set(ms)) == 1 else None
            res.agree = len(set(ms)) == 1 and ms[0] == res.m
    return [r[1] for r in runs]


def near_rational_fluxes(p: int, q: int, Qs) -> list[Fraction]:
    return [Fraction(p, q) + Fraction(1, Q) for Q in Qs]


def near_rational_hall(p: int, q: int, n: int = 0, Qs=(120, 132, 144, 156, 168), chern: bool = False,
                       n_grid: int = 24) -> HallResult:
    """Streda integer for the n-th near-rational hex gap at fluxes 2 pi (p/q + 1/Q).

    ``chern=True`` adds the Chern-sum integer at every flux of the ladder.
    """
    fl = near_rational_fluxes(p, q, Qs)
    samples = ids_vs_flux("hex", n, fl, rational=(p, q))
    res = streda("hex", samples, n, rational=(p, q))
    res.extra["expected"] = (2 * n + 1) * q
    if chern:
        ms = [hall_from_count("hex", s.flux_pq[0], s.flux_pq[1], s.branches_below, n_grid) for s in samples]
        res.extra["chern_per_flux"] = ms
        res.chern_sum = ms[0] if len(set(ms)) == 1 else None
        res.agree = len(set(ms)) == 1 and ms[0] == res.m
    return res
