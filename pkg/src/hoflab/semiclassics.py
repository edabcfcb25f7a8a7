"""Phase-space areas, Bohr-Sommerfeld Landau levels and predicted Landau bands.

Area functions
--------------
square : F0(s) = area{2 - cos x - cos xi <= 2s} / (2 pi), the well at the
         band bottom -1 (energy -1 + s).
hex    : F0(s) = area{|1 + e^{ix} + e^{i xi}|^2 <= 9 s} / (4 pi), both Dirac
         wells, s = energy^2.
near-rational hex at flux 2 pi p/q + h:
         F0(s) = area{nu <= s} / (4 pi q^2) over [0, 2pi)^2 where
         nu(k) = (E_1(k) + 3) / 9 = F_{q+1}(k)^2 is the squared energy of the
         lowest positive branch.

The square and hex areas are computed by adaptive quadrature of the exact
chord length at fixed x; the near-rational area by integrating the radial
extent of each well along rays.  ``grid_area`` is an independent
cell-counting route.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.integrate import quad
from scipy.optimize import brentq

from .dirac import dirac_momentum, slope_fermivel
from .floquet import band_edges, mt_matrix

SQRT3 = math.sqrt(3.0)


# --------------------------------------------------------------------------- areas


def _chord_square(x, s):
    t = 2.0 - 2.0 * s - math.cos(x)
    if t <= -1.0:
        return 2 * math.pi
    if t >= 1.0:
        return 0.0
    return 2.0 * math.acos(t)


def phase_area_square(s: float) -> float:
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"s must lie in [0, 2], got {s}")
    if s == 0.0:
        return 0.0
    pts = []
    for c in (1.0 - 2.0 * s, 3.0 - 2.0 * s):
        if -1.0 < c < 1.0:
            pts.append(math.acos(c))
    val, _ = quad(_chord_square, 0.0, math.pi, args=(s,), points=pts or None, limit=400,
                  epsabs=1e-14, epsrel=1e-13)
    return 2.0 * val / (2 * math.pi)


def _chord_from(c, d_lo, r2):
    if d_lo <= 0.0:
        return 0.0
    if d_lo <= 1.0:
        return 4.0 * math.asin(math.sqrt(0.5 * d_lo))
    d_hi = ((2 * c + 1) ** 2 - r2) / (4 * c)  # 1 - t/c
    if d_hi <= 0.0:
        return 2 * math.pi
    return 2 * math.pi - 4.0 * math.asin(math.sqrt(0.5 * min(d_hi, 2.0)))


def _chord_hex(x, s):
    """Measure of {xi : |1 + e^{ix} + e^{i xi}|^2 <= 9s} for x in [0, pi].

    With c = cos(x/2) the condition is c cos(psi) <= t, t = (9s - 1 - 4c^2)/4.
    The distances of t/c to -1 and +1 are formed in factored form so that tiny
    wells keep full relative accuracy.
    """
    c = math.cos(0.5 * x)
    r2 = 9.0 * s
    if c < 1e-300:
        return 2 * math.pi if r2 >= 1.0 else 0.0
    return _chord_from(c, (r2 - (2 * c - 1) ** 2) / (4 * c), r2)


def _chord_hex_phi(phi, r):
    # c = (1 + r sin phi)/2 parametrizes the support when r < 1; includes dx/dphi
    c = 0.5 * (1.0 + r * math.sin(phi))
    d_lo = (r * math.cos(phi)) ** 2 / (4 * c)
    jac = r * math.cos(phi) / math.sqrt(1.0 - c * c)
    return _chord_from(c, d_lo, r * r) * jac


def phase_area_hex(s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    if s == 0.0:
        return 0.0
    r = 3.0 * math.sqrt(s)
    # the chord is symmetric under x -> 2pi - x, so integrate x in [0, pi] and double
    if r < 1.0:
        # support (2c - 1)^2 <= r^2 with square-root edges removed by the substitution
        # near the saddle (r -> 1) the chord varies on the scale of c_min = (1 - r)/2;
        # geometric break points in c resolve that layer
        c_min = 0.5 * (1.0 - r)
        pts = []
        c = 2 * c_min
        while c < 0.25:
            pts.append(math.asin((2 * c - 1.0) / r))
            c *= 2
        val, _ = quad(_chord_hex_phi, -0.5 * math.pi, 0.5 * math.pi, args=(r,), points=pts or None,
                      limit=400, epsabs=1e-14, epsrel=1e-11)
    else:
        # integrate in c = cos(x/2): dx = 2 dc / sqrt(1 - c^2); the chord is the
        # full circle for c <= (r - 1)/2
        c_full = min(1.0, 0.5 * (r - 1.0))
        val = 2 * math.pi * (math.pi - 2.0 * math.acos(c_full))
        if c_full < 1.0:
            part, _ = quad(lambda c: _chord_from(c, (9 * s - (2 * c - 1) ** 2) / (4 * c), 9 * s)
                           * 2.0 / math.sqrt(1.0 + c),
                           c_full, 1.0, weight="alg", wvar=(0.0, -0.5), limit=400,
                           epsabs=1e-14, epsrel=1e-12)
            val += part
    return 2.0 * val / (4 * math.pi)


def nu_rational(p: int, q: int, k) -> float:
    """Squared energy of the lowest non-negative hex branch, (E_1(k) + 3) / 9."""
    return (np.linalg.eigvalsh(mt_matrix(p, q, k))[0] + 3.0) / 9.0


def _well_radius(p, q, s, theta, r_hi):
    kt = np.array(dirac_momentum(p, q))
    d = np.array([math.cos(theta), math.sin(theta)])

    def f(r):
        return nu_rational(p, q, kt + r * d) - s

    r = r_hi / 8
    while f(r) < 0:
        r *= 1.5
        if r > r_hi:
            raise ValueError("well reaches the ray budget; level lies outside the trusted window")
    return brentq(f, 0.0, r, xtol=1e-14, rtol=1e-13)


def phase_area_rational(p: int, q: int, s: float, n_theta: int = 96) -> float:
    """Near-rational area function (leading order), valid while the 2q^2 wells are separate.

    The wells sit at the 2pi/q-translates of +-k~ and are congruent, so the
    total area is 2 q^2 times one well, whose area is (1/2) int r(theta)^2 dtheta
    (trapezoidal in theta, spectrally accurate for a smooth closed curve).
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0:
        return 0.0
    r_hi = 2 * math.pi / (3 * q)
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    r = np.array([_well_radius(p, q, s, t, r_hi) for t in th])
    area_well = 0.5 * np.mean(r**2) * 2 * math.pi
    return 2 * q**2 * area_well / (4 * math.pi * q**2)


def grid_area(func, level: float, n: int = 2048, refine: int = 4, chunk: int = 256) -> float:
    """Area of {func <= level} on [0, 2pi)^2 by cell counting with one refinement level.

    Cells whose corner values straddle ``level`` are subdivided ``refine x refine``
    and counted by sub-cell centres; other cells count fully or not at all.
    ``func`` must accept broadcast arrays (x, xi).
    """
    hstep = 2 * math.pi / n
    total = 0.0
    for i0 in range(0, n, chunk):
        xs = hstep * np.arange(i0, min(i0 + chunk, n) + 1)
        ys = hstep * np.arange(n + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        V = func(X, Y) <= level
        c = V[:-1, :-1].astype(int) + V[1:, :-1] + V[:-1, 1:] + V[1:, 1:]
        total += np.count_nonzero(c == 4) * hstep**2
        bi, bj = np.nonzero((c > 0) & (c < 4))
        if bi.size:
            sub = (np.arange(refine) + 0.5) / refine * hstep
            sx = xs[bi][:, None, None] + sub[None, :, None]
            sy = ys[bj][:, None, None] + sub[None, None, :]
            inside = func(sx, sy) <= level
            total += inside.sum() * (hstep / refine) ** 2
    return total


def square_symbol_shifted(x, xi):
    return 2.0 - np.cos(x) - np.cos(xi)


def hex_symbol_abs2(x, xi):
    return np.abs(1 + np.exp(1j * x) + np.exp(1j * xi)) ** 2


# --------------------------------------------------------------------------- Landau levels


@dataclass
class LandauLevel:
    n: int
    z: float
    target: float
    bs_residual: float
    pred_lo: float = float("nan")
    pred_hi: float = float("nan")
    meas_lo: float = float("nan")
    meas_hi: float = float("nan")
    gap_to_next: float = float("nan")

    @property
    def meas_mid(self) -> float:
        return 0.5 * (self.meas_lo + self.meas_hi)


@dataclass
class LandauTable:
    kind: str
    h: float
    p: int
    q: int
    levels: list[LandauLevel] = field(default_factory=list)
    truncated_at: int | None = None

    def level(self, n: int) -> LandauLevel:
        for lv in self.levels:
            if lv.n == n:
                return lv
        raise KeyError(n)

    def to_rows(self) -> list[dict]:
        rows = []
        for lv in self.levels:
            rows.append(
                {
                    "n": lv.n,
                    "z_pred": lv.z,
                    "band_lo_meas": lv.meas_lo,
                    "band_hi_meas": lv.meas_hi,
                    "abs_err": abs(lv.meas_mid - lv.z),
                    "gap_to_next": lv.gap_to_next,
                }
            )
        return rows

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


SQUARE_KAPPA_MAX = 0.2


def _solve_monotone(F, target, lo, hi):
    sol = brentq(lambda s: F(s) - target, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return sol, abs(F(sol) - target)


def landau_levels_square(h: float, n_max: int) -> LandauTable:
    """Levels z_n = -1 + kappa with F0(kappa) = (n - 1/2) h."""
    if not 0.0 < h <= 0.3:
        raise ValueError("square Landau levels need 0 < h <= 0.3")
    tab = LandauTable("square", h, 0, 1)
    for n in range(1, n_max + 1):
        target = (n - 0.5) * h
        if target >= phase_area_square(2.0):
            tab.truncated_at = n
            break
        kappa, res = _solve_monotone(phase_area_square, target, 0.0, 2.0)
        if kappa > SQUARE_KAPPA_MAX:
            tab.truncated_at = n
            break
        tab.levels.append(LandauLevel(n, -1.0 + kappa, target, res))
    return tab


def _periodic_components(mask: np.ndarray) -> int:
    lab, n = ndimage.label(mask)
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in ((lab[0, :], lab[-1, :]), (lab[:, 0], lab[:, -1])):
        for x, y in zip(a, b):
            if x and y:
                parent[find(x)] = find(y)
    return len({find(i) for i in range(1, n + 1)})


@lru_cache(maxsize=None)
def well_separation_level(p: int, q: int, n: int | None = None) -> float:
    """Largest s at which the 2q^2 wells {nu <= s} around the Dirac points are still disjoint.

    Grid estimate on an n x n momentum grid with periodic connected components,
    bisected to grid resolution; a lower bound up to the sampling error.
    """
    n = n or max(180, 60 * q)
    ks = 2 * np.pi * np.arange(n) / n
    nu = np.empty((n, n))
    for i, a in enumerate(ks):
        for j, b in enumerate(ks):
            nu[i, j] = nu_rational(p, q, (a, b))
    wells = 2 * q * q
    top = float(nu.max())
    lo = None
    for s in np.geomspace(top * 1e-4, top, 60):
        if _periodic_components(nu <= s) == wells:
            lo = s
        elif lo is not None:
            hi = s
            break
    if lo is None:
        raise ValueError(f"wells never resolved at p/q={p}/{q}; refine the grid")
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if _periodic_components(nu <= mid) == wells:
            lo = mid
        else:
            hi = mid
    return float(lo)


SEPARATION_MARGIN = 0.8


def hex_kappa_max(p: int, q: int) -> float:
    """Trusted energy window around zero: half the top of the lowest positive branch."""
    edges = band_edges("hex", p, q)
    return 0.5 * float(edges[q, 1])


def landau_levels_hex(h: float, n_max: int, p: int = 0, q: int = 1) -> LandauTable:
    """Levels z_n = sgn(n) kappa with F0(kappa^2) = |n| h; z_0 = 0.

    (p, q) = (0, 1) is the small-field case; otherwise the flux is 2 pi p/q + h
    and only the leading-order area enters.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    tab = LandauTable("hex", h, p, q)
    kmax = hex_kappa_max(p, q)
    if (p, q) == (0, 1):
        F = phase_area_hex
        s_hi = 1.0
    else:
        F = lambda s: phase_area_rational(p, q, s)  # noqa: E731
        # leading-order wells are only meaningful while they stay disjoint
        s_hi = min(kmax**2, SEPARATION_MARGIN * well_separation_level(p, q))
        kmax = math.sqrt(s_hi)
    pos = []
    for n in range(1, n_max + 1):
        target = n * h
        if target >= F(min(s_hi, kmax**2)):
            tab.truncated_at = n
            break
        s, res = _solve_monotone(F, target, 0.0, min(s_hi, kmax**2))
        pos.append((n, math.sqrt(s), target, res))
    levels = [LandauLevel(-n, -z, t, r) for n, z, t, r in reversed(pos)]
    levels.append(LandauLevel(0, 0.0, 0.0, 0.0))
    levels += [LandauLevel(n, z, t, r) for n, z, t, r in pos]
    tab.levels = levels
    return tab


def leading_hex(h: float, n: int, p: int = 0, q: int = 1) -> float:
    """sgn(n) v_F sqrt(|n| h) with v_F of the flux 2 pi p/q."""
    return math.copysign(slope_fermivel(p, q) * math.sqrt(abs(n) * h), n) if n else 0.0


def leading_square(h: float, n: int) -> float:
    return -1.0 + (n - 0.5) * h / 2.0


# --------------------------------------------------------------------------- predicted bands

# Half-width constants C_n in  w_n = C_n h^e, calibrated at flux 2 pi / 101 by
# ``calibrate_widths`` (scripts/calibrate_widths.py) and stored in data/widths.json.
WIDTH_EXPONENT = {"square": 3.0, "hex": 2.5}
CALIBRATION_FLUX_Q = 101
_WIDTH_FILE = Path(__file__).with_name("data") / "widths.json"


def calibrate_widths(q_flux: int = CALIBRATION_FLUX_Q, n_max: int = 6) -> dict:
    """C_n = max distance from z_n to the measured band edges, over h^e."""
    h = 2 * math.pi / q_flux
    out = {"version": 1, "q_flux": q_flux, "exponent": WIDTH_EXPONENT, "constants": {}}
    for kind in ("square", "hex"):
        tab = landau_table_measured(kind, q_flux, n_max)
        consts = {}
        for lv in tab.levels:
            if lv.n < 1:
                continue
            dev = max(abs(lv.meas_lo - lv.z), abs(lv.meas_hi - lv.z))
            consts[str(lv.n)] = dev / h ** WIDTH_EXPONENT[kind]
        out["constants"][kind] = consts
    return out


def load_widths(path: Path | None = None) -> dict[tuple[str, int], float]:
    path = path or _WIDTH_FILE
    if not path.exists():
        return {}
    data = json.loads(path.read_text())
    return {(k, int(n)): float(v) for k, d in data["constants"].items() for n, v in d.items()}


WIDTH_CONSTANTS: dict[tuple[str, int], float] = load_widths()


def predict_bands(h: float, p: int, q: int, n_max: int, kind: str = "hex") -> list[tuple[int, float, float]]:
    """Predicted bands ``(n, lo, hi)`` = z_n -+ C_n h^e.

    Levels without a calibrated constant get the largest calibrated constant
    of their lattice.
    """
    if kind == "square":
        tab = landau_levels_square(h, n_max)
    else:
        tab = landau_levels_hex(h, n_max, p, q)
    e = WIDTH_EXPONENT[kind]
    cs = [v for (k, _), v in WIDTH_CONSTANTS.items() if k == kind]
    default = max(cs) if cs else 0.0
    out = []
    for lv in tab.levels:
        c = WIDTH_CONSTANTS.get((kind, abs(lv.n)), default)
        w = c * h**e
        out.append((lv.n, lv.z - w, lv.z + w))
    return out


# --------------------------------------------------------------------------- matching to spectra


def measured_clusters(kind: str, p: int, q: int, tol: float = 1e-7) -> np.ndarray:
    """Spectral bands at flux 2 pi p/q with touching branches merged."""
    edges = band_edges(kind, p, q)
    out: list[list[float]] = []
    for lo, hi in sorted(map(tuple, edges)):
        if out and lo <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return np.array(out)


def match_levels(tab: LandauTable, clusters: np.ndarray) -> LandauTable:
    """Attach to every level the nearest measured band and the gap to the next band above."""
    for lv in tab.levels:
        d = np.where(
            (clusters[:, 0] <= lv.z) & (lv.z <= clusters[:, 1]),
            0.0,
            np.minimum(abs(clusters[:, 0] - lv.z), abs(clusters[:, 1] - lv.z)),
        )
        i = int(np.argmin(d))
        lv.meas_lo, lv.meas_hi = map(float, clusters[i])
        lv.gap_to_next = float(clusters[i + 1, 0] - clusters[i, 1]) if i + 1 < len(clusters) else float("nan")
    return tab


def landau_table_measured(kind: str, q_flux: int, n_max: int) -> LandauTable:
    """Landau table at flux 2 pi / q_flux matched against the exact band edges."""
    h = 2 * math.pi / q_flux
    tab = landau_levels_square(h, n_max) if kind == "square" else landau_levels_hex(h, n_max)
    return match_levels(tab, measured_clusters(kind, 1, q_flux))


def level_count(kind: str, q_flux: int, n_cap: int = 60) -> int:
    """N(h): consecutive levels n >= 1 sitting in distinct, disjoint measured bands."""
    tab = landau_table_measured(kind, q_flux, n_cap)
    seen = set()
    N = 0
    for lv in tab.levels:
        if lv.n < 1:
            continue
        key = (lv.meas_lo, lv.meas_hi)
        if key in seen:
            break
        seen.add(key)
        N += 1
    return N
