"""Finite-volume spectra, integrated density of states, ensemble DOS and trace-formula checks.

Normalization is per unit area: a torus of L1 x L2 cells has area
``L1 * L2 * |b1 ^ b2|``.  Dense diagonalization is used up to dimension
``DENSE_MAX``; above that the kernel-polynomial method (Chebyshev moments with
random-phase vectors and Jackson damping) takes over.  Clean rational-flux
tori are diagonalized exactly by Bloch reduction onto the ``q x 1`` supercell.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.fft

from .floquet import band_edges, floquet_family, supercell_bloch
from .lattice import Flux, build_lattice
from .operator import DisorderSpec, MagneticOperator, Region, build_hamiltonian

DENSE_MAX = 20000
KPM_MOMENTS = 2000


@dataclass
class SpectralData:
    kind: str
    flux: float
    shape: tuple[int, int]
    bc: str
    seed: int | None
    eigenvalues: np.ndarray = field(repr=False)
    cell_area: float = 1.0

    @property
    def area(self) -> float:
        return self.shape[0] * self.shape[1] * self.cell_area

    @property
    def norm(self) -> float:
        return 1.0 / self.area

    def ids(self, mu: float, tie_tol: float = 1e-9) -> float:
        return ids(self, mu, tie_tol)


def _meta_of(op: MagneticOperator) -> dict:
    seed = op.disorder.seed if op.disorder is not None else None
    return dict(
        kind=op.lattice.kind,
        flux=op.flux.value,
        shape=op.region.shape,
        bc=op.region.kind,
        seed=seed,
        cell_area=op.lattice.cell_area,
    )


def spectrum_finite(op: MagneticOperator) -> SpectralData:
    if op.dim > DENSE_MAX:
        raise ValueError(
            f"dimension {op.dim} exceeds the dense limit {DENSE_MAX}; use dos_curve (kernel-polynomial path)"
        )
    try:
        ev = np.linalg.eigvalsh(op.dense())
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"eigensolver failed for {_meta_of(op)}: {exc}") from exc
    return SpectralData(eigenvalues=ev, **_meta_of(op))


def torus_spectrum_clean(kind: str, p: int, q: int, L, twist=(0.0, 0.0)) -> SpectralData:
    """Exact spectrum of the clean torus at flux 2 pi p/q via the q x 1 supercell.

    Requires ``q | L1``.  Blocks are labelled by twists
    ``theta1 in (twist1 + 2 pi Z)/m`` with ``m = L1/q`` and
    ``theta2 in (twist2 + 2 pi Z)/L2``.
    """
    L1, L2 = (L, L) if np.isscalar(L) else L
    if L1 % q:
        raise ValueError(f"block decomposition needs q | L1 (q={q}, L1={L1})")
    m = L1 // q
    evs = []
    for j1 in range(m):
        for j2 in range(L2):
            th = ((twist[0] + 2 * math.pi * j1) / m, (twist[1] + 2 * math.pi * j2) / L2)
            evs.append(np.linalg.eigvalsh(supercell_bloch(kind, p, q, th)))
    ev = np.sort(np.concatenate(evs))
    lat = build_lattice(kind)
    return SpectralData(kind, 2 * math.pi * p / q, (L1, L2), "torus", None, ev, lat.cell_area)


def ids(data: SpectralData, mu: float, tie_tol: float = 1e-9) -> float:
    """#{E <= mu} per unit area; eigenvalues within ``tie_tol`` of mu count one half."""
    ev = data.eigenvalues
    below = np.count_nonzero(ev < mu - tie_tol)
    tie = np.count_nonzero(np.abs(ev - mu) <= tie_tol)
    return (below + 0.5 * tie) / data.area


def ids_floquet(kind: str, p: int, q: int, mu: float, n_grid: int = 48) -> float:
    """Band-measure IDS at flux 2 pi p/q: (# branches below mu) / (q |b1 ^ b2|).

    Inside a band the partial branch is measured on an ``n_grid^2`` k-grid.
    A mu inside a zero-width band counts it one half.
    """
    lat = build_lattice(kind)
    edges = band_edges(kind, p, q)
    full = np.count_nonzero(edges[:, 1] < mu)
    inside = np.nonzero((edges[:, 0] <= mu) & (mu <= edges[:, 1]))[0]
    frac = 0.0
    if inside.size:
        fam = floquet_family(kind, p, q)
        ks = 2 * math.pi * (np.arange(n_grid) + 0.5) / n_grid
        ev = np.linalg.eigvalsh(np.array([fam((a, b)) for a in ks for b in ks]))
        for j in inside:
            if edges[j, 1] - edges[j, 0] < 1e-12:
                frac += 0.5
            else:
                frac += np.count_nonzero(ev[:, j] <= mu) / n_grid**2
    return (full + frac) / (q * lat.cell_area)


# --------------------------------------------------------------------------- kernel polynomial method


def jackson(K: int) -> np.ndarray:
    n = np.arange(K)
    a = math.pi / (K + 1)
    return ((K - n + 1) * np.cos(a * n) + np.sin(a * n) / math.tan(a)) / (K + 1)


def random_phase_vectors(N: int, n_vec: int, seed: int, realization: int = 0) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, realization, 0x6B706D])))
    return np.exp(2j * math.pi * rng.random((N, n_vec)))


def spectral_bound(op: MagneticOperator) -> float:
    """Half-width of the Chebyshev window: covers [-1, 1] plus the potential range."""
    v = op.coupling * float(np.max(np.abs(op.potential))) if op.coupling else 0.0
    return 1.01 * (1.0 + v) + 1e-3


def kpm_moments(H, n_moments: int, vectors: np.ndarray, scale: float) -> np.ndarray:
    """Per-vector normalized moments r^* T_n(H/scale) r / N, shape (n_vec, K).

    Uses the doubling identities, so K moments need K/2 matrix products.
    """
    N, nv = vectors.shape
    K = n_moments
    Ht = H * (1.0 / scale)
    mu = np.zeros((nv, K))
    v0 = vectors
    v1 = Ht @ v0
    mu[:, 0] = np.einsum("ij,ij->j", v0.conj(), v0).real
    if K > 1:
        mu[:, 1] = np.einsum("ij,ij->j", v0.conj(), v1).real
    for n in range(1, (K + 1) // 2):
        mu[:, 2 * n] = 2 * np.einsum("ij,ij->j", v1.conj(), v1).real - mu[:, 0]
        if 2 * n + 1 < K:
            v2 = 2 * (Ht @ v1) - v0
            mu[:, 2 * n + 1] = 2 * np.einsum("ij,ij->j", v2.conj(), v1).real - mu[:, 1]
            v0, v1 = v1, v2
    return mu / N


def _theta(x):
    return np.arccos(np.clip(x, -1.0, 1.0))


def _cheb_window_integrals(K: int, x1: float, x2: float) -> np.ndarray:
    """I_n = int_{x1}^{x2} T_n(x) / (pi sqrt(1 - x^2)) dx for n < K + 1."""
    t1, t2 = _theta(x1), _theta(x2)
    n = np.arange(1, K + 1)
    out = np.empty(K + 1)
    out[0] = (t1 - t2) / math.pi
    out[1:] = (np.sin(n * t1) - np.sin(n * t2)) / (n * math.pi)
    return out


def kpm_window(mu: np.ndarray, lo: float, hi: float, scale: float, damp: bool = True) -> tuple[float, float]:
    """(state fraction, mean energy) of the KPM density restricted to [lo, hi]."""
    mu = np.atleast_2d(mu).mean(axis=0)
    K = mu.size
    g = jackson(K) if damp else np.ones(K)
    c = g * mu
    I = _cheb_window_integrals(K, lo / scale, hi / scale)
    w = np.full(K, 2.0)
    w[0] = 1.0
    mass = float(np.dot(w * c, I[:K]))
    # x T_n = (T_{n+1} + T_{|n-1|}) / 2
    Ix = np.empty(K)
    Ix[0] = I[1]
    Ix[1:] = 0.5 * (I[2 : K + 1] + I[0 : K - 1])
    first = float(np.dot(w * c, Ix)) * scale
    return mass, (first / mass if mass > 0 else float("nan"))


def kpm_bin_density(mu: np.ndarray, edges: np.ndarray, scale: float) -> np.ndarray:
    """Bin-averaged Jackson-damped KPM density (fraction per unit energy)."""
    mu = np.atleast_2d(mu).mean(axis=0)
    K = mu.size
    c = jackson(K) * mu
    w = np.full(K, 2.0)
    w[0] = 1.0
    x = np.clip(np.asarray(edges) / scale, -1.0, 1.0)
    th = _theta(x)
    n = np.arange(1, K)
    # cumulative integral from -1: (pi - theta)/pi * c0 - sum 2 c_n sin(n theta)/(n pi)
    cum = c[0] * (math.pi - th) / math.pi - (2.0 / math.pi) * (np.sin(np.outer(th, n)) / n) @ c[1:]
    return np.diff(cum) / np.diff(edges)


def chebyshev_coefficients(f, K: int, scale: float, n_nodes: int | None = None) -> np.ndarray:
    """Coefficients a_n with f(E) ~ a_0 + 2 sum a_n T_n(E/scale) (no damping)."""
    M = n_nodes or 4 * K
    th = math.pi * (np.arange(M) + 0.5) / M
    vals = f(scale * np.cos(th))
    a = scipy.fft.dct(vals, type=2) / (2 * M)
    return a[:K]


def kpm_trace(mu: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Per-vector estimates of tr f(H) / N from moments and Chebyshev coefficients."""
    mu = np.atleast_2d(mu)
    w = np.full(coeffs.size, 2.0)
    w[0] = 1.0
    return mu[:, : coeffs.size] @ (w * coeffs)


# --------------------------------------------------------------------------- DOS curves


@dataclass
class DOSCurve:
    edges: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    method: str = "histogram"
    meta: dict = field(default_factory=dict)

    @property
    def energies(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def total(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))

    def rows(self):
        return zip(self.energies, self.density, self.stderr)


def dos_curve(
    kind: str,
    flux: Flux | float,
    L,
    disorder: DisorderSpec | None = None,
    R: int = 1,
    edges=None,
    method: str = "auto",
    n_moments: int = KPM_MOMENTS,
    n_vec: int = 4,
    vec_seed: int = 0,
) -> DOSCurve:
    """Ensemble-mean DOS per unit area over ``R`` disorder realizations.

    ``method``: ``histogram`` (dense), ``kpm`` or ``auto`` (dense up to DENSE_MAX).
    KPM random vectors are keyed by ``(vec_seed, realization)``.  A clean
    operator is solved once, so its ensemble error is zero.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    lat = build_lattice(kind)
    reg = Region.torus(L)
    if edges is None:
        edges = np.linspace(-1.1, 1.1, 441)
    edges = np.asarray(edges, dtype=float)
    dens = []
    used = None
    clean = disorder is None or disorder.kind == "none" or disorder.coupling == 0.0
    for r in range(1 if clean else R):
        op = build_hamiltonian(lat, flux, reg, disorder, realization=r)
        if used is None:
            used = method if method != "auto" else ("histogram" if op.dim <= DENSE_MAX else "kpm")
        area = reg.n_cells * lat.cell_area
        if used == "histogram":
            ev = spectrum_finite(op).eigenvalues
            if ev[0] < edges[0] or ev[-1] > edges[-1]:
                raise ValueError("energy grid does not cover the spectrum")
            cnt, _ = np.histogram(ev, bins=edges)
            dens.append(cnt / area / np.diff(edges))
        else:
            s = spectral_bound(op)
            if edges[0] > -s or edges[-1] < s:
                edges = np.concatenate(([min(edges[0], -s)], edges[1:-1], [max(edges[-1], s)]))
            mu = kpm_moments(op.matrix, n_moments, random_phase_vectors(op.dim, n_vec, vec_seed, r), s)
            dens.append(kpm_bin_density(mu, edges, s) * op.dim / area)
    dens = np.array(dens)
    if clean:
        dens = np.repeat(dens, R, axis=0)
    mean = dens.mean(axis=0)
    err = dens.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(mean)
    meta = dict(kind=kind, flux=float(getattr(flux, "value", flux)), L=L, R=R, method=used,
                n_moments=n_moments if used == "kpm" else None,
                disorder=asdict(disorder) if disorder is not None else None)
    return DOSCurve(edges, mean, err, used, meta)


# --------------------------------------------------------------------------- trace formula


def bump(center: float, width: float):
    """Standard mollifier exp(1 - 1/(1 - u^2)) on |u| < 1, u = (E - center)/width; peak 1."""

    def f(E):
        u = (np.asarray(E, dtype=float) - center) / width
        out = np.zeros_like(u)
        m = np.abs(u) < 1
        out[m] = np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2))
        return out

    return f


def hex_weight(h: float) -> float:
    return h / (math.pi * build_lattice("hex").cell_area)


def square_weight(h: float) -> float:
    return h / (2 * math.pi)


def _clean_clusters(kind, p, q, tol=1e-4):
    # Landau bands may consist of branches separated by tiny gaps; group them
    from .semiclassics import measured_clusters

    return measured_clusters(kind, p, q, tol)


def _broadened_ok(clusters, i, lo_shift, hi_shift, support):
    """Band ``i`` widened by [lo_shift, hi_shift] (a rigorous bound for H_0 + lam V)
    lies inside the support while both widened neighbours stay outside it."""
    a, b = support
    lo, hi = clusters[i, 0] + lo_shift, clusters[i, 1] + hi_shift
    below = clusters[i - 1, 1] + hi_shift if i > 0 else -np.inf
    above = clusters[i + 1, 0] + lo_shift if i + 1 < len(clusters) else np.inf
    return a < lo and hi < b and below <= a and b <= above


class BandOverlapError(RuntimeError):
    pass


@dataclass
class TraceReport:
    kind: str
    q_flux: int
    L: int
    R: int
    n_vec: int
    center: float
    width: float
    disorder: dict
    lambdas: list
    measured: list
    measured_stderr: list
    prediction: list
    prediction_clean: list
    residual: list
    residual_stderr: list
    residual_rel_semiclassical: list
    band_mass: list
    band_mass_expected: float
    band_center_shift: list
    kpm_residual_exponent: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def trace_formula_check(
    kind: str,
    q_flux: int,
    L: int,
    disorder: DisorderSpec,
    R: int,
    lambdas=(0.02,),
    level: int = 1,
    width: float | None = None,
    n_moments: int = KPM_MOMENTS,
    n_vec: int = 4,
    vec_seed: int = 0,
) -> TraceReport:
    """Compare tr~ f(H_{lam,omega}) with the Landau-level prediction at flux 2 pi/q_flux.

    f is a mollifier bump at the semiclassical level ``z_level``.  For each
    lambda the report holds

    * measured: ensemble mean of tr~ f(H) (KPM; random-phase vectors drawn per
      realization and shared across the lambda ladder);
    * prediction: sum_n w f(z_n + lam E(V)) with the semiclassical z_n;
    * prediction_clean: tr~ f(H_0 + lam Vbar) on the clean torus, with Vbar the
      realization's empirical mean, estimated with the same vectors (control
      variate for the residual);
    * band mass and centre shift of the band holding z_level.
    """
    from .semiclassics import landau_levels_hex, landau_levels_square

    lat = build_lattice(kind)
    h = 2 * math.pi / q_flux
    flux = Flux.rational(1, q_flux)
    reg = Region.torus(L)
    area = reg.n_cells * lat.cell_area
    if kind == "hex":
        tab = landau_levels_hex(h, level + 3)
        w_level = hex_weight(h)
    else:
        tab = landau_levels_square(h, level + 3)
        w_level = square_weight(h)
    z = {lv.n: lv.z for lv in tab.levels}
    zc = z[level]
    clusters = _clean_clusters(kind, 1, q_flux)
    i_band = int(np.argmin(np.abs(clusters.mean(axis=1) - zc)))
    lo_gap = 0.5 * (clusters[i_band - 1, 1] + clusters[i_band, 0])
    hi_gap = 0.5 * (clusters[i_band, 1] + clusters[i_band + 1, 0])
    vmin, vmax = _law_range(disorder)
    lmax = max(lambdas)
    if width is None:
        width = _auto_width(clusters, i_band, zc, lmax * vmin, lmax * vmax)
    support = (zc - width, zc + width)
    f = bump(zc, width)
    clean_mid = float(clusters[i_band].mean())

    H0 = build_hamiltonian(lat, flux, reg).matrix
    N = H0.shape[0]
    scale = 1.01 * (1.0 + lmax * max(abs(vmin), abs(vmax))) + 1e-3
    coeffs = chebyshev_coefficients(f, n_moments, scale)

    out = dict(measured=[], measured_stderr=[], prediction=[], prediction_clean=[], residual=[],
               residual_stderr=[], residual_rel_semiclassical=[], band_mass=[], band_center_shift=[])
    for lam in lambdas:
        if not _broadened_ok(clusters, i_band, lam * vmin, lam * vmax, support):
            raise BandOverlapError(
                f"lambda={lam}: disorder-broadened bands overlap or cut the bump support"
            )
        d = disorder.with_coupling(lam)
        meas, clean, mass, shift = [], [], [], []
        for r in range(R):
            op = build_hamiltonian(lat, flux, reg, d, realization=r)
            # vectors are common to the lambda ladder, independent across realizations
            vecs = random_phase_vectors(N, n_vec, vec_seed, r)
            mu = kpm_moments(op.matrix, n_moments, vecs, scale)
            vbar = float(op.potential.mean())
            H0s = H0 + lam * vbar * _identity(N)
            mu0 = kpm_moments(H0s, n_moments, vecs, scale)
            meas.append(kpm_trace(mu, coeffs) * N / area)
            clean.append(kpm_trace(mu0, coeffs) * N / area)
            m, c = kpm_window(mu, lo_gap + lam * vmin, hi_gap + lam * vmax, scale)
            mass.append(m * N / area)
            shift.append(c - clean_mid)
        meas = np.array(meas)  # (R, n_vec)
        clean = np.array(clean)
        diff = (meas - clean).ravel()
        n_s = diff.size
        pred = sum(w_level * float(f(np.array([zn + lam * disorder.mean]))[0]) for zn in z.values())
        out["measured"].append(float(meas.mean()))
        out["measured_stderr"].append(float(meas.std(ddof=1) / math.sqrt(meas.size)) if meas.size > 1 else 0.0)
        out["prediction"].append(pred)
        out["prediction_clean"].append(float(clean.mean()))
        out["residual"].append(float(diff.mean()))
        out["residual_stderr"].append(float(diff.std(ddof=1) / math.sqrt(n_s)) if n_s > 1 else 0.0)
        out["residual_rel_semiclassical"].append(abs(float(meas.mean()) - pred) / abs(pred))
        out["band_mass"].append(float(np.mean(mass)))
        out["band_center_shift"].append(float(np.mean(shift)))
    expo = None
    if len(lambdas) >= 2:
        res = np.abs(np.array(out["residual"]))
        if np.all(res > 0):
            expo = float(np.polyfit(np.log(lambdas), np.log(res), 1)[0])
    return TraceReport(kind, q_flux, L, R, n_vec, zc, width, asdict(disorder), list(lambdas),
                       band_mass_expected=w_level, kpm_residual_exponent=expo, **out)


def window_eigenvalues(H, center: float, radius: float, k0: int) -> np.ndarray:
    """All eigenvalues of sparse Hermitian H within ``radius`` of ``center``.

    Shift-invert Lanczos returns the k nearest eigenvalues; k grows until the
    farthest one lies beyond ``radius``, which certifies completeness.
    Small matrices are diagonalized densely.
    """
    import scipy.sparse.linalg as sla

    N = H.shape[0]
    if N <= 4000:
        ev = np.linalg.eigvalsh(H.toarray())
        return ev[np.abs(ev - center) <= radius]
    k = max(k0, 8)
    while True:
        if k >= N - 1:
            ev = np.linalg.eigvalsh(H.toarray())
            return ev[np.abs(ev - center) <= radius]
        w = np.sort(sla.eigsh(H, k=k, sigma=center, which="LM", return_eigenvectors=False))
        if np.max(np.abs(w - center)) > radius:
            return w[np.abs(w - center) <= radius]
        k = int(1.5 * k) + 1


@dataclass
class ScalingReport:
    kind: str
    q_flux: int
    L: int
    R: int
    center: float
    width: float
    disorder: dict
    lambdas: list
    residual: list
    residual_stderr: list
    per_realization_exponents: list
    lambda_scaling_exponent: float

    def to_dict(self) -> dict:
        return asdict(self)


def lambda_scaling(
    kind: str,
    q_flux: int,
    L: int,
    disorder: DisorderSpec,
    lambdas=(0.005, 0.01, 0.02, 0.04),
    R: int = 4,
    level: int = 1,
    width: float | None = None,
) -> ScalingReport:
    """Exponent p of |tr~ f(H_lam) - tr~ f(H_0 + lam Vbar)| ~ lam^p with exact eigenvalues.

    Eigenvalues inside the bump support come from shift-invert Lanczos; the
    clean spectrum from the Bloch block decomposition.  Each realization's
    potential is reused for every lambda (common random numbers).  With Vbar
    the empirical mean, the first-order term cancels identically because the
    clean diagonal of f'(H_0) is translation invariant.
    """
    from .semiclassics import landau_levels_hex, landau_levels_square

    lat = build_lattice(kind)
    h = 2 * math.pi / q_flux
    flux = Flux.rational(1, q_flux)
    reg = Region.torus(L)
    area = reg.n_cells * lat.cell_area
    tab = landau_levels_hex(h, level + 1) if kind == "hex" else landau_levels_square(h, level + 1)
    zc = tab.level(level).z
    clusters = _clean_clusters(kind, 1, q_flux)
    i_band = int(np.argmin(np.abs(clusters.mean(axis=1) - zc)))
    vmin, vmax = _law_range(disorder)
    lmax = max(lambdas)
    if width is None:
        width = _auto_width(clusters, i_band, zc, lmax * vmin, lmax * vmax)
    for lam in lambdas:
        if not _broadened_ok(clusters, i_band, lam * vmin, lam * vmax, (zc - width, zc + width)):
            raise BandOverlapError(f"lambda={lam}: disorder-broadened bands overlap or cut the bump support")
    f = bump(zc, width)
    clean = torus_spectrum_clean(kind, 1, q_flux, L).eigenvalues
    n_band = int(np.count_nonzero(np.abs(clean - zc) <= width))
    res = np.zeros((R, len(lambdas)))
    for r in range(R):
        for j, lam in enumerate(lambdas):
            op = build_hamiltonian(lat, flux, reg, disorder.with_coupling(lam), realization=r)
            vbar = float(op.potential.mean())
            ev = window_eigenvalues(op.matrix, zc, width, n_band + n_band // 2 + 10)
            res[r, j] = (f(ev).sum() - f(clean + lam * vbar).sum()) / area
    mean = res.mean(axis=0)
    err = res.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros(len(lambdas))
    lg = np.log(lambdas)
    per = [float(np.polyfit(lg, np.log(np.abs(row)), 1)[0]) for row in res]
    expo = float(np.polyfit(lg, np.log(np.abs(mean)), 1)[0])
    return ScalingReport(kind, q_flux, L, R, zc, width, asdict(disorder), list(lambdas),
                         mean.tolist(), err.tolist(), per, expo)


def _auto_width(clusters, i, zc, lo_shift, hi_shift, margin=0.95):
    below = clusters[i - 1, 1] + hi_shift if i > 0 else -np.inf
    above = clusters[i + 1, 0] + lo_shift if i + 1 < len(clusters) else np.inf
    return margin * min(zc - below, above - zc)


def _identity(N):
    import scipy.sparse as sp

    return sp.identity(N, format="csr", dtype=complex)


def _law_range(d: DisorderSpec) -> tuple[float, float]:
    if d.kind == "uniform":
        return d.params
    if d.kind == "bernoulli":
        return -d.params[0], d.params[0]
    if d.kind == "two_point":
        v1, v2, _ = d.params
        return min(v1, v2), max(v1, v2)
    return 0.0, 0.0


# --------------------------------------------------------------------------- near-rational weight


@dataclass
class RationalTraceReport:
    p: int
    q: int
    Q: int
    flux: tuple[int, int]
    h: float
    level: int
    band: tuple[float, float]
    branches: int
    mass: float
    expected: float
    rel_err: float
    level_pred: float
    level_meas: float

    def to_dict(self) -> dict:
        return asdict(self)


def trace_formula_check_rational(p: int, q: int, Q: int, level: int = 1) -> RationalTraceReport:
    """Band mass near zero at flux 2 pi (p/q + 1/Q), compared with q h/(pi |b1 ^ b2|).

    The band of level ``level`` (counted upward from the zero band) is read
    from the exact band edges; its mass is (#branches)/(q_tot |b1 ^ b2|), the
    per-area eigenvalue count of every torus compatible with the flux.
    """
    from fractions import Fraction

    from .semiclassics import leading_hex, measured_clusters

    fr = Fraction(p, q) + Fraction(1, Q)
    P, Qt = fr.numerator, fr.denominator
    h = 2 * math.pi / Q
    lat = build_lattice("hex")
    edges = band_edges("hex", P, Qt)
    cl = measured_clusters("hex", P, Qt)
    i0 = int(np.argmin(np.abs(cl.mean(axis=1))))
    lo, hi = cl[i0 + level]
    n_br = int(np.count_nonzero((edges[:, 0] >= lo - 1e-9) & (edges[:, 1] <= hi + 1e-9)))
    mass = n_br / (Qt * lat.cell_area)
    expected = q * h / (math.pi * lat.cell_area)
    return RationalTraceReport(
        p, q, Q, (P, Qt), h, level, (float(lo), float(hi)), n_br, mass, expected,
        abs(mass - expected) / expected, leading_hex(h, level, p, q), float(0.5 * (lo + hi)),
    )


def rational_torus_mass(p: int, q: int, Q: int, level: int = 1, L: int | None = None) -> float:
    """Same band mass from an explicit clean torus diagonalization (block route)."""
    from fractions import Fraction

    from .semiclassics import measured_clusters

    fr = Fraction(p, q) + Fraction(1, Q)
    P, Qt = fr.numerator, fr.denominator
    L = L or Qt
    data = torus_spectrum_clean("hex", P, Qt, (L, L))
    cl = measured_clusters("hex", P, Qt)
    i0 = int(np.argmin(np.abs(cl.mean(axis=1))))
    lo = 0.5 * (cl[i0 + level - 1, 1] + cl[i0 + level, 0])
    hi = 0.5 * (cl[i0 + level, 1] + cl[i0 + level + 1, 0])
    return data.ids(hi) - data.ids(lo)
