"""Dirac cones of the hexagonal Floquet matrix at energy zero for rational flux.

Conventions: branches ``F_1 <= ... <= F_2q`` of ``M(k)`` and ``E_1 <= ... <= E_q``
of ``M_T(k)`` are 1-indexed in names and docstrings, 0-indexed in arrays.
The symplectic chart around the Dirac momentum is ``y = a (k1 + k2)`` and
``eta = b (k2 - k1 + offset)`` with ``2ab = 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .floquet import ContractError, _check_pq, floquet_hex, mt_matrix

A_SYMP = 2 ** -0.5 * 3 ** -0.25
B_SYMP = 2 ** -0.5 * 3 ** 0.25
VF_SMALL_FIELD = 3 ** -0.75


def dirac_momentum(p: int, q: int) -> tuple[float, float]:
    _check_pq(p, q)
    a = (math.pi / (3 * q)) if q % 2 == 0 else (2 * math.pi / (3 * q))
    return (a, -a)


def _offset(q: int) -> float:
    return 2 * math.pi / (3 * q) if q % 2 == 0 else 4 * math.pi / (3 * q)


def symplectic_to_k(q: int, y, eta, sign: int = 1):
    """Inverse of the chart at ``sign * k_tilde``."""
    off = sign * _offset(q)
    s = np.asarray(y) / A_SYMP
    d = np.asarray(eta) / B_SYMP - off
    return 0.5 * (s - d), 0.5 * (s + d)


def k_to_symplectic(q: int, k, sign: int = 1):
    off = sign * _offset(q)
    return A_SYMP * (k[0] + k[1]), B_SYMP * (k[1] - k[0] + off)


def hex_branches(p: int, q: int, k) -> np.ndarray:
    return np.linalg.eigvalsh(floquet_hex(p, q, k))


def verify_touching(p: int, q: int) -> float:
    """max(|F_q(k~)|, |F_{q+1}(k~)|); raises if above 1e-6."""
    F = hex_branches(p, q, dirac_momentum(p, q))
    res = float(max(abs(F[q - 1]), abs(F[q])))
    if res > 1e-6:
        raise ContractError(f"no touching at zero for p/q={p}/{q}: residual {res:.3e}")
    return res


def _E1(p, q, k):
    return np.linalg.eigvalsh(mt_matrix(p, q, k))[0]


def hessian_formula(p: int, q: int) -> np.ndarray:
    E = np.linalg.eigvalsh(mt_matrix(p, q, dirac_momentum(p, q)))
    pref = 2 * q**2 / np.prod(E[1:] + 3.0)
    return pref * np.array([[1.0, -0.5], [-0.5, 1.0]])


def _fd_hessian(f, k0, step):
    k0 = np.asarray(k0, dtype=float)
    e = np.eye(2) * step
    f0 = f(k0)
    H = np.empty((2, 2))
    for i in range(2):
        H[i, i] = (f(k0 + e[i]) - 2 * f0 + f(k0 - e[i])) / step**2
    H[0, 1] = H[1, 0] = (
        f(k0 + e[0] + e[1]) - f(k0 + e[0] - e[1]) - f(k0 - e[0] + e[1]) + f(k0 - e[0] - e[1])
    ) / (4 * step**2)
    return H


def hessian_E1(p: int, q: int, step: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Measured (Richardson-extrapolated central differences) and closed-form Hessian of E_1 at k~."""
    _check_pq(p, q)
    kt = dirac_momentum(p, q)
    E = np.linalg.eigvalsh(mt_matrix(p, q, kt))
    if q > 1 and E[1] - E[0] < 1e-8:
        raise ContractError(f"lowest eigenvalue of M_T is degenerate at k~ for p/q={p}/{q}")

    def f(k):
        return _E1(p, q, k)

    h1 = _fd_hessian(f, kt, step)
    h2 = _fd_hessian(f, kt, step / 2)
    measured = (4 * h2 - h1) / 3
    return measured, hessian_formula(p, q)


def slope_fermivel(p: int, q: int) -> float:
    """q 3^{-3/4} 3^{-(q-1)} / prod_{j=q+2}^{2q} F_j(k~)."""
    F = hex_branches(p, q, dirac_momentum(p, q))
    return q * 3**-0.75 * 3.0 ** (-(q - 1)) / float(np.prod(F[q + 1 :]))


def slope_well(p: int, q: int) -> float:
    """q / (3^{3/4} sqrt(2 prod_{j=2}^q (E_j(k~) + 3)))."""
    E = np.linalg.eigvalsh(mt_matrix(p, q, dirac_momentum(p, q)))
    return q / (3**0.75 * math.sqrt(2 * float(np.prod(E[1:] + 3.0))))


@dataclass
class DiracReport:
    p: int
    q: int
    k_tilde: tuple[float, float]
    residual: float
    slope_fit: float  # Fermi-velocity normalization: sqrt(2) x geometric slope
    slope_fit_geometric: float  # slope of F_{q+1} against r = |(y, eta)|
    slope_formula_fermivel: float
    slope_formula_well: float
    matches: str
    rel_err_fermivel: float
    rel_err_well: float
    slope_fit_minus: float
    anisotropy: float
    nonlinearity: float
    raw_k_slopes: list
    hessian_measured: list
    hessian_formula: list
    hessian_rel_err: float
    minimality_margin: float

    def to_dict(self) -> dict:
        return asdict(self)


def _ring_fit(p, q, sign, radii, n_dir):
    th = 2 * np.pi * np.arange(n_dir) / n_dir
    per_dir = []
    rs, Fs = [], []
    for t in th:
        Fd = []
        for r in radii:
            k1, k2 = symplectic_to_k(q, r * math.cos(t), r * math.sin(t), sign)
            Fd.append(hex_branches(p, q, (k1, k2))[q])
        Fd = np.array(Fd)
        # linear coefficient of F = s r + c r^2, so curvature does not masquerade as anisotropy
        coef, *_ = np.linalg.lstsq(np.stack([radii, radii**2], axis=1), Fd, rcond=None)
        per_dir.append(float(coef[0]))
        rs.append(radii)
        Fs.append(Fd)
    rs = np.concatenate(rs)
    Fs = np.concatenate(Fs)
    s = float(np.dot(rs, Fs) / np.dot(rs, rs))
    nonlin = float(np.max(np.abs(Fs - s * rs) / (s * rs)))
    per_dir = np.array(per_dir)
    aniso = float((per_dir.max() - per_dir.min()) / s)
    return s, aniso, nonlin


def cone_slope(p: int, q: int, r_min=1e-3, r_max=1e-2, n_r: int = 8, n_dir: int = 16) -> dict:
    """Fit the cone F_{q+1} ~ s r on rings around +-k~ in symplectic coordinates."""
    verify_touching(p, q)
    radii = np.geomspace(r_min, r_max, n_r)
    s_plus, aniso, nonlin = _ring_fit(p, q, +1, radii, n_dir)
    s_minus, _, _ = _ring_fit(p, q, -1, radii, n_dir)
    if nonlin > 0.05:
        warnings.warn(f"cone nonlinearity {nonlin:.3f} exceeds 5% of the slope; shrink the rings")
    kt = np.array(dirac_momentum(p, q))
    raw = []
    for d in ((1.0, 0.0), (0.0, 1.0), (1 / math.sqrt(2), 1 / math.sqrt(2))):
        r = 1e-4
        raw.append(float(hex_branches(p, q, kt + r * np.array(d))[q] / r))
    return {
        "geometric": s_plus,
        "geometric_minus": s_minus,
        "fermi_velocity": math.sqrt(2) * s_plus,
        "fermi_velocity_minus": math.sqrt(2) * s_minus,
        "formula_fermivel": slope_fermivel(p, q),
        "formula_well": slope_well(p, q),
        "anisotropy": aniso,
        "nonlinearity": nonlin,
        "raw_k": raw,
    }


def minimality_margin(p: int, q: int, n: int = 48) -> float:
    """min over a 2pi/q cell grid of E_1 minus E_1(k~) (should be >= -1e-9)."""
    kt = dirac_momentum(p, q)
    e0 = _E1(p, q, kt)
    ks = kt[0] + (2 * np.pi / q) * (np.arange(n) / n - 0.5)
    ks2 = kt[1] + (2 * np.pi / q) * (np.arange(n) / n - 0.5)
    vals = [_E1(p, q, (a, b)) for a in ks for b in ks2]
    return float(min(vals) - e0)


def dirac_report(p: int, q: int) -> DiracReport:
    res = verify_touching(p, q)
    cs = cone_slope(p, q)
    hm, hf = hessian_E1(p, q)
    vf, vw = cs["formula_fermivel"], cs["formula_well"]
    e_f = abs(cs["fermi_velocity"] - vf) / vf
    e_w = abs(cs["geometric"] - vw) / vw
    if e_f < 0.01 and e_w < 0.01:
        matches = "fermivel (fermi-velocity normalization) and well (geometric slope)"
    elif e_f < 0.01:
        matches = "fermivel"
    elif e_w < 0.01:
        matches = "well"
    else:
        matches = "none"
    return DiracReport(
        p=p,
        q=q,
        k_tilde=dirac_momentum(p, q),
        residual=res,
        slope_fit=cs["fermi_velocity"],
        slope_fit_geometric=cs["geometric"],
        slope_formula_fermivel=vf,
        slope_formula_well=vw,
        matches=matches,
        rel_err_fermivel=e_f,
        rel_err_well=e_w,
        slope_fit_minus=cs["fermi_velocity_minus"],
        anisotropy=cs["anisotropy"],
        nonlinearity=cs["nonlinearity"],
        raw_k_slopes=cs["raw_k"],
        hessian_measured=hm.tolist(),
        hessian_formula=hf.tolist(),
        hessian_rel_err=float(np.max(np.abs(hm - hf)) / np.max(np.abs(hf))),
        minimality_margin=minimality_margin(p, q),
    )
