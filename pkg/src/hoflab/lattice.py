"""Square and honeycomb lattice geometry with symmetric-gauge Peierls phases.

Sites are keyed by an integer cell index ``gamma = (g1, g2)`` and a site index
``s`` inside the fundamental cell.  Every oriented edge starts at a site of
cell ``gamma`` and ends at a site of cell ``gamma + offset``.  Its phase is a
linear function of ``gamma``: ``A_e(gamma) = h * (c1*g1 + c2*g2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class EdgeType:
    name: str
    init_site: int
    term_site: int
    offset: tuple[int, int]
    phase_coeff: tuple[Fraction, Fraction]


@dataclass(frozen=True)
class LatticeSpec:
    kind: str
    basis: tuple[tuple[float, float], tuple[float, float]]
    cell_sites: tuple[tuple[float, float], ...]
    cell_area: float
    edge_types: tuple[EdgeType, ...]

    @property
    def n_sites(self) -> int:
        return len(self.cell_sites)

    @property
    def hop(self) -> float:
        """Magnitude of the hopping amplitude (1/4 square, 1/3 hex)."""
        return 0.25 if self.kind == "square" else 1.0 / 3.0

    def edge(self, name: str) -> EdgeType:
        for e in self.edge_types:
            if e.name == name or name in _ALIASES.get(e.name, ()):
                return e
        raise KeyError(f"unknown edge type {name!r} for {self.kind} lattice")

    def position(self, g1, g2, s) -> np.ndarray:
        """Geometric position(s) of site ``s`` in cell ``(g1, g2)``."""
        b = np.asarray(self.basis)
        r = np.asarray(self.cell_sites)[np.asarray(s)]
        g1 = np.asarray(g1, dtype=float)
        g2 = np.asarray(g2, dtype=float)
        return g1[..., None] * b[0] + g2[..., None] * b[1] + r


_ALIASES = {
    "up": ("f_up", "f↑"),
    "right": ("f_right", "f→"),
    "f": (),
    "g": (),
    "h": ("h_edge",),
}

_F = Fraction


def build_lattice(kind: str) -> LatticeSpec:
    if kind == "square":
        return LatticeSpec(
            kind="square",
            basis=((1.0, 0.0), (0.0, 1.0)),
            cell_sites=((0.0, 0.0),),
            cell_area=1.0,
            edge_types=(
                EdgeType("up", 0, 0, (0, 1), (_F(1, 2), _F(0))),
                EdgeType("right", 0, 0, (1, 0), (_F(0), _F(-1, 2))),
            ),
        )
    if kind == "hex":
        return LatticeSpec(
            kind="hex",
            basis=((1.5, SQRT3 / 2), (0.0, SQRT3)),
            cell_sites=((0.0, 0.0), (0.5, SQRT3 / 2)),
            cell_area=1.5 * SQRT3,
            edge_types=(
                EdgeType("f", 0, 1, (0, 0), (_F(1, 6), _F(-1, 6))),
                EdgeType("g", 0, 1, (-1, 0), (_F(1, 6), _F(2, 6))),
                EdgeType("h", 0, 1, (0, -1), (_F(-2, 6), _F(-1, 6))),
            ),
        )
    raise ValueError(f"lattice kind must be 'square' or 'hex', got {kind!r}")


def edge_phase(lat: LatticeSpec, edge_type: str | EdgeType, gamma, h) -> float:
    """Peierls phase of an edge whose initial vertex lies in cell ``gamma``."""
    e = edge_type if isinstance(edge_type, EdgeType) else lat.edge(edge_type)
    hv = h.value if isinstance(h, Flux) else h
    c1, c2 = e.phase_coeff
    g1, g2 = gamma
    return hv * (float(c1) * g1 + float(c2) * g2)


@dataclass(frozen=True)
class Flux:
    """Flux per fundamental cell, optionally carrying its rational form 2*pi*p/q."""

    value: float
    p: int | None = None
    q: int | None = None

    def __post_init__(self):
        if (self.p is None) != (self.q is None):
            raise ValueError("give both p and q or neither")
        if self.q is not None:
            if self.q < 1 or math.gcd(self.p, self.q) != 1:
                raise ValueError(f"need q >= 1 and gcd(p, q) = 1, got p={self.p}, q={self.q}")
            if abs(self.value - 2 * math.pi * self.p / self.q) >= 1e-14 * max(1.0, abs(self.value)):
                raise ValueError("value does not match 2*pi*p/q")

    @classmethod
    def rational(cls, p: int, q: int) -> "Flux":
        g = math.gcd(p, q)
        p, q = p // g, q // g
        return cls(2 * math.pi * p / q, p, q)

    @classmethod
    def from_fraction(cls, fr: Fraction) -> "Flux":
        return cls.rational(fr.numerator, fr.denominator)

    @property
    def is_rational(self) -> bool:
        return self.q is not None

    @property
    def hbar(self) -> float:
        return self.value / (2 * math.pi)


def flux_from_field(lat: LatticeSpec, B: float) -> Flux:
    return Flux(B * lat.cell_area)


def plaquette_loops(lat: LatticeSpec, gamma) -> list[list[tuple[int, int, int]]]:
    """Counter-clockwise vertex loops of the elementary plaquettes attached to cell ``gamma``.

    Vertices are ``(g1, g2, s)`` keys.  Square: the unit cell square.  Hex:
    the hexagon centred at ``r0(gamma) + (1, 0)``.
    """
    g1, g2 = gamma
    if lat.kind == "square":
        return [[(g1, g2, 0), (g1 + 1, g2, 0), (g1 + 1, g2 + 1, 0), (g1, g2 + 1, 0)]]
    centre = lat.position(g1, g2, 0) + np.array([1.0, 0.0])
    angles = np.pi * np.arange(6) / 3 + np.pi  # start at r0(gamma), go counter-clockwise
    loop = []
    for a in angles:
        x = centre + np.array([math.cos(a), math.sin(a)])
        loop.append(_locate(lat, x))
    return [loop]


def _locate(lat: LatticeSpec, x) -> tuple[int, int, int]:
    b = np.asarray(lat.basis).T
    for s, r in enumerate(lat.cell_sites):
        c = np.linalg.solve(b, np.asarray(x) - np.asarray(r))
        cr = np.rint(c)
        if np.allclose(c, cr, atol=1e-9):
            return int(cr[0]), int(cr[1]), s
    raise ValueError(f"{x} is not a lattice site")


def hop_phase(lat: LatticeSpec, a, b, h: float) -> float:
    """Phase picked up going from vertex ``a`` to neighbouring vertex ``b``.

    Equals ``A_e`` along the edge orientation and ``-A_e`` against it.
    """
    for e in lat.edge_types:
        for (x, y, sign) in ((a, b, 1.0), (b, a, -1.0)):
            if (
                x[2] == e.init_site
                and y[2] == e.term_site
                and y[0] - x[0] == e.offset[0]
                and y[1] - x[1] == e.offset[1]
            ):
                return sign * edge_phase(lat, e, (x[0], x[1]), h)
    raise ValueError(f"{a} and {b} are not neighbours")
