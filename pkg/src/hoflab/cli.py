"""``hoflab`` command line.

Exit codes: 0 success, 1 validation error, 2 numerical-contract failure.
Every output file carries metadata (version, config hash, sign convention):
CSV files as a single leading ``#`` JSON line, JSON files under ``"meta"``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .floquet import ContractError
from .operator import SIGN_CONVENTION, CommensurabilityError

SUBCOMMANDS = ("butterfly", "bands", "dirac", "chambers", "landau", "dos", "hall", "transport", "selfcheck")


class ValidationError(ValueError):
    pass


# --------------------------------------------------------------------------- config


@dataclass
class RunConfig:
    subcommand: str
    lattice: str = "hex"
    flux: str = "1/40"  # "p/q" (flux 2 pi p/q) or a real number (flux in radians)
    L: int = 40
    bc: str = "torus"
    disorder: str = "none"  # none | uniform:a:b | bernoulli:w | two_point:v1:v2:p
    lam: float = 0.0
    kgrid: int = 0  # 0: automatic (12 q, at least 24)
    out: str = ""
    seed: int = 0
    threads: int = 0  # 0: HOFLAB_THREADS or hardware
    q_max: int = 20
    n_max: int = 4
    level: int = 1
    below_zero: bool = False
    realizations: int = 1
    qs: str = "48,46,44,42,40"
    T: str = "2,4,8"
    center: float = float("nan")
    width: float = 0.0
    svg: str = ""

    # -- canonical form
    def canonical(self) -> str:
        return "\n".join(f"{f.name}={_fmt(getattr(self, f.name))}" for f in fields(self)) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        kv = parse_kv(text)
        if "subcommand" not in kv:
            raise ValidationError("config text lacks 'subcommand'")
        return cls.from_mapping(kv)

    @classmethod
    def from_mapping(cls, kv: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in kv.items():
            if k not in types:
                raise ValidationError(f"unknown config key {k!r}")
            out[k] = _coerce(k, types[k], v)
        return cls(**out)

    def config_hash(self) -> str:
        keep = {k: v for k, v in asdict(self).items() if k not in ("out", "threads", "svg")}
        blob = json.dumps(keep, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def metadata(self) -> dict:
        return {"version": __version__, "config_hash": self.config_hash(), "sign_convention": SIGN_CONVENTION,
                "subcommand": self.subcommand}

    # -- parsed views
    def flux_pq(self) -> tuple[int, int]:
        fr = _parse_fraction(self.flux)
        if fr is None:
            raise ValidationError(f"flux {self.flux!r} must be rational p/q here")
        return fr.numerator, fr.denominator

    def flux_obj(self):
        from .lattice import Flux

        fr = _parse_fraction(self.flux)
        return Flux.from_fraction(fr) if fr is not None else Flux(float(self.flux))

    def disorder_spec(self):
        from .operator import DisorderSpec

        parts = self.disorder.split(":")
        kind, vals = parts[0], tuple(float(x) for x in parts[1:])
        if kind == "none":
            return None
        try:
            return DisorderSpec(kind, vals, self.lam, self.seed)
        except ValueError as e:
            raise ValidationError(str(e)) from None

    def int_list(self, name: str) -> list[int]:
        return [int(x) for x in getattr(self, name).split(",") if x.strip()]

    def float_list(self, name: str) -> list[float]:
        return [float(x) for x in getattr(self, name).split(",") if x.strip()]

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ValidationError(f"unknown subcommand {self.subcommand!r}")
        if self.lattice not in ("square", "hex"):
            raise ValidationError("lattice must be 'square' or 'hex'")
        if self.bc not in ("torus", "box"):
            raise ValidationError("bc must be 'torus' or 'box'")
        for name in ("L", "q_max", "n_max", "realizations"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.kgrid < 0 or self.threads < 0 or self.level < 0 or self.lam < 0 or self.width < 0:
            raise ValidationError("kgrid, threads, level, lam and width must be non-negative")
        fr = _parse_fraction(self.flux)
        if fr is None:
            try:
                float(self.flux)
            except ValueError:
                raise ValidationError(f"cannot parse flux {self.flux!r}") from None
        self.disorder_spec()
        try:
            self.int_list("qs")
            self.float_list("T")
        except ValueError:
            raise ValidationError("qs and T must be comma-separated numbers") from None


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(name, typ, v):
    if not isinstance(v, str):
        return v
    t = typ if isinstance(typ, str) else typ.__name__
    try:
        if t == "bool":
            if v.lower() in ("1", "true", "yes"):
                return True
            if v.lower() in ("0", "false", "no"):
                return False
            raise ValueError
        if t == "int":
            return int(v)
        if t == "float":
            return float(v)
    except ValueError:
        raise ValidationError(f"bad value for {name}: {v!r}") from None
    return v


def _parse_fraction(s: str):
    s = str(s).strip()
    if "/" not in s:
        return None
    try:
        fr = Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"cannot parse flux {s!r}") from None
    if fr < 0:
        raise ValidationError("flux p/q must be non-negative")
    return fr


def parse_kv(text: str) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {ln}: expected key=value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


# --------------------------------------------------------------------------- output


def write_csv(path: Path, header: list[str], rows, meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (Fraction,)):
        return str(o)
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(type(o))


def write_json(path: Path, payload: dict, meta: dict) -> None:
    data = {"meta": meta, **payload}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def read_csv_meta(path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise ValueError("missing metadata line")
    return json.loads(first[2:])


# --------------------------------------------------------------------------- threads


def thread_count(cfg: RunConfig) -> int:
    if cfg.threads:
        return cfg.threads
    env = os.environ.get("HOFLAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError("HOFLAB_THREADS must be a positive integer") from None
        if n < 1:
            raise ValidationError("HOFLAB_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def _limit_threads(n: int):
    """BLAS/LAPACK pools are pinned to one thread whatever ``n`` is.

    Threaded BLAS reductions change the summation order and hence the last
    bits of the output; the thread count is still validated.
    """
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=1)


# --------------------------------------------------------------------------- subcommands


def _out(cfg, default):
    return Path(cfg.out or default)


def cmd_butterfly(cfg):
    from .floquet import butterfly

    recs = butterfly(cfg.lattice, cfg.q_max)
    path = _out(cfg, "butterfly.csv")
    write_csv(path, ["p", "q", "flux", "band_index", "lo", "hi"],
              ([r.p, r.q, r.flux, r.band_index, r.lo, r.hi] for r in recs), cfg.metadata())
    if cfg.svg:
        _butterfly_svg(Path(cfg.svg), recs)
    print(f"{len(recs)} band intervals -> {path}")


def _butterfly_svg(path, recs, w=800, hgt=600):
    els = []
    for r in recs:
        x = w * r.flux / (2 * math.pi)
        y0 = hgt * (1.1 - r.hi) / 2.2
        y1 = hgt * (1.1 - r.lo) / 2.2
        els.append(f'<line x1="{x:.2f}" y1="{y0:.2f}" x2="{x:.2f}" y2="{max(y1, y0 + 0.5):.2f}" stroke="black" stroke-width="1"/>')
    path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hgt}">\n' + "\n".join(els) + "\n</svg>\n")


def cmd_bands(cfg):
    from .floquet import bands, floquet_family

    p, q = cfg.flux_pq()
    n = cfg.kgrid or max(24, 12 * q)
    bs = bands(floquet_family(cfg.lattice, p, q), n, q)
    m = bs.branches.shape[-1]
    path = _out(cfg, "bands.csv")
    rows = ([*bs.kgrid[i, j], *bs.branches[i, j]] for i in range(n) for j in range(n))
    write_csv(path, ["k1", "k2"] + [f"F_{j + 1}" for j in range(m)], rows, cfg.metadata())
    for j, (lo, hi) in enumerate(bs.intervals):
        print(f"branch {j + 1}: [{lo:.12f}, {hi:.12f}]")
    print(f"-> {path}")


def cmd_dirac(cfg):
    from .dirac import dirac_report

    p, q = cfg.flux_pq()
    rep = dirac_report(p, q)
    if rep.residual >= 1e-8:
        raise ContractError(f"dirac: touching residual {rep.residual:.2e} >= 1e-8")
    path = _out(cfg, "dirac.json")
    write_json(path, rep.to_dict(), cfg.metadata())
    print(f"k_tilde={rep.k_tilde} residual={rep.residual:.2e} slope={rep.slope_fit:.10f} ({rep.matches}) -> {path}")


def cmd_chambers(cfg):
    from .floquet import chambers

    p, q = cfg.flux_pq()
    d = chambers(p, q)
    coeffs = d.coeffs.tolist()
    print("f coefficients (lam^0 .. lam^q):", " ".join(f"{c:.12g}" for c in coeffs))
    print(f"residual={d.residual:.3e} f(-3)={d.f_at_minus3:.12f} leading={d.leading:.12g}")
    if cfg.out:
        write_json(Path(cfg.out), {"p": p, "q": q, "coefficients": coeffs, "residual": d.residual,
                                   "f_at_minus3": d.f_at_minus3, "leading": d.leading}, cfg.metadata())


def cmd_landau(cfg):
    from .semiclassics import landau_table_measured

    p, q = cfg.flux_pq()
    if p != 1:
        raise ValidationError("landau takes flux 1/q (h = 2 pi/q)")
    tab = landau_table_measured(cfg.lattice, q, cfg.n_max)
    rows = tab.to_rows()
    cols = ["n", "z_pred", "band_lo_meas", "band_hi_meas", "abs_err", "gap_to_next"]
    path = _out(cfg, "landau.csv")
    write_csv(path, cols, ([r[c] for c in cols] for r in rows), cfg.metadata())
    for r in rows:
        print(f"n={r['n']} z={r['z_pred']:.8f} band=[{r['band_lo_meas']:.8f}, {r['band_hi_meas']:.8f}]")
    print(f"-> {path}")


def cmd_dos(cfg):
    from .dos import dos_curve, trace_formula_check

    if cfg.bc != "torus":
        raise ValidationError("dos runs on tori only")
    d = cfg.disorder_spec()
    curve = dos_curve(cfg.lattice, cfg.flux_obj(), cfg.L, d, cfg.realizations, vec_seed=cfg.seed)
    path = _out(cfg, "dos.csv")
    write_csv(path, ["energy", "density", "stderr"], curve.rows(), cfg.metadata())
    print(f"total weight {curve.total():.6f} per unit area ({curve.method}) -> {path}")
    if d is not None and cfg.level >= 1:
        p, q = cfg.flux_pq()
        if p != 1:
            return
        rep = trace_formula_check(cfg.lattice, q, cfg.L, d, cfg.realizations, (cfg.lam,), cfg.level,
                                  vec_seed=cfg.seed)
        tpath = path.with_name("trace_check.json")
        payload = {"inputs": {k: getattr(rep, k) for k in ("kind", "q_flux", "L", "R", "center", "width",
                                                          "disorder", "lambdas")},
                   "prediction": rep.prediction, "measurement": rep.measured, "residual": rep.residual,
                   "lambda_scaling_exponent": rep.kpm_residual_exponent, "report": rep.to_dict()}
        write_json(tpath, payload, cfg.metadata())
        print(f"trace check -> {tpath}")


def cmd_hall(cfg):
    from .hall import near_rational_hall, small_field_hall

    p, q = cfg.flux_pq()
    if p == 0:
        res = small_field_hall(cfg.lattice, cfg.level, tuple(cfg.int_list("qs")), cfg.below_zero)
        p, q = 0, 1
    else:
        if cfg.lattice != "hex":
            raise ValidationError("near-rational Hall staircases are implemented for hex")
        res = near_rational_hall(p, q, cfg.level, tuple(cfg.int_list("qs")))
    d = res.to_dict()
    payload = {"lattice": res.lattice, "p": p, "q": q, "gap_index": res.gap_index,
               "flux_list": [list(f) for f in res.flux_list], "ids": res.ids, "slope": res.slope,
               "two_pi_cH": res.two_pi_cH, "chern_sum": res.chern_sum, "agree": res.agree, "result": d}
    path = _out(cfg, "hall.json")
    write_json(path, payload, cfg.metadata())
    print(f"2 pi c_H = {res.two_pi_cH:.6f} -> m = {res.m}; chern = {res.chern_sum}; agree = {res.agree} -> {path}")


def cmd_transport(cfg):
    from .operator import Region, build_hamiltonian
    from .transport import FilterSpec, moments_and_cesaro

    if cfg.bc != "box":
        raise ValidationError("transport needs bc=box")
    op = build_hamiltonian(cfg.lattice, cfg.flux_obj(), Region.box(cfg.L), cfg.disorder_spec())
    zeta = FilterSpec(full=True) if math.isnan(cfg.center) or cfg.width == 0 else FilterSpec(cfg.center, cfg.width)
    run = moments_and_cesaro(op, zeta, cfg.float_list("T"), (2, 4))
    path = _out(cfg, "transport.csv")
    write_csv(path, ["t", "M2", "M4", "norm", "energy"], run.rows(), cfg.metadata())
    spec = {"lattice": cfg.lattice, "flux": cfg.flux, "L": cfg.L, "disorder": cfg.disorder, "lam": cfg.lam,
            "seed": cfg.seed, "filter": run.filter, "T_ladder": run.T_ladder}
    write_json(path.with_suffix(".json"), {"spec": spec, "beta": run.beta, "beta_residual": run.beta_residual,
                                           "cesaro": run.cesaro, "tail_bound": run.tail_bound,
                                           "filter_mass": run.filter_mass, "norm_drift": run.norm_drift,
                                           "energy_drift": run.energy_drift}, cfg.metadata())
    if run.norm_drift >= 1e-9:
        raise ContractError(f"transport: norm drift {run.norm_drift:.2e} >= 1e-9")
    print(f"beta={run.beta} -> {path}")


def cmd_selfcheck(cfg):
    from .selfcheck import run_checks

    results = run_checks()
    bad = [r for r in results if not r.ok]
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.value:.2e} (tol {r.tol:.0e})")
    if bad:
        raise ContractError(f"selfcheck: {len(bad)} of {len(results)} checks failed")


DISPATCH = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


# --------------------------------------------------------------------------- entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hoflab", description="Magnetic lattice spectra, Landau levels, DOS, Hall and transport.")
    ap.add_argument("--version", action="version", version=f"hoflab {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key=value file; flags override it")
        sp.add_argument("--p", type=int)
        sp.add_argument("--q", type=int)
        for f in fields(RunConfig):
            if f.name == "subcommand":
                continue
            flag = "--" + f.name.replace("_", "-")
            if f.type in (bool, "bool"):
                sp.add_argument(flag, action="store_const", const="true", default=None)
            else:
                sp.add_argument(flag, default=None)
    return ap


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    kv = {}
    if ns.config:
        try:
            kv.update(parse_kv(Path(ns.config).read_text()))
        except OSError as e:
            raise ValidationError(f"cannot read config: {e}") from None
        kv.pop("subcommand", None)
    for f in fields(RunConfig):
        v = getattr(ns, f.name, None)
        if f.name != "subcommand" and v is not None:
            kv[f.name] = v
    if ns.p is not None or ns.q is not None:
        if ns.p is None or ns.q is None:
            raise ValidationError("--p and --q go together")
        if ns.q < 1 or ns.p < 0 or math.gcd(ns.p, ns.q) != 1:
            raise ValidationError("need q >= 1, p >= 0 and gcd(p, q) = 1")
        kv["flux"] = f"{ns.p}/{ns.q}"
    cfg = RunConfig.from_mapping({"subcommand": ns.subcommand, **kv})
    cfg.validate()
    return cfg


def run(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        with _limit_threads(thread_count(cfg)):
            DISPATCH[cfg.subcommand](cfg)
    except (ValidationError, CommensurabilityError) as e:
        print(f"hoflab: error: {e}", file=sys.stderr)
        return 1
    except ContractError as e:
        print(f"hoflab: contract failure: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"hoflab: error: {e}", file=sys.stderr)
        return 1
    except RuntimeError as e:  # module contract errors not derived from ContractError
        print(f"hoflab: contract failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    return run(argv)
