"""Command-line front end.

Eight subcommands cover the pipeline: symbol assembly, half-space
factorization, Lagrange evaluation, data interpolation, boundary
convergence tables, decay-rate fits, the cross-check bundle, and cache
management.  Configuration is a flat JSON file, with flags overriding
file values.  Artifacts are written atomically, reports use a fixed key
order, and timings stay out of reports unless asked for, so identical
configs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import cardinal as CD
from . import convergence as CV
from . import semicardinal as SC
from . import verify as VF
from .config import BuildConfig, resolve_radii
from .errors import (CapabilityError, ConfigError, DimensionMismatchError,
                     WHLatticeError)
from .kernels import Kernel, make_kernel
from .lattice import HalfSpace, LinearOrder, as_index_array
from .symbols import (dump_coefficients_csv, grid_eval, min_on_torus,
                      symbol_from_kernel, wiener_norm)
from .wienerhopf import FactorConfig, WienerHopfFactor, factorize

__all__ = ["RunConfig", "parse_config", "dispatch", "emit_report", "main"]


class UsageError(WHLatticeError):
    pass


# ---------------------------------------------------------------------------
# configuration

# flat schema: key -> (coercer, default); order fixes the config echo
_OPT_INT = ("int", None)
_OPT_FLOAT = ("float", None)


def _coerce(key: str, kind: str, value):
    if value is None:
        return None
    try:
        if kind == "int":
            if isinstance(value, float) and value != int(value):
                raise ValueError
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "str":
            return str(value)
        if kind == "bool":
            if isinstance(value, bool):
                return value
            raise ValueError
        if kind == "site":
            if isinstance(value, str):
                value = [p for p in value.split(",") if p != ""]
            return tuple(int(c) for c in value)
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"config key {key!r} expects a {kind}, got {value!r}")


_SCHEMA: dict[str, tuple[str, object]] = {
    "kernel": ("str", "gaussian"),
    "dim": ("int", 1),
    "c": _OPT_FLOAT,
    "m": _OPT_FLOAT,
    "n": _OPT_INT,
    "semi": ("bool", False),
    "halfspace": ("str", "coordinate"),
    "axis": _OPT_INT,
    "order": ("str", "lex"),
    "symbol_radius": ("int", 40),
    "grid_m": ("int", 512),
    "sample_radius": _OPT_INT,
    "eval_radius": _OPT_INT,
    "pos_tol": ("float", 1e-9),
    "residual_tol": ("float", 1e-7),
    "leak_tol": ("float", 1e-7),
    "tail_tol": ("float", 1e-9),
    "j": ("site", None),
    "data": ("str", None),
    "route": ("str", "coefficient"),
    "grid_radius": ("float", 3.0),
    "grid_step": ("float", 0.25),
    "window": _OPT_INT,
    "buffer": _OPT_INT,
    "max_probe": ("int", 10),
    "target": ("str", "auto"),
    "model": ("str", "auto"),
    "claimed_rate": _OPT_FLOAT,
    "out_dir": ("str", "."),
    "report": ("str", None),
    "cache_dir": ("str", None),
    "no_cache": ("bool", False),
    "emit_plot_data": ("bool", False),
    "timings": ("bool", False),
}

_KERNEL_PARAMS = {
    "gaussian": ("c",),
    "matern": ("m",),
    "gim": ("m", "c"),
    "bspline": ("n",),
    "boxspline222": (),
    "polyharmonic": ("m",),
}
_REQUIRED_PARAMS = {"matern": ("m",), "gim": ("m",), "bspline": ("n",),
                    "polyharmonic": ("m",)}


@dataclass(frozen=True)
class RunConfig:
    kernel: str
    dim: int
    c: float | None
    m: float | None
    n: int | None
    semi: bool
    halfspace: str
    axis: int | None
    order: str
    symbol_radius: int
    grid_m: int
    sample_radius: int | None
    eval_radius: int | None
    pos_tol: float
    residual_tol: float
    leak_tol: float
    tail_tol: float
    j: tuple | None
    data: str | None
    route: str
    grid_radius: float
    grid_step: float
    window: int | None
    buffer: int | None
    max_probe: int
    target: str
    model: str
    claimed_rate: float | None
    out_dir: str
    report: str
    cache_dir: str | None
    no_cache: bool
    emit_plot_data: bool
    timings: bool

    def make_kernel(self) -> Kernel:
        allowed = _KERNEL_PARAMS.get(self.kernel)
        if allowed is None:
            raise ConfigError(f"unknown kernel family {self.kernel!r}")
        params = {}
        for name in ("c", "m", "n"):
            value = getattr(self, name)
            if value is None:
                continue
            if name not in allowed:
                raise ConfigError(
                    f"kernel {self.kernel!r} does not take parameter {name!r}"
                )
            params[name] = value
        for name in _REQUIRED_PARAMS.get(self.kernel, ()):
            if name not in params:
                raise ConfigError(
                    f"kernel {self.kernel!r} needs parameter {name!r}"
                )
        if self.kernel == "gaussian":
            params.setdefault("c", 1.0)
        if self.kernel == "polyharmonic":
            mm = params["m"]
            if mm != int(mm):
                raise ConfigError("polyharmonic order m must be an integer")
            params["m"] = int(mm)
        try:
            return make_kernel(self.kernel, self.dim, params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def make_halfspace(self) -> HalfSpace:
        if self.halfspace == "coordinate":
            return HalfSpace.coordinate(self.dim, self.axis)
        if self.halfspace == "ordered":
            if self.order == "lex":
                return HalfSpace.ordered(LinearOrder.lex(self.dim))
            if self.order == "graded_lex":
                return HalfSpace.ordered(LinearOrder.graded_lex(self.dim))
            raise ConfigError(f"unknown order {self.order!r}")
        raise ConfigError(f"unknown halfspace variant {self.halfspace!r}")

    def build_config(self) -> BuildConfig:
        return BuildConfig(sample_radius=self.sample_radius,
                           coeff_radius=self.symbol_radius,
                           grid_m=self.grid_m)

    def cache_path(self) -> Path:
        if self.cache_dir is not None:
            return Path(self.cache_dir)
        env = os.environ.get("WHLATTICE_CACHE")
        if env:
            return Path(env)
        return Path.home() / ".cache" / "whlattice"

    def echo(self) -> dict:
        return {f.name: (list(self.j) if f.name == "j" and self.j is not None
                         else getattr(self, f.name))
                for f in fields(self)}


def parse_config(path: str | None = None,
                 overrides: dict | None = None) -> RunConfig:
    """Merge built-in defaults, a flat JSON file, and override flags."""
    values = {key: default for key, (_, default) in _SCHEMA.items()}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config {path!r} is not valid JSON (line {exc.lineno}, "
                f"column {exc.colno}): {exc.msg}"
            ) from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path!r} must be a JSON object")
        for key, value in raw.items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key {key!r} in {path!r}")
            values[key] = _coerce(key, _SCHEMA[key][0], value)
    for key, value in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            values[key] = _coerce(key, _SCHEMA[key][0], value)
    if values["report"] is None:
        values["report"] = str(Path(values["out_dir"]) / "report.json")
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    for name in ("pos_tol", "residual_tol", "leak_tol", "tail_tol"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be positive")
    if cfg.dim < 1:
        raise ConfigError("dim must be at least 1")
    if cfg.grid_m < 2 * (2 * cfg.symbol_radius + 1):
        raise ConfigError(
            f"grid_m must be at least 2*(2*symbol_radius+1) = "
            f"{2 * (2 * cfg.symbol_radius + 1)}, got {cfg.grid_m}"
        )
    if cfg.axis is not None and not 1 <= cfg.axis <= cfg.dim:
        raise ConfigError(f"halfspace axis {cfg.axis} outside 1..{cfg.dim}")
    if cfg.j is not None and len(cfg.j) != cfg.dim:
        raise ConfigError(f"site j has {len(cfg.j)} coordinates, dim is {cfg.dim}")
    if cfg.grid_step <= 0 or cfg.grid_radius <= 0:
        raise ConfigError("grid_radius and grid_step must be positive")
    if cfg.window is not None and cfg.window < 1:
        raise ConfigError("window must be positive")
    if cfg.buffer is not None and cfg.buffer < 1:
        raise ConfigError("buffer must be positive")
    if cfg.route not in ("coefficient", "lagrange"):
        raise ConfigError(f"unknown interpolation route {cfg.route!r}")
    if cfg.target not in ("auto", "omega", "gamma", "column"):
        raise ConfigError(f"unknown decay target {cfg.target!r}")
    if cfg.model not in ("auto", "algebraic", "exponential"):
        raise ConfigError(f"unknown decay model {cfg.model!r}")
    cfg.make_kernel()
    if cfg.semi:
        cfg.make_halfspace()


# ---------------------------------------------------------------------------
# atomic artifacts


def _atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".{path.name}.{os.getpid()}.tmp"
    flags = os.O_WRONLY | os.O_CREAT | os.O_EXCL
    fd = os.open(tmp, flags, 0o644)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _csv_text(header: list[str], rows) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(
            f"{v:.17g}" if isinstance(v, float) else str(v) for v in row
        ))
    return "\n".join(out) + "\n"


def _coefficients_csv(coeffs) -> str:
    buf = io.StringIO()
    dump_coefficients_csv(coeffs, buf)
    return buf.getvalue()


def emit_report(results: dict | None = None) -> str:
    """Render collected results as a deterministic JSON document."""
    rest = dict(results or {})
    doc = {}
    for key in ("command", "config"):
        if key in rest:
            doc[key] = rest.pop(key)
    checks = rest.pop("checks", [])
    doc["checks"] = checks
    doc.update(rest)
    doc["pass"] = all(bool(c.get("pass")) for c in checks)
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _check(name: str, value, tolerance, ok: bool) -> dict:
    return {"name": name, "value": value, "tolerance": tolerance,
            "pass": bool(ok)}


def _bound_check(name: str, value: float, tolerance: float) -> dict:
    return _check(name, float(value), float(tolerance),
                  float(value) < float(tolerance))


# ---------------------------------------------------------------------------
# coefficient cache

_CACHE_KEYS = ("kernel", "dim", "c", "m", "n", "halfspace", "axis", "order",
               "symbol_radius", "grid_m", "sample_radius")


def _cache_key(cfg: RunConfig) -> str:
    echo = cfg.echo()
    material = {k: echo[k] for k in _CACHE_KEYS}
    blob = json.dumps(material, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:32]


def _cache_load(cfg: RunConfig, key: str) -> WienerHopfFactor | None:
    path = cfg.cache_path() / f"{key}.npz"
    if cfg.no_cache or not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as payload:
            coeffs = payload["coeffs"]
            radius = int(payload["radius"])
            residual = float(payload["residual"])
            leak = float(payload["leak"])
            grid_m = int(payload["grid_m"])
    except (OSError, KeyError, ValueError):
        return None
    # stored diagnostics must clear the active tolerances, otherwise the
    # entry was produced under a looser config and cannot be trusted here
    if residual > cfg.residual_tol or leak > cfg.leak_tol:
        return None
    from .symbols import SymbolCoefficients

    gamma = SymbolCoefficients(cfg.dim, radius, coeffs)
    return WienerHopfFactor(cfg.make_halfspace() if cfg.semi
                            else HalfSpace.coordinate(cfg.dim),
                            gamma, residual, leak, grid_m)


def _cache_store(cfg: RunConfig, key: str, factor: WienerHopfFactor) -> None:
    if cfg.no_cache:
        return
    buf = io.BytesIO()
    np.savez(buf, coeffs=factor.gamma.coeffs,
             radius=np.int64(factor.gamma.radius),
             residual=np.float64(factor.factorization_residual),
             leak=np.float64(factor.support_leak),
             grid_m=np.int64(factor.grid_m))
    _atomic_write(cfg.cache_path() / f"{key}.npz", buf.getvalue())


# ---------------------------------------------------------------------------
# shared build steps


def _systems(cfg: RunConfig):
    kernel = cfg.make_kernel()
    card = CD.build_cardinal(kernel, cfg.build_config())
    semi = None
    if cfg.semi:
        semi = SC.build_semicardinal(kernel, cfg.make_halfspace(),
                                     cfg.build_config())
    return kernel, card, semi


def _grid_points(cfg: RunConfig, center=None) -> np.ndarray:
    pts = CV.default_grid(cfg.dim, cfg.grid_radius, cfg.grid_step)
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def _default_window(cfg: RunConfig) -> tuple[int, int]:
    # a quarter-window buffer keeps the finite-section oracle's own edge
    # truncation (slowest zoo decay ~1e-9 at depth 15) below the 1e-6 gate
    if cfg.window is not None:
        w = cfg.window
    else:
        w = 60 if cfg.dim == 1 else 6
    b = cfg.buffer if cfg.buffer is not None else max(1, (w + 2) // 4)
    return w, b


def _delta_defect_semi(semi, j, radius: int = 8) -> float:
    from .lattice import centered_box

    j = as_index_array(j, semi.kernel.dim)[0]
    field = SC.sc_lagrange_on_lattice(semi, j, radius)
    offs = centered_box(semi.kernel.dim, radius)
    inside = semi.halfspace.contains_many(offs + j)
    want = np.zeros(field.size)
    want[(offs == 0).all(axis=1)] = 1.0
    return float(np.max(np.abs(field.ravel() - want)[inside]))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_symbol(cfg: RunConfig, out: Path) -> dict:
    kernel = cfg.make_kernel()
    rs, _, m = resolve_radii(kernel, cfg.build_config())
    sigma = symbol_from_kernel(kernel, rs)
    grid = grid_eval(sigma, m).values.real
    lo, hi = float(grid.min()), float(grid.max())
    _atomic_write(out / "sigma.csv", _coefficients_csv(sigma))
    if cfg.emit_plot_data:
        step = 2.0 * math.pi / m
        if cfg.dim == 1:
            rows = ((i * step, float(grid[i])) for i in range(m))
            text = _csv_text(["t_1", "sigma"], rows)
        else:
            rows = ((*(idx[a] * step for a in range(cfg.dim)), float(grid[idx]))
                    for idx in np.ndindex(grid.shape))
            text = _csv_text([f"t_{a + 1}" for a in range(cfg.dim)] + ["sigma"],
                             rows)
        _atomic_write(out / "sigma_grid.csv", text)
    return {
        "checks": [_check("symbol_positive", lo, cfg.pos_tol, lo > cfg.pos_tol)],
        "symbol": {"sample_radius": rs, "grid_m": m, "min": lo, "max": hi,
                   "wiener_norm": wiener_norm(sigma)},
    }


def _cmd_factorize(cfg: RunConfig, out: Path) -> dict:
    kernel = cfg.make_kernel()
    halfspace = cfg.make_halfspace() if cfg.semi else HalfSpace.coordinate(cfg.dim)
    rs, rc, m = resolve_radii(kernel, cfg.build_config())
    key = _cache_key(cfg)
    factor = _cache_load(cfg, key)
    if factor is None:
        sigma = symbol_from_kernel(kernel, rs)
        factor = factorize(sigma, halfspace,
                           FactorConfig(radius=rc, grid_m=m,
                                        residual_tol=cfg.residual_tol,
                                        leak_tol=cfg.leak_tol))
        _cache_store(cfg, key, factor)
    else:
        print(f"cache hit: {key}", file=sys.stderr)
    meta = {
        "cache_key": key,
        "grid_m": factor.grid_m,
        "radius": factor.gamma.radius,
        "residual": factor.factorization_residual,
        "support_leak": factor.support_leak,
        "gamma_0": factor.gamma.coeff(np.zeros(cfg.dim, dtype=int)),
        "gamma_wiener_norm": wiener_norm(factor.gamma),
    }
    _atomic_write(out / "gamma.csv", _coefficients_csv(factor.gamma))
    _atomic_write(out / "metadata.json",
                  json.dumps(meta, indent=2, allow_nan=False) + "\n")
    return {
        "checks": [
            _bound_check("factorization_residual",
                         factor.factorization_residual, cfg.residual_tol),
            _bound_check("support_leak", factor.support_leak, cfg.leak_tol),
        ],
        "factorization": meta,
    }


def _cmd_lagrange(cfg: RunConfig, out: Path) -> dict:
    kernel, card, semi = _systems(cfg)
    if cfg.semi:
        j = np.asarray(cfg.j, dtype=np.int64)
        pts = _grid_points(cfg, center=j)
        values = np.atleast_1d(SC.sc_lagrange_eval(semi, j, pts)) \
            if kernel.full_eval else None
        defect = _delta_defect_semi(semi, j)
    else:
        pts = _grid_points(cfg)
        values = np.atleast_1d(CD.chi_eval(card, pts)) \
            if kernel.full_eval else None
        field = CD.chi_on_lattice(card, 10)
        want = np.zeros(field.shape)
        want[(10,) * cfg.dim] = 1.0
        defect = float(np.max(np.abs(field - want)))
    if values is not None:
        header = [f"x_{a + 1}" for a in range(cfg.dim)] + ["value"]
        rows = ((*map(float, p), float(v)) for p, v in zip(pts, values))
        _atomic_write(out / "chi.csv", _csv_text(header, rows))
    return {
        "checks": [_bound_check("delta_defect", defect, cfg.residual_tol)],
        "lagrange": {
            "semi": cfg.semi,
            "site": list(cfg.j) if cfg.semi else None,
            "points": 0 if values is None else int(values.shape[0]),
            "lattice_only": not kernel.full_eval,
        },
    }


def _load_data_csv(path: str, dim: int):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path!r}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError(f"data file {path!r} is empty")
    want = [f"k_{a + 1}" for a in range(dim)] + ["y"]
    header = [h.strip() for h in lines[0].split(",")]
    if header != want:
        raise ConfigError(
            f"data header must be {','.join(want)}, got {lines[0]!r}"
        )
    pts, ys = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != dim + 1:
            raise ConfigError(f"malformed data row {ln!r}")
        pts.append([int(p) for p in parts[:dim]])
        ys.append(float(parts[dim]))
    pts = np.asarray(pts, dtype=np.int64)
    if len({tuple(p) for p in pts}) != len(pts):
        raise ConfigError("data contains duplicate lattice sites")
    return pts, np.asarray(ys)


def _cmd_interpolate(cfg: RunConfig, out: Path) -> dict:
    if cfg.data is None:
        raise UsageError("interpolate needs --data with lattice samples")
    kernel, card, semi = _systems(cfg)
    pts, ys = _load_data_csv(cfg.data, cfg.dim)
    lo = pts.min(axis=0)
    shape = pts.max(axis=0) - lo + 1
    values = np.zeros(shape)
    values[tuple((pts - lo).T)] = ys
    window = CD.DataWindow(lo, values)

    if cfg.semi:
        inside = semi.halfspace.contains_many(pts)
        if not np.all(inside):
            raise ConfigError(
                f"{int((~inside).sum())} data sites lie outside the half-space"
            )
        fitted = np.atleast_1d(SC.sc_interpolate(semi, window,
                                                 pts.astype(float), cfg.route))
    else:
        fitted = np.atleast_1d(CD.cardinal_interpolate(card, window,
                                                       pts.astype(float),
                                                       cfg.route))
    defect = float(np.max(np.abs(fitted - ys)))

    center = np.rint(lo + (shape - 1) / 2.0)
    grid = _grid_points(cfg, center)
    if kernel.full_eval:
        interp = SC.sc_interpolate(semi, window, grid, cfg.route) if cfg.semi \
            else CD.cardinal_interpolate(card, window, grid, cfg.route)
        header = [f"x_{a + 1}" for a in range(cfg.dim)] + ["value"]
        rows = ((*map(float, p), float(v))
                for p, v in zip(grid, np.atleast_1d(interp)))
        _atomic_write(out / "interpolant.csv", _csv_text(header, rows))
    return {
        "checks": [_bound_check("data_reproduction", defect, cfg.residual_tol)],
        "interpolate": {"sites": int(pts.shape[0]), "route": cfg.route,
                        "semi": cfg.semi, "lattice_only": not kernel.full_eval},
    }


def _cmd_converge(cfg: RunConfig, out: Path) -> dict:
    if not cfg.semi:
        raise UsageError("converge compares against a half-space; pass --semi")
    kernel, card, semi = _systems(cfg)
    eta = CV.eta_function(semi, cfg.eval_radius)
    rows, checks = [], []
    for nstep in range(cfg.max_probe + 1):
        j = CV.exhausting_index(semi.halfspace, nstep)
        gap, bound = CV.convergence_gap(eta, card, semi, j)
        rows.append((nstep, *[int(c) for c in j], gap, bound))
        checks.append(_check(f"gap_within_bound_n{nstep}", gap, bound,
                             gap <= bound + 1e-8))
    header = ["n"] + [f"j_{a + 1}" for a in range(cfg.dim)] + ["gap", "bound"]
    _atomic_write(out / "converge.csv", _csv_text(header, rows))
    last = rows[-1]
    return {
        "checks": checks,
        "converge": {
            "probes": cfg.max_probe + 1,
            "final_gap": last[-2],
            "final_bound": last[-1],
            # the eta sup is sampled on the default grid, not certified
            "sup_constant_sampled": True,
        },
    }


def _decay_series(cfg: RunConfig, card, semi):
    target = cfg.target
    if target == "auto":
        target = "column" if cfg.semi else "omega"
    if target in ("gamma", "column") and semi is None:
        raise UsageError(f"decay target {target!r} needs --semi")
    if target == "omega":
        steps = np.arange(card.omega.radius + 1)
        ray = np.zeros((steps.size, cfg.dim), dtype=np.int64)
        ray[:, 0] = steps
        idx = ray + card.omega.radius
        values = card.omega.coeffs[tuple(idx.T)]
        return target, steps.astype(float), values
    # stop the ray well short of the coefficient box: pair sums for
    # entries near the edge are truncation-starved and decay too fast
    span = max(8, semi.working_radius // 2)
    sites = np.stack([CV.exhausting_index(semi.halfspace, s)
                      for s in range(span + 1)])
    dist = np.linalg.norm(sites.astype(float), axis=1)
    if target == "gamma":
        values = np.array([semi.factor.gamma.coeff(s) for s in sites])
        return target, dist, values
    j = np.asarray(cfg.j, dtype=np.int64) if cfg.j is not None \
        else np.zeros(cfg.dim, dtype=np.int64)
    ks = sites + j
    values = SC.sc_coefficients(semi, ks, np.broadcast_to(j, ks.shape))
    return target, dist, values


def _cmd_decay(cfg: RunConfig, out: Path) -> dict:
    kernel, card, semi = _systems(cfg)
    target, dist, values = _decay_series(cfg, card, semi)
    model = cfg.model
    if model == "auto":
        model = "algebraic" if kernel.family in ("gim", "polyharmonic") \
            else "exponential"
    if model == "algebraic":
        # near-field values are not governed by the asymptotic power
        keep = dist >= 2.0
        dist, values = dist[keep], values[keep]
    fit = VF.fit_decay(values, model, claimed_rate=cfg.claimed_rate, dist=dist)
    if cfg.emit_plot_data:
        _atomic_write(out / "decay.csv",
                      _csv_text(["dist", "value"],
                                zip(map(float, dist), map(float, values))))
    return {
        "checks": [_check("decay_verdict", fit.fitted_rate,
                          cfg.claimed_rate, fit.verdict == "consistent")],
        "fits": [{
            "target": target,
            "model": fit.model,
            "fitted_rate": fit.fitted_rate,
            "r_squared": fit.r_squared,
            "sample_range": list(fit.sample_range),
            "verdict": fit.verdict,
        }],
    }


def _cmd_verify(cfg: RunConfig, out: Path) -> dict:
    kernel, card, semi = _systems(cfg)
    checks = []
    values = {"a_0": card.omega.coeff(np.zeros(cfg.dim, dtype=int)),
              "omega_wiener_norm": wiener_norm(card.omega)}

    lo = min_on_torus(card.sigma, cfg.grid_m)
    checks.append(_check("symbol_positive", lo, cfg.pos_tol, lo > cfg.pos_tol))

    field = CD.chi_on_lattice(card, 10)
    want = np.zeros(field.shape)
    want[(10,) * cfg.dim] = 1.0
    checks.append(_bound_check("delta_defect",
                               float(np.max(np.abs(field - want))),
                               cfg.residual_tol))

    w, b = _default_window(cfg)
    checks.append(_bound_check("oracle_deviation",
                               VF.oracle_compare(card, w, b), 1e-6))

    leb = CD.lebesgue_estimate(card, grid_per_cell=9)
    checks.append(_check("lebesgue_estimate", leb.estimate, leb.upper_bound,
                         leb.estimate <= leb.upper_bound))
    values["lebesgue_upper_bound"] = leb.upper_bound

    if cfg.dim == 1 and kernel.family in ("gaussian", "matern"):
        spec = VF.native_quadrature(kernel)
        resid = VF.fundamental_identity_check(spec, card, x0=0.5)
        checks.append(_bound_check("identity_residual", resid, 2e-5))

    if cfg.semi:
        checks.append(_bound_check("factorization_residual",
                                   semi.factor.factorization_residual,
                                   cfg.residual_tol))
        checks.append(_bound_check("support_leak", semi.factor.support_leak,
                                   cfg.leak_tol))
        defect = max(_delta_defect_semi(semi, j)
                     for j in SC.probe_indices(semi.halfspace, deep=10))
        checks.append(_bound_check("semi_delta_defect", defect,
                                   cfg.residual_tol))
        checks.append(_bound_check("semi_oracle_deviation",
                                   VF.oracle_compare(semi, w, b), 1e-6))
        chol = SC.cholesky_residual(semi, w, b)
        checks.append(_bound_check("cholesky_residual", chol.gram_residual,
                                   1e-6))
        if chol.strictly_triangular is not None:
            checks.append(_check("cholesky_triangular",
                                 chol.strictly_triangular, None,
                                 chol.strictly_triangular))
        values["a_00"] = SC.sc_coefficient(semi, np.zeros(cfg.dim, dtype=int),
                                           np.zeros(cfg.dim, dtype=int))
    return {"checks": checks, "values": values}


def _cmd_cache(cfg: RunConfig, out: Path, clear: bool = False) -> dict:
    root = cfg.cache_path()
    entries = []
    for path in sorted(root.glob("*.npz")):
        entry = {"key": path.stem, "bytes": path.stat().st_size}
        try:
            with np.load(path, allow_pickle=False) as payload:
                entry["residual"] = float(payload["residual"])
                entry["radius"] = int(payload["radius"])
        except (OSError, KeyError, ValueError):
            entry["residual"] = None
        if clear:
            path.unlink()
        entries.append(entry)
    return {
        "checks": [],
        "cache": {"dir": str(root), "entries": entries, "cleared": clear},
    }


# ---------------------------------------------------------------------------
# dispatch

_COMMANDS = {
    "symbol": _cmd_symbol,
    "factorize": _cmd_factorize,
    "lagrange": _cmd_lagrange,
    "interpolate": _cmd_interpolate,
    "converge": _cmd_converge,
    "decay": _cmd_decay,
    "verify": _cmd_verify,
    "cache": _cmd_cache,
}


def dispatch(cmd: str, config: RunConfig, **extra) -> int:
    """Run one subcommand; returns the process exit status."""
    if cmd not in _COMMANDS:
        raise UsageError(f"unknown command {cmd!r}")
    if cmd == "lagrange" and config.semi and config.j is None:
        raise UsageError("lagrange --semi needs a site --j")
    out = Path(config.out_dir)
    started = time.perf_counter()
    sections = {"command": cmd, "config": cfg_echo(config)}
    sections.update(_COMMANDS[cmd](config, out, **extra))
    if config.timings:
        sections["timings"] = {
            "total_s": round(time.perf_counter() - started, 6)
        }
    text = emit_report(sections)
    _atomic_write(Path(config.report), text)
    sys.stdout.write(text)
    return 0 if json.loads(text)["pass"] else 1


def cfg_echo(cfg: RunConfig) -> dict:
    return cfg.echo()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    overrides = {key: getattr(args, key) for key in _SCHEMA
                 if getattr(args, key, None) is not None}
    try:
        cfg = parse_config(args.config, overrides)
        extra = {"clear": bool(args.clear)} if args.command == "cache" else {}
        return dispatch(args.command, cfg, **extra)
    except (UsageError, ConfigError, CapabilityError,
            DimensionMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except WHLatticeError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file")
    common.add_argument("--kernel")
    common.add_argument("--dim", type=int)
    common.add_argument("--c", type=float)
    common.add_argument("--m", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--semi", action="store_const", const=True,
                        default=None)
    common.add_argument("--halfspace", choices=("coordinate", "ordered"))
    common.add_argument("--axis", type=int)
    common.add_argument("--order", choices=("lex", "graded_lex"))
    common.add_argument("--symbol-radius", dest="symbol_radius", type=int)
    common.add_argument("--grid-m", dest="grid_m", type=int)
    common.add_argument("--sample-radius", dest="sample_radius", type=int)
    common.add_argument("--eval-radius", dest="eval_radius", type=int)
    common.add_argument("--pos-tol", dest="pos_tol", type=float)
    common.add_argument("--residual-tol", dest="residual_tol", type=float)
    common.add_argument("--leak-tol", dest="leak_tol", type=float)
    common.add_argument("--tail-tol", dest="tail_tol", type=float)
    common.add_argument("--j", help="lattice site, comma-separated integers")
    common.add_argument("--data", help="CSV samples with header k_1..k_d,y")
    common.add_argument("--route", choices=("coefficient", "lagrange"))
    common.add_argument("--grid-radius", dest="grid_radius", type=float)
    common.add_argument("--grid-step", dest="grid_step", type=float)
    common.add_argument("--window", type=int)
    common.add_argument("--buffer", type=int)
    common.add_argument("--max-probe", dest="max_probe", type=int)
    common.add_argument("--target",
                        choices=("auto", "omega", "gamma", "column"))
    common.add_argument("--model",
                        choices=("auto", "algebraic", "exponential"))
    common.add_argument("--claimed-rate", dest="claimed_rate", type=float)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--report")
    common.add_argument("--cache-dir", dest="cache_dir")
    common.add_argument("--no-cache", dest="no_cache", action="store_const",
                        const=True, default=None)
    common.add_argument("--emit-plot-data", dest="emit_plot_data",
                        action="store_const", const=True, default=None)
    common.add_argument("--timings", action="store_const", const=True,
                        default=None)

    parser = argparse.ArgumentParser(
        prog="whlattice",
        description="Lattice interpolation via half-space symbol factorization",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "symbol": "assemble the kernel's lattice symbol and check positivity",
        "factorize": "factor the reciprocal symbol over a half-space",
        "lagrange": "evaluate a Lagrange function on a point grid",
        "interpolate": "interpolate lattice samples from a CSV file",
        "converge": "tabulate half-space vs full-lattice convergence gaps",
        "decay": "fit coefficient decay rates",
        "verify": "run the cross-check bundle",
        "cache": "inspect or clear the coefficient cache",
    }
    for name, text in descriptions.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "cache":
            p.add_argument("--clear", action="store_true")
        else:
            p.set_defaults(clear=False)
    return parser


if __name__ == "__main__":
    sys.exit(main())
