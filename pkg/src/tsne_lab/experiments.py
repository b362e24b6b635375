"""Seeded experiment drivers with CSV/SVG/JSON artifacts.

Each driver sweeps dataset size n (bandwidth scale h_n = n^(-1/(d+xi)))
over a list of seeds and records per-run metrics; trend statements are read
off per-n medians.  All drivers are pure functions of their config, so
reruns reproduce every output byte for byte.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import continuum as _cont
from . import svgplot
from .bandwidth import analytic_profile, calibrate_profile, limit_bandwidth
from .density import Density
from .energy import attraction_value, repulsion_value
from .optimize import (InitGaussian, InitGiven, InitPCA, OptimizationError,
                       OptimizerConfig, minimize_discrete, minimize_gridmap)

VERSION = "0.1.0"

_EXPERIMENTS = {}


@dataclass(frozen=True)
class SweepConfig:
    density: Density
    n_values: tuple
    seeds: tuple
    kappa: float = 1.0
    xi: float = 1.0
    map: _cont.SmoothMap | None = None
    optimizer: OptimizerConfig | None = None
    interior_margin: float | None = None
    solver_tol: float = 1e-3
    pinned_h: float | None = None
    calibrated_profile: bool = False
    grid_shapes: tuple | None = None
    grid_optimizer: OptimizerConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("n_values must be strictly increasing")
        if self.kappa <= 0 or self.xi <= 0:
            raise ValueError("kappa and xi must be positive")

    def h_n(self, n: int) -> float:
        if self.pinned_h is not None:
            return float(self.pinned_h)
        return float(n) ** (-1.0 / (self.density.domain.d + self.xi))

    def margin(self) -> float:
        if self.interior_margin is not None:
            return float(self.interior_margin)
        return 0.1 * self.density.domain.diameter

    def to_json(self) -> dict:
        out = {"density": self.density.to_json(),
               "n_values": list(self.n_values), "seeds": list(self.seeds),
               "kappa": self.kappa, "xi": self.xi,
               "interior_margin": self.interior_margin,
               "solver_tol": self.solver_tol, "pinned_h": self.pinned_h,
               "calibrated_profile": self.calibrated_profile,
               "grid_shapes": ([list(s) for s in self.grid_shapes]
                               if self.grid_shapes else None)}
        out["map"] = self.map.to_json() if self.map is not None else None
        out["optimizer"] = _opt_to_json(self.optimizer)
        out["grid_optimizer"] = _opt_to_json(self.grid_optimizer)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SweepConfig":
        obj = dict(obj)
        obj["density"] = Density.from_json(obj["density"])
        if obj.get("map") is not None:
            obj["map"] = _cont.SmoothMap.from_json(obj["map"])
        for key in ("optimizer", "grid_optimizer"):
            if obj.get(key) is not None:
                obj[key] = OptimizerConfig.from_json(obj[key])
        if obj.get("grid_shapes") is not None:
            obj["grid_shapes"] = tuple(tuple(s) for s in obj["grid_shapes"])
        return cls(**obj)


def _opt_to_json(opt: OptimizerConfig | None) -> dict | None:
    if opt is None:
        return None
    out = {k: getattr(opt, k) for k in
           ("steps", "learning_rate", "momentum", "exaggeration_factor",
            "exaggeration_steps", "convergence_tol", "record_every")}
    if isinstance(opt.init, InitGaussian):
        out["init"] = {"kind": "gaussian", "m": opt.init.m,
                       "scale": opt.init.scale, "seed": opt.init.seed}
    elif isinstance(opt.init, InitPCA):
        out["init"] = {"kind": "pca", "m": opt.init.m,
                       "scale": opt.init.scale}
    elif isinstance(opt.init, InitGiven):
        out["init"] = {"kind": "given",
                       "values": np.asarray(opt.init.values).tolist()}
    return out


@dataclass
class SweepResult:
    name: str
    rows: list = field(default_factory=list)  # (n, seed, metric, value)
    extras: dict = field(default_factory=dict)

    def add(self, n: int, seed: int, metric: str, value: float) -> None:
        self.rows.append((int(n), int(seed), metric, float(value)))

    def metrics(self) -> list:
        seen = []
        for *_, m, _v in self.rows:
            if m not in seen:
                seen.append(m)
        return seen

    def values(self, metric: str, n: int) -> np.ndarray:
        return np.array([v for nn, _s, m, v in self.rows
                         if m == metric and nn == n])

    def medians(self, metric: str) -> dict:
        ns = sorted({nn for nn, _s, m, _v in self.rows if m == metric})
        return {n: float(np.median(self.values(metric, n))) for n in ns}

    def iqr(self, metric: str) -> dict:
        out = {}
        for n in sorted({nn for nn, _s, m, _v in self.rows if m == metric}):
            v = self.values(metric, n)
            q1, q3 = np.percentile(v, [25, 75])
            out[n] = float(q3 - q1)
        return out

    def check_complete(self) -> None:
        mets = self.metrics()
        pairs = {(n, s) for n, s, _m, _v in self.rows}
        for m in mets:
            have = {(n, s) for n, s, mm, _v in self.rows if mm == m}
            if have != pairs:
                raise ValueError(f"metric {m} missing some (n, seed) cells")

    def to_csv(self, path) -> None:
        rows = sorted(self.rows, key=lambda r: (r[0], r[1], r[2]))
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["n", "seed", "metric", "value"])
            for n, s, m, v in rows:
                w.writerow([n, s, m, format(v, ".17g")])


def _experiment(name):
    def deco(fn):
        _EXPERIMENTS[name] = fn
        return fn
    return deco


@_experiment("bandwidth")
def exp_bandwidth(config: SweepConfig) -> SweepResult:
    """Interior sup-error of calibrated bandwidths against the limit profile."""
    res = SweepResult(name="bandwidth")
    margin = config.margin()
    for n in config.n_values:
        h = config.h_n(n)
        for seed in config.seeds:
            ds = config.density.sample(n, seed)
            prof = calibrate_profile(ds, config.kappa, h, config.solver_tol)
            inner = config.density.domain.boundary_distance(ds.points) >= margin
            sigma_lim = np.asarray(limit_bandwidth(config.density, config.kappa,
                                                   ds.points[inner]))
            err = float(np.abs(prof.sigma_hat()[inner] - sigma_lim).max())
            res.add(n, seed, "sup_error", err)
    return res


@_experiment("consistency")
def exp_consistency(config: SweepConfig) -> SweepResult:
    """Discrete attraction/repulsion of a fixed map against continuum targets."""
    if config.map is None:
        raise ValueError("consistency experiment needs a map")
    res = SweepResult(name="consistency")
    grid = _cont.QuadratureGrid.default(config.density.domain)
    target = _cont.continuum_energy(config.density, config.map,
                                    config.kappa, grid=grid).attract
    rep_target = _cont.averaged_repulsion(config.density, config.map, grid)
    res.extras["dirichlet_target"] = target
    res.extras["repulsion_target"] = rep_target
    for n in config.n_values:
        h = config.h_n(n)
        for seed in config.seeds:
            ds = config.density.sample(n, seed)
            if config.calibrated_profile:
                prof = calibrate_profile(ds, config.kappa, h, config.solver_tol)
            else:
                prof = analytic_profile(ds, config.density, config.kappa, h)
            y = config.map.eval(ds.points)
            a = attraction_value(ds.points, prof.sigmas, y)
            r = repulsion_value(y)
            res.add(n, seed, "dirichlet_error", abs(a / h**2 - target))
            res.add(n, seed, "repulsion_error", abs(r - rep_target))
    return res


def _run_discrete(config: SweepConfig, variant: str, res: SweepResult,
                  prof_mode: str) -> None:
    for n in config.n_values:
        h = config.h_n(n)
        for seed in config.seeds:
            ds = config.density.sample(n, seed)
            if prof_mode == "calibrated":
                prof = calibrate_profile(ds, config.kappa, h, config.solver_tol)
            else:
                prof = analytic_profile(ds, config.density, config.kappa, h)
            cfg = config.optimizer
            if isinstance(cfg.init, InitGaussian):
                cfg = replace(cfg, init=replace(cfg.init, seed=seed))
            diverged = 0.0
            try:
                _emb, trace = minimize_discrete(ds, prof, variant, cfg)
                rec = trace.final()
                diam, rms, total = rec.diameter, rec.rms_spread, rec.total
            except OptimizationError:
                diverged, diam, rms, total = 1.0, math.nan, math.nan, math.nan
            res.add(n, seed, "diameter", diam)
            res.add(n, seed, "rms_spread", rms)
            if variant == "rescaled":
                res.add(n, seed, "rescaled_energy", total)
            res.add(n, seed, "diverged", diverged)


@_experiment("illposed")
def exp_illposed(config: SweepConfig) -> SweepResult:
    """Spread growth of classic minimizers, with a reference-map attraction."""
    if config.optimizer is None:
        raise ValueError("illposed experiment needs an optimizer config")
    res = SweepResult(name="illposed")
    _run_discrete(config, "classic", res, "calibrated")
    ref = config.map
    if ref is None:
        d = config.density.domain.d
        m = config.optimizer.init.m if isinstance(config.optimizer.init,
                                                  InitGaussian) else 1
        ref = _cont.SmoothMap.sinusoid(np.ones(m),
                                       np.full((m, d), math.pi))
    grid = _cont.QuadratureGrid.default(config.density.domain)
    ref_vals = {n: _cont.averaged_attraction(config.density, ref,
                                             config.h_n(n), grid, config.kappa)
                for n in config.n_values}
    for n in config.n_values:
        for seed in config.seeds:
            res.add(n, seed, "reference_attraction", ref_vals[n])
    return res


@_experiment("rescaled")
def exp_rescaled(config: SweepConfig) -> SweepResult:
    """Spread stability of rescaled minimizers plus a continuum comparison."""
    if config.optimizer is None:
        raise ValueError("rescaled experiment needs an optimizer config")
    res = SweepResult(name="rescaled")
    _run_discrete(config, "rescaled", res, "analytic")
    shape = (config.grid_shapes[0] if config.grid_shapes
             else _default_shapes(config.density.domain.d)[0])
    gm, _tr = minimize_gridmap(config.density, config.kappa, shape,
                               config.grid_optimizer or config.optimizer)
    spread = _cont.weighted_spread(config.density, gm)
    res.extras["continuum_spread"] = spread
    n_top = config.n_values[-1]
    med = float(np.median(res.values("rms_spread", n_top)))
    res.extras["largest_n_median_spread"] = med
    res.extras["continuum_spread_ratio"] = spread / med if med > 0 else math.inf
    return res


def _default_shapes(d: int) -> tuple:
    return ((64,), (128,)) if d == 1 else ((32,) * d, (64,) * d)


@_experiment("el")
def exp_el_residual(config: SweepConfig) -> SweepResult:
    """Euler-Lagrange residual decay of grid minimizers at two resolutions."""
    if config.optimizer is None:
        raise ValueError("el experiment needs an optimizer config")
    d = config.density.domain.d
    if d > 2:
        raise ValueError("el experiment supports d = 1 or 2 only")
    shapes = config.grid_shapes or _default_shapes(d)
    res = SweepResult(name="el")
    for shape in shapes:
        g = int(np.prod(shape))
        for seed in config.seeds:
            cfg = config.optimizer
            if isinstance(cfg.init, InitGaussian):
                cfg = replace(cfg, init=replace(cfg.init, seed=seed))
            gm0 = _init_gm(config.density, shape, cfg.init)
            r0 = float(np.abs(_cont.el_residual(gm0, config.density,
                                                config.kappa)).max())
            gm, _tr = minimize_gridmap(config.density, config.kappa, shape, cfg)
            r1 = float(np.abs(_cont.el_residual(gm, config.density,
                                                config.kappa)).max())
            res.add(g, seed, "residual_init", r0)
            res.add(g, seed, "residual_opt", r1)
            res.add(g, seed, "boundary_flux", _cont.boundary_flux(gm))
    return res


def _init_gm(density: Density, shape, init) -> _cont.GridMap:
    from .optimize import _init_gridmap
    return _init_gridmap(init, density, tuple(shape))


def run_experiment(name: str, config: SweepConfig, out_dir) -> SweepResult:
    """Run one named experiment and write <name>.csv/.svg/.meta.json."""
    import os
    if name not in _EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; "
                         f"choose from {sorted(_EXPERIMENTS)}")
    res = _EXPERIMENTS[name](config)
    res.check_complete()
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, name)
    res.to_csv(base + ".csv")
    series = []
    for m in res.metrics():
        med = res.medians(m)
        series.append((m, list(med), list(med.values())))
    svgplot.line_plot(base + ".svg", series, title=name, xlabel="n",
                      ylabel="median metric")
    meta = {"experiment": name, "version": VERSION,
            "seeds": list(config.seeds), "config": config.to_json(),
            "extras": res.extras}
    with open(base + ".meta.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    return res
