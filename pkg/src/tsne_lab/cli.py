"""Command line entry points: calibrate, energy, embed, continuum, exp."""
from __future__ import annotations

import argparse
import json

import numpy as np

from . import continuum as _cont
from .bandwidth import BandwidthProfile, calibrate_profile
from .density import Dataset, Density, Domain
from .energy import Embedding, decompose
from .experiments import SweepConfig, run_experiment
from .optimize import OptimizerConfig, minimize_discrete


def _load_dataset(path) -> Dataset:
    return Dataset.from_csv(path)


def _cmd_calibrate(args) -> int:
    ds = _load_dataset(args.data)
    prof = calibrate_profile(ds, args.kappa, args.h, args.tol)
    prof.to_csv(args.out)
    print(f"calibrated {prof.n} bandwidths -> {args.out}")
    return 0


def _cmd_energy(args) -> int:
    ds = _load_dataset(args.data)
    prof = BandwidthProfile.from_csv(args.profile)
    emb = Embedding(np.loadtxt(args.embedding, delimiter=",", skiprows=1,
                               ndmin=2))
    br = decompose(ds, prof, emb)
    payload = br.to_json()
    payload["variant"] = args.variant
    with open(args.out, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    total = br.rescaled_total if args.variant == "rescaled" else br.total_kl
    print(f"{args.variant} energy {total:.6g} -> {args.out}")
    return 0


def _cmd_embed(args) -> int:
    ds = _load_dataset(args.data)
    prof = BandwidthProfile.from_csv(args.profile)
    with open(args.config) as f:
        cfg = OptimizerConfig.from_json(json.load(f))
    emb, trace = minimize_discrete(ds, prof, args.variant, cfg)
    header = ",".join(f"y{j}" for j in range(emb.m))
    np.savetxt(args.out_embedding, emb.y, delimiter=",", fmt="%.17g",
               header=header, comments="")
    trace.to_csv(args.out_trace)
    rec = trace.final()
    print(f"finished at step {rec.step}, total {rec.total:.6g}")
    return 0


def _cmd_continuum(args) -> int:
    dens = Density.load(args.density)
    shape = tuple(int(s) for s in args.grid.split(","))
    if args.map.endswith(".json"):
        target = _cont.SmoothMap.load(args.map)
        grid = _cont.QuadratureGrid(dens.domain, shape)
    else:
        target = _cont.GridMap.from_csv(args.map, dens.domain, shape)
        grid = None
    br = _cont.continuum_energy(dens, target, args.kappa, grid=grid)
    with open(args.out, "w") as f:
        json.dump(br.to_json(), f, indent=2, sort_keys=True)
    print(f"continuum energy {br.total_kl:.6g} -> {args.out}")
    return 0


def _cmd_exp(args) -> int:
    with open(args.config) as f:
        cfg = SweepConfig.from_json(json.load(f))
    res = run_experiment(args.name, cfg, args.out_dir)
    for m in res.metrics():
        med = res.medians(m)
        pretty = ", ".join(f"{n}: {v:.4g}" for n, v in med.items())
        print(f"{m} medians: {pretty}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsne-lab",
                                description="tSNE asymptotics numerical lab")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="solve per-point bandwidths")
    c.add_argument("--data", required=True)
    c.add_argument("--kappa", type=float, required=True)
    c.add_argument("--h", type=float, required=True)
    c.add_argument("--tol", type=float, default=1e-3)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_calibrate)

    e = sub.add_parser("energy", help="evaluate the discrete energy split")
    e.add_argument("--data", required=True)
    e.add_argument("--profile", required=True)
    e.add_argument("--embedding", required=True)
    e.add_argument("--variant", choices=("classic", "rescaled"),
                   default="classic")
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_energy)

    m = sub.add_parser("embed", help="minimize a discrete energy")
    m.add_argument("--data", required=True)
    m.add_argument("--profile", required=True)
    m.add_argument("--variant", choices=("classic", "rescaled"),
                   default="classic")
    m.add_argument("--config", required=True)
    m.add_argument("--out-embedding", required=True)
    m.add_argument("--out-trace", required=True)
    m.set_defaults(func=_cmd_embed)

    k = sub.add_parser("continuum", help="evaluate the limiting energy")
    k.add_argument("--density", required=True)
    k.add_argument("--map", required=True)
    k.add_argument("--kappa", type=float, required=True)
    k.add_argument("--grid", required=True, help="comma-separated node counts")
    k.add_argument("--out", required=True)
    k.set_defaults(func=_cmd_continuum)

    x = sub.add_parser("exp", help="run a seeded experiment sweep")
    x.add_argument("name", choices=("bandwidth", "consistency", "illposed",
                                    "rescaled", "el"))
    x.add_argument("--config", required=True)
    x.add_argument("--out-dir", required=True)
    x.set_defaults(func=_cmd_exp)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
