"""End-to-end acceptance gate.

Each test exercises one headline property at its stated tolerance and prints
a single PASS/FAIL line with the measured values and runtime.
"""
import math
import time

import numpy as np

import tsne_lab.continuum as C
from tsne_lab import (BandwidthProfile, Dataset, Density, Domain, Embedding,
                      InitGaussian, InitPCA, OptimizerConfig, SweepConfig,
                      decompose, el_residual, boundary_flux, exp_bandwidth,
                      exp_consistency, exp_illposed, exp_rescaled, gradcheck,
                      limit_bandwidth, minimize_gridmap, run_experiment,
                      weighted_spread)
from tsne_lab.optimize import _init_gridmap

D1 = Domain(np.zeros(1), np.ones(1))
U1 = Density.uniform(D1)
D2 = Domain(np.zeros(2), np.ones(2))
U2 = Density.uniform(D2)


def _report(num, name, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num}] {status} {name}: {detail} "
          f"({elapsed:.1f}s / budget {budget:.0f}s)")
    assert ok, f"criterion {num} ({name}): {detail}"
    assert elapsed < budget, f"criterion {num} exceeded budget: {elapsed:.1f}s"


def test_criterion_1_decomposition_identity():
    t0 = time.time()
    worst = 0.0
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(3, 65))
        d = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        ds = Dataset(points=rng.uniform(0, 1, (n, d)), seed=0)
        prof = BandwidthProfile(sigmas=rng.uniform(0.1, 0.6, n),
                                h=float(rng.uniform(0.05, 0.8)), kappa=1.0,
                                mode="calibrated")
        emb = Embedding(rng.standard_normal((n, m)))
        br = decompose(ds, prof, emb)
        worst = max(worst,
                    br.identity_residual() / max(1.0, abs(br.total_kl)))
    elapsed = time.time() - t0
    _report(1, "energy decomposition identity", worst <= 1e-9,
            f"worst relative residual {worst:.3e} (tol 1e-9)", elapsed, 10)


def test_criterion_2_gradient_suite():
    t0 = time.time()
    worst = 0.0
    for target in ("discrete-classic", "discrete-rescaled", "gridmap"):
        for seed in range(20):
            rep = gradcheck(target, seed=seed, step=1e-5)
            worst = max(worst, rep.max_rel_error)
    elapsed = time.time() - t0
    _report(2, "analytic vs central-difference gradients", worst <= 1e-5,
            f"worst relative error {worst:.3e} (tol 1e-5)", elapsed, 60)


def test_criterion_3_bandwidth_localization():
    t0 = time.time()
    cfg = SweepConfig(density=U1, n_values=(1024, 4096, 16384, 65536),
                      seeds=tuple(range(10)), kappa=1.0, xi=1.0)
    med = exp_bandwidth(cfg).medians("sup_error")
    vals = [med[n] for n in cfg.n_values]
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    ok = decreasing and vals[-1] < 0.05
    elapsed = time.time() - t0
    _report(3, "adaptive bandwidths localize to the limit profile", ok,
            "median interior sup-errors "
            + " > ".join(f"{v:.4f}" for v in vals)
            + f", final < 0.05: {vals[-1]:.4f}", elapsed, 600)


def test_criterion_4_energy_consistency():
    t0 = time.time()
    smap = C.SmoothMap.sinusoid(np.array([1.0]), np.array([[math.pi]]))
    cfg = SweepConfig(density=U1, n_values=(2048, 8192, 32768),
                      seeds=tuple(range(5)), kappa=1.0, xi=1.0, map=smap)
    res = exp_consistency(cfg)
    target = res.extras["dirichlet_target"]
    med_a = res.medians("dirichlet_error")
    med_r = res.medians("repulsion_error")
    rels = [med_a[n] / target for n in cfg.n_values]
    r_rel = med_r[32768] / abs(res.extras["repulsion_target"])
    decreasing = all(b < a for a, b in zip(rels, rels[1:]))
    ok = decreasing and rels[-1] <= 0.15 and r_rel <= 0.02
    elapsed = time.time() - t0
    _report(4, "discrete energies match continuum targets", ok,
            "attraction rel errors "
            + " > ".join(f"{v:.4f}" for v in rels)
            + f" (final tol 0.15); repulsion rel {r_rel:.4f} (tol 0.02)",
            elapsed, 600)


def _spread_sweep_classic(pinned_h):
    # discrete gradients scale like 1/n, so the learning rate scales with n
    # to give every sweep point the same effective optimization budget
    medians = []
    for n in (512, 1024, 2048, 4096):
        opt = OptimizerConfig(steps=60, learning_rate=0.1 * n, momentum=0.8,
                              exaggeration_factor=4.0, exaggeration_steps=15,
                              init=InitGaussian(m=2, scale=1e-2, seed=0),
                              record_every=30)
        cfg = SweepConfig(density=U2, n_values=(n,), seeds=tuple(range(10)),
                          kappa=1.0, xi=1.0, optimizer=opt, pinned_h=pinned_h)
        res = exp_illposed(cfg)
        medians.append(float(np.median(res.values("rms_spread", n))))
    return medians


def test_criterion_5_classic_spread_growth():
    t0 = time.time()
    free = _spread_sweep_classic(None)
    pinned = _spread_sweep_classic(0.15)
    increasing = all(b > a for a, b in zip(free, free[1:]))
    variation = (max(pinned) - min(pinned)) / min(pinned)
    ok = increasing and variation <= 0.25
    elapsed = time.time() - t0
    _report(5, "classic minimizers spread out as n grows", ok,
            "free medians " + " < ".join(f"{v:.3f}" for v in free)
            + f"; pinned-h variation {variation:.1%} (tol 25%)",
            elapsed, 1800)


def test_criterion_6_rescaled_spread_stability():
    t0 = time.time()
    opt = OptimizerConfig(steps=150, learning_rate=0.5, momentum=0.8,
                          init=InitPCA(m=1, scale=2.0), record_every=50)
    grid_opt = OptimizerConfig(steps=1500, learning_rate=1e-3, momentum=0.9,
                               init=InitGaussian(m=1, scale=1e-2, seed=0),
                               convergence_tol=1e-8)
    cfg = SweepConfig(density=U1, n_values=(512, 1024, 2048, 4096),
                      seeds=tuple(range(10)), kappa=1.0, xi=1.0,
                      optimizer=opt, grid_shapes=((64,),),
                      grid_optimizer=grid_opt)
    res = exp_rescaled(cfg)
    med = res.medians("rms_spread")
    vals = [med[n] for n in cfg.n_values]
    variation = (max(vals) - min(vals)) / min(vals)
    cont = res.extras["continuum_spread"]
    rel = abs(cont - vals[-1]) / vals[-1]
    ok = variation <= 0.25 and rel <= 0.30
    elapsed = time.time() - t0
    _report(6, "rescaled minimizers stay on the continuum scale", ok,
            "medians " + ", ".join(f"{v:.3f}" for v in vals)
            + f"; variation {variation:.1%} (tol 25%); continuum spread "
            f"{cont:.3f} within {rel:.1%} of largest-n (tol 30%)",
            elapsed, 1800)


def test_criterion_7_el_residual_decay():
    t0 = time.time()
    cases = [
        (U1, (64,), OptimizerConfig(steps=1500, learning_rate=1e-3,
                                    momentum=0.9, convergence_tol=1e-8,
                                    init=InitGaussian(m=1, scale=1e-2,
                                                      seed=0))),
        (U1, (128,), OptimizerConfig(steps=2500, learning_rate=5e-4,
                                     momentum=0.9, convergence_tol=1e-8,
                                     init=InitGaussian(m=1, scale=1e-2,
                                                       seed=0))),
        (U2, (32, 32), OptimizerConfig(steps=1500, learning_rate=1e-3,
                                       momentum=0.9, convergence_tol=1e-8,
                                       init=InitGaussian(m=2, scale=1e-2,
                                                         seed=0))),
        (U2, (64, 64), OptimizerConfig(steps=800, learning_rate=5e-4,
                                       momentum=0.95, convergence_tol=1e-8,
                                       init=InitGaussian(m=2, scale=1e-2,
                                                         seed=0))),
    ]
    details = []
    ok = True
    for density, shape, opt in cases:
        gm0 = _init_gridmap(opt.init, density, shape)
        r0 = float(np.abs(el_residual(gm0, density, 1.0)).max())
        gm, _ = minimize_gridmap(density, 1.0, shape, opt)
        r1 = float(np.abs(el_residual(gm, density, 1.0)).max())
        flux = boundary_flux(gm)
        ok = ok and r1 <= 1e-2 * r0 and flux <= 1e-8
        details.append(f"{shape}: ratio {r1 / r0:.2e}, flux {flux:.1e}")
    elapsed = time.time() - t0
    _report(7, "grid minimizers satisfy the stationarity equation", ok,
            "; ".join(details) + " (ratio tol 1e-2, flux tol 1e-8)",
            elapsed, 300)


def test_criterion_8_continuum_identities():
    t0 = time.time()
    ident2 = C.SmoothMap.polynomial([{(1, 0): 1.0}, {(0, 1): 1.0}])
    attract = C.continuum_energy(U2, ident2, 1.0).attract
    e_dirichlet = abs(attract - 2.0 / (2.0 * math.pi * math.e))
    ident1 = C.SmoothMap.polynomial([{(1,): 1.0}])
    rep = C.averaged_repulsion(U1, ident1, C.QuadratureGrid(D1, (2048,)))
    e_rep = abs(rep - math.log(math.pi / 2.0 - math.log(2.0)))
    rng = np.random.default_rng(3)
    x = rng.uniform(0.05, 0.95, (100, 1))
    rho = Density.gaussian_mixture(D1, means=[[0.5]], scales=[0.25])
    worst_id = 0.0
    for kappa in (0.5, 1.0, 3.0):
        sig = np.asarray(limit_bandwidth(rho, kappa, x))
        lhs = sig**2 * rho.eval(x)
        rhs = (kappa**2 / (2.0 * math.pi * math.e)) * rho.eval(x) ** (-1.0)
        worst_id = max(worst_id, float(np.abs(lhs - rhs).max()))
    ok = e_dirichlet <= 1e-6 and e_rep <= 1e-4 and worst_id <= 1e-12
    elapsed = time.time() - t0
    _report(8, "continuum closed-form identities", ok,
            f"Dirichlet err {e_dirichlet:.2e} (tol 1e-6); repulsion err "
            f"{e_rep:.2e} (tol 1e-4); bandwidth identity {worst_id:.2e} "
            f"(tol 1e-12)", elapsed, 10)


def test_criterion_9_experiment_determinism(tmp_path):
    t0 = time.time()
    smap = C.SmoothMap.sinusoid(np.array([1.0]), np.array([[math.pi]]))
    opt = OptimizerConfig(steps=30, learning_rate=0.3, momentum=0.5,
                          init=InitGaussian(m=1, scale=1e-2, seed=0))
    grid_opt = OptimizerConfig(steps=400, learning_rate=1e-3, momentum=0.9,
                               init=InitGaussian(m=1, scale=1e-2, seed=0))
    configs = {
        "bandwidth": SweepConfig(density=U1, n_values=(64, 128),
                                 seeds=(0, 1)),
        "consistency": SweepConfig(density=U1, n_values=(64,), seeds=(0,),
                                   map=smap),
        "illposed": SweepConfig(density=U1, n_values=(48, 64), seeds=(0, 1),
                                optimizer=opt),
        "rescaled": SweepConfig(density=U1, n_values=(48, 64), seeds=(0, 1),
                                optimizer=opt, grid_shapes=((16,),),
                                grid_optimizer=grid_opt),
        "el": SweepConfig(density=U1, n_values=(16,), seeds=(0,),
                          grid_shapes=((16,),), optimizer=grid_opt),
    }
    identical = []
    for name, cfg in configs.items():
        run_experiment(name, cfg, tmp_path / "a")
        run_experiment(name, cfg, tmp_path / "b")
        same = ((tmp_path / "a" / f"{name}.csv").read_bytes()
                == (tmp_path / "b" / f"{name}.csv").read_bytes())
        identical.append(same)
    ok = all(identical)
    elapsed = time.time() - t0
    _report(9, "experiment reruns are byte-identical", ok,
            f"{sum(identical)}/{len(identical)} experiments byte-identical",
            elapsed, 600)
