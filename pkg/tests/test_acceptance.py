"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Desk-scale runs (160x160 and 100x100 grids) take minutes and are marked
``slow``; deselect them with ``-m "not slow"``.
"""
import time

import numpy as np
import pytest

from oracles import coarsen, upwind_1d
from robinms import (
    FULL,
    PBS,
    POL,
    ClassifierConfig,
    FieldSpec,
    FluidModel,
    MethodPreset,
    PermeabilityField,
    TwoPhaseProblem,
    build_decomposition,
    build_grid,
    classify,
    generate_field,
    run_two_phase,
    slab_flux,
    slab_pressure,
    solve_mrcm,
    stitch,
)
from robinms.mrcm import error_norms, fine_reference_solve
from robinms.scenarios import field_spec
from robinms.spaces import build_flux_pbs, build_pressure_pbs
from robinms.transport import conservation_ratio, fine_elliptic, multiscale_elliptic, saturation_errors

CONTRASTS = [10.0**k for k in range(1, 9)]
DECOMPOSITIONS = (4, 8, 16)

# two-phase runs shared between the transport criteria and the conservation suite
_RUNS: dict = {}


def _two_phase(key):
    if key not in _RUNS:
        name, n, m, contrast, T, presets = key
        g = build_grid(n, n)
        dec, sk = build_decomposition(g, m, m)
        pb = TwoPhaseProblem(g, generate_field(field_spec(name, contrast), g), slab_flux(g))
        runs = {"fine": run_two_phase(pb, fine_elliptic(pb), [T])}
        for kind in presets:
            for scheme in (POL, PBS):
                el = multiscale_elliptic(pb, dec, sk, MethodPreset.from_name(kind), scheme)
                runs[f"{kind}-{scheme}"] = run_two_phase(pb, el, [T])
        _RUNS[key] = runs
    return _RUNS[key]


SLAB_RUN = ("combined", 160, 8, 1e8, 0.06, ("aMRCM",))
CHANNEL_RUN = ("channelized", 100, 5, 1e6, 0.07, ("aMRCM", "MMMFEM", "MHM"))


def test_criterion_01_single_subdomain_matches_fine(verdict):
    g = build_grid(160, 160)
    f = generate_field(field_spec("combined", 1e8), g)
    dec, sk = build_decomposition(g, 1, 1)
    t0 = time.perf_counter()
    worst = 0.0
    for bs in (slab_flux(g), slab_pressure(g)):
        ref = fine_reference_solve(g, f, bs)
        e = error_norms(solve_mrcm(g, dec, sk, f, bs, MethodPreset.amrcm(), PBS), ref)
        worst = max(worst, e["pressure"], e["flux"])
    dt = time.perf_counter() - t0
    verdict("criterion 1", worst <= 1e-10 and dt < 10, f"max rel L2 {worst:.2e}, {dt:.1f} s")


def test_criterion_02_full_spaces_are_exact(verdict):
    g = build_grid(40, 40)
    f = generate_field(field_spec("combined", 1e8), g)
    dec, sk = build_decomposition(g, 2, 2)
    bs = slab_flux(g)
    t0 = time.perf_counter()
    ref = fine_reference_solve(g, f, bs)
    worst = 0.0
    for alpha in (1e-6, 1.0, 1e6):
        e = error_norms(solve_mrcm(g, dec, sk, f, bs, MethodPreset.mrcm(alpha), FULL), ref)
        worst = max(worst, e["pressure"], e["flux"])
    dt = time.perf_counter() - t0
    verdict("criterion 2", worst <= 1e-8 and dt < 10, f"max rel L2 {worst:.2e}, {dt:.1f} s")


def test_criterion_03_partition_of_unity(verdict):
    rng = np.random.default_rng(20240517)
    t0 = time.perf_counter()
    worst, n_pres, n_flux, bad_flux = 0.0, 0, 0, 0
    for _ in range(1000):
        mx, my = rng.integers(1, 5, size=2)
        sx, sy = rng.integers(2, 9, size=2)
        g = build_grid(int(mx * sx), int(my * sy))
        _, sk = build_decomposition(g, int(mx), int(my))
        # random log-normal field: features of both kinds at random places
        K = np.exp(rng.normal(0.0, rng.uniform(0.5, 4.0), g.shape))
        cl = classify(PermeabilityField(g, K), sk, ClassifierConfig(*sorted(np.exp(rng.normal(0, 1, 2)))[::-1]))
        for itf, lab in zip(sk.interfaces, cl.labels):
            if lab.fracture_runs:
                B = build_pressure_pbs(itf, lab.fracture_runs).basis
                worst = max(worst, float(np.max(np.abs(B.sum(axis=1) - 1.0))))
                n_pres += 1
            if lab.barrier_runs:
                B = build_flux_pbs(itf, lab.barrier_runs).basis
                ok = np.all((B == 0) | (B == 1)) and np.all(B.sum(axis=1) == 1)
                bad_flux += not ok
                n_flux += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-14 and bad_flux == 0 and n_pres > 0 and n_flux > 0 and dt < 5
    verdict("criterion 3", ok, f"{n_pres} pressure / {n_flux} flux spaces, max PoU defect {worst:.1e}, {dt:.1f} s")


def _contrast_sweep(name, preset, key):
    g = build_grid(160, 160)
    bs = slab_flux(g)
    out = {m: {POL: [], PBS: []} for m in DECOMPOSITIONS}
    decs = {m: build_decomposition(g, m, m) for m in DECOMPOSITIONS}
    for c in CONTRASTS:
        f = generate_field(field_spec(name, c), g)
        ref = fine_reference_solve(g, f, bs)
        for m, (dec, sk) in decs.items():
            for scheme in (POL, PBS):
                out[m][scheme].append(error_norms(solve_mrcm(g, dec, sk, f, bs, preset, scheme), ref)[key])
    return out


@pytest.mark.slow
def test_criterion_04_fracture_field_trend(verdict):
    t0 = time.perf_counter()
    err = _contrast_sweep("fracture", MethodPreset.mmmfem(), "pressure")
    dt = time.perf_counter() - t0
    ok, parts = dt < 600, []
    for m in DECOMPOSITIONS:
        pol, pbs = err[m][POL], err[m][PBS]
        ratio = pol[-1] / pbs[-1]
        tail = pbs[1:]  # contrast 1e2 onwards
        growth = max(b / a for a, b in zip(tail[:-1], tail[1:]))
        ok &= ratio >= 5 and growth <= 1.2
        parts.append(f"{m}x{m}: POL/PBS {ratio:.1f}, worst step {growth:.2f}")
    verdict("criterion 4", ok, "; ".join(parts) + f"; {dt:.0f} s")


@pytest.mark.slow
def test_criterion_05_barrier_field_trend(verdict):
    t0 = time.perf_counter()
    err = _contrast_sweep("barrier", MethodPreset.mhm(), "flux")
    dt = time.perf_counter() - t0
    ok, parts = dt < 600, []
    for m in DECOMPOSITIONS:
        pol, pbs = err[m][POL], err[m][PBS]
        grows = pol[-1] > pol[1] and all(b >= a * (1 - 1e-6) for a, b in zip(pol[1:-1], pol[2:]))
        held = pbs[-1] / pbs[1]
        ok &= grows and held <= 2.0
        parts.append(f"{m}x{m}: POL {pol[1]:.3f}->{pol[-1]:.3f}, PBS ratio {held:.2f}")
    verdict("criterion 5", ok, "; ".join(parts) + f"; {dt:.0f} s")


@pytest.mark.slow
def test_criterion_06_adaptive_alpha(verdict):
    g = build_grid(160, 160)
    f = generate_field(field_spec("combined", 1e8), g)
    dec, sk = build_decomposition(g, 8, 8)
    bs = slab_flux(g)
    t0 = time.perf_counter()
    ref = fine_reference_solve(g, f, bs)

    def errors(preset):
        ms = solve_mrcm(g, dec, sk, f, bs, preset, PBS)
        e = error_norms(ms, ref, approx_flux=stitch(ms))
        return np.array([e["pressure"], e["flux"]])

    alphas = [10.0**k for k in range(-6, 7)]
    curve = np.array([errors(MethodPreset.mrcm(a)) for a in alphas])
    a2, a6 = errors(MethodPreset.amrcm(1e-2, 1e2)), errors(MethodPreset.amrcm(1e-6, 1e6))
    dt = time.perf_counter() - t0
    ok, parts = dt < 900, []
    for i, what in enumerate(("pressure", "flux")):
        k = int(np.argmin(curve[:, i]))
        best = curve[k, i]
        interior = 0 < k < len(alphas) - 1
        spread = abs(a2[i] - a6[i]) / min(a2[i], a6[i])
        ok &= interior and a2[i] <= 1.1 * best and spread < 0.25
        parts.append(f"{what}: min {best:.4f} at alpha 1e{k - 6}, adaptive {a2[i]:.4f}/{a6[i]:.4f}")
    verdict("criterion 6", ok, "; ".join(parts) + f"; {dt:.0f} s")


@pytest.mark.slow
def test_criterion_07_two_phase_slab(verdict):
    t0 = time.perf_counter()
    runs = _two_phase(SLAB_RUN)
    dt = time.perf_counter() - t0
    T = SLAB_RUN[4]
    e = {k: saturation_errors(r, runs["fine"])[T] for k, r in runs.items() if k != "fine"}
    ratio = e["aMRCM-POL"] / e["aMRCM-PBS"]
    verdict("criterion 7", ratio >= 5 and dt < 1800,
            f"L1 POL {e['aMRCM-POL']:.4f}, PBS {e['aMRCM-PBS']:.4f}, ratio {ratio:.1f}, {dt:.0f} s")


@pytest.mark.slow
def test_criterion_08_channelized_field(verdict):
    t0 = time.perf_counter()
    runs = _two_phase(CHANNEL_RUN)
    dt = time.perf_counter() - t0
    T = CHANNEL_RUN[4]
    e = {k: saturation_errors(r, runs["fine"])[T] for k, r in runs.items() if k != "fine"}
    same = np.array_equal(runs["MHM-POL"].snapshots[T], runs["MHM-PBS"].snapshots[T])
    ok = e["aMRCM-PBS"] < e["aMRCM-POL"] and e["MMMFEM-PBS"] < e["MMMFEM-POL"] and same and dt < 1200
    verdict("criterion 8", ok,
            f"aMRCM {e['aMRCM-POL']:.4f}/{e['aMRCM-PBS']:.4f}, MMMFEM {e['MMMFEM-POL']:.4f}/{e['MMMFEM-PBS']:.4f}"
            f" (POL/PBS), MHM identical: {same}, {dt:.0f} s")


@pytest.mark.slow
def test_criterion_09_conservation(verdict):
    g = build_grid(160, 160)
    f = generate_field(field_spec("combined", 1e8), g)
    dec, sk = build_decomposition(g, 8, 8)
    bs = slab_flux(g)
    cons = max(conservation_ratio(stitch(solve_mrcm(g, dec, sk, f, bs, MethodPreset.from_name(k), PBS)), g, bs.q)
               for k in ("aMRCM", "MMMFEM", "MHM"))
    results = [r for key in (SLAB_RUN, CHANNEL_RUN) for r in _two_phase(key).values()]
    cons = max([cons] + [r.max_conservation_residual for r in results])
    lo = min(r.s_min for r in results)
    hi = max(r.s_max for r in results)
    mb = max(r.mass_balance_error for r in results)
    ok = cons <= 1e-9 and lo >= 0.0 and hi <= 1.0 + 1e-12 and mb <= 1e-8
    verdict("criterion 9", ok,
            f"{len(results)} runs: residual {cons:.1e}, s in [{lo:.3g}, {hi:.3g}], mass balance {mb:.1e}")


def test_criterion_10_upwind_refinement(verdict):
    T, fluid = 0.3, FluidModel.from_ratio(10.0)
    sizes = np.array([25, 50, 100, 200, 400])
    errs = []
    for n in sizes:
        g = build_grid(int(n), 1)
        pb = TwoPhaseProblem(g, generate_field(FieldSpec(1.0, 1.0, 1.0), g), slab_flux(g), fluid)
        s = run_two_phase(pb, fine_elliptic(pb), [T]).snapshots[T][0]
        ref = coarsen(upwind_1d(10 * int(n), T, fluid.M, cfl=0.1), 10)
        errs.append(np.abs(s - ref).sum() / n)
    errs = np.array(errs)
    rate = -np.polyfit(np.log(sizes), np.log(errs), 1)[0]
    ok = bool(np.all(np.diff(errs) < 0)) and rate >= 0.7
    verdict("criterion 10", ok, "L1 " + ", ".join(f"{e:.2e}" for e in errs) + f"; fitted rate {rate:.2f}")
