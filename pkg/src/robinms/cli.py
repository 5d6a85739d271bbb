"""Command line driver: ``robinms {solve,sweep,twophase} --config FILE``.

Outputs are staged in a temporary directory next to the output directory and
moved into place only when the whole scenario succeeds, so a failing run
leaves no partial artifacts behind.
"""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import io
from .boundary import BoundarySpec
from .config import MethodSpec, ScenarioConfig, load_config
from .downscale import PatchConfig, stitch
from .errors import ConfigurationError, DataError, RobinMSError
from .field import FluidModel, generate_field, load_field
from .grid import SIDES, build_decomposition, build_grid
from .mrcm import MethodPreset, error_norms, fine_reference_solve, solve_mrcm
from .scenarios import boundary_spec, field_spec
from .spaces import ClassifierConfig
from .transport import (
    SplittingConfig,
    TwoPhaseProblem,
    fine_elliptic,
    multiscale_elliptic,
    run_two_phase,
    saturation_errors,
)

log = logging.getLogger("robinms")

EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 2, 3, 4


def _grid(cfg: ScenarioConfig):
    return build_grid(cfg.nx, cfg.ny, cfg.lx, cfg.ly)


def _field(cfg: ScenarioConfig, grid, contrast=None):
    if cfg.field_file is not None:
        if contrast is not None:
            raise ConfigurationError("a contrast sweep needs a field preset, not a field file")
        return load_field(cfg.field_file, grid)
    return generate_field(field_spec(cfg.field_preset, cfg.contrast if contrast is None else contrast), grid)


def _boundary(cfg: ScenarioConfig, grid) -> BoundarySpec:
    if cfg.boundary != "custom":
        return boundary_spec(cfg.boundary, grid, velocity=cfg.velocity, dp=cfg.dp, rate=cfg.rate)
    isp, val = {}, {}
    for s in SIDES:
        kind, v = cfg.custom_sides[s]
        n = grid.ny if s in ("left", "right") else grid.nx
        isp[s] = np.full(n, kind == "pressure")
        val[s] = np.full(n, v)
    return BoundarySpec(grid, isp, val, np.zeros(grid.shape))


def _preset(cfg: ScenarioConfig, kind: str, alpha=None, pair=None) -> MethodPreset:
    if kind == "MRCM":
        return MethodPreset.mrcm(cfg.alpha if alpha is None else alpha)
    if kind == "aMRCM":
        a, b = pair if pair is not None else (cfg.alpha_small, cfg.alpha_large)
        return MethodPreset.amrcm(a, b)
    return MethodPreset.from_name(kind)


def _cutoffs(cfg: ScenarioConfig, preset: MethodPreset) -> ClassifierConfig:
    return ClassifierConfig(cfg.zeta_max, cfg.zeta_min, preset.alpha_small, preset.alpha_large)


def _methods(listed, cfg: ScenarioConfig, args) -> list[MethodSpec]:
    """Configured method list with the command-line overrides applied."""
    base = list(listed) or [MethodSpec(cfg.method, cfg.scheme)]
    out = []
    for m in base:
        k = cfg.method if args.method else m.kind
        s = cfg.scheme if args.scheme else m.scheme
        if MethodSpec(k, s) not in out:
            out.append(MethodSpec(k, s))
    return out


def _dec_label(d) -> str:
    return f"{d[0]}x{d[1]}"


def _column(m: MethodSpec, d, many: bool) -> str:
    return f"{m.label} {_dec_label(d)}" if many else m.label


def _errors(ms, ref, cfg, threads) -> dict:
    e = error_norms(ms, ref)
    e["flux_downscaled"] = error_norms(ms, ref, approx_flux=stitch(ms, PatchConfig(cfg.patch), threads))["flux"]
    return e


QUANTITIES = ("pressure", "flux", "flux_downscaled")


def run_solve(cfg: ScenarioConfig, args, out: Path) -> list[Path]:
    g = _grid(cfg)
    f = _field(cfg, g)
    bs = _boundary(cfg, g)
    ref = fine_reference_solve(g, f, bs)
    files = []
    if cfg.csv:
        files.append(out / "reference.csv")
        io.dump_cells_csv(files[-1], g, kappa=f.values, pressure=ref.pressure, velocity=ref.cell_velocity())
    if cfg.vtk:
        files.append(out / "reference.vtk")
        io.dump_vtk(files[-1], g, "fine reference", kappa=f.values, pressure=ref.pressure,
                    velocity=ref.cell_velocity())
    rows = []
    many = len(cfg.decompositions) > 1
    for d in cfg.decompositions:
        dec, sk = build_decomposition(g, *d)
        for m in _methods(cfg.solve_methods, cfg, args):
            preset = _preset(cfg, m.kind)
            ms = solve_mrcm(g, dec, sk, f, bs, preset, m.scheme, cutoffs=_cutoffs(cfg, preset), threads=args.threads)
            u = stitch(ms, PatchConfig(cfg.patch), args.threads)
            e = error_norms(ms, ref)
            e["flux_downscaled"] = error_norms(ms, ref, approx_flux=u)["flux"]
            tag = _column(m, d, many).replace(" ", "_")
            rows.append([_column(m, d, many)] + [e[q] for q in QUANTITIES])
            if cfg.csv:
                files.append(out / f"solution_{tag}.csv")
                io.dump_cells_csv(files[-1], g, pressure=ms.pressure, velocity=u.cell_velocity())
            if cfg.vtk:
                files.append(out / f"solution_{tag}.vtk")
                io.dump_vtk(files[-1], g, tag, pressure=ms.pressure, velocity=u.cell_velocity())
    files.append(out / "errors.csv")
    io.write_table(files[-1], ["method", *QUANTITIES], rows)
    return files


def run_sweep(cfg: ScenarioConfig, args, out: Path) -> list[Path]:
    if not cfg.sweep_values:
        raise ConfigurationError(f"{cfg.source}: [sweep] values: empty")
    g = _grid(cfg)
    bs = _boundary(cfg, g)
    methods = _methods(cfg.sweep_methods, cfg, args)
    many = len(cfg.decompositions) > 1
    decs = {d: build_decomposition(g, *d) for d in cfg.decompositions}
    header = [cfg.sweep_axis] + [_column(m, d, many) for d in cfg.decompositions for m in methods]
    tables = {q: [] for q in QUANTITIES}

    def row_for(label, f, ref, preset_of):
        cells = {q: [label] for q in QUANTITIES}
        for d in cfg.decompositions:
            for m in methods:
                preset = preset_of(m)
                ms = solve_mrcm(g, *decs[d], f, bs, preset, m.scheme, cutoffs=_cutoffs(cfg, preset),
                                threads=args.threads)
                e = _errors(ms, ref, cfg, args.threads)
                for q in QUANTITIES:
                    cells[q].append(e[q])
        for q in QUANTITIES:
            tables[q].append(cells[q])

    if cfg.sweep_axis == "contrast":
        for c in cfg.sweep_values:
            f = _field(cfg, g, contrast=c)
            ref = fine_reference_solve(g, f, bs)
            log.info("contrast %g", c)
            row_for(c, f, ref, lambda m: _preset(cfg, m.kind))
    else:
        f = _field(cfg, g)
        ref = fine_reference_solve(g, f, bs)
        for a in cfg.sweep_values:
            log.info("alpha %g", a)
            row_for(a, f, ref, lambda m, a=a: _preset(cfg, "MRCM", alpha=a) if m.kind == "MRCM" else _preset(cfg, m.kind))
        for pair in cfg.adaptive:
            row_for(f"aMRCM({pair[0]!r}/{pair[1]!r})", f, ref, lambda m, p=pair: _preset(cfg, "aMRCM", pair=p))
    files = []
    for q in QUANTITIES:
        files.append(out / f"errors_{q}.csv")
        io.write_table(files[-1], header, tables[q])
    return files


def run_twophase(cfg: ScenarioConfig, args, out: Path) -> list[Path]:
    g = _grid(cfg)
    f = _field(cfg, g)
    bs = _boundary(cfg, g)
    (d,) = cfg.decompositions[:1]
    dec, sk = build_decomposition(g, *d)
    problem = TwoPhaseProblem(g, f, bs, FluidModel.from_ratio(cfg.M), s0=cfg.s0)
    split = SplittingConfig(cfg.C, cfg.cfl)
    marks = sorted(cfg.checkpoints)
    ref = run_two_phase(problem, fine_elliptic(problem), marks, split)
    runs = {"fine": ref}
    for m in _methods(cfg.twophase_methods, cfg, args):
        preset = _preset(cfg, m.kind)
        ell = multiscale_elliptic(problem, dec, sk, preset, m.scheme, PatchConfig(cfg.patch),
                                  _cutoffs(cfg, preset), args.threads)
        runs[m.label] = run_two_phase(problem, ell, marks, split)
    files = []
    labels = [k for k in runs if k != "fine"]
    errs = {k: saturation_errors(runs[k], ref) for k in labels}
    files.append(out / "saturation_errors.csv")
    io.write_table(files[-1], ["pvi", *labels], [[p] + [errs[k][p] for k in labels] for p in marks])
    files.append(out / "runs.csv")
    io.write_table(
        files[-1],
        ["run", "elliptic_steps", "transport_steps", "mass_balance_error", "s_min", "s_max", "conservation_ratio"],
        [[k, r.n_elliptic, r.n_transport, r.mass_balance_error, r.s_min, r.s_max, r.max_conservation_residual]
         for k, r in runs.items()],
    )
    for k, r in runs.items():
        for p in marks:
            tag = f"saturation_{k}_pvi{p!r}"
            if cfg.csv:
                files.append(out / f"{tag}.csv")
                io.dump_cells_csv(files[-1], g, saturation=r.snapshots[p])
            if cfg.vtk:
                files.append(out / f"{tag}.vtk")
                io.dump_vtk(files[-1], g, tag, saturation=r.snapshots[p])
    return files


COMMANDS = {"solve": run_solve, "sweep": run_sweep, "twophase": run_twophase}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robinms", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "single-phase solve and error table",
        "sweep": "contrast or alpha sweep of relative errors",
        "twophase": "two-phase runs with saturation errors at PVI checkpoints",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, type=Path, help="scenario INI file")
        s.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
        s.add_argument("--threads", type=int, default=1, help="worker threads for local solves")
        s.add_argument("--method", help="method kind: MRCM, MMMFEM, MHM or aMRCM")
        s.add_argument("--scheme", help="interface spaces: POL or PBS")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        cfg = load_config(args.config).with_overrides(out=args.out, method=args.method, scheme=args.scheme)
        if cfg.field_file is not None and not cfg.field_file.is_file():
            raise DataError(f"{cfg.source}: [field] file: not found: {cfg.field_file}")
    except ConfigurationError as exc:
        print(f"robinms: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"robinms: data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    out = cfg.out_dir
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    t0 = time.perf_counter()
    try:
        files = COMMANDS[args.command](cfg, args, stage)
        inputs = [cfg.source] + ([cfg.field_file] if cfg.field_file is not None else [])
        manifest = stage / "manifest.json"
        io.write_manifest(manifest, command=args.command, inputs=inputs, outputs=files,
                          wall_time=time.perf_counter() - t0, extra={"threads": args.threads})
        out.mkdir(parents=True, exist_ok=True)
        for p in files + [manifest]:
            shutil.move(str(p), out / p.name)
    except ConfigurationError as exc:
        print(f"robinms: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"robinms: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RobinMSError as exc:
        print(f"robinms: {args.command} failed for {cfg.source}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    print(f"wrote {len(files) + 1} files to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
