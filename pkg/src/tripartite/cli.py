"""Command-line runner: one subcommand per experiment type."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (KappaResult, NoCollapseOverlap, eit_asymmetry,
                       eit_spectrum, kappa_sweep, select_t_star, trajectory)
from .config import (ConfigError, Experiment, ExperimentConfig, ValidateConfig, apply_overrides,
                     load_config, validate_dict)
from .fock import CutoffError, amplitudes, choose_cutoff
from .io import emit_csv, write_json

log = logging.getLogger("tripartite")

SUBCOMMANDS = {"evolve": Experiment.EVOLVE, "eit": Experiment.EIT,
               "kappa-sweep": Experiment.KAPPA_SWEEP, "validate": Experiment.VALIDATE}


def _prepare(field_cfg, cfg: ExperimentConfig):
    spec = field_cfg.to_spec()
    cutoff = choose_cutoff(spec, cfg.cutoff_epsilon, cfg.cutoff_ceiling)
    return spec, amplitudes(spec, cutoff)


def _provenance(cfg: ExperimentConfig, raw: dict, **extra) -> dict:
    meta = {"code_version": __version__, "experiment": cfg.experiment.value,
            "config": cfg.model_dump(mode="json", by_alias=True), "raw_config": raw}
    meta.update(extra)
    return meta


def run_evolve(cfg, raw, out: Path, threads: int) -> list[Path]:
    s1, q = _prepare(cfg.field1, cfg)
    s2, r = _prepare(cfg.field2, cfg)
    params = cfg.params.to_params()
    cols = trajectory(q, r, params, cfg.times.array())
    path = out / f"{cfg.name}.csv"
    meta = _provenance(cfg, raw, cutoffs=[q.cutoff, r.cutoff],
                       tail_mass=[q.tail_mass, r.tail_mass], params=params.as_dict())
    emit_csv(cols, path, meta)
    return [path]


def _t_star(cfg, q, params, threads: int):
    e = cfg.eit
    if e.t_star is not None:
        return e.t_star, None
    _, r_ref = _prepare(e.reference_field2, cfg)
    t_star, lo, hi = select_t_star(q, r_ref, params, e.delta1.array(), e.collapse_times.array(),
                                   cfg.detector.window, cfg.detector.rel_threshold,
                                   use_full_grid=not e.t_star_from_endpoints, threads=threads)
    return t_star, [lo, hi]


def _eit_once(cfg, raw, out: Path, threads: int, suffix: str = "", t_star=None,
              overlap=None) -> Path:
    _, q = _prepare(cfg.field1, cfg)
    _, r = _prepare(cfg.field2, cfg)
    params = cfg.params.to_params()
    grid = cfg.eit.delta1.array()
    if t_star is None:
        t_star, overlap = _t_star(cfg, q, params, threads)
    spec = eit_spectrum(q, r, params, grid, t_star, threads=threads)
    symmetric = np.allclose(grid, -grid[::-1])
    meta = _provenance(cfg, raw, cutoffs=[q.cutoff, r.cutoff], t_star=t_star,
                       collapse_overlap=overlap, params=params.as_dict(),
                       asymmetry=eit_asymmetry(spec) if symmetric else None)
    path = out / f"{cfg.name}{suffix}.csv"
    emit_csv(spec, path, meta)
    return path


def _tag(value) -> str:
    return f"{value:g}" if isinstance(value, (int, float)) else str(value)


def run_eit(cfg, raw, out: Path, threads: int) -> list[Path]:
    scan = cfg.eit.scan
    if scan is None:
        return [_eit_once(cfg, raw, out, threads)]
    # one instant for the whole scan, taken from the unscanned configuration
    _, q = _prepare(cfg.field1, cfg)
    t_star, overlap = _t_star(cfg, q, cfg.params.to_params(), threads)
    tag = scan.keys[0].rsplit(".", 1)[-1]
    paths = []
    for value in scan.values:
        sub_raw = apply_overrides(raw, [f"{k}={json.dumps(value)}" for k in scan.keys])
        sub_raw["eit"] = {k: v for k, v in sub_raw["eit"].items() if k != "scan"}
        sub = validate_dict(sub_raw).model_copy(update={"name": cfg.name})
        paths.append(_eit_once(sub, sub_raw, out, threads, f"_{tag}-{_tag(value)}", t_star, overlap))
    return paths


def _summary(res: KappaResult) -> dict:
    return {"kappa": res.kappa, "plateau_count": len(res.plateaus), "cycles": res.cycles,
            "revival_spacing": res.revival_spacing,
            "plateaus": [[iv.t_start, iv.t_end, iv.level, iv.score] for iv in res.plateaus]}


def run_kappa(cfg, raw, out: Path, threads: int) -> list[Path]:
    _, q = _prepare(cfg.field1, cfg)
    _, r = _prepare(cfg.field2, cfg)
    params = cfg.params.to_params()
    times = cfg.times.array()
    d = cfg.detector
    results = kappa_sweep(q, r, params, cfg.kappa_sweep.kappas, times, d.window,
                          d.rel_threshold, d.min_length, threads=threads)
    cols = {"t": times}
    for res in results:
        cols[f"svne_kappa={res.kappa:g}"] = res.series.values
    path = out / f"{cfg.name}.csv"
    emit_csv(cols, path, _provenance(cfg, raw, cutoffs=[q.cutoff, r.cutoff],
                                     summary=[_summary(x) for x in results]))
    return [path]


def run_validate(cfg, raw, out: Path, threads: int) -> tuple[list[Path], bool]:
    from .oracle import randomized_validation

    v = cfg.validate_ or ValidateConfig()
    seed = v.seed if cfg.seed is None else cfg.seed
    cases = randomized_validation(seed, v.cases, v.max_cutoff, v.max_time)
    worst = max(1.0 - c.fidelity for c in cases)
    ok = worst <= v.threshold
    report = {"seed": seed, "cases": len(cases), "max_infidelity": worst,
              "min_fidelity": min(c.fidelity for c in cases),
              "threshold": v.threshold, "passed": ok, "code_version": __version__}
    path = write_json(out / f"{cfg.name}.json", report)
    print(json.dumps(report))
    return [path], ok


RUNNERS = {Experiment.EVOLVE: run_evolve, Experiment.EIT: run_eit,
           Experiment.KAPPA_SWEEP: run_kappa}


def run(cfg: ExperimentConfig, raw: dict, out: Path, threads: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    if cfg.name is None:
        cfg = cfg.model_copy(update={"name": cfg.experiment.value})
    if cfg.experiment is Experiment.VALIDATE:
        _, ok = run_validate(cfg, raw, out, threads)
        return 0 if ok else 1
    for p in RUNNERS[cfg.experiment](cfg, raw, out, threads):
        log.info("wrote %s", p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tripartite", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="TOML experiment file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-key override, repeatable")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _fail(kind: str, errors: list[str], code: int = 2) -> int:
    sys.stderr.write(json.dumps({"status": "error", "kind": kind, "errors": errors}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        return _fail("usage", ["--threads must be >= 1"])
    wanted = SUBCOMMANDS[args.command]
    overrides = list(args.override)
    if args.config is None:
        overrides.insert(0, f"experiment={json.dumps(wanted.value)}")
    try:
        cfg, raw = load_config(args.config, overrides)
    except FileNotFoundError as exc:
        return _fail("io", [str(exc)])
    except ConfigError as exc:
        return _fail("config", exc.errors)
    if cfg.experiment is not wanted:
        return _fail("config", [f"experiment: config declares '{cfg.experiment.value}' "
                                f"but subcommand is '{args.command}'"])
    try:
        return run(cfg, raw, args.out, args.threads)
    except (CutoffError, NoCollapseOverlap, ConfigError) as exc:
        return _fail(type(exc).__name__, [str(exc)], code=3)
    except OSError as exc:
        return _fail("io", [str(exc)], code=4)


if __name__ == "__main__":
    sys.exit(main())
