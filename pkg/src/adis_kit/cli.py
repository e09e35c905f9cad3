"""Command-line front end.

Subcommands: ``decompose`` (full pipeline on a data file), ``latdim``
(dimensionality estimate only), ``bench`` (Monte-Carlo separation, the
dimensionality validation grid, and the named solver problems), ``gen``
(fixture generators). Every run writes a manifest with the effective
configuration so outputs can be reproduced bit-identically.

Exit codes: 0 success, 2 bad input or configuration, 3 convergence failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    GridConfig,
    MixingFamily,
    electron_problem,
    grid_csv,
    grid_json,
    latdim_validation,
    make_sources,
    model_dataset,
    monte_carlo_bss,
    nnls_problem,
    polygon_area,
    polygon_problem,
    synth5,
)
from .contrast import make_contrast
from .dataio import load_matrix, save_matrix_csv
from .latdim import estimate_q
from .nlp import AugLagConfig, solve
from .pursuit import PursuitConfig, PursuitError, decompose
from .whiten import DataMatrix, center

SOLVER_KEYS = {f.name for f in AugLagConfig.__dataclass_fields__.values()}
PURSUIT_KEYS = {"n_seeds", "retained", "run_stage2", "rng_seed", "channel_center"}
TOP_KEYS = {"input", "q", "seed", "output", "threads", "pursuit", "solver",
            "contrast"}


class ConfigError(ValueError):
    pass


def _default_threads() -> int:
    env = os.environ.get("ADIS_THREADS")
    if env is not None:
        return max(1, int(env))
    return os.cpu_count() or 1


def load_config_file(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]         # accept a manifest as a config source
    validate_config(doc)
    return doc


def validate_config(doc: dict) -> None:
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "pursuit" in doc:
        bad = set(doc["pursuit"]) - PURSUIT_KEYS
        if bad:
            raise ConfigError(f"unknown pursuit keys: {sorted(bad)}")
    if "solver" in doc:
        bad = set(doc["solver"]) - SOLVER_KEYS
        if bad:
            raise ConfigError(f"unknown solver keys: {sorted(bad)}")


def build_pursuit_config(doc: dict) -> PursuitConfig:
    solver = AugLagConfig(**doc.get("solver", {}))
    pcfg = doc.get("pursuit", {})
    cfg = PursuitConfig(solver=solver,
                        n_seeds=pcfg.get("n_seeds", 1000),
                        retained=pcfg.get("retained", 2),
                        run_stage2=pcfg.get("run_stage2", True),
                        rng_seed=doc.get("seed", pcfg.get("rng_seed", 0)),
                        channel_center=pcfg.get("channel_center", True))
    cfg.validate()
    return cfg


def effective_config(doc: dict, cfg: PursuitConfig) -> dict:
    solver = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
              for k, v in asdict(cfg.solver).items()}
    return {
        "input": doc.get("input"),
        "q": doc.get("q"),
        "seed": cfg.rng_seed,
        "output": doc.get("output"),
        "threads": doc.get("threads"),
        "contrast": doc.get("contrast", "negentropy-logcosh"),
        "pursuit": {"n_seeds": cfg.n_seeds, "retained": cfg.retained,
                    "run_stage2": cfg.run_stage2,
                    "channel_center": cfg.channel_center,
                    "rng_seed": cfg.rng_seed},
        "solver": solver,
    }


def write_manifest(outdir: Path, command: str, config: dict, extra: dict,
                   timings: dict) -> None:
    doc = {"tool": "adis-kit", "version": __version__, "command": command,
           "config": config, "timings": timings}
    doc.update(extra)
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _merge_cli(doc: dict, args, keys) -> dict:
    # flag > config file > default
    for key, attr in keys.items():
        val = getattr(args, attr, None)
        if val is not None:
            doc[key] = val
    return doc


def cmd_decompose(args) -> int:
    try:
        doc = load_config_file(args.config) if args.config else {}
        _merge_cli(doc, args, {"input": "input", "q": "q", "seed": "seed",
                               "output": "output", "threads": "threads"})
        if doc.get("seed") is None:
            doc["seed"] = 0
        if not doc.get("input"):
            raise ConfigError("no input file given")
        if not Path(doc["input"]).exists():
            raise ConfigError(f"input file not found: {doc['input']}")
        cfg = build_pursuit_config(doc)
        contrast = make_contrast(doc.get("contrast", "negentropy-logcosh"))
        values = load_matrix(doc["input"])
        data = DataMatrix(values)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    outdir = Path(doc.get("output") or "adis-out")
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        result, model, stats = decompose(data, q=doc.get("q"), config=cfg,
                                         contrast=contrast)
    except PursuitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for i, tr in enumerate(exc.traces):
            tr.save(outdir / f"trace-failed-{i + 1}.jsonl")
        print(f"partial traces written to {outdir}", file=sys.stderr)
        return 3
    elapsed = time.time() - t0

    q = result.Q.shape[0]
    save_matrix_csv(outdir / "Q.csv", result.Q)
    save_matrix_csv(outdir / "sources.csv", result.S_hat)
    save_matrix_csv(outdir / "mixing.csv", result.A_full)
    with open(outdir / "model.json", "w") as fh:
        fh.write(model.to_json() + "\n")
    if stats is not None:
        rows = np.column_stack([np.arange(data.n), stats.sigma2, stats.rv.T])
        header = ["sample", "sigma2"] + [f"rv_{k + 1}" for k in range(q)]
        save_matrix_csv(outdir / "stats.csv", rows, header=header)
    else:
        save_matrix_csv(outdir / "stats.csv", np.zeros((0, 2)),
                        header=["sample", "sigma2"])
    for k, tr in enumerate(result.component_traces, start=1):
        tr.save(outdir / f"trace-component-{k}.jsonl")
    if result.joint_trace is not None:
        result.joint_trace.save(outdir / "trace-joint.jsonl")

    all_converged = all(
        tr.final is not None and tr.final.status == "converged"
        for tr in result.component_traces)
    write_manifest(outdir, "decompose", effective_config(doc, cfg), {
        "q": q,
        "q_source": result.q_source,
        "joint_fallback": result.joint_fallback,
        "outputs": sorted(p.name for p in outdir.iterdir()
                          if p.name != "manifest.json"),
    }, {"decompose_seconds": elapsed})
    if not all_converged:
        print("error: component extraction did not converge", file=sys.stderr)
        return 3
    print(f"decomposed {data.p}x{data.n} into q={q} sources "
          f"({result.q_source}); outputs in {outdir}")
    return 0


def cmd_latdim(args) -> int:
    try:
        if not Path(args.input).exists():
            raise ConfigError(f"input file not found: {args.input}")
        data = DataMatrix(load_matrix(args.input))
        if data.p < 8:
            raise ConfigError(
                f"need at least 8 channels for the scan range, got {data.p}")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    outdir = Path(args.output or "adis-out")
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    centered, _ = center(data)
    summary = estimate_q(centered.values, seed=args.seed)
    with open(outdir / "latdim.json", "w") as fh:
        fh.write(summary.to_json() + "\n")
    with open(outdir / "latdim-profile.csv", "w") as fh:
        fh.write(summary.profile_csv())
    write_manifest(outdir, "latdim",
                   {"input": args.input, "seed": args.seed,
                    "output": str(outdir)},
                   {"q_hat": summary.q_hat, "q_l": summary.q_l},
                   {"latdim_seconds": time.time() - t0})
    print(summary.q_hat)
    return 0


def cmd_bench_nlp(args) -> int:
    cfg = AugLagConfig()
    if args.problem == "electron":
        problem = electron_problem(args.np_, seed=args.seed)
        sol = solve(problem, config=cfg)
        print(f"electron n_p={args.np_}: objective={sol.f:.6f} "
              f"kkt_grad={sol.kkt_grad:.3e} kkt_con={sol.kkt_con:.3e} "
              f"outer={sol.n_outer} status={sol.status.value}")
        return 0 if sol.converged else 3
    if args.problem == "polygon":
        best = None
        for seed in [None] + list(range(args.multistart - 1)):
            problem = polygon_problem(args.nv, seed=seed)
            sol = solve(problem, config=cfg)
            if not sol.converged:
                continue
            area = polygon_area(sol.x, args.nv)
            if best is None or area > best[0]:
                best = (area, sol)
        if best is None:
            print("error: no polygon start converged", file=sys.stderr)
            return 3
        area, sol = best
        print(f"polygon n_v={args.nv}: area={area:.6f} "
              f"kkt_grad={sol.kkt_grad:.3e} kkt_con={sol.kkt_con:.3e} "
              f"outer={sol.n_outer} status={sol.status.value}")
        return 0
    # nnls
    if args.file:
        try:
            with np.load(args.file) as npz:
                A, b = npz["A"], npz["b"]
                C = npz["C"] if "C" in npz else np.eye(A.shape[1])
                d = npz["d"] if "d" in npz else np.zeros(C.shape[0])
        except (OSError, KeyError) as exc:
            print(f"error: cannot read {args.file}: {exc}", file=sys.stderr)
            return 2
    else:
        from .bench import random_nnls_instance
        A, b, C, d = random_nnls_instance(args.rows, args.cols, args.seed)
    sol = solve(nnls_problem(A, b, C, d), config=cfg)
    print(f"nnls {A.shape[0]}x{A.shape[1]}: objective={sol.f:.6f} "
          f"kkt_grad={sol.kkt_grad:.3e} kkt_con={sol.kkt_con:.3e} "
          f"outer={sol.n_outer} status={sol.status.value}")
    return 0 if sol.converged else 3


def cmd_bench_sir_mc(args) -> int:
    try:
        if Path(args.sources).exists():
            S = load_matrix(args.sources)
        else:
            S = make_sources(args.sources, n=args.n, seed=args.source_seed)
        family = MixingFamily(args.family)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.output or "adis-out")
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = PursuitConfig()
    t0 = time.time()
    agg, details = monte_carlo_bss(S, family, n_b=args.nb, config=cfg,
                                   master_seed=args.seed,
                                   threads=args.threads or _default_threads())
    with open(outdir / "sir-runs.csv", "w") as fh:
        fh.write(agg.runs_csv())
    with open(outdir / "sir-summary.json", "w") as fh:
        fh.write(agg.to_json() + "\n")
    write_manifest(outdir, "bench sir-mc",
                   {"sources": args.sources, "nb": args.nb, "seed": args.seed,
                    "family": family.value, "n": args.n},
                   {"M": agg.M, "S": agg.S, "n_failed": agg.n_failed},
                   {"mc_seconds": time.time() - t0})
    print(f"sir-mc: M={agg.M:.4f} dB S={agg.S:.4f} dB over "
          f"{agg.run_means.size} runs ({agg.n_failed} failed)")
    return 0 if agg.n_failed == 0 else 3


def cmd_bench_score(args) -> int:
    """Score externally produced source estimates with the same SIR pipeline.

    Any separation program can participate: run it on a mixed-matrix file,
    write its estimated sources in the same matrix format, and score them
    here against the truth.
    """
    from .bench import sir as sir_fn
    try:
        truth = load_matrix(args.truth)
        estimates = load_matrix(args.estimates)
        rep = sir_fn(truth, estimates)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    per_source = " ".join(f"{v:.4f}" for v in rep.sir_db)
    print(f"mean_sir_db={rep.mean_db:.4f} per_source=[{per_source}] "
          f"matching={rep.matching.tolist()}")
    if args.output:
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "sir-score.json", "w") as fh:
            json.dump({"mean_sir_db": rep.mean_db,
                       "sir_db": rep.sir_db.tolist(),
                       "matching": rep.matching.tolist()}, fh)
            fh.write("\n")
    return 0


def cmd_bench_latdim_grid(args) -> int:
    cfg = GridConfig(reps=args.reps, master_seed=args.seed,
                     ratios=tuple(float(r) for r in args.ratios.split(",")),
                     q_fracs=tuple(float(r) for r in args.qps.split(",")),
                     families=tuple(args.families.split(",")))
    outdir = Path(args.output or "adis-out")
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    cells = latdim_validation(cfg, threads=args.threads or _default_threads())
    with open(outdir / "latdim-grid.csv", "w") as fh:
        fh.write(grid_csv(cells))
    with open(outdir / "latdim-grid.json", "w") as fh:
        fh.write(grid_json(cells) + "\n")
    write_manifest(outdir, "bench latdim-grid",
                   {"reps": cfg.reps, "seed": cfg.master_seed,
                    "ratios": list(cfg.ratios), "q_fracs": list(cfg.q_fracs),
                    "families": list(cfg.families)},
                   {"worst_abs_bias": max(abs(c.mean_bias) for c in cells)},
                   {"grid_seconds": time.time() - t0})
    worst = max(abs(c.mean_bias) for c in cells)
    print(f"latdim-grid: {len(cells)} cells, worst |mean bias| = {worst:.3f}")
    return 0


def cmd_gen(args) -> int:
    if args.kind == "synth5":
        S = synth5(n=args.n, seed=args.seed)
        save_matrix_csv(args.out, S)
        print(f"wrote 5x{args.n} sources to {args.out}")
        return 0
    # model data
    X = model_dataset(args.p, args.q, args.n, args.sigma, family=args.family,
                      seed=args.seed)
    save_matrix_csv(args.out, X)
    print(f"wrote {args.p}x{args.n} model data (q={args.q}, "
          f"sigma={args.sigma}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adis", description="Blind source separation toolkit")
    parser.add_argument("--version", action="version",
                        version=f"adis-kit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_dec = sub.add_parser("decompose", help="run the full pipeline")
    p_dec.add_argument("--input", help="data file (CSV or binary matrix)")
    p_dec.add_argument("--q", type=int, help="latent dimension override")
    p_dec.add_argument("--seed", type=int, help="master seed (default 0)")
    p_dec.add_argument("--output", help="output directory")
    p_dec.add_argument("--config", help="JSON config or manifest file")
    p_dec.add_argument("--threads", type=int)
    p_dec.set_defaults(func=cmd_decompose)

    p_lat = sub.add_parser("latdim", help="estimate latent dimensionality")
    p_lat.add_argument("--input", required=True)
    p_lat.add_argument("--seed", type=int, default=0)
    p_lat.add_argument("--output")
    p_lat.set_defaults(func=cmd_latdim)

    p_bench = sub.add_parser("bench", help="benchmark harnesses")
    bench_sub = p_bench.add_subparsers(dest="bench_kind", required=True)

    p_nlp = bench_sub.add_parser("nlp", help="solver benchmark problems")
    nlp_sub = p_nlp.add_subparsers(dest="problem", required=True)
    p_el = nlp_sub.add_parser("electron")
    p_el.add_argument("--np", dest="np_", type=int, default=50)
    p_el.add_argument("--seed", type=int, default=0)
    p_el.set_defaults(func=cmd_bench_nlp, problem="electron")
    p_pg = nlp_sub.add_parser("polygon")
    p_pg.add_argument("--nv", type=int, default=6)
    p_pg.add_argument("--multistart", type=int, default=5)
    p_pg.set_defaults(func=cmd_bench_nlp, problem="polygon")
    p_nn = nlp_sub.add_parser("nnls")
    p_nn.add_argument("--file", help=".npz with arrays A, b and optional C, d")
    p_nn.add_argument("--rows", type=int, default=40)
    p_nn.add_argument("--cols", type=int, default=20)
    p_nn.add_argument("--seed", type=int, default=0)
    p_nn.set_defaults(func=cmd_bench_nlp, problem="nnls")

    p_mc = bench_sub.add_parser("sir-mc", help="Monte-Carlo separation quality")
    p_mc.add_argument("--sources", default="synth5",
                      help="suite name or matrix file")
    p_mc.add_argument("--n", type=int, default=2000,
                      help="samples for generated suites")
    p_mc.add_argument("--source-seed", type=int, default=0)
    p_mc.add_argument("--nb", type=int, default=20)
    p_mc.add_argument("--seed", type=int, default=0)
    p_mc.add_argument("--family", default="uniform-random")
    p_mc.add_argument("--output")
    p_mc.add_argument("--threads", type=int)
    p_mc.set_defaults(func=cmd_bench_sir_mc)

    p_score = bench_sub.add_parser(
        "score", help="score externally produced source estimates")
    p_score.add_argument("--truth", required=True, help="true sources matrix")
    p_score.add_argument("--estimates", required=True,
                         help="estimated sources matrix")
    p_score.add_argument("--output")
    p_score.set_defaults(func=cmd_bench_score)

    p_grid = bench_sub.add_parser("latdim-grid",
                                  help="dimensionality validation grid")
    p_grid.add_argument("--reps", type=int, default=20)
    p_grid.add_argument("--seed", type=int, default=0)
    p_grid.add_argument("--ratios", default="1,1.5,2")
    p_grid.add_argument("--qps", default="0.1,0.3,0.5")
    p_grid.add_argument("--families", default="gaussian,uniform,gamma")
    p_grid.add_argument("--output")
    p_grid.add_argument("--threads", type=int)
    p_grid.set_defaults(func=cmd_bench_latdim_grid)

    p_gen = sub.add_parser("gen", help="fixture generators")
    gen_sub = p_gen.add_subparsers(dest="kind", required=True)
    p_g5 = gen_sub.add_parser("synth5")
    p_g5.add_argument("--n", type=int, default=2000)
    p_g5.add_argument("--seed", type=int, default=0)
    p_g5.add_argument("--out", required=True)
    p_g5.set_defaults(func=cmd_gen, kind="synth5")
    p_gm = gen_sub.add_parser("model")
    p_gm.add_argument("--p", type=int, required=True)
    p_gm.add_argument("--q", type=int, required=True)
    p_gm.add_argument("--n", type=int, default=1000)
    p_gm.add_argument("--sigma", type=float, default=0.5)
    p_gm.add_argument("--family", default="gaussian")
    p_gm.add_argument("--seed", type=int, default=0)
    p_gm.add_argument("--out", required=True)
    p_gm.set_defaults(func=cmd_gen, kind="model")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
