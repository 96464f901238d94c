"""Command-line pipeline: INI configuration, batch orchestration, artifacts.

Subcommands: fit | cutoff-sweep | error-analysis | synth | benchmark, each
taking --config <file> plus optional --seed and --out overrides.  All
artifacts are CSV/text; files are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .analysis import (
    AnalysisError,
    attribute_operators,
    cutoff_select,
    cutoff_sweep,
    error_analysis,
    synth_generate,
)
from .fitness import FitnessConfig
from .ga import Chromosome, GAConfig, GeneSpec, run_ga
from .model import PathParams, evaluate_model
from .paths import PathSet, load_manifest, synth_path
from .spectra import (
    FTConfig,
    KGrid,
    KSpectrum,
    SpectrumError,
    read_chi_file,
    resample_onto,
    transform_k_to_r,
    write_chi_file,
    write_r_csv,
)

MODES = ("fit", "cutoff-sweep", "error-analysis", "synth", "benchmark")


class ConfigError(ValueError):
    """Bad or incomplete run configuration."""


@dataclass
class RunConfig:
    mode: str
    output_dir: str
    grid: KGrid
    ga: GAConfig
    fitness: FitnessConfig
    gene_bounds: dict
    data_file: str | None = None
    path_manifest: str | None = None
    synth_paths: list | None = None
    truth: Chromosome | None = None
    snr: float | None = None
    synth_seed: int = 0
    cutoff_percents: list | None = None
    cutoff_repeats: int = 3
    error_runs: int = 20
    error_ranges: dict | None = None
    benchmark_n_paths: list | None = None
    benchmark_generations: int = 5


def _get(section, key, cast=str, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"[{section.name}] missing required key '{key}'")
        return default
    raw = section[key]
    try:
        if cast is bool:
            return section.getboolean(key)
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] key '{key}': cannot parse {raw!r}") from None


def _floats(raw: str) -> list[float]:
    return [float(x) for x in raw.replace(",", " ").split()]


def _triple(section, key, default):
    raw = section.get(key)
    if raw is None:
        return default
    vals = _floats(raw)
    if len(vals) != 3:
        raise ConfigError(f"[{section.name}] '{key}' needs 'lower upper step'")
    return tuple(vals)


def build_gene_specs(bounds: dict, n_paths: int) -> list[GeneSpec]:
    specs = [GeneSpec("delta_e0", *bounds["delta_e0"])]
    for i in range(n_paths):
        specs.append(GeneSpec(f"s02_{i}", *bounds["s02"]))
        specs.append(GeneSpec(f"sigma2_{i}", *bounds["sigma2"]))
        specs.append(GeneSpec(f"delta_r_{i}", *bounds["delta_r"]))
    return specs


def parse_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "run" not in cp:
        raise ConfigError(f"{path}: missing [run] section")

    run = cp["run"]
    mode = _get(run, "mode", required=True)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")

    g = cp["grid"] if "grid" in cp else {}
    grid = KGrid(
        k_min=float(g.get("k_min", 0.5)),
        k_max=float(g.get("k_max", 12.5)),
        delta_k=float(g.get("delta_k", 0.05)),
    )

    ft_sec = cp["ft"] if "ft" in cp else {}
    ft = FTConfig(
        k_range=(
            float(ft_sec.get("k_min_fit", 2.5)),
            float(ft_sec.get("k_max_fit", 12.0)),
        ),
        r_range=(float(ft_sec.get("r_min", 0.0)), float(ft_sec.get("r_max", 6.0))),
        k_weight=int(ft_sec.get("k_weight", 2)),
        window=ft_sec.get("window", "hanning"),
        window_sill=float(ft_sec.get("window_sill", 1.0)),
        n_fft=int(ft_sec.get("n_fft", 2048)),
    )

    f_sec = cp["fitness"] if "fitness" in cp else {}
    n_indep = f_sec.get("n_indep") if f_sec else None
    fitness = FitnessConfig(
        ft=ft,
        space=f_sec.get("space", "K"),
        n_indep=int(n_indep) if n_indep else None,
        epsilon=float(f_sec.get("epsilon", 1.0)),
        k_weight=int(f_sec.get("k_weight", 2)),
    )

    ga_sec = cp["ga"] if "ga" in cp else {}
    ga = GAConfig(
        population_size=int(ga_sec.get("population_size", 200)),
        max_generations=int(ga_sec.get("max_generations", 100)),
        elite_fraction=float(ga_sec.get("elite_fraction", 0.2)),
        random_fraction=float(ga_sec.get("random_fraction", 0.2)),
        crossover_method=ga_sec.get("crossover_method", "uniform"),
        mutation_method=ga_sec.get("mutation_method", "maximum"),
        initial_mutation_rate=float(ga_sec.get("initial_mutation_rate", 20.0)),
        mutation_rate_bounds=(
            float(ga_sec.get("mutation_rate_min", 1.0)),
            float(ga_sec.get("mutation_rate_max", 90.0)),
        ),
        rechenberg_factor=float(ga_sec.get("rechenberg_factor", 0.9)),
        patience=int(ga_sec.get("patience", 20)),
        rng_seed=int(ga_sec.get("rng_seed", 0)),
    )

    genes = cp["genes"] if "genes" in cp else {}
    bounds = {
        "delta_e0": _triple(genes, "delta_e0", (-10.0, 10.0, 0.01)) if genes else (-10.0, 10.0, 0.01),
        "s02": _triple(genes, "s02", (0.0, 1.2, 0.005)) if genes else (0.0, 1.2, 0.005),
        "sigma2": _triple(genes, "sigma2", (0.0, 0.02, 1e-4)) if genes else (0.0, 0.02, 1e-4),
        "delta_r": _triple(genes, "delta_r", (-0.2, 0.2, 1e-3)) if genes else (-0.2, 0.2, 1e-3),
    }

    cfg = RunConfig(
        mode=mode,
        output_dir=run.get("output_dir", "out"),
        grid=grid,
        ga=ga,
        fitness=fitness,
        gene_bounds=bounds,
        data_file=run.get("data_file"),
        path_manifest=run.get("path_manifest"),
    )

    if "synth_paths" in cp:
        cfg.synth_paths = []
        for key, raw in cp["synth_paths"].items():
            vals = _floats(raw)
            if len(vals) not in (3, 4):
                raise ConfigError(
                    f"[synth_paths] '{key}' needs 'r_eff degeneracy amp [lambda]'"
                )
            cfg.synth_paths.append((key, *vals))

    if "synth" in cp:
        s = cp["synth"]
        n_paths = len(cfg.synth_paths or []) or None
        s02 = _floats(s.get("s02", ""))
        sigma2 = _floats(s.get("sigma2", ""))
        delta_r = _floats(s.get("delta_r", ""))
        if not (len(s02) == len(sigma2) == len(delta_r)):
            raise ConfigError("[synth] s02, sigma2, delta_r lists must match in length")
        if n_paths is not None and s02 and len(s02) != n_paths:
            raise ConfigError("[synth] parameter lists must match [synth_paths] count")
        if s02:
            cfg.truth = Chromosome(
                delta_e0=float(s.get("delta_e0", 0.0)),
                per_path=tuple(
                    PathParams(s02=a, sigma2=b, delta_r=c)
                    for a, b, c in zip(s02, sigma2, delta_r)
                ),
            )
        snr_raw = s.get("snr", "inf")
        cfg.snr = None if snr_raw in ("inf", "none") else float(snr_raw)
        cfg.synth_seed = int(s.get("seed", 0))

    if "cutoff" in cp:
        c = cp["cutoff"]
        cfg.cutoff_percents = _floats(c.get("percents", "10 5 2 1 0.67 0.5 0.3"))
        cfg.cutoff_repeats = int(c.get("repeats", 3))
    if "error" in cp:
        e = cp["error"]
        cfg.error_runs = int(e.get("n_runs", 20))
        cfg.error_ranges = {
            "population": tuple(int(x) for x in _floats(e.get("population", "100 5000"))),
            "generations": tuple(int(x) for x in _floats(e.get("generations", "10 50"))),
            "mutation_rate": tuple(_floats(e.get("mutation_rate", "0 100"))),
        }
    if "benchmark" in cp:
        b = cp["benchmark"]
        cfg.benchmark_n_paths = [int(x) for x in _floats(b.get("n_paths", "5 10 20 40 80"))]
        cfg.benchmark_generations = int(b.get("generations", 5))
    return cfg


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_data(path: str, grid: KGrid) -> KSpectrum:
    """Read a two-column spectrum file and resample it onto the run grid."""
    k, chi = read_chi_file(path)
    src_grid = KGrid(k_min=k[0], k_max=k[-1], delta_k=(k[-1] - k[0]) / (len(k) - 1))
    dk = np.diff(k)
    if np.max(np.abs(dk - dk[0])) > 1e-6 * dk[0]:
        # Non-uniform input: interpolate directly onto the run grid.
        if grid.k_min < k[0] - 1e-9 or grid.k_max > k[-1] + 1e-9:
            raise SpectrumError(
                f"{path}: run grid extends beyond data range [{k[0]}, {k[-1]}]"
            )
        return KSpectrum(grid=grid, chi=np.interp(grid.ks, k, chi))
    return resample_onto(KSpectrum(grid=src_grid, chi=chi), grid)


def build_paths(cfg: RunConfig) -> PathSet:
    if cfg.path_manifest:
        return load_manifest(cfg.path_manifest)
    if cfg.synth_paths:
        return PathSet(
            paths=tuple(
                synth_path(
                    r_eff=vals[0],
                    degeneracy=vals[1],
                    grid=cfg.grid,
                    amp_scale=vals[2],
                    lambda_const=vals[3] if len(vals) > 3 else 10.0,
                    label=key,
                )
                for key, *vals in cfg.synth_paths
            ),
            source="synthetic",
        )
    raise ConfigError("either path_manifest or a [synth_paths] section is required")


def _chromosome_lines(chrom: Chromosome, labels, stds=None) -> list[str]:
    lines = []
    genes = chrom.to_genes()
    names = ["delta_e0"]
    for lbl in labels:
        names += [f"s02[{lbl}]", f"sigma2[{lbl}]", f"delta_r[{lbl}]"]
    for i, name in enumerate(names):
        if stds is not None:
            lines.append(f"{name} = {genes[i]:.6g} +/- {stds[i]:.3g}")
        else:
            lines.append(f"{name} = {genes[i]:.6g}")
    return lines


def _write_fit_artifacts(out: str, cfg: RunConfig, data, paths, result) -> list[str]:
    files = []
    model = evaluate_model(paths, result.best, cfg.grid)

    rows = ["k,chi_data,chi_model"]
    for k, d, m in zip(cfg.grid.ks, data.chi, model.chi):
        rows.append(f"{k:.17g},{d:.17g},{m:.17g}")
    p = os.path.join(out, "model_k.csv")
    _atomic_write(p, "\n".join(rows) + "\n")
    files.append(p)

    r_model = transform_k_to_r(model, cfg.fitness.ft)
    r_data = transform_k_to_r(data, cfg.fitness.ft)
    rows = ["r,re_model,im_model,mag_model,mag_data"]
    for r, c, dmag in zip(r_model.r, r_model.chi_r, r_data.magnitude):
        rows.append(f"{r:.17g},{c.real:.17g},{c.imag:.17g},{abs(c):.17g},{dmag:.17g}")
    p = os.path.join(out, "model_r.csv")
    _atomic_write(p, "\n".join(rows) + "\n")
    files.append(p)

    att = attribute_operators(result)
    rows = ["generation,best_fitness,sigma,success_ratio,d_crossover,d_mutation"]
    for i in range(len(result.fitness_trace)):
        rows.append(
            f"{att.generation[i]},{result.fitness_trace[i]:.17g},"
            f"{result.sigma_trace[i]:.17g},{result.success_trace[i]:.17g},"
            f"{att.d_crossover[i]:.17g},{att.d_mutation[i]:.17g}"
        )
    p = os.path.join(out, "traces.csv")
    _atomic_write(p, "\n".join(rows) + "\n")
    files.append(p)

    summary = [
        f"exafsga {__version__} fit summary",
        f"exit_reason = {result.exit_reason}",
        f"generations = {result.n_generations}",
        f"best_fitness = {result.best_fitness:.17g}",
        "",
        "best parameters:",
        *_chromosome_lines(result.best, paths.labels()),
        "",
        "metrics (k-weighted K-space): "
        + json.dumps({k: v for k, v in result.metrics_k.items() if k != "unweighted"}),
        "metrics (unweighted K-space): "
        + json.dumps(result.metrics_k.get("unweighted", {})),
        "metrics (R-space magnitude): " + json.dumps(result.metrics_r),
    ]
    p = os.path.join(out, "summary.txt")
    _atomic_write(p, "\n".join(summary) + "\n")
    files.append(p)
    return files


def _run_fit(cfg: RunConfig, out: str) -> list[str]:
    paths = build_paths(cfg)
    if not cfg.data_file:
        raise ConfigError("fit mode requires data_file")
    data = load_data(cfg.data_file, cfg.grid)
    specs = build_gene_specs(cfg.gene_bounds, len(paths))
    result = run_ga(data, paths, cfg.ga, cfg.fitness, specs)
    return _write_fit_artifacts(out, cfg, data, paths, result)


def _run_synth(cfg: RunConfig, out: str) -> list[str]:
    paths = build_paths(cfg)
    if cfg.truth is None:
        raise ConfigError("synth mode requires a [synth] section with truth parameters")
    spec = synth_generate(paths, cfg.truth, cfg.grid, cfg.snr, seed=cfg.synth_seed)
    p = os.path.join(out, "synthetic_chi.dat")
    import io

    buf = io.StringIO()
    buf.write(f"# synthetic spectrum (snr={cfg.snr}, seed={cfg.synth_seed})\n# k chi\n")
    for k, c in zip(cfg.grid.ks, spec.chi):
        buf.write(f"{k:.17g} {c:.17g}\n")
    _atomic_write(p, buf.getvalue())
    return [p]


def _run_cutoff_sweep(cfg: RunConfig, out: str) -> list[str]:
    paths = build_paths(cfg)
    data = load_data(cfg.data_file, cfg.grid)
    specs = build_gene_specs(cfg.gene_bounds, len(paths))
    rows = cutoff_sweep(
        data,
        paths,
        cfg.ga,
        cfg.fitness,
        cfg.cutoff_percents or [10, 5, 2, 1, 0.67, 0.5, 0.3],
        gene_specs=specs,
        n_repeat=cfg.cutoff_repeats,
        gene_spec_builder=lambda n: build_gene_specs(cfg.gene_bounds, n),
    )
    lines = ["percent,mean_chi2,n_paths_kept"]
    for row in rows:
        lines.append(f"{row['percent']:.17g},{row['mean_chi2']:.17g},{row['n_paths_kept']}")
    p = os.path.join(out, "cutoff_sweep.csv")
    _atomic_write(p, "\n".join(lines) + "\n")
    return [p]


def _run_error_analysis(cfg: RunConfig, out: str) -> list[str]:
    paths = build_paths(cfg)
    data = load_data(cfg.data_file, cfg.grid)
    specs = build_gene_specs(cfg.gene_bounds, len(paths))
    report = error_analysis(
        data,
        paths,
        cfg.ga,
        cfg.fitness,
        n_runs=cfg.error_runs,
        ranges=cfg.error_ranges,
        seed=cfg.ga.rng_seed,
        gene_specs=specs,
    )
    files = []
    lines = ["parameter,mean,std"]
    for name, m, s in zip(report.parameter_names, report.means, report.stds):
        lines.append(f"{name},{m:.17g},{s:.17g}")
    p = os.path.join(out, "error_report.csv")
    _atomic_write(p, "\n".join(lines) + "\n")
    files.append(p)

    lines = ["," + ",".join(report.parameter_names)]
    for i, name in enumerate(report.parameter_names):
        lines.append(name + "," + ",".join(f"{v:.17g}" for v in report.covariance[i]))
    p = os.path.join(out, "covariance.csv")
    _atomic_write(p, "\n".join(lines) + "\n")
    files.append(p)

    lines = ["run,population,generations,mutation_rate,seed,best_fitness"]
    for e in report.manifest:
        lines.append(
            f"{e['run']},{e['population']},{e['generations']},"
            f"{e['mutation_rate']:.17g},{e['seed']},{e.get('best_fitness', 'failed')}"
        )
    p = os.path.join(out, "run_manifest.csv")
    _atomic_write(p, "\n".join(lines) + "\n")
    files.append(p)
    return files


def benchmark_scaling(
    cfg: RunConfig, n_paths_list, generations: int = 5
) -> list[tuple[int, float]]:
    """Seconds per generation as a function of path count, fixed population."""
    from .ga import default_gene_specs

    rows = []
    for n in n_paths_list:
        paths = PathSet(
            paths=tuple(
                synth_path(
                    r_eff=2.0 + 0.1 * i,
                    degeneracy=6.0,
                    grid=cfg.grid,
                    amp_scale=1.0,
                    label=f"bench_{i}",
                )
                for i in range(n)
            ),
            source="benchmark",
        )
        truth = Chromosome(
            delta_e0=0.0,
            per_path=tuple(PathParams(0.8, 0.003, 0.0) for _ in range(n)),
        )
        data = synth_generate(paths, truth, cfg.grid, snr=None)
        ga_cfg = replace(
            cfg.ga, max_generations=generations + 1, patience=generations + 1
        )
        specs = build_gene_specs(cfg.gene_bounds, n)
        t0 = time.perf_counter()
        result = run_ga(data, paths, ga_cfg, cfg.fitness, specs)
        elapsed = time.perf_counter() - t0
        rows.append((n, elapsed / result.n_generations))
    return rows


def _run_benchmark(cfg: RunConfig, out: str) -> list[str]:
    rows = benchmark_scaling(
        cfg, cfg.benchmark_n_paths or [5, 10, 20, 40], cfg.benchmark_generations
    )
    lines = ["n_paths,seconds_per_generation"]
    for n, sec in rows:
        lines.append(f"{n},{sec:.17g}")
    p = os.path.join(out, "benchmark.csv")
    _atomic_write(p, "\n".join(lines) + "\n")
    return [p]


def run(cfg: RunConfig) -> list[str]:
    """Execute the configured mode; returns the artifact file list."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    dispatch = {
        "fit": _run_fit,
        "synth": _run_synth,
        "cutoff-sweep": _run_cutoff_sweep,
        "error-analysis": _run_error_analysis,
        "benchmark": _run_benchmark,
    }
    files = dispatch[cfg.mode](cfg, out)
    manifest = {
        "mode": cfg.mode,
        "version": __version__,
        "seed": cfg.ga.rng_seed,
        "artifacts": [os.path.basename(f) for f in files],
    }
    mpath = os.path.join(out, "manifest.json")
    _atomic_write(mpath, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    files.append(mpath)
    return files


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="exafsga",
        description="Genetic-algorithm EXAFS spectrum fitting",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    cfg.mode = args.mode
    if args.seed is not None:
        cfg.ga = replace(cfg.ga, rng_seed=args.seed)
        cfg.synth_seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out

    try:
        files = run(cfg)
    except (ConfigError,) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"{type(exc).__module__}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
