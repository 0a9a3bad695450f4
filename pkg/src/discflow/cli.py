"""Command-line entry point: config-driven sweeps, grids, and self-checks.

Subcommands
-----------
``sweep <config>``
    Run the benchmark described by an INI-style config file and write the
    CSV; one summary line per record goes to stdout.
``grid --K --delta --schedule --kind``
    Print the points of a time grid, one per line.
``check``
    Run the built-in invariant suite; prints one ``CHECK name PASS|FAIL``
    line each and exits nonzero on any failure.

Exit codes: 0 success, 1 check/assertion failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .checks import run_checks
from .core import ConfigError, get_schedule
from .distributions import SourceSpec, blockwise_ar1, load_table
from .evaluation import SamplerSetting, sweep, write_csv
from .gridopt import build_grid
from .path import ExactPosterior, MixturePath, perturbed_posterior
from .samplers import SamplerKind

__all__ = ["main", "cmd_sweep", "cmd_grid", "cmd_check", "RunConfig", "parse_config"]

_SAMPLER_NAMES = {k.value for k in SamplerKind}

_ALLOWED_KEYS = {
    "data": {"dist", "dims", "vocab", "path"},
    "model": {"source", "schedule", "noise_scale", "noise_seed"},
    "run": {"grid", "delta", "K", "seeds", "n_samples", "tv_coords", "timing",
            "out", "threads"},
    "samplers": {"list", "m", "j", "t_theta"},
}


@dataclass
class RunConfig:
    """Validated contents of a sweep config file."""

    dist: str
    dims: int
    vocab: int
    dist_path: str | None
    source: str
    schedule: str
    noise_scale: float
    noise_seed: int
    grid: str
    delta: float
    K_list: list[int]
    seeds: list[int]
    n_samples: int
    tv_coords: list[int]
    timing: str
    out: str
    threads: int
    samplers: list[SamplerSetting] = field(default_factory=list)


def _ints(raw: str, key: str) -> list[int]:
    try:
        return [int(tok) for tok in raw.replace(" ", "").split(",") if tok]
    except ValueError:
        raise ConfigError(f"key '{key}': expected a comma-separated integer list, "
                          f"got {raw!r}") from None


def _get(cp: configparser.ConfigParser, section: str, key: str, default=None,
         cast=str):
    if not cp.has_option(section, key):
        if default is None:
            raise ConfigError(f"missing required key '{section}.{key}'")
        return default
    raw = cp.get(section, key)
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"key '{section}.{key}': cannot parse {raw!r}") from None


def parse_config(path: str | Path) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep key case: 'K' and 'k' are different keys
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found or unreadable")
    for section in cp.sections():
        if section in _ALLOWED_KEYS:
            for key in cp.options(section):
                if key not in _ALLOWED_KEYS[section]:
                    raise ConfigError(f"unknown key '{section}.{key}'")
        elif not section.startswith("sampler."):
            raise ConfigError(f"unknown section '{section}'")

    dist = _get(cp, "data", "dist", default="ar1").lower()
    if dist not in ("ar1", "file"):
        raise ConfigError(f"key 'data.dist': must be 'ar1' or 'file', got {dist!r}")
    dims = _get(cp, "data", "dims", default=3, cast=int)
    vocab = _get(cp, "data", "vocab", default=8, cast=int)
    dist_path = _get(cp, "data", "path", default="") or None
    if dist == "file" and not dist_path:
        raise ConfigError("key 'data.path' is required when data.dist = file")

    source = _get(cp, "model", "source", default="uniform").lower()
    if source not in ("uniform", "masked"):
        raise ConfigError(f"key 'model.source': must be 'uniform' or 'masked', "
                          f"got {source!r}")
    schedule = _get(cp, "model", "schedule", default="linear").lower()
    if schedule not in ("linear", "cosine"):
        raise ConfigError(f"key 'model.schedule': must be 'linear' or 'cosine', "
                          f"got {schedule!r}")
    noise_scale = _get(cp, "model", "noise_scale", default=0.0, cast=float)
    noise_seed = _get(cp, "model", "noise_seed", default=0, cast=int)

    grid = _get(cp, "run", "grid", default="optimal").lower()
    if grid not in ("uniform", "optimal", "constant_product"):
        raise ConfigError(f"key 'run.grid': unknown grid kind {grid!r}")
    delta = _get(cp, "run", "delta", default=0.01, cast=float)
    K_list = _ints(_get(cp, "run", "K", default="", cast=str), "run.K")
    if not K_list:
        raise ConfigError("key 'run.K': at least one step count is required")
    if any(k < 1 for k in K_list):
        raise ConfigError("key 'run.K': step counts must be >= 1")
    seeds = _ints(_get(cp, "run", "seeds", default="0", cast=str), "run.seeds")
    if not seeds:
        raise ConfigError("key 'run.seeds': at least one seed is required")
    if any(s < 0 for s in seeds):
        raise ConfigError("key 'run.seeds': seeds must be nonnegative")
    n_samples = _get(cp, "run", "n_samples", default=10000, cast=int)
    tv_coords = _ints(_get(cp, "run", "tv_coords", default="0,1,2", cast=str),
                      "run.tv_coords")
    timing = _get(cp, "run", "timing", default="wall").lower()
    if timing not in ("wall", "off"):
        raise ConfigError(f"key 'run.timing': must be 'wall' or 'off', got {timing!r}")
    out = _get(cp, "run", "out", default="sweep.csv")
    threads = _get(cp, "run", "threads", default=1, cast=int)

    names = [tok for tok in
             _get(cp, "samplers", "list", default="", cast=str).replace(" ", "").split(",")
             if tok]
    if not names:
        raise ConfigError("key 'samplers.list': at least one sampler is required")
    base_m = _get(cp, "samplers", "m", default=32, cast=int)
    base_j = _get(cp, "samplers", "j", default="auto", cast=str)
    base_t_theta = _get(cp, "samplers", "t_theta", default=0.0, cast=float)

    settings = []
    for name in names:
        if name not in _SAMPLER_NAMES:
            raise ConfigError(f"key 'samplers.list': unknown sampler {name!r}")
        sec = f"sampler.{name}"
        m = base_m
        j_raw = base_j
        t_theta = base_t_theta
        if cp.has_section(sec):
            for key in cp.options(sec):
                if key not in ("m", "j", "t_theta"):
                    raise ConfigError(f"unknown key '{sec}.{key}'")
            m = _get(cp, sec, "m", default=base_m, cast=int)
            j_raw = _get(cp, sec, "j", default=base_j, cast=str)
            t_theta = _get(cp, sec, "t_theta", default=base_t_theta, cast=float)
        if isinstance(j_raw, str) and j_raw.lower() == "auto":
            j = None
        else:
            try:
                j = int(j_raw)
            except ValueError:
                raise ConfigError(f"key '{sec or 'samplers'}.j': expected integer "
                                  f"or 'auto', got {j_raw!r}") from None
        settings.append(SamplerSetting(name=name, kind=SamplerKind(name), m=m,
                                       j=j, t_theta=t_theta))

    return RunConfig(dist=dist, dims=dims, vocab=vocab, dist_path=dist_path,
                     source=source, schedule=schedule, noise_scale=noise_scale,
                     noise_seed=noise_seed, grid=grid, delta=delta, K_list=K_list,
                     seeds=seeds, n_samples=n_samples, tv_coords=tv_coords,
                     timing=timing, out=out, threads=threads, samplers=settings)


def build_path(cfg: RunConfig) -> MixturePath:
    if cfg.dist == "ar1":
        data = blockwise_ar1(cfg.dims, cfg.vocab)
    else:
        data = load_table(cfg.dist_path)
    source = SourceSpec.masked() if cfg.source == "masked" else SourceSpec.uniform()
    return MixturePath(get_schedule(cfg.schedule), source, data)


def cmd_sweep(config_file: str, out_override: str | None = None,
              threads_override: int | None = None,
              dist_file: str | None = None) -> int:
    cfg = parse_config(config_file)
    if out_override:
        cfg.out = out_override
    if threads_override is not None:
        cfg.threads = threads_override
    if dist_file is not None:
        cfg.dist = "file"
        cfg.dist_path = dist_file
    path = build_path(cfg)
    posterior = ExactPosterior(path)
    if cfg.noise_scale > 0.0:
        posterior = perturbed_posterior(posterior, cfg.noise_scale, cfg.noise_seed)
    records = sweep(
        path, posterior, cfg.samplers, cfg.K_list, cfg.seeds, cfg.n_samples,
        tv_coords=cfg.tv_coords, grid_kind=cfg.grid, delta=cfg.delta,
        threads=cfg.threads, timing=(cfg.timing == "wall"),
    )
    write_csv(records, cfg.out)
    for rec in records:
        print(f"sampler={rec.sampler} K={rec.K} seed={rec.seed} "
              f"tv={rec.tv:.5f} nfe={rec.nfe_mean:.2f} wall={rec.wall_seconds:.3f}s")
    print(f"wrote {len(records)} rows to {cfg.out}")
    return 0


def cmd_grid(K: int, delta: float, schedule_name: str, kind: str) -> int:
    grid = build_grid(get_schedule(schedule_name), kind, K, delta)
    for p in grid.points:
        print(format(float(p), ".12g"))
    return 0


def cmd_check() -> int:
    results = run_checks()
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else 1


def _add_globals(parser: argparse.ArgumentParser, top_level: bool) -> None:
    # accepted both before and after the subcommand; SUPPRESS keeps the
    # subparser from clobbering a value parsed at the top level
    default = None if top_level else argparse.SUPPRESS
    parser.add_argument("--threads", type=int, default=default,
                        help="worker threads for sweep cells")
    parser.add_argument("--out", type=str, default=default,
                        help="override the configured CSV output path")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="discflow",
        description="Samplers and exact-oracle benchmarks for discrete flow models",
    )
    _add_globals(parser, top_level=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a benchmark sweep from a config file")
    _add_globals(p_sweep, top_level=False)
    p_sweep.add_argument("config", type=str)
    p_sweep.add_argument("--dist-file", type=str, default=None,
                         help="load the data law from a table file, overriding [data]")

    p_grid = sub.add_parser("grid", help="print the points of a time grid")
    _add_globals(p_grid, top_level=False)
    p_grid.add_argument("--K", type=int, required=True)
    p_grid.add_argument("--delta", type=float, required=True)
    p_grid.add_argument("--schedule", choices=["linear", "cosine"], default="linear")
    p_grid.add_argument("--kind", choices=["uniform", "optimal", "constant_product"],
                        required=True)

    p_check = sub.add_parser("check", help="run the built-in invariant suite")
    _add_globals(p_check, top_level=False)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sweep":
            return cmd_sweep(args.config, out_override=args.out,
                             threads_override=args.threads,
                             dist_file=args.dist_file)
        if args.command == "grid":
            return cmd_grid(args.K, args.delta, args.schedule, args.kind)
        if args.command == "check":
            return cmd_check()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
