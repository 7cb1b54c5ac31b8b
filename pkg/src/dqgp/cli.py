"""Command-line surface: dataset generation, training, benchmarking, reports.

Configuration is a flat ``key = value`` text file validated against the
schema in docs/FORMATS.md before any work starts; unknown keys are rejected.
Every run writes a manifest (resolved config, seeds, content hashes of the
inputs) sufficient to reproduce its outputs bit-exactly. Exit codes: 0 ok,
2 config/schema error, 3 numeric failure, 4 I/O or data-format error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import datahub, pipeline, selftest
from .errors import ConfigError, FormatError, NumericError
from .pipeline import BenchmarkCell, TrainConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_TRAIN_FIELDS = {f.name: f.type for f in fields(TrainConfig)}

# key -> value parser tag; keys outside this table are schema violations.
SCHEMA = {
    "method": "str",
    "circuit": "str",
    "qubits": "int",
    "layers": "int",
    "observable": "str",
    "outer_kernel": "str",
    "outer_param": "float",
    "delta": "angle",
    "exact_shift": "bool",
    "rho": "float",
    "lipschitz": "float",
    "noise_variance": "float",
    "folds": "int",
    "s_max": "int",
    "patience": "int",
    "eps_pri": "float",
    "eps_dual": "float",
    "agents": "int",
    "samples": "int",
    "test_fraction": "float",
    "seed": "int",
    "normalize": "bool",
    "baseline_max_iters": "int",
    "baseline_grad_tol": "float",
    "data": "str",
    "methods": "str_list",
    "agent_grid": "int_list",
    "replications": "int",
    "gen_subset": "str",
    "gen_samples": "int",
    "gen_noise_variance": "float",
    "gen_theta": "float_list",
}


def parse_angle(text: str) -> float:
    """Accept plain floats plus the ``pi`` / ``pi/<n>`` convenience forms."""
    text = text.strip().lower()
    if text == "pi":
        return math.pi
    if text.startswith("pi/"):
        return math.pi / float(text[3:])
    return float(text)


def _parse_value(key: str, raw: str):
    kind = SCHEMA[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "angle":
            return parse_angle(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "str_list":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if kind == "int_list":
            return tuple(int(s) for s in raw.split(",") if s.strip())
        if kind == "float_list":
            return tuple(float(s) for s in raw.split(",") if s.strip())
        return raw
    except ValueError as err:
        raise ConfigError(f"config key {key!r}: {err}") from err


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def validate_config(path, seed_override: int | None = None) -> tuple[TrainConfig, dict]:
    """Parse and normalize a config file into a TrainConfig plus extras.

    Extras hold the non-TrainConfig keys (data source, benchmark grid,
    generation settings). Defaults are filled by the TrainConfig dataclass.
    """
    values = parse_config_text(Path(path).read_text()) if path else {}
    if seed_override is not None:
        values["seed"] = int(seed_override)
    train_kv = {k: v for k, v in values.items() if k in _TRAIN_FIELDS}
    extras = {k: v for k, v in values.items() if k not in _TRAIN_FIELDS}
    return TrainConfig(**train_kv), extras


def parse_data_source(value: str) -> BenchmarkCell:
    """Resolve a ``data`` value into (dataset kind, subset, source path)."""
    if value.startswith("synthetic:"):
        subset = value.split(":", 1)[1]
        if subset not in ("set1", "set2"):
            raise ConfigError(f"synthetic subset must be set1 or set2, got {subset!r}")
        return BenchmarkCell("synthetic", subset, "dqgp", 1)
    path = Path(value)
    if path.suffix == ".csv":
        return BenchmarkCell("csv", path.stem, "dqgp", 1, source=str(path))
    if path.suffix == ".hgt":
        return BenchmarkCell("srtm", path.stem, "dqgp", 1, source=str(path))
    raise ConfigError(f"data must be synthetic:set1|set2 or a .csv/.hgt path, got {value!r}")


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def content_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path: Path, config: TrainConfig, extras: dict, inputs: dict) -> None:
    lines = ["# run manifest"]
    for f in sorted(_TRAIN_FIELDS):
        lines.append(f"{f} = {getattr(config, f)}")
    for k in sorted(extras):
        lines.append(f"{k} = {extras[k]}")
    for name, p in sorted(inputs.items()):
        lines.append(f"input_{name} = {p}")
        lines.append(f"input_{name}_sha256 = {content_hash(p)}")
    atomic_write(path, "\n".join(lines) + "\n")


def _load_data(extras: dict, config: TrainConfig) -> tuple[BenchmarkCell, object, dict]:
    if "data" not in extras:
        raise ConfigError("config key 'data' is required for this command")
    cell = parse_data_source(extras["data"])
    inputs = {}
    if cell.source:
        inputs["data"] = cell.source
    ds = pipeline.cell_dataset(cell, config)
    return cell, ds, inputs


def cmd_gen_data(config: TrainConfig, extras: dict, out: Path) -> int:
    subset = extras.get("gen_subset")
    theta = extras.get("gen_theta")
    if subset is None and theta is None:
        raise ConfigError("gen-data needs gen_subset = set1|set2 or an explicit gen_theta")
    n = extras.get("gen_samples", 500)
    noise = extras.get("gen_noise_variance", config.noise_variance)
    seed = pipeline.derive_seed(config.seed, "datagen")
    if theta is not None:
        spec = config.circuit_spec(2)
        if len(theta) != spec.num_params:
            raise ConfigError(f"gen_theta needs {spec.num_params} values, got {len(theta)}")
        ds = datahub.sample_qgp_prior(spec, theta, n, noise, seed)
        subset = "custom"
    else:
        ds = pipeline.synthetic_dataset(subset, n, noise, seed)
    csv_path = out / f"dataset_{subset}.csv"
    datahub.write_csv(csv_path, ds)
    manifest = out / f"dataset_{subset}.manifest.txt"
    extras = dict(extras, gen_theta=tuple(ds.metadata["theta"]), gen_seed=seed, rows=ds.n)
    write_manifest(manifest, config, extras, {"dataset": csv_path})
    print(f"wrote {csv_path} ({ds.n} rows) and {manifest}")
    return EXIT_OK


def cmd_train(config: TrainConfig, extras: dict, out: Path, trace: bool) -> int:
    cell, ds, inputs = _load_data(extras, config)
    result = pipeline.run_method(config, ds)
    lines = [
        f"method = {result.method}",
        f"dataset = {cell.dataset}",
        f"subset = {cell.subset}",
        f"seed = {result.seed}",
        f"nlpd_test = {result.nlpd_test:.6f}",
        f"nrmse_test = {result.nrmse_test:.6f}",
        f"iterations = {result.iterations}",
        f"wall_ms = {result.wall_ms:.0f}",
        "z_star = " + ",".join(f"{v:.10f}" for v in np.atleast_1d(result.z_star)),
    ]
    result_path = out / f"train_{result.method}.txt"
    atomic_write(result_path, "\n".join(lines) + "\n")
    if trace and result.residual_trace is not None:
        atomic_write(out / f"trace_{result.method}.csv", "\n".join(result.residual_trace.csv_rows()) + "\n")
    write_manifest(out / f"train_{result.method}.manifest.txt", config, extras, inputs)
    print(f"{result.method}: nlpd={result.nlpd_test:.4f} nrmse={result.nrmse_test:.4f} -> {result_path}")
    return EXIT_OK


def cmd_benchmark(config: TrainConfig, extras: dict, out: Path, jobs: int) -> int:
    base_cell, _, inputs = _load_data(extras, config)
    methods = extras.get("methods", ("dqgp", "fact", "apx"))
    agent_grid = extras.get("agent_grid", (config.agents,))
    replications = extras.get("replications", 1)
    for m in methods:
        if m not in pipeline.METHODS:
            raise ConfigError(f"unknown method {m!r} in 'methods'")
    cells = []
    for method in methods:
        for m_agents in agent_grid if method != "full" else (1,):
            cells.append(
                BenchmarkCell(base_cell.dataset, base_cell.subset, method, m_agents, base_cell.source)
            )
    rows = pipeline.benchmark(cells, config, replications, config.seed, jobs=jobs)
    atomic_write(out / "results.csv", pipeline.rows_to_csv(rows))
    atomic_write(out / "summary.txt", pipeline.summarize(rows))
    write_manifest(out / "benchmark.manifest.txt", config, extras, inputs)
    print(f"wrote {out / 'results.csv'} ({len(rows)} rows) and {out / 'summary.txt'}")
    return EXIT_OK


def _parse_result_rows(path: Path) -> list[pipeline.BenchmarkRow]:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != pipeline.RESULT_HEADER:
        raise FormatError(f"{path}: not a results CSV (bad header)")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 10:
            raise FormatError(f"{path}: malformed row {ln!r}")
        rows.append(
            pipeline.BenchmarkRow(
                cells[0], cells[1], cells[2], int(cells[3]), int(cells[4]), int(cells[5]),
                float(cells[6]), float(cells[7]), int(cells[8]), float(cells[9]),
            )
        )
    return rows


def cmd_report(result_paths: list[str], out: Path) -> int:
    rows = []
    for p in result_paths:
        rows.extend(_parse_result_rows(Path(p)))
    if not rows:
        raise FormatError("no result rows found")
    atomic_write(out / "report.txt", pipeline.summarize(rows))
    print((out / "report.txt").read_text(), end="")
    return EXIT_OK


def cmd_selftest() -> int:
    results = selftest.run_all()
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else ""))
        failed += 0 if ok else 1
    if failed:
        print(f"{failed}/{len(results)} checks failed")
        return EXIT_NUMERIC
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqgp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen-data", "train", "benchmark"):
        s = sub.add_parser(name)
        s.add_argument("--config", type=str, default=None, help="flat key = value config file")
        s.add_argument("--seed", type=int, default=None, help="master seed override")
        s.add_argument("--out", type=str, default="results", help="output directory")
        s.add_argument("--trace", action="store_true", help="emit residual/Lyapunov trace CSV")
        s.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    r = sub.add_parser("report")
    r.add_argument("results", nargs="+", help="results CSV files to aggregate")
    r.add_argument("--out", type=str, default="results")
    sub.add_parser("selftest")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest()
        out = Path(args.out)
        if args.command == "report":
            return cmd_report(args.results, out)
        config, extras = validate_config(args.config, args.seed)
        if args.command == "gen-data":
            return cmd_gen_data(config, extras, out)
        if args.command == "train":
            return cmd_train(config, extras, out, args.trace)
        return cmd_benchmark(config, extras, out, args.jobs)
    except ConfigError as err:
        print(f"error: config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"error: numeric: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, OSError) as err:
        print(f"error: io: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
