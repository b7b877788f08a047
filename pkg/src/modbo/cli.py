"""Command-line front end: ``modbo run | summarize | posterior-dump | list-benchmarks``.

Experiment config (JSON)::

    {
      "benchmark": "Branin01",
      "surrogates": ["gp", "lgp"],
      "acquisition": {"kind": "EI", "exploration_weight": 2.0},
      "budget": 30,
      "initial_points": 2,
      "repetitions": 5,
      "base_seed": 0,
      "chain_profile": "desk",
      "chain": {"burn_in": 1500},
      "cover": {"iterations": 30, "samples_per_iter": 500},
      "sigma_h_candidates": null,
      "sigma_h_mode": "stratified",
      "output_dir": "runs/branin"
    }

Only ``benchmark`` and ``output_dir`` are required. ``chain`` overrides single
fields of the chosen profile. The ``paper`` profile additionally needs
``"allow_paper_profile": true`` (or ``--allow-paper-profile``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import re
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .acq_optimizer import CoverConfig
from .acquisition import AcquisitionSpec, MarginalAcquisition
from .benchmarks import TABLE_LABELS, benchmark_names, get_benchmark
from .bo_driver import BOConfig, RunTrace, SIGMA_H_MODES, rescale_to_unit, run_bo
from .errors import ModboError, ParameterError, ProtocolError
from .metrics import gap, mark_equivalent_to_best
from .samplers import PROFILES, ChainConfig, infer_posterior
from .surrogates import Dataset, Variant, as_variant

log = logging.getLogger("modbo")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_KNOWN_KEYS = {
    "benchmark", "surrogates", "acquisition", "budget", "initial_points", "repetitions",
    "base_seed", "chain_profile", "chain", "cover", "sigma_h_candidates", "sigma_h_mode",
    "output_dir", "allow_paper_profile",
}


class ConfigError(ModboError):
    pass


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(path, text, key, message):
    line = _line_of(text, key) if key else None
    where = f"{path}:{line}" if line else str(path)
    raise ConfigError(f"{where}: {message}")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    benchmark: str
    surrogates: tuple
    acquisition: AcquisitionSpec
    budget: int
    initial_points: int
    repetitions: int
    base_seed: int
    chain_profile: str
    chain: ChainConfig
    cover: CoverConfig
    sigma_h_candidates: tuple | None
    sigma_h_mode: str
    output_dir: Path

    def bo_config(self, surrogate: str, repetition: int) -> BOConfig:
        return BOConfig(
            surrogate=surrogate,
            acquisition=self.acquisition,
            budget=self.budget,
            initial_points=self.initial_points,
            sigma_h_candidates=self.sigma_h_candidates,
            sigma_h_mode=self.sigma_h_mode,
            chain=self.chain,
            cover=self.cover,
            seed=self.base_seed + repetition,
        )


def _as_int(path, text, raw, key, default, minimum):
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        _fail(path, text, key, f"{key} must be an integer >= {minimum}")
    return value


def load_config(path, allow_paper_profile: bool = False, output_dir=None) -> ExperimentConfig:
    """Parse and validate an experiment config; errors carry ``file:line``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    for key in raw:
        if key not in _KNOWN_KEYS:
            _fail(path, text, key, f"unknown key {key!r}")

    if "benchmark" not in raw:
        raise ConfigError(f"{path}: missing required key 'benchmark'")
    try:
        bench = get_benchmark(str(raw["benchmark"]))
    except (KeyError, ValueError) as exc:
        _fail(path, text, "benchmark", str(exc).strip('"'))

    surrogates = raw.get("surrogates", ["gp"])
    if isinstance(surrogates, str):
        surrogates = [surrogates]
    if not isinstance(surrogates, list) or not surrogates:
        _fail(path, text, "surrogates", "surrogates must be a nonempty list")
    try:
        surrogates = tuple(dict.fromkeys(as_variant(s).value for s in surrogates))
    except (ParameterError, ValueError) as exc:
        _fail(path, text, "surrogates", str(exc))

    acq_raw = raw.get("acquisition", {})
    if isinstance(acq_raw, str):
        acq_raw = {"kind": acq_raw}
    try:
        acquisition = AcquisitionSpec(**acq_raw)
    except (TypeError, ParameterError) as exc:
        _fail(path, text, "acquisition", f"bad acquisition: {exc}")

    budget = _as_int(path, text, raw, "budget", 50, 1)
    initial_points = _as_int(path, text, raw, "initial_points", 2, 1)
    if budget < initial_points:
        _fail(path, text, "budget", "budget must be >= initial_points")
    repetitions = _as_int(path, text, raw, "repetitions", 1, 1)
    base_seed = _as_int(path, text, raw, "base_seed", 0, 0)

    profile = raw.get("chain_profile", "desk")
    if profile not in PROFILES:
        _fail(path, text, "chain_profile", f"chain_profile must be one of {sorted(PROFILES)}")
    if profile == "paper":
        if not (allow_paper_profile or raw.get("allow_paper_profile") is True):
            _fail(path, text, "chain_profile",
                  "the paper profile needs allow_paper_profile: true (or --allow-paper-profile)")
        warnings.warn("paper chain profile: expect hours per run", RuntimeWarning, stacklevel=2)
    try:
        chain = PROFILES[profile].replace(**raw.get("chain", {}))
    except (TypeError, ParameterError) as exc:
        _fail(path, text, "chain", f"bad chain override: {exc}")
    try:
        cover = CoverConfig(**raw.get("cover", {}))
    except (TypeError, ParameterError) as exc:
        _fail(path, text, "cover", f"bad cover config: {exc}")

    cands = raw.get("sigma_h_candidates")
    if cands is not None:
        try:
            cands = tuple(_parse_sigma_h(c, bench.dim) for c in cands)
        except (TypeError, ValueError) as exc:
            _fail(path, text, "sigma_h_candidates", f"bad sigma_h candidate: {exc}")
        if not cands:
            _fail(path, text, "sigma_h_candidates", "sigma_h_candidates must be nonempty")
    mode = raw.get("sigma_h_mode", "stratified")
    if mode not in SIGMA_H_MODES:
        _fail(path, text, "sigma_h_mode", f"sigma_h_mode must be one of {SIGMA_H_MODES}")

    out = output_dir if output_dir is not None else raw.get("output_dir")
    if not out or not isinstance(out, (str, os.PathLike)):
        _fail(path, text, "output_dir", "output_dir must be a path")
    return ExperimentConfig(str(raw["benchmark"]), surrogates, acquisition, budget, initial_points,
                            repetitions, base_seed, profile, chain, cover, cands, mode, Path(out))


def _parse_sigma_h(value, dim: int) -> float:
    """A number, or ``"<c>d"`` meaning ``c * sqrt(dim)``."""
    if isinstance(value, str) and value.strip().endswith("d"):
        out = float(value.strip()[:-1]) * math.sqrt(dim)
    else:
        out = float(value)
    if not (out >= 0 and math.isfinite(out)):
        raise ValueError(f"{value!r} is not a finite nonnegative number")
    return out


# --------------------------------------------------------------------------
# traces on disk
# --------------------------------------------------------------------------


def trace_stem(surrogate: str, repetition: int) -> str:
    return f"{surrogate}_rep{repetition:03d}"


def write_trace(directory: Path, stem: str, trace: RunTrace, extra: dict) -> None:
    """``<stem>.csv`` with one row per evaluation and a ``<stem>.json`` sidecar."""
    dim = len(trace.records[0].x_raw) if trace.records else len(extra.get("domain", []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter"] + [f"x_{i}" for i in range(dim)] + ["f_raw", "best_so_far"])
    for r in trace.records:
        w.writerow([r.iteration] + [repr(float(v)) for v in r.x_raw] + [repr(r.f_raw), repr(r.best_so_far)])
    sidecar = dict(extra)
    sidecar.update({
        "seed": trace.seed,
        "valid": trace.valid,
        "error": trace.error,
        "n_records": len(trace.records),
        "config": trace.config,
        "sigma_h": [r.sigma_h for r in trace.records],
        "diagnostics": [r.diagnostics for r in trace.records],
    })
    (directory / f"{stem}.csv").write_text(buf.getvalue())
    (directory / f"{stem}.json").write_text(json.dumps(sidecar, indent=1, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def read_trace(csv_path: Path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Return (f_raw, best_so_far, sidecar) for one stored run."""
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    f = np.array([float(r["f_raw"]) for r in rows])
    best = np.array([float(r["best_so_far"]) for r in rows])
    sidecar = json.loads(Path(csv_path).with_suffix(".json").read_text())
    return f, best, sidecar


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _run_one(args):
    cfg, surrogate, rep = args
    bench = get_benchmark(cfg.benchmark)
    trace = run_bo(bench, cfg.bo_config(surrogate, rep))
    extra = {
        "benchmark": bench.name,
        "domain": [list(b) for b in bench.domain],
        "known_min": bench.known_min,
        "known_max": bench.known_max,
        "surrogate": surrogate,
        "repetition": rep,
        "chain_profile": cfg.chain_profile,
    }
    write_trace(cfg.output_dir, trace_stem(surrogate, rep), trace, extra)
    return surrogate, rep, trace.valid, trace.error


def worker_count() -> int:
    raw = os.environ.get("MODBO_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring MODBO_THREADS=%r", raw)
    return os.cpu_count() or 1


def cmd_run(config_path, allow_paper_profile=False, output_dir=None) -> int:
    cfg = load_config(config_path, allow_paper_profile, output_dir)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, s, r) for r in range(cfg.repetitions) for s in cfg.surrogates]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    failed = [(s, r, e) for s, r, ok, e in results if not ok]
    for s, r, e in failed:
        print(f"run {trace_stem(s, r)} is partial: {e}", file=sys.stderr)
    print(f"wrote {len(results)} traces to {cfg.output_dir}")
    return EXIT_RUNTIME if failed else EXIT_OK


def summarize_directory(directory) -> dict:
    """Per-method final gaps and regrets from the stored traces, paired by seed."""
    directory = Path(directory)
    runs: dict[str, dict[int, dict]] = {}
    for csv_path in sorted(directory.glob("*.csv")):
        if not csv_path.with_suffix(".json").exists():
            continue
        f, best, side = read_trace(csv_path)
        if not side.get("valid", True):
            log.warning("skipping partial run %s", csv_path.name)
            continue
        k = side["config"]["initial_points"]
        f_first = float(np.min(f[:k]))
        f_opt = float(side["known_min"])
        f_best = float(best[-1])
        runs.setdefault(side["surrogate"], {})[int(side["seed"])] = {
            "gap": gap(f_first, f_best, f_opt),
            "regret": max(f_best - f_opt, 0.0),
            "initial_regret": max(f_first - f_opt, 0.0),
        }
    if not runs:
        raise ProtocolError(f"no complete traces in {directory}")
    seeds = {m: sorted(v) for m, v in runs.items()}
    reference = next(iter(seeds.values()))
    for m, s in seeds.items():
        if s != reference:
            raise ProtocolError(f"method {m} has repetitions {s}, expected {reference}")
    return {m: {key: np.array([runs[m][s][key] for s in reference]) for key in ("gap", "regret", "initial_regret")}
            for m in runs}


def cmd_summarize(directory, metric: str = "gap") -> int:
    per = summarize_directory(directory)
    higher = metric == "gap"
    table = mark_equivalent_to_best({m: v[metric] for m, v in per.items()}, higher_is_better=higher)
    lines = [f"{'method':<16} {'gap':>20} {'regret':>24}  best"]
    out = {"metric": metric, "best": table.best, "methods": {}}
    for m, v in per.items():
        mark = "*" if m in table.marked else ""
        lines.append(f"{m:<16} {v['gap'].mean():>9.3f} ± {v['gap'].std():<8.3f} "
                     f"{v['regret'].mean():>11.4g} ± {v['regret'].std():<10.4g}  {mark}")
        out["methods"][m] = {
            "repetitions": int(v["gap"].size),
            "gap_mean": float(v["gap"].mean()),
            "gap_std": float(v["gap"].std()),
            "regret_mean": float(v["regret"].mean()),
            "regret_std": float(v["regret"].std()),
            "initial_regret_mean": float(v["initial_regret"].mean()),
            "p_vs_best": table.p_values[m],
            "equivalent_to_best": m in table.marked,
            "gaps": v["gap"].tolist(),
            "regrets": v["regret"].tolist(),
        }
    lines.append(f"* = not significantly different from best ({metric}, paired Wilcoxon, 5%)")
    text = "\n".join(lines) + "\n"
    Path(directory, "summary.txt").write_text(text)
    Path(directory, "summary.json").write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    sys.stdout.write(text)
    return EXIT_OK


def read_dataset_csv(path, dim: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Rows of ``x_0..x_{d-1}, f``; a non-numeric first row is treated as a header."""
    X, F = [], []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                if i == 0:
                    continue
                raise ParameterError(f"{path}:{i + 1}: non-numeric row") from None
            if len(vals) != dim + 1:
                raise ParameterError(f"{path}:{i + 1}: expected {dim + 1} columns")
            X.append(vals[:dim])
            F.append(vals[dim])
    return np.array(X, dtype=float).reshape(-1, dim), np.array(F, dtype=float)


def posterior_grid(benchmark: str, X, F, surrogate="lgp", sigma_h: float = 0.0, grid: int = 200,
                   seed: int = 0, chain: ChainConfig | None = None,
                   acquisition: AcquisitionSpec = AcquisitionSpec()) -> np.ndarray:
    """Rows ``(x, mean, std, acquisition)`` of the ensemble mixture on a 1D grid.

    Mean and std are in objective units; the acquisition is on the
    standardized scale the optimizer sees.
    """
    bench = get_benchmark(benchmark)
    if bench.dim != 1:
        raise ParameterError(f"posterior-dump needs a 1D benchmark, {bench.name} is {bench.dim}D")
    if grid < 2:
        raise ParameterError("grid must have at least 2 points")
    U = np.array([rescale_to_unit(x, bench.domain) for x in np.asarray(X).reshape(-1, 1)]).reshape(-1, 1)
    data = Dataset.from_raw(U, np.asarray(F, dtype=float)) if len(F) else Dataset.empty(1)
    variant = as_variant(surrogate)
    cfg = (chain or PROFILES["desk"]).replace(seed=seed)
    ensemble = infer_posterior(variant, data, cfg, sigma_h=sigma_h if variant is Variant.LGP else None)
    acq = MarginalAcquisition(ensemble, data, acquisition)
    u = np.linspace(0.0, 1.0, grid)[:, None]
    mean, var = acq.moments(u)
    x = bench.lower[0] + u[:, 0] * (bench.upper[0] - bench.lower[0])
    return np.column_stack([x, data.unstandardize(mean), np.sqrt(var) * data.scale, acq(u)])


def cmd_posterior_dump(benchmark, data_path, surrogate, sigma_h, grid, seed=0, profile="desk",
                       acquisition="EI", output=None) -> int:
    bench = get_benchmark(benchmark)
    if bench.dim != 1:
        raise ConfigError(f"posterior-dump needs a 1D benchmark, {bench.name} is {bench.dim}D")
    X, F = read_dataset_csv(data_path, 1)
    rows = posterior_grid(benchmark, X, F, surrogate, _parse_sigma_h(sigma_h, 1), grid, seed,
                          PROFILES[profile], AcquisitionSpec(acquisition))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "mean", "std", "acquisition"])
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    if output:
        Path(output).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_list_benchmarks() -> int:
    for name in benchmark_names():
        b = get_benchmark(name)
        lo, hi = b.domain[0]
        if all(d == b.domain[0] for d in b.domain) and b.dim > 2:
            dom = f"[{_num(lo)},{_num(hi)}]^{b.dim}"
        else:
            dom = "[" + ",".join(f"[{_num(a)},{_num(c)}]" for a, c in b.domain) + "]"
        props = ",".join(b.properties)
        label = TABLE_LABELS.get(name, name)
        key = f", key={name}" if label != name else ""
        print(f"{label}, {b.dim}, {dom}, min={b.known_min!r}, max={b.known_max!r}, {props}{key}")
    return EXIT_OK


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modbo", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a seeded experiment sweep")
    r.add_argument("config")
    r.add_argument("--output-dir", default=None, help="override output_dir from the config")
    r.add_argument("--allow-paper-profile", action="store_true")

    s = sub.add_parser("summarize", help="tabulate gap/regret over a trace directory")
    s.add_argument("directory")
    s.add_argument("--metric", choices=("gap", "regret"), default="gap")

    d = sub.add_parser("posterior-dump", help="posterior mixture moments on a 1D grid")
    d.add_argument("benchmark")
    d.add_argument("data")
    d.add_argument("--surrogate", default="lgp")
    d.add_argument("--sigma-h", default="0", help="number, or e.g. 0.01d for 0.01*sqrt(Q)")
    d.add_argument("--grid", type=int, default=200)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    d.add_argument("--acquisition", choices=("EI", "LCB"), default="EI")
    d.add_argument("-o", "--output", default=None)

    sub.add_parser("list-benchmarks", help="print the benchmark catalog")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args.config, args.allow_paper_profile, args.output_dir)
        if args.command == "summarize":
            return cmd_summarize(args.directory, args.metric)
        if args.command == "posterior-dump":
            return cmd_posterior_dump(args.benchmark, args.data, args.surrogate, args.sigma_h,
                                      args.grid, args.seed, args.profile, args.acquisition, args.output)
        return cmd_list_benchmarks()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModboError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
