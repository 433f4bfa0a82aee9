"""Command-line front end.

Subcommands
-----------
sample-bound   print the VC dimension and a-priori sample size for given
               (epsilon, delta, n, degree)
estimate       run a configured estimation and write estimate.json,
               certificate.json, samples.csv and run.log
grid           evaluate a stored estimate on a rectangular grid -> grid.csv
validate       Monte Carlo coverage check of a stored estimate -> validation.json

Exit codes: 0 success, 2 usage or configuration error, 3 iteration guard hit
before certification (artifacts still written), 4 resource capacity exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .algorithms import (AlgorithmConfig, fit_classical, fit_pacbayes_kernel,
                         fit_pacbayes_poly, validate_estimate, validation_rng)
from .bounds import classical_sample_bound
from .errors import CapacityError
from .estimators import estimate_from_dict, estimate_to_dict
from .kernels import kernel_from_spec
from .polybasis import basis_dimension
from .serialize import dump_json, load_json, write_csv
from .systems import (ReachProblem, duffing, quadrotor, reach_sampler, traffic)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_TERMINATED = 3
EXIT_CAPACITY = 4

_SYSTEM_BUILDERS = {"duffing": duffing, "quadrotor": quadrotor, "traffic": traffic}

_ALGORITHM_ALIASES = {
    "classical": "classical", "alg1": "classical",
    "pacbayes-kernel": "pacbayes-kernel", "alg2": "pacbayes-kernel",
    "pacbayes-poly": "pacbayes-poly", "alg3": "pacbayes-poly",
}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def load_preset(name: str) -> dict:
    """Load one of the shipped benchmark configurations by name."""
    path = resources.files("pacreach").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}")
    import json
    return json.loads(path.read_text())


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def build_problem(spec) -> ReachProblem:
    """Build a ReachProblem from a config dict or preset name."""
    if isinstance(spec, str):
        preset = load_preset(spec)
        spec = preset["problem"]
    _require(isinstance(spec, dict), "problem must be a preset name or an object")
    _require("system" in spec, "problem.system is required")
    builder = _SYSTEM_BUILDERS.get(spec["system"])
    _require(builder is not None, f"unknown system {spec['system']!r}")
    system = builder(**spec.get("params", {}))
    try:
        return ReachProblem(
            system=system,
            initial_box=tuple(tuple(b) for b in spec["initial_box"]),
            disturbance_box=tuple(tuple(b) for b in spec.get("disturbance_box", [])),
            t0=float(spec.get("t0", 0.0)),
            t1=float(spec["t1"]),
            integrator_steps=int(spec.get("steps", 1000)),
            projection=tuple(spec["projection"]) if spec.get("projection") else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid problem specification: {exc}") from exc


def parse_run_config(doc: dict) -> dict:
    """Validate a run configuration document and normalize its fields."""
    _require(isinstance(doc, dict), "configuration must be a JSON object")
    _require(doc.get("format") == 1, "configuration must declare \"format\": 1")
    _require("problem" in doc, "configuration field 'problem' is required")
    algorithm = _ALGORITHM_ALIASES.get(doc.get("algorithm"))
    _require(algorithm is not None,
             f"algorithm must be one of {sorted(set(_ALGORITHM_ALIASES))}, "
             f"got {doc.get('algorithm')!r}")
    problem = build_problem(doc["problem"])
    kernel = None
    if doc.get("kernel") is not None:
        try:
            kernel = kernel_from_spec(doc["kernel"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid kernel specification: {exc}") from exc
    try:
        config = AlgorithmConfig(
            epsilon=float(doc["epsilon"]),
            delta=float(doc["delta"]),
            sigma0_sq=float(doc.get("sigma0_sq", 1e-4)),
            degree=int(doc["degree"]) if doc.get("degree") is not None else None,
            kernel=kernel,
            eta=float(doc["eta"]) if doc.get("eta") is not None else None,
            n0=int(doc.get("n0", 1000)),
            batch_size=int(doc.get("batch_size", 1000)),
            max_iterations=int(doc.get("max_iterations", 200)),
            kl_mode=doc.get("kl_mode", "dense"),
            kl_rank=int(doc["kl_rank"]) if doc.get("kl_rank") else None,
            kl_variant=doc.get("kl_variant", "moment-inverse"),
            seed=int(doc.get("seed", 0)),
            normalize_box=doc.get("normalize_box"),
            gram_size_limit=int(doc.get("gram_size_limit", 20000)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid algorithm configuration: {exc}") from exc
    if algorithm in ("classical", "pacbayes-poly"):
        _require(config.degree is not None, f"{algorithm} requires 'degree'")
    if algorithm == "pacbayes-kernel":
        _require(kernel is not None, "pacbayes-kernel requires 'kernel'")
    return {
        "algorithm": algorithm,
        "problem": problem,
        "config": config,
        "n_validation": int(doc.get("n_validation", 10000)),
        "grid": doc.get("grid"),
    }


def _read_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file() and not p.suffix and "/" not in path:
        return load_preset(path)
    _require(p.is_file(), f"configuration file not found: {path}")
    import json
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc


def parse_grid_spec(spec) -> list[tuple[float, float, int]]:
    """Parse "lo:hi:count,lo:hi:count" (or an equivalent list) into axes."""
    axes: list[tuple[float, float, int]] = []
    if isinstance(spec, str):
        parts = spec.split(",")
        for part in parts:
            fields = part.split(":")
            _require(len(fields) == 3, f"grid axis {part!r} is not lo:hi:count")
            try:
                lo, hi, count = float(fields[0]), float(fields[1]), int(fields[2])
            except ValueError as exc:
                raise ConfigError(f"grid axis {part!r}: {exc}") from exc
            axes.append((lo, hi, count))
    else:
        _require(isinstance(spec, (list, tuple)) and spec, "grid must be non-empty")
        for item in spec:
            _require(len(item) == 3, "each grid axis needs [lo, hi, count]")
            axes.append((float(item[0]), float(item[1]), int(item[2])))
    for lo, hi, count in axes:
        _require(count >= 2, f"grid axis needs count >= 2, got {count}")
        _require(hi > lo, f"grid axis needs hi > lo, got [{lo}, {hi}]")
    return axes


def evaluate_grid(estimate, axes) -> tuple[list[str], np.ndarray]:
    """Evaluate scores and membership on the mesh, row-major (last axis fastest)."""
    if len(axes) != estimate.dim:
        raise ConfigError(
            f"grid has {len(axes)} axes but the estimate is "
            f"{estimate.dim}-dimensional"
        )
    grids = [np.linspace(lo, hi, count) for lo, hi, count in axes]
    mesh = np.meshgrid(*grids, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    scores = estimate.score(points)
    member = (scores <= estimate.threshold).astype(np.float64)
    header = [f"x{i + 1}" for i in range(len(axes))] + ["kappa_inv", "member"]
    rows = np.column_stack([points, scores, member])
    return header, rows


def _setup_logging(out_dir: Path) -> logging.Logger:
    logger = logging.getLogger("pacreach")
    logger.setLevel(logging.INFO)
    logger.handlers.clear()
    fh = logging.FileHandler(out_dir / "run.log", mode="w")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logger.addHandler(fh)
    sh = logging.StreamHandler(sys.stderr)
    sh.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(sh)
    return logger


def cmd_sample_bound(args) -> int:
    d = basis_dimension(args.n, 2 * args.degree)
    n_samples = classical_sample_bound(args.epsilon, args.delta, d)
    print(f"d = {d}")
    print(f"N = {n_samples}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    doc = _read_config_file(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    run = parse_run_config(doc)
    out_dir = Path(args.out if args.out else doc.get("output_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    logger = _setup_logging(out_dir)

    problem = run["problem"]
    config = run["config"]
    source = reach_sampler(problem)
    logger.info("algorithm=%s system dim=%d epsilon=%g delta=%g seed=%s",
                run["algorithm"], source.dim, config.epsilon, config.delta,
                config.seed)
    fit = {
        "classical": fit_classical,
        "pacbayes-kernel": fit_pacbayes_kernel,
        "pacbayes-poly": fit_pacbayes_poly,
    }[run["algorithm"]]
    estimate = fit(source, config)
    cert = estimate.certificate
    logger.info("status=%s n_samples=%d achieved_epsilon=%g",
                cert.status, cert.n_samples, cert.achieved_epsilon)

    dump_json(estimate_to_dict(estimate), out_dir / "estimate.json")
    dump_json(cert.to_dict(), out_dir / "certificate.json")
    write_csv(out_dir / "samples.csv", problem.sample_names,
              estimate.training_points_)
    logger.info("artifacts written to %s", out_dir)
    return EXIT_OK if cert.status == "certified" else EXIT_NOT_TERMINATED


def cmd_grid(args) -> int:
    estimate = estimate_from_dict(load_json(args.estimate))
    axes = parse_grid_spec(args.grid)
    header, rows = evaluate_grid(estimate, axes)
    out_dir = Path(args.out) if args.out else Path(args.estimate).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "grid.csv", header, rows)
    return EXIT_OK


def cmd_validate(args) -> int:
    estimate = estimate_from_dict(load_json(args.estimate))
    doc = _read_config_file(args.config)
    problem = build_problem(doc["problem"] if isinstance(doc, dict)
                            and "problem" in doc else doc)
    if problem.sample_dim != estimate.dim:
        raise ConfigError(
            f"problem produces {problem.sample_dim}-dimensional samples but "
            f"the estimate is {estimate.dim}-dimensional"
        )
    n_validation = args.n_validation
    _require(n_validation >= 1, "--n-validation must be >= 1")
    source = reach_sampler(problem)
    report = validate_estimate(estimate, source, n_validation,
                               validation_rng(args.seed))
    out_dir = Path(args.out) if args.out else Path(args.estimate).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_json(report.to_dict(), out_dir / "validation.json")
    print(f"coverage = {report.coverage:.6f} "
          f"(lower bound {report.lower_bound:.6f}, n = {report.total})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pacreach",
        description="PAC-certified support and reachable-set estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-bound",
                       help="a-priori sample size for the classical method")
    p.add_argument("epsilon", type=float)
    p.add_argument("delta", type=float)
    p.add_argument("n", type=int, help="state dimension")
    p.add_argument("degree", type=int, help="polynomial degree m")
    p.set_defaults(func=cmd_sample_bound)

    p = sub.add_parser("estimate", help="run a configured estimation")
    p.add_argument("--config", required=True,
                   help="configuration file or preset name "
                        "(duffing, quadrotor, traffic)")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("grid", help="evaluate an estimate on a grid")
    p.add_argument("estimate", help="path to estimate.json")
    p.add_argument("--grid", required=True, help='"lo:hi:count,lo:hi:count"')
    p.add_argument("--out", help="output directory (default: estimate directory)")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("validate", help="Monte Carlo coverage check")
    p.add_argument("estimate", help="path to estimate.json")
    p.add_argument("--config", required=True,
                   help="configuration (or preset) providing the problem")
    p.add_argument("--n-validation", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default: estimate directory)")
    p.set_defaults(func=cmd_validate)
    return parser


def _normalize_argv(argv: list[str]) -> list[str]:
    # argparse rejects option values that begin with "-" unless they look
    # like plain negative numbers; grid specs such as "-2:2:400,..." need
    # to be folded into "--grid=..." form.
    out: list[str] = []
    for tok in argv:
        if out and out[-1] == "--grid" and tok.startswith("-") and ":" in tok:
            out[-1] = f"--grid={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(_normalize_argv(list(argv)))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
