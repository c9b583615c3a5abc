"""Experiment configuration, orchestration and metrics persistence.

A config is a JSON object::

    {
      "seed": 0,
      "eps": 1e-4,
      "output": "out/metrics.csv",
      "objective": {"kind": "logistic", "synthetic": {"m": 1000, "dim": 30, "seed": 1}},
      "topology": {"kind": "random-gilbert", "n": 10, "seed": 7, "B": 1, "p": 0.3},
      "methods": [{"type": "proj-gd", "rounds": 5, "N": 300}, {"type": "diging", "alpha": "grid", "N": 600}]
    }

See README.md for every field.  Running a config writes the metrics CSV and
a ``<output stem>.manifest.json`` file next to it.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..baselines import diging, diging_default_step, extra, extra_default_step
from ..consensus import distance_to_consensus, run_consensus
from ..objectives import (
    LocalObjective,
    SpectralConstants,
    estimate_constants,
    logistic_objective,
    quadratic_family,
)
from ..optimizers import (
    SolverConfig,
    Trajectory,
    accelerated_projected_gd,
    communication_budget,
    decentralized_projected_gd,
    default_step_size,
    epsilon1_for_target,
    exact_projected_gd,
    outer_iteration_count,
)
from ..topology import (
    AssumptionReport,
    Graph,
    MixingSchedule,
    build_schedule,
    complete_graph,
    empty_graph,
    path_graph,
    read_graph_list,
    ring_graph,
    verify_assumption,
)
from .libsvm import LibsvmDataset, parse_libsvm, partition_dataset, synthetic_dataset
from .reference import ReferenceSolution, solve_reference

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "load_config",
    "build_objective",
    "build_topology",
    "run_experiment",
    "consensus_bench",
    "metrics_csv",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("method", "k", "comms", "grads", "fgap", "dist_sq_to_opt", "dist_to_consensus", "r_k")
METHOD_TYPES = ("exact", "proj-gd", "accelerated", "diging", "extra")
DEFAULT_ALPHA_GRID = tuple(2.0**j for j in range(-6, 5))


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    objective: dict
    topology: dict
    methods: list[dict]
    eps: float = 1e-4
    output: str = "metrics.csv"
    seed: int = 0
    fgap_target: float = 1e-4
    reference_tol: float = 1e-12
    x0: Any = None
    base_dir: Path = field(default_factory=Path.cwd, repr=False)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path | None = None) -> ExperimentConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {"objective", "topology", "methods", "eps", "output", "seed", "fgap_target", "reference_tol", "x0"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key in ("objective", "topology", "methods"):
            if key not in raw:
                raise ConfigError(f"missing required field {key!r}")
        cfg = cls(**{k: v for k, v in raw.items()}, base_dir=Path(base_dir or Path.cwd()))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.objective.get("kind") not in ("logistic", "quadratic"):
            raise ConfigError("objective.kind must be 'logistic' or 'quadratic'")
        if self.topology.get("kind") not in ("fixed", "alternating", "random-gilbert"):
            raise ConfigError("topology.kind must be 'fixed', 'alternating' or 'random-gilbert'")
        if "n" not in self.topology and self.topology.get("kind") != "alternating":
            raise ConfigError("topology.n is required")
        if self.topology.get("kind") == "random-gilbert" and "seed" not in self.topology:
            raise ConfigError("random-gilbert topology needs an explicit seed")
        if not isinstance(self.methods, list) or not self.methods:
            raise ConfigError("methods must be a nonempty list")
        ids = []
        for spec in self.methods:
            if spec.get("type") not in METHOD_TYPES:
                raise ConfigError(f"unknown method type {spec.get('type')!r}; choose from {METHOD_TYPES}")
            if "N" not in spec:
                raise ConfigError(f"method {spec.get('type')!r} needs an iteration count 'N'")
            if spec["type"] in ("proj-gd", "accelerated") and ("rounds" in spec) == ("eps1" in spec):
                raise ConfigError(f"method {spec['type']!r} needs exactly one of 'rounds' and 'eps1'")
            ids.append(method_id(spec))
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate method ids: {ids}")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "eps": self.eps,
            "fgap_target": self.fgap_target,
            "reference_tol": self.reference_tol,
            "output": self.output,
            "x0": self.x0,
            "objective": self.objective,
            "topology": self.topology,
            "methods": self.methods,
        }


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


def method_id(spec: dict) -> str:
    if "id" in spec:
        return str(spec["id"])
    kind = spec["type"]
    if kind in ("proj-gd", "accelerated") and "rounds" in spec:
        return f"{kind}-{spec['rounds']}"
    if kind in ("proj-gd", "accelerated"):
        return f"{kind}-eps"
    return kind


def _named_graph(name: str, n: int) -> Graph:
    builders = {"complete": complete_graph, "path": path_graph, "ring": ring_graph, "empty": empty_graph}
    if name not in builders:
        raise ConfigError(f"unknown graph name {name!r}")
    return builders[name](n)


def build_topology(spec: dict, cfg: ExperimentConfig | None = None) -> MixingSchedule:
    kind = spec["kind"]
    seed = int(spec.get("seed", 0))
    B = spec.get("B")
    try:
        if kind == "fixed":
            n = int(spec["n"])
            if "edges" in spec:
                g = Graph.from_edges(n, map(tuple, spec["edges"]))
            else:
                g = _named_graph(spec.get("graph", "complete"), n)
            return build_schedule("fixed", n, seed, graph=g, B=B)
        if kind == "alternating":
            if "graph_file" in spec:
                path = cfg.resolve(spec["graph_file"]) if cfg else Path(spec["graph_file"])
                graphs = read_graph_list(path, spec.get("n"))
            elif "graphs" in spec:
                n = int(spec["n"])
                graphs = [Graph.from_edges(n, map(tuple, edges)) for edges in spec["graphs"]]
            else:
                raise ConfigError("alternating topology needs 'graph_file' or 'graphs'")
            return build_schedule("alternating", graphs[0].n, seed, graphs=graphs, B=B)
        return build_schedule(
            "random-gilbert", int(spec["n"]), seed, p=float(spec.get("p", 0.3)),
            period=int(spec.get("period", 1)), B=B,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid topology: {exc}") from None


def _load_dataset(spec: dict, cfg: ExperimentConfig) -> LibsvmDataset:
    if "path" in spec:
        ds = parse_libsvm(cfg.resolve(spec["path"]))
    elif "synthetic" in spec:
        syn = dict(spec["synthetic"])
        ds = synthetic_dataset(
            m=int(syn.get("m", 1000)), dim=int(syn.get("dim", 30)), seed=int(syn.get("seed", cfg.seed)),
            density=float(syn.get("density", 0.3)), noise=float(syn.get("noise", 0.5)),
            labels=str(syn.get("labels", "01")),
        )
    else:
        raise ConfigError("logistic objective needs 'path' or 'synthetic'")
    max_samples = spec.get("max_samples")
    if max_samples is not None and ds.m > max_samples:
        ds = ds.subset(np.arange(int(max_samples)))
    return ds


def build_objective(spec: dict, n: int, cfg: ExperimentConfig) -> LocalObjective:
    if spec["kind"] == "quadratic":
        try:
            return quadratic_family(n, float(spec["alpha"]), spec.get("d"))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid quadratic objective: {exc}") from None
    ds = _load_dataset(spec, cfg)
    mode = spec.get("partition", "contiguous")
    seed = spec.get("partition_seed", cfg.seed)
    try:
        shards = partition_dataset(ds, n, mode, seed if mode == "shuffled" else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    pairs = [(s.to_dense(ds.dim), s.labels) for s in shards]
    return logistic_objective(pairs, spec.get("lambda"))


def _initial_point(cfg: ExperimentConfig, obj: LocalObjective) -> np.ndarray:
    x0 = cfg.x0
    if x0 is None:
        if cfg.objective["kind"] == "quadratic":
            # unit distance to the optimum in stacked Frobenius norm
            return np.ones(obj.d) / math.sqrt(obj.n * obj.d)
        return np.zeros(obj.d)
    if x0 == "zeros":
        return np.zeros(obj.d)
    if x0 == "ones":
        return np.ones(obj.d)
    if isinstance(x0, dict) and "gaussian" in x0:
        rng = np.random.default_rng(int(x0["gaussian"]))
        return float(x0.get("scale", 1.0)) * rng.standard_normal(obj.d)
    if isinstance(x0, list):
        arr = np.asarray(x0, dtype=float)
        if arr.shape != (obj.d,):
            raise ConfigError(f"x0 has length {arr.size}, objective dimension is {obj.d}")
        return arr
    raise ConfigError(f"unsupported x0 spec {x0!r}")


@dataclass
class _Context:
    cfg: ExperimentConfig
    obj: LocalObjective
    constants: SpectralConstants
    schedule: MixingSchedule
    report: AssumptionReport
    reference: ReferenceSolution
    x0: np.ndarray

    @property
    def delta_hat(self) -> float:
        return self.report.delta_hat

    @property
    def r0(self) -> float:
        return float(np.linalg.norm(self.x0 - self.reference.x_star)) * math.sqrt(self.obj.n)


def _resolve_iterations(spec: dict, ctx: _Context) -> int:
    N = spec["N"]
    if N == "theory":
        return outer_iteration_count(ctx.cfg.eps, ctx.r0, ctx.constants)
    return int(N)


def _resolve_eps1(spec: dict, ctx: _Context) -> float:
    eps1 = spec["eps1"]
    if eps1 == "theory":
        c = ctx.constants
        return epsilon1_for_target(ctx.cfg.eps, c.n, c.mu_f, c.L_max)
    return float(eps1)


def _run_projected(spec: dict, ctx: _Context, mid: str) -> tuple[Trajectory, dict]:
    N = _resolve_iterations(spec, ctx)
    inner = {"rounds": int(spec["rounds"])} if "rounds" in spec else {"eps1": _resolve_eps1(spec, ctx)}
    solver_cfg = SolverConfig(outer_iterations=N, gamma=spec.get("gamma"), seed=ctx.cfg.seed, **inner)
    kwargs = dict(reference=ctx.reference, delta_hat=ctx.delta_hat, method=mid)
    if spec["type"] == "proj-gd":
        traj = decentralized_projected_gd(ctx.obj, ctx.constants, ctx.schedule, ctx.x0, solver_cfg, **kwargs)
    else:
        traj = accelerated_projected_gd(
            ctx.obj, ctx.constants, ctx.schedule, ctx.x0, solver_cfg,
            conditioning=spec.get("conditioning", "restricted"), **kwargs,
        )
    return traj, {**traj.params, **inner}


def _tune_alpha(runner, grid, target: float) -> tuple[Trajectory, list[dict]]:
    """Pick the step from ``grid`` reaching ``target`` in the fewest communications.

    Runs that never reach it are ranked by final f-gap; divergent runs are
    skipped.
    """
    results, best, best_key = [], None, None
    for alpha in grid:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                traj = runner(alpha)
        except (FloatingPointError, ValueError) as exc:
            results.append({"alpha": alpha, "status": f"failed: {exc}"})
            continue
        final = float(traj.fgap[-1])
        if not math.isfinite(final):
            results.append({"alpha": alpha, "status": "diverged"})
            continue
        key = (traj.comms_to_reach(target), final)
        results.append({"alpha": alpha, "comms_to_target": key[0], "final_fgap": final})
        if best_key is None or key < best_key:
            best, best_key = traj, key
    if best is None:
        raise RuntimeError("every step size in the grid diverged")
    return best, results


def _run_baseline(spec: dict, ctx: _Context, mid: str) -> tuple[Trajectory, dict]:
    N = _resolve_iterations(spec, ctx)
    kind = spec["type"]
    fn = diging if kind == "diging" else extra
    alpha = spec.get("alpha", "default")
    info: dict[str, Any] = {"N": N}

    def runner(a: float) -> Trajectory:
        return fn(ctx.obj, ctx.schedule, ctx.x0, a, N, reference=ctx.reference, method=mid)

    if alpha == "grid":
        scale = 1.0 / ctx.constants.L_max
        grid = [scale * g for g in spec.get("grid", DEFAULT_ALPHA_GRID)]
        traj, info["grid_search"] = _tune_alpha(runner, grid, ctx.cfg.fgap_target)
        info["alpha"] = traj.params["alpha"]
        return traj, info
    if alpha == "default":
        if kind == "diging":
            alpha = diging_default_step(ctx.constants, ctx.delta_hat)
        else:
            alpha = extra_default_step(ctx.constants)
    info["alpha"] = float(alpha)
    return runner(float(alpha)), info


def _run_method(spec: dict, ctx: _Context, mid: str) -> tuple[Trajectory, dict]:
    kind = spec["type"]
    if kind == "exact":
        N = _resolve_iterations(spec, ctx)
        traj = exact_projected_gd(ctx.obj, ctx.constants, ctx.x0, N, gamma=spec.get("gamma"), reference=ctx.reference)
        traj.method = mid
        return traj, traj.params
    if kind in ("proj-gd", "accelerated"):
        return _run_projected(spec, ctx, mid)
    return _run_baseline(spec, ctx, mid)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_csv(trajectories: list[tuple[str, Trajectory | None]]) -> str:
    """Render trajectories as CSV text; ``None`` marks a failed method."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for mid, traj in trajectories:
        if traj is None:
            writer.writerow([mid, -1, 0, 0, "nan", "nan", "nan", "nan"])
            continue
        for row in traj.rows():
            writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


@dataclass
class ExperimentResult:
    csv_path: Path
    manifest_path: Path
    trajectories: dict[str, Trajectory]
    failures: dict[str, str]
    manifest: dict

    @property
    def all_failed(self) -> bool:
        return not self.trajectories


def prepare(cfg: ExperimentConfig) -> _Context:
    """Build objective, schedule, constants and the reference solution."""
    schedule = build_topology(cfg.topology, cfg)
    obj = build_objective(cfg.objective, schedule.n, cfg)
    constants = estimate_constants(obj)
    horizon = cfg.topology.get("horizon")
    report = verify_assumption(schedule, schedule.B, horizon)
    reference = solve_reference(obj, constants, tol=cfg.reference_tol)
    return _Context(cfg, obj, constants, schedule, report, reference, _initial_point(cfg, obj))


def run_experiment(cfg: ExperimentConfig, output: str | Path | None = None) -> ExperimentResult:
    """Run every configured method and write the metrics CSV and manifest.

    A method that raises is recorded as a failure row (``k = -1``) and in
    the manifest; the remaining methods still run.  Identical configs give
    byte-identical outputs.
    """
    ctx = prepare(cfg)
    out = cfg.resolve(output or cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)

    rows: list[tuple[str, Trajectory | None]] = []
    trajectories: dict[str, Trajectory] = {}
    failures: dict[str, str] = {}
    method_info: dict[str, dict] = {}
    for spec in cfg.methods:
        mid = method_id(spec)
        try:
            with np.errstate(over="raise", invalid="raise"):
                traj, info = _run_method(spec, ctx, mid)
        except Exception as exc:  # noqa: BLE001 - isolate per-method failures
            log.warning("method %s failed: %s", mid, exc)
            failures[mid] = f"{type(exc).__name__}: {exc}"
            rows.append((mid, None))
            method_info[mid] = {"status": "failed", "error": failures[mid]}
            continue
        trajectories[mid] = traj
        rows.append((mid, traj))
        method_info[mid] = {
            "status": "ok",
            **info,
            "final_fgap": float(traj.fgap[-1]),
            "total_comms": int(traj.comms[-1]),
            "comms_to_fgap_target": traj.comms_to_reach(cfg.fgap_target),
        }

    c = ctx.constants
    budget = communication_budget(
        cfg.eps, ctx.r0 if ctx.r0 > 0 else 1.0, c, ctx.schedule.B, ctx.delta_hat,
        ctx.reference.grad_norm_at_star,
    )
    manifest = {
        "config": cfg.as_dict(),
        "schedule": ctx.schedule.describe(),
        "assumption": ctx.report.summary(),
        "delta_hat": ctx.delta_hat,
        "B": ctx.schedule.B,
        "constants": c.as_dict(),
        "default_gamma": default_step_size(c),
        "reference": ctx.reference.as_dict(),
        "r0": ctx.r0,
        "x0": ctx.x0.tolist(),
        "budget": budget.as_dict(),
        "methods": method_info,
    }
    manifest = _jsonable(manifest)
    csv_text = metrics_csv(rows)
    out.write_text(csv_text)
    manifest_path = out.with_name(out.stem + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ExperimentResult(out, manifest_path, trajectories, failures, manifest)


def consensus_bench(cfg: ExperimentConfig, rounds: int | None = None, d: int = 1) -> list[tuple[int, float, float]]:
    """Gossip decay curve from a seeded random start.

    Returns ``(round, distance_to_consensus, bound)`` triples where the bound
    is ``delta_hat ** floor(round / B)`` times the initial distance.
    """
    schedule = build_topology(cfg.topology, cfg)
    report = verify_assumption(schedule, schedule.B, cfg.topology.get("horizon"))
    B = schedule.B
    rounds = 20 * B if rounds is None else rounds
    X = np.random.default_rng(cfg.seed).standard_normal((d, schedule.n))
    d0 = distance_to_consensus(X)
    curve = [(0, d0, d0)]
    for r in range(1, rounds + 1):
        X, _ = run_consensus(X, schedule, r - 1, 1)
        curve.append((r, distance_to_consensus(X), report.delta_hat ** (r // B) * d0))
    return curve
