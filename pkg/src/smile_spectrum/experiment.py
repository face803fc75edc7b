"""Experiment harness: YAML configs, instance generators and seeded replications.

A config file looks like::

    schema: 1
    name: paper_3x5
    instance:
      kind: paper_rayleigh6_scaled
      edges: [[1, 2]]          # 1-based cell numbers
      means: [[45, 10, ...], ...]
    horizon: 200000
    replications: 50
    seed: 2024
    policies: [smile, oracle, random]
    agent: {kappa: 800, sampling_constant: 1.0, delta_sq: 50, epsilon: 0.0}
    analysis: {epsilon: 1.0}
    output: {dir: runs/paper_3x5, stride: 1000, gnuplot: true, raw_dump: false}

``kappa`` and ``sampling_constant`` accept ``auto`` to use the values derived
from the channel ensemble (usually far too conservative to finish exploring
within a desk-scale horizon).
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .agent import AgentParams
from .channel import (
    PAPER_RAYLEIGH6,
    PAPER_RAYLEIGH6_RATES,
    ChannelMatrix,
    build_gilbert_elliott,
    build_scaled_fsmc,
    validate_model,
)
from .engine import POLICIES, EngineConfig, run
from .errors import ChannelError, ConfigError, DegenerateParams, InstanceError, TopologyError, UnknownKind
from .matching import Allocation, solve_stable
from .metrics import RegretTrace, SystemConstants, aggregate, compute_constants, theorem1_bound
from .topology import InterferenceGraph, build_graph, random_graph

SCHEMA_VERSION = 1
OUTPUT_ENV = "SMILE_OUTPUT_DIR"
GENERATOR_KINDS = ("paper_rayleigh6_scaled", "gilbert_elliott_ensemble", "random")
MAX_REDRAWS = 1000


@dataclass
class Instance:
    graph: InterferenceGraph
    channels: ChannelMatrix

    @property
    def means(self) -> np.ndarray:
        return self.channels.means

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape


@dataclass
class ExperimentConfig:
    name: str
    instance: Instance
    horizon: int
    replications: int
    seed: int
    policies: tuple[str, ...]
    agent: dict
    analysis_epsilon: float
    output_dir: Path
    stride: int
    gnuplot: bool = True
    raw_dump: bool = False
    source: dict = field(default_factory=dict, repr=False)

    def replication_seeds(self) -> list[np.random.SeedSequence]:
        return np.random.SeedSequence(self.seed).spawn(self.replications)

    def constants(self) -> SystemConstants:
        return compute_constants(
            self.instance.channels,
            self.analysis_epsilon,
            kappa=_auto(self.agent.get("kappa", "auto")),
            sampling_constant=_auto(self.agent.get("sampling_constant", "auto")),
        )

    def agent_params(self, constants: SystemConstants | None = None) -> AgentParams:
        constants = constants or self.constants()
        return AgentParams(
            kappa=constants.kappa,
            sampling_constant=constants.sampling_constant,
            delta_sq=float(self.agent.get("delta_sq", 1e-6)),
            epsilon=float(self.agent.get("epsilon", 0.0)),
        )


def _auto(value):
    if value is None or value == "auto":
        return None
    return float(value)


# -- instance generation -------------------------------------------------------

def _relevant_gaps_ok(means: np.ndarray, graph: InterferenceGraph, min_gap: float) -> bool:
    if means.shape[1] > 1 and np.diff(np.sort(means, axis=1), axis=1).min() < min_gap:
        return False
    a, b = graph.edge_arrays()
    return not (a.size and np.abs(means[a] - means[b]).min() < min_gap)


def _graph_from(params: dict, n_cells: int, rng: np.random.Generator) -> InterferenceGraph:
    if "edges" in params:
        return build_graph(n_cells, params["edges"] or [], one_based=True)
    return random_graph(n_cells, float(params.get("edge_prob", 0.0)), rng)


def _draw_means(params: dict, shape, graph, rng, key="mean_range") -> np.ndarray:
    lo, hi = params.get(key, (10.0, 100.0))
    if not lo < hi:
        raise DegenerateParams(f"{key} must be an increasing pair")
    min_gap = float(params.get("min_gap", 1e-6))
    for _ in range(MAX_REDRAWS):
        means = rng.uniform(lo, hi, size=shape)
        if _relevant_gaps_ok(means, graph, min_gap):
            return means
    raise DegenerateParams(f"could not draw means with gaps >= {min_gap} in {MAX_REDRAWS} tries")


def generate_instance(kind: str, params: dict, seed: int | None = 0) -> Instance:
    """Build a reproducible instance.

    ``paper_rayleigh6_scaled``
        every pair uses the six-state Rayleigh chain rescaled to its mean;
        ``means`` given explicitly or drawn from ``mean_range``.
    ``gilbert_elliott_ensemble``
        good/bad chains with ``p_stay_good``, ``p_stay_bad`` and per-pair
        ``good_rates`` (or ``good_rate_range``).
    ``random``
        means drawn from ``mean_range`` with Rayleigh chains (``chain:
        gilbert_elliott`` switches the family), random graph with
        ``edge_prob``.

    Drawn instances are redrawn until every row gap and every neighbor
    column gap is at least ``min_gap`` (default 1e-6).
    """
    if kind not in GENERATOR_KINDS:
        raise UnknownKind(f"unknown instance kind {kind!r}; choose from {GENERATOR_KINDS}")
    rng = np.random.default_rng(seed)
    try:
        if kind == "paper_rayleigh6_scaled":
            if "means" in params:
                means = np.asarray(params["means"], dtype=float)
                graph = _graph_from(params, means.shape[0], rng)
            else:
                L, S = int(params["cells"]), int(params["channels"])
                graph = _graph_from(params, L, rng)
                means = _draw_means(params, (L, S), graph, rng)
            grid = [[build_scaled_fsmc(PAPER_RAYLEIGH6, PAPER_RAYLEIGH6_RATES, m) for m in row] for row in means]
        elif kind == "gilbert_elliott_ensemble":
            pg, pb = float(params["p_stay_good"]), float(params["p_stay_bad"])
            if "good_rates" in params:
                good = np.asarray(params["good_rates"], dtype=float)
                graph = _graph_from(params, good.shape[0], rng)
            else:
                L, S = int(params["cells"]), int(params["channels"])
                graph = _graph_from(params, L, rng)
                good = _draw_means(params, (L, S), graph, rng, key="good_rate_range")
            grid = [[build_gilbert_elliott(pg, pb, g) for g in row] for row in good]
        else:
            L, S = int(params["cells"]), int(params["channels"])
            graph = _graph_from(params, L, rng)
            means = _draw_means(params, (L, S), graph, rng)
            family = params.get("chain", "rayleigh6")
            if family == "rayleigh6":
                grid = [[build_scaled_fsmc(PAPER_RAYLEIGH6, PAPER_RAYLEIGH6_RATES, m) for m in row] for row in means]
            elif family == "gilbert_elliott":
                pg, pb = float(params.get("p_stay_good", 0.9)), float(params.get("p_stay_bad", 0.8))
                pi_good = (1 - pb) / (2 - pg - pb)
                grid = [[build_gilbert_elliott(pg, pb, m / pi_good) for m in row] for row in means]
            else:
                raise UnknownKind(f"unknown chain family {family!r}")
    except KeyError as exc:
        raise ConfigError(f"instance kind {kind!r} needs parameter {exc.args[0]!r}") from exc
    except (ChannelError, TopologyError) as exc:
        raise InstanceError(str(exc)) from exc
    return Instance(graph, ChannelMatrix.from_grid(grid))


def _explicit_instance(spec: dict) -> Instance:
    try:
        rows = spec["models"]
        grid = [[validate_model(m["states"], m["transition"]) for m in row] for row in rows]
        graph = build_graph(len(grid), spec.get("edges") or [], one_based=True)
    except KeyError as exc:
        raise ConfigError(f"explicit instance needs {exc.args[0]!r}") from exc
    except (ChannelError, TopologyError) as exc:
        raise InstanceError(str(exc)) from exc
    return Instance(graph, ChannelMatrix.from_grid(grid))


def instance_from_spec(spec: dict) -> Instance:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind is None:
        raise ConfigError("instance needs a 'kind'")
    if kind == "explicit":
        return _explicit_instance(spec)
    seed = spec.pop("seed", 0)
    return generate_instance(kind, spec, seed)


# -- config loading ------------------------------------------------------------

def fixture_path(name: str) -> Path:
    ref = resources.files("smile_spectrum") / "fixtures" / f"{name}.yaml"
    return Path(str(ref))


def list_fixtures() -> list[str]:
    folder = resources.files("smile_spectrum") / "fixtures"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".yaml"))


def resolve_config_path(ref: str | os.PathLike) -> Path:
    path = Path(ref)
    if path.exists():
        return path
    candidate = fixture_path(str(ref))
    if candidate.exists():
        return candidate
    raise ConfigError(f"no config file or bundled fixture named {str(ref)!r}")


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {raw.get('schema')!r}; expected {SCHEMA_VERSION}")
    unknown = set(raw) - {"schema", "name", "instance", "horizon", "replications", "seed", "policies",
                          "agent", "analysis", "output", "description"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "instance" not in raw:
        raise ConfigError("config needs an 'instance' section")
    instance = instance_from_spec(raw["instance"])
    L, S = instance.shape
    horizon = int(raw.get("horizon", 10 * S))
    reps = int(raw.get("replications", 1))
    policies = tuple(raw.get("policies", ["smile"]))
    if reps < 1:
        raise ConfigError("replications must be >= 1")
    if horizon < S:
        raise ConfigError(f"horizon {horizon} shorter than {S} initialization slots")
    bad = [p for p in policies if p not in POLICIES]
    if bad or not policies:
        raise ConfigError(f"unknown policies {bad}; choose from {POLICIES}")
    agent = dict(raw.get("agent") or {})
    unknown_agent = set(agent) - {"kappa", "sampling_constant", "delta_sq", "epsilon"}
    if unknown_agent:
        raise ConfigError(f"unknown agent keys: {sorted(unknown_agent)}")
    analysis = raw.get("analysis") or {}
    output = raw.get("output") or {}
    out_dir = Path(os.environ.get(OUTPUT_ENV) or output.get("dir", f"runs/{raw.get('name', 'experiment')}"))
    stride = int(output.get("stride", max(1, horizon // 200)))
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        instance=instance,
        horizon=horizon,
        replications=reps,
        seed=int(raw.get("seed", 0)),
        policies=policies,
        agent=agent,
        analysis_epsilon=float(analysis.get("epsilon", 1.0)),
        output_dir=out_dir,
        stride=stride,
        gnuplot=bool(output.get("gnuplot", True)),
        raw_dump=bool(output.get("raw_dump", False)),
        source=raw,
    )


def load_config(ref: str | os.PathLike) -> ExperimentConfig:
    path = resolve_config_path(ref)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw)


# -- running -------------------------------------------------------------------

def _replicate(args) -> np.ndarray:
    instance, policy, horizon, params, seed = args
    cfg = EngineConfig(instance.channels, instance.graph, horizon, params, seed=seed, policy=policy, record_cells=False)
    return run(cfg).sum_rate


def run_replications(config: ExperimentConfig, policy: str, jobs: int | None = None,
                     params: AgentParams | None = None) -> list[np.ndarray]:
    """Per-slot sum rates of every replication, in seed order."""
    if policy == "smile" and params is None:
        params = config.agent_params()
    tasks = [(config.instance, policy, config.horizon, params, ss) for ss in config.replication_seeds()]
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(tasks) == 1:
        return [_replicate(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_replicate, tasks))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(path: Path, agg, bound: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean_regret", "stderr", "mean_sum_rate", "bound"])
        for i, t in enumerate(agg.t):
            w.writerow([int(t), _fmt(agg.mean_regret[i]), _fmt(agg.stderr[i]), _fmt(agg.mean_sum_rate[i]),
                        _fmt(bound[i])])


def read_trace_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {k: np.array([float(r[k]) for r in rows]) for k in ("mean_regret", "stderr", "mean_sum_rate", "bound")}
    out["t"] = np.array([int(r["t"]) for r in rows])
    return out


def _write_raw_dump(path: Path, config: ExperimentConfig, policy: str, params, seed) -> None:
    cfg = EngineConfig(config.instance.channels, config.instance.graph, config.horizon, params,
                       seed=seed, policy=policy, record_cells=True)
    res = run(cfg)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "cell", "channel", "r", "x", "phase"])
        for o in res.outcomes():
            for cell in range(len(o.choices)):
                w.writerow([o.t, cell + 1, int(o.choices[cell]) + 1 if o.choices[cell] >= 0 else 0,
                            _fmt(o.rates[cell]), _fmt(o.realized[cell]), int(o.phases[cell])])


GNUPLOT = """set datafile separator ','
set key autotitle columnhead
set xlabel 'slot'
set terminal pngcairo size 900,600
set output 'sum_rate.png'
set ylabel 'mean sum rate'
plot {sum_rate}
set output 'regret.png'
set ylabel 'mean regret / log t'
plot {regret}
"""


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.source, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class PolicySummary:
    policy: str
    traces: list[RegretTrace]
    final_window_sum_rate: float


def run_experiment_config(config: ExperimentConfig, jobs: int | None = None) -> dict[str, PolicySummary]:
    """Run every configured policy and write the artifact files."""
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    inst = config.instance
    oracle, _ = solve_stable(inst.means, inst.graph)
    constants = config.constants()
    params = config.agent_params(constants)

    summaries = {}
    for policy in config.policies:
        sums = run_replications(config, policy, jobs, params if policy == "smile" else None)
        traces = [RegretTrace(np.cumsum(s), oracle.value(inst.means), k) for k, s in enumerate(sums)]
        agg = aggregate(traces, config.stride)
        bound = np.array([theorem1_bound(constants, inst.channels, inst.graph, oracle, int(t)).total
                          if t >= 2 else math.nan for t in agg.t])
        write_trace_csv(out / f"{policy}.csv", agg, bound)
        tail = max(1, config.horizon // 10)
        final = float(np.mean([s[-tail:].mean() for s in sums]))
        summaries[policy] = PolicySummary(policy, traces, final)
        if config.raw_dump:
            _write_raw_dump(out / f"raw_{policy}_rep1.csv", config, policy, params, config.replication_seeds()[0])

    (out / "constants.json").write_text(json.dumps(constants.to_dict(), indent=2) + "\n")
    (out / "oracle_allocation.json").write_text(json.dumps({
        "allocation": {str(k): v for k, v in oracle.as_dict().items()},
        "value": oracle.value(inst.means),
    }, indent=2) + "\n")
    seeds = config.replication_seeds()
    manifest = {
        "name": config.name,
        "config_sha256": config_hash(config),
        "package_version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "seed": config.seed,
        "replication_spawn_keys": [list(s.spawn_key) for s in seeds],
        "policies": list(config.policies),
        "final_window_sum_rate": {p: s.final_window_sum_rate for p, s in summaries.items()},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if config.gnuplot:
        files = [f"'{p}.csv'" for p in config.policies]
        (out / "plot.gp").write_text(GNUPLOT.format(
            sum_rate=", ".join(f"{f} using 1:4 with lines title '{p}'" for f, p in zip(files, config.policies)),
            regret=", ".join(f"{f} using 1:($2/log($1)) with lines title '{p}'" for f, p in zip(files, config.policies)),
        ))
    return summaries
