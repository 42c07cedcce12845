"""Experiment drivers: configuration, execution, and result persistence.

Four experiment kinds map onto the library's capabilities:

  * ``rdf_point`` / ``rdf_curve``  - rate-distortion solves with
    convergence traces;
  * ``nts_run``                    - adaptive codec sessions over seeds;
  * ``redundancy_sweep``           - finite-length rate overhead vs L at a
    fixed converged codebook;
  * ``explore_compare``            - codebook sampling models raced on a
    shared source stream.

Every run writes CSV traces plus a JSON summary and a manifest into an
output directory.  All randomness flows from the config's seeds through
the counter-based stream, so a config document determines every artifact
byte-for-byte (the manifest's wall-clock field is the only exception and
is excluded from determinism comparisons).
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from .codebooks import AnnealSchedule
from .engine import (
    BlockAverageUpdate,
    HardUpdate,
    NtsConfig,
    SmoothedUpdate,
    run_session,
)
from .probability import Distribution, kl_divergence, make_distribution
from .rd import DistortionMeasure, d_max, hamming, solve_at_distortion

SCHEMA_VERSION = 1

KINDS = ("rdf_point", "rdf_curve", "nts_run", "redundancy_sweep", "explore_compare")


class ConfigError(ValueError):
    """Raised for malformed or invalid experiment configuration documents."""


class SolverError(RuntimeError):
    """Raised when a rate-distortion solve fails to certify convergence."""


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """One codebook model entry: kind plus its mixture parameters."""

    kind: str = "iid"
    label: str = ""
    concentration: float = 4.0
    schedule: AnnealSchedule | None = None


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A parsed, validated experiment description."""

    kind: str
    source: Distribution
    distortion: DistortionMeasure
    text: str  # the raw document, for content digests
    target_distortion: float | None = None
    slope: float | None = None
    n_points: int = 25
    tolerance: float = 1e-9
    word_length: int = 0
    word_lengths: tuple = ()
    n_words: int = 1000
    models: tuple = ()
    update: object = field(default_factory=HardUpdate)
    seeds: tuple = ()
    generations: int = 0
    max_search_index: int = 2**20
    kl_threshold: float = math.nan


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing required field {key!r} in {context}")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed, context: str):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {context}")


def _parse_distortion(spec, k_source: int) -> DistortionMeasure:
    if spec is None or spec == "hamming":
        return hamming(k_source)
    if isinstance(spec, dict):
        _reject_unknown(spec, {"matrix"}, "distortion")
        matrix = np.asarray(_require(spec, "matrix", "distortion"), dtype=float)
        return DistortionMeasure(matrix)
    raise ConfigError("distortion must be 'hamming' or a {matrix: ...} mapping")


def _parse_schedule(spec) -> AnnealSchedule | None:
    if spec is None:
        return None
    _reject_unknown(spec, {"kind", "base", "rate"}, "schedule")
    try:
        return AnnealSchedule(
            kind=spec.get("kind", "constant"),
            base=float(spec.get("base", 1.0)),
            rate=float(spec.get("rate", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid schedule: {exc}") from exc


def _parse_model(spec, default_label: str) -> ModelSpec:
    if spec is None:
        return ModelSpec(kind="iid", label=default_label)
    _reject_unknown(spec, {"kind", "label", "concentration", "schedule"}, "model")
    kind = spec.get("kind", "iid")
    if kind not in ("iid", "uniform_types", "type_mixture"):
        raise ConfigError(f"unknown model kind {kind!r}")
    concentration = float(spec.get("concentration", 4.0))
    if kind == "type_mixture" and concentration <= 0:
        raise ConfigError("model concentration must be > 0")
    return ModelSpec(
        kind=kind,
        label=str(spec.get("label", default_label or kind)),
        concentration=concentration,
        schedule=_parse_schedule(spec.get("schedule")),
    )


def _parse_update(spec):
    if spec is None:
        return HardUpdate()
    _reject_unknown(spec, {"kind", "gamma", "block"}, "update")
    kind = spec.get("kind", "hard")
    try:
        if kind == "hard":
            return HardUpdate()
        if kind == "smoothed":
            return SmoothedUpdate(gamma=float(spec.get("gamma", 0.1)))
        if kind == "block_average":
            return BlockAverageUpdate(block=int(spec.get("block", 4)))
    except ValueError as exc:
        raise ConfigError(f"invalid update policy: {exc}") from exc
    raise ConfigError(f"unknown update kind {kind!r}")


def _parse_seeds(doc, required: bool) -> tuple:
    seeds = doc.get("seeds")
    if seeds is None:
        if required:
            raise ConfigError("missing required field 'seeds'")
        return (0,)
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("'seeds' must be a nonempty list of integers")
    seeds = tuple(int(s) for s in seeds)
    if len(set(seeds)) != len(seeds):
        raise ConfigError("'seeds' contains duplicate entries")
    return seeds


_COMMON_KEYS = {"schema_version", "kind", "source", "distortion"}

_KIND_KEYS = {
    "rdf_point": {"target_distortion", "slope", "tolerance"},
    "rdf_curve": {"n_points", "tolerance"},
    "nts_run": {
        "target_distortion", "word_length", "model", "update", "seeds",
        "generations", "max_search_index",
    },
    "redundancy_sweep": {
        "target_distortion", "word_lengths", "n_words", "seeds",
        "max_search_index",
    },
    "explore_compare": {
        "target_distortion", "word_length", "models", "update", "seeds",
        "generations", "max_search_index", "kl_threshold",
    },
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an experiment document (YAML, schema_version 1).

    Unknown keys and invariant violations are rejected with a message
    naming the offending key or field.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    version = _require(doc, "schema_version", "config")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected 1)")
    kind = _require(doc, "kind", "config")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    _reject_unknown(doc, _COMMON_KEYS | _KIND_KEYS[kind], f"{kind} config")

    try:
        source = make_distribution(_require(doc, "source", "config"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid 'source': {exc}") from exc
    distortion = _parse_distortion(doc.get("distortion"), source.alphabet_size)
    if distortion.source_alphabet != source.alphabet_size:
        raise ConfigError("distortion matrix rows must match the source alphabet")

    cfg = dict(kind=kind, source=source, distortion=distortion, text=text)

    def _target(required=True):
        if "target_distortion" not in doc:
            if required:
                raise ConfigError("missing required field 'target_distortion'")
            return None
        value = float(doc["target_distortion"])
        if value <= 0:
            raise ConfigError("'target_distortion' must be > 0")
        return value

    if kind == "rdf_point":
        if "slope" in doc:
            cfg["slope"] = float(doc["slope"])
            if cfg["slope"] < 0:
                raise ConfigError("'slope' must be >= 0")
            cfg["target_distortion"] = _target(required=False)
        else:
            cfg["target_distortion"] = _target()
        cfg["tolerance"] = float(doc.get("tolerance", 1e-9))
    elif kind == "rdf_curve":
        cfg["n_points"] = int(doc.get("n_points", 25))
        if cfg["n_points"] < 2:
            raise ConfigError("'n_points' must be >= 2")
        cfg["tolerance"] = float(doc.get("tolerance", 1e-9))
    elif kind == "nts_run":
        cfg["target_distortion"] = _target()
        cfg["word_length"] = int(_require(doc, "word_length", "nts_run config"))
        if cfg["word_length"] < 1:
            raise ConfigError("'word_length' must be >= 1")
        cfg["models"] = (_parse_model(doc.get("model"), "model"),)
        cfg["update"] = _parse_update(doc.get("update"))
        cfg["seeds"] = _parse_seeds(doc, required=True)
        cfg["generations"] = int(doc.get("generations", 50))
        cfg["max_search_index"] = int(doc.get("max_search_index", 2**20))
    elif kind == "redundancy_sweep":
        cfg["target_distortion"] = _target()
        lengths = _require(doc, "word_lengths", "redundancy_sweep config")
        if not isinstance(lengths, list) or not lengths:
            raise ConfigError("'word_lengths' must be a nonempty list")
        lengths = tuple(int(v) for v in lengths)
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ConfigError("'word_lengths' must be strictly increasing")
        cfg["word_lengths"] = lengths
        cfg["n_words"] = int(doc.get("n_words", 1000))
        if cfg["n_words"] < 1:
            raise ConfigError("'n_words' must be >= 1")
        cfg["seeds"] = _parse_seeds(doc, required=False)
        cfg["max_search_index"] = int(doc.get("max_search_index", 2**20))
    else:  # explore_compare
        cfg["target_distortion"] = _target()
        cfg["word_length"] = int(_require(doc, "word_length", "explore config"))
        models = _require(doc, "models", "explore config")
        if not isinstance(models, list) or len(models) < 2:
            raise ConfigError("'models' must list at least two model specs")
        specs = tuple(
            _parse_model(m, f"model_{i}") for i, m in enumerate(models)
        )
        labels = [m.label for m in specs]
        if len(set(labels)) != len(labels):
            raise ConfigError("'models' labels must be distinct")
        cfg["models"] = specs
        cfg["update"] = _parse_update(doc.get("update"))
        cfg["seeds"] = _parse_seeds(doc, required=True)
        cfg["generations"] = int(doc.get("generations", 50))
        cfg["max_search_index"] = int(doc.get("max_search_index", 2**20))
        cfg["kl_threshold"] = float(_require(doc, "kl_threshold", "explore config"))
        if cfg["kl_threshold"] <= 0:
            raise ConfigError("'kl_threshold' must be > 0")
    return ExperimentConfig(**cfg)


@dataclass(eq=False)
class RunManifest:
    """Record of one driver invocation: config digest, version, outputs."""

    config_digest: str
    tool_version: str
    started_at: str
    output_files: list

    def write(self, out_dir: str):
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(
                {
                    "config_digest": self.config_digest,
                    "tool_version": self.tool_version,
                    "started_at": self.started_at,
                    "output_files": self.output_files,
                },
                fh, indent=2,
            )
            fh.write("\n")
        return path


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _new_manifest(config: ExperimentConfig) -> RunManifest:
    import datetime

    return RunManifest(
        config_digest=config_digest(config.text),
        tool_version=__version__,
        started_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        output_files=[],
    )


def _write_rows(path: str, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(row + "\n")


def _write_json(path: str, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _nts_config(config: ExperimentConfig, spec: ModelSpec, seed: int,
                q0: Distribution, freeze: bool = False) -> NtsConfig:
    return NtsConfig(
        word_length=config.word_length,
        target_distortion=config.target_distortion,
        distortion=config.distortion,
        q0=q0,
        model_kind=spec.kind,
        concentration=spec.concentration,
        schedule=spec.schedule,
        update_policy=config.update,
        max_search_index=config.max_search_index,
        session_seed=seed,
        generations=config.generations,
        freeze_updates=freeze,
    )


def _solve_reference(config: ExperimentConfig, D: float):
    point, _ = solve_at_distortion(
        config.source, config.distortion, D, tol=config.tolerance
    )
    if not point.converged:
        raise SolverError(
            f"rate-distortion solve did not certify convergence at D={D}"
        )
    return point


def _map_seeds(fn, seeds, jobs: int):
    """Evaluate fn over seeds, possibly concurrently; results seed-ordered."""
    if jobs <= 1 or len(seeds) <= 1:
        return [fn(s) for s in seeds]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, seeds))


def run_rdf(config: ExperimentConfig, out_dir: str, jobs: int = 1) -> RunManifest:
    """Solve one or many rate-distortion points; write points + gap traces."""
    if config.kind not in ("rdf_point", "rdf_curve"):
        raise ConfigError(f"run_rdf cannot execute kind {config.kind!r}")
    os.makedirs(out_dir, exist_ok=True)
    manifest = _new_manifest(config)
    P, meas = config.source, config.distortion

    if config.kind == "rdf_point":
        if config.slope is not None and config.target_distortion is None:
            from .rd import solve_fixed_slope

            solved = [solve_fixed_slope(P, meas, config.slope, tol=config.tolerance)]
        else:
            solved = [
                solve_at_distortion(
                    P, meas, config.target_distortion, tol=config.tolerance
                )
            ]
    else:
        dmax_value, _ = d_max(P, meas)
        d_floor = float(P.probs @ meas.matrix.min(axis=1))
        solved = [
            solve_at_distortion(P, meas, float(dt), tol=config.tolerance)
            for dt in np.linspace(d_floor, dmax_value, config.n_points)
        ]
    for point, _trace in solved:
        if not point.converged:
            raise SolverError(
                f"solve at D={point.distortion:.6g} did not certify convergence"
            )

    rows = ["distortion,rate,slope,iterations,converged,q_star"]
    for point, _ in solved:
        q = ";".join(_fmt(v) for v in point.output_dist.probs)
        rows.append(
            f"{_fmt(point.distortion)},{_fmt(point.rate)},{_fmt(point.slope)},"
            f"{point.iterations},{'true' if point.converged else 'false'},{q}"
        )
    points_path = os.path.join(out_dir, "points.csv")
    _write_rows(points_path, rows)
    manifest.output_files.append("points.csv")

    gap_rows = ["point,iteration,rate_gap"]
    for i, (_, trace) in enumerate(solved):
        for n, gap in enumerate(trace.gaps):
            gap_rows.append(f"{i},{n},{_fmt(gap)}")
    gaps_path = os.path.join(out_dir, "convergence.csv")
    _write_rows(gaps_path, gap_rows)
    manifest.output_files.append("convergence.csv")

    point, trace = solved[-1]
    _write_json(
        os.path.join(out_dir, "summary.json"),
        {
            "kind": config.kind,
            "n_points": len(solved),
            "rate": point.rate,
            "distortion": point.distortion,
            "iterations": point.iterations,
            "initial_divergence": trace.initial_divergence,
        },
    )
    manifest.output_files.append("summary.json")
    print(
        f"rdf: {len(solved)} point(s); last R={point.rate:.6f} at "
        f"D={point.distortion:.6f} ({point.iterations} iterations, "
        f"KL(Q*||Q0)={trace.initial_divergence:.6f})"
    )
    manifest.write(out_dir)
    return manifest


def run_nts(config: ExperimentConfig, out_dir: str, jobs: int = 1) -> RunManifest:
    """Run adaptive codec sessions per seed; write traces + aggregate."""
    if config.kind != "nts_run":
        raise ConfigError(f"run_nts cannot execute kind {config.kind!r}")
    os.makedirs(out_dir, exist_ok=True)
    manifest = _new_manifest(config)
    spec = config.models[0]
    ref = _solve_reference(config, config.target_distortion)
    q_star = ref.output_dist
    q0 = Distribution(
        np.full(q_star.alphabet_size, 1.0 / q_star.alphabet_size)
    )

    def one(seed):
        cfg = _nts_config(config, spec, seed, q0)
        return run_session(config.source, cfg, reference_qstar=q_star)

    traces = _map_seeds(one, config.seeds, jobs)
    for seed, trace in zip(config.seeds, traces):
        name = f"trace_seed{seed:04d}.csv"
        trace.write_csv(os.path.join(out_dir, name))
        manifest.output_files.append(name)

    n_gen = config.generations
    agg = {
        "kind": "nts_run",
        "rate_reference": ref.rate,
        "q_star": [float(v) for v in q_star.probs],
        "seeds": list(config.seeds),
        "kl_median": [
            float(np.median([t.kl_to_target[n] for t in traces]))
            for n in range(n_gen)
        ],
        "rate_median": [
            float(np.median([t.rates[n] for t in traces])) for n in range(n_gen)
        ],
        "distortion_median": [
            float(np.median([t.distortions[n] for t in traces]))
            for n in range(n_gen)
        ],
        "match_fail_counts": [int(t.match_fail_count) for t in traces],
    }
    _write_json(os.path.join(out_dir, "aggregate.json"), agg)
    manifest.output_files.append("aggregate.json")
    final_kl = agg["kl_median"][-1] if n_gen else math.nan
    print(
        f"nts: {len(traces)} seed(s) x {n_gen} generation(s); "
        f"final median KL(Q*||Q_n)={final_kl:.6f}"
    )
    manifest.write(out_dir)
    return manifest


def run_redundancy_sweep(
    config: ExperimentConfig, out_dir: str, jobs: int = 1
) -> RunManifest:
    """Measure the finite-length rate overhead over R(P,D) at each L.

    Sessions run exploitation-only (updates frozen) at the converged
    codebook distribution Q*, so the measured gap isolates the cost of
    finite word length and integer index coding.
    """
    if config.kind != "redundancy_sweep":
        raise ConfigError(
            f"run_redundancy_sweep cannot execute kind {config.kind!r}"
        )
    os.makedirs(out_dir, exist_ok=True)
    manifest = _new_manifest(config)
    ref = _solve_reference(config, config.target_distortion)
    q_star = ref.output_dist

    rows = ["L,median_rate_gap,iqr"]
    gaps_by_length = []
    for L in config.word_lengths:
        def one(seed, L=L):
            cfg = NtsConfig(
                word_length=L,
                target_distortion=config.target_distortion,
                distortion=config.distortion,
                q0=q_star,
                max_search_index=config.max_search_index,
                session_seed=seed,
                generations=config.n_words,
                freeze_updates=True,
            )
            return run_session(config.source, cfg)

        traces = _map_seeds(one, config.seeds, jobs)
        rates = np.concatenate([t.rates for t in traces])
        gaps = rates - ref.rate
        median_gap = float(np.median(gaps))
        iqr = float(np.percentile(gaps, 75) - np.percentile(gaps, 25))
        gaps_by_length.append(median_gap)
        rows.append(f"{L},{_fmt(median_gap)},{_fmt(iqr)}")
    path = os.path.join(out_dir, "redundancy.csv")
    _write_rows(path, rows)
    manifest.output_files.append("redundancy.csv")
    _write_json(
        os.path.join(out_dir, "summary.json"),
        {
            "kind": "redundancy_sweep",
            "rate_reference": ref.rate,
            "word_lengths": list(config.word_lengths),
            "median_rate_gaps": gaps_by_length,
        },
    )
    manifest.output_files.append("summary.json")
    print(
        "redundancy: gaps "
        + ", ".join(
            f"L={L}: {g:.5f}" for L, g in zip(config.word_lengths, gaps_by_length)
        )
    )
    manifest.write(out_dir)
    return manifest


def run_explore_compare(
    config: ExperimentConfig, out_dir: str, jobs: int = 1
) -> RunManifest:
    """Race codebook models on identical source streams; write the table.

    For each (model, seed) the session consumes the same source substream
    (the source stream depends only on the seed), so differences isolate
    the sampling law.  Records the first generation whose KL(Q*||Q_n)
    falls below the threshold (-1 if never), the final KL, and the total
    transmitted bits.
    """
    if config.kind != "explore_compare":
        raise ConfigError(
            f"run_explore_compare cannot execute kind {config.kind!r}"
        )
    os.makedirs(out_dir, exist_ok=True)
    manifest = _new_manifest(config)
    ref = _solve_reference(config, config.target_distortion)
    q_star = ref.output_dist
    q0 = Distribution(
        np.full(q_star.alphabet_size, 1.0 / q_star.alphabet_size)
    )

    rows = ["model_label,seed,generations_to_threshold,final_kl,total_bits"]
    results = {}
    for spec in config.models:
        def one(seed, spec=spec):
            cfg = _nts_config(config, spec, seed, q0)
            return run_session(config.source, cfg, reference_qstar=q_star)

        traces = _map_seeds(one, config.seeds, jobs)
        for seed, trace in zip(config.seeds, traces):
            below = np.flatnonzero(trace.kl_to_target < config.kl_threshold)
            hit = int(below[0]) + 1 if below.size else -1
            final_kl = (
                float(trace.kl_to_target[-1]) if trace.generations else math.nan
            )
            bits = int(trace.code_bits.sum())
            rows.append(f"{spec.label},{seed},{hit},{_fmt(final_kl)},{bits}")
            results.setdefault(spec.label, []).append(hit)
    path = os.path.join(out_dir, "explore.csv")
    _write_rows(path, rows)
    manifest.output_files.append("explore.csv")
    _write_json(
        os.path.join(out_dir, "summary.json"),
        {
            "kind": "explore_compare",
            "kl_threshold": config.kl_threshold,
            "rate_reference": ref.rate,
            "median_generations_to_threshold": {
                label: float(np.median(hits)) for label, hits in results.items()
            },
        },
    )
    manifest.output_files.append("summary.json")
    print(
        "explore: median generations-to-threshold "
        + ", ".join(
            f"{label}: {np.median(hits):g}" for label, hits in results.items()
        )
    )
    manifest.write(out_dir)
    return manifest


RUNNERS = {
    "rdf_point": run_rdf,
    "rdf_curve": run_rdf,
    "nts_run": run_nts,
    "redundancy_sweep": run_redundancy_sweep,
    "explore_compare": run_explore_compare,
}

_PLOT_SOURCES = {
    "rdf_point": ("points.csv", "distortion", "rate"),
    "rdf_curve": ("points.csv", "distortion", "rate"),
    "nts_run": ("trace_seed*.csv", "generation", "kl_to_target"),
    "redundancy_sweep": ("redundancy.csv", "L", "median_rate_gap"),
    "explore_compare": ("explore.csv", "seed", "final_kl"),
}


def emit_plot_script(config: ExperimentConfig, out_dir: str) -> str:
    """Write a generic gnuplot script referencing the run's CSV outputs."""
    csv_name, xlabel, ylabel = _PLOT_SOURCES[config.kind]
    path = os.path.join(out_dir, "plot.gp")
    lines = [
        "# gnuplot script for a run's CSV outputs",
        "set datafile separator ','",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key autotitle columnhead",
        f"plot '{csv_name}' using '{xlabel}':'{ylabel}' with linespoints",
        "pause -1",
    ]
    _write_rows(path, lines)
    return path
