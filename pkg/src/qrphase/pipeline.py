"""Sweep orchestration: configuration, ground-state caching, reservoir
evolution, feature extraction, the invariant oracle scan, per-slice
unsupervised analysis, CSV/SVG artifacts and provenance.

All CSV artifacts are byte-deterministic for fixed seeds: floats are
written with shortest round-trip repr and every random draw flows from
the three named seeds (solver, reservoir, learner). provenance.json
additionally carries a wall-clock timestamp and is the one file excluded
from byte-identity guarantees.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, field, fields
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .groundstate import LanczosError, ground_state_global, load_result, save_result
from .invariant import (MbtiResult, centered_partition, classify_mbti,
                        level_crossings, partial_reflection_invariant)
from .learn import (Embedding2D, GmmModel, TransitionSet, TsneConfig, bic_scan,
                    detect_transitions, gmm_fit, silhouette, smooth_width1_islands,
                    standardize, tsne)
from .measurement import (DynamicsRecord, FeatureMatrix, feature_vector,
                          features_from_shots, sample_shots)
from .operators import ModelParams, build_hamiltonian
from .reservoir import FloquetParams, PulseConvention, evolve, evolve_steps, sample_disorder

MODES = ("IDENTITY", "THERMAL", "DTC")
_MODE_G = {"DTC": 0.96 * np.pi, "THERMAL": 0.5 * np.pi, "IDENTITY": 0.96 * np.pi}
_MODE_DEPTH = {"DTC": 25, "THERMAL": 5, "IDENTITY": 0}


def _fmt(x) -> str:
    return repr(float(x))


@dataclass
class SweepConfig:
    """Desk-scale sweep settings; flat JSON keys mirror the field names."""

    L: int = 12
    J: float = 1.0
    delta_list: list = field(default_factory=lambda: [round(0.5 * k, 10) for k in range(9)])
    jp_min: float = 0.0
    jp_max: float = 3.0
    jp_step: float = 0.05
    eps_pin: float = 1e-4
    mode: str = "DTC"
    g: float | None = None
    depth: int | None = None
    convention: str = "HALF_ANGLE"
    solver_seed: int = 0
    reservoir_seed: int = 0
    learner_seed: int = 0
    solver_tol: float = 1e-10
    solver_max_iter: int = 300
    perplexity: float = 15.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 24.0
    exaggeration_iters: int = 250
    init: str = "PCA"
    k: int | None = None
    kmax: int = 6
    shots: int = 0
    include_zzz: bool = False
    cycle_average: bool = False
    pooled: bool = False
    mbti_n: int | None = None
    out_dir: str = "out"
    cache_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode}")
        if self.jp_step <= 0:
            raise ValueError("jp_step must be > 0")
        if self.jp_max < self.jp_min:
            raise ValueError("jp_max must be >= jp_min")
        if not self.delta_list:
            raise ValueError("delta_list must be nonempty")
        self.convention = PulseConvention(self.convention).value
        ModelParams(L=self.L, J=self.J, Jp=0.0, delta=0.0, eps_pin=self.eps_pin)

    @property
    def g_resolved(self) -> float:
        return _MODE_G[self.mode] if self.g is None else self.g

    @property
    def depth_resolved(self) -> int:
        if self.mode == "IDENTITY":
            return 0
        return _MODE_DEPTH[self.mode] if self.depth is None else self.depth

    def jp_grid(self) -> np.ndarray:
        n = int(round((self.jp_max - self.jp_min) / self.jp_step)) + 1
        return np.array([round(self.jp_min + k * self.jp_step, 10) for k in range(n)])

    def tsne_config(self) -> TsneConfig:
        return TsneConfig(perplexity=self.perplexity, iterations=self.iterations,
                          learning_rate=self.learning_rate,
                          early_exaggeration=self.early_exaggeration,
                          exaggeration_iters=self.exaggeration_iters,
                          seed=self.learner_seed, init=self.init)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass
class SweepResult:
    feature_matrix: FeatureMatrix
    mbti_rows: list             # [(delta, jp, value, label)]
    floquet: FloquetParams
    config: SweepConfig
    failures: list              # [(delta, jp, stage, message)]
    provenance: dict


@dataclass
class SliceAnalysis:
    delta: float
    jps: np.ndarray
    embedding: Embedding2D
    model: GmmModel
    k: int
    bic_table: list
    transitions: TransitionSet
    silhouette: float
    mbti_values: np.ndarray
    crossings: dict             # level -> [jp, ...]


@dataclass
class ReportBundle:
    sweep: SweepResult
    slices: dict                # delta -> SliceAnalysis
    out_dir: str
    ok: bool


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

def _cache_path(cache_dir: str, p: ModelParams, seed: int) -> str:
    name = (f"gs_L{p.L}_J{_fmt(p.J)}_Jp{_fmt(p.Jp)}_delta{_fmt(p.delta)}"
            f"_eps{_fmt(p.eps_pin)}_seed{seed}.npz")
    return os.path.join(cache_dir, name)


def ground_state_cached(p: ModelParams, tol: float, seed: int, max_iter: int,
                        cache_dir: str | None):
    if cache_dir:
        path = _cache_path(cache_dir, p, seed)
        if os.path.exists(path):
            return load_result(path)
    result = ground_state_global(build_hamiltonian(p), tol=tol, seed=seed,
                                 max_iter=max_iter)
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        save_result(_cache_path(cache_dir, p, seed), result, p.to_dict())
    return result


def _shot_seed(reservoir_seed: int, index: int) -> int:
    return (reservoir_seed * 1_000_003 + index) % (2 ** 63)


def _compute_point(payload):
    """One grid point: ground state -> evolve -> features + invariant."""
    (cfg_dict, delta, jp, index) = payload
    cfg = SweepConfig.from_dict(cfg_dict)
    params = ModelParams(L=cfg.L, J=cfg.J, Jp=float(jp), delta=float(delta),
                         eps_pin=cfg.eps_pin)
    cache = cfg.cache_dir or os.path.join(cfg.out_dir, "cache")
    try:
        gs = ground_state_cached(params, cfg.solver_tol, cfg.solver_seed,
                                 cfg.solver_max_iter, cache)
    except LanczosError as exc:
        return (index, None, None, ("groundstate", str(exc)))

    part = centered_partition(cfg.L, cfg.mbti_n)
    mb = partial_reflection_invariant(gs.state, part)

    floq = sample_disorder(cfg.L, cfg.g_resolved, cfg.depth_resolved,
                           cfg.reservoir_seed, PulseConvention(cfg.convention))
    if cfg.cycle_average and floq.depth > 0:
        cols = [feature_vector(st, cfg.include_zzz).values
                for st in evolve_steps(gs.state, floq)]
        feats = np.mean(cols, axis=0)
    else:
        out_state = evolve(gs.state, floq)
        if cfg.shots > 0:
            table = sample_shots(out_state, cfg.shots,
                                 _shot_seed(cfg.reservoir_seed, index))
            feats = features_from_shots(table, cfg.include_zzz).values
        else:
            feats = feature_vector(out_state, cfg.include_zzz).values
    return (index, feats, (mb.value, classify_mbti(mb.value).value), None)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Ground state -> reservoir -> features for every (delta, jp) point."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    jps = cfg.jp_grid()
    points = [(float(d), float(jp)) for d in cfg.delta_list for jp in jps]
    payloads = [(cfg.to_dict(), d, jp, i) for i, (d, jp) in enumerate(points)]

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_compute_point, payloads))
    else:
        results = [_compute_point(p) for p in payloads]
    results.sort(key=lambda r: r[0])

    rows, grid, mbti_rows, failures = [], [], [], []
    for (index, feats, mb, failure) in results:
        delta, jp = points[index]
        if failure is not None:
            failures.append((delta, jp) + failure)
            continue
        rows.append(feats)
        grid.append((delta, jp))
        mbti_rows.append((delta, jp, mb[0], mb[1]))

    floq = sample_disorder(cfg.L, cfg.g_resolved, cfg.depth_resolved,
                           cfg.reservoir_seed, PulseConvention(cfg.convention))
    fm = FeatureMatrix(np.array(rows) if rows else np.zeros((0, 2 * cfg.L - 1)),
                       grid, cfg.L, cfg.include_zzz)
    provenance = _provenance(cfg, floq, failures)
    sweep = SweepResult(feature_matrix=fm, mbti_rows=mbti_rows, floquet=floq,
                        config=cfg, failures=failures, provenance=provenance)
    _write_sweep_files(sweep)
    return sweep


def _provenance(cfg: SweepConfig, floq: FloquetParams, failures) -> dict:
    import scipy
    return {
        "package": "qrphase",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config": cfg.to_dict(),
        "g_resolved": cfg.g_resolved,
        "depth_resolved": cfg.depth_resolved,
        "regime": floq.regime.value,
        "convention": cfg.convention,
        "seeds": {"solver": cfg.solver_seed, "reservoir": cfg.reservoir_seed,
                  "learner": cfg.learner_seed},
        "n_failures": len(failures),
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }


# --------------------------------------------------------------------------
# per-slice learning
# --------------------------------------------------------------------------

def analyze_slices(cfg: SweepConfig, sweep: SweepResult) -> dict:
    """t-SNE + GMM + transition detection per delta slice (or pooled)."""
    fm = sweep.feature_matrix
    grid = np.array(fm.grid)
    analyses = {}

    pooled_embedding = None
    if cfg.pooled and len(fm.grid) >= 4:
        pooled_embedding = tsne(standardize(fm.values), cfg.tsne_config())

    for delta in cfg.delta_list:
        mask = np.isclose(grid[:, 0], float(delta))
        if mask.sum() < 4:
            continue
        jps = grid[mask, 1]
        order = np.argsort(jps)
        jps = jps[order]
        if pooled_embedding is not None:
            emb = Embedding2D(pooled_embedding.points[mask][order],
                              pooled_embedding.final_kl)
        else:
            X = standardize(fm.values[mask][order])
            emb = tsne(X, cfg.tsne_config())
        bics = bic_scan(emb, cfg.kmax, cfg.learner_seed)
        k = cfg.k if cfg.k else min(bics, key=lambda t: t[1])[0]
        model = gmm_fit(emb, k, cfg.learner_seed)
        tset = detect_transitions(model, jps)
        labels = np.argmax(model.responsibilities, axis=1)
        sil = silhouette(emb.points, labels) if np.unique(labels).size >= 2 else 0.0

        mb = {(d, jp): v for (d, jp, v, _) in sweep.mbti_rows}
        values = np.array([mb[(float(delta), float(jp))] for jp in jps])
        crossings = {lvl: level_crossings(jps, values, lvl) for lvl in (0.0, 0.5, -0.5)}
        analyses[float(delta)] = SliceAnalysis(
            delta=float(delta), jps=jps, embedding=emb, model=model, k=k,
            bic_table=bics, transitions=tset, silhouette=sil,
            mbti_values=values, crossings=crossings)
    _write_slice_files(cfg, analyses)
    return analyses


def run_experiment(cfg: SweepConfig) -> ReportBundle:
    """Full pipeline: sweep, per-slice analysis, comparison table and plots."""
    sweep = run_sweep(cfg)
    slices = analyze_slices(cfg, sweep)
    ok = not sweep.failures and bool(slices)
    _write_report(cfg, sweep, slices)
    return ReportBundle(sweep=sweep, slices=slices, out_dir=cfg.out_dir, ok=ok)


# --------------------------------------------------------------------------
# artifact writers
# --------------------------------------------------------------------------

def _slug(delta: float) -> str:
    return _fmt(delta).replace(".", "p").replace("-", "m")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _write_sweep_files(sweep: SweepResult) -> None:
    cfg = sweep.config
    fm = sweep.feature_matrix
    n_feat = fm.values.shape[1] if fm.values.size else 2 * cfg.L - 1
    header = ["delta", "jp"] + [f"f_{i}" for i in range(n_feat)]
    rows = [[_fmt(d), _fmt(jp)] + [_fmt(v) for v in feat]
            for (d, jp), feat in zip(fm.grid, fm.values)]
    _write_csv(os.path.join(cfg.out_dir, "features.csv"), header, rows)

    _write_csv(os.path.join(cfg.out_dir, "mbti.csv"),
               ["delta", "jp", "value", "label"],
               [[_fmt(d), _fmt(jp), _fmt(v), lab] for (d, jp, v, lab) in sweep.mbti_rows])

    sweep.floquet.to_json(os.path.join(cfg.out_dir, "floquet.json"))
    with open(os.path.join(cfg.out_dir, "provenance.json"), "w", encoding="utf-8") as f:
        json.dump(sweep.provenance, f, indent=2)
        f.write("\n")
    if sweep.failures:
        _write_csv(os.path.join(cfg.out_dir, "failures.csv"),
                   ["delta", "jp", "stage", "message"],
                   [[_fmt(d), _fmt(jp), stage, msg]
                    for (d, jp, stage, msg) in sweep.failures])


def _write_slice_files(cfg: SweepConfig, analyses: dict) -> None:
    for delta, a in analyses.items():
        tag = _slug(delta)
        _write_csv(os.path.join(cfg.out_dir, f"embedding_delta{tag}.csv"),
                   ["delta", "jp", "y1", "y2"],
                   [[_fmt(delta), _fmt(jp), _fmt(y1), _fmt(y2)]
                    for jp, (y1, y2) in zip(a.jps, a.embedding.points)])
        k = a.model.k
        header = ["delta", "jp"] + [f"p_cluster{j}" for j in range(k)] + ["label"]
        labels = np.argmax(a.model.responsibilities, axis=1)
        rows = [[_fmt(delta), _fmt(jp)] + [_fmt(p) for p in resp] + [int(lab)]
                for jp, resp, lab in zip(a.jps, a.model.responsibilities, labels)]
        _write_csv(os.path.join(cfg.out_dir, f"gmm_delta{tag}.csv"), header, rows)
        _write_csv(os.path.join(cfg.out_dir, f"transitions_delta{tag}.csv"),
                   ["delta", "jp_transition", "from", "to"],
                   [[_fmt(delta), _fmt(jp), int(a_), int(b_)]
                    for (jp, a_, b_) in a.transitions.transitions])


def _write_report(cfg: SweepConfig, sweep: SweepResult, analyses: dict) -> None:
    comparison = []
    report = {"slices": {}, "failures": sweep.failures,
              "provenance": sweep.provenance}
    for delta, a in sorted(analyses.items()):
        all_crossings = [(lvl, x) for lvl in (0.5, -0.5, 0.0)
                         for x in a.crossings[lvl]]
        for (jp, frm, to) in a.transitions.transitions:
            if all_crossings:
                lvl, near = min(all_crossings, key=lambda t: abs(t[1] - jp))
                diff = abs(near - jp)
            else:
                lvl, near, diff = float("nan"), float("nan"), float("nan")
            comparison.append([_fmt(delta), _fmt(jp), int(frm), int(to),
                               _fmt(near), _fmt(lvl), _fmt(diff)])
        report["slices"][_fmt(delta)] = {
            "k": a.k,
            "bic": [[k, b] for (k, b, _) in a.bic_table],
            "silhouette": a.silhouette,
            "final_kl": a.embedding.final_kl,
            "transitions": [[jp, frm, to] for (jp, frm, to) in a.transitions.transitions],
            "mbti_crossings": {str(lvl): xs for lvl, xs in a.crossings.items()},
        }
        _plot_slice(cfg, delta, a)
    _write_csv(os.path.join(cfg.out_dir, "comparison.csv"),
               ["delta", "detected_jp", "from", "to", "mbti_crossing",
                "crossing_level", "abs_diff"], comparison)
    with open(os.path.join(cfg.out_dir, "report.json"), "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
        f.write("\n")


def _plot_slice(cfg: SweepConfig, delta: float, a: SliceAnalysis) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tag = _slug(delta)
    labels = np.argmax(a.model.responsibilities, axis=1)

    fig, ax = plt.subplots(figsize=(5, 4))
    sc = ax.scatter(a.embedding.points[:, 0], a.embedding.points[:, 1],
                    c=labels, cmap="tab10", s=18)
    ax.set_xlabel("y1")
    ax.set_ylabel("y2")
    ax.set_title(f"t-SNE embedding, delta={delta}")
    fig.colorbar(sc, ax=ax, label="cluster")
    fig.tight_layout()
    fig.savefig(os.path.join(cfg.out_dir, f"embedding_delta{tag}.svg"),
                metadata={"Date": None})
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    for j in range(a.model.k):
        ax.plot(a.jps, a.model.responsibilities[:, j], label=f"cluster {j}")
    for (jp, _, _) in a.transitions.transitions:
        ax.axvline(jp, color="k", ls="--", lw=0.8)
    for lvl, xs in a.crossings.items():
        for x in xs:
            ax.axvline(x, color="r", ls=":", lw=0.8)
    ax.set_xlabel("J'/J")
    ax.set_ylabel("assignment probability")
    ax.set_title(f"GMM probabilities, delta={delta}")
    ax.legend(loc="center right", fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(cfg.out_dir, f"probabilities_delta{tag}.svg"),
                metadata={"Date": None})
    plt.close(fig)


def write_dynamics_csv(rec: DynamicsRecord, path) -> None:
    """CSV matrix (rows = features, columns = cycles) plus a JSON sidecar."""
    header = ["feature"] + [f"t{t}" for t in range(rec.matrix.shape[1])]
    rows = [[f"f_{i}"] + [_fmt(v) for v in row] for i, row in enumerate(rec.matrix)]
    _write_csv(path, header, rows)
    sidecar = {"g": rec.params.g, "depth": rec.params.depth,
               "seed": rec.params.seed,
               "convention": rec.params.pulse_convention.value, "L": rec.L}
    with open(str(path) + ".json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2)
        f.write("\n")


def read_features_csv(path):
    """(values, grid) back from a features.csv artifact."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:2] != ["delta", "jp"]:
            raise ValueError(f"{path} is not a features CSV")
        grid, rows = [], []
        for row in reader:
            grid.append((float(row[0]), float(row[1])))
            rows.append([float(v) for v in row[2:]])
    return np.array(rows), grid
