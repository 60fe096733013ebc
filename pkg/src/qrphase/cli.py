"""Command-line interface.

Subcommands: sweep (features + invariant scan), evolve (dynamics record),
mbti (invariant point or scan), learn (embedding/GMM/transitions from a
features CSV), report (full experiment bundle), selftest (oracle suite).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flat SweepConfig keys)")
    p.add_argument("--L", type=int)
    p.add_argument("--delta", type=float, action="append",
                   help="delta slice value; repeat for several slices")
    p.add_argument("--jp-min", type=float)
    p.add_argument("--jp-max", type=float)
    p.add_argument("--jp-step", type=float)
    p.add_argument("--eps-pin", type=float)
    p.add_argument("--mode", choices=["IDENTITY", "THERMAL", "DTC"])
    p.add_argument("--g", type=float, help="X-pulse parameter in units of pi")
    p.add_argument("--depth", type=int)
    p.add_argument("--convention", choices=["HALF_ANGLE", "LITERAL"])
    p.add_argument("--solver-seed", type=int)
    p.add_argument("--reservoir-seed", type=int)
    p.add_argument("--learner-seed", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iters", type=int, dest="iterations")
    p.add_argument("--k", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", dest="out_dir")


def _config_from_args(args) -> "SweepConfig":
    from .pipeline import SweepConfig
    base = SweepConfig.from_json(args.config).to_dict() if args.config else {}
    overrides = {
        "L": args.L, "jp_min": args.jp_min, "jp_max": args.jp_max,
        "jp_step": args.jp_step, "eps_pin": args.eps_pin, "mode": args.mode,
        "depth": args.depth, "convention": args.convention,
        "solver_seed": args.solver_seed, "reservoir_seed": args.reservoir_seed,
        "learner_seed": args.learner_seed, "shots": args.shots,
        "perplexity": args.perplexity, "iterations": args.iterations,
        "k": args.k, "kmax": args.kmax, "workers": args.workers,
        "out_dir": args.out_dir,
    }
    if args.delta is not None:
        overrides["delta_list"] = args.delta
    if args.g is not None:
        overrides["g"] = args.g * np.pi
    base.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig.from_dict(base)


def _cmd_sweep(args) -> int:
    from .pipeline import run_sweep
    cfg = _config_from_args(args)
    sweep = run_sweep(cfg)
    print(f"{len(sweep.feature_matrix.grid)} grid points -> {cfg.out_dir}/features.csv")
    if sweep.failures:
        print(f"{len(sweep.failures)} grid point(s) failed; see failures.csv",
              file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    from .pipeline import run_experiment
    cfg = _config_from_args(args)
    bundle = run_experiment(cfg)
    for delta, a in sorted(bundle.slices.items()):
        trans = ", ".join(f"{jp:.3f}" for (jp, _, _) in a.transitions.transitions)
        print(f"delta={delta}: k={a.k} silhouette={a.silhouette:.3f} "
              f"transitions=[{trans}]")
    print(f"report bundle in {bundle.out_dir}")
    return 0 if bundle.ok else 1


def _cmd_evolve(args) -> int:
    from .measurement import record_dynamics
    from .operators import ModelParams, build_hamiltonian
    from .groundstate import ground_state_global
    from .pipeline import write_dynamics_csv
    from .reservoir import PulseConvention, sample_disorder
    from .states import SpinState

    if args.state == "ground":
        p = ModelParams(L=args.L, J=1.0, Jp=args.jp, delta=args.delta,
                        eps_pin=args.eps_pin)
        s0 = ground_state_global(build_hamiltonian(p), seed=args.solver_seed).state
    else:
        s0 = SpinState.polarized(args.L)
    pars = sample_disorder(args.L, args.g * np.pi, args.depth, args.seed,
                           PulseConvention(args.convention))
    rec = record_dynamics(s0, pars)
    write_dynamics_csv(rec, args.out)
    print(f"dynamics record ({rec.matrix.shape[0]} x {rec.matrix.shape[1]}) -> {args.out}")
    return 0


def _cmd_mbti(args) -> int:
    from .groundstate import ground_state_global
    from .invariant import centered_partition, classify_mbti, partial_reflection_invariant
    from .operators import ModelParams, build_hamiltonian
    from .pipeline import _fmt, _write_csv

    part = centered_partition(args.L, args.n)
    jps = ([args.jp] if args.jp is not None
           else [round(args.jp_min + k * args.jp_step, 10)
                 for k in range(int(round((args.jp_max - args.jp_min) / args.jp_step)) + 1)])
    rows = []
    for jp in jps:
        p = ModelParams(L=args.L, J=1.0, Jp=float(jp), delta=args.delta,
                        eps_pin=args.eps_pin)
        gs = ground_state_global(build_hamiltonian(p), seed=args.solver_seed)
        r = partial_reflection_invariant(gs.state, part)
        label = classify_mbti(r.value).value
        rows.append([_fmt(args.delta), _fmt(jp), _fmt(r.value), label])
        print(f"delta={args.delta} jp={jp}: value={r.value:+.4f} label={label}")
    if args.out:
        _write_csv(args.out, ["delta", "jp", "value", "label"], rows)
    return 0


def _cmd_learn(args) -> int:
    from .learn import (TsneConfig, bic_scan, detect_transitions, gmm_fit,
                        silhouette, standardize, tsne)
    from .pipeline import _fmt, _write_csv, read_features_csv

    values, grid = read_features_csv(args.features)
    grid = np.array(grid)
    os.makedirs(args.out_dir, exist_ok=True)
    exit_code = 0
    for delta in np.unique(grid[:, 0]):
        mask = np.isclose(grid[:, 0], delta)
        if mask.sum() < 4:
            continue
        jps = np.sort(grid[mask, 1])
        order = np.argsort(grid[mask, 1])
        X = standardize(values[mask][order])
        cfg = TsneConfig(perplexity=args.perplexity, iterations=args.iterations,
                         early_exaggeration=args.exaggeration, seed=args.seed)
        emb = tsne(X, cfg)
        k = args.k or min(bic_scan(emb, args.kmax, args.seed), key=lambda t: t[1])[0]
        model = gmm_fit(emb, k, args.seed)
        tset = detect_transitions(model, jps)
        labels = np.argmax(model.responsibilities, axis=1)
        sil = silhouette(emb.points, labels) if np.unique(labels).size >= 2 else 0.0
        tag = _fmt(delta).replace(".", "p").replace("-", "m")
        _write_csv(os.path.join(args.out_dir, f"embedding_delta{tag}.csv"),
                   ["delta", "jp", "y1", "y2"],
                   [[_fmt(delta), _fmt(jp), _fmt(y1), _fmt(y2)]
                    for jp, (y1, y2) in zip(jps, emb.points)])
        _write_csv(os.path.join(args.out_dir, f"transitions_delta{tag}.csv"),
                   ["delta", "jp_transition", "from", "to"],
                   [[_fmt(delta), _fmt(jp), int(a_), int(b_)]
                    for (jp, a_, b_) in tset.transitions])
        print(f"delta={delta}: k={k} silhouette={sil:.3f} "
              f"transitions={[round(t[0], 4) for t in tset.transitions]}")
    return exit_code


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return 0 if run_selftest(verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrphase",
        description="Phase-transition detection on a spin chain via a Floquet "
                    "circuit reservoir, t-SNE + GMM clustering, and a "
                    "partial-reflection invariant oracle.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run the feature/invariant sweep")
    _add_config_args(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("report", help="full experiment: sweep + learn + report")
    _add_config_args(p)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("evolve", help="record feature dynamics under the circuit")
    p.add_argument("--L", type=int, default=12)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--jp", type=float, default=1.0)
    p.add_argument("--eps-pin", type=float, default=1e-4)
    p.add_argument("--g", type=float, default=0.96, help="in units of pi")
    p.add_argument("--depth", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver-seed", type=int, default=0)
    p.add_argument("--convention", default="HALF_ANGLE",
                   choices=["HALF_ANGLE", "LITERAL"])
    p.add_argument("--state", default="ground", choices=["ground", "polarized"])
    p.add_argument("--out", default="dynamics.csv")
    p.set_defaults(fn=_cmd_evolve)

    p = sub.add_parser("mbti", help="partial-reflection invariant point or scan")
    p.add_argument("--L", type=int, default=12)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--jp", type=float)
    p.add_argument("--jp-min", type=float, default=0.0)
    p.add_argument("--jp-max", type=float, default=3.0)
    p.add_argument("--jp-step", type=float, default=0.05)
    p.add_argument("--eps-pin", type=float, default=1e-4)
    p.add_argument("--n", type=int, help="sites per block (default: cell-aligned)")
    p.add_argument("--solver-seed", type=int, default=0)
    p.add_argument("--out", help="write a CSV scan here")
    p.set_defaults(fn=_cmd_mbti)

    p = sub.add_parser("learn", help="embed + cluster a features CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--out", dest="out_dir", default="learn_out")
    p.add_argument("--perplexity", type=float, default=15.0)
    p.add_argument("--exaggeration", type=float, default=24.0)
    p.add_argument("--iters", type=int, dest="iterations", default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int)
    p.add_argument("--kmax", type=int, default=6)
    p.set_defaults(fn=_cmd_learn)

    p = sub.add_parser("selftest", help="run the brute-force oracle suite")
    p.set_defaults(fn=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # stage failure -> exit 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
