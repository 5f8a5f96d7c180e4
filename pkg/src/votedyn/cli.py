"""Command line entry point: ``votedyn <subcommand> ...``.

Exit codes: 0 success, 1 solver failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import fitting, io, montecarlo, stats
from .model import StoryParams
from .ode import SolverError, solve_story


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"key = value file (default: ${io.CONFIG_ENV})")
    p.add_argument("--dump-config", metavar="PATH", help="write the effective configuration here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="votedyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="mean-field trajectory of one story")
    _common(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--t-end", type=float)
    p.add_argument("--story-id", default="story")
    p.add_argument("--output", "-o", help="trajectory file (default stdout)")
    p.add_argument("--observations", metavar="PATH", help="also write hourly snapshots as an observation file")
    p.add_argument("--cadence", type=float, default=60.0)

    p = sub.add_parser("mc", help="Monte Carlo ensemble of one story")
    _common(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--t-end", type=float)
    p.add_argument("--grid-step", type=float, default=10.0)
    p.add_argument("--output", "-o")

    p = sub.add_parser("fit", help="estimate r per story from an observation file")
    _common(p)
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--early", type=int, metavar="K", help="fit only the first K observations")
    p.add_argument("--horizon", type=float, default=2880.0)
    p.add_argument("--output", "-o")

    p = sub.add_parser("boundary", help="minimal promoting r over a range of S")
    _common(p)
    p.add_argument("--s-min", type=float, default=0.0)
    p.add_argument("--s-max", type=float, default=320.0)
    p.add_argument("--steps", type=int, default=33)
    p.add_argument("--log", action="store_true", help="log-spaced S (s-min must be > 0)")
    p.add_argument("--output", "-o")

    p = sub.add_parser("synth", help="synthetic observation dataset from the stochastic model")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r-mu", type=float, default=-1.67)
    p.add_argument("--r-sigma", type=float, default=0.47)
    p.add_argument("--s-min", type=int, default=5)
    p.add_argument("--s-max", type=int, default=160)
    p.add_argument("--seed", type=int)
    p.add_argument("--cadence", type=float, default=60.0)
    p.add_argument("--t-end", type=float)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--truth", required=True, help="ground-truth table path")

    p = sub.add_parser("stats", help="lognormal fit, KS randomization test, S-r correlation")
    _common(p)
    p.add_argument("--input", "-i", required=True, help="table with an r_hat or r column")
    p.add_argument("--n-synthetic", type=int, default=1000)
    p.add_argument("--n-perm", type=int, default=10000)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o", help="JSON report (default stdout)")
    return parser


def _config(args) -> io.RunConfig:
    cfg = io.load_config(args.config)
    if getattr(args, "t_end", None) is not None:
        cfg = dataclasses.replace(cfg, solve=dataclasses.replace(cfg.solve, t_end=args.t_end))
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "runs", None) is not None:
        cfg = dataclasses.replace(cfg, mc_runs=args.runs)
    if args.dump_config:
        Path(args.dump_config).write_text(cfg.dumps(), encoding="utf-8")
    return cfg


def _say(msg: str, to_stderr: bool) -> None:
    print(msg, file=sys.stderr if to_stderr else sys.stdout)


def cmd_simulate(args, cfg: io.RunConfig) -> None:
    story = StoryParams(args.r, args.s)
    traj = solve_story(story, cfg.site, cfg.solve)
    io.write_trajectory(args.output, args.story_id, traj)
    if args.observations:
        io.write_observations(args.observations, [io.resample(traj, args.story_id, args.cadence, cfg.solve.t_end)])
    prom = "not promoted" if traj.t_promoted is None else f"promoted at t={traj.t_promoted:.6g} min"
    _say(f"final votes {traj.final_votes:.6g} at t={traj.t[-1]:.6g} min; {prom}", args.output is None)


def cmd_mc(args, cfg: io.RunConfig) -> None:
    if cfg.mc_runs < 1:
        raise ValueError(f"--runs must be >= 1, got {cfg.mc_runs}")
    t_end = cfg.solve.t_end
    grid = tuple(float(x) for x in np.arange(0.0, t_end + 1e-9, args.grid_step))
    ctl = montecarlo.McControls(seed=cfg.seed, n_runs=cfg.mc_runs, t_end=t_end, record_grid=grid)
    ens = montecarlo.simulate_ensemble(StoryParams(args.r, args.s), cfg.site, ctl)
    io.write_table(args.output, io.ENSEMBLE_COLUMNS,
                   zip(ens.grid, ens.mean_votes, ens.var_votes, ens.promoted_by))
    _say(f"runs {ens.n_runs}; promoted fraction {ens.promoted_fraction:.6g}; "
         f"mean promotion time {ens.mean_promotion_time:.6g} min; "
         f"mean final votes {float(np.mean(ens.per_run_finals)):.6g}", args.output is None)


def cmd_fit(args, cfg: io.RunConfig) -> None:
    series = io.read_observations(args.input)
    if args.early is not None:
        short = [o.story_id for o in series if len(o) < args.early]
        if short:
            raise ValueError(f"--early {args.early}: story {short[0]} has fewer observations")
    fits = fitting.fit_dataset(series, cfg.site, early=args.early, horizon=args.horizon, controls=cfg.solve)
    io.write_table(args.output, io.FIT_COLUMNS, (
        (f.story_id, f.s_submitter, f.r_hat, f.rms_votes, f.rms_relative, f.predicted_final,
         f.predicted_promotion_time, f.n_points_used, f.degenerate) for f in fits))
    observed = [float(o.votes[-1]) for o in series]
    predicted = [f.predicted_final for f in fits]
    lines = [f"stories {len(fits)}"]
    if len(fits) >= 2 and np.ptp(predicted) > 0:
        lines.append(f"slope observed~predicted {stats.least_squares_slope(predicted, observed):.6g}")
        m = stats.error_metrics(predicted, observed)
        lines.append(f"rms {m.rms_abs:.6g} votes; rms relative {m.rms_rel:.6g}; correlation {m.pearson_r:.6g}")
    _say("; ".join(lines), args.output is None)


def cmd_boundary(args, cfg: io.RunConfig) -> None:
    if args.steps < 1:
        raise ValueError("--steps must be >= 1")
    if args.s_min < 0 or args.s_max < args.s_min:
        raise ValueError("need 0 <= s-min <= s-max")
    if args.steps == 1:
        grid = [args.s_min]
    elif args.log:
        if args.s_min <= 0:
            raise ValueError("--log needs s-min > 0")
        grid = list(np.geomspace(args.s_min, args.s_max, args.steps))
    else:
        grid = list(np.linspace(args.s_min, args.s_max, args.steps))
    rows = fitting.promotion_boundary(cfg.site, grid, cfg.solve)
    io.write_table(args.output, io.BOUNDARY_COLUMNS, ((float(s), r) for s, r in rows))


def cmd_synth(args, cfg: io.RunConfig) -> None:
    if args.n < 1:
        raise ValueError("--n must be >= 1")
    if args.s_min < 0 or args.s_max < args.s_min:
        raise ValueError("need 0 <= s-min <= s-max")
    data = montecarlo.generate_synthetic_dataset(
        args.n, args.r_mu, args.r_sigma, range(args.s_min, args.s_max + 1), cfg.site, cfg.seed,
        cfg.solve.t_end, args.cadence)
    io.write_observations(args.output, [d.obs for d in data])
    io.write_table(args.truth, io.TRUTH_COLUMNS, (
        (d.obs.story_id, d.truth.r, d.truth.S, d.t_promoted is not None, d.t_promoted, d.final_votes)
        for d in data))


def cmd_stats(args, cfg: io.RunConfig) -> None:
    header, rows = io.read_table(args.input)
    key = "r_hat" if "r_hat" in header else "r"
    if key not in header:
        raise io.FormatError(f"{args.input}: needs an r_hat or r column")
    r = np.array([float(row[header.index(key)]) for row in rows if row])
    fit = stats.lognormal_mle(r)
    report = {
        "n": fit.n,
        "mu_ln": fit.mu_ln,
        "sigma_ln": fit.sigma_ln,
        "ci95_mu": list(fit.ci95_mu),
        "ci95_sigma": list(fit.ci95_sigma),
    }
    if fit.n >= 8:
        d, p = stats.ks_randomization_test(r, args.n_synthetic, cfg.seed)
        report.update(ks_stat=d, ks_p_value=p, n_synthetic=args.n_synthetic)
    if "s_submitter" in header:
        s = np.array([float(row[header.index("s_submitter")]) for row in rows if row])
        if np.ptp(s) > 0 and fit.n >= 3:
            c, p = stats.correlation_permutation_test(s, r, args.n_perm, cfg.seed)
            report.update(corr_s_r=c, corr_p_value=p, n_perm=args.n_perm)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


COMMANDS = {
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "fit": cmd_fit,
    "boundary": cmd_boundary,
    "synth": cmd_synth,
    "stats": cmd_stats,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except SolverError as e:
        print(f"votedyn {args.command}: solver failure: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"votedyn {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
