"""Command-line Monte-Carlo harness and single-instance solver.

Two subcommands:

  swiptsec solve  — solve one channel realization end to end and print a
                    report (outer-loop trace, rank ratio, optimality
                    residuals, secrecy margin, harvested powers); --dump
                    writes the compiled constraint set as sparse triplets.
  swiptsec sweep  — Monte-Carlo sweep over scenario parameters; writes one
                    CSV row per (sweep point, scheme) with means and
                    standard errors over feasible trials.

Configuration is a flat key=value text file ('#' comments allowed) whose
keys mirror ScenarioConfig plus the EH constants (eh_m, eh_a, eh_b, eh_eta).
All outputs are fully determined by (seed, config): per-trial RNG streams
are spawned from SeedSequence(seed, trial index), so serial and parallel
runs agree, and wall-clock times are reported on stderr only, never in the
CSV.
"""

import argparse
import csv
import sys
import time

import numpy as np

from . import sdp
from .baseline import solve_baseline
from .channel import (ConfigError, ScenarioConfig, sample_channel,
                      watt_to_dbm)
from .eh import EhParams
from .inner import InfeasibleError, InnerProblemData, build_constraints, check_kkt
from .metrics import harvested_report, max_er_rate, secrecy_rate
from .outer import run as solve_proposed

_INT_KEYS = {"n_t", "n_r", "j_ers", "seed"}
_FLOAT_KEYS = {"d_ir", "d_er", "rician_k_db", "carrier_hz", "antenna_gain_db",
               "noise_dbm", "p_max_dbm", "gamma_req_db", "r_tol",
               "eh_m", "eh_a", "eh_b", "eh_eta"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS

CSV_COLUMNS = ["scheme", "trials", "feasible", "failed",
               "harvested_mean_dbm", "harvested_se_dbm",
               "secrecy_mean_bits_per_s_hz", "secrecy_se_bits_per_s_hz",
               "outer_iters_mean"]


def _parse_value(key, text):
    try:
        if key in _INT_KEYS:
            return int(text)
        return float(text)
    except ValueError as err:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from err


def read_config(path) -> dict:
    """Parse a flat key=value config file into an override dict."""
    overrides = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, text = (part.strip() for part in line.split("=", 1))
            if key not in _ALL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r} "
                                  f"(known: {', '.join(sorted(_ALL_KEYS))})")
            overrides[key] = _parse_value(key, text)
    return overrides


def make_config(overrides: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from override keys (EH constants folded in)."""
    kv = dict(overrides)
    eh = EhParams(M=kv.pop("eh_m", 0.02), a=kv.pop("eh_a", 6400.0),
                  b=kv.pop("eh_b", 0.003), eta=kv.pop("eh_eta", 0.8))
    return ScenarioConfig(eh=eh, **kv)


def _parse_sweep(specs):
    """Each spec is key=v1,v2,...; returns list of (key, [values])."""
    axes = []
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"bad sweep spec {spec!r}, expected key=v1,v2,...")
        key, text = spec.split("=", 1)
        key = key.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown sweep key {key!r}")
        values = [_parse_value(key, v.strip()) for v in text.split(",") if v.strip()]
        if not values:
            raise ConfigError(f"empty sweep spec {spec!r}")
        axes.append((key, values))
    return axes


def _trial_rng(seed, trial):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _run_trial(config, rng, scheme, opts):
    """Solve one realization with one scheme; returns a result dict."""
    chan = sample_channel(config, rng)
    data = InnerProblemData.from_config(config, chan)
    if scheme == "proposed":
        alloc, state, _trace = solve_proposed(data, opts)
        outer_iters = state.iter
    else:
        alloc = solve_baseline(data, opts)
        outer_iters = 0
    report = harvested_report(alloc, chan, config.eh)
    return {"harvested_w": report["total_nonlinear"],
            "secrecy": secrecy_rate(alloc, chan),
            "outer_iters": outer_iters}


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return np.nan, np.nan
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def cmd_sweep(args) -> int:
    overrides = read_config(args.config) if args.config else {}
    axes = _parse_sweep(args.sweep or [])
    trials = args.trials
    if args.full_scale:
        overrides.setdefault("j_ers", 10)
        trials = max(trials, 200)
        print("full-scale run: J=10 ERs and >=200 trials per point; "
              "expect a long runtime", file=sys.stderr)

    schemes = ["proposed", "baseline"] if args.scheme == "both" else [args.scheme]
    opts = sdp.SolverOptions()

    # Cartesian product in the order the axes were given
    points = [{}]
    for key, values in axes:
        points = [dict(p, **{key: v}) for p in points for v in values]

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([key for key, _ in axes] + CSV_COLUMNS)
    t0 = time.time()
    total_failures = 0
    for point in points:
        merged = dict(overrides, **point)
        try:
            config = make_config(merged)
        except (ConfigError, ValueError) as err:
            raise ConfigError(f"invalid sweep point {point}: {err}") from err
        for scheme in schemes:
            rows, failed = [], 0
            for trial in range(trials):
                rng = _trial_rng(args.seed, trial)
                try:
                    rows.append(_run_trial(config, rng, scheme, opts))
                except InfeasibleError:
                    continue
                except (RuntimeError, np.linalg.LinAlgError) as err:
                    failed += 1
                    print(f"trial failure at {point} scheme={scheme} "
                          f"trial={trial}: {err}", file=sys.stderr)
            total_failures += failed
            h_mean, h_se = _mean_se([watt_to_dbm(r["harvested_w"]) for r in rows])
            s_mean, s_se = _mean_se([r["secrecy"] for r in rows])
            it_mean = (float(np.mean([r["outer_iters"] for r in rows]))
                       if rows else np.nan)
            writer.writerow([f"{point[key]:g}" for key, _ in axes]
                            + [scheme, trials, len(rows), failed,
                               f"{h_mean:.6f}", f"{h_se:.6f}",
                               f"{s_mean:.6f}", f"{s_se:.6f}",
                               f"{it_mean:.3f}"])
    writer.writerow([f"# total_failures={total_failures}"])
    if args.out:
        out.close()
    print(f"sweep finished in {time.time() - t0:.1f} s", file=sys.stderr)
    return 0


def cmd_solve(args) -> int:
    overrides = read_config(args.config) if args.config else {}
    config = make_config(overrides)
    rng = _trial_rng(args.seed, 0)
    chan = sample_channel(config, rng)
    data = InnerProblemData.from_config(config, chan)

    if args.dump:
        cp = sdp.compile_problem(build_constraints(data))
        sdp.dump_problem(cp, args.dump)
        print(f"constraint set written to {args.dump}")

    print(f"scenario: n_t={config.n_t} n_r={config.n_r} J={config.j_ers} "
          f"gamma_req={config.gamma_req_db} dB p_max={config.p_max_dbm} dBm "
          f"seed={args.seed}")
    t0 = time.time()
    try:
        alloc, state, trace = solve_proposed(data)
    except InfeasibleError as err:
        print("status: infeasible")
        print(f"  {err}")
        return 0
    elapsed = time.time() - t0

    print("status: solved" if state.converged else "status: outer loop not converged")
    print("outer trace (iter, ||phi||_inf, step, objective, inner iters):")
    for row in trace:
        print(f"  {row['iter']:3d}  {row['phi_norm']:.3e}  {row['zeta']:7.4f}  "
              f"{row['objective']:.9e}  {row['fw_iters']}")
    kkt = check_kkt(alloc, data)
    bound = np.log2(1.0 + config.gamma_req) - config.r_tol
    rsec = secrecy_rate(alloc, chan)
    report = harvested_report(alloc, chan, config.eh)
    print(f"rank ratio (lambda_2/lambda_1 of W): {alloc.rank_ratio:.3e}")
    print(f"optimality residuals: stationarity {max(kkt.stationarity_w, kkt.stationarity_v):.3e}  "
          f"complementarity {max(kkt.comp_w, kkt.comp_v):.3e}  "
          f"passed={kkt.passed()}")
    print(f"secrecy rate: {rsec:.6f} bit/s/Hz "
          f"(guaranteed bound {bound:.6f}, margin {rsec - bound:+.3e})")
    print(f"worst eavesdropper rate: {max_er_rate(alloc, chan):.6f} bit/s/Hz "
          f"(cap {config.r_tol})")
    print("received / harvested (nonlinear) power per ER [mW]:")
    for j in range(chan.n_ers):
        print(f"  ER {j}: {report['p_er'][j] * 1e3:9.4f} / "
              f"{report['nonlinear'][j] * 1e3:9.4f}")
    print(f"total harvested: {report['total_nonlinear'] * 1e3:.4f} mW "
          f"({watt_to_dbm(report['total_nonlinear']):.3f} dBm)")
    print(f"wall time: {elapsed:.2f} s", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swiptsec",
        description="Secure SWIPT beamforming: single solves and Monte-Carlo sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one channel realization")
    p_solve.add_argument("--config", help="key=value config file")
    p_solve.add_argument("--seed", type=int, default=0, help="RNG seed")
    p_solve.add_argument("--dump", metavar="PATH",
                        help="write the compiled constraint set as sparse triplets")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo parameter sweep to CSV")
    p_sweep.add_argument("--config", help="key=value config file")
    p_sweep.add_argument("--sweep", action="append", metavar="KEY=V1,V2,...",
                         help="sweep axis; repeat for a Cartesian product")
    p_sweep.add_argument("--trials", type=int, default=50,
                         help="Monte-Carlo trials per sweep point")
    p_sweep.add_argument("--seed", type=int, default=0, help="base RNG seed")
    p_sweep.add_argument("--out", help="output CSV path (default: stdout)")
    p_sweep.add_argument("--scheme", choices=["proposed", "baseline", "both"],
                         default="both")
    p_sweep.add_argument("--full-scale", action="store_true",
                         help="paper-scale run: J=10 ERs, >=200 trials per point")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
