"""Command-line entry point: runs the engines and emits plot-ready CSV datasets.

Every run writes a JSON manifest (command, resolved configuration, master
seed, version, timestamps) next to its CSV outputs; the CSV files carry a
versioned schema string and the manifest name as leading comment lines and
contain nothing time-dependent, so a rerun from the same configuration is
byte-identical regardless of worker count.

Exit codes: 0 success, 2 validation error, 3 tolerance/crosscheck failure,
4 resource guard.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analytic, dense
from .channels import AMPLITUDE_DAMPING, PHASE_FLIP, make_amplitude_damping, make_phase_flip
from .errors import FitError, ResourceError, ValidationError
from .experiments import (
    ENGINE_DENSE,
    ENGINE_MPDO,
    FitWindow,
    ScalingPoint,
    SweepSpec,
    default_p_grid,
    fit_scaling,
    run_sweep,
    select_fit_window,
    window_sensitivity,
)
from .mpdo import run_grover_mpdo
from .tensornet import TruncationPolicy, build_diffusion_mpo, build_oracle_mpo, uniform_mps
from .trajectories import (
    TrajectoryConfig,
    UnravelingStrategy,
    ensemble_vs_dense_sigma,
    greedy_strategy,
    naive_strategy,
    numu_strategy,
    run_ensemble,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_TOLERANCE = 3
EXIT_RESOURCE = 4

_CHANNELS = {"pf": (PHASE_FLIP, make_phase_flip), "ad": (AMPLITUDE_DAMPING, make_amplitude_damping)}
_STRATEGIES = {
    "naive": naive_strategy,
    "numu": numu_strategy,
    "greedy": greedy_strategy,
}


class ToleranceFailure(RuntimeError):
    """A cross-engine comparison exceeded its documented tolerance."""


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, schema: str, manifest_name: str, header: list[str], rows) -> None:
    lines = [f"# schema: {schema}", f"# manifest: {manifest_name}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_manifest(out_dir: Path, name: str, command: str, config: dict, outputs: list[str], guards=()) -> str:
    manifest_name = f"{name}.manifest.json"
    payload = {
        "schema": "grovertn/manifest-v1",
        "command": command,
        "config": config,
        "version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "guards_triggered": list(guards),
        "outputs": outputs,
    }
    (out_dir / manifest_name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return manifest_name


def load_config_file(path: str) -> dict:
    """Flat key=value configuration; '#' starts a comment."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {raw!r} is not key=value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _channel_factory(label: str):
    if label not in _CHANNELS:
        raise ValidationError(f"channel must be one of {sorted(_CHANNELS)}, got {label!r}")
    return _CHANNELS[label]


def _strategy(label: str) -> UnravelingStrategy:
    if label not in _STRATEGIES:
        raise ValidationError(f"strategy must be one of {sorted(_STRATEGIES)}, got {label!r}")
    return _STRATEGIES[label]()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -----------------------------------------------------------


def cmd_ideal(args) -> int:
    n = args.n
    if n % 2 != 0:
        raise ValidationError("the ideal run reports equal-cut entropy and needs even n")
    k_max = args.iters if args.iters is not None else analytic.optimal_iterations(n)
    policy = TruncationPolicy(chi_max=args.chi, sv_cutoff=args.cutoff)
    state = uniform_mps(n)
    omega = "1" * n
    cut = n // 2
    oracle = build_oracle_mpo(omega)
    diffusion = build_diffusion_mpo(n)
    rows = []
    mismatches = []
    success = state.success_probability(omega)
    entropy = state.bipartite_entropy(cut)
    rows.append((0, success, entropy))
    for k in range(1, k_max + 1):
        state.apply_mpo(oracle, policy)
        state.apply_mpo(diffusion, policy)
        success = state.success_probability(omega)
        entropy = state.bipartite_entropy(cut)
        rows.append((k, success, entropy))
        reference = analytic.ideal_success_probability(n, k)
        if abs(success - reference) > 1e-10:
            mismatches.append((k, success, reference))

    out = _out_dir(args)
    name = f"ideal_n{n}"
    manifest = write_manifest(out, name, "ideal", {"n": n, "k_max": k_max, "chi": args.chi, "cutoff": args.cutoff}, [f"{name}.csv"])
    write_csv(out / f"{name}.csv", "grovertn/ideal-v1", manifest, ["k", "P_omega", "S_vN_bits"], rows)
    print(f"wrote {out / (name + '.csv')} ({len(rows)} rows)")
    if mismatches:
        print("analytic cross-check FAILED at:")
        for k, got, want in mismatches[:10]:
            print(f"  k={k}: engine {got!r} vs closed form {want!r}")
        raise ToleranceFailure(f"{len(mismatches)} iterations deviate beyond 1e-10")
    print("analytic cross-check passed (<= 1e-10 at every iteration)")
    return EXIT_OK


def cmd_trajectories(args) -> int:
    channels = ["pf", "ad"] if args.channel == "both" else [args.channel]
    rates = _parse_float_list(args.p)
    strategies = [s.strip() for s in args.strategy.split(",") if s.strip()]
    out = _out_dir(args)
    policy = TruncationPolicy(chi_max=args.chi, sv_cutoff=args.cutoff)
    written = []
    for channel_label in channels:
        _, factory = _channel_factory(channel_label)
        for p in rates:
            for strategy_label in strategies:
                cfg = TrajectoryConfig(
                    n=args.n,
                    omega=args.omega if args.omega else "1" * args.n,
                    channel=factory(p),
                    iters=args.iters if args.iters is not None else analytic.optimal_iterations(args.n),
                    n_trajectories=args.traj,
                    policy=policy,
                    strategy=_strategy(strategy_label),
                    seed=args.seed,
                    cut=args.cut,
                )
                result = run_ensemble(cfg, workers=args.workers)
                name = f"trajectories_{channel_label}_p{p:g}_{strategy_label}"
                manifest = write_manifest(
                    out,
                    name,
                    "trajectories",
                    {
                        "n": args.n,
                        "omega": cfg.omega,
                        "channel": channel_label,
                        "p": p,
                        "iters": cfg.iters,
                        "traj": args.traj,
                        "strategy": strategy_label,
                        "seed": args.seed,
                        "chi": args.chi,
                        "cutoff": args.cutoff,
                        "cut": cfg.cut,
                    },
                    [f"{name}.csv"],
                )
                bands = result.percentile_bands
                header = ["k", "S_T", "p5", "p25", "p50", "p75", "p95", "min", "max", "mean_success", "stderr"]
                rows = [
                    (
                        k,
                        result.mean_entropy_series[k],
                        bands[5][k],
                        bands[25][k],
                        bands[50][k],
                        bands[75][k],
                        bands[95][k],
                        result.min_series[k],
                        result.max_series[k],
                        result.mean_success_series[k],
                        result.stderr_success_series[k],
                    )
                    for k in range(cfg.iters + 1)
                ]
                write_csv(out / f"{name}.csv", "grovertn/trajectories-v1", manifest, header, rows)
                if args.save_trajectories:
                    matrix_rows = [
                        (rec.index, *rec.entropy_series) for rec in result.records
                    ]
                    write_csv(
                        out / f"{name}_entropies.csv",
                        "grovertn/trajectory-entropies-v1",
                        manifest,
                        ["trajectory", *(f"k{k}" for k in range(cfg.iters + 1))],
                        matrix_rows,
                    )
                written.append(name)
                print(f"wrote {name}.csv (mean final success {result.mean_success:.6g} +- {result.stderr_success:.2g})")
    return EXIT_OK


def cmd_mpdo(args) -> int:
    _, factory = _channel_factory(args.channel)
    channel = factory(args.p) if args.p > 0 else None
    policy = TruncationPolicy(chi_max=args.chi, sv_cutoff=args.cutoff, renormalize=False)
    omega = args.omega if args.omega else "1" * args.n
    iters = args.iters if args.iters is not None else analytic.optimal_iterations(args.n)
    trace = run_grover_mpdo(args.n, omega, channel, iters, policy)
    out = _out_dir(args)
    name = f"mpdo_{args.channel}_n{args.n}_p{args.p:g}"
    manifest = write_manifest(
        out,
        name,
        "mpdo",
        {"n": args.n, "omega": omega, "channel": args.channel, "p": args.p, "iters": iters, "chi": args.chi, "cutoff": args.cutoff},
        [f"{name}.csv"],
    )
    rows = [
        (int(trace.k[i]), trace.success[i], trace.entropy[i], trace.trace_drift[i], trace.discarded_weight[i])
        for i in range(len(trace.k))
    ]
    write_csv(out / f"{name}.csv", "grovertn/mpdo-v1", manifest, ["k", "P_omega", "OE_bits", "trace_drift", "discarded_weight"], rows)
    print(f"wrote {name}.csv (final success {trace.success[-1]:.8g})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    kind, _ = _channel_factory(args.channel)
    p_grid = tuple(_parse_float_list(args.p_grid)) if args.p_grid else default_p_grid(args.p_count, args.p_min, args.p_max)
    spec = SweepSpec(
        channel_kind=kind,
        n_list=tuple(_parse_int_list(args.n_list)),
        p_grid=p_grid,
        chi_max=args.chi,
        engine=args.engine,
        check_convergence=not args.no_convergence_check,
    )
    points = run_sweep(spec, workers=args.workers)
    out = _out_dir(args)
    name = f"sweep_{args.channel}"
    manifest = write_manifest(
        out,
        name,
        "sweep",
        {
            "channel": args.channel,
            "n_list": list(spec.n_list),
            "p_grid": list(spec.p_grid),
            "chi": spec.chi_max,
            "engine": spec.engine,
            "check_convergence": spec.check_convergence,
            "target_policy": spec.target_policy,
        },
        [f"{name}.csv"],
    )
    rows = [(pt.n, pt.p, pt.final_probability, pt.excess, int(not pt.converged)) for pt in points]
    write_csv(out / f"{name}.csv", "grovertn/sweep-v1", manifest, ["n", "p", "P_f", "excess", "chi_flag"], rows)
    print(f"wrote {name}.csv ({len(rows)} points, {sum(not pt.converged for pt in points)} flagged)")
    return EXIT_OK


def read_sweep_csv(path: str) -> list[ScalingPoint]:
    """Parse a sweep CSV back into scaling points."""
    points = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("n,"):
            continue
        n, p, prob, excess, flag = line.split(",")
        points.append(
            ScalingPoint(
                n=int(n),
                p=float(p),
                final_probability=float(prob),
                excess=float(excess),
                converged=not bool(int(flag)),
                chi_max=0,
                engine="dataset",
            )
        )
    if not points:
        raise ValidationError(f"no data rows found in {path}")
    return points


def cmd_fit(args) -> int:
    kind, _ = _channel_factory(args.model)
    points = read_sweep_csv(args.dataset)
    window = FitWindow(args.floor, args.ceiling, args.floor_scale)
    result = fit_scaling(points, kind, window, intercept=args.intercept)
    payload = result.as_dict()
    payload["window_sensitivity"] = window_sensitivity(points, kind, window)
    out = _out_dir(args)
    name = f"fit_{args.model}"
    manifest = write_manifest(
        out,
        name,
        "fit",
        {
            "dataset": args.dataset,
            "model": args.model,
            "floor": args.floor,
            "ceiling": args.ceiling,
            "floor_scale": args.floor_scale,
            "intercept": args.intercept,
        },
        [f"{name}.json"],
    )
    payload["manifest"] = manifest
    (out / f"{name}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(
        f"fit: rate exponent {result.rate_exponent:.6g} +- {result.rate_exponent_err:.2g}, "
        f"qubit exponent {result.qubit_exponent:.6g} +- {result.qubit_exponent_err:.2g} "
        f"({result.n_points} points)"
    )
    return EXIT_OK


def cmd_crosscheck(args) -> int:
    if args.n > 8:
        raise ResourceError("crosscheck runs the dense oracle and supports n <= 8")
    kind, factory = _channel_factory(args.channel)
    channel = factory(args.p)
    iters = analytic.optimal_iterations(args.n)
    omega = "1" * args.n
    dense_trace = dense.run_grover(args.n, omega, channel, iters)
    policy = TruncationPolicy(chi_max=args.chi, sv_cutoff=1e-14, renormalize=False)
    mpdo_trace = run_grover_mpdo(args.n, omega, channel, iters, policy)
    prob_dev = float(np.max(np.abs(dense_trace.success - mpdo_trace.success)))
    oe_dev = float(np.max(np.abs(dense_trace.entropy - mpdo_trace.entropy)))
    cfg = TrajectoryConfig(
        n=args.n,
        omega=omega,
        channel=channel,
        iters=iters,
        n_trajectories=args.traj,
        seed=args.seed,
    )
    sigma, ensemble = ensemble_vs_dense_sigma(cfg, workers=args.workers)

    print(f"crosscheck n={args.n} channel={args.channel} p={args.p} M={iters}")
    print(f"  dense vs mpdo   max |dP|  = {prob_dev:.3e}  (tolerance 1e-6)")
    print(f"  dense vs mpdo   max |dOE| = {oe_dev:.3e}  (tolerance 1e-6)")
    print(
        f"  dense vs trajectories ({args.traj}): mean success {ensemble.mean_success:.6g} "
        f"vs {dense_trace.success[-1]:.6g} -> {sigma:.2f} standard errors (tolerance 3)"
    )
    if prob_dev > 1e-6 or oe_dev > 1e-6 or sigma > 3.0:
        raise ToleranceFailure("crosscheck deviation beyond documented tolerances")
    print("  all engines agree within tolerances")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grovertn", description="Noisy search-circuit simulator over three state representations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker-pool size")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--config", help="flat key=value config file")

    p_ideal = sub.add_parser("ideal", help="noiseless run cross-checked against the closed form")
    p_ideal.add_argument("--n", type=int, required=True)
    p_ideal.add_argument("--iters", type=int, default=None, help="iteration count (default: optimal)")
    p_ideal.add_argument("--chi", type=int, default=2)
    p_ideal.add_argument("--cutoff", type=float, default=1e-12)
    common(p_ideal)

    p_traj = sub.add_parser("trajectories", help="stochastic trajectory ensembles")
    p_traj.add_argument("--n", type=int, default=10)
    p_traj.add_argument("--omega", default="")
    p_traj.add_argument("--channel", default="both", choices=["pf", "ad", "both"])
    p_traj.add_argument("--p", default="0.005,0.01,0.02,0.04", help="comma-separated noise rates")
    p_traj.add_argument("--iters", type=int, default=None)
    p_traj.add_argument("--chi", type=int, default=64)
    p_traj.add_argument("--cutoff", type=float, default=1e-10)
    p_traj.add_argument("--traj", type=int, default=2000, help="trajectory count")
    p_traj.add_argument("--strategy", default="naive,numu", help="comma-separated: naive, numu, greedy")
    p_traj.add_argument("--cut", type=int, default=None)
    p_traj.add_argument("--save-trajectories", action="store_true", help="also write the per-trajectory entropy matrix")
    common(p_traj)

    p_mpdo = sub.add_parser("mpdo", help="density-operator evolution in matrix-product form")
    p_mpdo.add_argument("--n", type=int, default=10)
    p_mpdo.add_argument("--omega", default="")
    p_mpdo.add_argument("--channel", default="pf", choices=["pf", "ad"])
    p_mpdo.add_argument("--p", type=float, default=0.02)
    p_mpdo.add_argument("--iters", type=int, default=None)
    p_mpdo.add_argument("--chi", type=int, default=8)
    p_mpdo.add_argument("--cutoff", type=float, default=1e-12)
    common(p_mpdo)

    p_sweep = sub.add_parser("sweep", help="final-success scaling sweep over (n, p)")
    p_sweep.add_argument("--channel", default="pf", choices=["pf", "ad"])
    p_sweep.add_argument("--n-list", default="8,10,12,14,16")
    p_sweep.add_argument("--p-grid", default="", help="explicit comma-separated rates (overrides the range flags)")
    p_sweep.add_argument("--p-min", type=float, default=5e-3)
    p_sweep.add_argument("--p-max", type=float, default=5e-1)
    p_sweep.add_argument("--p-count", type=int, default=20)
    p_sweep.add_argument("--chi", type=int, default=64)
    p_sweep.add_argument("--engine", default=ENGINE_MPDO, choices=[ENGINE_MPDO, ENGINE_DENSE])
    p_sweep.add_argument("--no-convergence-check", action="store_true")
    common(p_sweep)

    p_fit = sub.add_parser("fit", help="decay-law fit on a sweep dataset")
    p_fit.add_argument("--dataset", required=True)
    p_fit.add_argument("--model", required=True, choices=["pf", "ad"])
    p_fit.add_argument("--floor", type=float, default=1e-9)
    p_fit.add_argument("--ceiling", type=float, default=1e-2)
    p_fit.add_argument(
        "--floor-scale", type=float, default=0.0,
        help="extra per-n floor in units of 2^-n, cutting the large-rate saturation band",
    )
    p_fit.add_argument("--intercept", action="store_true", help="add a free intercept (model-mismatch diagnostic)")
    common(p_fit)

    p_cross = sub.add_parser("crosscheck", help="three-engine comparison at small n")
    p_cross.add_argument("--n", type=int, default=6)
    p_cross.add_argument("--channel", default="pf", choices=["pf", "ad"])
    p_cross.add_argument("--p", type=float, default=0.02)
    p_cross.add_argument("--chi", type=int, default=16)
    p_cross.add_argument("--traj", type=int, default=500)
    common(p_cross)

    return parser


_COMMANDS = {
    "ideal": cmd_ideal,
    "trajectories": cmd_trajectories,
    "mpdo": cmd_mpdo,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "crosscheck": cmd_crosscheck,
}

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def _apply_config(argv: list[str]) -> list[str]:
    """Expand --config FILE into flags injected right after the subcommand.

    Explicit flags written after the injection point win, since argparse
    keeps the last occurrence of a repeated option.
    """
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValidationError("--config needs a file path")
    values = load_config_file(argv[idx + 1])
    injected: list[str] = []
    for key, value in values.items():
        flag = "--" + key.replace("_", "-")
        lowered = value.lower()
        if lowered in _TRUE_WORDS:
            injected.append(flag)
        elif lowered in _FALSE_WORDS:
            continue
        else:
            injected.extend([flag, value])
    rest = argv[:idx] + argv[idx + 2 :]
    if not rest:
        raise ValidationError("a subcommand is required before --config")
    return [rest[0], *injected, *rest[1:]]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(argv)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ToleranceFailure, FitError) as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except ResourceError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
