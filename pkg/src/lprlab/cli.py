"""Command-line entry point.

Subcommands cover the four artifact families: `curves` exports the
closed-form model curves as CSV, `gen-trace` writes synthetic mobility
traces, `simulate` runs a delivery scenario from an INI file, and
`compare-ghls` sweeps the update-to-request ratio against a home-server
baseline. Every command writes a JSON manifest naming its outputs, and
re-running a command with the same flags reproduces every output byte
for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import __version__, figures
from .analytic import (
    DEFAULT_C,
    DEFAULT_C1,
    DEFAULT_C2,
    DEFAULT_C3,
    BetaGeometricModel,
    Grouping,
    RegularityModel,
)
from .mobility import MobilityParams, empirical_regularity, generate_trace
from .profile import write_trace_csv
from .simnet.scenario import (
    ScenarioConfig,
    aggregate,
    compare_ghls,
    load_scenario,
    measure_baseline,
    run_scenario,
    run_trials,
)

__all__ = ["RunManifest", "build_parser", "main"]

ENV_OUT_DIR = "LPRLAB_OUT_DIR"

_FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig7")

_TRIAL_HEADER = (
    "index",
    "hour",
    "true_rank",
    "reachable",
    "success",
    "latency_factor",
    "transmissions",
    "update_hops",
)

_TRACE_FLAGS = {
    "n_users": "--users",
    "n_weeks": "--weeks",
    "n_locations": "--locations",
    "unpredictable_floor": "--floor",
}


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record written next to every command's outputs."""

    command: str
    parameters: dict
    seeds: tuple[int, ...]
    version: str
    outputs: tuple[str, ...]

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "parameters": self.parameters,
            "seeds": list(self.seeds),
            "version": self.version,
            "outputs": list(self.outputs),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _resolve_out_dir(flag_value: str | None) -> str:
    out_dir = flag_value or os.environ.get(ENV_OUT_DIR) or "."
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _command_params(args: argparse.Namespace) -> dict:
    skip = {"func", "command"}
    params = {}
    for key, value in vars(args).items():
        if key in skip:
            continue
        if isinstance(value, (str, int, float, bool)) or value is None:
            params[key] = value
        else:
            params[key] = str(value)
    return params


def _finish(args: argparse.Namespace, out_dir: str, outputs: list[str],
            seeds: tuple[int, ...]) -> None:
    # The manifest is written last: its presence certifies that every
    # listed output landed completely.
    manifest = RunManifest(
        command=args.command,
        parameters=_command_params(args),
        seeds=seeds,
        version=__version__,
        outputs=tuple(outputs),
    )
    path = os.path.join(out_dir, f"{args.command.replace('-', '_')}_manifest.json")
    _write_text(path, manifest.to_json())
    print(f"wrote {path}")


def cmd_curves(args: argparse.Namespace) -> int:
    out_dir = _resolve_out_dir(args.out_dir)
    selected = _FIGURES if args.fig == "all" else (args.fig,)
    constant = BetaGeometricModel(args.c)
    model = RegularityModel(args.c1, args.c2, args.c3)
    outputs = []
    for name in selected:
        if name == "fig2":
            header, rows = figures.success_cdf_rows(args.k_max, constant)
        elif name == "fig3":
            header, rows = figures.time_averaged_rows(args.k_max, model)
        elif name == "fig4":
            header, rows = figures.first_try_pmf_rows(args.k_max, constant)
        elif name == "fig5":
            header, rows = figures.retry_pmf_rows(args.k_max, model)
        else:
            header, rows = figures.grouping_front_rows(args.k, model)
        filename = f"{name}.csv"
        figures.write_csv(os.path.join(out_dir, filename), header, rows)
        outputs.append(filename)
        print(f"wrote {os.path.join(out_dir, filename)} ({len(rows)} rows)")
    _finish(args, out_dir, outputs, ())
    return 0


def _trace_params(args: argparse.Namespace) -> MobilityParams:
    try:
        return MobilityParams(
            n_users=args.users,
            n_weeks=args.weeks,
            n_locations=args.locations,
            unpredictable_floor=args.floor,
            seed=args.seed,
        )
    except ValueError as exc:
        message = str(exc)
        for field_name, flag in _TRACE_FLAGS.items():
            message = message.replace(field_name, flag)
        raise ValueError(message) from None


def cmd_gen_trace(args: argparse.Namespace) -> int:
    params = _trace_params(args)
    traces = generate_trace(params)
    out_dir = _resolve_out_dir(args.out_dir)
    path = os.path.join(out_dir, args.out)
    write_trace_csv(traces, path)
    print(f"wrote {path} ({sum(len(t) for t in traces)} observations)")
    _finish(args, out_dir, [args.out], (args.seed,))
    if args.verify:
        return _verify_trace(traces, params)
    return 0


def _verify_trace(traces, params: MobilityParams) -> int:
    """Compare per-hour modal-cell frequency against the model curve."""
    empirical = empirical_regularity(traces)
    model = params.regularity_model
    samples = params.n_users * params.n_weeks
    worst_z = 0.0
    worst = (0.0, 1.0)
    for hour in range(len(empirical)):
        expected = model(hour + 0.5)
        sigma = math.sqrt(expected * (1.0 - expected) / samples)
        deviation = abs(float(empirical[hour]) - expected)
        if deviation > worst_z * sigma:
            worst_z = deviation / sigma
            worst = (deviation, 4.5 * sigma)
    ok = worst_z <= 4.5
    status = "passed" if ok else "FAILED"
    print(
        f"self-check {status}: max deviation {worst[0]:.4f} "
        f"(bound {worst[1]:.4f} at {samples} samples per hour)"
    )
    return 0 if ok else 1


def _chunk_rows(config: ScenarioConfig, lo: int, hi: int):
    return run_trials(config, range(lo, hi))


def _run_with_jobs(config: ScenarioConfig, jobs: int):
    """run_scenario, with trials split across processes when jobs > 1."""
    if jobs <= 1 or config.trials < 2:
        return run_scenario(config)
    jobs = min(jobs, config.trials)
    step = -(-config.trials // jobs)
    bounds = [
        (lo, min(lo + step, config.trials))
        for lo in range(0, config.trials, step)
    ]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_chunk_rows, config, lo, hi) for lo, hi in bounds]
        rows = [row for future in futures for row in future.result()]
    return aggregate(rows, measure_baseline(config)), rows


def _print_summary(record_dict: dict) -> None:
    width = max(len(key) for key in record_dict)
    for key, value in record_dict.items():
        if isinstance(value, float):
            value = format(value, ".6g")
        print(f"  {key:<{width}}  {value}")


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.trials is not None:
        config = replace(config, trials=args.trials)
    record, rows = _run_with_jobs(config, args.jobs)
    out_dir = _resolve_out_dir(args.out_dir)

    trials_path = os.path.join(out_dir, "trials.csv")
    figures.write_csv(
        trials_path,
        _TRIAL_HEADER,
        (
            (
                row.index,
                row.hour,
                row.true_rank,
                int(row.reachable),
                int(row.success),
                row.latency_factor,
                row.transmissions,
                row.update_hops,
            )
            for row in rows
        ),
    )
    summary = record.as_dict()
    _write_text(
        os.path.join(out_dir, "summary.json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    print(f"wrote {trials_path} ({len(rows)} rows)")
    print(f"wrote {os.path.join(out_dir, 'summary.json')}")
    _print_summary(summary)
    _finish(args, out_dir, ["trials.csv", "summary.json"], (config.seed,))
    return 0


def cmd_compare_ghls(args: argparse.Namespace) -> int:
    if args.fr_steps < 1:
        raise ValueError(f"--fr-steps must be >= 1, got {args.fr_steps}")
    if args.fr_max < args.fr_min:
        raise ValueError("--fr-max must be >= --fr-min")
    if args.fr_steps == 1:
        sweep = (args.fr_min,)
    else:
        pitch = (args.fr_max - args.fr_min) / (args.fr_steps - 1)
        sweep = tuple(args.fr_min + i * pitch for i in range(args.fr_steps))
    config = ScenarioConfig(
        n=args.n,
        field_size=args.field_size,
        radio_range=args.radio_range,
        trials=args.trials,
        n_candidates=args.n_candidates,
        strategy="lpr",
        grouping=Grouping.parse(args.grouping),
        f_over_r=sweep,
        seed=args.seed,
    )
    comparison = compare_ghls(
        config, runner=lambda cfg: _run_with_jobs(cfg, args.jobs)
    )
    out_dir = _resolve_out_dir(args.out_dir)
    sweep_path = os.path.join(out_dir, "ghls_sweep.csv")
    figures.write_csv(
        sweep_path,
        ("f_over_r", "profile_total", "home_server_total"),
        zip(comparison.f_over_r, comparison.lpr_totals, comparison.ghls_totals),
    )
    _write_text(
        os.path.join(out_dir, "ghls_summary.json"),
        json.dumps(comparison.as_dict(), indent=2, sort_keys=True) + "\n",
    )
    print(f"wrote {sweep_path} ({len(sweep)} rows)")
    print(f"wrote {os.path.join(out_dir, 'ghls_summary.json')}")
    cross = comparison.crossover
    print(f"  empirical crossover f/r = {cross:.3f}" if cross is not None
          else "  empirical crossover f/r = n/a")
    print(f"  analytic crossover  f/r = {comparison.analytic_crossover:.3f}")
    print(
        f"  s_hat {comparison.s_hat:.3f}  p_hat {comparison.p_hat:.3f}  "
        f"t_bar {comparison.t_bar:.3f}"
    )
    _finish(args, out_dir, ["ghls_sweep.csv", "ghls_summary.json"], (config.seed,))
    return 0


def _add_out_dir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--out-dir",
        default=None,
        help=f"output directory (default: ${ENV_OUT_DIR} or current directory)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lprlab",
        description="Location-profile routing workbench",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    curves = sub.add_parser(
        "curves", help="export the closed-form model curve families as CSV"
    )
    curves.add_argument(
        "--fig", choices=(*_FIGURES, "all"), default="all",
        help="curve family to export (default: all)",
    )
    curves.add_argument(
        "--k-max", type=int, default=50, dest="k_max",
        help="largest candidate count for the cdf/pmf families",
    )
    curves.add_argument(
        "--k", type=int, default=12, help="candidate count for the fig7 front"
    )
    curves.add_argument(
        "--c", type=float, default=DEFAULT_C,
        help="constant regularity for fig2/fig4",
    )
    curves.add_argument("--c1", type=float, default=DEFAULT_C1)
    curves.add_argument("--c2", type=float, default=DEFAULT_C2)
    curves.add_argument("--c3", type=float, default=DEFAULT_C3)
    _add_out_dir(curves)
    curves.set_defaults(func=cmd_curves)

    gen = sub.add_parser("gen-trace", help="generate synthetic mobility traces")
    gen.add_argument("--users", type=int, default=40)
    gen.add_argument("--weeks", type=int, default=6)
    gen.add_argument("--locations", type=int, default=40)
    gen.add_argument("--floor", type=float, default=0.07,
                     help="unpredictable-visit probability floor")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="trace.csv", help="trace file name")
    gen.add_argument(
        "--verify", action="store_true",
        help="check the trace's hourly regularity against the model curve",
    )
    _add_out_dir(gen)
    gen.set_defaults(func=cmd_gen_trace)

    sim = sub.add_parser("simulate", help="run a delivery scenario from an INI file")
    sim.add_argument("scenario", help="scenario INI file")
    sim.add_argument("--seed", type=int, default=None, help="override [seeds] seed")
    sim.add_argument("--trials", type=int, default=None,
                     help="override [traffic] trials")
    sim.add_argument("--jobs", type=int, default=1,
                     help="worker processes for trial batches")
    _add_out_dir(sim)
    sim.set_defaults(func=cmd_simulate)

    cmp_parser = sub.add_parser(
        "compare-ghls",
        help="sweep update rates: profile delivery vs a hashed home server",
    )
    cmp_parser.add_argument("--fr-min", type=float, default=0.5)
    cmp_parser.add_argument("--fr-max", type=float, default=3.0)
    cmp_parser.add_argument("--fr-steps", type=int, default=6)
    cmp_parser.add_argument("--grouping", default="1|2|6|3",
                            help="stage sizes joined by '|'")
    cmp_parser.add_argument("--trials", type=int, default=2000)
    cmp_parser.add_argument("--n", type=int, default=280)
    cmp_parser.add_argument("--field-size", type=float, default=2500.0,
                            dest="field_size")
    cmp_parser.add_argument("--radio-range", type=float, default=400.0,
                            dest="radio_range")
    cmp_parser.add_argument("--n-candidates", type=int, default=12,
                            dest="n_candidates")
    cmp_parser.add_argument("--seed", type=int, default=0)
    cmp_parser.add_argument("--jobs", type=int, default=1,
                            help="worker processes for trial batches")
    _add_out_dir(cmp_parser)
    cmp_parser.set_defaults(func=cmd_compare_ghls)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
