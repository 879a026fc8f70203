"""Command-line entry points: gain synthesis, runs, analysis, comparisons.

Every command prints a JSON summary to stdout and writes its artifacts under
``--out-dir``.  Exit codes: 0 success, 1 runtime or check failure, 2 usage
error.  Reruns with identical flags produce byte-identical outputs.
"""

import argparse
import json
import os
import sys

from . import analysis, simulator, synthesis
from .config import ConfigError, load_config, scenario_from_config
from .presets import PRESETS

__all__ = ["main", "load_scenario", "run_command"]


def _dump_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def load_scenario(args, overrides=None):
    """Scenario from ``--preset`` or ``--config``, with CLI overrides."""
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        preset = getattr(args, "preset", None) or "paper"
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {sorted(PRESETS)}"
            )
        cfg = PRESETS[preset]()
    merged = {
        "seed": getattr(args, "seed", None),
        "dt": getattr(args, "dt", None),
        "t_end": getattr(args, "t_end", None),
        "mode": getattr(args, "mode", None),
        "kappa": getattr(args, "kappa", None),
        "record_stride": getattr(args, "record_stride", None),
    }
    if getattr(args, "no_comm_faults", False):
        merged["comm_enabled"] = False
    if getattr(args, "no_actuator_faults", False):
        merged["actuator_enabled"] = False
    merged.update(overrides or {})
    return scenario_from_config(cfg, overrides=merged)


def _scenario_flags(parser, with_sim_flags=True):
    parser.add_argument("--config", help="path to a scenario config JSON")
    parser.add_argument("--preset", help="built-in scenario name",
                        choices=sorted(PRESETS), default=None)
    parser.add_argument("--seed", type=int, default=None)
    if with_sim_flags:
        parser.add_argument("--dt", type=float, default=None)
        parser.add_argument("--t-end", dest="t_end", type=float, default=None)
        parser.add_argument("--mode", choices=("crm", "orm"), default=None)
        parser.add_argument("--kappa", type=float, default=None)
        parser.add_argument("--record-stride", dest="record_stride",
                            type=int, default=None)
        parser.add_argument("--no-comm-faults", action="store_true")
        parser.add_argument("--no-actuator-faults", action="store_true")
    parser.add_argument("--out-dir", dest="out_dir", default="out")


def _write_run_artifacts(scenario, trace, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    trace.to_csv_dir(out_dir)
    _dump_json(os.path.join(out_dir, "gains.json"), scenario.gains.to_dict())
    _dump_json(os.path.join(out_dir, "scenario.json"), scenario.config)
    table = analysis.metric_table(trace)
    cols = ["t"]
    blocks = [trace.t[:, None]]
    for name, series in table.items():
        cols += [f"{name}_a{k + 1}" for k in range(series.shape[1])]
        blocks.append(series)
    simulator._write_csv(os.path.join(out_dir, "metrics.csv"), cols, blocks)

    window = analysis.tail_window(trace)
    stats = analysis.trigger_stats(trace, window=window)
    summary = {
        "meta": trace.meta,
        "dims": trace.dims(),
        "window": list(window),
        "final_metrics": {
            name: float(series[-1].max()) for name, series in table.items()
        },
        "tail_sup": {
            name: float(series[analysis.window_mask(trace, window)].max())
            for name, series in table.items()
        },
        "event_counts": {
            f"family{fam}": stats["families"][fam]["count"]
            for fam in sorted(stats["families"])
        },
        "min_comm_savings": min(
            s["comm_savings"] for s in stats["machines"].values()
        ),
    }
    _dump_json(os.path.join(out_dir, "run_summary.json"), summary)
    return summary


def _cmd_synth(args):
    scenario = load_scenario(args)
    os.makedirs(args.out_dir, exist_ok=True)
    _dump_json(os.path.join(args.out_dir, "gains.json"),
               scenario.gains.to_dict())
    _dump_json(os.path.join(args.out_dir, "verification_report.json"),
               scenario.report.to_dict())
    summary = {
        "command": "synth",
        "gain_hash": scenario.gains.gain_hash(),
        "passed": scenario.report.passed,
        "network_margin": scenario.report.network["margin"],
        "outputs": [os.path.join(args.out_dir, "gains.json"),
                    os.path.join(args.out_dir, "verification_report.json")],
    }
    _emit(summary)
    return 0 if scenario.report.passed else 1


def _cmd_run(args):
    scenario = load_scenario(args)
    trace = simulator.run(scenario)
    summary = _write_run_artifacts(scenario, trace, args.out_dir)
    _emit({"command": "run", "out_dir": args.out_dir, **summary})
    return 0


def _cmd_analyze(args):
    meta_path = os.path.join(args.run_dir, "run_summary.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    gains = None
    gains_path = os.path.join(args.run_dir, "gains.json")
    if os.path.exists(gains_path):
        with open(gains_path) as fh:
            gains = synthesis.GainSet.from_dict(json.load(fh))
    trace = simulator.SimTrace.from_csv_dir(args.run_dir, meta, gains=gains)
    if args.bounds is None:
        bounds_doc = analysis.default_bounds()
    else:
        with open(args.bounds) as fh:
            bounds_doc = json.load(fh)
    window = analysis.tail_window(trace, bounds_doc.get("window_fraction", 0.2))
    table = analysis.metric_table(trace)
    report = analysis.uub_check(table, bounds_doc["bounds"], window, trace.t)
    _dump_json(os.path.join(args.run_dir, "analysis_report.json"), report)
    _emit({"command": "analyze", "run_dir": args.run_dir, **report})
    return 0 if report["passed"] else 1


def _cmd_compare(args):
    kappa = args.kappa if args.kappa is not None else 0.2
    sc_crm = load_scenario(args, overrides={"mode": "crm", "kappa": kappa})
    sc_orm = load_scenario(args, overrides={"mode": "orm", "kappa": 0.0})
    tr_crm = simulator.run(sc_crm)
    tr_orm = simulator.run(sc_orm)
    crm_dir = os.path.join(args.out_dir, "crm")
    orm_dir = os.path.join(args.out_dir, "orm")
    _write_run_artifacts(sc_crm, tr_crm, crm_dir)
    _write_run_artifacts(sc_orm, tr_orm, orm_dir)
    report = analysis.compare_crm_orm(tr_crm, tr_orm)
    _dump_json(os.path.join(args.out_dir, "comparison_report.json"), report)
    _emit({"command": "compare", "out_dir": args.out_dir, **report})
    return 0


def _sweep_one(payload):
    cfg, overrides, out_dir = payload
    scenario = scenario_from_config(cfg, overrides=overrides)
    trace = simulator.run(scenario)
    summary = _write_run_artifacts(scenario, trace, out_dir)
    return {"seed": scenario.seed, "out_dir": out_dir,
            "tail_sup": summary["tail_sup"]}


def _cmd_sweep(args):
    from concurrent.futures import ProcessPoolExecutor

    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = PRESETS[args.preset or "paper"]()
    seeds = [int(s) for s in args.seeds.split(",")]
    jobs = []
    for seed in seeds:
        out_dir = os.path.join(args.out_dir, f"seed{seed}")
        jobs.append((cfg, {"seed": seed}, out_dir))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(job) for job in jobs]
    _emit({"command": "sweep", "runs": results})
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="etconsensus",
        description=(
            "Gain synthesis and deterministic simulation of event-triggered "
            "leader-follower consensus under communication and actuator "
            "faults."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize and verify gains")
    _scenario_flags(p, with_sim_flags=False)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="simulate one scenario")
    _scenario_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("analyze", help="boundedness checks on a stored run")
    p.add_argument("--run-dir", dest="run_dir", required=True)
    p.add_argument("--bounds", default=None,
                   help="bounds JSON (defaults to the calibrated file)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("compare",
                       help="closed-loop vs open-loop reference model")
    _scenario_flags(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", help="fan out runs over seeds")
    _scenario_flags(p, with_sim_flags=False)
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    return parser


def run_command(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, simulator.DivergenceError,
            synthesis.SynthesisError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


def main():
    sys.exit(run_command())
