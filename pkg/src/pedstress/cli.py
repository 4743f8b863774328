"""Command-line entry points.

Verbs: simulate, process, annotate-serve, fit, report. Exit code is 0 only
when a run completes with zero hard failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import pandas as pd

from .lmm import LmmError, PanelDataset, emit_table, fit_lmm, load_model_spec, \
    render_table
from .pipeline import PipelineConfig, discover_bundles, run_pipeline, \
    serve_sessions, synthetic_cohort
from .simulator import ScenarioConfig, load_scenario_yaml, run_scenario, \
    save_events_csv, save_scenario_yaml, synthesize_eda
from .segmentation import save_trajectory_csv
from .signal import save_eda_csv


def _cmd_simulate(args) -> int:
    out = Path(args.out)
    if args.participants > 1 or args.sessions > 1:
        bundles = synthetic_cohort(args.participants, args.sessions,
                                   base_seed=args.seed, out_dir=out)
        print(f"wrote {len(bundles)} sessions to {out / 'sessions'}")
        return 0
    config = load_scenario_yaml(args.config) if args.config \
        else ScenarioConfig(seed=args.seed)
    if args.seed is not None:
        config = type(config)(**{**config.__dict__, "seed": args.seed})
    result = run_scenario(config)
    eda, truth = synthesize_eda(result.events, result.participant_id,
                                result.session_id, seed=config.seed,
                                t0=result.t0, duration_s=config.duration_s)
    sdir = out / "sessions" / result.session_id
    sdir.mkdir(parents=True, exist_ok=True)
    save_eda_csv(eda, sdir / "eda.csv")
    save_trajectory_csv(result.trajectory, sdir / "trajectory.csv")
    save_events_csv(result.events, sdir / "events.csv")
    save_scenario_yaml(config, sdir / "scenario.yaml")
    from .simulator import save_ground_truth_csv
    save_ground_truth_csv(truth, result.participant_id, result.session_id,
                          sdir / "ground_truth.csv", t0=result.t0)
    import yaml
    (sdir / "session.yaml").write_text(yaml.safe_dump(
        {"participant_id": result.participant_id,
         "session_id": result.session_id, "eda_rate_hz": 100.0,
         "t0": result.t0}, sort_keys=False), encoding="utf-8")
    print(f"wrote session {result.session_id} to {sdir}")
    return 0


def _cmd_process(args) -> int:
    config = PipelineConfig.from_yaml(args.config) if args.config \
        else PipelineConfig()
    bundles = discover_bundles(args.input)
    report = run_pipeline(bundles, config, out_dir=args.out)
    dropped = report.n_sessions_in - report.n_sessions_processed
    print(f"processed {report.n_sessions_processed}/{report.n_sessions_in} "
          f"sessions; report in {args.out}")
    if dropped:
        for q in report.quality_log:
            if q["status"] == "dropped":
                print(f"  dropped {q['session_id']}: {q['reason']}",
                      file=sys.stderr)
    return 1 if dropped else 0


def _cmd_annotate_serve(args) -> int:
    serve_sessions(args.report_dir, port=args.port, host=args.host)
    return 0


def _cmd_fit(args) -> int:
    factors, spec = load_model_spec(args.config)
    df = pd.read_csv(args.table)
    if args.response not in df.columns:
        print(f"no column {args.response!r} in {args.table}", file=sys.stderr)
        return 1
    frame = df.rename(columns={args.response: "response"})
    dataset = PanelDataset(frame, factors)
    try:
        fit = fit_lmm(dataset, spec)
    except LmmError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 1
    text = render_table(emit_table(fit, dataset, spec), "fitted mixed model")
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "model.txt").write_text(text + "\n",
                                                  encoding="utf-8")
    return 0 if fit.converged else 1


def _cmd_report(args) -> int:
    path = Path(args.report_dir) / "report.txt"
    if not path.exists():
        print(f"no report.txt under {args.report_dir}", file=sys.stderr)
        return 1
    sys.stdout.write(path.read_text(encoding="utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pedstress",
        description="pedestrian-stress EDA pipeline toolkit")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="generate synthetic sessions")
    p.add_argument("--config", help="scenario YAML")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--participants", type=int, default=1)
    p.add_argument("--sessions", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("process", help="run the processing pipeline")
    p.add_argument("input", help="directory holding sessions/")
    p.add_argument("--config", help="pipeline YAML")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_process)

    p = sub.add_parser("annotate-serve",
                       help="serve a processed report directory")
    p.add_argument("report_dir")
    p.add_argument("--port", type=int, default=8371)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_annotate_serve)

    p = sub.add_parser("fit", help="fit a mixed model from an SCR table")
    p.add_argument("table", help="CSV with participant_id and factors")
    p.add_argument("--config", required=True, help="model spec YAML")
    p.add_argument("--response", default="scr_t")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("report", help="print a saved report")
    p.add_argument("report_dir")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
