"""Command-line front end: teleop <synth|train|eval|run|compare|analyze-wrist>.

Every subcommand accepts --config (JSON, merged over built-in defaults),
--seed (overrides the config seed), and --out. Output files embed the hash
of the resolved config that produced them. Exit code is 0 on success;
failures print a single-line error to stderr and exit nonzero. Set
TELEOP_LOG to error, info, or debug to control logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from emg_teleop import harness, synth
from emg_teleop.harness import HarnessError


def _setup_logging():
    level = os.environ.get("TELEOP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise HarnessError(f"TELEOP_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s")


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", default=None, help="output directory (created if absent)")


def _load_cfg(args, extra: dict | None = None) -> dict:
    overrides: dict = dict(extra or {})
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    return harness.load_config(args.config, overrides)


def _outdir(cfg: dict) -> str:
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    spec = synth.SessionSpec(
        duration_s=args.duration,
        sample_rate_hz=args.rate,
        gesture_interval_s=args.interval,
        noise_std=args.noise,
        seed=cfg["seed"],
        label_scheme=args.scheme,
    )
    session = synth.generate_session(spec)
    out_path = args.session_out
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    synth.save_session(session, out_path)
    print(f"wrote {out_path} ({len(session)} samples, scheme={args.scheme})")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args, {"method": args.method})
    if not cfg["train_session"]:
        raise HarnessError("config must set train_session")
    art = harness.train_method(cfg)
    written = harness.save_artifacts(art, _outdir(cfg), harness.config_hash(cfg))
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args, {"method": args.method})
    out = _outdir(cfg)
    art = harness.load_artifacts(out, int(cfg["method"]))
    report = harness.evaluate(cfg, art)
    text = report.render()
    cfg_hash = harness.config_hash(cfg)
    txt_path = os.path.join(out, f"method{report.method}_report.txt")
    json_path = os.path.join(out, f"method{report.method}_report.json")
    with open(txt_path, "w") as f:
        f.write(f"# config_hash={cfg_hash}\n")
        f.write(text)
    doc = report.to_doc()
    doc["config_hash"] = cfg_hash
    with open(json_path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    print(text)
    print(f"wrote {txt_path}")
    print(f"wrote {json_path}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_cfg(args, {"method": args.method})
    out = _outdir(cfg)
    art = harness.load_artifacts(out, int(cfg["method"]))
    session = synth.load_session(args.session)
    points = harness.run_trajectory(cfg, art, session)
    traj_path = args.trajectory_out or os.path.join(out, f"method{cfg['method']}_trajectory.csv")
    harness.write_trajectory(points, traj_path, harness.config_hash(cfg))
    print(f"wrote {traj_path} ({len(points)} samples)")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    session = synth.load_session(args.session)
    cfg_hash = harness.config_hash(cfg)
    rows = []
    for method in (1, 2, 4):
        art = harness.load_artifacts(out, method)
        mcfg = dict(cfg, method=method)
        points = harness.run_trajectory(mcfg, art, session)
        stats = harness.trajectory_stats(points)
        rows.append((method, stats))
    lines = ["Per-method trajectory statistics", ""]
    header = f"{'method':<8}{'samples':>9}{'sigma variance':>16}{'clamp count':>13}{'stall count':>13}"
    lines += [header, "-" * len(header)]
    for method, stats in rows:
        lines.append(
            f"{method:<8}{stats['n_samples']:>9}{stats['sigma_variance']:>16.6g}"
            f"{stats['clamp_count']:>13}{stats['stall_count']:>13}"
        )
    text = "\n".join(lines) + "\n"
    path = os.path.join(out, "method_comparison.txt")
    with open(path, "w") as f:
        f.write(f"# config_hash={cfg_hash}\n")
        f.write(text)
    json_path = os.path.join(out, "method_comparison.json")
    with open(json_path, "w") as f:
        json.dump({"config_hash": cfg_hash, "stats": {m: s for m, s in rows}}, f, indent=2)
        f.write("\n")
    print(text)
    print(f"wrote {path}")
    return 0


def cmd_analyze_wrist(args) -> int:
    cfg = _load_cfg(args)
    session = synth.load_session(args.session)
    analysis = harness.analyze_wrist(cfg, session)
    text = harness.render_wrist_analysis(analysis)
    out = _outdir(cfg)
    path = os.path.join(out, "wrist_analysis.txt")
    with open(path, "w") as f:
        f.write(f"# config_hash={harness.config_hash(cfg)}\n")
        f.write(text)
    print(text)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teleop",
        description="EMG teleoperation benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic session")
    _common_flags(p)
    p.add_argument("--duration", type=float, default=120.0, help="session length in seconds")
    p.add_argument("--rate", type=float, default=200.0, help="sample rate in Hz")
    p.add_argument("--interval", type=float, default=30.0, help="gesture prompt interval in seconds")
    p.add_argument("--noise", type=float, default=0.05, help="channel noise standard deviation")
    p.add_argument("--scheme", choices=[synth.GESTURE_SCHEME, synth.POSE_SCHEME, synth.WRIST_SCHEME],
                   default=synth.GESTURE_SCHEME, help="label schedule to generate")
    p.add_argument("--session-out", required=True, help="session file to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the configured method's models")
    _common_flags(p)
    p.add_argument("--method", type=int, choices=[1, 2, 4], default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate trained models on test sessions")
    _common_flags(p)
    p.add_argument("--method", type=int, choices=[1, 2, 4], default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="run a controller over a session")
    _common_flags(p)
    p.add_argument("--method", type=int, choices=[1, 2, 4], default=None)
    p.add_argument("--session", required=True, help="session file to stream")
    p.add_argument("--trajectory-out", default=None, help="trajectory CSV to write")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run methods 1, 2, 4 on one session and tabulate")
    _common_flags(p)
    p.add_argument("--session", required=True, help="session file to stream")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze-wrist", help="Method-3 wrist-axis variance analysis")
    _common_flags(p)
    p.add_argument("--session", required=True, help="wrist-labeled session file")
    p.set_defaults(func=cmd_analyze_wrist)
    return parser


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (HarnessError, synth.SessionFormatError, ValueError, OSError, KeyError) as e:
        msg = str(e).replace("\n", " ")
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
