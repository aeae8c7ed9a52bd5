"""Command-line surface: benchmarks, live serving, offline replay, snapshots."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .audio import SAMPLE_RATE, iter_segments, read_audio
from .errors import DiarlError
from .rng import Rng
from .service import ServeOptions, SessionServer, replay
from .session import Session, SessionConfig

log = logging.getLogger("diarl")


def _setup_logging() -> None:
    level = os.environ.get("DIARL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _add_session_flags(parser: argparse.ArgumentParser, require_seed: bool = False) -> None:
    group = parser.add_argument_group("session")
    group.add_argument("--config", type=Path, help="JSON config file (SessionConfig shape)")
    group.add_argument("--policy", choices=["qlearning", "linucb", "berlinucb"])
    group.add_argument("--seed", type=int, required=require_seed)
    group.add_argument("--alpha", type=float)
    group.add_argument("--epsilon", type=float)
    group.add_argument("--gamma", type=float)
    group.add_argument("--eta", type=float)
    group.add_argument("--w-p", dest="w_p", type=float)
    group.add_argument("--tau-p", dest="tau_p", type=float)
    group.add_argument("--tau-s", dest="tau_s", type=float)
    group.add_argument("--feedback-window-s", dest="feedback_window_s", type=float)


def _session_config(args) -> SessionConfig:
    if args.config:
        config = SessionConfig.from_doc(json.loads(args.config.read_text(encoding="utf-8")))
    else:
        config = SessionConfig()
    overrides = {}
    for name in ("policy", "seed", "alpha", "epsilon", "gamma", "eta",
                 "w_p", "tau_p", "tau_s", "feedback_window_s"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return config.with_overrides(**overrides) if overrides else config


def _segments_from_file(path: Path, config: SessionConfig):
    samples = read_audio(path)
    return iter_segments(samples, config.features.segment_len_s,
                         config.features.segment_hop_s, SAMPLE_RATE)


def _cmd_bench_run(args) -> int:
    config = _session_config(args)
    if args.corpus:
        stream = bench.load_corpus(args.corpus, args.segments, seed=args.seed)
    else:
        stream = bench.generate_synthetic(n_speakers=args.speakers, d=args.dim,
                                          separation=args.separation,
                                          n_segments=args.segments, seed=args.seed)
    fp = bench.FeedbackPolicy(p=args.p, delay_s=args.delay_s)
    policy = args.baseline if args.baseline else config
    report = bench.run_benchmark(stream, policy, fp, reveal_seed=args.seed)
    print(report.to_json())
    return 0


def _cmd_bench_compare(args) -> int:
    base = _session_config(args)
    policies: list = []
    for name in args.policies.split(","):
        name = name.strip()
        if name in bench.BASELINES:
            policies.append(name)
        else:
            policies.append(base.with_overrides(policy=name))
    p_grid = [float(v) for v in args.p_grid.split(",")]
    seeds = list(range(args.seed, args.seed + args.n_seeds))
    spec = {"n_speakers": args.speakers, "d": args.dim,
            "separation": args.separation, "n_segments": args.segments}
    rows, summary = bench.compare_policies(policies, spec, p_grid, seeds,
                                           delay_s=args.delay_s)
    csv_text = bench.rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return 0


def _cmd_bench_gen(args) -> int:
    rng = Rng(args.seed)
    names = [f"S{i}" for i in range(args.speakers)]
    rows = []
    for _ in range(args.speakers):
        direction = np.array([rng.gauss() for _ in range(args.dim)])
        if args.separation > 0:
            centroid = direction / np.linalg.norm(direction) * args.separation
        else:
            centroid = np.zeros(args.dim)
        rows.append(np.stack([centroid + np.array([rng.gauss() for _ in range(args.dim)])
                              for _ in range(args.rows)]))
    bench.write_corpus(args.out, names, rows)
    print(f"wrote {args.speakers} speakers x {args.rows} rows to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    config = _session_config(args)
    if args.resume:
        session = Session.from_snapshot(json.loads(Path(args.resume).read_text(encoding="utf-8")))
    else:
        session = Session(config)
    host, _, port = args.listen.rpartition(":")
    server = SessionServer(session, host=host or "127.0.0.1", port=int(port),
                           transcript_path=args.transcript, checkpoint_path=args.checkpoint,
                           reward_log_path=args.reward_log)
    print(f"listening on {server.address[0]}:{server.address[1]}", file=sys.stderr)
    if args.stdin:
        raw = sys.stdin.buffer.read()
        samples = np.frombuffer(raw[: len(raw) // 2 * 2], dtype="<i2")
        segments = iter_segments(samples, config.features.segment_len_s,
                                 config.features.segment_hop_s, SAMPLE_RATE)
    else:
        segments = _segments_from_file(args.infile, config)
    options = ServeOptions(pace_s=None if args.realtime else args.pace_s,
                           linger_s=args.linger_s)
    server.run(segments, options)
    return 0


def _cmd_replay(args) -> int:
    config = _session_config(args)
    if args.resume:
        session = Session.from_snapshot(json.loads(Path(args.resume).read_text(encoding="utf-8")))
    else:
        session = Session(config)
    first_id = session.next_segment_id
    samples = read_audio(args.infile)
    hop = int(round(config.features.segment_hop_s * SAMPLE_RATE))
    segments = iter_segments(samples[first_id * hop:] if first_id else samples,
                             config.features.segment_len_s,
                             config.features.segment_hop_s, SAMPLE_RATE,
                             first_segment_id=first_id)
    script = None
    if args.feedback:
        script = [json.loads(line) for line
                  in Path(args.feedback).read_text(encoding="utf-8").splitlines()
                  if line.strip()]
    lines = replay(session, segments, feedback_script=script,
                   transcript_path=args.transcript,
                   dump_features_path=args.dump_features,
                   reward_log_path=args.reward_log)
    if args.transcript is None:
        sys.stdout.write("".join(line + "\n" for line in lines))
    if args.checkpoint:
        Path(args.checkpoint).write_text(session.snapshot_json(), encoding="utf-8")
    return 0


def _cmd_snapshot_inspect(args) -> int:
    doc = json.loads(Path(args.snapshot).read_text(encoding="utf-8"))
    summary = {
        "policy": doc["policy"]["kind"],
        "segments": doc["next_segment_id"],
        "stream_time": doc["stream_time"],
        "speakers": doc["registry"]["entries"],
        "transcript_count": doc["transcript"]["count"],
        "transcript_hash": doc["transcript"]["chain_hash"],
        "pending_feedback": len(doc["pending_feedback"]),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diarl",
        description="Online speaker diarization with bandit and Q-learning policies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="offline benchmarks on labeled streams")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)

    p_run = bench_sub.add_parser("run", help="run one policy over one stream")
    p_run.add_argument("--speakers", type=int, default=2)
    p_run.add_argument("--dim", type=int, default=8)
    p_run.add_argument("--separation", type=float, default=5.0)
    p_run.add_argument("--segments", type=int, default=2000)
    p_run.add_argument("--p", type=float, default=1.0)
    p_run.add_argument("--delay-s", dest="delay_s", type=float, default=0.0)
    p_run.add_argument("--corpus", type=Path, help="CSV corpus directory instead of synthetic")
    p_run.add_argument("--baseline", choices=list(bench.BASELINES),
                       help="run a reference baseline instead of a learning policy")
    _add_session_flags(p_run, require_seed=True)
    p_run.set_defaults(func=_cmd_bench_run)

    p_cmp = bench_sub.add_parser("compare", help="paired policy comparison")
    p_cmp.add_argument("--policies", required=True,
                       help="comma list, e.g. linucb,berlinucb,random")
    p_cmp.add_argument("--speakers", type=int, default=2)
    p_cmp.add_argument("--dim", type=int, default=8)
    p_cmp.add_argument("--separation", type=float, default=5.0)
    p_cmp.add_argument("--segments", type=int, default=2000)
    p_cmp.add_argument("--p-grid", dest="p_grid", default="0.1,1.0")
    p_cmp.add_argument("--n-seeds", dest="n_seeds", type=int, default=20)
    p_cmp.add_argument("--delay-s", dest="delay_s", type=float, default=0.0)
    p_cmp.add_argument("--out", type=Path, help="write the CSV here instead of stdout")
    _add_session_flags(p_cmp, require_seed=True)
    p_cmp.set_defaults(func=_cmd_bench_compare)

    p_gen = bench_sub.add_parser("gen", help="emit a synthetic CSV corpus")
    p_gen.add_argument("--speakers", type=int, default=2)
    p_gen.add_argument("--dim", type=int, default=8)
    p_gen.add_argument("--separation", type=float, default=5.0)
    p_gen.add_argument("--rows", type=int, default=200)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", type=Path, required=True)
    p_gen.set_defaults(func=_cmd_bench_gen)

    p_serve = sub.add_parser("serve", help="live session over a local socket")
    p_serve.add_argument("--in", dest="infile", type=Path,
                         help="PCM or WAV file to stream")
    p_serve.add_argument("--stdin", action="store_true",
                         help="read raw PCM from stdin instead of a file")
    p_serve.add_argument("--listen", default="127.0.0.1:3690")
    p_serve.add_argument("--transcript", type=Path)
    p_serve.add_argument("--checkpoint", type=Path)
    p_serve.add_argument("--reward-log", dest="reward_log", type=Path,
                         help="JSON-lines file of applied reward records")
    p_serve.add_argument("--resume", type=Path, help="resume from a snapshot file")
    p_serve.add_argument("--realtime", action=argparse.BooleanOptionalAction, default=True,
                         help="pace segments at the real segment hop")
    p_serve.add_argument("--pace-s", dest="pace_s", type=float, default=0.0,
                         help="per-segment pacing when not realtime")
    p_serve.add_argument("--linger-s", dest="linger_s", type=float, default=1.0)
    _add_session_flags(p_serve)
    p_serve.set_defaults(func=_cmd_serve)

    p_replay = sub.add_parser("replay", help="offline transcript from an audio file")
    p_replay.add_argument("--in", dest="infile", type=Path, required=True)
    p_replay.add_argument("--feedback", type=Path,
                          help="JSON-lines script: {after_segment, feedback|register_speaker}")
    p_replay.add_argument("--transcript", type=Path)
    p_replay.add_argument("--checkpoint", type=Path)
    p_replay.add_argument("--reward-log", dest="reward_log", type=Path,
                          help="JSON-lines file of applied reward records")
    p_replay.add_argument("--resume", type=Path)
    p_replay.add_argument("--dump-features", dest="dump_features", type=Path)
    _add_session_flags(p_replay)
    p_replay.set_defaults(func=_cmd_replay)

    p_snap = sub.add_parser("snapshot", help="checkpoint tooling")
    snap_sub = p_snap.add_subparsers(dest="snapshot_command", required=True)
    p_inspect = snap_sub.add_parser("inspect", help="summarize a snapshot file")
    p_inspect.add_argument("snapshot", type=Path)
    p_inspect.set_defaults(func=_cmd_snapshot_inspect)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if getattr(args, "func", None) is _cmd_serve and not (args.infile or args.stdin):
        parser.error("serve requires --in FILE or --stdin")
    try:
        return args.func(args)
    except DiarlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
