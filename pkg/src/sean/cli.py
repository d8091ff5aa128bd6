"""Operator surface.

Subcommands:
  generate  write a seeded synthetic world
  run       stream one configuration end to end, emitting reports + summary
  sweep     grid over one hyper-parameter (L, B, lambda, h, K, r)
  bench     wall-clock scaling table against L or B
  report    aggregate summaries from prior runs into one CSV

Flags mirror config-file keys; a config file is flat `key = value` lines and
explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import corpus, synth, trainer

STRATEGY_CHOICES = ("rs-f1", "spr", "dpr", "payout", "random-select", "random-walk")
SWEEP_PARAMS = ("L", "B", "lambda", "h", "K", "r")
BENCH_PARAMS = ("L", "B")

# config-file key -> (RunConfig field, type)
_CONFIG_KEYS = {
    "days": ("days", int),
    "epochs_per_day": ("epochs_per_day", int),
    "batch_size": ("batch_size", int),
    "lr": ("lr", float),
    "B": ("beam_width", int),
    "L": ("depth", int),
    "lambda": ("lam", float),
    "strategy": ("strategy", str),
    "seed": ("seed", int),
    "threshold": ("threshold", float),
    "split_ratio": ("split_ratio", float),
    "h": ("hidden", int),
    "r": ("filters", int),
    "dropout": ("dropout", float),
    "init_mode": ("init_mode", str),
    "neg_cap_per_user_day": ("neg_cap_per_user_day", int),
    "payout_window_days": ("payout_window_days", int),
    "epochs": ("epochs_per_day", int),
    "max_sentences": ("max_sentences", int),
    "max_tokens": ("max_tokens", int),
}


def _parse_config_file(path: Path) -> dict:
    updates: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected `key = value`")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "K":
            updates["windows"] = tuple(range(1, int(value) + 1))
        elif key == "windows":
            updates["windows"] = tuple(int(v) for v in value.split(","))
        elif key == "warm_start":
            updates["warm_start"] = value.lower() in ("1", "true", "yes")
        elif key in ("data", "out"):
            updates[key] = value
        elif key in _CONFIG_KEYS:
            field, typ = _CONFIG_KEYS[key]
            updates[field] = typ(value)
        else:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    return updates


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--days", type=int)
    p.add_argument("--epochs-per-day", type=int, dest="epochs_per_day")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--B", type=int, dest="beam_width")
    p.add_argument("--L", type=int, dest="depth")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--strategy", choices=STRATEGY_CHOICES)
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--split-ratio", type=float, dest="split_ratio")
    p.add_argument("--h", type=int, dest="hidden")
    p.add_argument("--r", type=int, dest="filters")
    p.add_argument("--K", type=int, dest="n_kernels", help="use windows 1..K")
    p.add_argument("--windows", help="comma-separated CNN window sizes")
    p.add_argument("--dropout", type=float)
    p.add_argument("--init-mode", choices=("random_select", "random_walk"), dest="init_mode")
    p.add_argument("--neg-cap-per-user-day", type=int, dest="neg_cap_per_user_day")
    p.add_argument("--payout-window-days", type=int, dest="payout_window_days")
    p.add_argument("--max-sentences", type=int, dest="max_sentences")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--cold-start", action="store_true", help="re-initialize parameters daily")
    p.add_argument("--resume-state", dest="resume_state", help="explorer checkpoint to warm-restart from")
    p.add_argument("--no-social", action="store_true", help="self embedding only, no friends")
    p.add_argument("--no-social-attention", action="store_true", help="mean of friend vectors")
    p.add_argument("--one-hop", action="store_true", help="direct neighbors instead of explored paths")
    p.add_argument("--no-cnn", action="store_true", help="mean word embeddings instead of CNN features")
    p.add_argument("--no-gru", action="store_true", help="identity pass-through instead of BiGRU")


def build_run_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> trainer.RunConfig:
    """Resolve defaults < config file < explicit flags into a RunConfig."""
    config = trainer.RunConfig()
    if args.config:
        updates = _parse_config_file(Path(args.config))
        args.data = args.data or updates.pop("data", None)
        args.out = args.out or updates.pop("out", None)
        config = replace(config, **updates)

    exclusive = [name for name, on in (
        ("--no-social", args.no_social),
        ("--no-social-attention", args.no_social_attention),
        ("--one-hop", args.one_hop),
    ) if on]
    if len(exclusive) > 1:
        parser.error(f"conflicting flags: {' and '.join(exclusive)}")
    if args.no_social and args.strategy is not None:
        parser.error("--no-social disables exploration; --strategy conflicts with it")

    simple = (
        "days", "epochs_per_day", "batch_size", "lr", "beam_width", "depth", "lam",
        "strategy", "seed", "threshold", "split_ratio", "hidden", "filters", "dropout",
        "init_mode", "neg_cap_per_user_day", "payout_window_days", "max_sentences",
        "max_tokens", "resume_state",
    )
    updates = {k: getattr(args, k) for k in simple if getattr(args, k) is not None}
    if args.n_kernels is not None and args.windows is not None:
        parser.error("conflicting flags: --K and --windows")
    if args.n_kernels is not None:
        updates["windows"] = tuple(range(1, args.n_kernels + 1))
    elif args.windows is not None:
        updates["windows"] = tuple(int(v) for v in args.windows.split(","))
    if args.no_social:
        updates["social"] = "none"
    elif args.no_social_attention:
        updates["social"] = "mean"
    if args.one_hop:
        updates["one_hop"] = True
    if args.no_cnn:
        updates["use_cnn"] = False
    if args.no_gru:
        updates["use_gru"] = False
    if args.cold_start:
        updates["warm_start"] = False
    config = replace(config, **updates)
    config.validate()
    return config


def _load_world(args, config: trainer.RunConfig) -> corpus.World:
    if not args.data:
        raise FileNotFoundError("no dataset directory given (--data)")
    data_dir = Path(args.data)
    if not data_dir.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {data_dir}")
    return corpus.load_world(data_dir, config.max_sentences, config.max_tokens)


def _parse_values(spec: str, as_float: bool):
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return [float(v) if as_float else v for v in range(int(lo), int(hi) + 1)]
    conv = float if as_float else int
    return [conv(v) for v in spec.split(",")]


def _apply_sweep_value(config: trainer.RunConfig, param: str, value) -> trainer.RunConfig:
    if param == "L":
        return replace(config, depth=int(value))
    if param == "B":
        return replace(config, beam_width=int(value))
    if param == "lambda":
        return replace(config, lam=float(value))
    if param == "h":
        return replace(config, hidden=int(value))
    if param == "K":
        return replace(config, windows=tuple(range(1, int(value) + 1)))
    if param == "r":
        return replace(config, filters=int(value))
    raise ValueError(f"unknown sweep parameter {param!r}")


def _cmd_generate(args) -> int:
    cfg = synth.WorldConfig(
        n_consumers=args.consumers,
        n_creators=args.creators,
        n_days=args.days,
        topics=args.topics,
        homophily=args.homophily,
        docs_per_day=args.docs_per_day,
        embed_dim=args.embed_dim,
        seed=args.seed,
    )
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        if not hasattr(cfg, key):
            raise ValueError(f"unknown world config key {key!r}")
        current = getattr(cfg, key)
        if isinstance(current, tuple):
            setattr(cfg, key, tuple(int(v) for v in value.split(",")))
        else:
            setattr(cfg, key, type(current)(value))
    meta = synth.generate_world(cfg, args.out)
    print(f"world written to {args.out}: {json.dumps(meta['stats'], sort_keys=True)}")
    return 0


def _cmd_run(args, parser) -> int:
    config = build_run_config(args, parser)
    world = _load_world(args, config)
    out_dir = Path(args.out) if args.out else None
    reports, summary = trainer.run_stream(world, config, out_dir)
    print(json.dumps(summary, sort_keys=True))
    if out_dir:
        print(f"artifacts written to {out_dir}")
    return 0


def _cmd_sweep(args, parser) -> int:
    base = build_run_config(args, parser)
    values = _parse_values(args.values, as_float=(args.param == "lambda"))
    world = _load_world(args, base)
    out_dir = Path(args.out) if args.out else Path("sweep_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        config = _apply_sweep_value(base, args.param, value)
        point_dir = out_dir / f"point_{args.param}_{value}"
        start = time.perf_counter()
        _, summary = trainer.run_stream(world, config, point_dir)
        elapsed = time.perf_counter() - start
        rows.append((value, summary, elapsed))
        print(f"{args.param}={value}: f1={summary['avg_f1']} gini={summary['gini_cumulative']}")
    cfg_line = json.dumps(base.to_dict(), sort_keys=True)
    with open(out_dir / "sweep.csv", "w") as fh:
        fh.write(f"# config: {cfg_line}\n")
        fh.write("param,value,avg_auc,avg_f1,avg_gini_daily,gini_cumulative,cc_stream,seconds\n")
        for value, summary, elapsed in rows:
            fh.write(
                f"{args.param},{value},{trainer._fmt(summary['avg_auc'])},"
                f"{trainer._fmt(summary['avg_f1'])},{trainer._fmt(summary['avg_gini_daily'])},"
                f"{trainer._fmt(summary['gini_cumulative'])},{trainer._fmt(summary['cc_stream'])},"
                f"{elapsed!r}\n"
            )
    print(f"sweep table written to {out_dir / 'sweep.csv'}")
    return 0


def _cmd_bench(args, parser) -> int:
    base = build_run_config(args, parser)
    if base.days is None:
        base = replace(base, days=2)
    values = _parse_values(args.values, as_float=False)
    world = _load_world(args, base)
    out_dir = Path(args.out) if args.out else Path("bench_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        config = _apply_sweep_value(base, args.param, value)
        start = time.perf_counter()
        trainer.run_stream(world, config, out_dir=None)
        elapsed = time.perf_counter() - start
        rows.append((value, elapsed))
        print(f"{args.param}={value}: {elapsed:.3f}s")
    cfg_line = json.dumps(base.to_dict(), sort_keys=True)
    with open(out_dir / "bench.csv", "w") as fh:
        fh.write(f"# config: {cfg_line}\n")
        fh.write("param,value,seconds\n")
        for value, elapsed in rows:
            fh.write(f"{args.param},{value},{elapsed!r}\n")
    print(f"bench table written to {out_dir / 'bench.csv'}")
    return 0


def _cmd_report(args) -> int:
    rows = []
    for run_dir in args.runs:
        summary_path = Path(run_dir) / "summary.csv"
        if not summary_path.exists():
            raise FileNotFoundError(f"missing summary: {summary_path}")
        lines = summary_path.read_text().splitlines()
        cfg = json.loads(lines[0].removeprefix("# config: "))
        header = lines[1].split(",")
        values = lines[2].split(",")
        summary = dict(zip(header, values))
        rows.append((str(run_dir), cfg, summary))
    cols = ["run", "strategy", "social", "one_hop", "seed", "avg_auc", "avg_f1",
            "avg_gini_daily", "gini_cumulative", "cc_stream"]
    out = Path(args.out) if args.out else None
    lines = [",".join(cols)]
    for run, cfg, summary in rows:
        lines.append(",".join([
            run, cfg["strategy"], cfg["social"], str(cfg["one_hop"]), str(cfg["seed"]),
            summary.get("avg_auc", ""), summary.get("avg_f1", ""),
            summary.get("avg_gini_daily", ""), summary.get("gini_cumulative", ""),
            summary.get("cc_stream", ""),
        ]))
    text = "\n".join(lines) + "\n"
    if out:
        out.write_text(text)
        print(f"combined report written to {out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sean", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="write a seeded synthetic world")
    g.add_argument("--out", required=True)
    g.add_argument("--consumers", type=int, default=300)
    g.add_argument("--creators", type=int, default=200)
    g.add_argument("--days", type=int, default=20)
    g.add_argument("--topics", type=int, default=4)
    g.add_argument("--homophily", type=float, default=0.8)
    g.add_argument("--docs-per-day", type=int, default=12, dest="docs_per_day")
    g.add_argument("--embed-dim", type=int, default=16, dest="embed_dim")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--set", action="append", help="extra world-config key=value")

    r = sub.add_parser("run", help="run one streaming configuration")
    _add_run_flags(r)

    s = sub.add_parser("sweep", help="grid over one hyper-parameter")
    _add_run_flags(s)
    s.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    s.add_argument("--values", required=True, help="e.g. 2..10 or 5,10,15")

    b = sub.add_parser("bench", help="wall-clock scaling against L or B")
    _add_run_flags(b)
    b.add_argument("--param", required=True, choices=BENCH_PARAMS)
    b.add_argument("--values", required=True)

    p = sub.add_parser("report", help="aggregate run summaries")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "generate":
            return _cmd_generate(args)
        if args.verb == "run":
            return _cmd_run(args, parser)
        if args.verb == "sweep":
            return _cmd_sweep(args, parser)
        if args.verb == "bench":
            return _cmd_bench(args, parser)
        if args.verb == "report":
            return _cmd_report(args)
        parser.error(f"unknown verb {args.verb!r}")
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
