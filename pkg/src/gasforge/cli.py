"""Command line: ingest blocks, build datasets, train forecasters, run experiments and fee simulations."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .chain_ingest import IngestError, IngestSource, export_blocks, fetch_range, import_blocks, validate_chain
from .features import (
    BetaScaler, align_sentiment, build_windows, chronological_split, export_dataset,
    import_dataset, to_matrix,
)
from .fee_mechanism import MechanismParams, simulate_proactive, simulate_reactive
from .models import (
    DivergenceError, TrainConfig, chain_constraints, fit_model, fit_nam_monotonic, load_model, mse, save_model,
)
from .sentiment import (
    LexiconScorer, aggregate, export_series, import_scores, import_series, parse_chat_export,
    score_messages,
)

log = logging.getLogger("gasforge")


def _fmt(path: str) -> str:
    return "jsonl" if Path(path).suffix.lower() in (".jsonl", ".ndjson") else "csv"


def cmd_ingest(args) -> int:
    if args.rpc:
        if args.start is None or args.end is None or not args.out:
            raise SystemExit("--rpc needs --from, --to and --out")
        seq = fetch_range(args.rpc, args.start, args.end, width=args.width, batch_size=args.batch_size)
    else:
        seq = import_blocks(IngestSource.from_path(args.file))
    report = validate_chain(seq)
    if report:
        for f in report.findings:
            print(f"{f.kind}: {f.detail}", file=sys.stderr)
        return 1
    if args.out:
        export_blocks(seq, args.out, _fmt(args.out))
    span = f"{seq[0].block_number}..{seq[-1].block_number}" if len(seq) else "empty"
    print(f"{len(seq)} blocks ({span})")
    return 0


def cmd_featurize(args) -> int:
    ds = build_windows(import_blocks(args.blocks), args.k, ema_coefficient=args.ema)
    if args.hourly or args.daily:
        ds = align_sentiment(ds,
                             import_series(args.hourly) if args.hourly else None,
                             import_series(args.daily) if args.daily else None,
                             use_hour_sentiment=bool(args.hourly),
                             use_day_sentiment=bool(args.daily))
    export_dataset(ds, args.out)
    print(f"{len(ds)} windows (k={args.k}, dropped {ds.dropped} without preceding sentiment)")
    return 0


def cmd_sentiment(args) -> int:
    if args.scorer == "file":
        if not args.scores:
            raise SystemExit("--scorer file needs --scores <timestamp,p_pos,p_neg,p_neu csv>")
        scored = import_scores(args.scores)
    else:
        if not args.chat:
            raise SystemExit("--scorer lexicon needs --chat <export.json>")
        scored = []
        for path in args.chat:
            scored += score_messages(parse_chat_export(path), LexiconScorer())
    series = aggregate(scored, args.interval)
    export_series(series, args.out)
    print(f"{len(scored)} scores -> {len(series.buckets)} {args.interval} buckets")
    return 0


def _config(args) -> TrainConfig:
    overrides = json.loads(Path(args.config).read_text()) if getattr(args, "config", None) else {}
    overrides["seed"] = args.seed
    return TrainConfig(**overrides)


def _meta(path: str) -> Path:
    return Path(path + ".meta.json")


def cmd_train(args) -> int:
    ds = import_dataset(args.dataset)
    train, test = chronological_split(ds, args.train_fraction)
    scaler = BetaScaler.fit(train)
    Xtr, ytr = to_matrix(train, scaler)
    Xte, yte = to_matrix(test, scaler)
    cfg = _config(args)
    extra = {}
    if args.model == "nam-monotonic":
        res = fit_nam_monotonic(Xtr, ytr, cfg, chain_constraints(ds.k), k=ds.k)
        model = res.model
        extra = {"achieved_zero": res.achieved_zero, "violation": res.violation,
                 "initial_violation": res.initial_violation,
                 "unconstrained_test_mse": mse(res.unconstrained.predict(Xte), yte)}
        history = res.history
    else:
        model = fit_model(args.model, Xtr, ytr, cfg, ds.k)
        history = getattr(model, "history", [])
    save_model(model, args.out)
    meta = {"model_kind": args.model, "k": ds.k, "columns": ds.column_names(),
            "beta_mean": scaler.mean, "beta_std": scaler.std,
            "train_fraction": args.train_fraction, "config": cfg.to_dict(),
            "test_mse": mse(model.predict(Xte), yte), **extra}
    _meta(args.out).write_text(json.dumps(meta, indent=2))
    if args.loss_curve and history:
        bench.write_loss_curve(history, args.loss_curve)
    print(json.dumps({k: meta[k] for k in ("model_kind", "k", "test_mse")} | extra))
    return 0


def _load_trained(path: str):
    model = load_model(path)
    meta = json.loads(_meta(path).read_text()) if _meta(path).exists() else {}
    scaler = BetaScaler(meta.get("beta_mean", 0.0), meta.get("beta_std", 1.0))
    return model, scaler, meta


def cmd_evaluate(args) -> int:
    model, scaler, meta = _load_trained(args.model)
    ds = import_dataset(args.dataset)
    frac = args.train_fraction if args.train_fraction is not None else meta.get("train_fraction", 0.8)
    _, test = chronological_split(ds, frac)
    X, y = to_matrix(test, scaler)
    pred = model.predict(X)
    if args.out:
        bench.write_predictions(test.target_blocks, y, pred, args.out)
    print(json.dumps({"test_mse": mse(pred, y), "windows": len(test)}))
    return 0


def _matrix_specs(cfg) -> list[bench.ExperimentSpec]:
    if isinstance(cfg, list):
        return [bench.ExperimentSpec.from_dict(d) for d in cfg]
    if "specs" in cfg:
        return [bench.ExperimentSpec.from_dict(d) for d in cfg["specs"]]
    common = {k: v for k, v in cfg.items() if k not in ("periods", "ks")}
    return bench.study_grid(cfg["periods"], cfg.get("ks", (3, 2, 1)), **common)


def cmd_matrix(args) -> int:
    specs = _matrix_specs(json.loads(Path(args.config).read_text()))
    rows = bench.run_matrix(specs, workers=args.workers)
    bench.emit_report(rows, args.out, args.format)
    print(bench.render_markdown(rows), end="")
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"FAILED {r.period} k={r.k} {r.settings}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def _sim_config(path: str) -> dict:
    cfg = json.loads(Path(path).read_text())
    cfg["mechanism"] = MechanismParams.from_dict(cfg.get("mechanism", {}))
    return cfg


def _predictor(spec, params):
    if isinstance(spec, dict) and "model" in spec:
        model, scaler, meta = _load_trained(spec["model"])
        return bench.ModelPredictor(model, spec.get("k", meta.get("k", 1)), scaler)
    return bench.make_predictor(spec, params)


def cmd_simulate(args) -> int:
    cfg = _sim_config(args.params)
    params = cfg["mechanism"]
    initial = int(cfg.get("initial_fee", 10**9))
    horizon = cfg.get("horizon")
    if args.mode == "reactive" and cfg.get("blocks"):
        traj = simulate_reactive(import_blocks(cfg["blocks"]), params, initial, horizon)
    else:
        horizon = int(horizon or 200)
        demand = bench.DemandSpec(**cfg.get("demand", {})).build(horizon, initial)
        if args.mode == "reactive":
            traj = simulate_reactive(demand, params, initial)
        else:
            traj = simulate_proactive(demand, _predictor(cfg.get("predictor", "perfect"), params),
                                      params, horizon, initial)
    traj.export_csv(args.out)
    loads = np.abs(traj.loads)
    print(json.dumps({"blocks": len(traj), "mean_abs_load": float(loads.mean()),
                      "final_fee": traj.base_fees[-1]}))
    return 0


def cmd_compare(args) -> int:
    cfg = _sim_config(args.params)
    params = cfg["mechanism"]
    rep = bench.compare_mechanisms(
        bench.DemandSpec(**cfg.get("demand", {})),
        _predictor(cfg.get("predictor", "perfect"), params),
        params, int(cfg.get("horizon", 200)), int(cfg.get("initial_fee", 10**9)))
    text = json.dumps(rep.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text)
    if args.trajectories:
        out = Path(args.trajectories)
        out.mkdir(parents=True, exist_ok=True)
        rep.reactive_trajectory.export_csv(out / "reactive.csv")
        rep.proactive_trajectory.export_csv(out / "proactive.csv")
    print(text)
    return 0


def cmd_report(args) -> int:
    rows = bench.load_report(args.input)
    bench.emit_report(rows, args.out, args.format)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gasforge", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="fetch or import block headers")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--rpc", help="JSON-RPC endpoint URL")
    src.add_argument("--file", help="CSV or JSONL block file to validate")
    s.add_argument("--from", dest="start", type=int)
    s.add_argument("--to", dest="end", type=int)
    s.add_argument("--out")
    s.add_argument("--width", type=int, default=4, help="parallel batches in flight")
    s.add_argument("--batch-size", type=int, default=100)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("featurize", help="build k-lag windows")
    s.add_argument("--blocks", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--hourly")
    s.add_argument("--daily")
    s.add_argument("--ema", type=float, help="optional EMA coefficient applied to alpha")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("sentiment", help="score and aggregate chat sentiment")
    s.add_argument("--chat", nargs="+", help="DiscordChatExporter JSON file(s)")
    s.add_argument("--scores", help="precomputed score CSV (with --scorer file)")
    s.add_argument("--scorer", choices=("lexicon", "file"), default="lexicon")
    s.add_argument("--interval", choices=("hour", "day"), required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sentiment)

    s = sub.add_parser("train", help="train a forecaster on a featurized dataset")
    s.add_argument("--dataset", required=True)
    s.add_argument("--model", default="nam")
    s.add_argument("--train-fraction", type=float, default=0.8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config", help="JSON TrainConfig overrides")
    s.add_argument("--loss-curve", help="write per-epoch loss CSV here")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="test-split MSE and prediction-vs-actual data")
    s.add_argument("--model", required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--train-fraction", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("matrix", help="run an experiment matrix")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("csv", "json", "markdown"), default="csv")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_matrix)

    s = sub.add_parser("simulate", help="simulate the base-fee mechanism")
    s.add_argument("--mode", choices=("reactive", "proactive"), required=True)
    s.add_argument("--params", required=True, help="JSON simulation config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="reactive vs proactive on the same demand")
    s.add_argument("--params", required=True)
    s.add_argument("--out")
    s.add_argument("--trajectories", help="directory for both trajectory CSVs")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("report", help="re-render a report file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--format", choices=("csv", "json", "markdown"), default="markdown")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IngestError, ValueError, OSError, DivergenceError, np.linalg.LinAlgError) as e:
        print(f"gasforge {args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
