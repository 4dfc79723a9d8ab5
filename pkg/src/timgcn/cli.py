"""Command-line entry point: train, eval, gradcheck, ablate, synth.

Exit codes: 0 success, 2 validation error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import plotting
from .config import ConfigError, RunConfig, ablation_tim, digest, prepare_data
from .data import (SynthSpec, TrainWindow, center_root, check_horizons, load_motion_csv,
                   make_windows, ms_to_frames, save_motion_csv, synth_motion, trim_window)
from .linalg import NumericError
from .model import Model, ModelConfig
from .report import ResultTable, load_checkpoint, save_checkpoint, write_history
from .tim import PRESETS, embedding_dim
from .trainer import evaluate, grad_check, train, zero_velocity_eval

log = logging.getLogger("timgcn")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

TOY_MODEL = ModelConfig(K=6, T=5, tim=PRESETS["tim-toy"], hidden_dim=8, num_blocks=2)
MAX_GRADCHECK_PARAMS = 2000


def _label(cfg: ModelConfig) -> str:
    return f"{cfg.encoder}-gcn"


def cmd_train(run: RunConfig, out: Path) -> dict:
    """Train per ``run``; writes checkpoint, history, metrics, config echo and a loss figure."""
    t0 = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    data = prepare_data(run)
    mcfg = run.model_config(data.K)
    tcfg = run.train_config
    chash = run.config_hash()
    log.info("training %s: %d params, %d train / %d test windows", _label(mcfg),
             Model.init(mcfg).num_params, len(data.train), len(data.test))
    result = train(data.train, mcfg, tcfg)

    paths = {"checkpoint": out / "checkpoint.json", "history": out / "history.csv",
             "metrics": out / "metrics.csv", "config": out / "config.json", "figure": out / "loss.png"}
    save_checkpoint(result.model, paths["checkpoint"], run.to_dict(), chash, run.base_dir)
    write_history(result.history, paths["history"], chash)
    paths["config"].write_text(json.dumps(run.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    horizons = run.data["horizons_ms"]
    frames = run.horizon_frames(horizons)
    table = ResultTable(list(horizons))
    table.add(f"{_label(mcfg)} (train)", evaluate(result.model, data.train, frames))
    table.add(f"{_label(mcfg)} (test)", evaluate(result.model, data.test, frames))
    table.add("zero-velocity (test)", zero_velocity_eval(data.test, frames))
    table.metadata = {"seed": tcfg.seed, "config_hash": chash, "data_hash": data.digest(),
                      "wall_time_s": f"{time.perf_counter() - t0:.2f}"}
    table.write(paths["metrics"])
    plotting.plot_history(result.history, paths["figure"], title=f"{_label(mcfg)}  seed {tcfg.seed}")
    print(table.format())
    return {"paths": paths, "result": result, "table": table}


def _eval_windows(run: RunConfig, mcfg: ModelConfig, data_path, split: str):
    if data_path is None:
        data = prepare_data(run, mcfg.M_J)
        return (data.train if split == "train" else data.test), data.fps, data.digest()
    seq = load_motion_csv(data_path)
    if seq.K != mcfg.K:
        raise ConfigError([f"data K={seq.K} does not match checkpoint K={mcfg.K}"])
    if run.data.get("root_joint") is not None:
        seq = center_root(seq, run.data["root_joint"])
    windows = make_windows(seq, mcfg.M_J, mcfg.T, run.data["stride"])
    return windows, seq.fps, digest([w.target.tolist() for w in windows])


def cmd_eval(checkpoint: Path, out: Path, data_path=None, horizons_ms=None, split: str = "test") -> ResultTable:
    """Per-horizon errors for a checkpoint, with the zero-velocity baseline row."""
    t0 = time.perf_counter()
    model, doc = load_checkpoint(checkpoint)
    run = RunConfig.from_dict(doc["run"], doc.get("base_dir") or checkpoint.parent)
    windows, fps, dhash = _eval_windows(run, model.cfg, data_path, split)
    horizons = check_horizons(horizons_ms or run.data["horizons_ms"])
    frames = [ms_to_frames(h, fps) for h in horizons]
    bad = [f"{h} ms -> {f} frames exceeds T={model.cfg.T}" for h, f in zip(horizons, frames) if f > model.cfg.T]
    if bad:
        raise ConfigError(bad)
    table = ResultTable(list(horizons))
    table.add(_label(model.cfg), evaluate(model, windows, frames))
    table.add("zero-velocity", zero_velocity_eval(windows, frames))
    table.metadata = {"seed": run.train_config.seed, "config_hash": doc.get("config_hash"),
                      "data_hash": dhash, "split": split if data_path is None else str(data_path),
                      "windows": len(windows), "wall_time_s": f"{time.perf_counter() - t0:.2f}"}
    out.mkdir(parents=True, exist_ok=True)
    table.write(out / "eval.csv")
    plotting.plot_horizon_errors(table, out / "eval.png", title=f"{checkpoint.name}: {table.metadata['split']}")
    print(table.format())
    return table


def gradcheck_window(cfg: ModelConfig, seed: int) -> TrainWindow:
    target = np.random.default_rng([seed, 7]).normal(size=(cfg.K, cfg.M_J + cfg.T))
    return TrainWindow(target[:, :cfg.M_J].copy(), target)


def cmd_gradcheck(mcfg: ModelConfig = TOY_MODEL, seed: int = 0, tol: float = 1e-4, eps: float = 1e-5):
    model = Model.init(mcfg, seed)
    if model.num_params > MAX_GRADCHECK_PARAMS:
        raise ConfigError([f"model has {model.num_params} parameters; gradcheck is limited to "
                           f"{MAX_GRADCHECK_PARAMS} (shrink hidden_dim / num_blocks / TIM)"])
    res = grad_check(model, gradcheck_window(mcfg, seed), eps=eps, tol=tol)
    lines = [f"gradcheck: {res.num_params} parameters, eps={eps:g}, tol={tol:g}"]
    width = max(len(k) for k in res.per_group)
    lines += [f"  {name:<{width}}  max rel err {err:.3e}" for name, err in res.per_group.items()]
    lines.append(f"overall max rel err {res.max_rel_err:.3e}  {'PASS' if res.passed else 'FAIL'}")
    print("\n".join(lines))
    return res


def cmd_ablate(run: RunConfig, out: Path) -> ResultTable:
    """Train every configured TIM variant on the same windows and tabulate errors."""
    t0 = time.perf_counter()
    variants = run.raw["ablate"]["variants"]
    horizons = run.raw["ablate"]["horizons_ms"]
    tims = {v: ablation_tim(v) for v in variants}
    shared = prepare_data(run, max(t.M_J for t in tims.values()))
    frames = run.horizon_frames(horizons)
    tcfg = run.train_config
    base = dataclasses.replace(run.model_config(shared.K), encoder="tim", dct_frames=None)
    table = ResultTable(list(horizons))
    meta = {"seed": tcfg.seed, "config_hash": run.config_hash(), "data_hash": shared.digest()}
    ref = None
    for v, tim in tims.items():
        mcfg = dataclasses.replace(base, tim=tim)
        d = mcfg.to_dict()
        if ref is None:
            ref = d
        diff = sorted(k for k in d if d[k] != ref[k])
        if set(diff) - {"tim"}:
            raise RuntimeError(f"ablation variant {v} differs beyond the TIM: {diff}")
        train_w = [trim_window(w, tim.M_J) for w in shared.train]
        test_w = [trim_window(w, tim.M_J) for w in shared.test]
        log.info("ablation variant %s: D_E=%d", v, embedding_dim(tim))
        result = train(train_w, mcfg, tcfg)
        table.add(v, evaluate(result.model, test_w, frames))
        meta[f"D_E[{v}]"] = embedding_dim(tim)
        meta[f"diff[{v}]"] = "+".join(diff) or "none"
    prop = [np.mean(vals) for name, vals in table.rows if name.endswith("proportional")]
    const = [np.mean(vals) for name, vals in table.rows if name.endswith("constant")]
    if prop and const:
        meta["proportional_mean"] = f"{np.mean(prop):.4f}"
        meta["constant_mean"] = f"{np.mean(const):.4f}"
        meta["proportional_better_on_average"] = bool(np.mean(prop) <= np.mean(const))
    meta["wall_time_s"] = f"{time.perf_counter() - t0:.2f}"
    table.metadata = meta
    out.mkdir(parents=True, exist_ok=True)
    table.write(out / "ablation.csv")
    plotting.plot_grouped_bars(table, out / "ablation.png", title="TIM kernel-size / subsequence ablation")
    print(table.format())
    return table


def cmd_synth(spec_path: Path, out_path: Path, seed: int | None = None) -> Path:
    d = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    if seed is not None:
        d["seed"] = seed
    try:
        spec = SynthSpec.from_dict(d)
    except (KeyError, TypeError) as e:
        raise ConfigError([f"{spec_path}: {e}"]) from None
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_motion_csv(synth_motion(spec), out_path)
    print(f"wrote {spec.frames} frames x {3 * spec.joints} coordinates to {out_path}")
    return out_path


def _load_run(args) -> RunConfig:
    if not args.config:
        raise ConfigError(["--config is required for this command"])
    run = RunConfig.load(args.config)
    raw = run.to_dict()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.clip_norm is not None:
        overrides["clip_norm"] = args.clip_norm
    if overrides:
        raw["train"].update(overrides)
        run = RunConfig.from_dict(raw, run.base_dir)
    return run


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON (path or bundled name)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory (output file for synth)")
    common.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1)")
    common.add_argument("--tol", type=float, default=1e-4, help="gradcheck tolerance")
    common.add_argument("--clip-norm", type=float, help="clip the global gradient norm")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="timgcn", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train a model")
    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", help="motion CSV to evaluate on (default: the run's own split)")
    e.add_argument("--split", choices=["train", "test"], default="test")
    e.add_argument("--horizons", help="comma-separated horizons in ms")
    g = sub.add_parser("gradcheck", parents=[common], help="check analytic gradients")
    g.add_argument("--eps", type=float, default=1e-5)
    sub.add_parser("ablate", parents=[common], help="run the TIM ablation grid")
    s = sub.add_parser("synth", parents=[common], help="write synthetic motion CSV")
    s.add_argument("--spec", required=True, help="synthetic motion spec JSON")
    return p


def _dispatch(args) -> int:
    if args.command == "train":
        run = _load_run(args)
        cmd_train(run, Path(args.out) if args.out else run.out)
    elif args.command == "eval":
        horizons = [float(h) for h in args.horizons.split(",")] if args.horizons else None
        cmd_eval(Path(args.checkpoint), Path(args.out or Path(args.checkpoint).parent),
                 Path(args.data) if args.data else None, horizons, args.split)
    elif args.command == "gradcheck":
        if args.config:
            run = _load_run(args)
            mcfg = run.model_config(prepare_data(run).K)
            seed = run.train_config.seed
        else:
            mcfg, seed = TOY_MODEL, args.seed or 0
        res = cmd_gradcheck(mcfg, seed, args.tol, args.eps)
        return EXIT_OK if res.passed else EXIT_NUMERIC
    elif args.command == "ablate":
        run = _load_run(args)
        cmd_ablate(run, Path(args.out) if args.out else run.out / "ablation")
    elif args.command == "synth":
        if not args.out:
            raise ConfigError(["synth needs --out <file.csv>"])
        cmd_synth(Path(args.spec), Path(args.out), args.seed)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=args.threads):
            return _dispatch(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
