"""Acceptance checks. Each test is tagged with the criterion it covers; the
conftest summary prints one PASS/FAIL line per criterion."""

import dataclasses
import json
import subprocess
import sys
import time

import numpy as np
import pytest
from helpers import random_tim_config

from timgcn.cli import TOY_MODEL, cmd_gradcheck, main
from timgcn.config import ABLATION_VARIANTS
from timgcn.data import SynthSpec, dct2, idct, make_windows, synth_motion
from timgcn.model import Model, forward, predict
from timgcn.report import ResultTable, read_history
from timgcn.tim import PRESETS, embedding_dim, init_tim_params, tim_forward
from timgcn.trainer import TrainConfig, mpjpe_train_loss, train

criterion = pytest.mark.criterion

SKILL_RUN = {
    "model": {"tim": "tim-5-10", "hidden_dim": 64, "num_blocks": 4},
    "train": {"epochs": 50, "batch_size": 16, "lr0": 5e-4, "decay": 0.96, "decay_every": 2, "seed": 0},
    "data": {"synth": {"joints": 4, "fps": 25, "duration": 80, "n_components": 2, "noise_std": 0.0, "seed": 0},
             "T": 25, "horizons_ms": [80, 160, 320, 400]},
}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture(scope="module")
def skill_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("skill")
    cfg = write_json(root / "run.json", SKILL_RUN)
    t0 = time.perf_counter()
    code = main(["train", "--config", str(cfg), "--out", str(root / "out"), "--threads", "1"])
    return code, root / "out", time.perf_counter() - t0


@criterion(1, "embedding size 223 for the two-branch preset; realized length matches formula")
def test_embedding_arithmetic():
    assert embedding_dim(PRESETS["tim-5-10"]) == 223
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    for _ in range(1000):
        cfg = random_tim_config(rng)
        out = tim_forward(rng.normal(size=cfg.M_J), cfg, init_tim_params(cfg, rng))
        assert out.shape == (embedding_dim(cfg),)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"{elapsed:.2f} s"


@criterion(2, "end-to-end gradients match central differences, max rel err < 1e-4")
def test_gradient_correctness():
    assert (TOY_MODEL.K, TOY_MODEL.M_J, TOY_MODEL.T, TOY_MODEL.hidden_dim, TOY_MODEL.num_blocks) == (6, 10, 5, 8, 2)
    t0 = time.perf_counter()
    res = cmd_gradcheck(TOY_MODEL, seed=0, tol=1e-4, eps=1e-5)
    elapsed = time.perf_counter() - t0
    print(f"max rel err {res.max_rel_err:.3e} over {res.num_params} params in {elapsed:.2f} s")
    assert res.num_params <= 2000
    assert res.passed, res.per_group
    assert elapsed < 60


@criterion(3, "zero output layer: every predicted frame equals the last observed frame bit-exactly")
def test_residual_at_init():
    for encoder in ("tim", "dct"):
        cfg = dataclasses.replace(TOY_MODEL, zero_output_init=True, encoder=encoder,
                                  tim=TOY_MODEL.tim if encoder == "tim" else None,
                                  dct_frames=None if encoder == "tim" else 10)
        model = Model.init(cfg, seed=0)
        X = np.random.default_rng(1).normal(scale=300, size=(8, 6, 10))
        pred = predict(X, model)
        assert np.array_equal(pred, np.repeat(X[..., -1:], cfg.M_J + cfg.T, axis=-1))


@criterion(4, "single-window overfit: 500 steps cut the training loss by >= 99%")
def test_overfit_single_window():
    seq = synth_motion(SynthSpec.random(2, 25.0, 2.0, n_components=2, seed=0))
    window = make_windows(seq, TOY_MODEL.M_J, TOY_MODEL.T)[0]
    model = Model.init(TOY_MODEL, seed=0)
    initial = mpjpe_train_loss(forward(model, window.input[None])[0], window.target[None])
    t0 = time.perf_counter()
    result = train([window], TOY_MODEL, TrainConfig(epochs=500, batch_size=1, lr0=5e-3, decay=1.0, seed=0))
    elapsed = time.perf_counter() - t0
    final = mpjpe_train_loss(forward(result.model, window.input[None])[0], window.target[None])
    print(f"loss {initial:.4g} -> {final:.4g} ({1 - final / initial:.4%} reduction) in {elapsed:.2f} s")
    assert final <= 0.01 * initial
    assert elapsed < 60


@criterion(5, "synthetic forecasting: mean error at 80-400 ms >= 30% below zero-velocity")
@pytest.mark.slow
def test_forecasting_skill(skill_run):
    code, out, elapsed = skill_run
    assert code == 0
    table = ResultTable.read(out / "metrics.csv")
    model = np.mean(table.row("tim-gcn (test)"))
    zero = np.mean(table.row("zero-velocity (test)"))
    print(f"model {model:.3f} vs zero-velocity {zero:.3f} (ratio {model / zero:.3f}) in {elapsed:.1f} s")
    assert model <= 0.7 * zero
    assert elapsed < 300


@criterion(6, "ablation CSV over four variants with shared data; larger TIM for 5-10-15")
@pytest.mark.slow
def test_ablation_harness(tmp_path):
    run = json.loads(json.dumps(SKILL_RUN))
    run["train"]["epochs"] = 3
    run["ablate"] = {"horizons_ms": [560, 1000]}
    cfg = write_json(tmp_path / "run.json", run)
    assert main(["ablate", "--config", str(cfg), "--out", str(tmp_path / "abl")]) == 0
    table = ResultTable.read(tmp_path / "abl" / "ablation.csv")
    assert [r for r, _ in table.rows] == list(ABLATION_VARIANTS)
    assert table.columns == ["560", "1000"]
    assert all(np.isfinite(v).all() for _, v in table.rows)
    meta = table.metadata
    for v in ABLATION_VARIANTS:
        assert meta[f"diff[{v}]"] in ("none", "tim")
    assert int(meta["D_E[5-10-15 proportional]"]) > int(meta["D_E[5-10 proportional]"])
    assert int(meta["D_E[5-10-15 constant]"]) > int(meta["D_E[5-10 constant]"])
    assert len(meta["data_hash"]) == 16
    # reported, not gated
    print(f"proportional mean {meta['proportional_mean']}, constant mean {meta['constant_mean']}, "
          f"proportional better on average: {meta['proportional_better_on_average']}")
    assert (tmp_path / "abl" / "ablation.png").exists()


@criterion(7, "DCT round trip and norm preservation < 1e-9 on length-10 vectors")
def test_dct_baseline():
    rng = np.random.default_rng(0)
    X = rng.normal(scale=100, size=(1000, 10))
    C = dct2(X)
    assert np.abs(idct(C) - X).max() < 1e-9
    assert np.abs(np.linalg.norm(C, axis=-1) - np.linalg.norm(X, axis=-1)).max() < 1e-9


@criterion(8, "two identical train runs give byte-identical checkpoint and history")
def test_determinism(tmp_path):
    run = json.loads(json.dumps(SKILL_RUN))
    run["train"]["epochs"] = 2
    run["data"]["synth"]["duration"] = 12
    cfg = write_json(tmp_path / "run.json", run)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    # second run in a fresh interpreter
    subprocess.run([sys.executable, "-m", "timgcn.cli", "train", "--config", str(cfg),
                    "--out", str(tmp_path / "b")], check=True, capture_output=True)
    for f in ("checkpoint.json", "history.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


@criterion(9, "logged learning rate at even epochs equals lr0 * 0.96^(epoch/2)")
@pytest.mark.slow
def test_schedule_conformance(skill_run):
    code, out, _ = skill_run
    assert code == 0
    history = read_history(out / "history.csv")
    assert [h["epoch"] for h in history] == list(range(50))
    lr0 = SKILL_RUN["train"]["lr0"]
    for epoch in range(0, 50, 2):
        assert history[epoch]["lr"] == lr0 * 0.96 ** (epoch // 2), epoch
        assert history[epoch + 1]["lr"] == history[epoch]["lr"]
