"""Command-line entry point: generate data, train, evaluate, search, control,
upscale and serve, all driven by one config file plus flag overrides.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. Every
command writes its artifacts under --out together with a manifest.json
listing the produced files and the fully-resolved configuration.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import config as cfgmod
from . import datapipe as dp
from . import ga as ga_mod
from .control import ControlState, ControllerConfig, save_controller, train_controller, write_reward_history_csv
from .errors import OscLabError
from .grid import N_CELLS
from .model import (
    Checkpoint,
    ModelConfig,
    build_model,
    cyclic_train,
    evaluate_phase_window,
    load_checkpoint,
    restore_model,
    rollout_batched,
    save_checkpoint,
    write_history_csv,
)
from .synth import SynthConfig, random_motor_program, synth_experiment
from .upscale import FieldState, save_frame_pngs, upscale_rollout, write_field_rollout


def _load(config_path, section: str, **flags) -> dict:
    cfg = cfgmod.load_config(config_path)
    cfgmod.apply_overrides(cfg, section, **flags)
    return cfg


def _write_manifest(out_dir: Path, command: str, files: list[str], resolved: dict) -> None:
    manifest = {"command": command, "files": sorted(files), "config": resolved}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


class _Failure(click.ClickException):
    exit_code = 1


def _run(fn):
    """Map package errors onto the documented exit codes."""
    try:
        return fn()
    except cfgmod.ConfigError as exc:
        raise click.UsageError(str(exc))
    except OscLabError as exc:
        raise _Failure(str(exc))


@click.group()
@click.version_option(version=__version__, prog_name="osclab")
def main():
    """Surrogate experimentation engine for the stirred oscillator grid."""


@main.command("gen-data")
@click.option("--config", "config_path", type=click.Path(), default=None, help="INI config file.")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--steps", type=int, default=None, help="Frames per experiment.")
@click.option("--experiments", type=int, default=None, help="Number of experiments.")
@click.option("--seed", type=int, default=None, help="Master seed.")
def cmd_gen_data(config_path, out, steps, experiments, seed):
    """Generate synthetic reference-oscillator experiments as JSONL files."""

    def go():
        cfg = _load(config_path, "data", steps=steps, experiments=experiments, seed=seed)
        d = cfg["data"]
        out_dir = _out_dir(out)
        files = []
        for i in range(d["experiments"]):
            rng = np.random.default_rng(d["seed"] + 1000 * i)
            program = random_motor_program(d["steps"], rng, hold_range=(d["hold_min"], d["hold_max"]))
            rec = synth_experiment(
                SynthConfig(
                    omega0=d["omega0"],
                    kappa=d["kappa"],
                    omega_b=d["omega_b"],
                    pulse_sharpness=d["pulse_sharpness"],
                    steps=d["steps"],
                    seed=d["seed"] + 1000 * i + 1,
                ),
                program,
            )
            name = f"exp_{i:03d}.jsonl"
            dp.write_experiment(rec, out_dir / name)
            files.append(name)
        _write_manifest(out_dir, "gen-data", files, cfg)
        click.echo(f"wrote {len(files)} experiments ({d['steps']} frames each) to {out_dir}")

    _run(go)


def _model_config(cfg: dict) -> ModelConfig:
    return ModelConfig(**cfg["model"])


def _build_batches(records, mcfg: ModelConfig, tcfg: dict):
    pairs = []
    skip = tcfg.get("skip", 0)
    for rec in records:
        if skip:
            rec = dp.ExperimentRecord(np.arange(len(rec) - skip), rec.motors[skip:], rec.chem[skip:])
        pairs.extend(dp.build_sequence_pairs(rec, tcfg["sample_every"], mcfg.seq_len, tcfg["stride"]))
    return dp.batch_sequences(pairs, tcfg["batch_size"])


@main.command("train")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--resume", type=click.Path(exists=True), default=None, help="Checkpoint to continue from.")
@click.option("--seed", type=int, default=None)
@click.option("--d-model", type=int, default=None)
@click.option("--seq-len", type=int, default=None)
@click.option("--n-layers", type=int, default=None)
@click.option("--cycles", "n_cycles", type=int, default=None)
def cmd_train(config_path, data_dir, out, resume, seed, d_model, seq_len, n_layers, n_cycles):
    """Train the world model on recorded experiments."""

    def go():
        cfg = cfgmod.load_config(config_path)
        cfgmod.apply_overrides(cfg, "model", d_model=d_model, seq_len=seq_len, n_layers=n_layers, n_cycles=n_cycles)
        cfgmod.apply_overrides(cfg, "train", seed=seed)
        mcfg = _model_config(cfg)
        records = dp.load_experiments(data_dir)
        batches = _build_batches(records, mcfg, cfg["train"])
        out_dir = _out_dir(out)
        if resume:
            ckpt_in = load_checkpoint(resume)
            model = restore_model(ckpt_in)
            start_step = ckpt_in.train_step
            resume_from = ckpt_in
        else:
            model = build_model(mcfg, seed=cfg["train"]["seed"])
            start_step = 0
            resume_from = None
        ckpt, history = cyclic_train(
            model, batches, mcfg, seed=cfg["train"]["seed"], start_step=start_step, resume_from=resume_from
        )
        save_checkpoint(ckpt, out_dir / "model.ckpt")
        write_history_csv(history, out_dir / "history.csv")
        _write_manifest(out_dir, "train", ["model.ckpt", "history.csv"], cfg)
        last_pred = next((h.loss_pred for h in reversed(history) if h.loss_pred is not None), None)
        click.echo(
            f"trained {len(batches)} batches x {len(history)} epochs; "
            f"final prediction loss {last_pred if last_pred is not None else 'n/a'}; "
            f"train_step {ckpt.train_step}"
        )

    _run(go)


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--phase-window", type=int, default=5, show_default=True)
@click.option("--horizon", type=int, default=None, help="Autoregressive rollout length; default teacher-forced.")
@click.option("--sample-every", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
def cmd_eval(model_path, data_dir, phase_window, horizon, sample_every, out):
    """Report phase-tolerant per-cell error of a model on recorded data."""

    def go():
        ckpt = load_checkpoint(model_path)
        model = restore_model(ckpt)
        every = sample_every or 1
        records = dp.load_experiments(data_dir)
        rows = []
        for i, rec in enumerate(records):
            if horizon:
                err = _rollout_error(model, rec, every, horizon, phase_window)
            else:
                err = _teacher_forced_error(model, rec, every, phase_window)
            rows.append((f"exp_{i:03d}", err))
        mean_err = float(np.mean([e for _, e in rows]))
        for name, err in rows:
            click.echo(f"{name}: per-cell error {err:.6f} (w={phase_window})")
        click.echo(f"mean: {mean_err:.6f}")
        if out:
            out_dir = _out_dir(out)
            report = {
                "phase_window": phase_window,
                "horizon": horizon,
                "per_experiment": {name: err for name, err in rows},
                "mean": mean_err,
            }
            (out_dir / "eval.json").write_text(json.dumps(report, indent=2) + "\n")
            _write_manifest(out_dir, "eval", ["eval.json"], {"phase_window": phase_window, "horizon": horizon})

    _run(go)


def _teacher_forced_error(model, rec, every, w):
    import torch

    seq_len = model.config.seq_len
    pairs = dp.build_sequence_pairs(rec, every, seq_len, stride=seq_len)
    batch = dp.batch_sequences(pairs, len(pairs))[0]
    with torch.no_grad():
        pred = model(torch.from_numpy(batch.motors), torch.from_numpy(batch.chem_in)).prediction.numpy()
    errs = [evaluate_phase_window(pred[i], batch.chem_target[i], w) for i in range(len(pairs))]
    return float(np.mean(errs))


def _rollout_error(model, rec, every, horizon, w):
    seq_len = model.config.seq_len
    idx = np.arange(0, (seq_len + horizon) * every, every)
    if idx[-1] >= len(rec):
        raise cfgmod.ConfigError(
            f"experiment of {len(rec)} frames is too short for seq_len {seq_len} + horizon {horizon} at every {every}"
        )
    motors = rec.motors[idx][None].astype(np.float32)
    chem = rec.chem[idx][None].astype(np.float32)
    pred = rollout_batched(model, motors[:, :-1], chem[:, :seq_len], horizon)[0]
    truth = chem[0, seq_len:]
    return float(evaluate_phase_window(pred, truth, w))


@main.command("run-ga")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--pop-size", type=int, default=None)
@click.option("--generations", "n_generations", type=int, default=None)
@click.option("--elite", "n_elite", type=int, default=None)
@click.option("--horizon", "rollout_horizon", type=int, default=None)
@click.option("--seed", type=int, default=None)
def cmd_run_ga(config_path, model_path, out, pop_size, n_generations, n_elite, rollout_horizon, seed):
    """Search motor genomes that make the surrogate behave like an XOR gate."""

    def go():
        cfg = _load(
            config_path, "ga",
            pop_size=pop_size, n_generations=n_generations, n_elite=n_elite,
            rollout_horizon=rollout_horizon, seed=seed,
        )
        model = restore_model(load_checkpoint(model_path))
        ga_cfg = ga_mod.GAConfig(**cfg["ga"])
        sim = ga_mod.RolloutSimulator(model)
        chem_seed = np.zeros((model.config.seq_len, N_CELLS), dtype=np.float32)
        result = ga_mod.run_ga(sim, chem_seed, ga_cfg)
        out_dir = _out_dir(out)
        ga_mod.write_ga_history_csv(result.history, out_dir / "ga_history.csv")
        ga_mod.write_best_genome_json(result, out_dir / "best_genome.json")
        _write_manifest(out_dir, "run-ga", ["ga_history.csv", "best_genome.json"], cfg)
        click.echo(f"best score {result.score:.4f}, bits {list(result.bits)}")

    _run(go)


@main.command("run-rl")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--objective", type=click.Choice(["maximize", "minimize"]), default=None)
@click.option("--episodes", type=int, default=None)
@click.option("--episode-len", type=int, default=None)
@click.option("--hidden", type=int, default=None)
@click.option("--seed", type=int, default=None)
def cmd_run_rl(config_path, model_path, out, objective, episodes, episode_len, hidden, seed):
    """Train the motor controller through the frozen world model."""

    def go():
        cfg = _load(
            config_path, "rl",
            objective=objective, episodes=episodes, episode_len=episode_len, hidden=hidden, seed=seed,
        )
        model = restore_model(load_checkpoint(model_path))
        rl_cfg = ControllerConfig(**cfg["rl"])
        states = [ControlState.zeros(model.config.seq_len)]
        controller, history = train_controller(model, rl_cfg, states)
        out_dir = _out_dir(out)
        model_id = Path(model_path).stem
        ctrl_name = f"{model_id}--{rl_cfg.objective}.ckpt"
        save_controller(controller, rl_cfg, out_dir / ctrl_name, model_id=model_id)
        write_reward_history_csv(history, out_dir / "rl_history.csv")
        _write_manifest(out_dir, "run-rl", [ctrl_name, "rl_history.csv"], cfg)
        mean_reward = float(np.mean([h.reward for h in history])) if history else float("nan")
        click.echo(f"trained {rl_cfg.objective} controller; mean reward {mean_reward:.4f}")

    _run(go)


@main.command("upscale")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--n", type=int, default=None, help="Field side length.")
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--png/--no-png", "png", default=None, help="Also dump per-frame heatmaps.")
def cmd_upscale(config_path, model_path, out, n, steps, seed, png):
    """Roll the 5x5 model over an NxN field and synthesize oscillation frames."""

    def go():
        cfg = _load(config_path, "upscale", n=n, steps=steps, seed=seed, png=png)
        u = cfg["upscale"]
        model = restore_model(load_checkpoint(model_path))
        rng = np.random.default_rng(u["seed"])
        program = random_motor_program(u["steps"], rng, n_cells=u["n"] * u["n"]).reshape(u["steps"], u["n"], u["n"])
        field = FieldState.zeros(model.config.seq_len, u["n"])
        frames = upscale_rollout(field, program, model, u["steps"], chunk_size=u["chunk_size"])
        out_dir = _out_dir(out)
        write_field_rollout(frames, out_dir / "field_rollout.bin")
        files = ["field_rollout.bin"]
        if u["png"]:
            files += [str(Path(p).relative_to(out_dir)) for p in save_frame_pngs(frames, out_dir / "frames")]
        _write_manifest(out_dir, "upscale", files, cfg)
        click.echo(f"rolled {u['steps']} steps at {u['n']}x{u['n']}; values in [{frames.min():.3f}, {frames.max():.3f}]")

    _run(go)


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True))
@click.option("--host", type=str, default=None)
@click.option("--port", type=int, default=None)
@click.option("--results", "results_dir", type=click.Path(), default=None)
def cmd_serve(config_path, models_dir, host, port, results_dir):
    """Serve live surrogate sessions over HTTP (REST + SSE)."""

    def go():
        import uvicorn

        from .service import ModelStore, create_app

        cfg = _load(config_path, "serve", host=host, port=port)
        store = ModelStore.from_dir(models_dir)
        if not store.models:
            raise cfgmod.ConfigError(f"no model checkpoints under {models_dir}")
        app = create_app(store, results_dir=results_dir or (Path(models_dir) / "job-results"))
        click.echo(f"serving {sorted(store.models)} on {cfg['serve']['host']}:{cfg['serve']['port']}")
        uvicorn.run(app, host=cfg["serve"]["host"], port=cfg["serve"]["port"], log_level="info")

    _run(go)


if __name__ == "__main__":
    main()
