import numpy as np
import pytest
import torch

from osclab import datapipe as dp
from osclab.errors import EmptyInputError, TrainingDivergedError
from osclab.model import (
    ModelConfig,
    build_model,
    cyclic_train,
    encoder_forward,
    model_forward,
    scaled_mse,
    write_history_csv,
)
from osclab.synth import SynthConfig, random_motor_program, synth_experiment


def synth_batches(seq_len=12, n_pairs=8, seed=0, steps=160):
    rng = np.random.default_rng(seed)
    rec = synth_experiment(SynthConfig(steps=steps, seed=seed + 1), random_motor_program(steps, rng))
    pairs = dp.build_sequence_pairs(rec, sample_every=1, seq_len=seq_len, stride=7)[:n_pairs]
    return dp.batch_sequences(pairs, len(pairs))


def multi_experiment_batches(seq_len=12, n_exps=8, seed=0, steps=80):
    """One pair per experiment, distinct motor programs per pair."""
    pairs = []
    for i in range(n_exps):
        rng = np.random.default_rng(seed + 100 * i)
        prog = random_motor_program(steps, rng, hold_range=(10, 25))
        rec = synth_experiment(SynthConfig(steps=steps, seed=seed + i + 1), prog)
        pairs.append(dp.build_sequence_pairs(rec, sample_every=1, seq_len=seq_len, stride=1)[20])
    return dp.batch_sequences(pairs, len(pairs))


def test_history_has_default_cycle_structure():
    # 10 cycles x (30 encoder + 100 full) epochs = 1300 rows, scaled to a
    # tiny model so the arithmetic is testable on one core
    cfg = ModelConfig(
        d_model=8, n_layers=1, n_heads=2, d_ff=8, d_ff_head=8, seq_len=4,
        dropout=0.0, warmup_steps=100,
    )
    rng = np.random.default_rng(0)
    z = np.zeros((4, 25))
    pair = dp.SequencePair(motors=z, chem_in=z, chem_target=z)
    batches = dp.batch_sequences([pair], 1)
    model = build_model(cfg, seed=0)
    _, history = cyclic_train(model, batches, cfg, seed=0)
    assert len(history) == 10 * (30 + 100) == 1300
    enc = [h for h in history if h.phase == "encoder"]
    full = [h for h in history if h.phase == "full"]
    assert len(enc) == 300 and len(full) == 1000
    assert all(h.loss_pred is None for h in enc)
    assert all(h.loss_pred is not None for h in full)
    assert [h.epoch for h in history] == list(range(1, 1301))


def test_fixed_seed_reproduces_history_bitwise(small_config):
    batches = synth_batches()
    runs = []
    for _ in range(2):
        model = build_model(small_config, seed=5)
        ckpt, history = cyclic_train(model, batches, small_config, seed=11)
        runs.append((ckpt, history))
    (ck_a, hist_a), (ck_b, hist_b) = runs
    assert hist_a == hist_b
    for name in ck_a.weights:
        assert np.array_equal(ck_a.weights[name], ck_b.weights[name])


def test_encoder_phase_leaves_decoder_untouched(small_config):
    cfg = ModelConfig(**{**small_config.to_dict(), "encoder_epochs_per_cycle": 3, "full_epochs_per_cycle": 0})
    batches = synth_batches()
    model = build_model(cfg, seed=2)
    before = {n: p.detach().clone() for n, p in model.named_parameters()}
    cyclic_train(model, batches, cfg, seed=0)
    for name, p in model.named_parameters():
        touched = not torch.equal(before[name], p)
        on_encoder_path = name.startswith(("motor_proj", "encoder", "recon_"))
        assert touched == on_encoder_path, name


def test_overfit_single_batch_reconstruction():
    # after overfitting one batch, the encoder head reproduces its motors
    cfg = ModelConfig(
        d_model=32, n_layers=1, n_heads=4, d_ff=64, d_ff_head=64, seq_len=12,
        dropout=0.0, warmup_steps=60, encoder_epochs_per_cycle=150,
        full_epochs_per_cycle=0, n_cycles=1,
    )
    batches = synth_batches()
    model = build_model(cfg, seed=1)
    cyclic_train(model, batches, cfg, seed=1)
    motors = batches[0].motors[0]
    _, recon = encoder_forward(model, motors)
    assert float(np.abs(recon.numpy() - motors).mean()) < 0.05


def test_divergence_raises_with_checkpoint(small_config):
    batches = synth_batches()
    model = build_model(small_config, seed=0)
    with torch.no_grad():
        model.pred_out.weight.fill_(float("inf"))
    with pytest.raises(TrainingDivergedError) as exc_info:
        cyclic_train(model, batches, small_config, seed=0)
    assert exc_info.value.checkpoint is not None
    assert exc_info.value.checkpoint.config == small_config


def test_empty_batches_rejected(small_config):
    model = build_model(small_config, seed=0)
    with pytest.raises(EmptyInputError):
        cyclic_train(model, [], small_config, seed=0)


def test_history_csv_format(tmp_path, small_config):
    batches = synth_batches()
    model = build_model(small_config, seed=0)
    _, history = cyclic_train(model, batches, small_config, seed=0)
    path = tmp_path / "history.csv"
    write_history_csv(history, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "cycle,phase,epoch,loss_pred,loss_recon"
    assert len(lines) == 1 + len(history)
    first_enc = lines[1].split(",")
    assert first_enc[1] == "encoder" and first_enc[3] == ""


def test_motor_shuffle_changes_trained_prediction(small_config):
    # the decoder must not ignore the encoder: after training, swapping in
    # mismatched motor windows moves the prediction loss
    cfg = ModelConfig(**{
        **small_config.to_dict(),
        "encoder_epochs_per_cycle": 5,
        "full_epochs_per_cycle": 40,
        "warmup_steps": 80,
    })
    batches = multi_experiment_batches(seed=4)
    model = build_model(cfg, seed=3)
    cyclic_train(model, batches, cfg, seed=3)
    b = batches[0]
    out = model_forward(model, b.motors, b.chem_in)
    loss = float(scaled_mse(torch.tensor(b.chem_target), out.prediction))
    perm = np.roll(np.arange(len(b)), 1)
    assert not np.array_equal(b.motors[perm], b.motors)
    out_shuf = model_forward(model, b.motors[perm], b.chem_in)
    loss_shuf = float(scaled_mse(torch.tensor(b.chem_target), out_shuf.prediction))
    assert not torch.allclose(out.prediction, out_shuf.prediction, atol=1e-6)
    assert loss_shuf != pytest.approx(loss, rel=1e-6)
