import numpy as np
import pytest
import torch
import torch.nn as nn

from osclab import control as ctl
from osclab.errors import InvalidArgumentError, ShapeError
from osclab.grid import CENTRE, N_CELLS
from osclab.model import ModelConfig, build_model
from osclab.model.transformer import AttentionMaps, ForwardOutput


class FixedPredictionModel(nn.Module):
    """Stub transformer: always predicts one fixed frame at every timestep."""

    ready = True

    def __init__(self, frame, seq_len=6, d_model=8):
        super().__init__()
        self.config = ModelConfig(
            d_model=d_model, n_layers=1, n_heads=2, d_ff=8, d_ff_head=8,
            seq_len=seq_len, dropout=0.0, warmup_steps=10,
        )
        self.frame = torch.as_tensor(frame, dtype=torch.float32)

    def forward(self, motors, chem, collect_attention=False):
        b, l = motors.shape[0], motors.shape[1]
        pred = self.frame.expand(b, l, N_CELLS).clone()
        hidden = torch.zeros(b, l, self.config.d_model)
        maps = AttentionMaps([], [], [torch.full((b, 2, l, l), 1.0 / l)]) if collect_attention else None
        return ForwardOutput(pred, torch.zeros(b, l, N_CELLS), hidden, maps, torch.zeros(b, l, N_CELLS))


def state_of(seq_len=6):
    return ctl.ControlState.zeros(seq_len)


# -------------------------------------------------------------- controller


def test_zero_weight_controller_outputs_zero_motors():
    c = ctl.Controller(feat_dim=8, hidden=16)
    with torch.no_grad():
        for p in c.parameters():
            p.zero_()
    out = ctl.controller_forward(torch.randn(8), c)
    assert out.shape == (N_CELLS,)
    assert torch.all(out == 0.0)  # sigmoid(0) = 0.5 -> speed 0


def test_controller_output_strictly_inside_unit_interval():
    cfg = ctl.ControllerConfig(hidden=32, seed=3, episodes=1)
    model = FixedPredictionModel(np.zeros(N_CELLS))
    c = ctl.build_controller(model, cfg)
    for seed in range(5):
        feats = torch.randn(8, generator=torch.Generator().manual_seed(seed)) * 10
        out = c(feats)
        assert out.shape == (N_CELLS,)
        assert torch.all(out > -1.0) and torch.all(out < 1.0)


def test_controller_feature_width_checked():
    c = ctl.Controller(feat_dim=8, hidden=4)
    with pytest.raises(ShapeError):
        c(torch.zeros(9))


# --------------------------------------------------------------- objective


def test_objective_centre_one_rest_zero():
    frame = np.zeros(N_CELLS)
    frame[CENTRE] = 1.0
    model = FixedPredictionModel(frame)
    r = ctl.controller_objective(state_of(), torch.zeros(N_CELLS), model, "maximize")
    assert float(r) == 1.0


def test_objective_uniform_prediction_is_zero():
    model = FixedPredictionModel(np.full(N_CELLS, 0.5))
    for objective in ("maximize", "minimize"):
        r = ctl.controller_objective(state_of(), torch.zeros(N_CELLS), model, objective)
        assert float(r) == 0.0


def test_objective_antisymmetry():
    rng = np.random.default_rng(0)
    model = FixedPredictionModel(rng.uniform(0, 1, N_CELLS))
    s = state_of()
    m = torch.zeros(N_CELLS)
    r_max = ctl.controller_objective(s, m, model, "maximize")
    r_min = ctl.controller_objective(s, m, model, "minimize")
    assert float(r_max) == -float(r_min)


def test_objective_validation():
    model = FixedPredictionModel(np.zeros(N_CELLS))
    with pytest.raises(InvalidArgumentError):
        ctl.controller_objective(state_of(), torch.zeros(N_CELLS), model, "explode")
    with pytest.raises(ShapeError):
        ctl.controller_objective(state_of(), torch.zeros(24), model, "maximize")


# ---------------------------------------------------------------- training


@pytest.fixture
def frozen_model(small_config):
    return build_model(small_config, seed=4)


def short_cfg(**kw):
    defaults = dict(hidden=16, episodes=2, episode_len=4, lr=1e-3, seed=0)
    defaults.update(kw)
    return ctl.ControllerConfig(**defaults)


def test_train_controller_freezes_transformer(frozen_model):
    before = ctl.model_weights_hash(frozen_model)
    flags = [p.requires_grad for p in frozen_model.parameters()]
    ctl.train_controller(frozen_model, short_cfg(), [ctl.ControlState.zeros(frozen_model.config.seq_len)])
    assert ctl.model_weights_hash(frozen_model) == before
    assert [p.requires_grad for p in frozen_model.parameters()] == flags


def test_train_controller_deterministic(frozen_model):
    states = [ctl.ControlState.zeros(frozen_model.config.seq_len)]
    _, hist_a = ctl.train_controller(frozen_model, short_cfg(seed=9), states)
    _, hist_b = ctl.train_controller(frozen_model, short_cfg(seed=9), states)
    assert hist_a == hist_b
    assert len(hist_a) == 2 * 4


def test_train_controller_updates_weights(frozen_model):
    cfg = short_cfg()
    states = [ctl.ControlState.zeros(frozen_model.config.seq_len)]
    trained, _ = ctl.train_controller(frozen_model, cfg, states)
    fresh = ctl.build_controller(frozen_model, cfg)
    assert any(
        not torch.equal(a, b) for a, b in zip(trained.parameters(), fresh.parameters())
    )


def test_control_episode_shapes_and_zero_controller(frozen_model):
    c = ctl.Controller(feat_dim=frozen_model.config.d_model, hidden=8)
    with torch.no_grad():
        for p in c.parameters():
            p.zero_()
    s0 = ctl.ControlState.zeros(frozen_model.config.seq_len)
    motors, chem, rewards = ctl.control_episode(frozen_model, c, s0, steps=5)
    assert motors.shape == (5, N_CELLS) and chem.shape == (5, N_CELLS) and rewards.shape == (5,)
    assert np.all(motors == 0.0)
    assert np.all(np.abs(motors) < 1.0) and np.all(chem >= 0.0)


def test_control_episode_step_validation(frozen_model):
    c = ctl.Controller(feat_dim=frozen_model.config.d_model, hidden=8)
    with pytest.raises(InvalidArgumentError):
        ctl.control_episode(frozen_model, c, ctl.ControlState.zeros(frozen_model.config.seq_len), steps=0)


def test_gradient_flow_through_frozen_model(small_config):
    # finite differences on controller parameters, loss = -reward through
    # the frozen transformer, float64
    model = build_model(small_config, seed=1).double()
    for p in model.parameters():
        p.requires_grad_(False)
    ctrl = ctl.Controller(feat_dim=small_config.d_model, hidden=6).double()
    state = ctl.ControlState.zeros(small_config.seq_len)
    state.motor_window = state.motor_window.astype(np.float64)
    state.chem_window = (np.random.default_rng(0).uniform(0, 1, state.chem_window.shape)).astype(np.float64)
    feats = ctl.extract_features(model, state).double()

    def loss_fn():
        motor = ctrl(feats)
        return -ctl.controller_objective(state, motor, model, "maximize")

    ctrl.zero_grad()
    loss_fn().backward()
    h = 1e-5
    for name, p in ctrl.named_parameters():
        g = p.grad.view(-1)
        flat = p.data.view(-1)
        idx = np.random.default_rng(1).choice(flat.numel(), size=min(20, flat.numel()), replace=False)
        for i in idx:
            orig = flat[i].item()
            flat[i] = orig + h
            lp = loss_fn().item()
            flat[i] = orig - h
            lm = loss_fn().item()
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            a = g[i].item()
            assert abs(a - fd) / max(abs(a), abs(fd), 1e-6) < 1e-3, f"{name}[{i}]: {a} vs {fd}"


def test_state_push_clamps_and_slides():
    s = ctl.ControlState.zeros(4)
    s.push(np.full(N_CELLS, 0.5), np.full(N_CELLS, 2.0))
    assert s.motor_window.shape == (4, N_CELLS)
    assert np.all(s.motor_window[-1] == 0.5)
    assert np.all(s.chem_window[-1] == 1.0)  # clamped into [0, 1]
    with pytest.raises(ShapeError):
        ctl.ControlState(np.zeros((4, 24)), np.zeros((4, 24)))
    with pytest.raises(InvalidArgumentError):
        ctl.ControlState(np.full((4, 25), 2.0), np.zeros((4, 25)))


def test_controller_save_load_round_trip(tmp_path, frozen_model):
    cfg = short_cfg(seed=2)
    trained, _ = ctl.train_controller(frozen_model, cfg, [ctl.ControlState.zeros(frozen_model.config.seq_len)])
    path = tmp_path / "controller.ckpt"
    ctl.save_controller(trained, cfg, path)
    loaded, loaded_cfg = ctl.load_controller(path)
    assert loaded_cfg == cfg
    feats = torch.randn(trained.feat_dim, generator=torch.Generator().manual_seed(0))
    assert torch.equal(trained(feats), loaded(feats))


def test_reward_history_csv(tmp_path):
    hist = [ctl.RewardStep(0, 0, 0.5), ctl.RewardStep(0, 1, -0.25)]
    ctl.write_reward_history_csv(hist, tmp_path / "rl_history.csv")
    lines = (tmp_path / "rl_history.csv").read_text().splitlines()
    assert lines[0] == "episode,step,reward"
    assert lines[1] == "0,0,0.5"


def test_extract_features_modes(frozen_model):
    state = ctl.ControlState.zeros(frozen_model.config.seq_len)
    plain = ctl.extract_features(frozen_model, state, "hidden")
    assert plain.shape == (frozen_model.config.d_model,)
    both = ctl.extract_features(frozen_model, state, "hidden_attention")
    assert both.shape == (frozen_model.config.d_model + frozen_model.config.seq_len,)
    assert torch.allclose(both[: frozen_model.config.d_model], plain)
    # pooled attention rows are a probability-like vector
    assert both[frozen_model.config.d_model :].sum() == pytest.approx(1.0, abs=1e-5)
