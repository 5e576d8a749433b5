"""Differentiable control of the surrogate: a single hidden layer reads the
frozen transformer's pooled decoder state and emits the next motor frame;
training backpropagates a centre-cell objective through the frozen model
into the controller weights only."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn

from .errors import InvalidArgumentError, ModelNotReadyError, ShapeError
from .grid import CENTRE, N_CELLS, OTHERS
from .model.transformer import SurrogateTransformer
from .tensorfile import read_tensors, write_tensors

OBJECTIVES = ("maximize", "minimize")
INPUT_MODES = ("hidden", "hidden_attention")


@dataclass(frozen=True)
class ControllerConfig:
    hidden: int = 1024
    out: int = N_CELLS
    objective: str = "maximize"
    lr: float = 1e-4
    episodes: int = 20
    episode_len: int = 150
    seed: int = 0
    input_mode: str = "hidden"  # "hidden_attention" appends pooled cross-attention

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise InvalidArgumentError(f"objective must be one of {OBJECTIVES}")
        if self.input_mode not in INPUT_MODES:
            raise InvalidArgumentError(f"input_mode must be one of {INPUT_MODES}")
        if self.out != N_CELLS:
            raise InvalidArgumentError(f"controller output must cover all {N_CELLS} motors")
        if self.hidden < 1 or self.episodes < 1 or self.episode_len < 1:
            raise InvalidArgumentError("hidden, episodes and episode_len must be >= 1")


class ControlState:
    """Rolling motor/chemistry windows fed to the transformer; both exactly
    seq_len long, motors in [-1, 1], chemistry in [0, 1]."""

    def __init__(self, motor_window, chem_window):
        motors = np.asarray(motor_window, dtype=np.float32)
        chem = np.asarray(chem_window, dtype=np.float32)
        if motors.shape != chem.shape or motors.ndim != 2 or motors.shape[1] != N_CELLS:
            raise ShapeError(f"windows must both be (seq_len, {N_CELLS}); got {motors.shape} and {chem.shape}")
        if np.any(np.abs(motors) > 1.0):
            raise InvalidArgumentError("motor window values must lie in [-1, 1]")
        if np.any(chem < 0.0) or np.any(chem > 1.0):
            raise InvalidArgumentError("chem window values must lie in [0, 1]")
        self.motor_window = motors
        self.chem_window = chem

    @classmethod
    def zeros(cls, seq_len: int) -> "ControlState":
        return cls(np.zeros((seq_len, N_CELLS)), np.zeros((seq_len, N_CELLS)))

    @property
    def seq_len(self) -> int:
        return self.motor_window.shape[0]

    def copy(self) -> "ControlState":
        return ControlState(self.motor_window.copy(), self.chem_window.copy())

    def push(self, motor_frame: np.ndarray, chem_frame: np.ndarray) -> None:
        """Append one frame to each window, dropping the oldest. The chem
        frame is clamped into [0, 1] to keep the window invariant."""
        self.motor_window = np.vstack([self.motor_window[1:], np.clip(motor_frame, -1.0, 1.0)[None]]).astype(np.float32)
        self.chem_window = np.vstack([self.chem_window[1:], np.clip(chem_frame, 0.0, 1.0)[None]]).astype(np.float32)


class Controller(nn.Module):
    """tanh hidden layer -> sigmoid motor activations, mapped affinely from
    (0, 1) to speeds in (-1, 1)."""

    def __init__(self, feat_dim: int, hidden: int, out: int = N_CELLS):
        super().__init__()
        self.feat_dim = feat_dim
        self.lin1 = nn.Linear(feat_dim, hidden)
        self.lin2 = nn.Linear(hidden, out)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        if features.shape[-1] != self.feat_dim:
            raise ShapeError(f"controller expects {self.feat_dim} features, got {features.shape[-1]}")
        u = torch.sigmoid(self.lin2(torch.tanh(self.lin1(features))))
        return 2.0 * u - 1.0


def feature_dim(model: SurrogateTransformer, input_mode: str) -> int:
    d = model.config.d_model
    return d + model.config.seq_len if input_mode == "hidden_attention" else d


def build_controller(model: SurrogateTransformer, cfg: ControllerConfig) -> Controller:
    ctrl = Controller(feature_dim(model, cfg.input_mode), cfg.hidden, cfg.out)
    gen = torch.Generator().manual_seed(cfg.seed)
    with torch.no_grad():
        for lin in (ctrl.lin1, ctrl.lin2):
            bound = math.sqrt(6.0 / (lin.in_features + lin.out_features))
            lin.weight.uniform_(-bound, bound, generator=gen)
            lin.bias.zero_()
    return ctrl


def extract_features(model: SurrogateTransformer, state: ControlState, input_mode: str = "hidden") -> torch.Tensor:
    """Mean-over-time decoder hidden state for the current windows;
    "hidden_attention" additionally appends the cross-attention weights
    pooled over layers, heads and queries."""
    was_training = model.training
    model.eval()
    with torch.no_grad():
        motors = torch.from_numpy(state.motor_window).unsqueeze(0)
        chem = torch.from_numpy(state.chem_window).unsqueeze(0)
        out = model(motors, chem, collect_attention=input_mode == "hidden_attention")
        feats = out.decoder_hidden.mean(dim=1).squeeze(0)
        if input_mode == "hidden_attention":
            pooled = torch.stack([w.mean(dim=(0, 1, 2)) for w in out.attention.decoder_cross]).mean(dim=0)
            feats = torch.cat([feats, pooled])
    model.train(was_training)
    return feats


def controller_forward(features: torch.Tensor, controller: Controller) -> torch.Tensor:
    """Features -> motor frame in (-1, 1)^25."""
    return controller(features)


def centre_contrast(chem_frame: torch.Tensor) -> torch.Tensor:
    return chem_frame[..., CENTRE] - chem_frame[..., OTHERS].mean(dim=-1)


def controller_objective(
    state: ControlState,
    new_motor: torch.Tensor,
    model: SurrogateTransformer,
    objective: str = "maximize",
) -> torch.Tensor:
    """Reward of appending `new_motor` to the motor window: the predicted
    final-step centre cell against the mean of the other 24 (negated when
    minimizing). Differentiable through the frozen model into new_motor."""
    reward, _ = _objective_and_prediction(state, new_motor, model, objective)
    return reward


def _objective_and_prediction(state, new_motor, model, objective):
    if objective not in OBJECTIVES:
        raise InvalidArgumentError(f"objective must be one of {OBJECTIVES}")
    if not getattr(model, "ready", True):
        raise ModelNotReadyError("surrogate model is not trained")
    if new_motor.shape != (N_CELLS,):
        raise ShapeError(f"new motor frame must be ({N_CELLS},), got {tuple(new_motor.shape)}")
    was_training = model.training
    model.eval()
    motors = torch.cat([torch.from_numpy(state.motor_window[1:]), new_motor.unsqueeze(0)]).unsqueeze(0)
    chem = torch.from_numpy(state.chem_window).unsqueeze(0)
    prediction = model(motors, chem).prediction[0, -1]
    model.train(was_training)
    r = centre_contrast(prediction)
    if objective == "minimize":
        r = -r
    return r, prediction


@dataclass(frozen=True)
class RewardStep:
    episode: int
    step: int
    reward: float


def model_weights_hash(model: nn.Module) -> str:
    digest = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def train_controller(
    model: SurrogateTransformer,
    cfg: ControllerConfig,
    initial_states: Sequence[ControlState],
) -> tuple[Controller, list[RewardStep]]:
    """Per-step gradient training over cfg.episodes closed-loop episodes.

    The transformer's parameters are frozen (and verified unchanged by
    hash); only controller weights receive updates. Deterministic for a
    fixed cfg.seed and initial states.
    """
    if len(initial_states) == 0:
        raise InvalidArgumentError("need at least one initial state")
    torch.manual_seed(cfg.seed)
    hash_before = model_weights_hash(model)
    grad_flags = [p.requires_grad for p in model.parameters()]
    for p in model.parameters():
        p.requires_grad_(False)

    controller = build_controller(model, cfg)
    optimizer = torch.optim.Adam(controller.parameters(), lr=cfg.lr)
    history: list[RewardStep] = []

    try:
        for ep in range(cfg.episodes):
            state = initial_states[ep % len(initial_states)].copy()
            for step in range(cfg.episode_len):
                feats = extract_features(model, state, cfg.input_mode)
                motor = controller(feats)
                reward, prediction = _objective_and_prediction(state, motor, model, cfg.objective)
                if not torch.isfinite(reward):
                    raise ModelNotReadyError(f"non-finite reward at episode {ep} step {step}")
                optimizer.zero_grad(set_to_none=True)
                (-reward).backward()
                optimizer.step()
                history.append(RewardStep(ep, step, float(reward.detach())))
                state.push(motor.detach().numpy(), prediction.detach().numpy())
    finally:
        for p, flag in zip(model.parameters(), grad_flags):
            p.requires_grad_(flag)

    if model_weights_hash(model) != hash_before:
        raise RuntimeError("frozen-model contract violated: transformer weights changed")
    return controller, history


def control_episode(
    model: SurrogateTransformer,
    controller: Controller,
    state0: ControlState,
    steps: int,
    objective: str = "maximize",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-loop run without parameter updates; returns the motor
    trajectory, the predicted chemistry trajectory, and per-step rewards."""
    if steps < 1:
        raise InvalidArgumentError("steps must be >= 1")
    state = state0.copy()
    motor_traj = np.empty((steps, N_CELLS), dtype=np.float32)
    chem_traj = np.empty((steps, N_CELLS), dtype=np.float32)
    rewards = np.empty(steps, dtype=np.float64)
    with torch.no_grad():
        for t in range(steps):
            feats = extract_features(model, state, "hidden" if controller.feat_dim == model.config.d_model else "hidden_attention")
            motor = controller(feats)
            reward, prediction = _objective_and_prediction(state, motor, model, objective)
            motor_traj[t] = motor.numpy()
            chem_traj[t] = prediction.numpy()
            rewards[t] = float(reward)
            state.push(motor_traj[t], chem_traj[t])
    return motor_traj, chem_traj, rewards


def write_reward_history_csv(history: Sequence[RewardStep], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "step", "reward"])
        for h in history:
            writer.writerow([h.episode, h.step, f"{h.reward:.8g}"])


def save_controller(controller: Controller, cfg: ControllerConfig, path, model_id: str | None = None) -> None:
    meta = {
        "kind": "controller",
        "config": {
            "hidden": cfg.hidden,
            "out": cfg.out,
            "objective": cfg.objective,
            "lr": cfg.lr,
            "episodes": cfg.episodes,
            "episode_len": cfg.episode_len,
            "seed": cfg.seed,
            "input_mode": cfg.input_mode,
        },
        "feat_dim": controller.feat_dim,
        "model_id": model_id,
    }
    tensors = {name: p.detach().cpu().numpy() for name, p in controller.state_dict().items()}
    write_tensors(path, meta, tensors)


def load_controller(path) -> tuple[Controller, ControllerConfig]:
    meta, tensors = read_tensors(path)
    if meta.get("kind") != "controller":
        raise InvalidArgumentError(f"{path}: not a controller checkpoint")
    cfg = ControllerConfig(**meta["config"])
    controller = Controller(meta["feat_dim"], cfg.hidden, cfg.out)
    controller.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in tensors.items()})
    controller.eval()
    return controller, cfg
