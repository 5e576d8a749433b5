"""Cyclic training: alternate encoder-only epochs (plain MSE on the motor
reconstruction) with full epochs (max-scaled MSE on the prediction plus the
reconstruction term), under Adam and the warm-up schedule. Deterministic
for a fixed seed."""

from __future__ import annotations

import copy
import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import torch
import torch.nn.functional as F

from ..datapipe import Batch
from ..errors import EmptyInputError, TrainingDivergedError
from .checkpoint import Checkpoint
from .config import ModelConfig
from .losses import scaled_mse
from .schedule import lr_schedule
from .transformer import SurrogateTransformer


@dataclass(frozen=True)
class EpochStats:
    cycle: int
    phase: str  # "encoder" | "full"
    epoch: int  # global epoch counter, 1-based
    loss_pred: float | None  # scaled MSE; None during encoder-only phases
    loss_recon: float  # plain MSE of the raw reconstruction vs motors


def write_history_csv(history: Sequence[EpochStats], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cycle", "phase", "epoch", "loss_pred", "loss_recon"])
        for h in history:
            writer.writerow(
                [h.cycle, h.phase, h.epoch, "" if h.loss_pred is None else f"{h.loss_pred:.8g}", f"{h.loss_recon:.8g}"]
            )


def make_optimizer(model: SurrogateTransformer) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=1e-3, betas=(0.9, 0.98), eps=1e-9)


def cyclic_train(
    model: SurrogateTransformer,
    batches: Sequence[Batch],
    cfg: ModelConfig,
    seed: int = 0,
    start_step: int = 0,
    resume_from: Checkpoint | None = None,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> tuple[Checkpoint, list[EpochStats]]:
    """Run cfg.n_cycles cycles of (encoder_epochs_per_cycle encoder-only +
    full_epochs_per_cycle full) epochs over `batches`.

    Encoder phases backprop only the reconstruction loss, so decoder-side
    parameters receive no gradient and stay untouched. Raises
    TrainingDivergedError carrying the last epoch-end checkpoint if a loss
    goes non-finite.
    """
    if len(batches) == 0:
        raise EmptyInputError("no training batches")
    torch.manual_seed(seed)
    device = next(model.parameters()).device
    tensors = [
        (
            torch.from_numpy(b.motors).to(device),
            torch.from_numpy(b.chem_in).to(device),
            torch.from_numpy(b.chem_target).to(device),
        )
        for b in batches
    ]

    optimizer = make_optimizer(model)
    if resume_from is not None:
        from .checkpoint import restore_optimizer

        restore_optimizer(resume_from, model, optimizer)

    step = start_step
    history: list[EpochStats] = []
    last_good = (copy.deepcopy(model.state_dict()), step)
    epoch_no = 0
    model.train()

    def run_epoch(cycle: int, phase: str) -> EpochStats:
        nonlocal step, epoch_no
        epoch_no += 1
        pred_losses, recon_losses = [], []
        for motors, chem_in, chem_target in tensors:
            step += 1
            lr = lr_schedule(step, cfg.d_model, cfg.warmup_steps)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad(set_to_none=True)
            diverged = False
            if phase == "encoder":
                _, recon_raw, _ = model.encode(motors)
                diverged = not bool(torch.isfinite(recon_raw).all())
                loss_pred = None
                if not diverged:
                    loss_recon = F.mse_loss(recon_raw, motors)
                    loss = loss_recon
            else:
                out = model(motors, _self_condition(model, motors, chem_in, cfg.self_conditioning))
                diverged = not bool(
                    torch.isfinite(out.prediction).all() and torch.isfinite(out.reconstruction_raw).all()
                )
                if not diverged:
                    loss_pred = scaled_mse(chem_target, out.prediction, cfg.eps_loss)
                    loss_recon = F.mse_loss(out.reconstruction_raw, motors)
                    loss = loss_pred + cfg.recon_weight * loss_recon
            if diverged or not bool(torch.isfinite(loss)):
                raise TrainingDivergedError(
                    f"non-finite loss at step {step} (cycle {cycle}, {phase} epoch {epoch_no})",
                    checkpoint=Checkpoint(config=cfg, weights=_to_numpy(last_good[0]), train_step=last_good[1]),
                )
            loss.backward()
            optimizer.step()
            if loss_pred is not None:
                pred_losses.append(loss_pred.detach().item())
            recon_losses.append(loss_recon.detach().item())
        return EpochStats(
            cycle=cycle,
            phase=phase,
            epoch=epoch_no,
            loss_pred=sum(pred_losses) / len(pred_losses) if pred_losses else None,
            loss_recon=sum(recon_losses) / len(recon_losses),
        )

    for cycle in range(1, cfg.n_cycles + 1):
        for phase, n_epochs in (("encoder", cfg.encoder_epochs_per_cycle), ("full", cfg.full_epochs_per_cycle)):
            for _ in range(n_epochs):
                stats = run_epoch(cycle, phase)
                history.append(stats)
                if on_epoch is not None:
                    on_epoch(stats)
                last_good = (copy.deepcopy(model.state_dict()), step)

    model.eval()
    ckpt = Checkpoint.from_model(model, train_step=step, optimizer=optimizer)
    return ckpt, history


def _self_condition(
    model: SurrogateTransformer, motors: torch.Tensor, chem_in: torch.Tensor, fraction: float
) -> torch.Tensor:
    """Replace the chemistry suffix of a `fraction` of sequences with the
    model's own predictions (prediction[t-1] is exactly what a rollout would
    feed as chem_in[t]), iterated twice so deeper frames carry compounded
    self-generated content. Trains the decoder on the input distribution it
    meets when fed back its own outputs."""
    if fraction <= 0.0:
        return chem_in
    b, length = chem_in.shape[0], chem_in.shape[1]
    chosen = torch.rand(b, device=chem_in.device) < fraction
    splits = torch.randint(1, length, (b,), device=chem_in.device)
    t_idx = torch.arange(length, device=chem_in.device)
    suffix = chosen[:, None] & (t_idx[None, :] >= splits[:, None])  # (B, L)
    suffix[:, 0] = False
    was_training = model.training
    model.eval()
    corrupted = chem_in
    with torch.no_grad():
        for _ in range(2):
            pred = model(motors, corrupted).prediction
            shifted = torch.cat([chem_in[:, :1], pred[:, :-1]], dim=1)
            corrupted = torch.where(suffix[..., None], shifted, chem_in)
    model.train(was_training)
    return corrupted


def _to_numpy(state_dict: dict) -> dict:
    import numpy as np

    return {k: v.detach().cpu().numpy().astype(np.float32) for k, v in state_dict.items()}
