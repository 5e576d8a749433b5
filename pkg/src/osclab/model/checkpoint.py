"""Checkpoints: config + named float32 tensors in the shared tensor-file
container. Reloading reproduces eval-mode outputs bit-for-bit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import InvalidDataError
from ..tensorfile import read_tensors, write_tensors
from .config import ModelConfig
from .transformer import SurrogateTransformer

_OPT_PREFIX = "optim/"


@dataclass
class Checkpoint:
    config: ModelConfig
    weights: dict[str, np.ndarray]
    train_step: int = 0
    optimizer_state: dict | None = None

    @classmethod
    def from_model(
        cls,
        model: SurrogateTransformer,
        train_step: int = 0,
        optimizer: torch.optim.Optimizer | None = None,
    ) -> "Checkpoint":
        weights = {
            name: tensor.detach().cpu().numpy().astype(np.float32)
            for name, tensor in model.state_dict().items()
        }
        opt_state = None
        if optimizer is not None:
            opt_state = _extract_adam_state(model, optimizer)
        return cls(config=model.config, weights=weights, train_step=train_step, optimizer_state=opt_state)


def _extract_adam_state(model: SurrogateTransformer, optimizer: torch.optim.Optimizer) -> dict:
    by_param = {id(p): name for name, p in model.named_parameters()}
    steps, exp_avg, exp_avg_sq = {}, {}, {}
    for group in optimizer.param_groups:
        for p in group["params"]:
            state = optimizer.state.get(p)
            name = by_param.get(id(p))
            if not state or name is None:
                continue
            steps[name] = int(state["step"])
            exp_avg[name] = state["exp_avg"].detach().cpu().numpy().astype(np.float32)
            exp_avg_sq[name] = state["exp_avg_sq"].detach().cpu().numpy().astype(np.float32)
    return {"steps": steps, "exp_avg": exp_avg, "exp_avg_sq": exp_avg_sq}


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    tensors = dict(ckpt.weights)
    meta = {
        "kind": "transformer",
        "config": ckpt.config.to_dict(),
        "train_step": ckpt.train_step,
        "optim_steps": None,
    }
    if ckpt.optimizer_state is not None:
        meta["optim_steps"] = ckpt.optimizer_state["steps"]
        for name, arr in ckpt.optimizer_state["exp_avg"].items():
            tensors[f"{_OPT_PREFIX}{name}/exp_avg"] = arr
        for name, arr in ckpt.optimizer_state["exp_avg_sq"].items():
            tensors[f"{_OPT_PREFIX}{name}/exp_avg_sq"] = arr
    write_tensors(path, meta, tensors)


def load_checkpoint(path) -> Checkpoint:
    meta, tensors = read_tensors(path)
    if meta.get("kind") != "transformer":
        raise InvalidDataError(f"{path}: not a transformer checkpoint (kind={meta.get('kind')!r})")
    weights = {k: v for k, v in tensors.items() if not k.startswith(_OPT_PREFIX)}
    opt_state = None
    if meta.get("optim_steps"):
        opt_state = {"steps": meta["optim_steps"], "exp_avg": {}, "exp_avg_sq": {}}
        for key, arr in tensors.items():
            if key.startswith(_OPT_PREFIX):
                name, kind = key[len(_OPT_PREFIX) :].rsplit("/", 1)
                opt_state[kind][name] = arr
    return Checkpoint(
        config=ModelConfig.from_dict(meta["config"]),
        weights=weights,
        train_step=int(meta.get("train_step", 0)),
        optimizer_state=opt_state,
    )


def restore_model(ckpt: Checkpoint) -> SurrogateTransformer:
    model = SurrogateTransformer(ckpt.config)
    state = {name: torch.from_numpy(arr.copy()) for name, arr in ckpt.weights.items()}
    missing, unexpected = model.load_state_dict(state, strict=False)
    missing = [m for m in missing if not m.endswith(".pos")]
    if missing or unexpected:
        raise InvalidDataError(f"checkpoint tensors do not match the graph: missing={missing}, unexpected={unexpected}")
    model.eval()
    return model


def restore_optimizer(ckpt: Checkpoint, model: SurrogateTransformer, optimizer: torch.optim.Optimizer) -> None:
    """Rebuild Adam moments so a resumed run continues where it stopped."""
    if ckpt.optimizer_state is None:
        return
    params = dict(model.named_parameters())
    for name, step in ckpt.optimizer_state["steps"].items():
        p = params.get(name)
        if p is None:
            continue
        optimizer.state[p] = {
            "step": torch.tensor(float(step)),
            "exp_avg": torch.from_numpy(ckpt.optimizer_state["exp_avg"][name].copy()),
            "exp_avg_sq": torch.from_numpy(ckpt.optimizer_state["exp_avg_sq"][name].copy()),
        }
