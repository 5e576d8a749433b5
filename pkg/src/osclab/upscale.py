"""Kernel-style field upscaling: slide the trained 5x5 model over an NxN
motor/chemistry field with stride 1 (zero padding of width 2 keeps the
output the same size), keep each patch's final-timestep centre-cell
prediction, and stitch the N^2 predictions into the next NxN frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import InvalidArgumentError, ModelNotReadyError, ShapeError
from .grid import CENTRE, SIDE
from .model.transformer import SurrogateTransformer
from .tensorfile import write_tensors

PAD = SIDE // 2  # 2


@dataclass
class FieldState:
    """Rolling seq_len-deep motor and chemistry fields of side N >= 5."""

    motors: np.ndarray
    chem: np.ndarray

    def __post_init__(self):
        self.motors = np.asarray(self.motors, dtype=np.float32)
        self.chem = np.asarray(self.chem, dtype=np.float32)
        if self.motors.shape != self.chem.shape or self.motors.ndim != 3:
            raise ShapeError(
                f"motor and chem fields must share one (seq_len, N, N) shape;"
                f" got {self.motors.shape} and {self.chem.shape}"
            )
        if self.motors.shape[1] != self.motors.shape[2]:
            raise ShapeError(f"field must be square, got {self.motors.shape[1:]}")
        if self.n < SIDE:
            raise InvalidArgumentError(f"field side must be >= {SIDE}, got {self.n}")
        if np.any(np.abs(self.motors) > 1.0):
            raise InvalidArgumentError("motor field values must lie in [-1, 1]")
        if np.any(self.chem < 0.0) or np.any(self.chem > 1.0):
            raise InvalidArgumentError("chem field values must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.motors.shape[1]

    @property
    def seq_len(self) -> int:
        return self.motors.shape[0]

    @classmethod
    def zeros(cls, seq_len: int, n: int) -> "FieldState":
        return cls(np.zeros((seq_len, n, n)), np.zeros((seq_len, n, n)))

    def copy(self) -> "FieldState":
        return FieldState(self.motors.copy(), self.chem.copy())


def pad_grid(field: np.ndarray, pad: int) -> np.ndarray:
    """Zero-pad the two spatial axes of a (seq_len, N, N) tensor."""
    if pad < 0:
        raise InvalidArgumentError(f"pad must be >= 0, got {pad}")
    if pad == 0:
        return np.asarray(field)
    return np.pad(np.asarray(field), ((0, 0), (pad, pad), (pad, pad)))


def _extract_patches(padded: np.ndarray, n: int) -> np.ndarray:
    """(seq_len, N+4, N+4) -> (N*N, seq_len, 25) of flattened 5x5 patches,
    row-major over positions and within each patch."""
    seq_len = padded.shape[0]
    windows = np.lib.stride_tricks.sliding_window_view(padded, (SIDE, SIDE), axis=(1, 2))
    # windows: (seq_len, N, N, 5, 5) -> (N, N, seq_len, 25)
    patches = windows.transpose(1, 2, 0, 3, 4).reshape(n, n, seq_len, SIDE * SIDE)
    return patches.reshape(n * n, seq_len, SIDE * SIDE)


def upscale_step(field: FieldState, model: SurrogateTransformer, chunk_size: int = 256) -> np.ndarray:
    """One frame of NxN chemistry: N^2 patch predictions, one per position."""
    if not getattr(model, "ready", True):
        raise ModelNotReadyError("surrogate model is not trained")
    if field.seq_len > model.config.seq_len:
        raise ShapeError(
            f"field depth {field.seq_len} exceeds the model's window {model.config.seq_len}"
        )
    n = field.n
    motors = _extract_patches(pad_grid(field.motors, PAD), n)
    chem = _extract_patches(pad_grid(field.chem, PAD), n)
    was_training = model.training
    model.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, n * n, chunk_size):
            m = torch.from_numpy(motors[start : start + chunk_size])
            c = torch.from_numpy(chem[start : start + chunk_size])
            pred = model(m, c).prediction
            outs.append(pred[:, -1, CENTRE].numpy())
    model.train(was_training)
    return np.concatenate(outs).reshape(n, n)


def upscale_rollout(
    field0: FieldState,
    motor_program: np.ndarray,
    model: SurrogateTransformer,
    steps: int,
    chunk_size: int = 256,
) -> np.ndarray:
    """Autoregressive NxN rollout: each step's output frame is appended to
    the chemistry field (clamped into [0, 1], oldest frame dropped) while
    the motor field advances along motor_program. Returns (steps, N, N)."""
    if steps < 1:
        raise InvalidArgumentError("steps must be >= 1")
    motor_program = np.asarray(motor_program, dtype=np.float32)
    if motor_program.ndim != 3 or motor_program.shape[1:] != (field0.n, field0.n):
        raise ShapeError(
            f"motor program must be (T, {field0.n}, {field0.n}), got {motor_program.shape}"
        )
    if motor_program.shape[0] < steps:
        raise InvalidArgumentError(
            f"motor program of {motor_program.shape[0]} frames is shorter than {steps} steps"
        )
    field = field0.copy()
    frames = np.empty((steps, field.n, field.n), dtype=np.float32)
    for s in range(steps):
        frame = np.clip(upscale_step(field, model, chunk_size), 0.0, 1.0)
        frames[s] = frame
        field.chem = np.concatenate([field.chem[1:], frame[None]]).astype(np.float32)
        field.motors = np.concatenate([field.motors[1:], motor_program[s][None]]).astype(np.float32)
    return frames


def write_field_rollout(frames: np.ndarray, path) -> None:
    """Persist a (steps, N, N) rollout as a tensor file."""
    frames = np.asarray(frames, dtype=np.float32)
    write_tensors(path, {"kind": "field_rollout", "shape": list(frames.shape)}, {"frames": frames})


def save_frame_pngs(frames: np.ndarray, out_dir, prefix: str = "frame") -> list[str]:
    """Dump one grayscale-to-hot PNG heatmap per frame (values in [0, 1])."""
    from pathlib import Path

    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(np.asarray(frames)):
        v = np.clip(frame, 0.0, 1.0)
        # cold blue -> hot red ramp
        rgb = np.stack([v * 255, v * 64, (1.0 - v) * 255], axis=-1).astype(np.uint8)
        img = Image.fromarray(rgb, mode="RGB").resize((frame.shape[1] * 16, frame.shape[0] * 16), Image.NEAREST)
        p = out_dir / f"{prefix}_{i:05d}.png"
        img.save(p)
        paths.append(str(p))
    return paths
