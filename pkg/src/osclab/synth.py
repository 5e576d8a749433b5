"""Synthetic reference oscillator for desk-scale training.

Each cell carries a phase that advances with the local stirring speed plus a
weak contribution from its 4-neighbours and a slow baseline drift; the
readout is a sharpened positive half-sine, so cells emit short pulses, with
period ~2*pi/0.37 ~ 17 steps at full stir and ~2*pi/0.02 ~ 314 steps at
rest. Deterministic for a fixed config and motor program.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datapipe import ExperimentRecord, MotorFrame
from .errors import InvalidArgumentError
from .grid import N_CELLS, SIDE, neighbours4


@dataclass(frozen=True)
class SynthConfig:
    omega0: float = 0.35  # rad/step at full stir
    kappa: float = 0.25  # neighbour coupling
    omega_b: float = 0.02  # baseline drift, rad/step
    pulse_sharpness: int = 8  # even exponent on the half-sine
    steps: int = 600
    seed: int = 0

    def __post_init__(self):
        if self.omega0 <= 0:
            raise InvalidArgumentError("omega0 must be positive")
        if self.kappa < 0 or self.omega_b < 0:
            raise InvalidArgumentError("kappa and omega_b must be non-negative")
        if self.pulse_sharpness < 2 or self.pulse_sharpness % 2 != 0:
            raise InvalidArgumentError("pulse_sharpness must be an even integer >= 2")
        if self.steps < 1:
            raise InvalidArgumentError("steps must be >= 1")


def synth_experiment(cfg: SynthConfig, motor_program: Sequence[MotorFrame] | np.ndarray) -> ExperimentRecord:
    """Run the reference oscillator under a motor program of cfg.steps frames."""
    if isinstance(motor_program, np.ndarray):
        motors = np.asarray(motor_program, dtype=np.float64)
    else:
        motors = np.stack([f.speeds if isinstance(f, MotorFrame) else np.asarray(f, dtype=np.float64) for f in motor_program])
    if motors.shape != (cfg.steps, N_CELLS):
        raise InvalidArgumentError(
            f"motor program shape {motors.shape} does not match ({cfg.steps}, {N_CELLS})"
        )

    phase = np.zeros(N_CELLS, dtype=np.float64)
    if cfg.seed != 0:
        phase += np.random.default_rng(cfg.seed).uniform(0.0, 0.1, size=N_CELLS)

    nbrs = neighbours4(SIDE)
    nbr_mat = np.zeros((N_CELLS, N_CELLS), dtype=np.float64)
    for c, idx in enumerate(nbrs):
        nbr_mat[c, idx] = 1.0 / len(idx)

    chem = np.empty((cfg.steps, N_CELLS), dtype=np.float64)
    for t in range(cfg.steps):
        chem[t] = np.maximum(0.0, np.sin(phase)) ** cfg.pulse_sharpness
        m = np.abs(motors[t])
        phase = phase + cfg.omega0 * (m + cfg.kappa * (nbr_mat @ m)) + cfg.omega_b

    return ExperimentRecord(times=np.arange(cfg.steps), motors=motors, chem=chem)


def random_motor_program(
    steps: int,
    rng: np.random.Generator,
    hold_range: tuple[int, int] = (40, 80),
    active_range: tuple[int, int] | None = None,
    n_cells: int = N_CELLS,
) -> np.ndarray:
    """Piecewise-constant random actuation, mimicking lab runs where motor
    sets were switched every minute or two: each segment enables a random
    subset of motors at random speeds and directions."""
    if steps < 1:
        raise InvalidArgumentError("steps must be >= 1")
    if active_range is None:
        active_range = (min(3, n_cells), n_cells)
    out = np.zeros((steps, n_cells), dtype=np.float64)
    t = 0
    while t < steps:
        hold = int(rng.integers(hold_range[0], hold_range[1] + 1))
        frame = np.zeros(n_cells)
        n_active = int(rng.integers(active_range[0], active_range[1] + 1))
        cells = rng.choice(n_cells, size=n_active, replace=False)
        frame[cells] = rng.uniform(-1.0, 1.0, size=n_active)
        out[t : t + hold] = frame
        t += hold
    return out
