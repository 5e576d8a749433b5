"""Experiment ingestion and preprocessing.

Turns recorded experiments (25 motor speeds + 25 chemistry readouts per
frame) into the fixed-length motor/chemistry windows the world model trains
on: decimation, blue-signal centering and normalization, binarisation,
windowing and batching. Experiments live on disk as JSON-lines, one frame
per line: {"t": int, "motors": [25 floats], "chem": [25 floats]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    InsufficientDataError,
    InvalidArgumentError,
    InvalidDataError,
    OutOfRangeError,
)
from .grid import N_CELLS


def _as_cells(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (N_CELLS,):
        raise InvalidDataError(f"{name} must have exactly {N_CELLS} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidDataError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class MotorFrame:
    """One grid snapshot of stirrer actuation: 25 speeds in [-1, 1].

    Sign is direction (+1 full clockwise, -1 full counter-clockwise, 0 off),
    row-major 5x5 layout.
    """

    speeds: np.ndarray

    def __post_init__(self):
        arr = _as_cells(self.speeds, "motor speeds")
        if np.any(np.abs(arr) > 1.0):
            raise OutOfRangeError("motor speeds must lie in [-1, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "speeds", arr)


@dataclass(frozen=True)
class ChemFrame:
    """One grid snapshot of the normalized oscillation signal: 25 values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_cells(self.values, "chem values")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise OutOfRangeError("chem values must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class BinaryChemFrame:
    """25 oscillation bits, 1 where a cell is oscillating."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.shape != (N_CELLS,):
            raise InvalidDataError(f"bits must have exactly {N_CELLS} entries")
        if not np.all((arr == 0) | (arr == 1)):
            raise InvalidDataError("bits must be exactly 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)


class ExperimentRecord:
    """An aligned sequence of (time_index, motors, chem) frames.

    Stored internally as arrays: times (T,), motors (T, 25), chem (T, 25).
    Time indices are strictly increasing and start at 0.
    """

    def __init__(self, times, motors, chem):
        times = np.asarray(times, dtype=np.int64)
        motors = np.asarray(motors, dtype=np.float64)
        chem = np.asarray(chem, dtype=np.float64)
        if times.ndim != 1 or motors.shape != (len(times), N_CELLS) or chem.shape != (len(times), N_CELLS):
            raise InvalidDataError(
                f"misaligned record: times {times.shape}, motors {motors.shape}, chem {chem.shape}"
            )
        if len(times) == 0:
            raise EmptyInputError("record has no frames")
        if times[0] != 0 or np.any(np.diff(times) <= 0):
            raise InvalidDataError("time_index must be strictly increasing and start at 0")
        if not (np.all(np.isfinite(motors)) and np.all(np.isfinite(chem))):
            raise InvalidDataError("record contains non-finite values")
        self.times = times
        self.motors = motors
        self.chem = chem

    def __len__(self) -> int:
        return len(self.times)

    def frames(self) -> Iterator[tuple[int, MotorFrame, ChemFrame]]:
        for i in range(len(self)):
            yield int(self.times[i]), MotorFrame(self.motors[i]), ChemFrame(self.chem[i])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ExperimentRecord)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.motors, other.motors)
            and np.array_equal(self.chem, other.chem)
        )


@dataclass(frozen=True)
class SequencePair:
    """One training window: motors, chem inputs, and chem targets shifted
    one sampled step ahead of the inputs (teacher forcing)."""

    motors: np.ndarray
    chem_in: np.ndarray
    chem_target: np.ndarray

    def __post_init__(self):
        shapes = {self.motors.shape, self.chem_in.shape, self.chem_target.shape}
        if len(shapes) != 1:
            raise InvalidDataError(f"sequence arrays disagree on shape: {shapes}")
        shape = self.motors.shape
        if len(shape) != 2 or shape[1] != N_CELLS:
            raise InvalidDataError(f"sequence arrays must be (seq_len, {N_CELLS}), got {shape}")

    @property
    def seq_len(self) -> int:
        return self.motors.shape[0]


@dataclass(frozen=True)
class Batch:
    """A stack of sequence pairs, shape (batch, seq_len, 25) each.

    The final batch of an epoch may hold fewer pairs; it is flagged partial.
    """

    motors: np.ndarray
    chem_in: np.ndarray
    chem_target: np.ndarray
    partial: bool = False

    def __len__(self) -> int:
        return self.motors.shape[0]


def decimate_frames(record: ExperimentRecord, factor: int) -> ExperimentRecord:
    """Keep every `factor`-th frame (original indices 0, factor, 2*factor, ...)
    and renumber time from 0."""
    if factor < 1:
        raise InvalidArgumentError(f"decimation factor must be >= 1, got {factor}")
    if len(record) == 0:
        raise EmptyInputError("cannot decimate an empty record")
    keep = np.arange(0, len(record), factor)
    return ExperimentRecord(
        times=np.arange(len(keep)),
        motors=record.motors[keep],
        chem=record.chem[keep],
    )


def blue_channel_signal(raw: np.ndarray, window: int) -> np.ndarray:
    """Centre and normalize a per-cell blue-channel series.

    For each cell: subtract a trailing moving average of width `window`
    (shorter at the start of the series), then min-max normalize that cell's
    centered series to [0, 1]. Cells whose centered series is constant come
    out all-zero: dead cells are legal data.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim == 1:
        raw = raw[:, None]
    if window < 1:
        raise InvalidArgumentError(f"moving-average window must be >= 1, got {window}")
    if raw.shape[0] < 1:
        raise InvalidDataError("series must have at least one frame")
    if not np.all(np.isfinite(raw)):
        raise InvalidDataError("blue-channel series contains non-finite values")

    csum = np.cumsum(raw, axis=0)
    t = np.arange(raw.shape[0])
    counts = np.minimum(t + 1, window).astype(np.float64)
    # trailing sum over the last `window` frames, truncated at the start
    trail = csum.copy()
    trail[window:] = csum[window:] - csum[:-window]
    centered = raw - trail / counts[:, None]

    lo = centered.min(axis=0, keepdims=True)
    hi = centered.max(axis=0, keepdims=True)
    span = hi - lo
    # dead cells: a centered series that is constant up to accumulated
    # rounding noise of the running sums normalizes to all zeros
    scale = np.maximum(np.abs(raw).max(axis=0, keepdims=True), 1.0)
    flat = span <= 1e-9 * scale
    span = np.where(flat, 1.0, span)
    out = (centered - lo) / span
    out[:, flat[0]] = 0.0
    return out


def binarize_cells(chem: ChemFrame, theta: float) -> BinaryChemFrame:
    """Threshold the normalized signal: bit = 1 iff value >= theta."""
    if not 0.0 < theta < 1.0:
        raise InvalidArgumentError(f"threshold must lie in (0, 1), got {theta}")
    return BinaryChemFrame((chem.values >= theta).astype(np.uint8))


def normalize_motors(raw, max_raw: float) -> MotorFrame:
    """Scale raw motor speeds by the rig's maximum: +max_raw -> +1 (full
    clockwise), -max_raw -> -1, 0 -> 0."""
    if max_raw <= 0:
        raise InvalidArgumentError(f"max_raw must be positive, got {max_raw}")
    arr = np.asarray(raw, dtype=np.float64)
    if np.any(np.abs(arr) > max_raw):
        raise OutOfRangeError("raw motor speed exceeds max_raw")
    return MotorFrame(arr / max_raw)


def make_sequences(series_len: int, sample_every: int, seq_len: int, stride: int) -> list[np.ndarray]:
    """Index windows over a series: window k starts at k (k = 0, stride, ...)
    and picks `seq_len` indices spaced `sample_every` apart.

    Count = floor((series_len - 1 - sample_every*(seq_len-1)) / stride) + 1.
    """
    if sample_every < 1 or seq_len < 1 or stride < 1:
        raise InvalidArgumentError("sample_every, seq_len and stride must all be >= 1")
    span = sample_every * (seq_len - 1)
    if series_len < span + 1:
        raise InsufficientDataError(
            f"series of {series_len} frames is too short for seq_len {seq_len} sampled every {sample_every}"
        )
    n = (series_len - 1 - span) // stride + 1
    base = np.arange(seq_len) * sample_every
    return [k * stride + base for k in range(n)]


def build_sequence_pairs(
    record: ExperimentRecord, sample_every: int, seq_len: int, stride: int = 1
) -> list[SequencePair]:
    """Window a record into teacher-forcing pairs.

    Targets are the chem series shifted one sampled step ahead, so the last
    window must leave `sample_every` frames of headroom at the end.
    """
    windows = make_sequences(len(record) - sample_every, sample_every, seq_len, stride)
    pairs = []
    for idx in windows:
        pairs.append(
            SequencePair(
                motors=record.motors[idx],
                chem_in=record.chem[idx],
                chem_target=record.chem[idx + sample_every],
            )
        )
    return pairs


def batch_sequences(pairs: Sequence[SequencePair], batch_size: int) -> list[Batch]:
    """Group pairs in order into batches of `batch_size`; the last batch may
    be smaller and is flagged partial."""
    if batch_size < 1:
        raise InvalidArgumentError(f"batch_size must be >= 1, got {batch_size}")
    if len(pairs) == 0:
        raise EmptyInputError("no sequence pairs to batch")
    batches = []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        batches.append(
            Batch(
                motors=np.stack([p.motors for p in chunk]).astype(np.float32),
                chem_in=np.stack([p.chem_in for p in chunk]).astype(np.float32),
                chem_target=np.stack([p.chem_target for p in chunk]).astype(np.float32),
                partial=len(chunk) < batch_size,
            )
        )
    return batches


def write_experiment(record: ExperimentRecord, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for i in range(len(record)):
            fh.write(
                json.dumps(
                    {
                        "t": int(record.times[i]),
                        "motors": [round(float(v), 9) for v in record.motors[i]],
                        "chem": [round(float(v), 9) for v in record.chem[i]],
                    }
                )
            )
            fh.write("\n")


def read_experiment(path) -> ExperimentRecord:
    path = Path(path)
    times, motors, chem = [], [], []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                times.append(obj["t"])
                motors.append(obj["motors"])
                chem.append(obj["chem"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InvalidDataError(f"{path}:{lineno}: bad experiment line: {exc}") from exc
    if not times:
        raise EmptyInputError(f"{path}: no frames")
    return ExperimentRecord(times=times, motors=motors, chem=chem)


def load_experiments(data_dir) -> list[ExperimentRecord]:
    """All *.jsonl experiments under a directory, sorted by filename."""
    paths = sorted(Path(data_dir).glob("*.jsonl"))
    if not paths:
        raise EmptyInputError(f"no .jsonl experiments under {data_dir}")
    return [read_experiment(p) for p in paths]
