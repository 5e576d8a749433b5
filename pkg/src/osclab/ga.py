"""Genetic search for motor programs that make the surrogate chemistry act
as an XOR gate: rows 1 and 5 of the grid are the gate inputs, the centre
cell is the output, and the 15 motors of rows 2-4 are the genome."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyInputError, InvalidArgumentError, ModelNotReadyError
from .grid import CENTRE, N_CELLS, N_FREE, OTHERS, ROW_BOTTOM, ROW_TOP, ROWS_FREE
from .model.rollout import rollout
from .model.transformer import SurrogateTransformer

XOR_CASES = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class Genome:
    """15 motor speeds for grid rows 2-4, row-major, each in [-1, 1]."""

    genes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.genes, dtype=np.float64)
        if arr.shape != (N_FREE,):
            raise InvalidArgumentError(f"genome must have {N_FREE} genes, got {arr.shape}")
        if np.any(np.abs(arr) > 1.0):
            raise InvalidArgumentError("genes must lie in [-1, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "genes", arr)


@dataclass(frozen=True)
class XorCase:
    input_bits: tuple[int, int]
    target_bit: int

    def __post_init__(self):
        a, b = self.input_bits
        if a not in (0, 1) or b not in (0, 1):
            raise InvalidArgumentError("XOR inputs must be bits")
        if self.target_bit != a ^ b:
            raise InvalidArgumentError("target_bit must equal a XOR b")

    @classmethod
    def of(cls, a: int, b: int) -> "XorCase":
        return cls(input_bits=(a, b), target_bit=a ^ b)


@dataclass(frozen=True)
class GAConfig:
    pop_size: int = 512
    n_elite: int = 50
    n_generations: int = 100
    mutation_rate: float = 0.05
    rollout_horizon: int = 150
    seed: int = 0
    input_speed: float = 1.0  # speed an enabled I/O row runs at

    def __post_init__(self):
        if not 0 <= self.n_elite < self.pop_size:
            raise InvalidArgumentError("n_elite must be smaller than pop_size")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise InvalidArgumentError("mutation_rate must lie in [0, 1]")
        if self.n_generations < 1 or self.rollout_horizon < 1:
            raise InvalidArgumentError("n_generations and rollout_horizon must be >= 1")


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best: float
    mean: float
    std: float


@dataclass
class GAResult:
    best: Genome
    score: float
    bits: tuple[int, int, int, int]
    history: list[GenerationStats]


class RolloutSimulator:
    """Adapts a trained transformer to the GA's forward-model interface:
    hold one motor frame constant and roll the chemistry forward."""

    def __init__(self, model: SurrogateTransformer, ready: bool = True):
        self.model = model
        self.seq_len = model.config.seq_len
        self.ready = ready

    def simulate(self, motor_frame: np.ndarray, chem_seed: np.ndarray, horizon: int) -> np.ndarray:
        motors = np.tile(motor_frame, (self.seq_len + horizon - 1, 1))
        return rollout(self.model, motors, chem_seed, horizon)


def encode_case_motors(genome: Genome, case: XorCase, input_speed: float = 1.0) -> np.ndarray:
    """Row 1 carries input a, row 5 input b (0 -> off, 1 -> input_speed);
    rows 2-4 carry the genes."""
    frame = np.empty(N_CELLS, dtype=np.float64)
    a, b = case.input_bits
    frame[ROW_TOP] = a * input_speed
    frame[ROWS_FREE] = genome.genes
    frame[ROW_BOTTOM] = b * input_speed
    return frame


def xor_fitness(genome: Genome, model, chem_seed: np.ndarray, cfg: GAConfig):
    """Score a genome over the four XOR cases.

    Per case: simulate with the case's motor frame held constant, compute
    delta = mean-over-time(centre) - mean-over-time-and-cells(other 24);
    the predicted bit is 1 iff delta > 0 (a tie counts as 0) and the margin
    is delta for target 1, -delta for target 0. Score = sum of margins.
    """
    if not getattr(model, "ready", True):
        raise ModelNotReadyError("forward model is not trained")
    margins = []
    bits = []
    for a, b in XOR_CASES:
        case = XorCase.of(a, b)
        frame = encode_case_motors(genome, case, cfg.input_speed)
        pred = model.simulate(frame, chem_seed, cfg.rollout_horizon)
        delta = float(pred[:, CENTRE].mean() - pred[:, OTHERS].mean())
        bits.append(1 if delta > 0 else 0)
        margins.append(delta if case.target_bit == 1 else -delta)
    return float(sum(margins)), tuple(bits)


def roulette_select(fitnesses: Sequence[float], rng: np.random.Generator) -> int:
    """Spin a roulette wheel over min-shifted fitnesses.

    Weights are f - min(f) + delta with delta = 1e-6 * (max - min + 1), so
    negative scores are legal and an all-equal population selects uniformly.
    """
    if len(fitnesses) == 0:
        raise EmptyInputError("cannot select from an empty population")
    f = np.asarray(fitnesses, dtype=np.float64)
    delta = 1e-6 * (f.max() - f.min() + 1.0)
    weights = f - f.min() + delta
    probs = weights / weights.sum()
    return int(rng.choice(len(f), p=probs))


def crossover_at(g1: Genome, g2: Genome, p: int, q: int) -> tuple[Genome, Genome]:
    """Swap the gene slice [p:q) between two parents."""
    if not 0 <= p < q <= N_FREE:
        raise InvalidArgumentError(f"cut points must satisfy 0 <= p < q <= {N_FREE}")
    c1 = g1.genes.copy()
    c2 = g2.genes.copy()
    c1[p:q], c2[p:q] = g2.genes[p:q], g1.genes[p:q]
    return Genome(c1), Genome(c2)


def two_point_crossover(g1: Genome, g2: Genome, rng: np.random.Generator) -> tuple[Genome, Genome]:
    """Crossover at cut points drawn uniformly over 0 <= p < q <= 15."""
    p, q = sorted(rng.choice(N_FREE + 1, size=2, replace=False))
    return crossover_at(g1, g2, int(p), int(q))


def mutate(g: Genome, rate: float, rng: np.random.Generator) -> Genome:
    """Resample each gene uniformly in [-1, 1] with probability `rate`."""
    if not 0.0 <= rate <= 1.0:
        raise InvalidArgumentError(f"mutation rate must lie in [0, 1], got {rate}")
    hit = rng.random(N_FREE) < rate
    fresh = rng.uniform(-1.0, 1.0, size=N_FREE)
    return Genome(np.where(hit, fresh, g.genes))


def run_ga(
    model,
    chem_seed: np.ndarray,
    cfg: GAConfig,
    progress: Callable[[GenerationStats], None] | None = None,
) -> GAResult:
    """Elitist GA: evaluate, rank, carry the elite unchanged, refill via
    roulette parents + two-point crossover + mutation. Deterministic for a
    fixed cfg.seed; the best-ever score never decreases."""
    rng = np.random.default_rng(cfg.seed)
    pop = [Genome(rng.uniform(-1.0, 1.0, size=N_FREE)) for _ in range(cfg.pop_size)]
    best_genome = None
    best_score = -np.inf
    best_bits = (0, 0, 0, 0)
    history = []

    for gen in range(1, cfg.n_generations + 1):
        scored = [xor_fitness(g, model, chem_seed, cfg) for g in pop]
        fits = np.array([s for s, _ in scored])
        order = np.argsort(-fits, kind="stable")
        if fits[order[0]] > best_score:
            best_score = float(fits[order[0]])
            best_genome = pop[order[0]]
            best_bits = scored[order[0]][1]
        stats = GenerationStats(gen, float(fits.max()), float(fits.mean()), float(fits.std()))
        history.append(stats)
        if progress is not None:
            progress(stats)
        if gen == cfg.n_generations:
            break

        elite = [pop[i] for i in order[: cfg.n_elite]]
        children: list[Genome] = []
        while len(children) < cfg.pop_size - cfg.n_elite:
            p1 = pop[roulette_select(fits, rng)]
            p2 = pop[roulette_select(fits, rng)]
            c1, c2 = two_point_crossover(p1, p2, rng)
            children.append(mutate(c1, cfg.mutation_rate, rng))
            if len(children) < cfg.pop_size - cfg.n_elite:
                children.append(mutate(c2, cfg.mutation_rate, rng))
        pop = elite + children

    return GAResult(best=best_genome, score=best_score, bits=best_bits, history=history)


def write_ga_history_csv(history: Sequence[GenerationStats], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best", "mean", "std"])
        for h in history:
            writer.writerow([h.generation, f"{h.best:.8g}", f"{h.mean:.8g}", f"{h.std:.8g}"])


def write_best_genome_json(result: GAResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"genes": [float(g) for g in result.best.genes], "score": result.score, "bits": list(result.bits)},
            fh,
            indent=2,
        )
        fh.write("\n")
