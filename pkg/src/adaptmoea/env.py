"""Adaptive parameter control environment around NSGA-III.

One environment step runs one generation with the mutation settings chosen
by the agent. The observation summarizes optimizer progress in seven
features and the reward is the normalized hypervolume of the new first
front, so an undiscounted episode return is the sum of per-generation
hypervolumes.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from adaptmoea.core import (
    Population,
    VariationParams,
    das_dennis_points,
    divisions_for,
    evolve_generation,
    non_dominated_sort,
    random_population,
)
from adaptmoea.errors import ParameterError, StateError
from adaptmoea.hv import ParetoArchive, normalized_hv
from adaptmoea.problems import ProblemSpec, make_problem

ETA_GRID = (1.0, 5.0, 10.0, 20.0, 40.0)
INDPB_GRID = (0.01, 0.05, 0.10)
N_ACTIONS = len(ETA_GRID) * len(INDPB_GRID)
N_FEATURES = 7
STAGNATION_CAP = 10
IMPROVEMENT_EPS = 1e-6
NADIR_MARGIN = 1.1
ETA_SBX = 30.0


def decode_action(index: int) -> tuple[float, float]:
    """Row-major grid cell: eta varies slowest, indpb fastest."""
    if not 0 <= index < N_ACTIONS:
        raise ParameterError(f"action index {index} outside [0, {N_ACTIONS})")
    return ETA_GRID[index // len(INDPB_GRID)], INDPB_GRID[index % len(INDPB_GRID)]


def encode_action(eta_plm: float, indpb: float) -> int:
    try:
        return ETA_GRID.index(eta_plm) * len(INDPB_GRID) + INDPB_GRID.index(indpb)
    except ValueError:
        raise ParameterError(f"({eta_plm}, {indpb}) is not a grid cell") from None


@dataclass(frozen=True)
class StateVector:
    g_norm: float
    stagnation: float
    o_mean: float
    o_min: float
    sigma: float
    hv: float
    pareto_fill: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.g_norm, self.stagnation, self.o_mean, self.o_min, self.sigma, self.hv,
             self.pareto_fill]
        )


def state_features(F, lo, hi, hv, front_size, pop_size, generation, total_generations,
                   stagnation) -> StateVector:
    """Assemble the observation from a population snapshot.

    ``lo``/``hi`` are the running per-objective extremes seen so far in the
    episode; objectives with ``hi == lo`` normalize to 0.
    """
    F = np.asarray(F, dtype=float)
    lo = np.asarray(lo, dtype=float)
    span = np.asarray(hi, dtype=float) - lo
    flat = span <= 0
    Z = np.where(flat, 0.0, (F - lo) / np.where(flat, 1.0, span))
    return StateVector(
        g_norm=generation / total_generations,
        stagnation=min(stagnation, STAGNATION_CAP) / STAGNATION_CAP,
        o_mean=float(Z.mean()),
        o_min=float(Z.min(axis=0).mean()),
        sigma=float(Z.std(axis=0).mean()),
        hv=float(hv),
        pareto_fill=front_size / pop_size,
    )


@dataclass
class EpisodeConfig:
    generations: int = 200
    pop_size: int = 20
    problem: str = "dtlz2"
    seed: int = 0
    problem_kwargs: dict = field(default_factory=dict)
    divisions: int | None = None

    def __post_init__(self):
        if self.generations < 1:
            raise ParameterError("an episode needs at least one generation")
        if self.pop_size < 4:
            raise ParameterError("population size must be at least 4")


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class TraceRow:
    episode: int
    generation: int
    action_index: int  # -1 when no agent chose the parameters
    reward: float
    hv: float
    stagnation: int


class ApcEnv:
    """NSGA-III wrapped as a sequential decision problem.

    Args:
        problem: the problem to optimize.
        config: episode length, population size and seed.
        track_archive: also keep a cumulative non-dominated archive and its
            hypervolume (costs an extra hypervolume per step).
    """

    def __init__(self, problem: ProblemSpec, config: EpisodeConfig, track_archive: bool = True,
                 executor=None):
        self.problem = problem
        self.config = config
        self.track_archive = track_archive
        self.executor = executor
        p = config.divisions or divisions_for(problem.n_obj, config.pop_size)
        self.refs = das_dennis_points(problem.n_obj, p)
        self.pop: Population | None = None
        self.done = True

    def reset(self, seed: int | None = None) -> np.ndarray:
        seed = self.config.seed if seed is None else seed
        self.rng = np.random.default_rng(seed)
        self.pop = random_population(self.problem, self.config.pop_size, self.rng, self.executor)
        F = self.pop.F
        if self.problem.known_ideal is not None and self.problem.known_nadir is not None:
            self.ideal = np.asarray(self.problem.known_ideal, dtype=float)
            nadir = np.asarray(self.problem.known_nadir, dtype=float)
        else:
            self.ideal = F.min(axis=0)
            nadir = F.max(axis=0)
        self.nadir_ref = self.ideal + NADIR_MARGIN * (nadir - self.ideal)
        self.lo = F.min(axis=0)
        self.hi = F.max(axis=0)
        self.archive = ParetoArchive(self.problem.n_obj) if self.track_archive else None
        self.stagnation = 0
        self.hv_history: list[float] = []
        self.archive_history: list[float] = []
        self.done = False
        self._observe(first=True)
        return self.state.as_array()

    def _observe(self, first: bool = False) -> None:
        F = self.pop.F
        self.lo = np.minimum(self.lo, F.min(axis=0))
        self.hi = np.maximum(self.hi, F.max(axis=0))
        front = F[non_dominated_sort(F)[0]]
        self.hv = normalized_hv(front, self.ideal, self.nadir_ref)
        self.hv_history.append(self.hv)
        if first:
            self.best_hv = self.hv
        elif self.hv > self.best_hv + IMPROVEMENT_EPS:
            self.stagnation = 0
            self.best_hv = self.hv
        else:
            self.stagnation = min(self.stagnation + 1, STAGNATION_CAP)
        if self.archive is not None:
            self.archive.update(front)
            self.archive_history.append(normalized_hv(self.archive.F, self.ideal, self.nadir_ref))
        self.state = state_features(
            F, self.lo, self.hi, self.hv, front.shape[0], len(self.pop), self.pop.generation,
            self.config.generations, self.stagnation,
        )

    def params_for(self, action: int) -> VariationParams:
        eta, indpb = decode_action(action)
        return VariationParams(eta_sbx=ETA_SBX, eta_plm=eta, indpb=indpb)

    def step(self, action: int):
        return self.step_params(self.params_for(action))

    def step_params(self, params: VariationParams):
        """Advance one generation with explicit operator settings."""
        if self.done:
            raise StateError("episode finished; call reset()")
        self.pop = evolve_generation(self.pop, self.problem, params, self.refs, self.rng,
                                     self.executor)
        self._observe()
        self.done = self.pop.generation >= self.config.generations
        return self.state.as_array(), self.hv, self.done


# --- policies -----------------------------------------------------------------


class RandomPolicy:
    """Uniform action choice; the untrained baseline."""

    def __init__(self, rng):
        self.rng = rng

    def __call__(self, state) -> int:
        return int(self.rng.integers(N_ACTIONS))


class ConstantPolicy:
    def __init__(self, action: int):
        decode_action(action)
        self.action = action

    def __call__(self, state) -> int:
        return self.action


@dataclass
class EpisodeResult:
    ret: float
    rows: list[TraceRow]
    transitions: list[Transition]

    @property
    def hv_trace(self) -> list[float]:
        return [r.reward for r in self.rows]

    @property
    def archive_trace(self) -> list[float]:
        return [r.hv for r in self.rows]

    @property
    def actions(self) -> list[int]:
        return [r.action_index for r in self.rows]


def run_episode(policy: Callable | None, config: EpisodeConfig, problem: ProblemSpec | None = None,
                episode: int = 0, track_archive: bool = True, executor=None) -> EpisodeResult:
    """Run one optimization run under ``policy``.

    ``policy`` maps a state array to an action index. ``None`` keeps the
    fixed NSGA-III defaults every generation and never consults an agent.
    """
    problem = problem or make_problem(config.problem, **config.problem_kwargs)
    env = ApcEnv(problem, config, track_archive=track_archive, executor=executor)
    s = env.reset()
    rows, transitions = [], []
    ret = 0.0
    while True:
        if policy is None:
            a = -1
            s2, r, done = env.step_params(VariationParams())
        else:
            a = int(policy(s))
            s2, r, done = env.step(a)
            transitions.append(Transition(s, a, r, s2, done))
        ret += r
        rows.append(TraceRow(episode, env.pop.generation, a, r,
                             env.archive_history[-1] if track_archive else r,
                             env.stagnation))
        s = s2
        if done:
            break
    return EpisodeResult(ret, rows, transitions)


TRACE_COLUMNS = ("episode", "generation", "action_index", "reward", "hv", "stagnation")


def write_trace_csv(rows, path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        w.writeheader()
        for row in rows:
            d = asdict(row)
            d["reward"] = repr(float(d["reward"]))
            d["hv"] = repr(float(d["hv"]))
            w.writerow(d)
