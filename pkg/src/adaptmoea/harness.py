"""Experiment orchestration: training, policy comparisons, transfer and
sensitivity runs, and action-fraction analysis. Every artifact is a CSV whose
first line is a ``#`` comment carrying the config hash and seeds."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from adaptmoea.core import NSGA3, non_dominated_sort
from adaptmoea.ddqn import AgentConfig, GreedyPolicy, load_policy, save_policy, train_agent
from adaptmoea.ddqn import write_curve_csv
from adaptmoea.env import N_ACTIONS, ApcEnv, EpisodeConfig, RandomPolicy, run_episode
from adaptmoea.env import write_trace_csv
from adaptmoea.errors import ConfigError, PolicyLoadError
from adaptmoea.hv import ParetoArchive, normalized_hv
from adaptmoea.problems import PROBLEM_NAMES, make_problem
from adaptmoea.wdcp.scenario import VARIANTS

MODES = ("train", "eval-trained", "eval-random", "eval-fixed")
# the fixed baseline runs untuned default operator settings, not a tuned NSGA-III
FIXED_LABEL = "fixed-defaults"


@dataclass
class ExperimentConfig:
    problem: str = "dtlz2"
    problem_kwargs: dict = field(default_factory=dict)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    mode: str = "train"
    seeds: list[int] = field(default_factory=lambda: [0])
    episodes: int = 1000
    out: str = "runs"
    variant: str | None = None
    policy: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.problem not in PROBLEM_NAMES:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {PROBLEM_NAMES}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.mode == "eval-trained" and not self.policy:
            raise ConfigError("eval-trained needs a policy path")
        if self.variant is not None:
            if self.problem != "wdcp-lite":
                raise ConfigError("scenario variants only apply to wdcp-lite")
            if self.variant not in VARIANTS:
                raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.episodes < 1 or self.workers < 1:
            raise ConfigError("episodes and workers must be positive")
        self.seeds = [int(s) for s in self.seeds]
        self.episode = replace(self.episode, problem=self.problem,
                               problem_kwargs=self.problem_kwargs_full())

    def problem_kwargs_full(self) -> dict:
        kw = dict(self.problem_kwargs)
        if self.variant is not None:
            kw["variant"] = self.variant
        return kw

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        extra = set(d) - known - {"generations", "pop_size", "divisions"}
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        ep = {k: d.pop(k) for k in ("generations", "pop_size", "divisions") if k in d}
        try:
            episode = EpisodeConfig(**ep)
            agent = AgentConfig(**(d.pop("agent", None) or {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        seeds = d.pop("seeds", [0])
        if isinstance(seeds, int):
            seeds = list(range(seeds))
        return cls(episode=episode, agent=agent, seeds=seeds, **d)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "problem_kwargs": dict(self.problem_kwargs),
            "generations": self.episode.generations,
            "pop_size": self.episode.pop_size,
            "divisions": self.episode.divisions,
            "agent": {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in asdict(self.agent).items()},
            "mode": self.mode,
            "seeds": list(self.seeds),
            "episodes": self.episodes,
            "out": self.out,
            "variant": self.variant,
            "policy": self.policy,
            "workers": self.workers,
        }

    def config_hash(self) -> str:
        """Hash of everything that influences the data; output location and
        worker count are excluded."""
        d = self.to_dict()
        for k in ("out", "workers"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def _header(cfg: ExperimentConfig, seeds, **extra) -> str:
    parts = [f"config_hash={cfg.config_hash()}", "seeds=" + ",".join(map(str, seeds))]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return " ".join(parts)


# --- running episodes -------------------------------------------------------


def _policy_for(mode: str, seed: int, params):
    if mode == "eval-fixed":
        return None
    if mode == "eval-random":
        return RandomPolicy(np.random.default_rng([seed, 1]))
    if mode == "eval-trained":
        return GreedyPolicy(params)
    raise ConfigError(f"{mode} is not an evaluation mode")


def _run_seed(job):
    episode_cfg, mode, seed, params = job
    cfg = replace(episode_cfg, seed=seed)
    return seed, run_episode(_policy_for(mode, seed, params), cfg, episode=seed)


def run_mode(cfg: ExperimentConfig, mode: str, params=None) -> dict:
    """Run one seeded episode per seed; returns ``{seed: EpisodeResult}``
    ordered by seed regardless of completion order."""
    jobs = [(cfg.episode, mode, s, params) for s in sorted(cfg.seeds)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            out = list(pool.map(_run_seed, jobs))
    else:
        out = [_run_seed(j) for j in jobs]
    return dict(sorted(out))


@dataclass
class ModeStats:
    mode: str
    runs: int
    mean_hv: np.ndarray
    std_hv: np.ndarray  # NaN with a single run
    mean_archive_hv: np.ndarray
    max_hv: np.ndarray  # per run, best front hv over the episode
    returns: np.ndarray

    @property
    def median_max_hv(self) -> float:
        return float(np.median(self.max_hv))


@dataclass
class ComparisonReport:
    modes: dict[str, ModeStats]

    def mode_set(self) -> set[str]:
        return set(self.modes)

    def write(self, out_dir, header: str) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.csv", "w", newline="") as fh:
            fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["mode", "generation", "mean_hv", "std_hv", "mean_archive_hv", "runs"])
            for name, st in self.modes.items():
                for g in range(st.mean_hv.size):
                    w.writerow([name, g + 1, repr(float(st.mean_hv[g])), repr(float(st.std_hv[g])),
                                repr(float(st.mean_archive_hv[g])), st.runs])
        with open(out_dir / "summary.csv", "w", newline="") as fh:
            fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["mode", "runs", "median_max_hv", "mean_max_hv", "mean_return"])
            for name, st in self.modes.items():
                w.writerow([name, st.runs, repr(st.median_max_hv), repr(float(st.max_hv.mean())),
                            repr(float(st.returns.mean()))])


def mode_stats(name: str, results: dict) -> ModeStats:
    hv = np.array([r.hv_trace for r in results.values()])
    arch = np.array([r.archive_trace for r in results.values()])
    n = hv.shape[0]
    std = hv.std(axis=0, ddof=1) if n >= 2 else np.full(hv.shape[1], np.nan)
    return ModeStats(name, n, hv.mean(axis=0), std, arch.mean(axis=0), hv.max(axis=1),
                     np.array([r.ret for r in results.values()]))


def _label(mode: str) -> str:
    return FIXED_LABEL if mode == "eval-fixed" else mode.removeprefix("eval-")


def _load(cfg: ExperimentConfig):
    if not cfg.policy:
        raise ConfigError("a policy path is required")
    if not Path(cfg.policy).is_file():
        raise PolicyLoadError(f"policy file not found: {cfg.policy}")
    return load_policy(cfg.policy)


# --- commands ------------------------------------------------------------------


def cmd_train(cfg: ExperimentConfig, callback=None) -> tuple[Path, list]:
    """Train one agent with ``cfg.seeds[0]``; writes ``policy.txt`` and
    ``learning_curve.csv`` into ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = make_problem(cfg.problem, **cfg.episode.problem_kwargs)
    seed = cfg.seeds[0]

    def factory(_):
        return ApcEnv(problem, cfg.episode, track_archive=False)

    params, curve = train_agent(factory, cfg.agent, cfg.episodes, np.random.default_rng(seed),
                                callback)
    path = out / "policy.txt"
    save_policy(params, path)
    write_curve_csv(curve, out / "learning_curve.csv", _header(cfg, [seed], mode="train"))
    return path, curve


def cmd_eval(cfg: ExperimentConfig, modes=None, params=None) -> ComparisonReport:
    """Evaluate one or more policy sources over ``cfg.seeds``.

    Writes one trace CSV per mode and seed plus ``report.csv`` and
    ``summary.csv`` aggregating all requested modes.
    """
    modes = list(modes or [cfg.mode])
    out = Path(cfg.out)
    report = ComparisonReport({})
    for mode in modes:
        if mode == "eval-trained" and params is None:
            params = _load(cfg)
        results = run_mode(cfg, mode, params if mode == "eval-trained" else None)
        label = _label(mode)
        trace_dir = out / "traces" / label
        trace_dir.mkdir(parents=True, exist_ok=True)
        for seed, res in results.items():
            write_trace_csv(res.rows, trace_dir / f"seed_{seed}.csv",
                            _header(cfg, [seed], mode=label))
        report.modes[label] = mode_stats(label, results)
    report.write(out, _header(cfg, cfg.seeds, modes="+".join(report.modes)))
    return report


def action_fractions(results: dict) -> np.ndarray:
    """Generation x action matrix of selection frequencies across runs."""
    acts = np.array([r.actions for r in results.values()])
    counts = np.stack([(acts == a).sum(axis=0) for a in range(N_ACTIONS)], axis=1)
    return counts / acts.shape[0]


def cmd_policy_analyze(cfg: ExperimentConfig, params=None) -> np.ndarray:
    params = _load(cfg) if params is None else params
    results = run_mode(cfg, "eval-trained", params)
    frac = action_fractions(results)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "action_fractions.csv", "w", newline="") as fh:
        fh.write(f"# {_header(cfg, cfg.seeds, mode='policy-analyze')}\n")
        w = csv.writer(fh)
        w.writerow(["generation"] + [f"a{a}" for a in range(N_ACTIONS)])
        for g, row in enumerate(frac):
            w.writerow([g + 1] + [repr(float(v)) for v in row])
    return frac


def cmd_sensitivity(cfg: ExperimentConfig, params=None) -> dict[str, ComparisonReport]:
    """Trained versus fixed on every warehouse scenario variant."""
    if cfg.problem != "wdcp-lite":
        raise ConfigError("sensitivity runs need problem wdcp-lite")
    params = _load(cfg) if params is None else params
    reports = {}
    for variant in VARIANTS:
        sub = replace(cfg, variant=variant, out=str(Path(cfg.out) / variant))
        reports[variant] = cmd_eval(sub, ["eval-trained", "eval-fixed"], params)
    with open(Path(cfg.out) / "sensitivity.csv", "w", newline="") as fh:
        fh.write(f"# {_header(cfg, cfg.seeds, mode='sensitivity')}\n")
        w = csv.writer(fh)
        w.writerow(["variant", "trained_median_max_hv", FIXED_LABEL + "_median_max_hv",
                    "trained_not_worse"])
        for variant, rep in reports.items():
            t = rep.modes["trained"].median_max_hv
            f = rep.modes[FIXED_LABEL].median_max_hv
            w.writerow([variant, repr(t), repr(f), int(t >= f)])
    return reports


def fixed_convergence(problem, pop_size: int, generations: int, seed: int,
                      divisions: int | None = None, nadir_margin: float = 1.1):
    """Run NSGA-III with default operators and track normalized hypervolume.

    The problem must declare its ideal and nadir points.

    Returns:
        ``(front_hv, archive_hv)``, one value per generation including the
        initial population; the archive accumulates every first front seen.
    """
    if problem.known_ideal is None or problem.known_nadir is None:
        raise ConfigError(f"{problem.name} has no known ideal/nadir")
    ideal = np.asarray(problem.known_ideal, dtype=float)
    ref = ideal + nadir_margin * (np.asarray(problem.known_nadir, dtype=float) - ideal)
    archive = ParetoArchive(problem.n_obj)
    front_hv, archive_hv = [], []

    def track(pop):
        front = pop.F[non_dominated_sort(pop.F)[0]]
        archive.update(front)
        front_hv.append(normalized_hv(front, ideal, ref))
        archive_hv.append(normalized_hv(archive.F, ideal, ref))

    NSGA3(problem, pop_size, divisions).run(generations, seed, track)
    return np.array(front_hv), np.array(archive_hv)


# --- CLI -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptmoea", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "eval", "policy-analyze", "sensitivity"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML experiment file")
        p.add_argument("--seed", type=int, help="first seed")
        p.add_argument("--runs", type=int, help="number of consecutive seeds from --seed")
        p.add_argument("--episodes", type=int, help="training episodes")
        p.add_argument("--out", help="output directory")
        p.add_argument("--policy", help="policy file")
        p.add_argument("--workers", type=int, help="parallel episode workers")
        p.add_argument("--problem", choices=PROBLEM_NAMES)
        p.add_argument("--generations", type=int)
        if name == "eval":
            p.add_argument("--mode", action="append",
                           choices=[m for m in MODES if m != "train"],
                           help="repeat to compare several policy sources")
    return parser


def config_from_args(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = yaml.safe_load(fh) or {}
    for key in ("episodes", "out", "policy", "workers", "problem", "generations"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    if args.seed is not None or args.runs is not None:
        start = args.seed if args.seed is not None else 0
        raw["seeds"] = list(range(start, start + (args.runs or 1)))
    modes = getattr(args, "mode", None)
    if args.command == "eval":
        raw["mode"] = modes[0] if modes else raw.get("mode", "eval-fixed")
    elif args.command == "train":
        raw["mode"] = "train"
    else:
        raw["mode"] = "eval-trained"
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "train":
            path, curve = cmd_train(cfg)
            print(f"policy written to {path}; final return {curve[-1].ret:.4f}")
        elif args.command == "eval":
            report = cmd_eval(cfg, args.mode)
            for name, st in report.modes.items():
                print(f"{name}: runs={st.runs} median_max_hv={st.median_max_hv:.4f} "
                      f"mean_return={st.returns.mean():.4f}")
        elif args.command == "policy-analyze":
            frac = cmd_policy_analyze(cfg)
            print(f"action fractions for {frac.shape[0]} generations written to {cfg.out}")
        else:
            for variant, rep in cmd_sensitivity(cfg).items():
                t, f = rep.modes["trained"].median_max_hv, rep.modes[FIXED_LABEL].median_max_hv
                print(f"{variant}: trained={t:.4f} fixed={f:.4f}")
    except (ConfigError, PolicyLoadError, OSError, yaml.YAMLError) as exc:
        print(f"adaptmoea {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
