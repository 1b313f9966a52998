"""Multi-seed experiments, ablation tables and CSV output."""
from __future__ import annotations

import csv
import logging
import os
import statistics
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .agents import ALGOS, Agent, AgentConfig
from .envs import make_env
from .evolution import FORCED_ZERO, MODES, GAConfig, GenerationReport, evaluate, run_edrl_eb

log = logging.getLogger(__name__)

CURVE_HEADER = ["seed", "generation", "env_steps", "elite_fitness", "pop_mean_fitness", "pop_std_fitness"]
SUMMARY_HEADER = ["experiment", "mean", "std", "median", "best", "n_seeds"]


@dataclass
class RunConfig:
    env: str = "point_mass"
    algo: str = "td3"
    mode: str = "mc"
    ga: GAConfig = field(default_factory=GAConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out: Path = Path("runs")
    dump_elite_scores: bool = False
    ablation: bool = False

    def __post_init__(self):
        make_env(self.env)
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be distinct, got {self.seeds}")
        if self.ga.mode != self.mode:
            raise ValueError("RunConfig.mode and GAConfig.mode disagree")
        self.out = Path(self.out)

    @property
    def name(self) -> str:
        return f"{self.env}-{self.algo}-{self.mode}"


@dataclass
class RunSummary:
    values: list[float]
    mean: float
    std: float
    median: float
    best: float
    std_defined: bool = True

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass
class CurvePoint:
    seed: int
    generation: int
    env_steps: int
    elite_fitness: float
    pop_mean_fitness: float
    pop_std_fitness: float


def compute_summary(values) -> RunSummary:
    """Mean, sample standard deviation, median and best of per-seed results.

    With a single value the standard deviation is undefined; it is reported
    as 0 and ``std_defined`` is False.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("cannot summarise an empty list")
    std_defined = len(values) > 1
    return RunSummary(
        values=values,
        mean=statistics.fmean(values),
        std=statistics.stdev(values) if std_defined else 0.0,
        median=statistics.median(values),
        best=max(values),
        std_defined=std_defined,
    )


def curve_points(seed: int, reports: list[GenerationReport]) -> list[CurvePoint]:
    return [CurvePoint(seed, r.generation, r.env_steps, r.elite_fitness, r.pop_mean_fitness,
                       r.pop_std_fitness) for r in reports]


def final_fitness(agent: Agent, eval_no: int, seed: int) -> float:
    """Noise-free mean return of a solution on fresh start states tied to ``seed``."""
    rng = np.random.default_rng([seed, 0xE7A1])
    return evaluate(agent, eval_no, noisy=False, rng=rng)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_curves(path: Path, points: list[CurvePoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_HEADER)
        for p in points:
            w.writerow([_fmt(getattr(p, k)) for k in CURVE_HEADER])


def write_summaries(path: Path, rows: list[tuple[str, RunSummary]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for name, s in rows:
            w.writerow([name, _fmt(s.mean), _fmt(s.std), _fmt(s.median), _fmt(s.best), s.n])


def run_experiment(config: RunConfig, write: bool = True) -> tuple[RunSummary, list[CurvePoint]]:
    """One independent evolutionary run per seed, summarised over seeds.

    Writes ``<name>_curves.csv`` and ``<name>_summary.csv`` into
    ``config.out`` (plus per-seed elite score tables when requested).
    """
    env_spec = make_env(config.env)
    if write:
        try:
            config.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {config.out}: {exc}") from exc
        if not os.access(config.out, os.W_OK):
            raise OSError(f"output directory {config.out} is not writable")

    finals, points = [], []
    for seed in config.seeds:
        dump = None
        if write and config.dump_elite_scores:
            dump = open(config.out / f"{config.name}_seed{seed}_elite_scores.txt", "w")

        def on_generation(report, dump=dump):
            if dump is not None:
                dump.write(f"# generation {report.generation}\n{report.elite_buffer.score_table()}\n\n")

        try:
            elite, reports = run_edrl_eb(config.ga, env_spec, seed, config.algo, config.agent,
                                         on_generation=on_generation)
        finally:
            if dump is not None:
                dump.close()
        finals.append(final_fitness(elite, config.ga.eval_no, seed))
        points.extend(curve_points(seed, reports))
        log.info("%s seed %d: final fitness %.6g after %d generations", config.name, seed, finals[-1],
                 len(reports))

    summary = compute_summary(finals)
    if not summary.std_defined:
        log.warning("%s: only one seed, standard deviation reported as 0", config.name)
    if write:
        write_curves(config.out / f"{config.name}_curves.csv", points)
        write_summaries(config.out / f"{config.name}_summary.csv", [(config.name, summary)])
    return summary, points


def with_mode_and_algo(config: RunConfig, mode: str, algo: str) -> RunConfig:
    """Copy of ``config`` for another ablation cell; mode-forced probabilities reset."""
    ga = {f.name: getattr(config.ga, f.name) for f in fields(GAConfig)}
    ga["mode"] = mode
    for name in ("crossover_prob", "mutation_prob"):
        if name in FORCED_ZERO[config.ga.mode] or name in FORCED_ZERO[mode]:
            ga[name] = None
    return RunConfig(config.env, algo, mode, GAConfig(**ga), AgentConfig(**asdict(config.agent)),
                     config.seeds, config.out, config.dump_elite_scores, config.ablation)


def ablation_matrix(base: RunConfig, modes=MODES, algos=ALGOS, write: bool = True
                    ) -> list[tuple[str, str, RunSummary]]:
    """Every (mode, algo) combination on the same seeds; one comparison table."""
    rows = []
    for algo in algos:
        for mode in modes:
            cfg = with_mode_and_algo(base, mode, algo)
            summary, _ = run_experiment(cfg, write=write)
            rows.append((mode, algo, summary))
    if write:
        write_summaries(base.out / f"{base.env}_ablation.csv",
                        [(f"{base.env}-{algo}-{mode}", s) for mode, algo, s in rows])
    return rows
