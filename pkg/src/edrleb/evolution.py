"""Genetic loop over a population of off-policy learners.

Each generation every member explores and learns on its own replay buffer,
is evaluated, and then the next population is assembled from

* an unchanged copy of the elite (best fitness),
* a second elite copy trained on the elite buffer,
* ``n - 2`` offspring of roulette-selected parents, produced by one-point
  crossover of the actor parameters followed by clipped Gaussian mutation.

The run stops once the members' exploration interactions reach the budget.
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .agents import Agent, AgentConfig, agent_init, explore_and_learn, run_episode, train_from_buffer
from .elite_buffer import EliteBuffer, build_elite_buffer
from .envs import EnvSpec

log = logging.getLogger(__name__)

MODES = ("just_buffer", "m", "mc")
MUTATION_CLIP = 0.5
ROULETTE_FLOOR = 0.1
# operator probabilities each mode pins to zero
FORCED_ZERO = {"just_buffer": ("crossover_prob", "mutation_prob"), "m": ("crossover_prob",), "mc": ()}


@dataclass
class GAConfig:
    """Evolution settings.

    ``crossover_prob`` / ``mutation_prob`` left as ``None`` take the mode
    default: ``mc`` uses 0.8 / 0.3, ``m`` forces crossover to 0, and
    ``just_buffer`` forces both to 0.  An explicit non-zero probability
    that the mode forbids is rejected.
    """

    pop_size: int = 10
    episodes_per_gen: int = 3
    eval_no: int = 3
    crossover_prob: float | None = None
    mutation_prob: float | None = None
    per_member: int | None = None
    step_budget: int = 100_000
    mode: str = "mc"
    noisy_eval: bool = True
    n_elite_updates: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.pop_size < 3:
            raise ValueError("population needs at least 3 members (two elite slots plus offspring)")
        if self.episodes_per_gen < 1 or self.eval_no < 1:
            raise ValueError("episodes_per_gen and eval_no must be >= 1")
        if self.step_budget <= 0:
            raise ValueError("step_budget must be positive")
        forced = FORCED_ZERO[self.mode]
        for name in ("crossover_prob", "mutation_prob"):
            value = getattr(self, name)
            if name in forced:
                if value not in (None, 0, 0.0):
                    raise ValueError(f"mode {self.mode!r} fixes {name} to 0, got {value}")
                setattr(self, name, 0.0)
            elif value is None:
                setattr(self, name, {"crossover_prob": 0.8, "mutation_prob": 0.3}[name])
            elif not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.per_member is None:
            self.per_member = self.episodes_per_gen
        if self.per_member < 1:
            raise ValueError("per_member must be >= 1")

    @property
    def M(self) -> int:
        return self.episodes_per_gen


@dataclass
class Population:
    members: list[Agent]
    generation_index: int = 0

    def __post_init__(self):
        if len(self.members) < 3:
            raise ValueError("population needs at least 3 members")
        first = self.members[0]
        if any(a.env_spec != first.env_spec or a.algo != first.algo for a in self.members):
            raise ValueError("all members must share one environment and algorithm")

    def __len__(self):
        return len(self.members)


@dataclass
class FitnessRecord:
    member: int
    fitness: float
    episodes_used: int


@dataclass
class GenerationReport:
    generation: int
    fitness: list[float]
    elite_index: int
    elite_fitness: float
    env_steps: int  # cumulative exploration interactions (budgeted)
    eval_steps: int  # cumulative evaluation interactions (not budgeted)
    wall_time: float
    elite_buffer: EliteBuffer | None = field(default=None, repr=False)

    @property
    def pop_mean_fitness(self) -> float:
        return float(np.mean(self.fitness))

    @property
    def pop_std_fitness(self) -> float:
        return float(np.std(self.fitness))


def evaluate(agent: Agent, eval_no: int, noisy: bool, rng: np.random.Generator,
             env_seeds=None) -> float:
    """Mean total reward over ``eval_no`` episodes; nothing is stored.

    ``env_seeds`` fixes the start states (otherwise drawn from ``rng``).
    Noisy evaluation perturbs actions with the agent's exploration noise.
    """
    if eval_no < 1:
        raise ValueError("eval_no must be >= 1")
    if env_seeds is None:
        env_seeds = rng.integers(2**31, size=eval_no)
    env_seeds = list(env_seeds)[:eval_no]
    noise = agent.config.explore_noise * float(np.mean(agent.action_scale)) if noisy else 0.0
    total = 0.0
    for seed in env_seeds:
        total += run_episode(agent, int(seed), noise, rng).total_reward
    return total / eval_no


def roulette_probabilities(fitnesses) -> np.ndarray:
    """Selection probabilities proportional to the floored, min-shifted fitness.

    ``w_i = f_i - min f + 0.1 * (max f - min f + 1e-12)``; equal fitnesses
    (of any sign) give a uniform wheel.
    """
    f = np.asarray(fitnesses, dtype=np.float64)
    if f.size == 0:
        raise ValueError("empty fitness vector")
    if not np.all(np.isfinite(f)):
        raise ValueError("fitness values must be finite")
    spread = f.max() - f.min()
    w = f - f.min() + ROULETTE_FLOOR * (spread + 1e-12)
    return w / w.sum()


def roulette_select(fitnesses, count: int, rng: np.random.Generator) -> list[int]:
    if count < 1:
        raise ValueError("count must be >= 1")
    probs = roulette_probabilities(fitnesses)
    wheel = np.cumsum(probs)
    picks = np.searchsorted(wheel, rng.random(count) * wheel[-1], side="right")
    return [int(i) for i in np.minimum(picks, len(probs) - 1)]


def one_point_crossover(a: np.ndarray, b: np.ndarray, cut: int) -> tuple[np.ndarray, np.ndarray]:
    if a.shape != b.shape:
        raise ValueError("parents differ in parameter count")
    if not 1 <= cut <= a.size - 1:
        raise ValueError(f"cut {cut} outside 1..{a.size - 1}")
    return np.concatenate([a[:cut], b[cut:]]), np.concatenate([b[:cut], a[cut:]])


def crossover_pair(parent_a: Agent, parent_b: Agent, p_c: float, rng: np.random.Generator,
                   cut: int | None = None) -> tuple[Agent, Agent]:
    """Swap actor parameter tails at one cut point with probability ``p_c``.

    Each child is otherwise a full copy of its own parent (critics, targets,
    optimiser state, replay buffer); the spliced actor's target is reset to
    the new actor.  Without crossover the children are plain copies.
    """
    if parent_a.actor.spec != parent_b.actor.spec:
        raise ValueError("parents have different actor architectures")
    child_a, child_b = parent_a.clone(), parent_b.clone()
    if rng.random() < p_c:
        L = parent_a.actor.params.size
        if cut is None:
            cut = int(rng.integers(1, L))
        new_a, new_b = one_point_crossover(parent_a.actor.params, parent_b.actor.params, cut)
        for child, values in ((child_a, new_a), (child_b, new_b)):
            child.actor.assign(values)
            child.actor_target.assign(values)
    return child_a, child_b


def mutation_noise(size: int, rng: np.random.Generator) -> np.ndarray:
    """Standard normal noise with every entry outside [-0.5, 0.5] set to zero."""
    z = rng.standard_normal(size)
    z[np.abs(z) > MUTATION_CLIP] = 0.0
    return z


def mutate(agent: Agent, p_m: float, rng: np.random.Generator) -> Agent:
    """With probability ``p_m`` add clipped noise to the actor (in place)."""
    if not 0.0 <= p_m <= 1.0:
        raise ValueError("p_m must lie in [0, 1]")
    if rng.random() < p_m:
        values = agent.actor.params + mutation_noise(agent.actor.params.size, rng)
        agent.actor.assign(values)
        agent.actor_target.assign(values)
    return agent


def make_offspring(members: list[Agent], parents: list[int], p_c: float, p_m: float,
                   rng: np.random.Generator) -> list[Agent]:
    """Pair parents in selection order, cross them over, then mutate the children.

    An unpaired last parent is cloned.
    """
    children = []
    for i in range(0, len(parents) - 1, 2):
        children.extend(crossover_pair(members[parents[i]], members[parents[i + 1]], p_c, rng))
    if len(parents) % 2:
        children.append(members[parents[-1]].clone())
    return [mutate(child, p_m, rng) for child in children]


def init_population(algo: str, env_spec: EnvSpec, pop_size: int, rng: np.random.Generator,
                    agent_config: AgentConfig | None = None) -> Population:
    seeds = rng.integers(2**31, size=pop_size)
    return Population([agent_init(algo, env_spec, int(s), agent_config) for s in seeds])


@dataclass
class _Tally:
    env_steps: int = 0
    eval_steps: int = 0


def step_generation(pop: Population, env_spec: EnvSpec, config: GAConfig, rng: np.random.Generator,
                    eval_seeds=None, tally: _Tally | None = None) -> tuple[Population, GenerationReport]:
    """Advance the population by one generation."""
    start = time.perf_counter()
    tally = tally or _Tally()
    H = env_spec.max_time_step
    member_rngs = rng.spawn(len(pop))

    fitness = []
    for agent, member_rng in zip(pop.members, member_rngs):
        explore_and_learn(agent, config.episodes_per_gen, member_rng)
        tally.env_steps += config.episodes_per_gen * H
        fitness.append(evaluate(agent, config.eval_no, config.noisy_eval, member_rng, eval_seeds))
        tally.eval_steps += config.eval_no * H

    elite_idx = int(np.argmax(fitness))
    elite = pop.members[elite_idx]
    eb = build_elite_buffer([a.buffer for a in pop.members], config.per_member, config.M, env_spec)

    trained = elite.clone()
    n_updates = config.n_elite_updates if config.n_elite_updates is not None else H * config.M
    train_from_buffer(trained, eb.as_replay_buffer(), n_updates, trained.config.batch_size, rng)

    parents = roulette_select(fitness, len(pop) - 2, rng)
    offspring = make_offspring(pop.members, parents, config.crossover_prob, config.mutation_prob, rng)

    report = GenerationReport(
        generation=pop.generation_index,
        fitness=[float(f) for f in fitness],
        elite_index=elite_idx,
        elite_fitness=float(fitness[elite_idx]),
        env_steps=tally.env_steps,
        eval_steps=tally.eval_steps,
        wall_time=time.perf_counter() - start,
        elite_buffer=eb,
    )
    log.info("generation %d: elite %d fitness %.4g, steps %d", report.generation, elite_idx,
             report.elite_fitness, tally.env_steps)
    nxt = Population([elite.clone(), trained, *offspring], pop.generation_index + 1)
    return nxt, report


def run_edrl_eb(config: GAConfig, env_spec: EnvSpec, seed: int, algo: str = "td3",
                agent_config: AgentConfig | None = None, eval_seeds=None,
                on_generation=None) -> tuple[Agent, list[GenerationReport]]:
    """Evolve until exploration interactions reach ``config.step_budget``.

    Fitness is measured on a fixed set of evaluation start states shared by
    every member and generation (drawn once from ``seed`` unless given).

    Returns:
        The elite of the last generation and the per-generation reports.
    """
    rng = np.random.default_rng(seed)
    pop = init_population(algo, env_spec, config.pop_size, rng, agent_config)
    if eval_seeds is None:
        eval_seeds = rng.integers(2**31, size=config.eval_no)
    per_gen = config.pop_size * config.episodes_per_gen * env_spec.max_time_step
    if config.step_budget < per_gen:
        warnings.warn(f"step budget {config.step_budget} is below one generation ({per_gen} steps); "
                      "running a single generation", RuntimeWarning, stacklevel=2)
    tally = _Tally()
    reports: list[GenerationReport] = []
    elite = None
    while not reports or tally.env_steps < config.step_budget:
        members = pop.members
        pop, report = step_generation(pop, env_spec, config, rng, eval_seeds, tally)
        elite = members[report.elite_index]
        reports.append(report)
        if on_generation is not None:
            on_generation(report)
    return elite, reports
