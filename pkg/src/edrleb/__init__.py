"""Evolutionary deep RL with an elite buffer of diverse high-reward episodes.

A population of DDPG or TD3 learners is evolved with a simple genetic
algorithm.  Each generation the most mutually different successful episodes
of the whole population are gathered into an elite buffer, and a copy of the
best member is trained on it before joining the next generation.
"""
from .agents import (
    Agent,
    AgentConfig,
    EpisodeSequence,
    ReplayBuffer,
    Transition,
    agent_init,
    ddpg_update,
    explore_and_learn,
    run_episode,
    sample_batch,
    select_action,
    store_episode,
    td3_update,
    train_from_buffer,
)
from .elite_buffer import (
    EliteBuffer,
    ReferenceBuffer,
    build_elite_buffer,
    build_reference_buffer,
    collapse_components,
    kmeans_1d,
    plane_scores,
    select_representatives,
    select_top_episodes,
    squared_deviation,
)
from .envs import EnvSpec, env_reset, env_step, make_env
from .evolution import (
    GAConfig,
    GenerationReport,
    Population,
    crossover_pair,
    evaluate,
    mutate,
    roulette_select,
    run_edrl_eb,
    step_generation,
)
from .harness import RunConfig, RunSummary, ablation_matrix, compute_summary, run_experiment

__version__ = "0.1.0"
