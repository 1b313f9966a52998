"""
Training one TD3 agent on point_mass
====================================

No evolution here: a single learner explores, stores whole episodes and
updates after each one.  Returns are compared with a random policy and a
hand-tuned controller.
"""

import numpy as np

from edrleb.agents import agent_init, explore_and_learn
from edrleb.envs import env_reset, env_step, make_env
from edrleb.evolution import evaluate

spec = make_env("point_mass")
eval_seeds = list(range(100, 110))


def rollout(act, seed):
    state, total = env_reset(spec, seed), 0.0
    obs = state.observation
    for _ in range(spec.max_time_step):
        state, res = env_step(state, act(obs))
        total += res.reward
        obs = res.next_state
    return total


rng = np.random.default_rng(0)
random_return = np.mean([rollout(lambda o: rng.uniform(-1, 1, 2), s) for s in eval_seeds])
controller = np.mean([rollout(lambda o: np.clip(-4 * o[:2] - 3 * o[2:], -1, 1), s) for s in eval_seeds])
print(f"random policy {random_return:.1f}   controller {controller:.1f}")

agent = agent_init("td3", spec, seed=0)
for block in range(5):
    # 20 episodes of 100 steps, each followed by 100 updates
    explore_and_learn(agent, 20, rng)
    score = evaluate(agent, len(eval_seeds), noisy=False, rng=rng, env_seeds=eval_seeds)
    print(f"{agent.env_steps:6d} steps   deterministic return {score:.1f}")
