"""
Choosing diverse episodes for the elite buffer
==============================================

Three learners each hold a few episodes.  We keep the best ones per
learner, stack them into a reference tensor, score how far each episode
sits from the average episode and cluster those scores to pick a handful
of representatives.
"""

import numpy as np

from edrleb.agents import EpisodeSequence, ReplayBuffer
from edrleb.elite_buffer import (
    build_elite_buffer,
    build_reference_buffer,
    collapse_components,
    plane_scores,
    select_top_episodes,
    squared_deviation,
)
from edrleb.envs import EnvSpec

rng = np.random.default_rng(0)
spec = EnvSpec("toy", state_dim=2, action_dim=1, max_time_step=5, action_low=(-1.0,), action_high=(1.0,))


def episode(spread):
    s = rng.normal(scale=spread, size=(6, 2))
    return EpisodeSequence(s[:-1], rng.uniform(-1, 1, (5, 1)), s[1:], rng.normal(size=5))


# each member's buffer holds four episodes; member 2 behaves very differently
buffers = [ReplayBuffer.from_episodes([episode(1.0 + 3 * (i == 2)) for _ in range(4)]) for i in range(3)]

# best two episodes per member
episodes, provenance = select_top_episodes(buffers, per_member=2)
for p in provenance:
    print(f"member {p.member} episode {p.episode} total reward {p.total_reward:+.3f}")

# rows are (state, action, next state, reward) components, so 2n + m + 1 of them
ref = build_reference_buffer(episodes, spec, provenance)
print("reference tensor shape:", ref.data.shape)

# squared distance from the mean episode, averaged per component, summed per episode
scores = plane_scores(collapse_components(squared_deviation(ref), ref.layout))
print("per-episode scores:", np.round(scores, 2))

# the whole pipeline in one call: cluster the scores into M groups and
# keep the episode nearest each group centre
elite = build_elite_buffer(buffers, per_member=2, M=3, env_spec=spec)
print(elite.score_table())
print("selected:", elite.source_indices)
