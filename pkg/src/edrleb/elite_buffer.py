"""Elite buffer: the most mutually different high-reward episodes of a population.

Pipeline, for ``P`` selected episodes of length ``H`` with state dimension
``n`` and action dimension ``m``:

1. take the ``per_member`` best episodes (by total reward) of every member;
2. stack them into a reference tensor of shape ``D x H x P`` where
   ``D = 2n + m + 1`` and each column is ``[s; a; s'; r]``;
3. replace every element by its squared deviation from the mean over ``P``
   (on a copy; the reference tensor keeps the real transitions);
4. average the state, action and next-state row groups, giving ``4 x H x P``;
5. sum each plane to one score per episode;
6. cluster the scores with exact 1-D k-means, ``k = M``;
7. keep the episode whose score is nearest to each cluster centre.

The returned elite buffer holds the original, untransformed episodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .agents import EpisodeSequence, ReplayBuffer
from .envs import EnvSpec


@dataclass(frozen=True)
class RowLayout:
    """Row ranges of the quadruple components inside the first tensor axis."""

    state_dim: int
    action_dim: int

    @property
    def D(self) -> int:
        return 2 * self.state_dim + self.action_dim + 1

    @property
    def groups(self) -> tuple[slice, slice, slice, slice]:
        n, m = self.state_dim, self.action_dim
        return slice(0, n), slice(n, n + m), slice(n + m, 2 * n + m), slice(2 * n + m, 2 * n + m + 1)


@dataclass(frozen=True)
class Provenance:
    member: int
    episode: int  # position in the member's replay buffer
    total_reward: float


@dataclass
class ReferenceBuffer:
    data: np.ndarray  # D x H x P
    layout: RowLayout
    provenance: list[Provenance]
    episodes: list[EpisodeSequence]

    @property
    def P(self) -> int:
        return self.data.shape[2]

    def plane(self, p: int) -> EpisodeSequence:
        """Recover episode ``p`` from its plane."""
        s_rows, a_rows, s2_rows, r_row = self.layout.groups
        plane = self.data[:, :, p]
        return EpisodeSequence(plane[s_rows].T, plane[a_rows].T, plane[s2_rows].T, plane[r_row][0])


@dataclass
class KMeansResult:
    assignments: np.ndarray  # cluster id per point
    centroids: np.ndarray  # ascending
    sse: float


@dataclass
class EliteBuffer:
    episodes: list[EpisodeSequence]
    source_indices: list[int]
    # diagnostics of the run that produced it
    scores: np.ndarray = field(default_factory=lambda: np.empty(0))
    assignments: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    centroids: np.ndarray = field(default_factory=lambda: np.empty(0))
    provenance: list[Provenance] = field(default_factory=list)

    def __len__(self):
        return len(self.episodes)

    def as_replay_buffer(self) -> ReplayBuffer:
        return ReplayBuffer.from_episodes(self.episodes)

    def score_table(self) -> str:
        """Plain-text table of every scored plane, marking the selected ones."""
        lines = ["plane  member  episode  total_reward  score  cluster  selected"]
        chosen = set(self.source_indices)
        for p, prov in enumerate(self.provenance):
            lines.append(f"{p:5d}  {prov.member:6d}  {prov.episode:7d}  {prov.total_reward:12.6g}  "
                         f"{self.scores[p]:.6g}  {self.assignments[p]:7d}  {'*' if p in chosen else ''}")
        return "\n".join(lines)


def select_top_episodes(member_buffers: Sequence[ReplayBuffer], per_member: int
                        ) -> tuple[list[EpisodeSequence], list[Provenance]]:
    """Each member's ``per_member`` best episodes, member-major, best first.

    Ties on total reward go to the more recently stored episode.
    """
    episodes, provenance = [], []
    for i, buf in enumerate(member_buffers):
        if len(buf) < per_member:
            raise ValueError(f"member {i} holds {len(buf)} episodes, {per_member} required")
        eps = list(buf.episodes)
        order = sorted(range(len(eps)), key=lambda j: (-eps[j].total_reward, -j))
        for j in order[:per_member]:
            episodes.append(eps[j])
            provenance.append(Provenance(i, j, eps[j].total_reward))
    return episodes, provenance


def build_reference_buffer(episodes: Sequence[EpisodeSequence], env_spec: EnvSpec,
                           provenance: list[Provenance] | None = None) -> ReferenceBuffer:
    layout = RowLayout(env_spec.state_dim, env_spec.action_dim)
    H = env_spec.max_time_step
    if not episodes:
        raise ValueError("no episodes to stack")
    data = np.empty((layout.D, H, len(episodes)))
    s_rows, a_rows, s2_rows, r_row = layout.groups
    for p, ep in enumerate(episodes):
        if len(ep) != H:
            raise ValueError(f"episode {p} has {len(ep)} steps, expected {H}")
        if ep.states.shape[1] != layout.state_dim or ep.actions.shape[1] != layout.action_dim:
            raise ValueError(f"episode {p} dimensions do not match the environment")
        data[s_rows, :, p] = ep.states.T
        data[a_rows, :, p] = ep.actions.T
        data[s2_rows, :, p] = ep.next_states.T
        data[r_row, :, p] = ep.rewards
    if provenance is None:
        provenance = [Provenance(0, p, ep.total_reward) for p, ep in enumerate(episodes)]
    return ReferenceBuffer(data, layout, list(provenance), list(episodes))


def squared_deviation(ref: ReferenceBuffer | np.ndarray) -> np.ndarray:
    """Elementwise squared deviation from the mean over the episode axis."""
    data = ref.data if isinstance(ref, ReferenceBuffer) else np.asarray(ref, dtype=np.float64)
    # centring on plane 0 keeps identical planes at exactly zero deviation
    shifted = data - data[:, :, :1]
    return (shifted - shifted.mean(axis=2, keepdims=True)) ** 2


def collapse_components(dev: np.ndarray, layout: RowLayout) -> np.ndarray:
    """Average each quadruple component's rows: ``D x H x P -> 4 x H x P``."""
    if dev.shape[0] != layout.D:
        raise ValueError(f"tensor has {dev.shape[0]} rows, layout expects {layout.D}")
    return np.stack([dev[rows].mean(axis=0) for rows in layout.groups])


def plane_scores(collapsed: np.ndarray) -> np.ndarray:
    return collapsed.sum(axis=(0, 1))


def kmeans_1d(scores, k: int) -> KMeansResult:
    """Globally optimal 1-D k-means by dynamic programming.

    Points with identical values are always kept together, so when fewer
    than ``k`` distinct values exist only that many clusters are returned.
    Among equally good partitions the one with the earliest split points
    (in ascending order of value) is chosen.
    """
    x = np.asarray(scores, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if x.size == 0:
        raise ValueError("no points to cluster")
    values, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    u = values.size
    k = min(k, u)

    # weighted prefix sums over the distinct values
    w = np.concatenate([[0.0], np.cumsum(counts)])
    s1 = np.concatenate([[0.0], np.cumsum(counts * values)])
    s2 = np.concatenate([[0.0], np.cumsum(counts * values * values)])

    def cost(i, j):  # SSE of distinct values i..j-1
        n = w[j] - w[i]
        t = s1[j] - s1[i]
        return max(s2[j] - s2[i] - t * t / n, 0.0)

    best = np.full((k + 1, u + 1), np.inf)
    split = np.zeros((k + 1, u + 1), dtype=int)
    best[0, 0] = 0.0
    for c in range(1, k + 1):
        for j in range(c, u - (k - c) + 1):
            for i in range(c - 1, j):
                v = best[c - 1, i] + cost(i, j)
                if v < best[c, j]:
                    best[c, j], split[c, j] = v, i

    bounds, j = [], u
    for c in range(k, 0, -1):
        i = split[c, j]
        bounds.append((i, j))
        j = i
    bounds.reverse()
    labels = np.empty(u, dtype=int)
    centroids = np.empty(k)
    for c, (i, j) in enumerate(bounds):
        labels[i:j] = c
        centroids[c] = (s1[j] - s1[i]) / (w[j] - w[i])
    assignments = labels[inverse.ravel()]
    sse = float(((x - centroids[assignments]) ** 2).sum())
    return KMeansResult(assignments, centroids, sse)


TIE_RTOL = 1e-9


def select_representatives(scores, assignments, centroids) -> list[int]:
    """Per cluster, the point closest to the centroid (lowest index on ties).

    Distances within ``TIE_RTOL`` of the minimum, relative to the score
    scale, count as ties so centroid rounding cannot flip the choice.
    Returned in ascending centroid order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    assignments = np.asarray(assignments)
    reps = []
    for c in np.argsort(centroids, kind="stable"):
        members = np.flatnonzero(assignments == c)
        if members.size == 0:
            raise ValueError(f"cluster {c} is empty")
        dist = np.abs(scores[members] - centroids[c])
        slack = TIE_RTOL * max(1.0, float(np.abs(scores[members]).max()))
        reps.append(int(members[np.flatnonzero(dist <= dist.min() + slack)[0]]))
    return reps


def fill_to(indices: list[int], M: int) -> list[int]:
    """Pad a short representative list by cycling through it in ascending order."""
    out = list(indices)
    pool = sorted(indices)
    i = 0
    while len(out) < M:
        out.append(pool[i % len(pool)])
        i += 1
    return out


def merge_rounding_ties(scores, rtol: float = TIE_RTOL) -> np.ndarray:
    """Give scores that differ only by rounding one shared value.

    Planes that are equivalent in exact arithmetic (for instance any two
    planes when ``P == 2``) can pick up last-bit differences; left alone,
    those would count as distinct values during clustering.  Sorted values
    within ``rtol`` (relative, floored at 1) of a group's first member take
    that member's value.
    """
    x = np.array(scores, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    anchor = None
    for i in order:
        if anchor is not None and x[i] - anchor <= rtol * max(1.0, abs(anchor)):
            x[i] = anchor
        else:
            anchor = x[i]
    return x


def build_elite_buffer(member_buffers: Sequence[ReplayBuffer], per_member: int, M: int,
                       env_spec: EnvSpec) -> EliteBuffer:
    episodes, provenance = select_top_episodes(member_buffers, per_member)
    ref = build_reference_buffer(episodes, env_spec, provenance)
    scores = plane_scores(collapse_components(squared_deviation(ref), ref.layout))
    merged = merge_rounding_ties(scores)
    km = kmeans_1d(merged, M)
    chosen = fill_to(select_representatives(merged, km.assignments, km.centroids), M)
    return EliteBuffer(
        episodes=[ref.episodes[p] for p in chosen],
        source_indices=chosen,
        scores=scores,
        assignments=km.assignments,
        centroids=km.centroids,
        provenance=provenance,
    )
