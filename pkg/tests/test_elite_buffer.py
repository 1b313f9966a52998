import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edrleb.agents import EpisodeSequence, ReplayBuffer
from edrleb.elite_buffer import (
    RowLayout,
    build_elite_buffer,
    build_reference_buffer,
    collapse_components,
    fill_to,
    kmeans_1d,
    plane_scores,
    select_representatives,
    select_top_episodes,
    squared_deviation,
)
from edrleb.envs import EnvSpec

from oracles import (
    brute_force_kmeans_sse,
    naive_collapse,
    naive_elite_indices,
    naive_plane_scores,
    naive_reference,
    naive_squared_deviation,
    naive_top_episodes,
)


def toy_spec(n=2, m=1, H=5):
    return EnvSpec("toy", n, m, H, (-1.0,) * m, (1.0,) * m)


def random_episode(rng, n, m, H, reward_scale=1.0):
    s = rng.normal(size=(H + 1, n))
    return EpisodeSequence(s[:-1], rng.uniform(-1, 1, size=(H, m)), s[1:], reward_scale * rng.normal(size=H))


def episode_with_total(total, n=2, m=1, H=5, seed=0):
    ep = random_episode(np.random.default_rng(seed), n, m, H)
    rewards = np.full(H, total / H)
    return EpisodeSequence(ep.states, ep.actions, ep.next_states, rewards)


# selection ----------------------------------------------------------------

def test_top_episodes_single_member_sorted():
    eps = [episode_with_total(t, seed=i) for i, t in enumerate([3.0, 1.0, 2.0])]
    chosen, prov = select_top_episodes([ReplayBuffer.from_episodes(eps)], 3)
    assert [round(e.total_reward, 9) for e in chosen] == [3.0, 2.0, 1.0]
    assert [p.episode for p in prov] == [0, 2, 1]


def test_top_episodes_picks_two_best():
    eps = [episode_with_total(t, seed=i) for i, t in enumerate([3.0, 1.0, 2.0])]
    chosen, _ = select_top_episodes([ReplayBuffer.from_episodes(eps)], 2)
    assert chosen[0] is eps[0] and chosen[1] is eps[2]


def test_top_episodes_tie_prefers_newer():
    eps = [episode_with_total(1.0, seed=i) for i in range(3)]
    chosen, _ = select_top_episodes([ReplayBuffer.from_episodes(eps)], 1)
    assert chosen[0] is eps[2]


def test_top_episodes_against_brute_force():
    rng = np.random.default_rng(0)
    members = [[random_episode(rng, 2, 1, 5) for _ in range(4)] for _ in range(10)]
    chosen, prov = select_top_episodes([ReplayBuffer.from_episodes(m) for m in members], 2)
    assert len(chosen) == 20
    assert all(a is b for a, b in zip(chosen, naive_top_episodes(members, 2)))
    for i, eps in enumerate(members):
        picked = [e for e, p in zip(chosen, prov) if p.member == i]
        rest = [e for e in eps if not any(e is c for c in picked)]
        assert min(e.total_reward for e in picked) >= max(e.total_reward for e in rest)


def test_top_episodes_too_few():
    with pytest.raises(ValueError):
        select_top_episodes([ReplayBuffer.from_episodes([episode_with_total(1.0)])], 2)


# reference buffer ---------------------------------------------------------

@pytest.mark.parametrize("n,m,D", [(17, 6, 41), (11, 2, 25), (2, 1, 6)])
def test_first_dimension_law(n, m, D):
    rng = np.random.default_rng(0)
    H = 50 if (n, m) == (11, 2) else 4
    ref = build_reference_buffer([random_episode(rng, n, m, H) for _ in range(3)], toy_spec(n, m, H))
    assert ref.data.shape == (D, H, 3)


def test_reference_layout_and_roundtrip():
    rng = np.random.default_rng(1)
    eps = [random_episode(rng, 2, 1, 5) for _ in range(3)]
    ref = build_reference_buffer(eps, toy_spec())
    np.testing.assert_array_equal(ref.data, naive_reference(eps, 2, 1))
    assert ref.plane(0).same_as(eps[0])
    col = ref.data[:, 3, 1]
    np.testing.assert_array_equal(col, [*eps[1].states[3], *eps[1].actions[3], *eps[1].next_states[3], eps[1].rewards[3]])


def test_reference_rejects_bad_episodes():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        build_reference_buffer([random_episode(rng, 2, 1, 4)], toy_spec(H=5))
    with pytest.raises(ValueError):
        build_reference_buffer([random_episode(rng, 3, 1, 5)], toy_spec())


# transforms ---------------------------------------------------------------

def test_identical_planes_give_zero_deviation():
    ep = random_episode(np.random.default_rng(0), 2, 1, 5)
    ref = build_reference_buffer([ep, ep, ep], toy_spec())
    assert not squared_deviation(ref).any()
    assert not plane_scores(collapse_components(squared_deviation(ref), ref.layout)).any()


def test_two_plane_deviation_closed_form():
    a, b = 3.0, -1.5
    dev = squared_deviation(np.array([[[a, b]]]))
    np.testing.assert_allclose(dev[0, 0], [((a - b) / 2) ** 2] * 2)


def test_deviation_leaves_reference_untouched():
    rng = np.random.default_rng(3)
    ref = build_reference_buffer([random_episode(rng, 2, 1, 5) for _ in range(3)], toy_spec())
    before = ref.data.copy()
    squared_deviation(ref)
    np.testing.assert_array_equal(ref.data, before)


@settings(max_examples=30, deadline=None)
@given(D=st.integers(1, 8), H=st.integers(1, 6), P=st.integers(1, 10), seed=st.integers(0, 2**16))
def test_deviation_matches_naive(D, H, P, seed):
    x = np.random.default_rng(seed).normal(size=(D, H, P))
    np.testing.assert_allclose(squared_deviation(x), naive_squared_deviation(x), rtol=0, atol=1e-12)


def test_collapse_worked_example():
    dev = np.array([2.0, 4.0, 5.0, 1.0, 3.0, 7.0]).reshape(6, 1, 1)
    out = collapse_components(dev, RowLayout(2, 1))
    np.testing.assert_array_equal(out[:, 0, 0], [3.0, 5.0, 2.0, 7.0])


def test_collapse_singleton_groups_is_identity():
    x = np.random.default_rng(0).normal(size=(4, 3, 2))
    np.testing.assert_array_equal(collapse_components(x, RowLayout(1, 1)), x)


def test_collapse_layout_mismatch():
    with pytest.raises(ValueError):
        collapse_components(np.zeros((5, 2, 2)), RowLayout(2, 1))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 3), m=st.integers(1, 2), H=st.integers(1, 6), P=st.integers(1, 10),
       seed=st.integers(0, 2**16))
def test_collapse_and_scores_match_naive(n, m, H, P, seed):
    x = np.random.default_rng(seed).random(size=(2 * n + m + 1, H, P))
    col = collapse_components(x, RowLayout(n, m))
    np.testing.assert_allclose(col, naive_collapse(x, n, m), rtol=0, atol=1e-12)
    np.testing.assert_allclose(plane_scores(col), naive_plane_scores(col), rtol=0, atol=1e-12)


def test_plane_scores_simple():
    H = 7
    x = np.concatenate([np.ones((4, H, 1)), np.zeros((4, H, 1))], axis=2)
    np.testing.assert_array_equal(plane_scores(x), [4 * H, 0.0])


# k-means ------------------------------------------------------------------

def test_kmeans_two_obvious_clusters():
    km = kmeans_1d([10.0, 1.0, 11.0, 2.0], 2)
    np.testing.assert_array_equal(km.assignments, [1, 0, 1, 0])
    np.testing.assert_allclose(km.centroids, [1.5, 10.5])
    assert km.sse == pytest.approx(brute_force_kmeans_sse([1, 2, 10, 11], 2), abs=1e-12) == pytest.approx(1.0)


def test_kmeans_k_equals_p():
    x = np.random.default_rng(0).normal(size=6)
    km = kmeans_1d(x, 6)
    assert km.sse == pytest.approx(0.0, abs=1e-24) and len(set(km.assignments)) == 6


def test_kmeans_duplicates_stay_together():
    km = kmeans_1d([0.0, 0.0, 0.0, 5.0], 3)
    assert len(km.centroids) == 2
    assert len(set(km.assignments[:3])) == 1


def test_kmeans_bad_k():
    with pytest.raises(ValueError):
        kmeans_1d([1.0, 2.0], 0)


@settings(max_examples=60, deadline=None)
@given(x=st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12), k=st.integers(1, 4))
def test_kmeans_is_globally_optimal(x, k):
    km = kmeans_1d(x, k)
    assert km.sse == pytest.approx(brute_force_kmeans_sse(x, k), abs=1e-9, rel=1e-9)
    # every cluster non-empty and centroids are cluster means
    for c, mu in enumerate(km.centroids):
        members = np.asarray(x)[km.assignments == c]
        assert members.size > 0
        assert mu == pytest.approx(members.mean(), abs=1e-9)


# representatives ----------------------------------------------------------

def test_representative_tie_goes_to_lowest_index():
    assert select_representatives([1.0, 2.0], [0, 0], [1.5]) == [0]
    assert select_representatives([2.0, 1.0], [0, 0], [1.5]) == [0]


def test_two_point_cluster_tie_is_stable():
    # the centroid of a pair is equidistant from both points whatever its rounding
    for a, b in [(13.59013703, 13.35485956), (0.1, 0.7), (1e6 + 0.3, 1e6 + 0.9)]:
        km = kmeans_1d([a, b], 1)
        assert select_representatives([a, b], km.assignments, km.centroids) == [0]
        assert select_representatives([b, a], km.assignments, km.centroids) == [0]


def test_singleton_representatives():
    scores = [5.0, 1.0, 3.0]
    km = kmeans_1d(scores, 3)
    assert select_representatives(scores, km.assignments, km.centroids) == [1, 2, 0]


@settings(max_examples=40, deadline=None)
@given(x=st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=10, unique=True), k=st.integers(1, 4))
def test_representatives_match_naive(x, k):
    km = kmeans_1d(x, k)
    assert select_representatives(x, km.assignments, km.centroids) == naive_elite_indices(x, k)


def test_fill_to():
    assert fill_to([4], 3) == [4, 4, 4]
    assert fill_to([5, 2], 5) == [5, 2, 2, 5, 2]
    assert fill_to([1, 2, 3], 3) == [1, 2, 3]


# end to end ---------------------------------------------------------------

def members_fixture(rng, n_members, per_member_eps, n, m, H):
    return [ReplayBuffer.from_episodes([random_episode(rng, n, m, H) for _ in range(per_member_eps)])
            for _ in range(n_members)]


def naive_pipeline(buffers, per_member, M, n, m):
    eps = naive_top_episodes([list(b.episodes) for b in buffers], per_member)
    ref = naive_reference(eps, n, m)
    scores = naive_plane_scores(naive_collapse(naive_squared_deviation(ref), n, m))
    idx = fill_to(naive_elite_indices(scores, M), M)
    return idx, scores, [eps[i] for i in idx]


def test_end_to_end_fixture():
    rng = np.random.default_rng(42)
    buffers = members_fixture(rng, 3, 4, 2, 1, 5)
    eb = build_elite_buffer(buffers, 2, 3, toy_spec())
    idx, scores, eps = naive_pipeline(buffers, 2, 3, 2, 1)
    assert eb.source_indices == idx
    np.testing.assert_allclose(eb.scores, scores, rtol=0, atol=1e-12)
    assert all(a is b for a, b in zip(eb.episodes, eps))
    assert len(eb) == 3


def test_all_identical_episodes_degenerate_fill():
    ep = random_episode(np.random.default_rng(0), 2, 1, 5)
    buffers = [ReplayBuffer.from_episodes([ep, ep]) for _ in range(3)]
    eb = build_elite_buffer(buffers, 2, 3, toy_spec())
    assert not eb.scores.any()
    assert eb.source_indices == [0, 0, 0]
    assert all(e.same_as(ep) for e in eb.episodes)


def test_m_equals_p_keeps_every_episode():
    rng = np.random.default_rng(5)
    buffers = members_fixture(rng, 2, 2, 2, 1, 5)
    eb = build_elite_buffer(buffers, 2, 4, toy_spec())
    assert sorted(eb.source_indices) == [0, 1, 2, 3]


def test_elite_episodes_are_untransformed_sources():
    rng = np.random.default_rng(6)
    buffers = members_fixture(rng, 4, 3, 2, 1, 5)
    stored = [e for b in buffers for e in b.episodes]
    eb = build_elite_buffer(buffers, 2, 3, toy_spec())
    for ep in eb.episodes:
        assert any(ep.same_as(s) for s in stored)
    assert eb.as_replay_buffer().n_transitions == 3 * 5
    assert "selected" in eb.score_table()


def test_shape_chain():
    rng = np.random.default_rng(7)
    n, m, H, members, per, M = 3, 2, 6, 4, 3, 4
    buffers = members_fixture(rng, members, per, n, m, H)
    eps, prov = select_top_episodes(buffers, per)
    ref = build_reference_buffer(eps, toy_spec(n, m, H), prov)
    dev = squared_deviation(ref)
    col = collapse_components(dev, ref.layout)
    scores = plane_scores(col)
    eb = build_elite_buffer(buffers, per, M, toy_spec(n, m, H))
    P = members * per
    assert ref.data.shape == dev.shape == (2 * n + m + 1, H, P)
    assert col.shape == (4, H, P) and scores.shape == (P,)
    assert len(eb.episodes) == M and np.all(scores >= 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    eps = [random_episode(rng, 2, 1, 5) for _ in range(8)]
    perm = rng.permutation(8)
    spec = toy_spec()

    def scores_of(episodes):
        ref = build_reference_buffer(episodes, spec)
        return plane_scores(collapse_components(squared_deviation(ref), ref.layout))

    s, s_perm = scores_of(eps), scores_of([eps[i] for i in perm])
    np.testing.assert_allclose(s_perm, s[perm], rtol=1e-12, atol=1e-12)
    # one member holding everything, so selection order is irrelevant
    a = build_elite_buffer([ReplayBuffer.from_episodes(eps)], 8, 3, spec)
    b = build_elite_buffer([ReplayBuffer.from_episodes([eps[i] for i in perm])], 8, 3, spec)
    assert {id(e) for e in a.episodes} == {id(e) for e in b.episodes}
