import numpy as np
import pytest

from futurelens.envs import AbrEnv
from futurelens.policies import abr_policy_handle
from futurelens.rollouts import truncated_decomposed_return
from futurelens.sampling import (ClusterModel, SamplerConfig, SamplingError,
                                 distribution_aware_estimate, fit_clusters,
                                 kmeans_objective, naive_estimate,
                                 state_input_summary)
from futurelens.traces import TraceSet

from conftest import constant_trace, make_trace


def abr_env_at_anchor(trace=None, steps=3):
    env = AbrEnv()
    env.reset(trace or constant_trace(3.0, trace_id="base"))
    policy = abr_policy_handle()
    for _ in range(steps):
        env.step(policy.evaluate(env.state))
    return env, policy


def two_group_set(n_per=5, duration=200.0):
    slow = [constant_trace(1.0, duration=duration, trace_id=f"slow{i}")
            for i in range(n_per)]
    fast = [constant_trace(50.0, duration=duration, trace_id=f"fast{i}")
            for i in range(n_per)]
    return TraceSet(tuple(slow + fast), "abr")


class TestNaive:
    def test_mean_of_one(self):
        env, policy = abr_env_at_anchor()
        Z = TraceSet((constant_trace(2.0, trace_id="z0"),), "abr")
        cfg = SamplerConfig(n_samples=1, seed=5)
        est, individuals = naive_estimate(env.snapshot(), policy, Z, 2, cfg,
                                          return_individuals=True)
        assert len(individuals) == 1
        assert np.array_equal(est, individuals[0])

    def test_single_constant_trace_deterministic(self):
        env, policy = abr_env_at_anchor()
        Z = TraceSet((constant_trace(2.0, trace_id="z0"),), "abr")
        a = naive_estimate(env.snapshot(), policy, Z, 1, SamplerConfig(n_samples=1, seed=1))
        b = naive_estimate(env.snapshot(), policy, Z, 1, SamplerConfig(n_samples=30, seed=9))
        # every offset on a constant trace yields the same future
        assert np.allclose(a, b)

    def test_matches_hand_simulated_rollout(self):
        env, policy = abr_env_at_anchor()
        Z = TraceSet((constant_trace(2.0, trace_id="z0"),), "abr")
        cfg = SamplerConfig(n_samples=1, seed=3)
        est = naive_estimate(env.snapshot(), policy, Z, 2, cfg)
        # independent replay on a grafted copy
        from futurelens.envs import graft_future
        sim = graft_future(env.snapshot(), Z.traces[0], 0.0)
        rewards = [sim.step(2).reward_components]
        for _ in range(cfg.t_max - 1):
            rewards.append(sim.step(policy.evaluate(sim.state)).reward_components)
        expect = truncated_decomposed_return(rewards, cfg.gamma, cfg.t_max)
        assert np.allclose(est, expect)

    def test_output_is_mean_of_individuals(self):
        env, policy = abr_env_at_anchor()
        Z = two_group_set()
        cfg = SamplerConfig(n_samples=10, seed=2)
        est, ind = naive_estimate(env.snapshot(), policy, Z, 3, cfg,
                                  return_individuals=True)
        assert np.array_equal(est, np.mean(ind, axis=0))

    def test_deterministic_given_seed(self):
        env, policy = abr_env_at_anchor()
        Z = two_group_set()
        cfg = SamplerConfig(n_samples=5, seed=8)
        a = naive_estimate(env.snapshot(), policy, Z, 1, cfg)
        b = naive_estimate(env.snapshot(), policy, Z, 1, cfg)
        assert np.array_equal(a, b)

    def test_empty_trace_set(self):
        env, policy = abr_env_at_anchor()
        with pytest.raises(SamplingError):
            naive_estimate(env.snapshot(), policy, TraceSet((), "abr"), 1,
                           SamplerConfig())


class TestClusters:
    def test_k1_centroid_at_origin(self):
        model = fit_clusters(two_group_set(), k=1, seed=0)
        assert np.allclose(model.centroids[0], 0.0, atol=1e-12)

    def test_two_groups_pure_assignment(self):
        ts = two_group_set()
        model = fit_clusters(ts, k=2, seed=1)
        slow_labels = {model.assignments[t.id] for t in ts if t.id.startswith("slow")}
        fast_labels = {model.assignments[t.id] for t in ts if t.id.startswith("fast")}
        assert len(slow_labels) == 1 and len(fast_labels) == 1
        assert slow_labels != fast_labels

    def test_k_equals_n(self):
        ts = two_group_set(n_per=2)
        # distinct features needed for zero within-cluster distance
        ts = TraceSet(tuple(constant_trace(float(b), trace_id=f"t{b}")
                            for b in (1, 5, 20, 50)), "abr")
        model = fit_clusters(ts, k=4, seed=2)
        assert kmeans_objective(model, ts) == pytest.approx(0.0, abs=1e-12)

    def test_k_bounds(self):
        ts = two_group_set(n_per=1)
        with pytest.raises(SamplingError):
            fit_clusters(ts, k=0, seed=0)
        with pytest.raises(SamplingError):
            fit_clusters(ts, k=3, seed=0)

    def test_roundtrip(self, tmp_path):
        model = fit_clusters(two_group_set(), k=2, seed=1)
        p = tmp_path / "clusters.json"
        model.save(p)
        back = ClusterModel.load(p)
        assert np.array_equal(back.centroids, model.centroids)
        assert back.assignments == model.assignments


class TestDistributionAware:
    def test_maps_to_matching_cluster(self):
        ts = two_group_set()
        model = fit_clusters(ts, k=2, seed=1)
        # anchor on a ~2 Mbps trace: recent throughput near the slow group
        env, policy = abr_env_at_anchor(constant_trace(2.0, trace_id="q"))
        cfg = SamplerConfig(n_samples=8, seed=4)
        summary = state_input_summary(env.state, cfg.window)
        assert model.nearest(summary) == model.assignments["slow0"]

    def test_window_clamps_to_available_history(self):
        env, policy = abr_env_at_anchor(steps=2)
        s = state_input_summary(env.state, window=50)
        assert s.shape == (2,)

    def test_single_cluster_reduces_to_naive(self):
        ts = two_group_set()
        model = fit_clusters(ts, k=1, seed=0)
        env, policy = abr_env_at_anchor()
        cfg = SamplerConfig(n_samples=6, seed=11)
        da = distribution_aware_estimate(env.snapshot(), env.state, policy, model,
                                         ts, 2, cfg)
        nv = naive_estimate(env.snapshot(), policy, ts, 2, cfg)
        assert np.array_equal(da, nv)

    def test_no_history_errors(self):
        env = AbrEnv()
        env.reset(constant_trace(3.0))
        with pytest.raises(SamplingError, match="recent"):
            state_input_summary(env.state, 4)
