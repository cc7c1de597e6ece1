import csv

import numpy as np
import pytest

from seqdac.mmdp import (
    Batch,
    ConstantEnv,
    EnvDoneError,
    ReplayBuffer,
    Transition,
    WarmupError,
    check_joint_action,
    run_episode,
    write_trajectory_csv,
)


def _t(i, n_agents=2, state_dim=1):
    return Transition(np.full(state_dim, i, float), np.full(n_agents, i % 2), float(i), np.full(state_dim, i + 1.0), i % 5 == 4)


def test_constant_env_return_is_horizon_times_reward():
    env = ConstantEnv(reward=0.25, horizon=8)
    ep = run_episode(env, lambda s: [0, 1])
    assert len(ep) == 8
    assert ep.ret == 8 * 0.25
    assert ep.transitions[-1].done and not any(t.done for t in ep.transitions[:-1])


def test_step_after_done_raises():
    env = ConstantEnv(horizon=1)
    env.reset()
    env.step([0, 0])
    with pytest.raises(EnvDoneError):
        env.step([0, 0])


def test_check_joint_action():
    env = ConstantEnv(action_sizes=(2, 3))
    np.testing.assert_array_equal(check_joint_action(env, [1, 2]), [1, 2])
    for bad in ([2, 0], [0, -1], [0], [0, 0, 0]):
        with pytest.raises(ValueError):
            check_joint_action(env, bad)


def test_run_episode_rejects_out_of_range_policy():
    with pytest.raises(ValueError):
        run_episode(ConstantEnv(), lambda s: [5, 0])


def test_buffer_ring_overwrites_oldest():
    buf = ReplayBuffer(3, 1, 2, np.random.default_rng(0))
    for i in range(5):
        buf.push(_t(i))
    assert len(buf) == 3 and buf.total_inserted == 5
    np.testing.assert_array_equal(buf.contents().rewards, [2.0, 3.0, 4.0])


def test_buffer_sample_without_replacement():
    buf = ReplayBuffer(100, 1, 2, np.random.default_rng(0))
    for i in range(40):
        buf.push(_t(i))
    b = buf.sample(32)
    assert len(b) == 32
    assert len(set(b.rewards.tolist())) == 32
    np.testing.assert_array_equal(b.next_states[:, 0], b.states[:, 0] + 1)


def test_buffer_warmup_error():
    buf = ReplayBuffer(10, 1, 2, np.random.default_rng(0))
    buf.push(_t(0))
    assert not buf.ready(2)
    with pytest.raises(WarmupError):
        buf.sample(2)


def test_buffer_sampling_is_seeded():
    def draw(seed):
        buf = ReplayBuffer(50, 1, 2, np.random.default_rng(seed))
        for i in range(50):
            buf.push(_t(i))
        return buf.sample(8).rewards

    np.testing.assert_array_equal(draw(3), draw(3))


def test_batch_from_transitions():
    b = Batch.from_transitions([_t(0), _t(4)])
    assert b.actions.dtype == np.int64
    np.testing.assert_array_equal(b.dones, [0.0, 1.0])


def test_episode_fills_buffer_and_callback():
    buf = ReplayBuffer(100, 1, 2, np.random.default_rng(0))
    seen = []
    run_episode(ConstantEnv(horizon=4), lambda s: [0, 0], buffer=buf, on_step=seen.append)
    assert len(buf) == 4 and len(seen) == 4


def test_trajectory_csv(tmp_path):
    eps = [run_episode(ConstantEnv(horizon=2, action_sizes=(2, 2, 2)), lambda s: [1, 0, 1]) for _ in range(2)]
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, eps, 3)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["episode", "step", "reward", "a_1", "a_2", "a_3"]
    assert len(rows) == 5 and rows[-1] == ["1", "1", "0.5", "1", "0", "1"]


def test_done_at_first_step_gives_length_one():
    assert len(run_episode(ConstantEnv(horizon=1), lambda s: [0, 0])) == 1


def test_buffer_at_batch_size_returns_full_contents():
    buf = ReplayBuffer(100, 1, 2, np.random.default_rng(0))
    for i in range(32):
        buf.push(_t(i))
    assert sorted(buf.sample(32).rewards.tolist()) == [float(i) for i in range(32)]


def test_buffer_150_inserts_keeps_newest_100():
    buf = ReplayBuffer(100, 1, 2, np.random.default_rng(0))
    for i in range(150):
        buf.push(_t(i))
    np.testing.assert_array_equal(buf.contents().rewards, np.arange(50, 150, dtype=float))


def test_oracle_policy_attains_brute_force_return():
    import itertools

    from seqdac.sigmoid import SigmoidEnv, reward

    env = SigmoidEnv("sigmoid", H=2, C=10, T=6)
    rng = np.random.default_rng(11)
    env.reset(np.random.default_rng(11))
    inst = env.instance
    grid = list(itertools.product(range(10), repeat=2))
    best = sum(max(reward("sigmoid", inst, t, np.array(a) / 10) for a in grid) for t in range(7))

    def oracle(state):
        # each factor depends on one dimension only, so the per-agent argmax is optimal
        t = env.t
        from seqdac.sigmoid import sig

        target = sig(t, inst.slopes, inst.inflections)
        return [int(np.argmin(np.abs(target[h] - np.arange(10) / 10))) for h in range(2)]

    ep = run_episode(env, oracle, rng=np.random.default_rng(11))
    assert ep.ret == pytest.approx(best, rel=1e-12)
