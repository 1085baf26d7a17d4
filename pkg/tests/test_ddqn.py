import numpy as np
import pytest

from adaptmoea.ddqn import (
    AgentConfig,
    DuelingAgent,
    ReplayBuffer,
    TENSORS,
    act,
    copy_params,
    dumps_policy,
    forward,
    init_params,
    load_policy,
    loads_policy,
    save_policy,
    sync_target,
    td_loss,
    td_targets,
    train_agent,
)
from adaptmoea.env import ApcEnv, EpisodeConfig, N_ACTIONS
from adaptmoea.errors import DimensionError, PolicyLoadError
from adaptmoea.problems import dtlz2


@pytest.fixture
def params():
    return init_params(np.random.default_rng(0), hidden=(16, 16))


def batch_of(rng, n=8):
    return {
        "state": rng.random((n, 7)),
        "action": rng.integers(N_ACTIONS, size=n),
        "reward": rng.random(n),
        "next_state": rng.random((n, 7)),
        "done": rng.random(n) < 0.3,
    }


def test_mean_q_equals_value(params):
    S = np.random.default_rng(1).random((10, 7))
    V, A, Q = forward(params, S)
    assert np.allclose(Q.mean(axis=1), V, atol=1e-10)


def test_constant_advantage_gives_flat_q(params):
    p = copy_params(params)
    p["Wa"][:] = 0.0
    p["ba"][:] = 3.0
    V, _, Q = forward(p, np.random.default_rng(2).random(7))
    assert np.allclose(Q, V, atol=1e-12)


def test_advantage_shift_does_not_move_q(params):
    s = np.random.default_rng(3).random(7)
    p = copy_params(params)
    p["ba"] += 5.0
    assert np.allclose(forward(p, s)[2], forward(params, s)[2], atol=1e-12)


def test_forward_rejects_nan(params):
    with pytest.raises(ValueError):
        forward(params, np.full(7, np.nan))


def test_greedy_when_epsilon_zero(params):
    s = np.random.default_rng(4).random(7)
    q = forward(params, s)[2]
    rng = np.random.default_rng(0)
    assert all(act(params, s, 0.0, rng) == int(np.argmax(q)) for _ in range(50))


def test_uniform_when_epsilon_one(params):
    rng = np.random.default_rng(5)
    s = np.zeros(7)
    n = 100_000
    counts = np.bincount([act(params, s, 1.0, rng) for _ in range(n)], minlength=N_ACTIONS)
    p = 1 / N_ACTIONS
    assert np.all(np.abs(counts - n * p) <= 3 * np.sqrt(n * p * (1 - p)))


def test_tie_breaks_to_lowest_index(params):
    p = copy_params(params)
    p["Wa"][:] = 0.0
    p["ba"][:] = 0.0
    p["ba"][[2, 5]] = 1.0
    assert act(p, np.random.default_rng(0).random(7), 0.0, None) == 2


def test_targets_terminal_and_gamma(params):
    rng = np.random.default_rng(6)
    b = batch_of(rng)
    b["done"][:] = True
    assert np.array_equal(td_targets(b, params, 1.0), b["reward"])
    b["done"][:] = False
    assert np.array_equal(td_targets(b, params, 0.0), b["reward"])


def test_targets_by_hand(params):
    rng = np.random.default_rng(7)
    b = batch_of(rng, 2)
    b["done"] = np.array([False, True])
    q_next = [forward(params, s)[2] for s in b["next_state"]]
    y = td_targets(b, params, 0.9)
    assert y[0] == pytest.approx(b["reward"][0] + 0.9 * max(q_next[0]))
    assert y[1] == b["reward"][1]


def test_double_q_targets(params):
    rng = np.random.default_rng(8)
    b = batch_of(rng, 5)
    online = init_params(np.random.default_rng(99), hidden=(16, 16))
    y = td_targets(b, params, 1.0, online)
    for i in range(5):
        pick = int(np.argmax(forward(online, b["next_state"][i])[2]))
        want = b["reward"][i] if b["done"][i] else b["reward"][i] + forward(params, b["next_state"][i])[2][pick]
        assert y[i] == pytest.approx(want)


def test_zero_error_zero_gradient(params):
    rng = np.random.default_rng(9)
    S = rng.random((6, 7))
    a = rng.integers(N_ACTIONS, size=6)
    y = forward(params, S)[2][np.arange(6), a]
    loss, g = td_loss(params, S, a, y)
    assert loss == 0.0
    assert all(np.all(g[k] == 0.0) for k in TENSORS)


def test_gradients_match_finite_differences(params):
    rng = np.random.default_rng(10)
    S = rng.random((5, 7))
    a = rng.integers(N_ACTIONS, size=5)
    y = rng.random(5)
    _, g = td_loss(params, S, a, y)
    h = 1e-5
    worst = 0.0
    for k in TENSORS:
        flat = params[k].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = td_loss(params, S, a, y, grads=False)
            flat[i] = old - h
            down = td_loss(params, S, a, y, grads=False)
            flat[i] = old
            num = (up - down) / (2 * h)
            ana = g[k].reshape(-1)[i]
            scale = max(abs(num), abs(ana))
            if scale > 1e-7:
                worst = max(worst, abs(num - ana) / scale)
    assert worst < 1e-4


def test_overfits_fixed_batch():
    rng = np.random.default_rng(11)
    agent = DuelingAgent(AgentConfig(lr=1e-2, hidden=(32, 32)), rng)
    S = rng.random((8, 7))
    a = rng.integers(N_ACTIONS, size=8)
    y = rng.random(8)
    for _ in range(500):
        loss, g = td_loss(agent.params, S, a, y)
        agent.opt.update(agent.params, g)
    assert td_loss(agent.params, S, a, y, grads=False) < 1e-4


def test_sync_makes_networks_agree(params):
    target = init_params(np.random.default_rng(12), hidden=(16, 16))
    S = np.random.default_rng(13).random((4, 7))
    sync_target(params, target)
    assert np.array_equal(forward(params, S)[2], forward(target, S)[2])
    snapshot = copy_params(target)
    sync_target(params, target)
    assert all(np.array_equal(snapshot[k], target[k]) for k in TENSORS)
    with pytest.raises(DimensionError):
        sync_target(params, init_params(np.random.default_rng(0), hidden=(8, 16)))


def test_target_frozen_between_syncs():
    rng = np.random.default_rng(14)
    agent = DuelingAgent(AgentConfig(batch_size=8, target_sync=100, hidden=(16, 16)), rng)
    for _ in range(40):
        b = batch_of(rng, 1)
        agent.buffer.add(b["state"][0], b["action"][0], b["reward"][0], b["next_state"][0], b["done"][0])
    start = copy_params(agent.target)
    for _ in range(99):
        agent.train_step(rng)
    assert all(np.array_equal(start[k], agent.target[k]) for k in TENSORS)
    assert any(not np.array_equal(start[k], agent.params[k]) for k in TENSORS)
    agent.train_step(rng)
    assert all(np.array_equal(agent.params[k], agent.target[k]) for k in TENSORS)


def test_replay_eviction():
    buf = ReplayBuffer(3)
    for i in range(5):
        buf.add(np.full(7, i), i % N_ACTIONS, float(i), np.zeros(7), False)
    assert len(buf) == 3
    assert sorted(buf.reward.tolist()) == [2.0, 3.0, 4.0]
    sample = buf.sample(3, np.random.default_rng(0))
    assert sorted(sample["reward"].tolist()) == [2.0, 3.0, 4.0]


def test_agent_config_validation():
    with pytest.raises(ValueError):
        AgentConfig(gamma=1.5)
    cfg = AgentConfig(eps_start=1.0, eps_end=0.1, eps_fraction=0.5)
    assert cfg.epsilon(0, 100) == 1.0
    assert cfg.epsilon(25, 100) == pytest.approx(0.55)
    assert cfg.epsilon(80, 100) == pytest.approx(0.1)


def test_policy_round_trip(params, tmp_path):
    path = tmp_path / "policy.txt"
    save_policy(params, path)
    loaded = load_policy(path)
    assert all(np.array_equal(params[k], loaded[k]) for k in TENSORS)
    assert dumps_policy(loaded) == path.read_text()


def test_truncated_policy_rejected(params):
    text = dumps_policy(params)
    with pytest.raises(PolicyLoadError):
        loads_policy(text[: len(text) // 2])
    with pytest.raises(PolicyLoadError):
        loads_policy("")


def test_policy_version_mismatch(params):
    text = dumps_policy(params).replace("format_version 1", "format_version 2")
    with pytest.raises(PolicyLoadError):
        loads_policy(text)


def test_policy_bad_number(params):
    lines = dumps_policy(params).splitlines()
    i = next(j for j, line in enumerate(lines) if line.startswith("tensor W1")) + 1
    lines[i] = "abc " + lines[i]
    with pytest.raises(PolicyLoadError):
        loads_policy("\n".join(lines))


def _factory(ep):
    return ApcEnv(dtlz2(), EpisodeConfig(generations=10, pop_size=8))


def test_training_is_deterministic():
    cfg = AgentConfig(batch_size=16, warmup=20, hidden=(16, 16), target_sync=10)
    p1, c1 = train_agent(_factory, cfg, 4, np.random.default_rng(3))
    p2, c2 = train_agent(_factory, cfg, 4, np.random.default_rng(3))
    assert len(c1) == 4
    assert [r.ret for r in c1] == [r.ret for r in c2]
    assert all(np.array_equal(p1[k], p2[k]) for k in TENSORS)
    assert np.isnan(c1[0].loss_mean) and np.isfinite(c1[-1].loss_mean)
