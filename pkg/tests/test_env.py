import math

import numpy as np
import pytest

from adaptmoea.env import (
    N_ACTIONS,
    ApcEnv,
    ConstantPolicy,
    EpisodeConfig,
    RandomPolicy,
    decode_action,
    encode_action,
    run_episode,
    state_features,
    write_trace_csv,
)
from adaptmoea.errors import ParameterError, StateError
from adaptmoea.problems import dtlz2


@pytest.mark.parametrize("index, expected", [(0, (1.0, 0.01)), (14, (40.0, 0.10)), (7, (10.0, 0.05))])
def test_decode_action(index, expected):
    assert decode_action(index) == expected


def test_action_round_trip():
    assert [encode_action(*decode_action(a)) for a in range(N_ACTIONS)] == list(range(N_ACTIONS))
    with pytest.raises(ParameterError):
        decode_action(15)
    with pytest.raises(ParameterError):
        decode_action(-1)
    with pytest.raises(ParameterError):
        encode_action(3.0, 0.05)


def test_features_hand_computed():
    F = np.array([[0.0, 2.0], [1.0, 1.0], [4.0, 0.0]])
    s = state_features(F, lo=[0, 0], hi=[4, 2], hv=0.3, front_size=3, pop_size=3,
                       generation=5, total_generations=20, stagnation=4)
    # normalized: [[0, 1], [0.25, 0.5], [1, 0]]
    assert s.g_norm == 0.25
    assert s.stagnation == 0.4
    assert s.o_mean == pytest.approx(2.75 / 6)
    assert s.o_min == 0.0
    sd0 = math.sqrt(((0 - 5 / 12) ** 2 + (0.25 - 5 / 12) ** 2 + (1 - 5 / 12) ** 2) / 3)
    sd1 = math.sqrt((0.25 + 0 + 0.25) / 3)
    assert s.sigma == pytest.approx((sd0 + sd1) / 2)
    assert s.hv == 0.3 and s.pareto_fill == 1.0


def test_identical_population_has_zero_spread():
    F = np.tile([0.4, 0.7, 0.1], (6, 1))
    s = state_features(F, F.min(0), F.max(0), 0.0, 6, 6, 0, 10, 0)
    assert s.sigma == 0.0 and s.o_mean == 0.0


def test_stagnation_is_capped():
    F = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert state_features(F, [0, 0], [1, 1], 0.0, 2, 2, 0, 10, 25).stagnation == 1.0


def test_initial_state():
    env = ApcEnv(dtlz2(), EpisodeConfig(generations=10, pop_size=20))
    s = env.reset(3)
    assert s.shape == (7,)
    assert s[0] == 0.0 and s[1] == 0.0
    assert s[6] == pytest.approx(env.state.pareto_fill)
    assert np.all((s >= 0) & (s <= 1))


def test_return_is_sum_of_rewards():
    res = run_episode(ConstantPolicy(4), EpisodeConfig(generations=15, pop_size=12))
    assert res.ret == pytest.approx(sum(t.reward for t in res.transitions), abs=1e-12)
    assert len(res.transitions) == 15
    assert [t.done for t in res.transitions] == [False] * 14 + [True]


def test_single_generation_episode():
    env = ApcEnv(dtlz2(), EpisodeConfig(generations=1, pop_size=8))
    env.reset(0)
    _, r, done = env.step(7)
    assert done and 0.0 <= r <= 1.0
    with pytest.raises(StateError):
        env.step(7)


def test_step_before_reset():
    env = ApcEnv(dtlz2(), EpisodeConfig(generations=3, pop_size=8))
    with pytest.raises(StateError):
        env.step(0)


def test_episode_config_validation():
    with pytest.raises(ParameterError):
        EpisodeConfig(generations=0)
    with pytest.raises(ParameterError):
        EpisodeConfig(pop_size=2)


def test_episode_deterministic():
    cfg = EpisodeConfig(generations=12, pop_size=12, seed=4)
    a = run_episode(ConstantPolicy(7), cfg)
    b = run_episode(ConstantPolicy(7), cfg)
    assert a.hv_trace == b.hv_trace and a.ret == b.ret


def test_archive_trace_monotone_and_dominates_front():
    res = run_episode(RandomPolicy(np.random.default_rng(0)), EpisodeConfig(generations=30, pop_size=12))
    arch = np.array(res.archive_trace)
    assert np.all(np.diff(arch) >= -1e-12)
    assert np.all(arch >= np.array(res.hv_trace) - 1e-12)


def test_features_stay_in_unit_box():
    env = ApcEnv(dtlz2(), EpisodeConfig(generations=25, pop_size=12))
    s = env.reset(9)
    rng = np.random.default_rng(9)
    done = False
    while not done:
        assert np.all((s >= 0) & (s <= 1))
        s, r, done = env.step(int(rng.integers(N_ACTIONS)))
        assert 0.0 <= r <= 1.0


def test_fixed_mode_has_no_actions():
    res = run_episode(None, EpisodeConfig(generations=5, pop_size=12))
    assert res.actions == [-1] * 5 and res.transitions == []


def test_trace_csv(tmp_path):
    res = run_episode(ConstantPolicy(0), EpisodeConfig(generations=4, pop_size=8))
    path = tmp_path / "trace.csv"
    write_trace_csv(res.rows, path, "seed=0")
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=0"
    assert lines[1] == "episode,generation,action_index,reward,hv,stagnation"
    assert len(lines) == 6
