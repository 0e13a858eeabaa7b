import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taksie import world
from taksie.tasks import TASKS, get_task
from taksie.world import (WorldState, oracle_goal, oracle_goal_state, reset,
                          step, success)


def obs_of(state):
    return state.observe()


def test_reset_deterministic():
    a = reset("open_drawer", 7)
    b = reset("open_drawer", 7)
    assert np.array_equal(a.observe(), b.observe())


def test_open_drawer_reset_precondition():
    for seed in range(50):
        assert reset("open_drawer", seed).drawer < 0.2


def test_reset_block_separation():
    for seed in range(1000):
        s = reset("lift_red", seed)
        for i in range(3):
            for j in range(i + 1, 3):
                d = np.hypot(s.blocks[i, 0] - s.blocks[j, 0],
                             s.blocks[i, 1] - s.blocks[j, 1])
                assert d >= 0.08


def test_step_integrates_deltas():
    s = reset("light_on", 0)
    s.grip_pos = np.array([0.5, 0.5, 0.5])
    out = step(s, np.array([0.02, 0.0, 0.0, -1.0]))
    assert np.allclose(out.grip_pos, [0.52, 0.5, 0.5])


def test_step_clamps_at_walls():
    s = reset("light_on", 0)
    s.grip_pos = np.array([1.0, 0.5, 0.5])
    out = step(s, np.array([0.05, 0.0, 0.0, -1.0]))
    assert out.grip_pos[0] == 1.0


def test_step_clamps_oversized_deltas():
    s = reset("light_on", 0)
    s.grip_pos = np.array([0.5, 0.5, 0.5])
    out = step(s, np.array([0.5, -0.5, 0.0, -1.0]))
    assert np.allclose(out.grip_pos, [0.55, 0.45, 0.5])


def test_grasp_and_lift_kinematics():
    s = reset("lift_red", 3)
    s.grip_pos = s.blocks[0] + np.array([0.03, 0.0, 0.0])
    held = step(s, np.array([0.0, 0.0, 0.0, 1.0]))
    assert held.held == 0
    assert np.array_equal(held.blocks[0], held.grip_pos)
    # Raising the gripper 0.04 with grip maintained raises the block with it.
    up = step(held, np.array([0.0, 0.0, 0.04, 1.0]))
    assert up.held == 0
    assert np.allclose(up.blocks[0, 2], held.blocks[0, 2] + 0.04)


def test_release_leaves_block_at_pose():
    s = reset("lift_red", 3)
    s.grip_pos = s.blocks[0].copy()
    held = step(s, np.array([0.0, 0.0, 0.0, 1.0]))
    dropped = step(held, np.array([0.02, 0.0, 0.0, -1.0]))
    assert dropped.held == -1
    assert np.array_equal(dropped.blocks[0], held.blocks[0])


def test_drawer_follows_closed_gripper():
    s = reset("open_drawer", 5)
    s.grip_pos = world.drawer_handle(s.drawer)
    q0 = s.drawer
    out = step(s, np.array([0.0, 0.03, 0.0, 1.0]))
    assert out.drawer == pytest.approx(q0 + 0.03 / world.DRAWER_TRAVEL)


def test_light_toggles_on_closed_entry_only():
    s = reset("light_on", 1)
    outside = world.SWITCH_POS + np.array([0.08, 0.0, 0.0])
    s.grip_pos = outside.copy()
    closed = step(s, np.array([0.0, 0.0, 0.0, 1.0]))
    entered = step(closed, np.array([-0.05, 0.0, 0.0, 1.0]))
    assert entered.light == 1
    # Moving within the region does not re-toggle.
    inside = step(entered, np.array([-0.01, 0.0, 0.0, 1.0]))
    assert inside.light == 1
    # Open-gripper entry does not toggle.
    s2 = reset("light_on", 1)
    s2.grip_pos = outside.copy()
    entered_open = step(s2, np.array([-0.05, 0.0, 0.0, -1.0]))
    assert entered_open.light == 0


def test_success_thresholds_are_strict():
    s = reset("open_drawer", 2)
    s.drawer = 0.85
    assert success("open_drawer", s)
    s.drawer = 0.79
    assert not success("open_drawer", s)


def test_success_rejects_unknown_task():
    with pytest.raises(ValueError, match="unknown task"):
        success("juggle", reset("light_on", 0))


def test_oracle_goal_examples():
    s = reset("open_drawer", 9)
    g = oracle_goal("open_drawer", s)
    assert g.drawer == 1.0
    assert np.array_equal(g.blocks, s.blocks)

    s2 = reset("light_on", 9)
    g2 = oracle_goal("light_on", s2)
    assert g2.light == 1
    assert np.array_equal(g2.blocks, s2.blocks)


def test_oracle_goal_satisfies_success_for_all_tasks():
    for task in TASKS:
        for seed in range(50):
            s = reset(task, seed)
            assert success(task, oracle_goal(task, s)), (task.id, seed)


def test_oracle_goal_state_is_valid_observation():
    obs = oracle_goal_state("place_red_in_box", reset("place_red_in_box", 4))
    assert obs.shape == (16,)
    assert np.all(obs >= 0.0) and np.all(obs <= 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.lists(
    st.tuples(st.floats(-0.1, 0.1), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1),
              st.floats(-1, 1)),
    min_size=1, max_size=30))
def test_physics_invariants_hold_after_every_step(seed, actions):
    s = reset("lift_red", seed)
    for a in actions:
        s = step(s, np.array(a))
        obs = s.observe()
        assert np.all(obs >= 0.0) and np.all(obs <= 1.0)
        assert s.held in (-1, 0, 1, 2)
        if s.held >= 0:
            assert np.array_equal(s.blocks[s.held], s.grip_pos)
        assert 0.0 <= s.drawer <= 1.0 and 0.0 <= s.slider <= 1.0


def test_determinism_over_action_sequences():
    rngs = np.random.default_rng(0)
    actions = rngs.uniform(-1, 1, size=(40, 4)) * [0.05, 0.05, 0.05, 1.0]
    a = reset("push_red_left", 11)
    b = reset("push_red_left", 11)
    for act in actions:
        a, b = step(a, act), step(b, act)
    assert np.array_equal(a.observe(), b.observe())
