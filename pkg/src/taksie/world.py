"""Deterministic 2.5-D tabletop world.

State lives in the unit cube: a gripper (position + open/closed), a drawer
and a cabinet slider with articulation in [0, 1], a toggleable light, and
three colored blocks.  Observations flatten to a fixed 16-dim vector:
[gripper x y z grip, drawer, slider, light, 3 x block xyz].

Kinematics are intentionally simple and fully clamped: no contact dynamics,
no gravity, no orientation.  Grasping attaches the nearest free block when
the gripper closes within range; handles drive their articulation while the
closed gripper rides them; the light toggles when a closed gripper enters the
switch region from outside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import Rng
from .tasks import Task, get_task

OBS_DIM = 16
ACT_DIM = 4
DELTA_MAX = 0.05
GRASP_XY = 0.04
GRASP_Z = 0.05

DRAWER_X, DRAWER_Y0, DRAWER_TRAVEL, DRAWER_Z = 0.90, 0.15, 0.30, 0.10
SLIDER_Y, SLIDER_X0, SLIDER_TRAVEL, SLIDER_Z = 0.90, 0.30, 0.40, 0.15
SWITCH_POS = np.array([0.08, 0.90, 0.25])
SWITCH_RADIUS = 0.06
BOX_POS = np.array([0.12, 0.15])
BOX_RADIUS = 0.06
BLOCK_MIN_DIST = 0.08
BLOCK_REGION = dict(x=(0.30, 0.70), y=(0.30, 0.70))
RED, GREEN, BLUE = 0, 1, 2


@dataclass
class WorldState:
    grip_pos: np.ndarray                 # (3,) in [0,1]
    grip_closed: int                     # 0 open, 1 closed
    drawer: float                        # articulation in [0,1], 1 = open
    slider: float                        # articulation in [0,1], 1 = right
    light: int                           # 0 off, 1 on
    blocks: np.ndarray                   # (3,3) xyz per block
    held: int = -1                       # block index or -1
    ref_block_x: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "WorldState":
        return WorldState(self.grip_pos.copy(), self.grip_closed, self.drawer,
                          self.slider, self.light, self.blocks.copy(), self.held,
                          self.ref_block_x.copy())

    def observe(self) -> np.ndarray:
        return np.concatenate([
            self.grip_pos, [float(self.grip_closed), self.drawer, self.slider,
                            float(self.light)],
            self.blocks.reshape(-1),
        ])

    def anchor(self) -> None:
        """Re-anchor the reference block positions at a task boundary."""
        self.ref_block_x = self.blocks[:, 0].copy()


def drawer_handle(drawer: float) -> np.ndarray:
    return np.array([DRAWER_X, DRAWER_Y0 + DRAWER_TRAVEL * drawer, DRAWER_Z])

def slider_handle(slider: float) -> np.ndarray:
    return np.array([SLIDER_X0 + SLIDER_TRAVEL * slider, SLIDER_Y, SLIDER_Z])


def _within_grasp(pos: np.ndarray, target: np.ndarray) -> bool:
    return (np.hypot(pos[0] - target[0], pos[1] - target[1]) <= GRASP_XY
            and abs(pos[2] - target[2]) <= GRASP_Z)


# ---------------------------------------------------------------------------
# Success and precondition predicates.
# ---------------------------------------------------------------------------

def _red_in_box(s: WorldState) -> bool:
    b = s.blocks[RED]
    return (s.held != RED and np.hypot(b[0] - BOX_POS[0], b[1] - BOX_POS[1]) <= BOX_RADIUS
            and b[2] <= 0.1)


_SUCCESS = {
    "open_drawer": lambda s: s.drawer >= 0.8,
    "close_drawer": lambda s: s.drawer <= 0.2,
    "slide_left": lambda s: s.slider <= 0.2,
    "slide_right": lambda s: s.slider >= 0.8,
    "light_on": lambda s: s.light == 1,
    "light_off": lambda s: s.light == 0,
    "push_red_left": lambda s: s.blocks[RED, 0] <= s.ref_block_x[RED] - 0.15,
    "push_red_right": lambda s: s.blocks[RED, 0] >= s.ref_block_x[RED] + 0.15,
    "lift_red": lambda s: s.held == RED and s.blocks[RED, 2] >= 0.5,
    "place_red_in_box": _red_in_box,
}

_PRECONDITION = {
    "open_drawer": lambda s: s.drawer < 0.2 and s.held == -1,
    "close_drawer": lambda s: s.drawer > 0.8 and s.held == -1,
    "slide_left": lambda s: s.slider > 0.8 and s.held == -1,
    "slide_right": lambda s: s.slider < 0.2 and s.held == -1,
    "light_on": lambda s: s.light == 0,
    "light_off": lambda s: s.light == 1,
    "push_red_left": lambda s: s.blocks[RED, 0] >= 0.28 and s.held in (-1, RED),
    "push_red_right": lambda s: s.blocks[RED, 0] <= 0.72 and s.held in (-1, RED),
    "lift_red": lambda s: s.held in (-1, RED) and not _SUCCESS["lift_red"](s),
    "place_red_in_box": lambda s: s.held in (-1, RED) and not _red_in_box(s),
}


def success(task: Task | str, state: WorldState) -> bool:
    task_id = task.id if isinstance(task, Task) else get_task(task).id
    return bool(_SUCCESS[task_id](state))


def precondition(task: Task | str, state: WorldState) -> bool:
    task_id = task.id if isinstance(task, Task) else get_task(task).id
    return bool(_PRECONDITION[task_id](state))


# ---------------------------------------------------------------------------
# Reset and step.
# ---------------------------------------------------------------------------

def reset(task: Task | str, seed: int) -> WorldState:
    """Sample a start state satisfying the task's precondition."""
    task = task if isinstance(task, Task) else get_task(task)
    rng = Rng(seed)
    grip_pos = np.array([rng.uniform_range(0.35, 0.65),
                         rng.uniform_range(0.35, 0.65),
                         rng.uniform_range(0.30, 0.50)])
    drawer = rng.uniform_range(0.0, 0.15)
    slider = rng.uniform_range(0.0, 1.0)
    light = int(rng.uniform() < 0.5)

    blocks = np.zeros((3, 3))
    for i in range(3):
        for _attempt in range(1000):
            x = rng.uniform_range(*BLOCK_REGION["x"])
            y = rng.uniform_range(*BLOCK_REGION["y"])
            if all(np.hypot(x - blocks[j, 0], y - blocks[j, 1]) >= BLOCK_MIN_DIST
                   for j in range(i)):
                blocks[i] = (x, y, 0.0)
                break
        else:
            raise RuntimeError("block placement failed")  # unreachable region sizing

    if task.id == "close_drawer":
        drawer = rng.uniform_range(0.85, 1.0)
    if task.id == "slide_left":
        slider = rng.uniform_range(0.85, 1.0)
    elif task.id == "slide_right":
        slider = rng.uniform_range(0.0, 0.15)
    if task.id == "light_on":
        light = 0
    elif task.id == "light_off":
        light = 1

    state = WorldState(grip_pos, 0, drawer, slider, light, blocks)
    state.anchor()
    if not precondition(task, state):
        raise ValueError(f"task {task.id!r} precondition unsatisfiable at reset")
    return state


def step(state: WorldState, action: np.ndarray) -> WorldState:
    """Integrate one clamped action; pure (returns a new state)."""
    action = np.asarray(action, dtype=np.float64)
    delta = np.clip(action[:3], -DELTA_MAX, DELTA_MAX)
    closing = float(np.clip(action[3], -1.0, 1.0)) > 0.0

    s = state.copy()
    prev_pos = s.grip_pos.copy()
    new_pos = np.clip(prev_pos + delta, 0.0, 1.0)
    applied = new_pos - prev_pos
    s.grip_pos = new_pos

    if s.held >= 0:
        if closing:
            s.blocks[s.held] = new_pos        # held block rides the gripper
        else:
            s.held = -1                       # release at current pose

    if closing and s.held < 0:
        best, best_d = -1, np.inf
        for i in range(3):
            if _within_grasp(new_pos, s.blocks[i]):
                d = float(np.linalg.norm(new_pos - s.blocks[i]))
                if d < best_d:
                    best, best_d = i, d
        if best >= 0:
            s.held = best
            s.blocks[best] = new_pos

    # Handles drive their articulation while gripped (no block in hand).
    if closing and s.held < 0:
        if _within_grasp(prev_pos, drawer_handle(state.drawer)):
            s.drawer = float(np.clip(state.drawer + applied[1] / DRAWER_TRAVEL, 0.0, 1.0))
        elif _within_grasp(prev_pos, slider_handle(state.slider)):
            s.slider = float(np.clip(state.slider + applied[0] / SLIDER_TRAVEL, 0.0, 1.0))

    if closing:
        was_out = np.linalg.norm(prev_pos - SWITCH_POS) > SWITCH_RADIUS
        now_in = np.linalg.norm(new_pos - SWITCH_POS) <= SWITCH_RADIUS
        if was_out and now_in:
            s.light = 1 - s.light

    s.grip_closed = int(closing)
    return s


# ---------------------------------------------------------------------------
# Analytic goal states for the final-goal-only baseline.
# ---------------------------------------------------------------------------

def oracle_goal_state(task: Task | str, state: WorldState) -> np.ndarray:
    """Observation of a success state reachable from `state`, with untouched
    objects unchanged and the gripper at its natural task-final pose."""
    return oracle_goal(task, state).observe()


def oracle_goal(task: Task | str, state: WorldState) -> WorldState:
    task = task if isinstance(task, Task) else get_task(task)
    if not precondition(task, state):
        raise ValueError(f"task {task.id!r} precondition does not hold")
    g = state.copy()
    tid = task.id
    if tid == "open_drawer":
        g.drawer = 1.0
        g.grip_pos = drawer_handle(1.0)
        g.grip_closed = 0
    elif tid == "close_drawer":
        g.drawer = 0.0
        g.grip_pos = drawer_handle(0.0)
        g.grip_closed = 0
    elif tid == "slide_left":
        g.slider = 0.0
        g.grip_pos = slider_handle(0.0)
        g.grip_closed = 0
    elif tid == "slide_right":
        g.slider = 1.0
        g.grip_pos = slider_handle(1.0)
        g.grip_closed = 0
    elif tid in ("light_on", "light_off"):
        g.light = 1 if tid == "light_on" else 0
        g.grip_pos = SWITCH_POS.copy()
        g.grip_closed = 1
    elif tid == "push_red_left":
        g.blocks[RED, 0] = state.ref_block_x[RED] - 0.2
        g.grip_pos = np.array([g.blocks[RED, 0], g.blocks[RED, 1], 0.02])
        g.grip_closed = 0
    elif tid == "push_red_right":
        g.blocks[RED, 0] = state.ref_block_x[RED] + 0.2
        g.grip_pos = np.array([g.blocks[RED, 0], g.blocks[RED, 1], 0.02])
        g.grip_closed = 0
    elif tid == "lift_red":
        g.blocks[RED] = np.array([state.blocks[RED, 0], state.blocks[RED, 1], 0.55])
        g.grip_pos = g.blocks[RED].copy()
        g.grip_closed = 1
        g.held = RED
    elif tid == "place_red_in_box":
        g.blocks[RED] = np.array([BOX_POS[0], BOX_POS[1], 0.0])
        g.grip_pos = np.array([BOX_POS[0], BOX_POS[1], 0.02])
        g.grip_closed = 0
        g.held = -1
    else:  # pragma: no cover - get_task already screens ids
        raise ValueError(f"unknown task id {tid!r}")
    return g
