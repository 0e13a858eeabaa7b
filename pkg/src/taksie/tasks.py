"""The ten language-commanded tabletop tasks and their antonym negatives."""

from __future__ import annotations

from dataclasses import dataclass

ANTONYMS = {
    "open": "close", "close": "open",
    "left": "right", "right": "left",
    "on": "off", "off": "on",
    "lift": "place", "place": "lift",
}


def antonym(command: str) -> str:
    """Token-level antonym swap used to build negative prompts.

    Involutive on the task set; commands with no antonymous token map to an
    empty negative prompt.
    """
    tokens = command.split()
    swapped = [ANTONYMS.get(t, t) for t in tokens]
    if swapped == tokens:
        return ""
    return " ".join(swapped)


@dataclass(frozen=True)
class Task:
    id: str
    command: str

    @property
    def negative(self) -> str:
        return antonym(self.command)


TASKS: tuple[Task, ...] = (
    Task("open_drawer", "open the drawer"),
    Task("close_drawer", "close the drawer"),
    Task("slide_left", "move the slider left"),
    Task("slide_right", "move the slider right"),
    Task("light_on", "turn on the light"),
    Task("light_off", "turn off the light"),
    Task("push_red_left", "push the red block left"),
    Task("push_red_right", "push the red block right"),
    Task("lift_red", "lift the red block"),
    Task("place_red_in_box", "place the red block in the box"),
)

TASK_BY_ID = {t.id: t for t in TASKS}
TASK_IDS = tuple(t.id for t in TASKS)

# Tasks whose demonstrations span well past the policy's training window;
# used by the benchmark's long-horizon aggregate.
LONG_HORIZON_IDS = ("open_drawer", "lift_red", "place_red_in_box")


def get_task(task_id: str) -> Task:
    if task_id not in TASK_BY_ID:
        raise ValueError(f"unknown task id {task_id!r}")
    return TASK_BY_ID[task_id]
