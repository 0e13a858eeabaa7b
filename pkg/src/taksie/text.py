"""Learned word-embedding text encoder.

The vocabulary comes from the task command templates plus a null token; a
command embeds as the mean of its token rows.  The table trains jointly with
the subgoal generator, and the null row doubles as the blank negative prompt
and the dropout replacement during classifier-free-guidance training.
"""

from __future__ import annotations

import numpy as np

from .nn import ParameterSet
from .rng import Rng
from .tasks import TASKS, antonym

TEXT_DIM = 16
NULL_TOKEN = "<null>"


def _build_vocab() -> tuple[str, ...]:
    tokens: set[str] = set()
    for task in TASKS:
        tokens.update(task.command.split())
        tokens.update(task.negative.split())
    return tuple(sorted(tokens)) + (NULL_TOKEN,)

VOCAB: tuple[str, ...] = _build_vocab()
TOKEN_INDEX = {tok: i for i, tok in enumerate(VOCAB)}
NULL_ID = TOKEN_INDEX[NULL_TOKEN]


def init_text_params(rng: Rng) -> ParameterSet:
    a = np.sqrt(6.0 / (len(VOCAB) + TEXT_DIM))
    return ParameterSet({"table": rng.uniform_range(-a, a, (len(VOCAB), TEXT_DIM))})


def token_ids(command: str) -> list[int]:
    """Token rows for a command; the empty command maps to the null token."""
    if not command:
        return [NULL_ID]
    ids = []
    for tok in command.split():
        if tok not in TOKEN_INDEX:
            raise ValueError(f"unknown token {tok!r} in command {command!r}")
        ids.append(TOKEN_INDEX[tok])
    return ids


def encode_text(text_params: ParameterSet, command: str) -> np.ndarray:
    """Mean of the command's token embeddings (null row for empty commands)."""
    return text_params["table"][token_ids(command)].mean(axis=0)


def null_embedding(text_params: ParameterSet) -> np.ndarray:
    return text_params["table"][NULL_ID].copy()


def scatter_text_grad(table_grad: np.ndarray, ids: list[int],
                      d_embedding: np.ndarray) -> None:
    """Accumulate the mean-pool gradient back onto the token rows."""
    share = d_embedding / len(ids)
    for i in ids:
        table_grad[i] += share


__all__ = ["TEXT_DIM", "NULL_TOKEN", "VOCAB", "NULL_ID", "antonym",
           "init_text_params", "token_ids", "encode_text", "null_embedding",
           "scatter_text_grad"]
