"""Progress encoder state and the advance/continue evaluator.

The progress encoder is a gated recurrent cell folded over the embeddings of
achieved subgoals; its hidden state conditions the subgoal generator.  The
evaluator advances to the next subgoal when the current observation's
embedding is cosine-similar enough to the subgoal embedding, or when the
policy has spent too many steps on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .nn import ParameterSet, gru_cell

HIDDEN_DIM = 32


@dataclass
class ProgressState:
    h: np.ndarray
    steps_on_current_subgoal: int = 0
    achieved_count: int = 0


@dataclass(frozen=True)
class EvaluatorParams:
    cos_threshold: float = 0.96   # advance when similarity reaches this
    step_cap: int = 20            # or when a subgoal has consumed this many steps

    def __post_init__(self):
        if not 0.0 < self.cos_threshold <= 1.0:
            raise ValueError(f"cos_threshold must be in (0, 1], got {self.cos_threshold}")
        if self.step_cap < 1:
            raise ValueError(f"step_cap must be >= 1, got {self.step_cap}")


def progress_init(hidden_dim: int = HIDDEN_DIM) -> ProgressState:
    return ProgressState(np.zeros(hidden_dim))


def progress_update(gru_params: ParameterSet, state: ProgressState,
                    embedding: np.ndarray) -> ProgressState:
    """Fold one achieved-subgoal embedding into the progress memory."""
    h_new = gru_cell(gru_params, state.h, embedding)
    return ProgressState(h_new, steps_on_current_subgoal=0,
                         achieved_count=state.achieved_count + 1)


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for a zero embedding")
    if np.array_equal(a, b):
        return 1.0  # exact, so identical embeddings clear any threshold <= 1
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


class EvalDecision(NamedTuple):
    advance: bool
    reason: str | None   # "similarity" or "cap" when advancing


def evaluate(params: EvaluatorParams, current_emb: np.ndarray,
             subgoal_emb: np.ndarray, steps_on_subgoal: int) -> EvalDecision:
    """Advance iff similarity reached the threshold or the step cap is hit."""
    sim = cosine_sim(current_emb, subgoal_emb)
    if sim >= params.cos_threshold:
        return EvalDecision(True, "similarity")
    if steps_on_subgoal >= params.step_cap:
        return EvalDecision(True, "cap")
    return EvalDecision(False, None)
