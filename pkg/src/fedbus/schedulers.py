"""Round-level learning-rate plateau reduction and early stopping.

The server monitors one scalar per aggregated round (by default the weighted
mean post-evaluation loss) and keeps two independent stall counters against a
shared best-so-far record. Functions return new states; nothing is mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

MIN_DELTA = 1e-4


@dataclass(frozen=True)
class SchedulerState:
    current_lr: float
    plateau_patience: int
    reduce_factor: float = 0.5
    stop_patience: int = 0
    plateau_counter: int = 0
    stop_counter: int = 0
    best_metric: float = math.inf
    best_round: int = -1
    best_weights_ref: str | None = None
    min_delta: float = MIN_DELTA


def _improved(monitored: float, best: float, direction: str, min_delta: float) -> bool:
    if direction == "minimize":
        return monitored < best - min_delta
    if direction == "maximize":
        return monitored > best + min_delta
    raise ValueError(f"unknown direction {direction!r}")


def _initial_best(direction: str) -> float:
    return math.inf if direction == "minimize" else -math.inf


def plateau_step(
    state: SchedulerState, monitored: float, direction: str = "minimize"
) -> tuple[bool, SchedulerState]:
    """One plateau-reducer observation; True when the lr was just reduced."""
    if not math.isfinite(monitored):
        raise ValueError("monitored metric must be finite")
    if _improved(monitored, state.best_metric, direction, state.min_delta):
        return False, replace(state, best_metric=monitored, plateau_counter=0)
    counter = state.plateau_counter + 1
    if state.plateau_patience > 0 and counter >= state.plateau_patience:
        return True, replace(
            state,
            plateau_counter=0,
            current_lr=state.current_lr * state.reduce_factor,
        )
    return False, replace(state, plateau_counter=counter)


def early_stop_step(
    state: SchedulerState,
    monitored: float,
    direction: str = "minimize",
    round_index: int | None = None,
    weights_ref: str | None = None,
) -> tuple[bool, SchedulerState]:
    """One early-stop observation; True once the stall reaches stop_patience."""
    if not math.isfinite(monitored):
        raise ValueError("monitored metric must be finite")
    if _improved(monitored, state.best_metric, direction, state.min_delta):
        return False, replace(
            state,
            best_metric=monitored,
            stop_counter=0,
            best_round=state.best_round if round_index is None else round_index,
            best_weights_ref=weights_ref if weights_ref is not None else state.best_weights_ref,
        )
    counter = state.stop_counter + 1
    stop = state.stop_patience > 0 and counter >= state.stop_patience
    return stop, replace(state, stop_counter=counter)


def scheduler_round(
    state: SchedulerState,
    monitored: float,
    direction: str = "minimize",
    round_index: int | None = None,
    weights_ref: str | None = None,
) -> tuple[bool, bool, SchedulerState]:
    """Apply both controllers to one observation with a single shared
    improvement test (calling the two steps in sequence would let the first
    one swallow the improvement before the second sees it).

    Returns (lr_changed, stop, new_state).
    """
    if not math.isfinite(monitored):
        raise ValueError("monitored metric must be finite")
    if _improved(monitored, state.best_metric, direction, state.min_delta):
        return False, False, replace(
            state,
            best_metric=monitored,
            plateau_counter=0,
            stop_counter=0,
            best_round=state.best_round if round_index is None else round_index,
            best_weights_ref=weights_ref if weights_ref is not None else state.best_weights_ref,
        )
    plateau_counter = state.plateau_counter + 1
    stop_counter = state.stop_counter + 1
    lr = state.current_lr
    lr_changed = False
    if state.plateau_patience > 0 and plateau_counter >= state.plateau_patience:
        lr *= state.reduce_factor
        plateau_counter = 0
        lr_changed = True
    stop = state.stop_patience > 0 and stop_counter >= state.stop_patience
    return lr_changed, stop, replace(
        state,
        current_lr=lr,
        plateau_counter=plateau_counter,
        stop_counter=stop_counter,
    )


def initial_scheduler(
    lr: float,
    plateau_patience: int,
    stop_patience: int,
    reduce_factor: float = 0.5,
    direction: str = "minimize",
    min_delta: float = MIN_DELTA,
) -> SchedulerState:
    return SchedulerState(
        current_lr=lr,
        plateau_patience=plateau_patience,
        reduce_factor=reduce_factor,
        stop_patience=stop_patience,
        best_metric=_initial_best(direction),
        min_delta=min_delta,
    )
