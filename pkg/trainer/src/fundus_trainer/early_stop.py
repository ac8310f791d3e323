"""Early stopping on a tuning-metric history (higher is better).

Improvement is strict, so ties keep the earlier epoch as best; training
stops once `patience` consecutive epochs have failed to improve on it.
"""

from typing import Sequence

from .errors import RangeError

CONTINUE = "continue"
STOP = "stop"


def early_stop_update(history: Sequence[float], patience: int):
    """Returns ("continue", None) or ("stop", best_epoch), epochs 1-based."""
    if not history:
        raise RangeError("metric history must be nonempty")
    if patience < 1:
        raise RangeError(f"patience must be >= 1, got {patience}")
    best_epoch = 1
    best_value = history[0]
    for epoch, value in enumerate(history[1:], start=2):
        if value > best_value:
            best_value = value
            best_epoch = epoch
    if len(history) - best_epoch >= patience:
        return STOP, best_epoch
    return CONTINUE, None
