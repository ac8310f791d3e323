"""Exponential learning-rate decay: epoch t (1-based) runs at
lr0 * 0.99^(t-1)."""

from .errors import RangeError

DECAY = 0.99


def lr_at_epoch(lr0: float, epoch: int) -> float:
    if lr0 <= 0:
        raise RangeError(f"initial learning rate must be positive, got {lr0}")
    if epoch < 1:
        raise RangeError(f"epoch index is 1-based, got {epoch}")
    return lr0 * DECAY ** (epoch - 1)
