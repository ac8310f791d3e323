"""Gradient accumulation: one optimizer step from the averaged gradients of
several micro-batches, matching the update a single larger batch would give."""

from __future__ import annotations

from typing import Callable, Sequence

import torch

from .errors import EmptyBatch


def accumulated_step(
    model: torch.nn.Module,
    micro_batches: Sequence,
    optimizer: torch.optim.Optimizer,
    loss_fn: Callable,
) -> float:
    """Apply one optimizer step using the mean gradient over micro_batches.

    loss_fn(model, batch) must return the mean loss of one micro-batch.
    Each loss is scaled by 1/len(micro_batches) before backward, so the
    accumulated gradient is the average of per-micro-batch gradients; with a
    single micro-batch this is exactly a plain step. Returns the averaged
    loss value.
    """
    if len(micro_batches) == 0:
        raise EmptyBatch("accumulation window has no micro-batches")
    optimizer.zero_grad(set_to_none=True)
    scale = 1.0 / len(micro_batches)
    total = 0.0
    for batch in micro_batches:
        loss = loss_fn(model, batch) * scale
        loss.backward()
        total += float(loss.detach())
    optimizer.step()
    return total
