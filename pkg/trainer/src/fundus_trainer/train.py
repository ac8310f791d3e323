"""Fine-tuning loop: Adam with exponential LR decay, optional gradient
accumulation and per-instance normalization, early stopping on the tuning
AUC (macro-AUC for multiclass systems), score export in the evaluation
toolkit's CSV wire format.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import FundusDataset, class_count, load_dataset
from .early_stop import STOP, early_stop_update
from .errors import DataMismatch, RangeError
from .model import TINY_CNN, build_head, make_backbone, swap_batchnorm_to_instancenorm
from .optim import accumulated_step
from .schedule import lr_at_epoch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    system: str
    input_side: int
    backbone: str = TINY_CNN
    pretrained: bool = False
    lr0: float = 1e-4          # defaults below are working values, not
    dropout: float = 0.5       # reported ones; tune per task
    batch_size: int = 6
    accumulation_steps: int | None = None  # default: 15 when batch_size == 1
    instance_norm: bool = False
    hidden_dim: int = 64
    max_epochs: int = 20
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0:
            raise RangeError("lr0 must be positive")
        if self.batch_size < 1:
            raise RangeError("batch_size must be >= 1")
        if self.accumulation_steps is None:
            self.accumulation_steps = 15 if self.batch_size == 1 else 1
        if self.accumulation_steps < 1:
            raise RangeError("accumulation_steps must be >= 1")
        if self.max_epochs < 1:
            raise RangeError("max_epochs must be >= 1")


@dataclass
class TrainResult:
    best_epoch: int
    epochs_run: int
    history: list = field(default_factory=list)
    exported: dict = field(default_factory=dict)


def _rank_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    order = np.argsort(scores, kind="stable")
    ranked = scores[order]
    new_block = np.r_[True, ranked[1:] != ranked[:-1]]
    block_id = np.cumsum(new_block) - 1
    sizes = np.bincount(block_id)
    avg_rank = np.cumsum(sizes) - (sizes - 1) / 2.0
    ranks = np.empty(scores.size)
    ranks[order] = avg_rank[block_id]
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataMismatch("tuning metric needs both classes present")
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


def tuning_metric(labels: np.ndarray, probs: np.ndarray) -> float:
    """AUC of the positive class for binary tasks, mean one-vs-all AUC
    (macro) otherwise."""
    k = probs.shape[1]
    if k == 2:
        return _rank_auc((labels == 1).astype(int), probs[:, 1])
    return float(np.mean([
        _rank_auc((labels == c).astype(int), probs[:, c]) for c in range(k)]))


def _predict(model, dataset, batch_size=64) -> np.ndarray:
    loader = torch.utils.data.DataLoader(dataset, batch_size=batch_size,
                                         shuffle=False, num_workers=0)
    model.eval()
    chunks = []
    with torch.no_grad():
        for images, _ in loader:
            chunks.append(model(images).numpy())
    return np.concatenate(chunks, axis=0)


def _loss_fn(model, batch):
    images, labels = batch
    probs = model(images)
    return torch.nn.functional.nll_loss(torch.log(probs.clamp_min(1e-12)), labels)


def write_scores_csv(path: Path, image_ids, probs: np.ndarray) -> None:
    order = np.argsort(image_ids, kind="stable")
    k = probs.shape[1]
    lines = ["image_id," + ",".join(f"p{i}" for i in range(k))]
    for index in order:
        row = ",".join(f"{v:.9f}" for v in probs[index])
        lines.append(f"{image_ids[index]},{row}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def train_and_export(
    config: TrainConfig,
    manifest_path: Path | str,
    split_path: Path | str,
    images_dir: Path | str,
    out_dir: Path | str,
) -> TrainResult:
    """Train on the split's train set, early-stop on the tuning metric,
    restore the best weights and export per-set score CSVs.

    Writes scores_tune.csv, scores_validation.csv and their union
    scores.csv (which the evaluation CLI consumes directly) under out_dir,
    plus training_log.json with the metric history.
    """
    torch.manual_seed(config.seed)
    sets = load_dataset(manifest_path, split_path, images_dir,
                        config.system, config.input_side)
    for name in ("train", "tune", "validation"):
        if not sets[name]:
            raise DataMismatch(f"{name} set is empty")
    k = class_count(config.system)

    backbone = make_backbone(config.backbone, pretrained=config.pretrained)
    model = build_head(backbone, k, hidden_dim=config.hidden_dim,
                       dropout=config.dropout)
    if config.instance_norm:
        swap_batchnorm_to_instancenorm(model)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr0)

    train_data = FundusDataset(sets["train"])
    tune_data = FundusDataset(sets["tune"])
    tune_labels = np.array([item.label for item in sets["tune"]])

    loader_generator = torch.Generator()
    history: list[float] = []
    best_state = None
    best_epoch = 0
    epochs_run = 0
    for epoch in range(1, config.max_epochs + 1):
        lr = lr_at_epoch(config.lr0, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        loader_generator.manual_seed(config.seed * 100003 + epoch)
        loader = torch.utils.data.DataLoader(
            train_data, batch_size=config.batch_size, shuffle=True,
            num_workers=0, generator=loader_generator, drop_last=False)

        model.train()
        window = []
        epoch_loss = 0.0
        steps = 0
        for batch in loader:
            window.append(batch)
            if len(window) == config.accumulation_steps:
                epoch_loss += accumulated_step(model, window, optimizer, _loss_fn)
                steps += 1
                window = []
        if window:
            epoch_loss += accumulated_step(model, window, optimizer, _loss_fn)
            steps += 1

        metric = tuning_metric(tune_labels, _predict(model, tune_data))
        history.append(metric)
        epochs_run = epoch
        log.info("epoch %d: lr %.3g, loss %.4f, tuning metric %.4f",
                 epoch, lr, epoch_loss / max(steps, 1), metric)
        decision, stopped_best = early_stop_update(history, config.patience)
        current_best = int(np.argmax(history)) + 1
        if current_best == epoch:
            best_state = {key: value.detach().clone()
                          for key, value in model.state_dict().items()}
            best_epoch = epoch
        if decision == STOP:
            best_epoch = stopped_best
            log.info("early stop after epoch %d (best epoch %d)", epoch, stopped_best)
            break

    if best_state is not None:
        model.load_state_dict(best_state)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    exported = {}
    union_ids: list[str] = []
    union_probs = []
    for name in ("tune", "validation"):
        items = sets[name]
        probs = _predict(model, FundusDataset(items))
        ids = [item.image_id for item in items]
        path = out_dir / f"scores_{name}.csv"
        write_scores_csv(path, ids, probs)
        exported[name] = path
        union_ids += ids
        union_probs.append(probs)
    union_path = out_dir / "scores.csv"
    write_scores_csv(union_path, union_ids, np.concatenate(union_probs, axis=0))
    exported["union"] = union_path

    log_path = out_dir / "training_log.json"
    log_path.write_text(json.dumps({
        "system": config.system,
        "input_side": config.input_side,
        "backbone": config.backbone,
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "tuning_history": history,
        "seed": config.seed,
    }, indent=2) + "\n", encoding="utf-8")
    exported["log"] = log_path

    return TrainResult(best_epoch=best_epoch, epochs_run=epochs_run,
                       history=history, exported=exported)
