"""Training loop: plain SGD with the stepped learning-rate schedule.

Loss is the mean squared error over batch and pixels (the 1/(m^2 N)
Frobenius scaling). Checkpoints are self-describing (config hash,
normalization, epoch) and written atomically; per-epoch train/val loss
and MRE go to a CSV curve file. Fixed seeds make runs reproducible on
one device.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader

from .data import Normalization
from .evaluate import evaluate


@dataclass
class TrainConfig:
    lr: float = 0.01
    lr_decay: float = 0.1
    lr_step_epochs: int = 100  # multiply lr by lr_decay after every 100 epochs
    batch_size: int = 16
    epochs: int = 500
    seed: int = 0
    momentum: float = 0.0  # plain SGD unless explicitly enabled
    band_range: tuple[int, int] | None = None
    data_fraction: float = 1.0
    checkpoint_path: str = "checkpoint.pt"
    curve_path: str | None = None
    stop_at_train_mre: float | None = None
    stop_at_val_loss: float | None = None

    def config_hash(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Piecewise-constant schedule: lr * decay^(epoch // step)."""
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_step_epochs)


@dataclass
class TrainResult:
    epochs_run: int
    train_loss: list[float]
    val_loss: list[float]
    train_mre: list[float]
    val_mre: list[float]
    checkpoint_path: str


class DivergenceError(RuntimeError):
    """Loss went non-finite; the last good checkpoint was kept."""


def save_checkpoint(path: str, model: nn.Module, cfg: TrainConfig,
                    norm: Normalization, epoch: int) -> None:
    payload = {
        "state_dict": model.state_dict(),
        "config": asdict(cfg),
        "config_hash": cfg.config_hash(),
        "normalization": {"lo": norm.lo, "hi": norm.hi},
        "epoch": epoch,
    }
    tmp = f"{path}.tmp.{os.getpid()}"
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path: str, model: nn.Module) -> dict:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    model.load_state_dict(payload["state_dict"])
    return payload


def train(model: nn.Module, train_set, val_set, cfg: TrainConfig,
          norm: Normalization) -> TrainResult:
    torch.manual_seed(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed)
    loader = DataLoader(
        train_set, batch_size=cfg.batch_size, shuffle=True, generator=generator
    )
    optimizer = torch.optim.SGD(
        model.parameters(), lr=cfg.lr, momentum=cfg.momentum
    )
    loss_fn = nn.MSELoss()  # mean over batch and pixels

    curves = {k: [] for k in ("train_loss", "val_loss", "train_mre", "val_mre")}
    epochs_run = 0
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        total, count = 0.0, 0
        for x, y in loader:
            optimizer.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * x.shape[0]
            count += x.shape[0]
        train_loss = total / count
        if not np.isfinite(train_loss):
            raise DivergenceError(
                f"loss became {train_loss} at epoch {epoch}; last good "
                f"checkpoint kept at {cfg.checkpoint_path}"
            )
        val_loss = _mean_loss(model, val_set, cfg.batch_size, loss_fn)
        train_report = evaluate(model, train_set, norm, cfg.batch_size)
        val_report = evaluate(model, val_set, norm, cfg.batch_size)
        curves["train_loss"].append(train_loss)
        curves["val_loss"].append(val_loss)
        curves["train_mre"].append(train_report.aggregate_mre)
        curves["val_mre"].append(val_report.aggregate_mre)
        epochs_run = epoch + 1
        save_checkpoint(cfg.checkpoint_path, model, cfg, norm, epoch)
        if cfg.stop_at_train_mre is not None and (
            train_report.aggregate_mre < cfg.stop_at_train_mre
        ):
            break
        if cfg.stop_at_val_loss is not None and val_loss <= cfg.stop_at_val_loss:
            break

    if cfg.curve_path:
        _write_curves(cfg.curve_path, curves)
    return TrainResult(
        epochs_run, curves["train_loss"], curves["val_loss"],
        curves["train_mre"], curves["val_mre"], cfg.checkpoint_path,
    )


def fine_tune(checkpoint_path: str, model: nn.Module, train_set, val_set,
              cfg: TrainConfig, norm: Normalization) -> TrainResult:
    """Continue from a checkpoint with a fresh schedule (restart at cfg.lr)."""
    load_checkpoint(checkpoint_path, model)
    return train(model, train_set, val_set, cfg, norm)


@torch.no_grad()
def _mean_loss(model, dataset, batch_size, loss_fn) -> float:
    model.eval()
    total, count = 0.0, 0
    for x, y in DataLoader(dataset, batch_size=batch_size):
        total += float(loss_fn(model(x), y)) * x.shape[0]
        count += x.shape[0]
    return total / count


def _write_curves(path: str, curves: dict[str, list[float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        keys = list(curves)
        writer.writerow(["epoch"] + keys)
        for epoch in range(len(curves[keys[0]])):
            writer.writerow([epoch] + [f"{curves[k][epoch]:.8e}" for k in keys])
