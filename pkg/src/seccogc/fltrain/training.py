"""Round orchestration: local SGD on every client, then one aggregation scheme."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .. import rng as rngmod
from ..codes import CodingScheme
from ..keys import KeySchedule
from ..netsim import NetworkConfig
from ..protocol import (
    H_SECCOGC, HFL_UNRELIABLE, IDEAL, PRIVATE_HFL, SCHEMES,
    DEFAULT_MAX_ATTEMPTS, EmptyRound, MaxAttemptsExceeded,
    run_round_h_seccogc, run_round_hfl_unreliable, run_round_ideal, run_round_private_hfl,
)
from .data import Dataset, DatasetPartition

LOG_COLUMNS = ("round", "scheme", "lambda", "loss", "acc", "attempts",
               "delivered_frac", "residual_noise_norm")


class NonFiniteLoss(FloatingPointError):
    def __init__(self, round: int, client: int, iteration: int, loss: float):
        super().__init__(f"non-finite loss {loss} at round {round}, client {client}, iteration {iteration}")
        self.round, self.client, self.iteration = round, client, iteration


class TrainingAborted(RuntimeError):
    """A round could not be aggregated; ``log`` holds the rounds completed so far."""

    def __init__(self, cause: Exception, log: "TrainingLog"):
        super().__init__(f"training aborted at round {len(log.rows) + 1}: {cause}")
        self.cause = cause
        self.log = log


@dataclass(frozen=True)
class TrainingConfig:
    rounds: int = 300
    local_iters: int = 1
    lr: float = 0.02
    accumulation: Optional[Sequence[float]] = None
    batch_size: int = 64
    model: str = "logreg"
    hidden: int = 32
    seed: int = 0
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be nonnegative")
        if self.local_iters < 1 or self.rounds < 0 or self.batch_size < 1:
            raise ValueError("rounds, local_iters and batch_size must be positive")
        if self.accumulation is not None and len(self.accumulation) != self.local_iters:
            raise ValueError(f"accumulation has {len(self.accumulation)} entries, "
                             f"expected local_iters={self.local_iters}")

    @property
    def a(self) -> np.ndarray:
        if self.accumulation is None:
            return np.ones(self.local_iters)
        return np.asarray(self.accumulation, dtype=float)


@dataclass
class TrainingLog:
    rows: List[dict] = field(default_factory=list)
    models: List[np.ndarray] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=LOG_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row[k]) for k in LOG_COLUMNS})
        return buf.getvalue()

    @property
    def final_acc(self) -> float:
        return self.rows[-1]["acc"] if self.rows else float("nan")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def evaluate(model, theta: np.ndarray, data: Dataset):
    """Mean cross-entropy and accuracy on ``data``."""
    logits = model.logits(theta, data.X)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(len(data.y)), data.y].mean())
    acc = float(np.mean(logits.argmax(axis=1) == data.y))
    return loss, acc


def local_update(model, theta: np.ndarray, X: np.ndarray, y: np.ndarray, config: TrainingConfig,
                 round: int = 0, client: int = 0) -> np.ndarray:
    """``I`` minibatch SGD steps from ``theta``; returns the parameter change."""
    if not np.all(np.isfinite(theta)):
        raise ValueError("model parameters are not finite")
    current = theta.copy()
    n = len(y)
    for i, a_i in enumerate(config.a):
        gen = rngmod.stream(config.seed, rngmod.BATCHES, round, client, i)
        batch = gen.choice(n, size=min(config.batch_size, n), replace=False)
        loss, grad = model.loss_and_grad(current, X[batch], y[batch])
        if not np.isfinite(loss):
            raise NonFiniteLoss(round, client, i, loss)
        current = current - config.lr * a_i * grad
    return current - theta


def train(config: TrainingConfig, partition: DatasetPartition, test: Dataset, scheme: str,
          model, net: Optional[NetworkConfig] = None, schedule: Optional[KeySchedule] = None,
          coding: Optional[CodingScheme] = None, record_models: bool = False) -> TrainingLog:
    """Run ``config.rounds`` global rounds under ``scheme``.

    Rounds whose benchmark aggregate is empty leave the model unchanged.  A
    coded round that exhausts its attempt budget raises :class:`TrainingAborted`.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    K = partition.K
    if scheme != IDEAL and (net is None or net.K != K):
        raise ValueError(f"scheme {scheme!r} needs a network with K={K}")
    if scheme in (H_SECCOGC, PRIVATE_HFL):
        if schedule is None or schedule.K != K or schedule.D != model.dim:
            raise ValueError(f"scheme {scheme!r} needs a key schedule with K={K}, D={model.dim}")
    if scheme == H_SECCOGC and (coding is None or coding.K != K):
        raise ValueError(f"scheme {scheme!r} needs a coding scheme with K={K}")

    lam = schedule.lam if schedule is not None and scheme in (H_SECCOGC, PRIVATE_HFL) else 0.0
    clients = [partition.client(k) for k in range(K)]
    train_all = Dataset(np.concatenate([c[0] for c in clients]),
                        np.concatenate([c[1] for c in clients]), partition.dataset.n_classes)
    theta = model.init(config.seed)
    log = TrainingLog()

    for t in range(1, config.rounds + 1):
        deltas = np.stack([local_update(model, theta, X, y, config, t, k)
                           for k, (X, y) in enumerate(clients)])
        attempts, frac, noise = 1, 1.0, 0.0
        try:
            if scheme == IDEAL:
                update = run_round_ideal(deltas)
            elif scheme == H_SECCOGC:
                out = run_round_h_seccogc(coding, schedule, net, deltas, t, config.max_attempts)
                update, attempts, noise = out.global_update, out.attempts, out.residual_key_norm
            elif scheme == HFL_UNRELIABLE:
                res = run_round_hfl_unreliable(net, deltas, round=t)
                update, frac = res.update, float(res.mask.mean())
            else:
                res = run_round_private_hfl(net, deltas, schedule, round=t)
                update, frac = res.update, float(res.mask.mean())
                noise = float(np.linalg.norm(res.residual_noise))
        except EmptyRound:
            update, frac = None, 0.0
        except MaxAttemptsExceeded as exc:
            raise TrainingAborted(exc, log) from exc

        if update is not None:
            theta = theta + update
        loss, _ = evaluate(model, theta, train_all)
        _, acc = evaluate(model, theta, test)
        log.rows.append({
            "round": t, "scheme": scheme, "lambda": float(lam), "loss": loss, "acc": acc,
            "attempts": attempts, "delivered_frac": frac, "residual_noise_norm": float(noise),
        })
        if record_models:
            log.models.append(theta.copy())
    return log
