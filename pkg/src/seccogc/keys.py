"""Zero-sum Gaussian secret keys.

Keys are ``N = A @ Z`` with ``Z`` an ``m x D`` standard-normal draw.  ``A`` is
the signed incidence matrix of the complete graph on ``K`` nodes, scaled so
that every row has norm ``lam``: each key is marginally ``N(0, lam^2 I_D)``
and the columns of ``A`` sum to zero, so the keys cancel exactly when summed
over all clients.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class DegenerateSchedule(ValueError):
    pass


@dataclass(frozen=True)
class KeySchedule:
    A: np.ndarray  # K x m
    lam: float
    D: int

    @property
    def K(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @property
    def gram(self) -> np.ndarray:
        """``A @ A.T``; per-coordinate key covariance."""
        return self.A @ self.A.T


@dataclass(frozen=True)
class KeyRealization:
    keys: np.ndarray  # K x D
    round: int = 0


def build_key_schedule(K: int, lam: float, D: int) -> KeySchedule:
    if K < 2:
        raise DegenerateSchedule(f"zero-sum keys need K >= 2, got K={K}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if D < 1:
        raise ValueError(f"D must be positive, got {D}")
    scale = lam / math.sqrt(K - 1)
    pairs = [(i, j) for i in range(K) for j in range(i + 1, K)]
    A = np.zeros((K, len(pairs)))
    for col, (i, j) in enumerate(pairs):
        A[i, col] = scale
        A[j, col] = -scale
    return KeySchedule(A=A, lam=float(lam), D=int(D))


def sample_keys(schedule: KeySchedule, rng: np.random.Generator, round: int = 0) -> KeyRealization:
    Z = rng.standard_normal((schedule.m, schedule.D))
    return KeyRealization(keys=schedule.A @ Z, round=round)


def check_schedule(schedule: KeySchedule, tol: float = 1e-12) -> list:
    """List of violated invariants (empty when the schedule is valid)."""
    problems = []
    col_sums = np.abs(schedule.A.sum(axis=0))
    for col in np.flatnonzero(col_sums > tol * max(1.0, schedule.lam)):
        problems.append(("column_sum_nonzero", int(col)))
    norms = np.linalg.norm(schedule.A, axis=1)
    for row in np.flatnonzero(np.abs(norms - schedule.lam) > tol * max(1.0, schedule.lam)):
        problems.append(("row_norm_not_lambda", int(row)))
    return problems


def schedule_to_dict(schedule: KeySchedule) -> dict:
    return {
        "K": schedule.K,
        "lambda": schedule.lam,
        "D": schedule.D,
        "A": schedule.A.tolist(),
    }


def schedule_from_dict(doc: dict) -> KeySchedule:
    A = np.asarray(doc["A"], dtype=float)
    if A.shape[0] != int(doc["K"]):
        raise ValueError(f"A has {A.shape[0]} rows but K={doc['K']}")
    return KeySchedule(A=A, lam=float(doc["lambda"]), D=int(doc["D"]))


def dumps(schedule: KeySchedule) -> str:
    return json.dumps(schedule_to_dict(schedule), indent=1)


def loads(text: str) -> KeySchedule:
    return schedule_from_dict(json.loads(text))
