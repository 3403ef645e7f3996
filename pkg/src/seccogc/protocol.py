"""One global aggregation round under each of the four schemes.

``run_round_h_seccogc`` is the coded secure scheme: clients mask their
updates with zero-sum keys, each relay forwards a weighted partial sum only
when it heard from *all* of its assigned clients, and the server decodes with
a combination row whose zeros cover the silent relays.  A decoded aggregate
is always the exact mean of the local updates; otherwise the attempt is
repeated with fresh links and fresh keys.

The three benchmarks (``hfl_unreliable``, ``private_hfl``, ``ideal``) use a
one-relay-per-client topology and average whatever arrives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from . import rng as rngmod
from .codes import CodingScheme, select_combination_row
from .keys import KeySchedule, sample_keys
from .netsim import LinkRealization, NetworkConfig, sample_links

DEFAULT_MAX_ATTEMPTS = 50

H_SECCOGC = "h-seccogc"
HFL_UNRELIABLE = "hfl-unreliable"
PRIVATE_HFL = "private-hfl"
IDEAL = "ideal"
SCHEMES = (IDEAL, H_SECCOGC, HFL_UNRELIABLE, PRIVATE_HFL)


class MaxAttemptsExceeded(RuntimeError):
    def __init__(self, attempts: int, log: list):
        super().__init__(f"no decodable attempt within {attempts} attempts")
        self.attempts = attempts
        self.per_attempt_log = log


class EmptyRound(RuntimeError):
    """No client update reached the server end-to-end."""

    def __init__(self, mask: np.ndarray):
        super().__init__("no client delivered end-to-end")
        self.mask = mask


@dataclass
class ClientUpdate:
    delta: np.ndarray
    masked: np.ndarray


@dataclass
class RelayState:
    relay_id: int
    assigned_clients: List[int]
    received: List[int]
    partial_sum: Optional[np.ndarray] = None

    @property
    def complete(self) -> bool:
        return self.partial_sum is not None


@dataclass
class AttemptRecord:
    links: LinkRealization
    relay_complete: np.ndarray
    relay_delivered: np.ndarray
    chosen_row: Optional[int]


@dataclass
class RoundOutcome:
    attempts: int
    chosen_row: Optional[int]
    global_update: Optional[np.ndarray]
    residual_key_norm: float = 0.0
    per_attempt_log: List[AttemptRecord] = field(default_factory=list)


class AggregateResult(NamedTuple):
    update: np.ndarray
    mask: np.ndarray  # bool, which clients reached the server
    residual_noise: np.ndarray


def mask_updates(deltas: np.ndarray, keys: np.ndarray) -> List[ClientUpdate]:
    return [ClientUpdate(delta=d, masked=d + n) for d, n in zip(deltas, keys)]


def relay_partial_sums(scheme: CodingScheme, updates: Sequence[ClientUpdate],
                       links: LinkRealization) -> List[RelayState]:
    """Each relay's state; partial sums exist only when complete."""
    Y = np.stack([u.masked for u in updates])
    sums = scheme.G @ Y  # G is zero off the assigned clients
    states = []
    for j in range(scheme.K):
        assigned = scheme.support(j)
        received = [k for k in assigned if links.tau_client_relay[j, k]]
        state = RelayState(relay_id=j, assigned_clients=assigned, received=received)
        if len(received) == len(assigned):
            state.partial_sum = sums[j]
        states.append(state)
    return states


def decode(scheme: CodingScheme, row: int, partial_sums: dict) -> np.ndarray:
    """``(1/K) * sum_j c[row, j] * S_j`` over the relays used by ``row``."""
    used = [j for j in range(scheme.K) if scheme.C[row, j] != 0]
    total = sum(scheme.C[row, j] * partial_sums[j] for j in used)
    return total / scheme.K


def run_round_h_seccogc(scheme: CodingScheme, schedule: KeySchedule, net: NetworkConfig,
                        deltas: np.ndarray, round: int,
                        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                        key_seed: Optional[int] = None) -> RoundOutcome:
    deltas = np.asarray(deltas, dtype=float)
    K = scheme.K
    if deltas.shape[0] != K or schedule.K != K or net.K != K:
        raise ValueError("scheme, key schedule, network and deltas disagree on K")
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    key_seed = net.seed if key_seed is None else key_seed

    log: List[AttemptRecord] = []
    for attempt in range(max_attempts):
        keys = sample_keys(schedule, rngmod.stream(key_seed, rngmod.KEYS, round, attempt), round).keys
        links = sample_links(net, round, attempt)
        states = relay_partial_sums(scheme, mask_updates(deltas, keys), links)
        complete = np.array([st.complete for st in states])
        delivered = complete & links.tau_relay_server
        row = select_combination_row(scheme, delivered)
        log.append(AttemptRecord(links, complete, delivered, row))
        if row is None:
            continue
        sums = {st.relay_id: st.partial_sum for st in states if delivered[st.relay_id]}
        update = decode(scheme, row, sums)
        residual = scheme.C[row] @ (scheme.G @ keys) / K
        return RoundOutcome(
            attempts=attempt + 1, chosen_row=row, global_update=update,
            residual_key_norm=float(np.linalg.norm(residual)), per_attempt_log=log,
        )
    raise MaxAttemptsExceeded(max_attempts, log)


def default_clusters(K: int) -> np.ndarray:
    """Client k talks to relay k."""
    return np.arange(K)


def _delivered_mask(net: NetworkConfig, clusters: np.ndarray, round: int) -> np.ndarray:
    clusters = np.asarray(clusters)
    if clusters.shape != (net.K,) or np.any(clusters < 0) or np.any(clusters >= net.K):
        raise ValueError("cluster_assignment must map each client to one relay index")
    links = sample_links(net, round, 0)
    k = np.arange(net.K)
    return links.tau_client_relay[clusters, k] & links.tau_relay_server[clusters]


def run_round_hfl_unreliable(net: NetworkConfig, deltas: np.ndarray,
                             cluster_assignment: Optional[Sequence[int]] = None,
                             round: int = 0) -> AggregateResult:
    """Plain relay HFL: mean over clients that reached the server."""
    deltas = np.asarray(deltas, dtype=float)
    clusters = default_clusters(net.K) if cluster_assignment is None else np.asarray(cluster_assignment)
    mask = _delivered_mask(net, clusters, round)
    if not mask.any():
        raise EmptyRound(mask)
    # Relay-wise sums weighted by delivered counts reduce to the plain mean.
    update = deltas[mask].mean(axis=0)
    return AggregateResult(update, mask, np.zeros(deltas.shape[1]))


def run_round_private_hfl(net: NetworkConfig, deltas: np.ndarray, schedule: KeySchedule,
                          cluster_assignment: Optional[Sequence[int]] = None,
                          round: int = 0, key_seed: Optional[int] = None) -> AggregateResult:
    """Relay HFL with zero-sum keys; residual noise survives partial participation."""
    deltas = np.asarray(deltas, dtype=float)
    clusters = default_clusters(net.K) if cluster_assignment is None else np.asarray(cluster_assignment)
    mask = _delivered_mask(net, clusters, round)
    if not mask.any():
        raise EmptyRound(mask)
    key_seed = net.seed if key_seed is None else key_seed
    keys = sample_keys(schedule, rngmod.stream(key_seed, rngmod.KEYS, round, 0), round).keys
    noise = keys[mask].mean(axis=0)
    update = (deltas[mask] + keys[mask]).mean(axis=0)
    return AggregateResult(update, mask, noise)


def run_round_ideal(deltas: np.ndarray) -> np.ndarray:
    return np.asarray(deltas, dtype=float).mean(axis=0)
