"""Two-hop erasure network: client -> relay -> server.

Every link is independently either up or down in a given attempt.  The
configuration stores *outage* probabilities, so a link is up with
probability ``1 - p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng as rngmod

SUCCESS = "success"
OUTAGE = "outage"

# Heterogeneous-network defaults (success probabilities); cycled over links.
HETERO_CLIENT_RELAY = (0.95, 0.9, 0.8, 0.7, 0.6)
HETERO_RELAY_SERVER = (0.9, 0.8, 0.7, 0.6, 0.5)


@dataclass(frozen=True)
class NetworkConfig:
    K: int
    p_client_relay: np.ndarray  # K x K outage, [j, k] = client k -> relay j
    p_relay_server: np.ndarray  # K outage
    seed: int = 0

    def __post_init__(self):
        pcr = np.asarray(self.p_client_relay, dtype=float)
        prs = np.asarray(self.p_relay_server, dtype=float)
        if pcr.shape != (self.K, self.K):
            raise ValueError(f"p_client_relay must be {self.K}x{self.K}, got {pcr.shape}")
        if prs.shape != (self.K,):
            raise ValueError(f"p_relay_server must have length {self.K}, got {prs.shape}")
        for name, arr in (("p_client_relay", pcr), ("p_relay_server", prs)):
            if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        object.__setattr__(self, "p_client_relay", pcr)
        object.__setattr__(self, "p_relay_server", prs)

    @property
    def success_client_relay(self) -> np.ndarray:
        return 1.0 - self.p_client_relay

    @property
    def success_relay_server(self) -> np.ndarray:
        return 1.0 - self.p_relay_server

    @classmethod
    def from_probs(cls, K, client_relay, relay_server, seed=0, semantics=SUCCESS) -> "NetworkConfig":
        """Build from scalars or arrays under the stated probability semantics."""
        if semantics not in (SUCCESS, OUTAGE):
            raise ValueError(f"prob_semantics must be 'success' or 'outage', got {semantics!r}")
        cr = np.broadcast_to(np.asarray(client_relay, dtype=float), (K, K)).copy()
        rs = np.broadcast_to(np.asarray(relay_server, dtype=float), (K,)).copy()
        if semantics == SUCCESS:
            cr, rs = 1.0 - cr, 1.0 - rs
        return cls(K=K, p_client_relay=cr, p_relay_server=rs, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "p_client_relay": self.p_client_relay.tolist(),
            "p_relay_server": self.p_relay_server.tolist(),
            "seed": self.seed,
            "prob_semantics": OUTAGE,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkConfig":
        return cls.from_probs(
            int(doc["K"]), doc["p_client_relay"], doc["p_relay_server"],
            seed=int(doc.get("seed", 0)), semantics=doc.get("prob_semantics", SUCCESS),
        )


@dataclass(frozen=True)
class LinkRealization:
    tau_client_relay: np.ndarray  # K x K bool, [j, k]
    tau_relay_server: np.ndarray  # K bool
    attempt: int = 0


def symmetric_config(K: int, p_cr: float, p_rs: float, seed: int = 0,
                     semantics: str = SUCCESS) -> NetworkConfig:
    for p in (p_cr, p_rs):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probabilities must lie in [0, 1], got {p}")
    return NetworkConfig.from_probs(K, p_cr, p_rs, seed=seed, semantics=semantics)


def heterogeneous_config(K: int, seed: int = 0,
                         client_relay: Sequence[float] = HETERO_CLIENT_RELAY,
                         relay_server: Sequence[float] = HETERO_RELAY_SERVER) -> NetworkConfig:
    """Per-link success probabilities cycled from fixed lists.

    Link (j, k) gets ``client_relay[(j + k) % len]`` and relay j gets
    ``relay_server[j % len]``.
    """
    cr = np.array([[client_relay[(j + k) % len(client_relay)] for k in range(K)] for j in range(K)])
    rs = np.array([relay_server[j % len(relay_server)] for j in range(K)])
    return NetworkConfig.from_probs(K, cr, rs, seed=seed, semantics=SUCCESS)


def sample_links(config: NetworkConfig, round: int, attempt: int = 0) -> LinkRealization:
    """Link states for one attempt; a pure function of its arguments.

    Link ids are the row-major client->relay positions followed by the relay
    uplinks, all drawn from the stream keyed by (seed, round, attempt).
    """
    K = config.K
    u = rngmod.stream(config.seed, rngmod.LINKS, round, attempt).random(K * K + K)
    tau_cr = u[: K * K].reshape(K, K) < config.success_client_relay
    tau_rs = u[K * K:] < config.success_relay_server
    return LinkRealization(tau_client_relay=tau_cr, tau_relay_server=tau_rs, attempt=attempt)


def sample_link_batch(config: NetworkConfig, n: int, gen: np.random.Generator):
    """``n`` independent realizations at once, for Monte-Carlo studies."""
    K = config.K
    tau_cr = gen.random((n, K, K)) < config.success_client_relay
    tau_rs = gen.random((n, K)) < config.success_relay_server
    return tau_cr, tau_rs
