"""Experiment configuration shared by every CLI subcommand.

One JSON or TOML document with sections ``coding``, ``keys``, ``network``,
``privacy``, ``training`` and ``simulate`` plus top-level ``seed``, ``out``
and ``schemes``.  Missing fields take the defaults below.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Union

import numpy as np
import tomli

from .codes import EXACT, FLOAT
from .netsim import OUTAGE, SUCCESS, NetworkConfig, heterogeneous_config
from .privacy import BERNSTEIN, MC_QUANTILE
from .protocol import SCHEMES


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class CodingSection:
    K: int = 10
    s: int = 7
    arithmetic: str = EXACT


@dataclass
class KeysSection:
    # "lambda" in documents.
    lam: float = 0.05
    D: int = 100


@dataclass
class NetworkSection:
    p_client_relay: Union[float, List[List[float]]] = 0.9
    p_relay_server: Union[float, List[float]] = 0.7
    prob_semantics: str = SUCCESS
    preset: Optional[str] = None  # "heterogeneous" overrides the probabilities
    seed: Optional[int] = None  # defaults to the global seed


@dataclass
class PrivacySection:
    zeta: float = 1.0
    delta0: float = 0.5
    delta1: float = 0.01
    delta2: float = 0.01
    delta3: float = 0.01
    delta6: float = 0.01
    delta7: float = 0.01
    delta_prime: float = 0.05
    radius_method: str = MC_QUANTILE
    mc_draws: int = 1_000_000


@dataclass
class TrainingSection:
    rounds: int = 300
    local_iters: int = 1
    lr: float = 0.02
    accumulation: Optional[List[float]] = None
    batch_size: int = 64
    model: str = "logreg"
    hidden: int = 32
    gamma: float = 0.2
    dataset: str = "synthetic"  # or a CSV path
    test_dataset: Optional[str] = None
    synthetic: bool = True
    n_train: int = 10_000
    n_test: int = 2_000
    n_features: int = 32
    n_classes: int = 10
    separation: float = 0.4
    max_attempts: int = 50
    lambdas: Optional[List[float]] = None  # sweep for the keyed schemes


@dataclass
class SimulateSection:
    rounds: int = 1000
    max_attempts: int = 50


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "out"
    schemes: List[str] = field(default_factory=lambda: list(SCHEMES))
    coding: CodingSection = field(default_factory=CodingSection)
    keys: KeysSection = field(default_factory=KeysSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    privacy: PrivacySection = field(default_factory=PrivacySection)
    training: TrainingSection = field(default_factory=TrainingSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)

    @property
    def K(self) -> int:
        return self.coding.K

    def network_config(self) -> NetworkConfig:
        seed = self.seed if self.network.seed is None else self.network.seed
        if self.network.preset == "heterogeneous":
            return heterogeneous_config(self.K, seed=seed)
        return NetworkConfig.from_probs(self.K, self.network.p_client_relay,
                                        self.network.p_relay_server, seed=seed,
                                        semantics=self.network.prob_semantics)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["keys"]["lambda"] = doc["keys"].pop("lam")
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_SECTIONS = {
    "coding": CodingSection, "keys": KeysSection, "network": NetworkSection,
    "privacy": PrivacySection, "training": TrainingSection, "simulate": SimulateSection,
}
_ALIASES = {("keys", "lambda"): "lam"}


def _section(name: str, cls, raw: Any):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a table, got {type(raw).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        attr = _ALIASES.get((name, key), key)
        if attr not in known:
            raise ConfigError(f"{name}.{key}: unknown field")
        kwargs[attr] = value
    return cls(**kwargs)


def from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a table")
    top = {"seed", "out", "schemes"} | set(_SECTIONS)
    for key in doc:
        if key not in top:
            raise ConfigError(f"{key}: unknown field")
    cfg = ExperimentConfig(
        seed=doc.get("seed", 0),
        out=doc.get("out", "out"),
        schemes=list(doc.get("schemes", SCHEMES)),
        **{name: _section(name, cls, doc.get(name)) for name, cls in _SECTIONS.items()},
    )
    validate(cfg)
    return cfg


def _require(cond: bool, where: str, msg: str):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg: ExperimentConfig) -> None:
    _require(_is_int(cfg.seed) and cfg.seed >= 0, "seed", "must be a nonnegative integer")
    _require(isinstance(cfg.out, str) and cfg.out != "", "out", "must be a nonempty path")
    for s in cfg.schemes:
        _require(s in SCHEMES, "schemes", f"unknown scheme {s!r}; expected {list(SCHEMES)}")

    c = cfg.coding
    _require(_is_int(c.K) and c.K >= 2, "coding.K", "must be an integer >= 2")
    _require(_is_int(c.s) and 0 <= c.s <= c.K - 1, "coding.s", f"must satisfy 0 <= s <= K-1 = {c.K - 1}")
    _require(c.arithmetic in (EXACT, FLOAT), "coding.arithmetic", f"must be {EXACT!r} or {FLOAT!r}")

    k = cfg.keys
    _require(_is_num(k.lam) and k.lam >= 0, "keys.lambda", "must be a nonnegative number")
    _require(_is_int(k.D) and k.D >= 1, "keys.D", "must be a positive integer")

    n = cfg.network
    _require(n.prob_semantics in (SUCCESS, OUTAGE), "network.prob_semantics", "must be 'success' or 'outage'")
    _require(n.preset in (None, "heterogeneous"), "network.preset", "must be null or 'heterogeneous'")
    _require(n.seed is None or (_is_int(n.seed) and n.seed >= 0), "network.seed", "must be a nonnegative integer")
    for name, shape in (("p_client_relay", (c.K, c.K)), ("p_relay_server", (c.K,))):
        value = getattr(n, name)
        if _is_num(value):
            _require(0 <= value <= 1, f"network.{name}", "must lie in [0, 1]")
            continue
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"network.{name}: must be a number or numeric array") from None
        _require(arr.shape == shape, f"network.{name}", f"shape {arr.shape} does not match K={c.K} (want {shape})")
        _require(bool(((arr >= 0) & (arr <= 1)).all()), f"network.{name}", "entries must lie in [0, 1]")

    p = cfg.privacy
    _require(_is_num(p.zeta) and p.zeta >= 0, "privacy.zeta", "must be nonnegative")
    _require(_is_num(p.delta0) and p.delta0 > 0, "privacy.delta0", "must be positive")
    for name in ("delta1", "delta2", "delta3", "delta6", "delta7"):
        v = getattr(p, name)
        _require(_is_num(v) and 0 < v <= 1, f"privacy.{name}", "must lie in (0, 1]")
    _require(_is_num(p.delta_prime) and 0 < p.delta_prime < 1, "privacy.delta_prime", "must lie in (0, 1)")
    _require(p.radius_method in (MC_QUANTILE, BERNSTEIN), "privacy.radius_method",
             f"must be {MC_QUANTILE!r} or {BERNSTEIN!r}")
    _require(_is_int(p.mc_draws) and p.mc_draws >= 1000, "privacy.mc_draws", "must be an integer >= 1000")

    t = cfg.training
    for name in ("rounds", "local_iters", "batch_size", "hidden", "n_train", "n_test",
                 "n_features", "n_classes", "max_attempts"):
        _require(_is_int(getattr(t, name)) and getattr(t, name) >= 1, f"training.{name}", "must be a positive integer")
    _require(_is_num(t.lr) and t.lr >= 0, "training.lr", "must be nonnegative")
    _require(_is_num(t.gamma) and t.gamma > 0, "training.gamma", "must be positive")
    _require(t.model in ("logreg", "mlp"), "training.model", "must be 'logreg' or 'mlp'")
    _require(isinstance(t.synthetic, bool), "training.synthetic", "must be true or false")
    if t.accumulation is not None:
        _require(len(t.accumulation) == t.local_iters, "training.accumulation",
                 f"needs local_iters={t.local_iters} entries")
    if t.lambdas is not None:
        _require(all(_is_num(v) and v >= 0 for v in t.lambdas), "training.lambdas", "must be nonnegative numbers")

    sim = cfg.simulate
    _require(_is_int(sim.rounds) and sim.rounds >= 1, "simulate.rounds", "must be a positive integer")
    _require(_is_int(sim.max_attempts) and sim.max_attempts >= 1, "simulate.max_attempts", "must be a positive integer")


def loads(text: str, fmt: Optional[str] = None) -> ExperimentConfig:
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "toml"
    try:
        doc = json.loads(text) if fmt == "json" else tomli.loads(text)
    except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {fmt.upper()} config: {exc}") from None
    return from_dict(doc)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    fmt = {".json": "json", ".toml": "toml"}.get(path.suffix.lower())
    return loads(text, fmt)
