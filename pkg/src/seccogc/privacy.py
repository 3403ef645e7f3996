"""Privacy accounting for coded secure aggregation over erasure links.

All logarithms are natural; leakage is reported in nats.  Epsilon values that
are unbounded (no noise, or a variance radius that swallows the mean) are
reported as ``math.inf``.

Aggregated-noise variance
-------------------------
At relay ``j`` the key mass in the partial sum is ``sum_m tau_m g_m N_m``,
whose per-coordinate variance is ``nu = ||Lambda A||^2`` with
``Lambda_m = tau_m g_m``.  ``nu`` is random through the link indicators
``tau_m ~ Ber(q_m)``.  Writing ``P = A A^T``::

    E[nu] = sum_m q_m g_m^2 P_mm + sum_{m != n} q_m q_n g_m g_n P_mn

The radius ``r`` bounds ``P(|nu - E[nu]| >= r) <= delta'``; it comes either
from a Monte-Carlo quantile or from a Bernstein inequality for the Doob
martingale of ``nu`` over the independent ``tau_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import rng as rngmod
from .codes import CodingScheme
from .keys import KeySchedule
from .netsim import NetworkConfig

MC_QUANTILE = "mc-quantile"
BERNSTEIN = "bernstein-analytic"
DEFAULT_MC_DRAWS = 10**6
MC_INFLATION = 1.05
_CHUNK = 250_000


class RadiusExceedsMean(ValueError):
    """The variance radius is at least the mean, so sqrt(nu_bar - r) is undefined."""

    def __init__(self, stats: "VarianceStats", context: str = ""):
        msg = f"radius {stats.r:.6g} >= mean {stats.nu_bar:.6g}"
        super().__init__(f"{msg} ({context})" if context else msg)
        self.stats = stats


@dataclass(frozen=True)
class PrivacyParams:
    zeta: float
    lam: float
    D: int
    delta0: float = 0.5
    delta1: float = 0.01
    delta2: float = 0.01
    delta3: float = 0.01
    delta6: float = 0.01
    delta7: float = 0.01

    def __post_init__(self):
        if self.zeta < 0 or self.lam < 0:
            raise ValueError("zeta and lambda must be nonnegative")
        if self.D < 1:
            raise ValueError("D must be positive")
        if self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        for name in ("delta1", "delta2", "delta3", "delta6", "delta7"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @property
    def R(self) -> float:
        """High-probability norm bound on a local update."""
        return self.zeta * math.sqrt(self.D * (1 + self.delta0))

    @property
    def tail(self) -> float:
        return chi_square_tail_bound(self.D, self.delta0)


@dataclass(frozen=True)
class LdpEntry:
    layer: str
    label: str
    j: Optional[int]
    k: Optional[int]
    epsilon: float
    delta: float
    prob_guarantee: float


@dataclass
class LdpReport:
    entries: List[LdpEntry]
    leakage_nats: float
    errors: List[str] = field(default_factory=list)

    def layer(self, name: str) -> List[LdpEntry]:
        return [e for e in self.entries if e.layer == name]

    def worst(self, name: str) -> Optional[LdpEntry]:
        rows = self.layer(name)
        return max(rows, key=lambda e: e.epsilon) if rows else None


@dataclass(frozen=True)
class VarianceStats:
    nu_bar: float
    r: float
    delta_prime: float
    method: str = MC_QUANTILE


@dataclass(frozen=True)
class NoiseVarianceMean:
    exact: float
    printed: float

    @property
    def discrepancy(self) -> float:
        return self.printed - self.exact


# --------------------------------------------------------------------------
# Closed forms
# --------------------------------------------------------------------------


def chi_square_tail_bound(D: int, delta0: float) -> float:
    """Lower bound on P(||x|| <= zeta*sqrt(D(1+delta0))) for x ~ N(0, zeta^2 I_D)."""
    if delta0 <= 0:
        raise ValueError(f"delta0 must be positive, got {delta0}")
    return -math.expm1(-(D / 2.0) * (delta0 - math.log1p(delta0)))


def worst_case_leakage(p_outage: float, D: int, zeta: float, lam: float) -> float:
    """(1 - p) (D/2) ln(1 + zeta^2/lam^2) nats; inf when an unmasked update gets through."""
    if not 0 <= p_outage <= 1:
        raise ValueError(f"p_outage must lie in [0, 1], got {p_outage}")
    if p_outage == 1 or zeta == 0:
        return 0.0
    if lam == 0:
        return math.inf
    return (1 - p_outage) * (D / 2.0) * math.log1p(zeta**2 / lam**2)


def _gauss_factor(delta: float) -> float:
    return math.sqrt(2.0 * math.log(1.25 / delta))


def client_ldp(params: PrivacyParams, p_outage: float, j: Optional[int] = None,
               k: Optional[int] = None) -> LdpEntry:
    """Masked update observed by a relay over a link with outage ``p_outage``."""
    if p_outage >= 1:
        # The link never delivers; nothing is observed.
        eps, delta = 0.0, 0.0
    else:
        eps = math.inf if params.lam == 0 else params.R / params.lam * _gauss_factor(params.delta1)
        delta = (1 - p_outage) * params.delta1
    return LdpEntry("client", "eps1", j, k, eps, delta, params.tail)


def server_ldp(params: PrivacyParams, K: int) -> Tuple[LdpEntry, LdpEntry]:
    """Participation (eps6) and value-perturbation (eps7) guarantees of the exact mean."""
    if K < 1:
        raise ValueError("K must be positive")
    prob = params.tail**2
    if K == 1:
        return (LdpEntry("server", "eps6", None, None, math.inf, params.delta6, prob),
                LdpEntry("server", "eps7", None, None, math.inf, params.delta7, prob))
    base = math.sqrt(params.D * (1 + params.delta0) / (K - 1))
    eps6 = base * _gauss_factor(params.delta6)
    eps7 = 2 * base * _gauss_factor(params.delta7)
    return (LdpEntry("server", "eps6", None, None, eps6, params.delta6, prob),
            LdpEntry("server", "eps7", None, None, eps7, params.delta7, prob))


# --------------------------------------------------------------------------
# Aggregated-noise variance statistics
# --------------------------------------------------------------------------


def _row_terms(scheme: CodingScheme, schedule: KeySchedule, net: NetworkConfig,
               j: int, exclude: Optional[int]):
    if not scheme.K == schedule.K == net.K:
        raise ValueError("scheme, key schedule and network disagree on K")
    g = scheme.G[j].copy()
    q = net.success_client_relay[j].copy()
    q[g == 0] = 0.0
    if exclude is not None:
        q[exclude] = 0.0
    return g, q, schedule.gram


def aggregated_noise_variance_mean(scheme: CodingScheme, schedule: KeySchedule,
                                   net: NetworkConfig, j: int,
                                   exclude: Optional[int] = None) -> NoiseVarianceMean:
    g, q, P = _row_terms(scheme, schedule, net, j, exclude)
    lam_e = q * g
    cross = lam_e @ P @ lam_e
    exact = cross + float(np.sum(q * (1 - q) * g**2 * np.diag(P)))
    # Printed form: lam^2 sum over *all* assigned m of (1-p) g^2, plus the cross term.
    q_all = net.success_client_relay[j] * (scheme.G[j] != 0)
    printed = schedule.lam**2 * float(np.sum(q_all * g**2)) + cross
    return NoiseVarianceMean(exact=float(exact), printed=float(printed))


def sample_nu(g: np.ndarray, q: np.ndarray, P: np.ndarray, n: int,
              gen: np.random.Generator) -> np.ndarray:
    """``n`` draws of ``||(tau*g) A||^2`` with ``tau_m ~ Ber(q_m)``."""
    idx = np.flatnonzero((q > 0) & (g != 0))
    if idx.size == 0:
        return np.zeros(n)
    gs, qs, Ps = g[idx], q[idx], P[np.ix_(idx, idx)]
    out = np.empty(n)
    for lo in range(0, n, _CHUNK):
        hi = min(n, lo + _CHUNK)
        lam = (gen.random((hi - lo, idx.size)) < qs) * gs
        out[lo:hi] = np.einsum("na,na->n", lam @ Ps, lam)
    return out


def _radius_mc(g, q, P, nu_bar, delta_prime, n_draws, gen) -> float:
    dev = np.abs(sample_nu(g, q, P, n_draws, gen) - nu_bar)
    # Rounding noise between the sampled and closed-form values is not spread.
    dev[dev <= 1e-12 * max(abs(nu_bar), 1e-300)] = 0.0
    qtl = float(np.quantile(dev, 1 - delta_prime, method="inverted_cdf"))
    if qtl > 0:
        return MC_INFLATION * qtl
    positive = dev[dev > 0]
    # Quantile sits on the atom at nu_bar: any r in (0, smallest deviation] works.
    return float(positive.min()) if positive.size else 0.0


def _radius_bernstein(g, q, P, delta_prime) -> float:
    """Bernstein bound for the Doob martingale of ``nu`` over the tau's.

    ``nu = sum_m a_m tau_m + sum_{m != n} b_mn tau_m tau_n`` with
    ``a_m = g_m^2 P_mm`` and ``b_mn = g_m g_n P_mn``.  Revealing ``tau_m`` in
    order gives increments ``(tau_m - q_m) h_m`` where ``h_m`` is affine in the
    already-revealed ``tau_{<m}``.  With ``H_m = max |h_m|`` over binary
    histories, the increments are bounded by ``b = max_m max(q_m, 1-q_m) H_m``
    and their conditional variances sum to at most ``V = sum_m q_m(1-q_m) H_m^2``.
    Then ``P(|nu - E nu| >= r) <= 2 exp(-r^2 / (2 (V + b r / 3)))``.
    """
    a = g**2 * np.diag(P)
    B = np.outer(g, g) * P
    np.fill_diagonal(B, 0.0)
    V, b = 0.0, 0.0
    K = len(g)
    for m in range(K):
        if q[m] in (0.0, 1.0):
            continue
        base = a[m] + 2.0 * float(B[m, m + 1:] @ q[m + 1:])
        coeffs = 2.0 * B[m, :m]
        coeffs = coeffs[(q[:m] > 0)]  # past tau's stuck at 0 contribute nothing
        hi = base + float(np.clip(coeffs, 0, None).sum())
        lo = base + float(np.clip(coeffs, None, 0).sum())
        H = max(abs(hi), abs(lo))
        V += q[m] * (1 - q[m]) * H**2
        b = max(b, max(q[m], 1 - q[m]) * H)
    if V == 0 and b == 0:
        return 0.0
    L = math.log(2.0 / delta_prime)
    return L * b / 3.0 + math.sqrt((L * b / 3.0) ** 2 + 2.0 * L * V)


def bernstein_radius(scheme: CodingScheme, schedule: KeySchedule, net: NetworkConfig,
                     j: int, exclude: Optional[int], delta_prime: float,
                     method: str = MC_QUANTILE, n_draws: int = DEFAULT_MC_DRAWS,
                     seed: int = 0, strict: bool = True) -> VarianceStats:
    """Radius ``r`` with ``P(|nu - nu_bar| >= r) <= delta_prime``.

    With ``strict`` a radius that reaches the mean raises
    :class:`RadiusExceedsMean` (carrying the stats); otherwise it is returned.
    """
    if not 0 < delta_prime < 1:
        raise ValueError(f"delta_prime must lie in (0, 1), got {delta_prime}")
    g, q, P = _row_terms(scheme, schedule, net, j, exclude)
    nu_bar = aggregated_noise_variance_mean(scheme, schedule, net, j, exclude).exact
    if method == MC_QUANTILE:
        gen = rngmod.stream(seed, rngmod.RADIUS, j, 0 if exclude is None else exclude + 1)
        r = _radius_mc(g, q, P, nu_bar, delta_prime, n_draws, gen)
    elif method == BERNSTEIN:
        r = _radius_bernstein(g, q, P, delta_prime)
    else:
        raise ValueError(f"unknown radius method {method!r}")
    stats = VarianceStats(nu_bar=nu_bar, r=r, delta_prime=delta_prime, method=method)
    if strict and r >= nu_bar:
        raise RadiusExceedsMean(stats, f"relay {j}, excluding {exclude}")
    return stats


# --------------------------------------------------------------------------
# Relay level
# --------------------------------------------------------------------------


def _relay_entry(layer, label, params, scheme, schedule, net, j, k, delta_prime,
                 delta_target, numerator, exclude, method, n_draws, seed) -> LdpEntry:
    if scheme.G[j, k] == 0:
        raise ValueError(f"client {k} is not assigned to relay {j}")
    if params.lam != schedule.lam:
        raise ValueError(f"privacy lambda {params.lam} != key schedule lambda {schedule.lam}")
    p = float(net.p_client_relay[j, k])
    prob = params.tail**2
    if p >= 1:
        return LdpEntry(layer, label, j, k, 0.0, 0.0, prob)
    delta = (1 - p) * (delta_prime + delta_target)
    if p == 0:
        # Reliable-link branch of the case split.
        return LdpEntry(layer, label, j, k, 0.0, delta, prob)
    if params.lam == 0:
        # No masking noise: nothing hides the update.
        return LdpEntry(layer, label, j, k, math.inf, delta, prob)
    stats = bernstein_radius(scheme, schedule, net, j, exclude, delta_prime,
                             method=method, n_draws=n_draws, seed=seed, strict=False)
    if stats.r >= stats.nu_bar:
        raise RadiusExceedsMean(stats, f"{label} at relay {j}, client {k}")
    eps = float(_gauss_factor(delta_target) * abs(scheme.G[j, k]) * numerator / math.sqrt(stats.nu_bar - stats.r))
    return LdpEntry(layer, label, j, k, eps, delta, prob)


def relay_identity_ldp(params: PrivacyParams, scheme: CodingScheme, schedule: KeySchedule,
                       net: NetworkConfig, j: int, k: int, delta_prime: float,
                       method: str = MC_QUANTILE, n_draws: int = DEFAULT_MC_DRAWS,
                       seed: int = 0) -> LdpEntry:
    """Whether client ``k`` took part in relay ``j``'s partial sum."""
    numerator = (params.zeta + params.lam) * math.sqrt(params.D * (1 + params.delta0))
    return _relay_entry("relay-identity", "eps2", params, scheme, schedule, net, j, k,
                        delta_prime, params.delta2, numerator, k, method, n_draws, seed)


def relay_value_ldp(params: PrivacyParams, scheme: CodingScheme, schedule: KeySchedule,
                    net: NetworkConfig, j: int, k: int, delta_prime: float,
                    method: str = MC_QUANTILE, n_draws: int = DEFAULT_MC_DRAWS,
                    seed: int = 0) -> LdpEntry:
    """Perturbation of client ``k``'s update as seen in relay ``j``'s partial sum."""
    return _relay_entry("relay-value", "eps3", params, scheme, schedule, net, j, k,
                        delta_prime, params.delta3, 2.0 * params.R, None, method, n_draws, seed)


def full_report(params: PrivacyParams, scheme: CodingScheme, schedule: KeySchedule,
                net: NetworkConfig, delta_prime: float = 0.05, method: str = MC_QUANTILE,
                n_draws: int = DEFAULT_MC_DRAWS, seed: int = 0) -> LdpReport:
    entries: List[LdpEntry] = []
    errors: List[str] = []
    leakage = 0.0
    links = [(j, k) for j in range(scheme.K) for k in scheme.support(j)]

    for j, k in links:
        p = float(net.p_client_relay[j, k])
        entries.append(client_ldp(params, p, j, k))
        leakage = max(leakage, worst_case_leakage(p, params.D, params.zeta, params.lam))

    for fn in (relay_identity_ldp, relay_value_ldp):
        for j, k in links:
            try:
                entries.append(fn(params, scheme, schedule, net, j, k, delta_prime,
                                  method=method, n_draws=n_draws, seed=seed))
            except RadiusExceedsMean as exc:
                layer, label = (("relay-identity", "eps2") if fn is relay_identity_ldp
                                else ("relay-value", "eps3"))
                p = float(net.p_client_relay[j, k])
                delta = (1 - p) * (delta_prime + (params.delta2 if label == "eps2" else params.delta3))
                entries.append(LdpEntry(layer, label, j, k, math.inf, delta, params.tail**2))
                errors.append(f"{label} relay={j} client={k}: {exc}")

    entries.extend(server_ldp(params, scheme.K))
    return LdpReport(entries=entries, leakage_nats=leakage, errors=errors)
