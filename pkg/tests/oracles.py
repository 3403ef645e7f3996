"""Reference computations that share no code with the package under test."""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import mpmath
import numpy as np


# --------------------------------------------------------------------------
# Codes
# --------------------------------------------------------------------------


def exact_product(C: Sequence[Sequence[Fraction]], G: Sequence[Sequence[Fraction]]):
    """Plain triple-loop rational matrix product."""
    rows, inner, cols = len(C), len(G), len(G[0])
    out = [[Fraction(0)] * cols for _ in range(rows)]
    for i in range(rows):
        Ci = C[i]
        for k in range(cols):
            acc = Fraction(0)
            for j in range(inner):
                if Ci[j] and G[j][k]:
                    acc += Ci[j] * G[j][k]
            out[i][k] = acc
    return out


def brute_force_row(C: np.ndarray, relay_up: Sequence[bool]) -> Optional[int]:
    """First row of C that is zero on every down relay and uses no more."""
    for row in range(C.shape[0]):
        if all(C[row, j] == 0 for j in range(C.shape[1]) if not relay_up[j]):
            return row
    return None


def attempt_success_probability(K: int, s: int, q_cr: float, q_rs: float, C: np.ndarray) -> float:
    """P(some row of C is usable) by enumerating every relay up/down vector."""
    q = q_cr ** (s + 1) * q_rs  # relay complete and delivered
    total = 0.0
    for bits in itertools.product((False, True), repeat=K):
        n_up = sum(bits)
        if brute_force_row(C, bits) is not None:
            total += q**n_up * (1 - q) ** (K - n_up)
    return total


# --------------------------------------------------------------------------
# Aggregated-noise variance
# --------------------------------------------------------------------------


def nu_enumeration(g: np.ndarray, q: np.ndarray, A: np.ndarray):
    """Every value of ||(tau*g) A||^2 with its probability, tau_m ~ Ber(q_m)."""
    active = [m for m in range(len(g)) if g[m] != 0 and q[m] > 0]
    values, probs = [], []
    for bits in itertools.product((0, 1), repeat=len(active)):
        lam = np.zeros(len(g))
        p = 1.0
        for m, b in zip(active, bits):
            lam[m] = g[m] * b
            p *= q[m] if b else 1 - q[m]
        v = lam @ A
        values.append(float(v @ v))
        probs.append(p)
    return np.array(values), np.array(probs)


def nu_mean_mp(g, q, A, dps: int = 40):
    """E||(tau*g) A||^2 in high precision by full enumeration."""
    with mpmath.workdps(dps):
        active = [m for m in range(len(g)) if g[m] != 0 and q[m] > 0]
        Am = mpmath.matrix([[mpmath.mpf(float(x)) for x in row] for row in A])
        total = mpmath.mpf(0)
        for bits in itertools.product((0, 1), repeat=len(active)):
            p = mpmath.mpf(1)
            lam = [mpmath.mpf(0)] * len(g)
            for m, b in zip(active, bits):
                qm = mpmath.mpf(float(q[m]))
                p *= qm if b else 1 - qm
                lam[m] = mpmath.mpf(float(g[m])) * b
            for col in range(Am.cols):
                s = mpmath.fsum(lam[i] * Am[i, col] for i in range(len(g)))
                total += p * s * s
        return total


def exact_tail_probability(values: np.ndarray, probs: np.ndarray, mean: float, r: float) -> float:
    """P(|nu - mean| >= r) from an enumerated distribution."""
    return float(probs[np.abs(values - mean) >= r].sum())


# --------------------------------------------------------------------------
# Closed forms at high precision
# --------------------------------------------------------------------------


def mp_gauss_factor(delta):
    return mpmath.sqrt(2 * mpmath.log(mpmath.mpf(1.25) / mpmath.mpf(delta)))


def mp_R(zeta, D, delta0):
    return mpmath.mpf(zeta) * mpmath.sqrt(mpmath.mpf(D) * (1 + mpmath.mpf(delta0)))


def mp_eps1(zeta, lam, D, delta0, delta1):
    return mp_R(zeta, D, delta0) / mpmath.mpf(lam) * mp_gauss_factor(delta1)


def mp_eps2(zeta, lam, D, delta0, delta2, g, nu_bar, r):
    num = (mpmath.mpf(zeta) + mpmath.mpf(lam)) * mpmath.sqrt(mpmath.mpf(D) * (1 + mpmath.mpf(delta0)))
    return mp_gauss_factor(delta2) * abs(mpmath.mpf(g)) * num / mpmath.sqrt(mpmath.mpf(nu_bar) - mpmath.mpf(r))


def mp_eps3(zeta, D, delta0, delta3, g, nu_bar, r):
    return 2 * mp_gauss_factor(delta3) * abs(mpmath.mpf(g)) * mp_R(zeta, D, delta0) / mpmath.sqrt(
        mpmath.mpf(nu_bar) - mpmath.mpf(r))


def mp_eps6(D, delta0, K, delta6):
    return mpmath.sqrt(mpmath.mpf(D) * (1 + mpmath.mpf(delta0)) / (K - 1)) * mp_gauss_factor(delta6)


def mp_eps7(D, delta0, K, delta7):
    return 2 * mpmath.sqrt(mpmath.mpf(D) * (1 + mpmath.mpf(delta0)) / (K - 1)) * mp_gauss_factor(delta7)


def mp_tail(D, delta0):
    d0 = mpmath.mpf(delta0)
    return 1 - mpmath.exp(-(mpmath.mpf(D) / 2) * (d0 - mpmath.log(1 + d0)))


def agrees(value: float, reference, digits: int = 10) -> bool:
    ref = float(reference)
    if ref == 0:
        return value == 0
    return abs(value - ref) <= 10.0 ** (-digits) * abs(ref)


# --------------------------------------------------------------------------
# Statistics
# --------------------------------------------------------------------------


def gaussian_dp_delta(sensitivity: float, sigma: float, eps: float) -> float:
    """Tight delta(eps) of the Gaussian mechanism (privacy-profile formula)."""
    a = sensitivity / sigma
    with mpmath.workdps(30):
        ncdf = lambda x: mpmath.ncdf(x)
        val = ncdf(a / 2 - eps / a) - mpmath.e**eps * ncdf(-a / 2 - eps / a)
        return float(val)


def dp_audit(x: np.ndarray, y: np.ndarray, eps: float, delta: float,
             edges: np.ndarray, z: float = 4.0) -> Tuple[float, str]:
    """Largest slack-adjusted violation of P(X in S) <= e^eps P(Y in S) + delta.

    S ranges over half-lines and intervals with endpoints in ``edges``, in
    both directions.  The violation subtracts ``z`` binomial standard errors
    so sampling noise alone does not refute.  Returns (worst, description);
    worst <= 0 means the audit does not refute.
    """
    xs, ys = np.sort(x), np.sort(y)
    nx, ny = len(x), len(y)
    cx = np.searchsorted(xs, edges, side="right") / nx
    cy = np.searchsorted(ys, edges, side="right") / ny
    # Intervals (e_a, e_b] plus the two open-ended half-lines.
    cx = np.concatenate([[0.0], cx, [1.0]])
    cy = np.concatenate([[0.0], cy, [1.0]])
    px = cx[None, :] - cx[:, None]
    py = cy[None, :] - cy[:, None]
    mask = np.triu(np.ones_like(px, dtype=bool), 1)
    e = np.exp(min(eps, 700))
    worst, where = -np.inf, ""
    for a, b, label in ((px, py, "x>y"), (py, px, "y>x")):
        se = z * (np.sqrt(np.clip(a * (1 - a), 0, None) / nx)
                  + e * np.sqrt(np.clip(b * (1 - b), 0, None) / ny))
        v = np.where(mask, a - e * b - delta - se, -np.inf)
        idx = np.unravel_index(np.argmax(v), v.shape)
        if v[idx] > worst:
            worst, where = float(v[idx]), f"{label} interval index {idx}"
    return worst, where


def histogram_mi(x: np.ndarray, y: np.ndarray, erased: np.ndarray, bins: int = 60,
                 lim: float = 5.0) -> float:
    """Plug-in mutual information (nats) with an extra symbol for erasures."""
    sx = np.std(x)
    sy = np.std(y[~erased]) if (~erased).any() else 1.0
    ex = np.linspace(-lim * sx, lim * sx, bins + 1)
    ey = np.linspace(-lim * sy, lim * sy, bins + 1)
    bx = np.clip(np.digitize(x, ex) - 1, 0, bins - 1)
    by = np.clip(np.digitize(y, ey) - 1, 0, bins - 1)
    by = np.where(erased, bins, by)
    joint = np.zeros((bins, bins + 1))
    np.add.at(joint, (bx, by), 1.0)
    joint /= joint.sum()
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (px @ py)[nz])))


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------


def logreg_loss(theta: np.ndarray, X: np.ndarray, y: np.ndarray, n_classes: int) -> float:
    """Per-sample loop cross-entropy."""
    F = X.shape[1]
    W = theta[: F * n_classes].reshape(F, n_classes)
    b = theta[F * n_classes:]
    total = 0.0
    for xi, yi in zip(X, y):
        z = xi @ W + b
        m = z.max()
        total += m + np.log(np.sum(np.exp(z - m))) - z[yi]
    return total / len(y)


def central_difference(f, theta: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        grad[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return grad


def unrolled_sgd(grad_fn, theta: np.ndarray, batches: List[np.ndarray], lr: float,
                 a: Sequence[float]) -> np.ndarray:
    """Step-by-step SGD reference; returns the parameter change."""
    cur = theta.copy()
    for idx, a_i in zip(batches, a):
        cur = cur - lr * a_i * grad_fn(cur, idx)
    return cur - theta
