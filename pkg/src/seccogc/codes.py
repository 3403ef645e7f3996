"""Cyclic gradient codes: coefficient matrix G and combination matrix C.

Row ``j`` of ``G`` holds relay ``j``'s weights over its clients; its support is
the cyclic window ``{j, j+1, ..., j+s} mod K``.  Every row of ``C`` decodes
from one set of ``K - s`` surviving relays and satisfies ``c @ G = 1``.

Construction
------------
Pick distinct nodes ``a_0 .. a_{K-1}`` and view length-``K`` vectors as
evaluations of polynomials of degree ``< K - s`` at those nodes.  That space
contains the all-ones vector (the constant polynomial).  Row ``j`` of ``G``
is the evaluation of ``prod_{m outside window j} (x - a_m)``, which has degree
``K - s - 1`` and vanishes exactly outside the window.  Any ``K - s`` rows
generically span the whole space, so the all-ones vector can be recombined
from any ``K - s`` relays.  Each candidate node set is verified exactly; if a
straggler pattern is infeasible or yields a combination row with spurious
zeros, the nodes are deterministically perturbed and the build retried.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

EXACT = "exact-rational"
FLOAT = "float"
FLOAT_TOL = 1e-9
MAX_RETRIES = 8

Pattern = Tuple[int, ...]


class InfeasibleCode(RuntimeError):
    """No valid code found for ``(K, s)`` within the retry budget."""


@dataclass(frozen=True)
class CodingScheme:
    K: int
    s: int
    G: np.ndarray
    C: np.ndarray
    straggler_index: Dict[Pattern, int]
    arithmetic: str = EXACT
    # Exact rational copies; None in float mode.
    G_exact: Optional[List[List[Fraction]]] = field(default=None, repr=False, compare=False)
    C_exact: Optional[List[List[Fraction]]] = field(default=None, repr=False, compare=False)

    @property
    def f(self) -> int:
        return self.C.shape[0]

    def support(self, j: int) -> List[int]:
        """Clients assigned to relay ``j`` (the set W_j)."""
        return [(j + i) % self.K for i in range(self.s + 1)]

    def relays_of(self, k: int) -> List[int]:
        """Relays that client ``k`` uploads to (the set R_k)."""
        return sorted((k - i) % self.K for i in range(self.s + 1))

    def patterns(self) -> List[Pattern]:
        out: List[Pattern] = [()] * self.f
        for pat, row in self.straggler_index.items():
            out[row] = pat
        return out


def _nodes(K: int, attempt: int) -> List[Fraction]:
    denom = K * K + 1 + attempt
    return [Fraction(k) + Fraction(k * k * (attempt + 1), denom) for k in range(K)]


def _coefficient_matrix(K: int, s: int, nodes: Sequence) -> list:
    zero = nodes[0] * 0
    G = [[zero] * K for _ in range(K)]
    for j in range(K):
        window = [(j + i) % K for i in range(s + 1)]
        outside = [m for m in range(K) if m not in window]
        for k in window:
            v = nodes[0] * 0 + 1
            for m in outside:
                v *= nodes[k] - nodes[m]
            G[j][k] = v
        lead = G[j][j]
        G[j] = [v / lead for v in G[j]]
    return G


def _solve_left(rows: List[List[Fraction]], target: List[Fraction]) -> Optional[List[Fraction]]:
    """Exact solve of ``x @ rows = target``; None when inconsistent."""
    n, K = len(rows), len(target)
    # Augmented system rows^T x = target: K equations, n unknowns.
    aug = [[rows[i][c] for i in range(n)] + [target[c]] for c in range(K)]
    pivots = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, K) if aug[i][col] != 0), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        p = aug[r][col]
        aug[r] = [v / p for v in aug[r]]
        for i in range(K):
            if i != r and aug[i][col] != 0:
                fct = aug[i][col]
                aug[i] = [a - fct * b for a, b in zip(aug[i], aug[r])]
        pivots.append(col)
        r += 1
        if r == K:
            break
    if any(aug[i][n] != 0 for i in range(r, K)):
        return None
    x = [Fraction(0)] * n
    for i, col in enumerate(pivots):
        x[col] = aug[i][n]
    return x


def _try_exact(K: int, s: int, attempt: int):
    G = _coefficient_matrix(K, s, _nodes(K, attempt))
    ones = [Fraction(1)] * K
    C, index = [], {}
    for row, pattern in enumerate(itertools.combinations(range(K), s)):
        up = [j for j in range(K) if j not in pattern]
        x = _solve_left([G[j] for j in up], ones)
        if x is None or any(v == 0 for v in x):
            return None
        c = [Fraction(0)] * K
        for j, v in zip(up, x):
            c[j] = v
        C.append(c)
        index[pattern] = row
    return G, C, index


def _try_float(K: int, s: int, attempt: int):
    nodes = np.array([float(a) for a in _nodes(K, attempt)])
    G = np.array(_coefficient_matrix(K, s, list(nodes)), dtype=float)
    C = np.zeros((comb(K, s), K))
    index = {}
    ones = np.ones(K)
    for row, pattern in enumerate(itertools.combinations(range(K), s)):
        up = [j for j in range(K) if j not in pattern]
        x, *_ = np.linalg.lstsq(G[up].T, ones, rcond=None)
        if np.abs(x @ G[up] - 1.0).max() > FLOAT_TOL or np.any(np.abs(x) < 1e-12):
            return None
        C[row, up] = x
        index[pattern] = row
    return G, C, index


def build_coding_scheme(K: int, s: int, arithmetic: str = EXACT) -> CodingScheme:
    """Build a (K, s)-cyclic gradient code.

    The result is fully determined by ``(K, s, arithmetic)``.  Exact mode keeps
    rational copies of both matrices so ``C @ G == 1`` can be checked without
    rounding.
    """
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    if not 0 <= s <= K - 1:
        raise ValueError(f"s must satisfy 0 <= s <= K-1, got s={s}, K={K}")
    if arithmetic not in (EXACT, FLOAT):
        raise ValueError(f"unknown arithmetic mode {arithmetic!r}")

    builder = _try_exact if arithmetic == EXACT else _try_float
    for attempt in range(MAX_RETRIES):
        built = builder(K, s, attempt)
        if built is None:
            continue
        G, C, index = built
        if arithmetic == EXACT:
            return CodingScheme(
                K, s,
                G=np.array([[float(v) for v in r] for r in G]),
                C=np.array([[float(v) for v in r] for r in C]),
                straggler_index=index, arithmetic=EXACT,
                G_exact=G, C_exact=C,
            )
        return CodingScheme(K, s, G=G, C=C, straggler_index=index, arithmetic=FLOAT)
    raise InfeasibleCode(f"no valid ({K},{s}) code after {MAX_RETRIES} node choices")


def select_combination_row(scheme: CodingScheme, relay_up: Sequence[bool]) -> Optional[int]:
    """Smallest row index whose zeros cover every down relay, or None."""
    down = [j for j, up in enumerate(relay_up) if not up]
    if len(down) > scheme.s:
        return None
    # The lexicographically first s-subset containing `down` pads it with the
    # smallest remaining indices; combinations() emits rows in that order.
    need = scheme.s - len(down)
    pad = [j for j in range(scheme.K) if relay_up[j]][:need]
    return scheme.straggler_index.get(tuple(sorted(down + pad)))


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


@dataclass
class ValidationReport:
    failures: List[Tuple[str, tuple]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def add(self, invariant: str, *where) -> None:
        self.failures.append((invariant, where))

    def __str__(self) -> str:
        if self.ok:
            return "all invariants hold"
        return "\n".join(f"{name}: {where}" for name, where in self.failures)


def verify_scheme(scheme: CodingScheme) -> ValidationReport:
    report = ValidationReport()
    K, s = scheme.K, scheme.s
    exact = scheme.G_exact is not None and scheme.C_exact is not None
    G = scheme.G_exact if exact else scheme.G
    C = scheme.C_exact if exact else scheme.C

    if scheme.C.shape[0] != comb(K, s):
        report.add("row_count", scheme.C.shape[0], comb(K, s))

    for j in range(K):
        want = set(scheme.support(j))
        have = {k for k in range(K) if G[j][k] != 0}
        if have != want:
            report.add("cyclic_support", j, tuple(sorted(have ^ want)))

    seen = set()
    for row in range(len(C)):
        zeros = tuple(j for j in range(K) if C[row][j] == 0)
        if len(zeros) != s:
            report.add("row_zero_count", row, len(zeros))
        seen.add(zeros)
        if scheme.straggler_index.get(zeros) != row:
            report.add("straggler_index", row, zeros)
    missing = set(itertools.combinations(range(K), s)) - seen
    for pattern in sorted(missing):
        report.add("pattern_missing", pattern)

    for row in range(len(C)):
        for k in range(K):
            val = sum(C[row][j] * G[j][k] for j in range(K))
            bad = val != 1 if exact else abs(val - 1.0) > FLOAT_TOL
            if bad:
                report.add("CG_equals_ones", row, k)
    return report


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------


def _encode(value) -> object:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return float(value)


def scheme_to_dict(scheme: CodingScheme) -> dict:
    G = scheme.G_exact if scheme.G_exact is not None else scheme.G.tolist()
    C = scheme.C_exact if scheme.C_exact is not None else scheme.C.tolist()
    return {
        "version": 1,
        "K": scheme.K,
        "s": scheme.s,
        "G": [[_encode(v) for v in row] for row in G],
        "C": [[_encode(v) for v in row] for row in C],
    }


def scheme_from_dict(doc: dict) -> CodingScheme:
    if doc.get("version") != 1:
        raise ValueError(f"unsupported scheme version {doc.get('version')!r}")
    K, s = int(doc["K"]), int(doc["s"])
    exact = all(isinstance(v, str) for row in doc["G"] + doc["C"] for v in row)
    parse = Fraction if exact else float
    G = [[parse(v) for v in row] for row in doc["G"]]
    C = [[parse(v) for v in row] for row in doc["C"]]
    index = {tuple(j for j in range(K) if C[r][j] == 0): r for r in range(len(C))}
    return CodingScheme(
        K, s,
        G=np.array(G, dtype=float), C=np.array(C, dtype=float),
        straggler_index=index,
        arithmetic=EXACT if exact else FLOAT,
        G_exact=G if exact else None, C_exact=C if exact else None,
    )


def dumps(scheme: CodingScheme) -> str:
    return json.dumps(scheme_to_dict(scheme), indent=1)


def loads(text: str) -> CodingScheme:
    return scheme_from_dict(json.loads(text))
