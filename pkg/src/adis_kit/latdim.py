"""Latent dimensionality estimation.

Two stages: a permutation bound first (eigenvalues of the column-permuted
data flatten systematic structure, so ranks where the observed spectrum
exceeds the permuted one are significant), then leave-one-out cross
validation of the constant-tail eigenvalue model, scored by the step size of
the mean CV error and robustified by a cumulative-argmax vote.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

VAR_GUARD = 1e-300
# exceedance tolerance: eigenvalues that are structural zeros (the centering
# projection annihilates one direction in both the observed and the permuted
# matrix) land at +-1e-14 * lambda_1 and must not decide the bound
EXCEED_RTOL = 1e-9


@dataclass
class LatDimSummary:
    q_l: int
    lam: np.ndarray               # observed spectrum, non-increasing
    lam_b: np.ndarray             # permuted spectrum, non-increasing
    qs: np.ndarray                # scanned q values (q_l .. p-4)
    e_bar: np.ndarray             # mean CV error at each scanned q
    var_e: np.ndarray             # variance of the mean CV error
    delta: np.ndarray             # standardized error drop q -> q+1
    f_of_r: np.ndarray            # cumulative argmax of delta
    g_counts: Dict[int, int]      # vote counts per argmax location
    q_hat: int
    rng_seed: int
    degenerate: bool = False      # every delta hit the zero-variance guard
    scan_empty: bool = False      # q_l .. p-4 was empty

    def to_json(self) -> str:
        return json.dumps({
            "q_hat": self.q_hat,
            "q_l": self.q_l,
            "rng_seed": self.rng_seed,
            "degenerate": self.degenerate,
            "scan_empty": self.scan_empty,
            "lambda": self.lam.tolist(),
            "lambda_b": self.lam_b.tolist(),
            "qs": self.qs.tolist(),
            "e_bar": self.e_bar.tolist(),
            "var_e": self.var_e.tolist(),
            "delta": self.delta.tolist(),
            "f_of_r": self.f_of_r.tolist(),
            "g_counts": {str(k): v for k, v in self.g_counts.items()},
        })

    def profile_csv(self) -> str:
        lines = ["q,e_bar,var_e,delta"]
        for i, q in enumerate(self.qs):
            lines.append(f"{q},{self.e_bar[i]:.17g},{self.var_e[i]:.17g},"
                         f"{self.delta[i]:.17g}")
        return "\n".join(lines) + "\n"


def permute_columns(X: np.ndarray, seed: int) -> np.ndarray:
    """Independently permute the entries of every column."""
    rng = np.random.default_rng(seed)
    return rng.permuted(np.asarray(X, dtype=float), axis=0)


def _spectrum(X: np.ndarray) -> np.ndarray:
    n = X.shape[1]
    vals = np.linalg.eigvalsh((X @ X.T) / n)
    return vals[::-1]


def permute_lower_bound(X: np.ndarray, seed: int, replicates: int = 1
                        ) -> Tuple[int, np.ndarray, np.ndarray]:
    """Lower bound on the latent dimension from a column permutation.

    Returns ``(q_l, lam, lam_b)`` with both spectra sorted non-increasing and
    ``q_l`` the largest 1-based rank where the observed eigenvalue exceeds
    the permuted one (0 if none). ``replicates > 1`` averages the permuted
    spectrum over that many draws.
    """
    X = np.asarray(X, dtype=float)
    lam = _spectrum(X)
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    acc = np.zeros_like(lam)
    for r in range(replicates):
        acc += _spectrum(permute_columns(X, seed + r))
    lam_b = acc / replicates
    tol = EXCEED_RTOL * max(abs(lam[0]), abs(lam_b[0]), 1e-300)
    exceed = np.nonzero(lam > lam_b + tol)[0]
    q_l = int(exceed[-1]) + 1 if exceed.size else 0
    return q_l, lam, lam_b


def cv_profile(lam: np.ndarray, q: int) -> Tuple[float, float]:
    """Leave-one-out CV of the constant-tail model at dimension ``q``.

    The tail is the eigenvalues ranked q+1 .. p-1. For each member the
    prediction is the mean of the others; the squared errors are averaged
    into ``E_bar`` and their population variance, divided by the tail length,
    gives ``var_E``. Valid for tails of at least two values (q <= p-3).
    """
    lam = np.asarray(lam, dtype=float)
    p = lam.size
    if not 0 <= q <= p - 3:
        raise ValueError(f"q must lie in [0, {p - 3}], got {q}")
    tail = lam[q:p - 1]
    k = tail.size                       # p - 1 - q
    total = tail.sum()
    m_minus = (total - tail) / (k - 1)  # mean of the others
    E = (tail - m_minus) ** 2
    e_bar = float(E.mean())
    var_e = float(E.var() / k)          # population variance / count
    return e_bar, var_e


def vote_from_delta(qs: np.ndarray, delta: np.ndarray
                    ) -> Tuple[np.ndarray, Dict[int, int], int]:
    """Cumulative-argmax vote; every tie resolves to the smallest index.

    Returns ``(f_of_r, g_counts, winner)`` where ``winner`` is the voted
    location of the maximum.
    """
    best_idx = 0
    f_of_r = np.empty(qs.size, dtype=int)
    for i in range(qs.size):
        if delta[i] > delta[best_idx]:
            best_idx = i
        f_of_r[i] = qs[best_idx]
    g_counts: Dict[int, int] = {}
    for y in f_of_r:
        g_counts[int(y)] = g_counts.get(int(y), 0) + 1
    top = max(g_counts.values())
    winner = min(y for y, cnt in g_counts.items() if cnt == top)
    return f_of_r, g_counts, winner


def estimate_q(X: np.ndarray, seed: int, replicates: int = 1) -> LatDimSummary:
    """Two-stage latent dimension estimate on a centered matrix.

    Ties in every argmax go to the smallest index. All randomness comes from
    ``seed``, so identical inputs reproduce identical summaries.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[0]
    q_l, lam, lam_b = permute_lower_bound(X, seed, replicates=replicates)

    # The drop statistic peaks at q_true - 1, which a scan starting exactly at
    # the lower bound would miss whenever the bound is tight (q_l = q_true),
    # forcing an overestimate. Scanning one point below keeps every candidate
    # >= q_l reachable while never returning less than q_l.
    scan_lo = max(q_l - 1, 0)
    qs = np.arange(scan_lo, p - 3)      # q values scan_lo .. p-4
    if qs.size == 0:
        return LatDimSummary(
            q_l=q_l, lam=lam, lam_b=lam_b, qs=qs, e_bar=np.zeros(0),
            var_e=np.zeros(0), delta=np.zeros(0), f_of_r=np.zeros(0, int),
            g_counts={}, q_hat=max(q_l, 1), rng_seed=seed, scan_empty=True)

    prof = {q: cv_profile(lam, q) for q in range(scan_lo, p - 2)}
    e_bar = np.array([prof[q][0] for q in qs])
    var_e = np.array([prof[q][1] for q in qs])

    delta = np.empty(qs.size)
    guarded = np.zeros(qs.size, dtype=bool)
    for i, q in enumerate(qs):
        num = prof[q][0] - prof[q + 1][0]
        den = prof[q][1] + prof[q + 1][1]
        if den < VAR_GUARD:
            delta[i] = 0.0
            guarded[i] = True
        else:
            delta[i] = num / np.sqrt(den)

    if bool(guarded.all()):
        return LatDimSummary(
            q_l=q_l, lam=lam, lam_b=lam_b, qs=qs, e_bar=e_bar, var_e=var_e,
            delta=delta, f_of_r=qs.copy(), g_counts={}, q_hat=q_l,
            rng_seed=seed, degenerate=True)

    f_of_r, g_counts, y_star = vote_from_delta(qs, delta)
    return LatDimSummary(
        q_l=q_l, lam=lam, lam_b=lam_b, qs=qs, e_bar=e_bar, var_e=var_e,
        delta=delta, f_of_r=f_of_r, g_counts=g_counts, q_hat=1 + y_star,
        rng_seed=seed)
