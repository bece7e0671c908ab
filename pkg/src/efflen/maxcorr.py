"""Hirschfeld-Gebelein-Renyi maximal correlation of a finite joint pmf."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantError
from .info_math import JointPMF

TOP_SINGULAR_TOL = 1e-9


@dataclass(frozen=True)
class MaxCorrResult:
    psi: float
    optimal_e: np.ndarray  # over the X alphabet, zero on null symbols
    optimal_f: np.ndarray
    degenerate: bool = False


def _normalized_matrix(pmf: JointPMF):
    px, py = pmf.marginal_x(), pmf.marginal_y()
    sx, sy = px > 0.0, py > 0.0
    sub = pmf.probs[np.ix_(sx, sy)]
    b = sub / np.sqrt(np.outer(px[sx], py[sy]))
    return b, px, py, sx, sy


def hgr_maximal_correlation(pmf: JointPMF) -> MaxCorrResult:
    """Maximal correlation ``psi`` and a pair of functions attaining it.

    ``psi`` is the second singular value of ``B[x, y] = P(x, y) / sqrt(P(x) P(y))``;
    the leading singular value is always 1 and belongs to the constants.
    When either marginal has fewer than two symbols of positive mass the
    result is ``psi = 0`` with ``degenerate=True``.
    """
    b, px, py, sx, sy = _normalized_matrix(pmf)
    e = np.zeros(pmf.alphabet_x)
    f = np.zeros(pmf.alphabet_y)
    if sx.sum() < 2 or sy.sum() < 2:
        return MaxCorrResult(0.0, e, f, degenerate=True)
    u, s, vt = np.linalg.svd(b)
    if abs(s[0] - 1.0) > TOP_SINGULAR_TOL:
        raise InvariantError(f"leading singular value {s[0]!r} of the normalized pmf is not 1")
    psi = float(min(max(s[1], 0.0), 1.0))
    e[sx] = u[:, 1] / np.sqrt(px[sx])
    f[sy] = vt[1] / np.sqrt(py[sy])
    if float(e @ pmf.probs @ f) < 0.0:
        f = -f
    return MaxCorrResult(psi, e, f)


def correlation(pmf: JointPMF, e, f) -> float:
    return float(np.asarray(e, float) @ pmf.probs @ np.asarray(f, float))


def _normalize(g: np.ndarray, marg: np.ndarray) -> np.ndarray | None:
    g = g - marg @ g
    var = marg @ (g * g)
    if var <= 1e-300:
        return None
    return g / np.sqrt(var)


@dataclass(frozen=True)
class SearchReport:
    best: float  # largest correlation reached by alternating ascent
    sampled_max: float  # largest correlation among random normalized pairs
    gap: float  # psi - best
    upper_ok: bool  # no pair exceeded psi + tolerance


def verify_psi_by_search(
    pmf: JointPMF,
    result: MaxCorrResult,
    restarts: int = 20,
    iterations: int = 2000,
    samples: int = 20000,
    seed: int = 0,
    tol: float = 1e-6,
) -> SearchReport:
    """Independent check of a spectral ``psi`` by direct search over function pairs.

    Alternating conditional expectations from random starts push a
    normalized pair uphill; random normalized pairs probe the upper side.
    Meant for alphabets of size at most 4.
    """
    rng = np.random.default_rng(seed)
    px, py = pmf.marginal_x(), pmf.marginal_y()
    with np.errstate(invalid="ignore", divide="ignore"):
        p_y_given_x = np.where(px[:, None] > 0, pmf.probs / px[:, None], 0.0)
        p_x_given_y = np.where(py[None, :] > 0, pmf.probs / py[None, :], 0.0)

    best = 0.0
    for _ in range(restarts):
        e = _normalize(rng.standard_normal(pmf.alphabet_x), px)
        if e is None:
            break
        for _ in range(iterations):
            f = _normalize(e @ p_x_given_y, py)
            if f is None:
                break
            e_next = _normalize(p_y_given_x @ f, px)
            if e_next is None:
                break
            e = e_next
        else:
            best = max(best, correlation(pmf, e, f))

    sampled = 0.0
    for _ in range(samples):
        e = _normalize(rng.standard_normal(pmf.alphabet_x), px)
        f = _normalize(rng.standard_normal(pmf.alphabet_y), py)
        if e is None or f is None:
            continue
        sampled = max(sampled, abs(correlation(pmf, e, f)))
    top = max(best, sampled)
    return SearchReport(best, sampled, result.psi - best, top <= result.psi + tol)
