"""Scalar information-theoretic primitives and finite pmf containers.

All logarithms are base 2, so every rate and entropy is in bits.  The
convention ``0 * log 0 = 0`` is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

PMF_TOL = 1e-12


def _check_probability(q, name="q"):
    arr = np.asarray(q, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {q!r}")
    return arr


def _scalar_or_array(arr):
    return float(arr) if arr.ndim == 0 else arr


def binary_entropy(q):
    """Binary entropy ``h_b(q)`` in bits.

    Accepts a scalar or an array; returns the same shape.  Endpoints
    evaluate to exactly 0.  The value is symmetric under ``q -> 1 - q``
    bit for bit: both terms are formed from ``b = max(q, 1-q)`` and
    ``a = 1 - b``, which is exact for ``b >= 1/2``, and ``q`` and the rounded
    ``1 - q`` share the same ``b``.  For tiny ``q`` this gives up relative
    accuracy in ``a`` (absolute error stays below 1e-14).
    """
    q = _check_probability(q)
    b = np.maximum(q, 1.0 - q)
    a = 1.0 - b
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(a > 0.0, -a * np.log2(np.where(a > 0.0, a, 1.0)), 0.0)
        tb = np.where(b > 0.0, -b * np.log2(np.where(b > 0.0, b, 1.0)), 0.0)
    return _scalar_or_array(ta + tb)


def binary_entropy_inverse(v, tol=1e-12):
    """Return the unique ``q`` in ``[0, 1/2]`` with ``binary_entropy(q) == v``.

    Solved by bisection until the bracket is narrower than ``tol``.
    """
    v = float(v)
    if not 0.0 <= v <= 1.0 or np.isnan(v):
        raise DomainError(f"entropy value must lie in [0, 1], got {v!r}")
    if v == 0.0:
        return 0.0
    if v == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < v:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bsc_convolve(p, e):
    """Crossover probability of two cascaded binary symmetric channels, ``p*e``."""
    p = _check_probability(p, "p")
    e = _check_probability(e, "e")
    return _scalar_or_array(p * (1.0 - e) + e * (1.0 - p))


def positive_part(x):
    """``|x|^+ = max(x, 0)``."""
    return _scalar_or_array(np.maximum(np.asarray(x, dtype=float), 0.0))


def entropy(pmf):
    """Shannon entropy of a probability vector, in bits."""
    pmf = np.asarray(pmf, dtype=float).ravel()
    nz = pmf[pmf > 0.0]
    return float(-np.sum(nz * np.log2(nz)))


@dataclass(frozen=True)
class JointPMF:
    """Joint pmf of a symbol pair ``(X, Y)``; row index is ``x``, column is ``y``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise DomainError(f"joint pmf must be a non-empty matrix, got shape {probs.shape}")
        if np.any(np.isnan(probs)) or np.any(probs < 0.0):
            raise DomainError("joint pmf entries must be nonnegative")
        if abs(probs.sum() - 1.0) > PMF_TOL:
            raise DomainError(f"joint pmf must sum to 1, sums to {probs.sum()!r}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def alphabet_x(self) -> int:
        return self.probs.shape[0]

    @property
    def alphabet_y(self) -> int:
        return self.probs.shape[1]

    def marginal_x(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def marginal_y(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def conditional(self, given="x"):
        """Conditional kernel and a mask of the rows that are defined.

        ``given="x"`` returns ``P(y|x)`` with one row per ``x``; rows whose
        conditioning symbol has zero probability are filled with NaN and
        flagged ``False`` in the returned mask.
        """
        if given == "x":
            joint, marg = self.probs, self.marginal_x()
        elif given == "y":
            joint, marg = self.probs.T, self.marginal_y()
        else:
            raise DomainError(f"given must be 'x' or 'y', got {given!r}")
        defined = marg > 0.0
        kernel = np.full(joint.shape, np.nan)
        kernel[defined] = joint[defined] / marg[defined, None]
        return kernel, defined

    @classmethod
    def dsbs(cls, alpha: float) -> "JointPMF":
        """Doubly symmetric binary source: uniform ``X`` and ``Y = X xor Ber(alpha)``."""
        _check_probability(alpha, "alpha")
        a = float(alpha)
        return cls(np.array([[(1 - a) / 2, a / 2], [a / 2, (1 - a) / 2]]))

    @classmethod
    def independent(cls, px, py) -> "JointPMF":
        return cls(np.outer(np.asarray(px, float), np.asarray(py, float)))

    def to_dict(self) -> dict:
        return {"probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "JointPMF":
        if "probs" not in data:
            raise DomainError("joint pmf document is missing field 'probs'")
        return cls(np.asarray(data["probs"], dtype=float))


@dataclass(frozen=True)
class NoiseParams:
    """Crossover probabilities of the Bernoulli noise sources in the two example channels."""

    p: float = 0.0
    delta: float = 0.0
    epsilon: float = 0.0
    p1: float = 0.0
    p3: float = 0.0

    def __post_init__(self):
        for name in ("p", "delta", "epsilon", "p1", "p3"):
            _check_probability(getattr(self, name), name)

    def require_example2(self):
        for name in ("p1", "p3", "delta", "epsilon"):
            if not getattr(self, name) < 0.5:
                raise DomainError(f"the second example channel requires {name} < 1/2")
        return self
