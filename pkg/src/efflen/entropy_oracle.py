"""Exact entropies of small sessions, by full enumeration of the noise.

The central check: when receiver 2's side output ``y2p`` is produced by
helpers that agree exactly on the uses marked in a pattern ``z``, the
residual uncertainty about the noise block ``N_p^n`` satisfies

    H(N_p^n | Y2p^n) >= n h(p) - w(z) (1 - h(delta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvariantError
from .icfb_channels import ExactJoint, _unique_rows, example1, exact_output_distribution
from .info_math import NoiseParams, binary_entropy, bsc_convolve
from .strategies import BASE_MAPS, scheme_agreement_pattern, scheme_shared_codebook, scheme_uncoded

MARGIN_TOL = 1e-9


def _entropy_of(probs: np.ndarray) -> float:
    p = probs[probs > 0.0]
    return -math.fsum(p * np.log2(p))


def joint_entropy(joint: ExactJoint, variables) -> float:
    if variables is None or (not isinstance(variables, str) and len(variables) == 0):
        return 0.0
    return _entropy_of(joint.marginal(joint.resolve(variables)))


def conditional_entropy(joint: ExactJoint, target, cond=()) -> float:
    """``H(target | cond)`` in bits as ``H(target, cond) - H(cond)``."""
    t_cols = joint.resolve(target)
    c_cols = joint.resolve(cond) if cond else []
    both = c_cols + [i for i in t_cols if i not in c_cols]
    value = _entropy_of(joint.marginal(both)) - _entropy_of(joint.marginal(c_cols))
    if value < -1e-10:
        raise InvariantError(f"negative conditional entropy {value!r}")
    return max(value, 0.0)


def plug_in_conditional_entropy(target: np.ndarray, cond: np.ndarray) -> float:
    """Empirical ``H(T|C)`` from sample rows (one sample per row)."""
    target = np.asarray(target, dtype=np.int8).reshape(target.shape[0], -1)
    cond = np.asarray(cond, dtype=np.int8).reshape(cond.shape[0], -1)
    m = target.shape[0]
    _, inv_both = _unique_rows(np.concatenate([cond, target], axis=1))
    _, inv_c = _unique_rows(cond)
    return _entropy_of(np.bincount(inv_both) / m) - _entropy_of(np.bincount(inv_c) / m)


@dataclass(frozen=True)
class MarginReport:
    n: int
    z: str
    params: dict
    bound: float
    exact: float
    margin: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "z": self.z,
            "params": dict(self.params),
            "bound": self.bound,
            "exact": self.exact,
            "margin": self.margin,
        }


FORWARDING = ("uncoded", "shared")
CHECK_STRATEGIES = BASE_MAPS + FORWARDING


def agreement_entropy_check(
    n: int,
    z,
    strategy: str,
    p: float,
    delta: float,
    n0: int = 1,
    seed: int = 0,
    inner: int = 3,
    cap: int | None = None,
) -> MarginReport:
    """Margin ``H(N_p^n | Y2p^n) - [n h(p) - w(z)(1 - h(delta))]`` for a fixed pattern ``z``.

    ``strategy`` is either one of the base maps of
    :func:`~efflen.strategies.scheme_agreement_pattern`, which makes the
    helpers agree exactly where ``z`` is 1, or a forwarding scheme
    (``uncoded``/``shared``) whose helpers always agree, in which case ``z``
    must be all ones.  Feedback is noiseless (``epsilon = 0``).
    """
    z = tuple(int(b) for b in z)
    if len(z) != n or any(b not in (0, 1) for b in z):
        raise ConfigurationError(f"pattern must be {n} bits, got {z!r}")
    params = NoiseParams(p, delta, 0.0)
    if strategy in BASE_MAPS:
        strat = scheme_agreement_pattern(z, strategy, n0, seed)
    elif strategy in FORWARDING:
        if not all(z):
            raise ConfigurationError(f"{strategy} helpers always agree; the pattern must be all ones")
        strat = scheme_uncoded(params) if strategy == "uncoded" else scheme_shared_codebook(params, inner)
    else:
        raise ConfigurationError(f"unknown strategy {strategy!r}; choose from {CHECK_STRATEGIES}")
    kw = {} if cap is None else {"cap": cap}
    joint = exact_output_distribution(example1(params), strat, n, keep=["n_p", "y2p", "x12", "x32"], **kw)
    agree = joint.states[:, joint.resolve("x12")] == joint.states[:, joint.resolve("x32")]
    if not np.all(agree[joint.probs > 0] == np.array(z, dtype=bool)):
        raise InvariantError("helper agreement does not follow the requested pattern")
    exact = conditional_entropy(joint, "n_p", "y2p")
    bound = n * binary_entropy(p) - sum(z) * (1.0 - binary_entropy(delta))
    margin = exact - bound
    if margin < -MARGIN_TOL:
        raise InvariantError(f"entropy margin {margin!r} is below -{MARGIN_TOL}")
    snap = {"p": p, "delta": delta, "epsilon": 0.0, "strategy": strategy, "n0": n0, "seed": seed}
    if strategy == "shared":
        snap["inner"] = inner
    return MarginReport(n, "".join(map(str, z)), snap, bound, exact, margin)


@dataclass(frozen=True)
class UncodedEntropyReport:
    n: int
    p: float
    delta: float
    block: float  # (1/n) H(N_p^n | Y2p^n)
    aligned: float  # (1/n) sum_i H(N_p,i | Y2p_i)
    reference: float  # 2 h(p) - h(p*p)

    @property
    def gap(self) -> float:
        return abs(self.aligned - self.reference)

    @property
    def block_gap(self) -> float:
        return abs(self.block - self.reference)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "delta": self.delta,
            "block": self.block,
            "aligned": self.aligned,
            "reference": self.reference,
            "gap": self.gap,
            "block_gap": self.block_gap,
        }


def uncoded_entropy_gap(n: int, p: float, delta: float = 0.0) -> UncodedEntropyReport:
    """Exact noise uncertainty left at receiver 2 under uncoded forwarding.

    Reports both the block entropy rate and the per-letter aligned sum,
    next to the reference value ``2 h(p) - h(p*p)``.
    """
    params = NoiseParams(p, delta, 0.0)
    joint = exact_output_distribution(example1(params), scheme_uncoded(params), n, keep=["n_p", "y2p"])
    block = conditional_entropy(joint, "n_p", "y2p") / n
    aligned = math.fsum(conditional_entropy(joint, f"n_p[{t}]", f"y2p[{t}]") for t in range(n)) / n
    reference = 2.0 * binary_entropy(p) - binary_entropy(bsc_convolve(p, p))
    return UncodedEntropyReport(n, p, delta, block, aligned, float(reference))


appendixA_check = agreement_entropy_check
theorem2_entropy_gap = uncoded_entropy_gap
