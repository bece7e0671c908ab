"""Closed-form rate bounds and achievable points for the two example channels.

Rates are in bits per channel use.  Each evaluator returns a
:class:`RateRegionReport` carrying its kind, parameters and provenance
label so grids can be written out and compared row by row.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .info_math import _check_probability, binary_entropy, binary_entropy_inverse, bsc_convolve, positive_part

DEFAULT_ZETA = 1e-6
LOG2_3 = math.log2(3.0)


@dataclass(frozen=True)
class RateTriple:
    r1: float
    r2: float
    r3: float

    def __post_init__(self):
        for name in ("r1", "r2", "r3"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise DomainError(f"{name} must be finite and nonnegative, got {v!r}")

    def as_tuple(self):
        return (self.r1, self.r2, self.r3)

    def dominates(self, other: "RateTriple", tol: float = 1e-12) -> bool:
        return all(a >= b - tol for a, b in zip(self.as_tuple(), other.as_tuple()))


@dataclass(frozen=True)
class RateRegionReport:
    kind: str  # "outer", "achievable" or "ceiling"
    label: str
    params: dict
    rates: RateTriple | None
    condition_met: bool = True
    note: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "label": self.label,
            "params": dict(self.params),
            "condition_met": self.condition_met,
            "rates": None if self.rates is None else asdict(self.rates),
        }
        if self.note:
            out["note"] = self.note
        if self.extra:
            out["extra"] = dict(self.extra)
        return out


def _probs(**kw):
    for name, value in kw.items():
        _check_probability(value, name)


def agreement_r2_bound(p, delta, g):
    """``1 - |h(p) - (1 - h(delta)) g|^+``; vectorised over any argument."""
    return 1.0 - positive_part(binary_entropy(p) - (1.0 - binary_entropy(delta)) * np.asarray(g, float))


def linear_r2_bound(p, g):
    """Linear form ``1 - h(p) (1 - g)``, reported next to :func:`agreement_r2_bound`."""
    out = 1.0 - binary_entropy(p) * (1.0 - np.asarray(g, float))
    return float(out) if np.ndim(out) == 0 else out


def outer_bound(p: float, delta: float, epsilon: float, g: float) -> RateTriple:
    """Outer bound on the first example channel at helper agreement ``g``."""
    _probs(p=p, delta=delta, epsilon=epsilon, g=g)
    return RateTriple(
        1.0 - binary_entropy(p),
        float(agreement_r2_bound(p, delta, g)),
        1.0 - binary_entropy(bsc_convolve(p, epsilon)),
    )


def full_agreement_outer(p: float, delta: float, epsilon: float) -> RateTriple:
    """Full-agreement specialization of :func:`outer_bound`."""
    _probs(p=p, delta=delta, epsilon=epsilon)
    return RateTriple(
        1.0 - binary_entropy(p),
        1.0 - positive_part(binary_entropy(p) - (1.0 - binary_entropy(delta))),
        1.0 - binary_entropy(bsc_convolve(p, epsilon)),
    )


@dataclass(frozen=True)
class ConditionalTriple:
    """A rate triple that only holds under a side condition."""

    condition_met: bool
    rates: RateTriple | None
    note: str = ""


def capacity_corner(p: float, delta: float) -> ConditionalTriple:
    """Capacity corner ``(1 - h(p), 1, 1 - h(p))`` at ``epsilon = 0``.

    Only valid when ``h(p) <= 1 - h(delta)``; otherwise the result has
    ``condition_met=False`` and no rates.
    """
    _probs(p=p, delta=delta)
    hp, hd = binary_entropy(p), binary_entropy(delta)
    if hp > 1.0 - hd:
        return ConditionalTriple(False, None, f"h(p) = {hp:.6g} exceeds 1 - h(delta) = {1.0 - hd:.6g}")
    return ConditionalTriple(True, RateTriple(1.0 - hp, 1.0, 1.0 - hp))


def uncoded_r2_ceiling(p: float) -> float:
    """``1 + h(p*p) - 2 h(p)``: user-2 rate ceiling when helpers forward noise uncoded."""
    _probs(p=p)
    return float(1.0 + binary_entropy(bsc_convolve(p, p)) - 2.0 * binary_entropy(p))


def common_bit_distortion(p1: float, p3: float, delta: float) -> float:
    """``d = h^{-1}(|h(p1*delta) + h(p3) - 1|^+)``."""
    arg = positive_part(binary_entropy(bsc_convolve(p1, delta)) + binary_entropy(p3) - 1.0)
    return binary_entropy_inverse(min(arg, 1.0))


def common_bit_point(p1: float, p3: float, delta: float) -> RateTriple:
    """Achievable triple ``(log2(3) - 1, 1 - h(d), 1 - h(delta))`` of the second example at ``epsilon = 0``."""
    _probs(p1=p1, p3=p3, delta=delta)
    for name, v in (("p1", p1), ("p3", p3), ("delta", delta)):
        if not v < 0.5:
            raise DomainError(f"{name} must be below 1/2, got {v!r}")
    d = common_bit_distortion(p1, p3, delta)
    return RateTriple(LOG2_3 - 1.0, 1.0 - binary_entropy(d), 1.0 - binary_entropy(delta))


@dataclass(frozen=True)
class WagnerVerdict:
    feasible: bool
    r12_interval: tuple  # (low, high) admissible rates on the encoder-1 helper link
    r32_interval: tuple
    best_delta_param: float | None  # Delta attaining the smallest d over the grid
    min_distortion: float | None


def _links_ok(Delta, delta, d, p1, p3, zeta):
    r12 = (1.0 - binary_entropy(Delta), 1.0 - binary_entropy(p1) - zeta)
    r32 = (binary_entropy(bsc_convolve(Delta, delta)) - binary_entropy(d), 1.0 - binary_entropy(p3) - zeta)
    return r12, r32


def min_distortion_grid(delta, p1, p3, zeta=DEFAULT_ZETA, step=1e-4):
    """Smallest feasible distortion over a grid of ``Delta`` in ``[0, 1/2]``.

    For each ``Delta`` whose encoder-1 link interval is nonempty the
    smallest admissible ``d`` solves ``h(d) = |h(Delta*delta) + h(p3) + zeta - 1|^+``.
    """
    grid = np.linspace(0.0, 0.5, int(round(0.5 / step)) + 1)
    ok = 1.0 - binary_entropy(grid) <= 1.0 - binary_entropy(p1) - zeta
    if not np.any(ok):
        return None, None
    need = positive_part(binary_entropy(bsc_convolve(grid[ok], delta)) + binary_entropy(p3) + zeta - 1.0)
    i = int(np.argmin(need))
    return float(grid[ok][i]), binary_entropy_inverse(min(float(need[i]), 1.0))


def helper_link_feasible(Delta, delta, d, p1, p3, zeta=DEFAULT_ZETA, step=1e-4) -> WagnerVerdict:
    """Whether distortion ``d`` is reachable with auxiliary parameter ``Delta``.

    Receiver 2 needs ``R12 >= 1 - h(Delta)`` and ``R32 >= h(Delta*delta) - h(d)``,
    while the helper links carry at most ``1 - h(p1) - zeta`` and
    ``1 - h(p3) - zeta``.  Also reports the grid-minimized distortion.
    """
    _probs(delta=delta, d=d, p1=p1, p3=p3)
    if not 0.0 <= Delta <= 0.5:
        raise DomainError(f"Delta must lie in [0, 1/2], got {Delta!r}")
    if not zeta > 0.0:
        raise DomainError("zeta must be positive")
    r12, r32 = _links_ok(Delta, delta, d, p1, p3, zeta)
    feasible = r12[0] <= r12[1] and max(r32[0], 0.0) <= r32[1]
    best, dmin = min_distortion_grid(delta, p1, p3, zeta, step)
    return WagnerVerdict(bool(feasible), tuple(map(float, r12)), tuple(map(float, r32)), best, dmin)


@dataclass(frozen=True)
class ContinuityTable:
    rows: list  # (epsilon, r1, r2 at g=0, r2 at g=1, r3)
    max_step_difference: float  # largest change of r3 between neighbouring grid points


def continuity_probe(p: float, delta: float, eps_grid) -> ContinuityTable:
    """Evaluate the outer bound along an ``epsilon`` grid (at ``g`` = 0 and 1)."""
    eps = np.asarray(eps_grid, dtype=float).ravel()
    if eps.size == 0 or np.any(eps < 0.0) or np.any(eps > 0.5):
        raise DomainError("epsilon grid must be non-empty and inside [0, 1/2]")
    _probs(p=p, delta=delta)
    r1 = 1.0 - binary_entropy(p)
    r3 = 1.0 - np.atleast_1d(binary_entropy(bsc_convolve(p, eps)))
    r2_0, r2_1 = float(agreement_r2_bound(p, delta, 0.0)), float(agreement_r2_bound(p, delta, 1.0))
    rows = [(float(e), r1, r2_0, r2_1, float(v)) for e, v in zip(eps, r3)]
    diff = float(np.max(np.abs(np.diff(r3)))) if eps.size > 1 else 0.0
    return ContinuityTable(rows, diff)


def continuity_ratios(p: float, delta: float, steps, upper: float = 0.5) -> list:
    """``(step, max difference, ratio to previous)`` for each step; each grid spans ``[0, upper]``."""
    out, prev = [], None
    for h in steps:
        grid = np.arange(0.0, upper + h / 2, h)
        grid = grid[grid <= 0.5]
        diff = continuity_probe(p, delta, grid).max_step_difference
        out.append((h, diff, None if prev is None else prev / diff))
        prev = diff
    return out


REGION_KINDS = ("outer", "full-agreement", "capacity-corner", "uncoded-ceiling", "common-bit")
REGION_CSV_HEADER = ("kind", "label", "p", "delta", "epsilon", "g", "p1", "p3", "condition_met", "r1", "r2", "r3")


def evaluate(kind: str, **params) -> RateRegionReport:
    """Evaluate one region formula at one parameter point."""
    p, delta, eps = params.get("p", 0.0), params.get("delta", 0.0), params.get("epsilon", 0.0)
    if kind == "outer":
        g = params.get("g", 1.0)
        snap = {"p": p, "delta": delta, "epsilon": eps, "g": g}
        return RateRegionReport(
            "outer", "outer", snap, outer_bound(p, delta, eps, g),
            extra={"r2_linear_form": linear_r2_bound(p, g)},
        )
    if kind == "full-agreement":
        return RateRegionReport("outer", "full-agreement", {"p": p, "delta": delta, "epsilon": eps},
                                full_agreement_outer(p, delta, eps))
    if kind == "capacity-corner":
        res = capacity_corner(p, delta)
        return RateRegionReport("achievable", "capacity-corner", {"p": p, "delta": delta, "epsilon": 0.0},
                                res.rates, res.condition_met, res.note)
    if kind == "uncoded-ceiling":
        return RateRegionReport("ceiling", "uncoded-ceiling", {"p": p}, None, extra={"r2": uncoded_r2_ceiling(p)})
    if kind == "common-bit":
        p1, p3 = params.get("p1", 0.0), params.get("p3", 0.0)
        return RateRegionReport("achievable", "common-bit", {"p1": p1, "p3": p3, "delta": delta, "epsilon": 0.0},
                                common_bit_point(p1, p3, delta), extra={"d": common_bit_distortion(p1, p3, delta)})
    raise DomainError(f"unknown region kind {kind!r}; choose from {REGION_KINDS}")


def report_csv_row(report: RateRegionReport) -> list:
    pr = report.params
    if report.rates is not None:
        rates = report.rates.as_tuple()
    else:
        rates = (None, report.extra.get("r2"), None)
    row = [report.kind, report.label] + [pr.get(k) for k in ("p", "delta", "epsilon", "g", "p1", "p3")]
    return row + [report.condition_met, *rates]


# Alternate names for the evaluators above.
theorem1_outer = outer_bound
corollary1_region = full_agreement_outer
corollary2_capacity = capacity_corner
lemma4_point = common_bit_point
wagner_feasible = helper_link_feasible
