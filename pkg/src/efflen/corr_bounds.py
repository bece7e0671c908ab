"""Two-sided bounds on the disagreement of Boolean functions of correlated blocks.

For a pair of i.i.d. blocks ``(X^n, Y^n)`` and Boolean functions ``e, f``
the disagreement ``P(e(X^n) != f(Y^n))`` is sandwiched by

    lower = 2 sqrt(sum P) sqrt(sum Q) - 2 sum_i psi^{w(i)} sqrt(P_i Q_i)
    upper = 1 - lower

where ``P``, ``Q`` are the dependency spectra of ``e`` and ``f`` under the
respective marginals and ``psi`` is the maximal correlation of one letter.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .efron_decomp import DependencySpectrum, ProductSource, TruthTableFunction, hamming_weights, spectrum
from .errors import DomainError, ResourceError, StructuralError
from .info_math import JointPMF
from .maxcorr import hgr_maximal_correlation

MAX_JOINT_STATES = 2**26
SWEEP_HEADER = ("eff_len_e", "eff_len_f", "exact", "lower", "upper", "psi", "n")


@dataclass(frozen=True)
class BoundPair:
    lower: float
    upper: float
    c_weights: np.ndarray  # psi ** w_H(mask), indexed by mask

    @property
    def lower_clamped(self) -> float:
        return min(max(self.lower, 0.0), 1.0)

    @property
    def upper_clamped(self) -> float:
        return min(max(self.upper, 0.0), 1.0)

    def contains(self, value: float, tol: float = 1e-9) -> bool:
        return self.lower_clamped - tol <= value <= self.upper_clamped + tol

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_clamped": self.lower_clamped,
            "upper_clamped": self.upper_clamped,
        }


def disagreement_bounds(spec_e: DependencySpectrum, spec_f: DependencySpectrum, psi: float) -> BoundPair:
    if spec_e.n != spec_f.n:
        raise StructuralError(f"spectra have different blocklengths {spec_e.n} and {spec_f.n}")
    if not 0.0 <= psi <= 1.0:
        raise DomainError(f"psi must lie in [0, 1], got {psi!r}")
    c = np.power(float(psi), hamming_weights(spec_e.n).astype(float))
    cross = float(np.sum(c * np.sqrt(spec_e.variances * spec_f.variances)))
    scale = float(np.sqrt(spec_e.total_variance) * np.sqrt(spec_f.total_variance))
    lower = 2.0 * scale - 2.0 * cross
    return BoundPair(lower, 1.0 - lower, c)


def _apply_kernel(values: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Contract every axis of ``values`` (shape ``(ky,) * n``) with ``matrix`` (``kx x ky``)."""
    out = values
    for _ in range(values.ndim):
        # tensordot moves the contracted axis to the end; n rotations restore the order
        out = np.tensordot(out, matrix, axes=([0], [1]))
    return out


def disagreement_probability_exact(
    e: TruthTableFunction, f: TruthTableFunction, pair_pmf: JointPMF, n: int
) -> float:
    """``P(e(X^n) != f(Y^n))`` for ``(X_k, Y_k)`` i.i.d. from ``pair_pmf``.

    Exact: sums ``prod_k P(x_k, y_k)`` over every pair of blocks on which
    the functions differ.
    """
    if e.n != n or f.n != n:
        raise StructuralError(f"functions must both have blocklength {n}")
    if e.alphabet_size != pair_pmf.alphabet_x or f.alphabet_size != pair_pmf.alphabet_y:
        raise StructuralError("function alphabets do not match the pair pmf")
    states = pair_pmf.alphabet_x**n * pair_pmf.alphabet_y**n
    if states > MAX_JOINT_STATES:
        raise ResourceError(f"{states} joint states exceed the enumeration cap {MAX_JOINT_STATES}")
    g = f.grid.astype(float)
    mass_f1 = _apply_kernel(g, pair_pmf.probs)  # sum_y P(x, y) f(y)
    mass_all = _apply_kernel(np.ones_like(g), pair_pmf.probs)  # P(x)
    ex = e.grid.astype(float)
    return float(np.sum(ex * (mass_all - mass_f1)) + np.sum((1.0 - ex) * mass_f1))


@dataclass(frozen=True)
class SweepRow:
    label: str
    eff_len_e: float | None
    eff_len_f: float | None
    exact: float
    lower: float
    upper: float
    psi: float
    n: int

    def csv_row(self):
        return (self.eff_len_e, self.eff_len_f, self.exact, self.lower, self.upper, self.psi, self.n)


def agreement_sweep(
    family: Iterable[tuple[str, TruthTableFunction, TruthTableFunction]],
    source: JointPMF,
    n: int,
) -> list[SweepRow]:
    """Exact disagreement and both bounds for each labelled pair, sorted by effective length."""
    psi = hgr_maximal_correlation(source).psi
    sx = ProductSource(source.marginal_x(), n)
    sy = ProductSource(source.marginal_y(), n)
    rows = []
    for label, e, f in family:
        spec_e, spec_f = spectrum(e, sx), spectrum(f, sy)
        bounds = disagreement_bounds(spec_e, spec_f, psi)
        exact = disagreement_probability_exact(e, f, source, n)
        rows.append(
            SweepRow(label, spec_e.effective_length, spec_f.effective_length, exact, bounds.lower, bounds.upper, psi, n)
        )
    rows.sort(key=lambda r: (r.eff_len_e or 0.0, r.eff_len_f or 0.0))
    return rows


def parity_family(n: int):
    """Matched parity pairs on the first ``k`` coordinates, ``k = 1..n``."""
    from .efron_decomp import parity

    for k in range(1, n + 1):
        fn = parity(k, total=n)
        yield f"parity-{k}", fn, fn


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row.csv_row()])
    return buf.getvalue()


lemma1_bounds = disagreement_bounds
