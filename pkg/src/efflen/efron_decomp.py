"""Efron-Stein decomposition of Boolean block functions over a product source.

A function ``e: X^n -> {0, 1}`` is stored as a truth table indexed by the
mixed-radix code of ``(x_1, ..., x_n)`` with ``x_1`` the most significant
digit, i.e. the table is the C-order flattening of an array of shape
``(k,) * n`` whose axis ``j`` is coordinate ``j + 1``.

Subset masks are integers: bit ``j`` set means coordinate ``j + 1`` belongs
to the subset.  ``mask_to_string`` renders a mask in coordinate order, so
the dictator on ``x_1`` has mask ``1`` and string ``"100"`` when ``n = 3``.

Components are held in compact form, as arrays over the coordinates in
their own subset only; ``RealComponentTable.values`` broadcasts them back
to the full ``X^n`` grid without copying.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ResourceError, StructuralError
from .info_math import PMF_TOL

DEFAULT_MAX_N = 14
# Largest table the cap admits for non-binary alphabets (same as 2**14).
MAX_TABLE_ENTRIES = 2**DEFAULT_MAX_N


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_to_string(mask: int, n: int) -> str:
    return "".join("1" if (mask >> j) & 1 else "0" for j in range(n))


def string_to_mask(bits: str) -> int:
    if any(c not in "01" for c in bits):
        raise StructuralError(f"mask string must contain only 0/1, got {bits!r}")
    return sum(1 << j for j, c in enumerate(bits) if c == "1")


def mask_coordinates(mask: int, n: int) -> tuple[int, ...]:
    return tuple(j for j in range(n) if (mask >> j) & 1)


def masks_by_popcount(n: int) -> list[int]:
    """All ``2**n`` masks ordered by popcount, then by integer value."""
    return sorted(range(1 << n), key=lambda m: (popcount(m), m))


@dataclass(frozen=True)
class TruthTableFunction:
    """A Boolean function of an ``n``-symbol block over an alphabet of size ``alphabet_size``."""

    n: int
    alphabet_size: int
    table: np.ndarray
    max_n: int = DEFAULT_MAX_N

    def __post_init__(self):
        if self.n < 1 or self.alphabet_size < 1:
            raise StructuralError("n and alphabet_size must be positive")
        if self.alphabet_size == 2 and self.n > self.max_n:
            raise ResourceError(
                f"blocklength {self.n} exceeds the cap n <= {self.max_n}; "
                "every pass enumerates all 2**n masks and inputs"
            )
        table = np.asarray(self.table).astype(np.int8).ravel()
        expected = self.alphabet_size**self.n
        if self.alphabet_size != 2 and expected > max(MAX_TABLE_ENTRIES, 2**self.max_n):
            raise ResourceError(f"table of {expected} entries exceeds the configured cap")
        if table.size != expected:
            raise StructuralError(f"table has {table.size} entries, expected {expected}")
        if np.any((table != 0) & (table != 1)):
            raise StructuralError("truth table entries must be 0 or 1")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def grid(self) -> np.ndarray:
        return self.table.reshape((self.alphabet_size,) * self.n)

    def __call__(self, x: Sequence[int]) -> int:
        return int(self.grid[tuple(x)])

    @classmethod
    def from_callable(cls, fn, n: int, alphabet_size: int = 2, **kw) -> "TruthTableFunction":
        idx = np.indices((alphabet_size,) * n).reshape(n, -1).T
        return cls(n, alphabet_size, np.array([fn(tuple(x)) for x in idx], dtype=np.int8), **kw)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "alphabet_size": self.alphabet_size, "table": self.table.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "TruthTableFunction":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"truth table is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise StructuralError("truth table document must be a JSON object")
        for key in ("n", "alphabet_size", "table"):
            if key not in data:
                raise StructuralError(f"truth table document is missing field '{key}'")
        if not isinstance(data["table"], list):
            raise StructuralError("field 'table' must be a list of 0/1 values")
        return cls(int(data["n"]), int(data["alphabet_size"]), np.asarray(data["table"]))

    def to_bitstring(self) -> str:
        if self.alphabet_size != 2:
            raise StructuralError("bitstring form is only defined for binary alphabets")
        return "".join(str(int(b)) for b in self.table)

    @classmethod
    def from_bitstring(cls, bits: str) -> "TruthTableFunction":
        bits = bits.strip()
        if not bits or any(c not in "01" for c in bits):
            raise StructuralError("bitstring must be a non-empty string of 0/1")
        n = len(bits).bit_length() - 1
        if 1 << n != len(bits):
            raise StructuralError(f"bitstring length {len(bits)} is not a power of two")
        return cls(n, 2, np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"))


@dataclass(frozen=True)
class ProductSource:
    """I.i.d. source of ``n`` symbols drawn from ``single_letter_pmf``."""

    single_letter_pmf: np.ndarray
    n: int

    def __post_init__(self):
        pmf = np.array(self.single_letter_pmf, dtype=float).ravel()
        if pmf.size < 1 or np.any(pmf < 0.0) or abs(pmf.sum() - 1.0) > PMF_TOL:
            raise DomainError("single-letter pmf must be nonnegative and sum to 1")
        pmf.setflags(write=False)
        object.__setattr__(self, "single_letter_pmf", pmf)

    @property
    def alphabet_size(self) -> int:
        return self.single_letter_pmf.size

    @classmethod
    def uniform(cls, n: int, alphabet_size: int = 2) -> "ProductSource":
        return cls(np.full(alphabet_size, 1.0 / alphabet_size), n)

    @classmethod
    def bernoulli(cls, n: int, q: float) -> "ProductSource":
        return cls(np.array([1.0 - q, q]), n)

    def block_pmf(self) -> np.ndarray:
        """Probability of every block, shaped ``(k,) * n``."""
        out = np.ones(())
        for _ in range(self.n):
            out = np.multiply.outer(out, self.single_letter_pmf)
        return out


@dataclass(frozen=True)
class RealComponentTable:
    """The component of a centered function that depends on exactly ``subset_mask``.

    ``compact`` has one axis per coordinate in the subset, in increasing
    coordinate order.
    """

    subset_mask: int
    n: int
    alphabet_size: int
    compact: np.ndarray

    @property
    def coordinates(self) -> tuple[int, ...]:
        return mask_coordinates(self.subset_mask, self.n)

    @property
    def values(self) -> np.ndarray:
        """Component evaluated on the full ``(k,) * n`` grid (read-only broadcast view)."""
        shape = [self.alphabet_size if (self.subset_mask >> j) & 1 else 1 for j in range(self.n)]
        return np.broadcast_to(self.compact.reshape(shape), (self.alphabet_size,) * self.n)


@dataclass(frozen=True)
class DependencySpectrum:
    """Variances of the components, indexed by subset mask.

    ``effective_length_raw`` is ``(1/n) * sum_i w_H(i) P_i``; the default
    ``effective_length`` is the variance-normalized average weight
    ``sum_i w_H(i) P_i / sum_i P_i``, which is ``None`` for constant functions.
    """

    n: int
    variances: np.ndarray  # indexed by integer mask, length 2**n
    total_variance: float = field(init=False)
    effective_length_raw: float = field(init=False)
    effective_length: float | None = field(init=False)

    def __post_init__(self):
        var = np.asarray(self.variances, dtype=float)
        if var.shape != (1 << self.n,):
            raise StructuralError(f"spectrum must have 2**n = {1 << self.n} entries")
        var = np.where(var < 0.0, 0.0, var)
        var.setflags(write=False)
        object.__setattr__(self, "variances", var)
        weights = hamming_weights(self.n)
        total = float(var.sum())
        weighted = float(np.dot(weights, var))
        object.__setattr__(self, "total_variance", total)
        object.__setattr__(self, "effective_length_raw", weighted / self.n)
        object.__setattr__(self, "effective_length", weighted / total if total > 0.0 else None)

    @property
    def effective_length_defined(self) -> bool:
        return self.effective_length is not None

    def as_dict(self) -> dict[str, float]:
        return {mask_to_string(m, self.n): float(v) for m, v in enumerate(self.variances)}

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "variances": self.as_dict(),
            "total_variance": self.total_variance,
            "by_weight": spectrum_by_weight(self).tolist(),
            "eff_len_norm": self.effective_length,
            "eff_len_raw": self.effective_length_raw,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DependencySpectrum":
        for key in ("n", "variances"):
            if key not in data:
                raise StructuralError(f"spectrum document is missing field '{key}'")
        n = int(data["n"])
        var = np.zeros(1 << n)
        for bits, value in data["variances"].items():
            if len(bits) != n:
                raise StructuralError(f"mask {bits!r} does not have length n = {n}")
            var[string_to_mask(bits)] = float(value)
        return cls(n, var)


def hamming_weights(n: int) -> np.ndarray:
    masks = np.arange(1 << n)
    w = np.zeros(1 << n, dtype=np.int64)
    for j in range(n):
        w += (masks >> j) & 1
    return w


def _check_compatible(e: TruthTableFunction, s: ProductSource):
    if e.n != s.n or e.alphabet_size != s.alphabet_size:
        raise StructuralError(
            f"function is over {e.alphabet_size}-ary blocks of length {e.n}, "
            f"source is {s.alphabet_size}-ary of length {s.n}"
        )


def one_probability(e: TruthTableFunction, s: ProductSource) -> float:
    _check_compatible(e, s)
    return float(np.sum(s.block_pmf() * e.grid))


def centered_function(e: TruthTableFunction, s: ProductSource) -> np.ndarray:
    """Real-valued version of ``e``: ``1 - q`` where ``e = 1`` and ``-q`` elsewhere.

    Returned on the ``(k,) * n`` grid.
    """
    q = one_probability(e, s)
    return np.where(e.grid == 1, 1.0 - q, -q)


def _marginalize(arr: np.ndarray, pmf: np.ndarray, axes: Iterable[int]) -> np.ndarray:
    """Average ``arr`` over ``axes`` (keeping them as length-1 axes) under ``pmf``."""
    for ax in sorted(axes, reverse=True):
        arr = np.tensordot(arr, pmf, axes=([ax], [0]))
        arr = np.expand_dims(arr, ax)
    return arr


def _conditional_expectation(etilde: np.ndarray, pmf: np.ndarray, mask: int, n: int) -> np.ndarray:
    """``E[etilde | X_S]`` in compact form over the coordinates of ``S``.

    Under a product source the conditional law of the complement does not
    depend on ``x_S``, so this is a weighted average over the other axes.
    Cells where ``P(x_S) = 0`` receive the same product-measure average,
    which keeps reconstruction exact on every input.
    """
    out_axes = [j for j in range(n) if not (mask >> j) & 1]
    return _marginalize(etilde, pmf, out_axes).reshape(
        (pmf.size,) * (n - len(out_axes))
    )


def _embed(compact: np.ndarray, sub: int, sup: int, n: int) -> np.ndarray:
    """Broadcastable view of a component on ``sub`` inside the compact grid of ``sup``."""
    sup_coords = mask_coordinates(sup, n)
    shape = [compact.shape[0] if (sub >> j) & 1 else 1 for j in sup_coords]
    return compact.reshape(shape) if shape else compact.reshape(())


def _submasks_strict(mask: int):
    sub = (mask - 1) & mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def _decompose_recursive(etilde, pmf, n):
    comps: dict[int, np.ndarray] = {}
    for mask in masks_by_popcount(n):
        cond = _conditional_expectation(etilde, pmf, mask, n)
        if mask:
            acc = np.zeros_like(cond)
            for sub in _submasks_strict(mask):
                acc = acc + _embed(comps[sub], sub, mask, n)
            cond = cond - acc
        comps[mask] = cond
    return comps


def _decompose_butterfly(etilde, pmf, n):
    # Per coordinate j split every partial table into its average over x_j
    # (coordinate dropped) and the residual (coordinate kept).
    parts = {0: etilde}
    for j in range(n):
        nxt = {}
        for mask, arr in parts.items():
            axis = sum(1 for c in range(j) if (mask >> c) & 1)
            mean = np.tensordot(arr, pmf, axes=([axis], [0]))
            nxt[mask] = mean
            nxt[mask | (1 << j)] = arr - np.expand_dims(mean, axis)
        parts = nxt
    return parts


def decompose(
    e: TruthTableFunction,
    s: ProductSource,
    method: str = "auto",
) -> list[RealComponentTable]:
    """Split the centered version of ``e`` into its ``2**n`` components.

    ``method="recursion"`` peels off conditional expectations over masks in
    increasing popcount order, subtracting every strict sub-mask component.
    ``method="butterfly"`` applies the per-coordinate mean/residual split
    and costs ``O(n (k+1)^n)``.  ``"auto"`` uses the recursion up to
    ``n = 10`` and the butterfly above.  Both return identical components
    up to rounding.
    """
    _check_compatible(e, s)
    if e.n > e.max_n:
        raise ResourceError(f"blocklength {e.n} exceeds the cap n <= {e.max_n}")
    etilde = centered_function(e, s)
    pmf = s.single_letter_pmf
    if method == "auto":
        method = "recursion" if e.n <= 10 else "butterfly"
    if method == "recursion":
        comps = _decompose_recursive(etilde, pmf, e.n)
    elif method == "butterfly":
        comps = _decompose_butterfly(etilde, pmf, e.n)
    else:
        raise StructuralError(f"unknown decomposition method {method!r}")
    k = e.alphabet_size
    return [RealComponentTable(m, e.n, k, np.asarray(comps[m], dtype=float)) for m in range(1 << e.n)]


def component_variance(comp: RealComponentTable, pmf: np.ndarray) -> float:
    k = len(comp.coordinates)
    if k == 0:
        return 0.0
    weights = np.ones(())
    for _ in range(k):
        weights = np.multiply.outer(weights, pmf)
    mean = float(np.sum(weights * comp.compact))
    second = float(np.sum(weights * comp.compact**2))
    return second - mean * mean


def dependency_spectrum(components: Sequence[RealComponentTable], s: ProductSource) -> DependencySpectrum:
    """Variance of every component under the product source."""
    if not components:
        raise StructuralError("no components given")
    n = components[0].n
    if n != s.n or len(components) != 1 << n:
        raise StructuralError(f"expected {1 << s.n} components of blocklength {s.n}")
    var = np.zeros(1 << n)
    for comp in components:
        var[comp.subset_mask] = component_variance(comp, s.single_letter_pmf)
    return DependencySpectrum(n, var)


def spectrum(e: TruthTableFunction, s: ProductSource, method: str = "auto") -> DependencySpectrum:
    return dependency_spectrum(decompose(e, s, method), s)


def spectrum_by_weight(spec: DependencySpectrum) -> np.ndarray:
    """Total variance at each Hamming weight ``0..n``."""
    return np.bincount(hamming_weights(spec.n), weights=spec.variances, minlength=spec.n + 1)


def walsh_spectrum(e: TruthTableFunction) -> DependencySpectrum:
    """Spectrum of a binary function under uniform bits via a fast Walsh-Hadamard transform.

    For uniform bits each component variance is the squared Fourier
    coefficient of the centered function.
    """
    if e.alphabet_size != 2:
        raise StructuralError("the Walsh path needs a binary alphabet")
    n = e.n
    f = e.table.astype(float)
    f = f - f.mean()
    # Table index has x_1 as most significant bit; reverse so bit j <-> coordinate j+1.
    order = np.array([int(format(i, f"0{n}b")[::-1], 2) for i in range(1 << n)])
    a = f[order]
    h = 1
    while h < a.size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1).reshape(-1)
        h *= 2
    coeffs = a / a.size
    return DependencySpectrum(n, coeffs**2)


# Canonical functions -------------------------------------------------------


def dictator(n: int, coordinate: int = 0) -> TruthTableFunction:
    return TruthTableFunction.from_callable(lambda x: x[coordinate], n)


def parity(n: int, coordinates: Sequence[int] | None = None, total: int | None = None) -> TruthTableFunction:
    """Parity of ``coordinates`` (default: all) on a block of length ``total`` (default ``n``)."""
    total = n if total is None else total
    coords = range(n) if coordinates is None else coordinates
    return TruthTableFunction.from_callable(lambda x: sum(x[c] for c in coords) % 2, total)


def majority(n: int) -> TruthTableFunction:
    return TruthTableFunction.from_callable(lambda x: int(2 * sum(x) > n), n)


def constant(n: int, value: int = 0, alphabet_size: int = 2) -> TruthTableFunction:
    return TruthTableFunction(n, alphabet_size, np.full(alphabet_size**n, value, dtype=np.int8))


def random_function(
    n: int,
    rng: np.random.Generator,
    alphabet_size: int = 2,
    balanced: bool = False,
) -> TruthTableFunction:
    size = alphabet_size**n
    if balanced:
        table = np.zeros(size, dtype=np.int8)
        table[rng.permutation(size)[: size // 2]] = 1
    else:
        table = rng.integers(0, 2, size=size, dtype=np.int8)
    return TruthTableFunction(n, alphabet_size, table)
