"""Encoder/decoder strategies for the first example channel.

All strategies share one time layout.  Users 1 and 3 send their own message
bits over ``x11``/``x33`` with a repetition code.  The helper inputs ``x12``
and ``x32`` carry information about the noise ``n_p`` that each helper
recovers from feedback (``z1 ^ x11`` at encoder 1, ``z3 ^ x33`` at encoder 3,
the latter equal to ``n_p ^ n_eps``).  What differs is how that recovered
noise is mapped onto ``x12``/``x32`` and how receiver 2 uses ``y2p``.
"""

from __future__ import annotations

import itertools
from math import comb
from dataclasses import dataclass, field

import numpy as np

from . import regions
from .corr_bounds import disagreement_probability_exact, disagreement_bounds
from .efron_decomp import ProductSource, TruthTableFunction, random_function, spectrum
from .errors import ConfigurationError, ResourceError, StructuralError
from .icfb_channels import EncoderInput, SessionResult
from .info_math import JointPMF, NoiseParams
from .maxcorr import hgr_maximal_correlation

# Inner codes ---------------------------------------------------------------


@dataclass(frozen=True)
class RepetitionCode:
    length: int

    def __post_init__(self):
        if self.length < 1 or self.length % 2 == 0:
            raise ConfigurationError("repetition length must be a positive odd integer")

    @property
    def k(self) -> int:
        return 1

    @property
    def n(self) -> int:
        return self.length

    def encode(self, bits: np.ndarray) -> np.ndarray:
        return np.repeat(np.asarray(bits, dtype=np.int8).reshape(-1, 1), self.length, axis=1)

    def decode(self, words: np.ndarray) -> np.ndarray:
        return (2 * np.asarray(words).sum(axis=1) > self.length).astype(np.int8).reshape(-1, 1)

    def bit_error(self, crossover: float) -> float:
        """Majority-decoding bit error over BSC(``crossover``)."""
        L = self.length
        return sum(comb(L, j) * crossover**j * (1 - crossover) ** (L - j) for j in range(L // 2 + 1, L + 1))


@dataclass(frozen=True)
class LinearBlockCode:
    """Binary linear code given by a ``k x n`` generator; minimum-distance decoding by table lookup."""

    generator: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=np.int8) % 2
        if g.ndim != 2 or g.shape[0] > 12:
            raise ConfigurationError("generator must be a k x n matrix with k <= 12")
        object.__setattr__(self, "generator", g)
        msgs = np.array(list(itertools.product((0, 1), repeat=g.shape[0])), dtype=np.int8)
        object.__setattr__(self, "_messages", msgs)
        object.__setattr__(self, "_codewords", (msgs.astype(np.int64) @ g) % 2)

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    def encode(self, bits: np.ndarray) -> np.ndarray:
        return ((np.asarray(bits, dtype=np.int64).reshape(-1, self.k) @ self.generator) % 2).astype(np.int8)

    def decode(self, words: np.ndarray) -> np.ndarray:
        words = np.asarray(words, dtype=np.int64).reshape(-1, self.n)
        dist = (words[:, None, :] != self._codewords[None, :, :]).sum(axis=2)
        return self._messages[np.argmin(dist, axis=1)]


HAMMING_7_4 = LinearBlockCode(
    np.array(
        [
            [1, 0, 0, 0, 1, 1, 0],
            [0, 1, 0, 0, 1, 0, 1],
            [0, 0, 1, 0, 0, 1, 1],
            [0, 0, 0, 1, 1, 1, 1],
        ]
    )
)


def inner_code(spec) -> RepetitionCode | LinearBlockCode:
    """``int`` -> repetition code of that length; ``"hamming74"`` -> the (7,4) Hamming code."""
    if isinstance(spec, (RepetitionCode, LinearBlockCode)):
        return spec
    if spec == "hamming74":
        return HAMMING_7_4
    return RepetitionCode(int(spec))


# Building blocks -------------------------------------------------------------


@dataclass(frozen=True)
class DirectLink:
    """User's own message over its direct input, repetition-coded in consecutive slots."""

    input_name: str
    output_name: str
    repetition: int = 1

    def bits(self, n_uses: int) -> int:
        return n_uses // self.repetition

    def symbol(self, t: int, n_uses: int, message: np.ndarray) -> np.ndarray:
        k = t // self.repetition
        if k < self.bits(n_uses):
            return message[:, k]
        return np.zeros(message.shape[0], dtype=np.int8)

    def decode(self, y: np.ndarray, n_uses: int) -> np.ndarray:
        K, L = self.bits(n_uses), self.repetition
        blocks = y[:, : K * L].reshape(y.shape[0], K, L)
        return (2 * blocks.sum(axis=2) > L).astype(np.int8)


def recovered_noise(user: int, view: EncoderInput) -> np.ndarray:
    """Noise estimates available to a helper before time ``t``, shape ``(batch, t)``."""
    if user == 1:
        return view.feedback["z1"] ^ view.past_inputs["x11"]
    if user == 3:
        return view.feedback["z3"] ^ view.past_inputs["x33"]
    raise StructuralError(f"user {user} has no feedback")


class _HelperEncoder:
    """Encoder for users 1 and 3: direct-link symbol plus a helper symbol."""

    def __init__(self, user, link, helper):
        self.user = user
        self.link = link
        self.helper = helper
        self.helper_name = "x12" if user == 1 else "x32"

    def encode(self, view: EncoderInput) -> dict:
        return {
            self.link.input_name: self.link.symbol(view.t, view.n_uses, view.message),
            self.helper_name: self.helper(self.user, view),
        }


class _LinkDecoder:
    def __init__(self, link):
        self.link = link

    def decode(self, outputs, n_uses):
        return self.link.decode(outputs[self.link.output_name], n_uses)


@dataclass
class Strategy:
    name: str
    encoders: dict
    decoders: dict
    links: dict
    data_layout: object
    params: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def message_bits(self, n_uses: int) -> dict:
        return {1: self.links[1].bits(n_uses), 2: self.data_layout.bits(n_uses), 3: self.links[3].bits(n_uses)}


def _user_links(direct_repetition: int):
    return {
        1: DirectLink("x11", "y1", direct_repetition),
        3: DirectLink("x33", "y3", direct_repetition),
    }


# Forwarding schemes (shared codebook and uncoded) --------------------------


@dataclass(frozen=True)
class ForwardingLayout:
    """Frames of ``code.n`` uses; the first ``code.k`` uses of frame ``f`` carry user-2
    data, and the ``n_p`` values of those uses are forwarded during frame ``f + 1``."""

    code: object

    def frames(self, n_uses: int) -> int:
        return n_uses // self.code.n

    def bits(self, n_uses: int) -> int:
        return self.code.k * max(self.frames(n_uses) - 1, 0)

    def data_slots(self, n_uses: int) -> np.ndarray:
        k, L = self.code.k, self.code.n
        return np.array([f * L + j for f in range(max(self.frames(n_uses) - 1, 0)) for j in range(k)], dtype=np.int64)

    def helper_symbol(self, user: int, view: EncoderInput) -> np.ndarray:
        k, L = self.code.k, self.code.n
        batch = view.message.shape[0]
        frame, offset = divmod(view.t, L)
        if frame == 0 or frame >= self.frames(view.n_uses):
            return np.zeros(batch, dtype=np.int8)
        noise = recovered_noise(user, view)
        source = noise[:, (frame - 1) * L : (frame - 1) * L + k]
        return self.code.encode(source)[:, offset]


class _ForwardingUser2Encoder:
    def __init__(self, layout):
        self.layout = layout

    def encode(self, view):
        k, L = self.layout.code.k, self.layout.code.n
        frame, offset = divmod(view.t, L)
        batch = view.message.shape[0]
        if offset < k and frame < self.layout.frames(view.n_uses) - 1:
            return {"x2": view.message[:, frame * k + offset]}
        return {"x2": np.zeros(batch, dtype=np.int8)}


class _ForwardingUser2Decoder:
    """Decode the forwarded noise stream from ``y2p``, then strip it from ``y2``."""

    def __init__(self, layout):
        self.layout = layout

    def estimate_forwarded(self, outputs, n_uses) -> np.ndarray:
        k, L = self.layout.code.k, self.layout.code.n
        frames = max(self.layout.frames(n_uses) - 1, 0)
        y2p = outputs["y2p"]
        if frames == 0:
            return np.zeros((y2p.shape[0], 0), dtype=np.int8)
        words = y2p[:, L : (frames + 1) * L].reshape(-1, L)
        return self.layout.code.decode(words).reshape(y2p.shape[0], frames * k)

    def decode(self, outputs, n_uses):
        slots = self.layout.data_slots(n_uses)
        return outputs["y2"][:, slots] ^ self.estimate_forwarded(outputs, n_uses)


def _forwarding_strategy(name, code, direct_repetition, params, metadata):
    layout = ForwardingLayout(code)
    links = _user_links(direct_repetition)
    return Strategy(
        name=name,
        encoders={
            1: _HelperEncoder(1, links[1], layout.helper_symbol),
            2: _ForwardingUser2Encoder(layout),
            3: _HelperEncoder(3, links[3], layout.helper_symbol),
        },
        decoders={1: _LinkDecoder(links[1]), 2: _ForwardingUser2Decoder(layout), 3: _LinkDecoder(links[3])},
        links=links,
        data_layout=layout,
        params=params,
        metadata=metadata,
    )


def scheme_shared_codebook(params: NoiseParams, inner=3, direct_repetition: int = 1) -> Strategy:
    """Encoders 1 and 3 forward ``n_p`` through the same inner code, so ``x12 == x32`` always.

    Receiver 2 decodes the forwarded stream over the effective BSC(delta) and
    removes it from ``y2``.  Requires ``epsilon = 0``.
    """
    if params.epsilon != 0.0:
        raise ConfigurationError("the shared-codebook scheme needs identical feedback noise (epsilon = 0)")
    code = inner_code(inner)
    meta = {"inner_code": _code_name(code), "eff_len_x12": 1.0, "eff_len_x32": 1.0}
    return _forwarding_strategy("shared", code, direct_repetition, _param_dict(params), meta)


def scheme_uncoded(params: NoiseParams, direct_repetition: int = 1) -> Strategy:
    """Each helper sends its latest recovered noise bit: ``x12[t] = n_p[t-1]`` at encoder 1,
    ``x32[t] = n_p[t-1] ^ n_eps[t-1]`` at encoder 3."""
    meta = {"inner_code": "uncoded", "eff_len_x12": 1.0, "eff_len_x32": 1.0}
    return _forwarding_strategy("uncoded", RepetitionCode(1), direct_repetition, _param_dict(params), meta)


def _code_name(code) -> str:
    if isinstance(code, RepetitionCode):
        return f"repetition-{code.length}"
    if code is HAMMING_7_4:
        return "hamming74"
    return f"linear-{code.n}-{code.k}"


def _param_dict(params: NoiseParams) -> dict:
    return {"p": params.p, "delta": params.delta, "epsilon": params.epsilon}


# Independent random functions ------------------------------------------------


@dataclass(frozen=True)
class WindowFunction:
    """Apply a truth table to the last ``n0`` recovered noise bits (zeros before time 0).

    Coordinate ``j + 1`` of the window is the estimate from use ``t - n0 + j``.
    """

    table: TruthTableFunction

    def __call__(self, user: int, view: EncoderInput) -> np.ndarray:
        n0 = self.table.n
        noise = recovered_noise(user, view)
        batch, t = noise.shape
        window = np.zeros((batch, n0), dtype=np.int64)
        take = min(n0, t)
        if take:
            window[:, n0 - take :] = noise[:, t - take :]
        index = np.zeros(batch, dtype=np.int64)
        for j in range(n0):
            index = index * 2 + window[:, j]
        return self.table.table[index]


class _UncodedUser2Encoder:
    def encode(self, view):
        return {"x2": view.message[:, view.t]}


class _UncodedUser2Decoder:
    def decode(self, outputs, n_uses):
        return outputs["y2"]


@dataclass(frozen=True)
class _AllSlots:
    def bits(self, n_uses: int) -> int:
        return n_uses


def noise_estimate_pair_pmf(p: float, epsilon: float) -> JointPMF:
    """Joint pmf of the two helpers' per-use noise estimates ``(n_p, n_p ^ n_eps)``."""
    return JointPMF(
        np.array(
            [
                [(1 - p) * (1 - epsilon), (1 - p) * epsilon],
                [p * epsilon, p * (1 - epsilon)],
            ]
        )
    )


MAX_WINDOW = 14


def scheme_independent_random(
    params: NoiseParams,
    seed1: int,
    seed3: int,
    n0: int,
    balanced: bool = False,
    direct_repetition: int = 1,
) -> Strategy:
    """Helpers map their last ``n0`` noise estimates through independently drawn random
    Boolean functions; receiver 2 ignores ``y2p``.

    ``metadata`` carries the dependency spectra of both functions under the
    Bernoulli(p) product source, the two-sided bounds on their disagreement
    and its exact steady-state value.
    """
    if n0 < 1:
        raise ConfigurationError("window length n0 must be positive")
    if n0 > MAX_WINDOW:
        raise ResourceError(f"window length {n0} exceeds the decomposition cap {MAX_WINDOW}")
    e = random_function(n0, np.random.default_rng(seed1), balanced=balanced)
    f = random_function(n0, np.random.default_rng(seed3), balanced=balanced)
    links = _user_links(direct_repetition)
    source = ProductSource.bernoulli(n0, params.p)
    spec_e, spec_f = spectrum(e, source), spectrum(f, source)
    pair = noise_estimate_pair_pmf(params.p, params.epsilon)
    psi = hgr_maximal_correlation(pair).psi
    sy = ProductSource(pair.marginal_y(), n0)
    spec_f_y = spectrum(f, sy)
    bounds = disagreement_bounds(spec_e, spec_f_y, psi)
    exact = disagreement_probability_exact(e, f, pair, n0)
    meta = {
        "n0": n0,
        "eff_len_x12": spec_e.effective_length,
        "eff_len_x32": spec_f.effective_length,
        "psi": psi,
        "steady_disagreement": exact,
        "disagreement_bounds": bounds.to_dict(),
    }
    return Strategy(
        name="independent",
        encoders={
            1: _HelperEncoder(1, links[1], WindowFunction(e)),
            2: _UncodedUser2Encoder(),
            3: _HelperEncoder(3, links[3], WindowFunction(f)),
        },
        decoders={1: _LinkDecoder(links[1]), 2: _UncodedUser2Decoder(), 3: _LinkDecoder(links[3])},
        links=links,
        data_layout=_AllSlots(),
        params={**_param_dict(params), "seed1": seed1, "seed3": seed3, "n0": n0, "balanced": balanced},
        metadata={**meta, "functions": (e, f), "spectra": (spec_e, spec_f)},
    )


# Fixed agreement patterns (for exact entropy checks) ------------------------


BASE_MAPS = ("constant0", "constant1", "last-bit", "parity-window", "random-window")


class _BaseMap:
    def __init__(self, kind: str, n0: int = 1, seed: int = 0):
        self.kind, self.n0 = kind, n0
        self.window = None
        if kind == "random-window":
            self.window = WindowFunction(random_function(n0, np.random.default_rng(seed)))

    def __call__(self, user, view):
        batch = view.message.shape[0]
        if self.kind in ("constant0", "constant1"):
            return np.full(batch, int(self.kind[-1]), dtype=np.int8)
        if self.window is not None:
            return self.window(user, view)
        noise = recovered_noise(user, view)
        if noise.shape[1] == 0:
            return np.zeros(batch, dtype=np.int8)
        if self.kind == "last-bit":
            return noise[:, -1]
        return (noise[:, -self.n0 :].sum(axis=1) % 2).astype(np.int8)


class _PatternHelperEncoder:
    """Helper whose direct input stays silent; encoder 3 flips the shared base map
    wherever the pattern asks for disagreement."""

    def __init__(self, user, base, pattern):
        self.user, self.base, self.pattern = user, base, pattern
        self.direct = "x11" if user == 1 else "x33"
        self.helper = "x12" if user == 1 else "x32"

    def encode(self, view):
        x = self.base(self.user, view)
        if self.user == 3 and not self.pattern[view.t]:
            x = x ^ 1
        return {self.direct: np.zeros(view.message.shape[0], dtype=np.int8), self.helper: x}


class _Silent:
    def __init__(self, name):
        self.name = name

    def encode(self, view):
        return {self.name: np.zeros(view.message.shape[0], dtype=np.int8)}


class _Nothing:
    def decode(self, outputs, n_uses):
        batch = next(iter(outputs.values())).shape[0] if outputs else 0
        return np.zeros((batch, 0), dtype=np.int8)


class _NoBits:
    def bits(self, n_uses: int) -> int:
        return 0


def scheme_agreement_pattern(pattern, base: str = "last-bit", n0: int = 1, seed: int = 0) -> Strategy:
    """Helpers forward ``base`` of their recovered noise; ``x32 = x12 ^ (1 - pattern[t])``.

    With ``epsilon = 0`` the indicator of ``x12 == x32`` equals ``pattern``
    on every run.  No user sends message bits.
    """
    if base not in BASE_MAPS:
        raise ConfigurationError(f"unknown base map {base!r}; choose from {BASE_MAPS}")
    pattern = tuple(int(b) for b in pattern)
    base_map = _BaseMap(base, n0, seed)
    return Strategy(
        name="pattern",
        encoders={
            1: _PatternHelperEncoder(1, base_map, pattern),
            2: _Silent("x2"),
            3: _PatternHelperEncoder(3, base_map, pattern),
        },
        decoders={1: _Nothing(), 2: _Nothing(), 3: _Nothing()},
        links={1: _NoBits(), 3: _NoBits()},
        data_layout=_NoBits(),
        params={"pattern": "".join(map(str, pattern)), "base": base, "n0": n0, "seed": seed},
    )


# Measurements ----------------------------------------------------------------


def forwarded_stream_error(result: SessionResult, strategy: Strategy) -> tuple[float, int]:
    """Bit error of receiver 2's estimate of the forwarded ``n_p`` values, and the bit count."""
    if not isinstance(strategy.data_layout, ForwardingLayout):
        raise StructuralError(f"strategy {strategy.name!r} does not forward a noise stream")
    n = result.n_uses
    outputs = {k: result.data[k] for k in ("y2", "y2p")}
    est = strategy.decoders[2].estimate_forwarded(outputs, n)
    truth = result.data["n_p"][:, strategy.data_layout.data_slots(n)]
    count = truth.size
    return (float(np.mean(est != truth)) if count else 0.0), count


@dataclass(frozen=True)
class AgreementReport:
    agreement: float
    half_width: float
    r2_bound: float  # outer bound at the measured agreement
    r2_bound_linear: float  # 1 - h(p) (1 - g) form


def measure_agreement_and_r2_bound(result: SessionResult, p: float, delta: float) -> AgreementReport:
    if result.agreement is None or "x12" not in result.data or "x32" not in result.data:
        raise StructuralError("session has no helper streams x12/x32")
    g = result.agreement.value
    return AgreementReport(
        g,
        result.agreement.half_width,
        float(regions.agreement_r2_bound(p, delta, g)),
        float(regions.linear_r2_bound(p, g)),
    )


def build(name: str, params: NoiseParams, **kw) -> Strategy:
    """Strategy factory used by the CLI."""
    if name == "shared":
        return scheme_shared_codebook(params, kw.get("inner", 3), kw.get("direct_repetition", 1))
    if name == "uncoded":
        return scheme_uncoded(params, kw.get("direct_repetition", 1))
    if name == "independent":
        return scheme_independent_random(
            params,
            kw.get("seed1", 1),
            kw.get("seed3", 2),
            kw.get("n0", 4),
            kw.get("balanced", True),
            kw.get("direct_repetition", 1),
        )
    raise ConfigurationError(f"unknown strategy {name!r}; choose from shared, uncoded, independent")
