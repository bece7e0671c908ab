"""Memoryless three-user interference channels with generalized feedback.

A :class:`ChannelKernel` is described structurally: named inputs grouped by
transmitter, named Bernoulli noise sources, and output/feedback equations
over them.  Every channel use draws fresh noise in the declared order, so
a kernel plus a seed fixes the whole run.

Two presets are provided.  :func:`example1` uses the helper-link equation

    y2p = x12 ^ n_delta ^ ((x12 ^ x32) & e)

verbatim; its remaining links are reconstructed so that the known rate
bounds come out (``1 - h(p)`` for user 1, ``1 - h(p*eps)`` for user 3, and
a user-2 link that becomes noiseless once ``n_p`` is known).  :func:`example2`
is a reconstruction throughout; see its docstring.

Sessions are vectorised over trials: encoders receive a batch of messages
and the batch of feedback prefixes ``z[:, :t]`` at time ``t``, never more.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol, Sequence

import numpy as np

from ._expr import CompiledExpr
from .errors import DomainError, ResourceError, StructuralError
from .info_math import NoiseParams, _check_probability

SCHEMA_VERSION = 1
MAX_EXACT_STATES = 2**26
USERS = (1, 2, 3)


@dataclass(frozen=True)
class NoiseSource:
    name: str
    p: float  # P(noise = 1)

    def __post_init__(self):
        _check_probability(self.p, self.name)

    @property
    def degenerate(self) -> bool:
        return self.p in (0.0, 1.0)


@dataclass(frozen=True)
class Equation:
    name: str
    alphabet: int
    expr: str
    party: int  # receiver index for outputs, transmitter index for feedback


@dataclass(frozen=True)
class ChannelKernel:
    name: str
    inputs: dict  # name -> alphabet size, in declaration order
    users: dict  # transmitter -> tuple of input names
    noises: tuple
    outputs: tuple
    feedback: tuple
    agreement_pair: tuple | None = None
    provenance: str = "user-defined"
    _compiled: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        users = {int(u): tuple(v) for u, v in self.users.items()}
        for u in USERS:
            users.setdefault(u, ())
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "noises", tuple(self.noises))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "feedback", tuple(self.feedback))
        declared = [n for names in users.values() for n in names]
        if sorted(declared) != sorted(self.inputs):
            raise StructuralError("every input must belong to exactly one transmitter")
        seen = set(self.inputs)
        noise_names = {s.name for s in self.noises}
        if len(noise_names) != len(self.noises) or noise_names & seen:
            raise StructuralError("noise names must be unique and distinct from inputs")
        seen |= noise_names
        compiled = {}
        for eq in self.outputs:
            compiled[eq.name] = self._compile(eq, seen)
            seen.add(eq.name)
        fb_scope = {e.name for e in self.outputs} | noise_names
        for eq in self.feedback:
            expr = self._compile(eq, seen)
            if not expr.names <= fb_scope:
                raise StructuralError(f"feedback {eq.name!r} may depend only on outputs and noise")
            compiled[eq.name] = expr
            seen.add(eq.name)
            fb_scope.add(eq.name)
        if self.agreement_pair is not None:
            a, b = self.agreement_pair
            if a not in self.inputs or b not in self.inputs:
                raise StructuralError(f"agreement pair {self.agreement_pair} names unknown inputs")
            object.__setattr__(self, "agreement_pair", (a, b))
        object.__setattr__(self, "_compiled", compiled)

    @staticmethod
    def _compile(eq: Equation, scope: set) -> CompiledExpr:
        if eq.name in scope:
            raise StructuralError(f"variable {eq.name!r} is defined twice")
        expr = CompiledExpr(eq.expr)
        unknown = expr.names - scope
        if unknown:
            raise StructuralError(f"equation for {eq.name!r} references undefined names {sorted(unknown)}")
        return expr

    def receiver_outputs(self, r: int) -> tuple:
        return tuple(e.name for e in self.outputs if e.party == r)

    def user_feedback(self, u: int) -> tuple:
        return tuple(e.name for e in self.feedback if e.party == u)

    @property
    def variable_names(self) -> tuple:
        return (
            tuple(self.inputs)
            + tuple(s.name for s in self.noises)
            + tuple(e.name for e in self.outputs)
            + tuple(e.name for e in self.feedback)
        )

    def check_inputs(self, inputs: dict, step: int | None = None):
        where = "" if step is None else f" at step {step}"
        for name, size in self.inputs.items():
            if name not in inputs:
                raise DomainError(f"missing input {name!r}{where}")
            arr = np.asarray(inputs[name])
            if np.any(arr < 0) or np.any(arr >= size):
                raise DomainError(f"input {name!r} left its alphabet {{0..{size - 1}}}{where}")

    def evaluate(self, inputs: dict, noise: dict) -> tuple[dict, dict]:
        """Outputs and feedback for given inputs and noise realizations (no sampling)."""
        env = {k: np.asarray(v, dtype=np.int64) for k, v in inputs.items()}
        env.update({k: np.asarray(v, dtype=np.int64) for k, v in noise.items()})
        outs, fbs = {}, {}
        for group, target in ((self.outputs, outs), (self.feedback, fbs)):
            for eq in group:
                val = np.asarray(self._compiled[eq.name](env), dtype=np.int64)
                if np.any(val < 0) or np.any(val >= eq.alphabet):
                    raise StructuralError(f"equation for {eq.name!r} left its alphabet {{0..{eq.alphabet - 1}}}")
                env[eq.name] = val
                target[eq.name] = val
        return outs, fbs

    def draw_noise(self, rng: np.random.Generator, size=None) -> dict:
        """One uniform per source per use, in declaration order."""
        return {s.name: (rng.random(size) < s.p).astype(np.int64) for s in self.noises}

    def transition_pmf(self, inputs: dict) -> dict:
        """Exact ``P(outputs, feedback | inputs)`` as a map from value tuples to probability.

        Keys follow ``output names + feedback names`` order.
        """
        self.check_inputs(inputs)
        table: dict = {}
        for bits in itertools.product((0, 1), repeat=len(self.noises)):
            prob = math.prod(s.p if b else 1.0 - s.p for s, b in zip(self.noises, bits))
            if prob == 0.0:
                continue
            outs, fbs = self.evaluate(inputs, {s.name: b for s, b in zip(self.noises, bits)})
            key = tuple(int(v) for v in outs.values()) + tuple(int(v) for v in fbs.values())
            table[key] = table.get(key, 0.0) + prob
        return table

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "provenance": self.provenance,
            "inputs": dict(self.inputs),
            "users": {str(u): list(v) for u, v in self.users.items()},
            "noises": [{"name": s.name, "p": s.p} for s in self.noises],
            "outputs": [{"name": e.name, "alphabet": e.alphabet, "expr": e.expr, "receiver": e.party} for e in self.outputs],
            "feedback": [{"name": e.name, "alphabet": e.alphabet, "expr": e.expr, "user": e.party} for e in self.feedback],
            "agreement_pair": list(self.agreement_pair) if self.agreement_pair else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelKernel":
        known = {"schema_version", "name", "provenance", "inputs", "users", "noises", "outputs", "feedback", "agreement_pair"}
        extra = set(data) - known
        if extra:
            raise StructuralError(f"unknown kernel fields {sorted(extra)}")
        for key in ("inputs", "users", "noises", "outputs"):
            if key not in data:
                raise StructuralError(f"kernel document is missing field '{key}'")
        if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise StructuralError(f"unsupported kernel schema_version {data['schema_version']!r}")
        try:
            return cls(
                name=data.get("name", "custom"),
                inputs={k: int(v) for k, v in data["inputs"].items()},
                users=data["users"],
                noises=[NoiseSource(s["name"], float(s["p"])) for s in data["noises"]],
                outputs=[Equation(e["name"], int(e["alphabet"]), e["expr"], int(e["receiver"])) for e in data["outputs"]],
                feedback=[Equation(e["name"], int(e["alphabet"]), e["expr"], int(e["user"])) for e in data.get("feedback", [])],
                agreement_pair=tuple(data["agreement_pair"]) if data.get("agreement_pair") else None,
                provenance=data.get("provenance", "user-defined"),
            )
        except KeyError as exc:
            raise StructuralError(f"kernel entry is missing field {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "ChannelKernel":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise StructuralError(f"kernel file is not valid JSON: {exc}") from None


def example1(params: NoiseParams) -> ChannelKernel:
    """First example channel.

    ``y2p`` is the defining helper-link relation.  The other links are chosen as
    ``y1 = x11 ^ n_p`` (user-1 bound ``1 - h(p)``; ``z1 = y1`` hands ``n_p`` to
    encoder 1), ``y2 = x2 ^ n_p`` (noiseless once ``n_p`` is stripped),
    ``y3 = x33 ^ n_p ^ n_eps`` (user-3 bound ``1 - h(p*eps)``).  One ``n_p``
    draw is shared by all links in a channel use.
    """
    return ChannelKernel(
        name="example1",
        inputs={"x11": 2, "x12": 2, "x2": 2, "x32": 2, "x33": 2},
        users={1: ("x11", "x12"), 2: ("x2",), 3: ("x32", "x33")},
        noises=(
            NoiseSource("n_p", params.p),
            NoiseSource("n_delta", params.delta),
            NoiseSource("e", 0.5),
            NoiseSource("n_eps", params.epsilon),
        ),
        outputs=(
            Equation("y1", 2, "x11 ^ n_p", 1),
            Equation("y2", 2, "x2 ^ n_p", 2),
            Equation("y2p", 2, "x12 ^ n_delta ^ ((x12 ^ x32) & e)", 2),
            Equation("y3", 2, "x33 ^ n_p ^ n_eps", 3),
        ),
        feedback=(Equation("z1", 2, "y1", 1), Equation("z3", 2, "y3", 3)),
        agreement_pair=("x12", "x32"),
        provenance="y2p given; y1, y2, y3 reconstructed",
    )


def example2(params: NoiseParams) -> ChannelKernel:
    """Second example channel, reconstructed from the achievability argument.

    Only the structure the argument needs is modelled: ``y1 = x11 + e`` is
    ternary and its noisy feedback ``z1 = (y1 + n_eps) % 3`` reveals ``e`` to
    encoder 1 when ``eps = 0``; encoder 3 learns ``n_delta`` from ``y3`` and
    ``e`` from ``y3p``; the helper links reach receiver 2 through BSC(p1) and
    BSC(p3); receiver 2 must strip ``e ^ n_delta`` from ``y2``.  The
    user-1 rate of this reconstruction is not calibrated against any
    reference value.
    """
    params.require_example2()
    return ChannelKernel(
        name="example2",
        inputs={"x11": 2, "x12": 2, "x2": 2, "x32": 2, "x33": 2, "x33p": 2},
        users={1: ("x11", "x12"), 2: ("x2",), 3: ("x32", "x33", "x33p")},
        noises=(
            NoiseSource("n_delta", params.delta),
            NoiseSource("e", 0.5),
            NoiseSource("n_eps", params.epsilon),
            NoiseSource("n1", params.p1),
            NoiseSource("n3", params.p3),
        ),
        outputs=(
            Equation("y1", 3, "x11 + e", 1),
            Equation("y2", 2, "x2 ^ e ^ n_delta", 2),
            Equation("y2a", 2, "x12 ^ n1", 2),
            Equation("y2b", 2, "x32 ^ n3", 2),
            Equation("y3", 2, "x33 ^ n_delta", 3),
            Equation("y3p", 2, "x33p ^ e", 3),
        ),
        feedback=(
            Equation("z1", 3, "(y1 + n_eps) % 3", 1),
            Equation("z3", 2, "y3", 3),
            Equation("z3p", 2, "y3p", 3),
        ),
        agreement_pair=("x12", "x32"),
        provenance="reconstruction",
    )


PRESETS = {"example1": example1, "example2": example2}


def preset(name: str, params: NoiseParams) -> ChannelKernel:
    try:
        return PRESETS[name](params)
    except KeyError:
        raise StructuralError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def step(kernel: ChannelKernel, inputs: dict, rng: np.random.Generator) -> tuple[dict, dict, dict]:
    """One channel use: returns ``(outputs, feedback, noise)``.

    Inputs may be scalars or equally shaped arrays (a batch of uses).
    """
    kernel.check_inputs(inputs)
    shape = np.shape(next(iter(inputs.values()))) if inputs else ()
    noise = kernel.draw_noise(rng, shape or None)
    outs, fbs = kernel.evaluate(inputs, noise)
    return outs, fbs, noise


# Encoders, decoders and sessions ------------------------------------------


class EncoderInput(NamedTuple):
    t: int  # 0-based channel use
    n_uses: int
    message: np.ndarray  # (batch, message_bits)
    feedback: dict  # name -> (batch, t): feedback strictly before t
    past_inputs: dict  # name -> (batch, t): own inputs strictly before t


class Encoder(Protocol):
    def encode(self, view: EncoderInput) -> dict: ...


class Decoder(Protocol):
    def decode(self, outputs: dict, n_uses: int) -> np.ndarray: ...


class StrategyLike(Protocol):
    encoders: dict
    decoders: dict

    def message_bits(self, n_uses: int) -> dict: ...


@dataclass
class Estimate:
    value: float
    half_width: float

    def to_dict(self):
        return {"value": self.value, "half_width": self.half_width}


def binomial_half_width(rate: float, count: int, z: float = 1.96) -> float:
    if count <= 0:
        return float("nan")
    return z * math.sqrt(max(rate * (1.0 - rate), 0.0) / count)


@dataclass
class TranscriptRecord:
    trial: int
    steps: list  # per use: {"inputs": {...}, "noise": {...}, "outputs": {...}, "feedback": {...}}
    messages: dict  # user -> tuple of bits
    decoded: dict | None


@dataclass
class SessionResult:
    kernel_name: str
    n_uses: int
    trials: int
    seed: int
    message_bits: dict
    error_rate: Estimate  # P_e over all three users
    user_error_rates: dict  # user -> Estimate
    agreement: Estimate | None
    agreement_by_time: np.ndarray | None
    data: dict  # variable name -> (trials, n_uses) int8
    messages: dict  # user -> (trials, bits) int8
    decoded: dict  # user -> (trials, bits) int8
    groups: dict = field(default_factory=dict)

    def transcript(self, trial: int) -> TranscriptRecord:
        steps = []
        for t in range(self.n_uses):
            steps.append({g: {k: int(self.data[k][trial, t]) for k in names} for g, names in self.groups.items()})
        msgs = {u: tuple(int(b) for b in self.messages[u][trial]) for u in USERS}
        dec = {u: tuple(int(b) for b in self.decoded[u][trial]) for u in USERS}
        return TranscriptRecord(trial, steps, msgs, dec)

    def transcripts_csv(self, max_trials: int | None = None) -> str:
        names = [k for g in ("inputs", "noise", "outputs", "feedback") for k in self.groups.get(g, ())]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "t", *names])
        count = self.trials if max_trials is None else min(self.trials, max_trials)
        for i in range(count):
            for t in range(self.n_uses):
                w.writerow([i, t, *(int(self.data[k][i, t]) for k in names)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "kernel": self.kernel_name,
            "n_uses": self.n_uses,
            "trials": self.trials,
            "seed": self.seed,
            "message_bits": {str(u): b for u, b in self.message_bits.items()},
            "rates": {str(u): b / self.n_uses for u, b in self.message_bits.items()},
            "error_rate": self.error_rate.to_dict(),
            "user_error_rates": {str(u): e.to_dict() for u, e in self.user_error_rates.items()},
            "agreement": None if self.agreement is None else self.agreement.to_dict(),
        }


def _check_encoder_output(kernel, user, out, t, batch):
    names = kernel.users[user]
    if set(out) != set(names):
        raise StructuralError(f"encoder {user} returned {sorted(out)} at step {t}, expected {sorted(names)}")
    clean = {}
    for name in names:
        arr = np.broadcast_to(np.asarray(out[name], dtype=np.int64), (batch,))
        size = kernel.inputs[name]
        if np.any(arr < 0) or np.any(arr >= size):
            raise DomainError(f"encoder {user} emitted a symbol outside {{0..{size - 1}}} for {name!r}; aborted at step {t}")
        clean[name] = arr
    return clean


def _run_batch(kernel, strategy, n_uses, batch, rng):
    bits = strategy.message_bits(n_uses)
    msgs = {u: rng.integers(0, 2, size=(batch, bits[u]), dtype=np.int8) for u in USERS}
    data = {name: np.zeros((batch, n_uses), dtype=np.int8) for name in kernel.variable_names}
    fb_names = {u: kernel.user_feedback(u) for u in USERS}
    for t in range(n_uses):
        inputs = {}
        for u in USERS:
            view = EncoderInput(
                t,
                n_uses,
                msgs[u],
                {k: data[k][:, :t] for k in fb_names[u]},
                {k: data[k][:, :t] for k in kernel.users[u]},
            )
            inputs.update(_check_encoder_output(kernel, u, strategy.encoders[u].encode(view), t, batch))
        noise = kernel.draw_noise(rng, batch)
        outs, fbs = kernel.evaluate(inputs, noise)
        for group in (inputs, noise, outs, fbs):
            for k, v in group.items():
                data[k][:, t] = v
    decoded = {}
    for u in USERS:
        outputs = {k: data[k] for k in kernel.receiver_outputs(u)}
        est = np.asarray(strategy.decoders[u].decode(outputs, n_uses), dtype=np.int8).reshape(batch, bits[u])
        decoded[u] = est
    return data, msgs, decoded


def run_session(
    kernel: ChannelKernel,
    strategy: StrategyLike,
    n_uses: int,
    trials: int,
    seed: int,
    batch_size: int = 10000,
    z: float = 1.96,
) -> SessionResult:
    """Monte Carlo estimate of the block error rate and the helper-agreement statistic.

    Trials run in batches; batch ``b`` draws from ``SeedSequence([seed, b])``,
    so the outcome depends only on ``(seed, batch_size)`` and the configuration.
    Half-widths are normal-approximation intervals at ``z``; the agreement
    interval uses the spread of per-trial averages.
    """
    if n_uses < 1 or trials < 1:
        raise DomainError("n_uses and trials must be positive")
    pieces = []
    for b, start in enumerate(range(0, trials, batch_size)):
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        pieces.append(_run_batch(kernel, strategy, n_uses, min(batch_size, trials - start), rng))
    data = {k: np.concatenate([p[0][k] for p in pieces]) for k in pieces[0][0]}
    msgs = {u: np.concatenate([p[1][u] for p in pieces]) for u in USERS}
    decoded = {u: np.concatenate([p[2][u] for p in pieces]) for u in USERS}

    wrong = {u: np.any(msgs[u] != decoded[u], axis=1) for u in USERS}
    any_wrong = wrong[1] | wrong[2] | wrong[3]
    pe = float(any_wrong.mean())
    user_rates = {u: Estimate(float(wrong[u].mean()), binomial_half_width(float(wrong[u].mean()), trials, z)) for u in USERS}

    agreement = by_time = None
    if kernel.agreement_pair is not None:
        a, b = kernel.agreement_pair
        same = data[a] == data[b]
        per_trial = same.mean(axis=1)
        by_time = same.mean(axis=0)
        g = float(per_trial.mean())
        spread = float(per_trial.std(ddof=1)) if trials > 1 else 0.0
        agreement = Estimate(g, z * spread / math.sqrt(trials))

    groups = {
        "inputs": tuple(kernel.inputs),
        "noise": tuple(s.name for s in kernel.noises),
        "outputs": tuple(e.name for e in kernel.outputs),
        "feedback": tuple(e.name for e in kernel.feedback),
    }
    return SessionResult(
        kernel.name,
        n_uses,
        trials,
        seed,
        strategy.message_bits(n_uses),
        Estimate(pe, binomial_half_width(pe, trials, z)),
        user_rates,
        agreement,
        by_time,
        data,
        msgs,
        decoded,
        groups,
    )


# Exact enumeration ----------------------------------------------------------


@dataclass
class ExactJoint:
    """Exact joint pmf over named columns; each row of ``states`` is one outcome."""

    names: list
    states: np.ndarray  # (rows, columns) int8
    probs: np.ndarray  # (rows,)

    def __post_init__(self):
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-10:
            raise StructuralError(f"exact joint sums to {total!r}")

    def resolve(self, spec) -> list[int]:
        """Column indices for a variable spec.

        ``"n_p"`` selects every ``n_p[t]``; ``"n_p[3]"`` a single column.
        A list of specs selects their union, in order, without repeats.
        """
        specs = [spec] if isinstance(spec, str) else list(spec)
        idx = []
        for s in specs:
            if "[" in s:
                hits = [i for i, n in enumerate(self.names) if n == s]
            else:
                hits = [i for i, n in enumerate(self.names) if n == s or n.startswith(s + "[")]
            if not hits:
                raise StructuralError(f"unknown variable {s!r}")
            idx.extend(i for i in hits if i not in idx)
        return idx

    def marginal(self, columns: Sequence[int]) -> np.ndarray:
        """Probabilities of the distinct value patterns on ``columns``."""
        if not columns:
            return np.array([1.0])
        _, inv = _unique_rows(self.states[:, list(columns)])
        return np.bincount(inv, weights=self.probs)


def _unique_rows(rows: np.ndarray):
    rows = np.ascontiguousarray(rows, dtype=np.int8)
    if rows.shape[1] == 0:
        return rows[:1], np.zeros(rows.shape[0], dtype=np.int64)
    view = rows.view(np.dtype((np.void, rows.shape[1])))
    _, first, inv = np.unique(view.ravel(), return_index=True, return_inverse=True)
    return rows[first], inv.ravel()


def _merge(cols: list[np.ndarray], probs: np.ndarray):
    mat = np.stack(cols, axis=1) if cols else np.zeros((probs.size, 0), dtype=np.int8)
    uniq, inv = _unique_rows(mat)
    return uniq, np.bincount(inv, weights=probs, minlength=uniq.shape[0])


def exact_output_distribution(
    kernel: ChannelKernel,
    strategy: StrategyLike,
    n_uses: int,
    messages: dict | None = None,
    keep: Sequence[str] | None = None,
    cap: int = MAX_EXACT_STATES,
) -> ExactJoint:
    """Exact joint pmf of a session by enumerating every noise realization.

    Encoders must be deterministic given message and feedback.  ``messages``
    maps each user to a list of candidate bit-vectors drawn uniformly
    (default: the single all-zero message).  ``keep`` names the variables
    retained in the result (default: all); outcomes agreeing on the kept
    columns and on everything the encoders still need are merged as the
    enumeration advances.  The number of noise realizations enumerated,
    times the number of message combinations, must not exceed ``cap``.
    """
    bits = strategy.message_bits(n_uses)
    if messages is None:
        messages = {u: [np.zeros(bits[u], dtype=np.int8)] for u in USERS}
    cands = {u: [np.asarray(m, dtype=np.int8).reshape(bits[u]) for m in messages[u]] for u in USERS}
    live = [s for s in kernel.noises if not s.degenerate]
    fixed = {s.name: int(s.p == 1.0) for s in kernel.noises if s.degenerate}
    n_msg = math.prod(len(cands[u]) for u in USERS)
    log_states = math.log2(n_msg) + len(live) * n_uses
    if log_states > math.log2(cap):
        raise ResourceError(
            f"exact enumeration needs 2^{log_states:.1f} noise/message states, above the cap 2^{math.log2(cap):.0f}"
        )
    keep = list(kernel.variable_names if keep is None else keep)
    unknown = set(keep) - set(kernel.variable_names)
    if unknown:
        raise StructuralError(f"cannot keep unknown variables {sorted(unknown)}")

    # Messages enumerated up front, one row each.
    combos = list(itertools.product(*(range(len(cands[u])) for u in USERS)))
    msg_rows = {u: np.stack([cands[u][c[i]] for c in combos]) for i, u in enumerate(USERS)}
    probs = np.full(len(combos), 1.0 / len(combos))
    hist = {name: np.zeros((len(combos), 0), dtype=np.int8) for name in kernel.variable_names}
    tracked = set(keep) | set(kernel.inputs) | {e.name for e in kernel.feedback}
    noise_grid = np.array(list(itertools.product((0, 1), repeat=len(live))), dtype=np.int64).reshape(-1, len(live))
    noise_prob = np.array(
        [math.prod(s.p if b else 1.0 - s.p for s, b in zip(live, row)) for row in noise_grid]
    )

    for t in range(n_uses):
        rows = probs.size
        inputs = {}
        for u in USERS:
            view = EncoderInput(
                t,
                n_uses,
                msg_rows[u],
                {k: hist[k] for k in kernel.user_feedback(u)},
                {k: hist[k] for k in kernel.users[u]},
            )
            inputs.update(_check_encoder_output(kernel, u, strategy.encoders[u].encode(view), t, rows))
        # Expand each state by every live noise pattern.
        rep = noise_grid.shape[0]
        inputs = {k: np.repeat(v, rep) for k, v in inputs.items()}
        noise = {s.name: np.tile(noise_grid[:, i], rows) for i, s in enumerate(live)}
        noise.update({k: np.full(rows * rep, v, dtype=np.int64) for k, v in fixed.items()})
        outs, fbs = kernel.evaluate(inputs, noise)
        probs = np.repeat(probs, rep) * np.tile(noise_prob, rows)
        msg_rows = {u: np.repeat(m, rep, axis=0) for u, m in msg_rows.items()}
        current = {**inputs, **noise, **outs, **fbs}
        hist = {
            k: np.concatenate([np.repeat(h, rep, axis=0), current[k].astype(np.int8)[:, None]], axis=1)
            for k, h in hist.items()
            if k in tracked
        }
        # Merge rows that agree on everything still relevant.
        order = [k for k in kernel.variable_names if k in hist]
        cols = [msg_rows[u][:, j] for u in USERS for j in range(msg_rows[u].shape[1])]
        cols += [hist[k][:, j] for k in order for j in range(t + 1)]
        nonzero = probs > 0.0
        cols = [np.asarray(c[nonzero], dtype=np.int8) for c in cols]
        uniq, probs = _merge(cols, probs[nonzero])
        pos = 0
        for u in USERS:
            width = msg_rows[u].shape[1]
            msg_rows[u] = uniq[:, pos : pos + width]
            pos += width
        for k in order:
            hist[k] = uniq[:, pos : pos + t + 1]
            pos += t + 1

    names, cols = [], []
    for k in keep:
        for t in range(n_uses):
            names.append(f"{k}[{t}]")
            cols.append(hist[k][:, t])
    msg_names = [f"w{u}[{j}]" for u in USERS for j in range(msg_rows[u].shape[1]) if len(cands[u]) > 1]
    msg_cols = [msg_rows[u][:, j] for u in USERS for j in range(msg_rows[u].shape[1]) if len(cands[u]) > 1]
    states, probs = _merge(msg_cols + cols, probs)
    return ExactJoint(msg_names + names, states, probs)
