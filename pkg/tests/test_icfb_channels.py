import json
from dataclasses import dataclass, field

import numpy as np
import pytest

from efflen._expr import CompiledExpr
from efflen.errors import DomainError, ResourceError, StructuralError
from efflen.icfb_channels import (
    ChannelKernel,
    Equation,
    NoiseSource,
    example1,
    example2,
    exact_output_distribution,
    preset,
    run_session,
    step,
)
from efflen.info_math import NoiseParams
from efflen.strategies import scheme_uncoded


@dataclass
class Plain:
    """Minimal strategy: per-user encoder callables, zero-bit messages."""

    encoders: dict
    decoders: dict = field(default_factory=dict)
    bits: dict = field(default_factory=lambda: {1: 0, 2: 0, 3: 0})

    def __post_init__(self):
        for u in (1, 2, 3):
            self.decoders.setdefault(u, _NoDecode(self.bits[u]))

    def message_bits(self, n_uses):
        return dict(self.bits)


class _NoDecode:
    def __init__(self, bits):
        self.bits = bits

    def decode(self, outputs, n_uses):
        batch = next(iter(outputs.values())).shape[0] if outputs else 0
        return np.zeros((batch, self.bits), dtype=np.int8)


class Fn:
    def __init__(self, fn):
        self.fn = fn

    def encode(self, view):
        return self.fn(view)


def zeros(*names):
    return Fn(lambda v: {k: np.zeros(v.message.shape[0], dtype=np.int8) for k in names})


def tiny_kernel(p=0.3):
    """One binary input at user 1 seen through BSC(p) by receiver 2; user 1 gets the output back."""
    return ChannelKernel(
        name="tiny",
        inputs={"x": 2},
        users={1: ("x",)},
        noises=(NoiseSource("n", p),),
        outputs=(Equation("y", 2, "x ^ n", 2),),
        feedback=(Equation("z", 2, "y", 1),),
    )


# Expressions and kernel validation -------------------------------------------


@pytest.mark.parametrize(
    "src",
    ["__import__('os')", "x.real", "f(x)", "x if y else z", "1.5 * x", "[x]", "lambda: 1", "x < y", "'a'"],
)
def test_expression_whitelist_rejects(src):
    with pytest.raises(StructuralError):
        CompiledExpr(src)


def test_expression_evaluates_elementwise():
    expr = CompiledExpr("(a + b) % 3 ^ (c & 1)")
    out = expr({"a": np.array([1, 2]), "b": np.array([2, 2]), "c": np.array([1, 0])})
    assert out.tolist() == [1, 1]
    with pytest.raises(StructuralError):
        expr({"a": 1})


def test_feedback_may_not_read_inputs():
    with pytest.raises(StructuralError, match="feedback"):
        ChannelKernel(
            name="bad",
            inputs={"x": 2},
            users={1: ("x",)},
            noises=(),
            outputs=(Equation("y", 2, "x", 2),),
            feedback=(Equation("z", 2, "x", 1),),
        )


def test_undefined_and_duplicate_names_rejected():
    with pytest.raises(StructuralError, match="undefined"):
        ChannelKernel("bad", {"x": 2}, {1: ("x",)}, (), (Equation("y", 2, "x ^ w", 2),), ())
    with pytest.raises(StructuralError, match="twice"):
        ChannelKernel("bad", {"x": 2}, {1: ("x",)}, (), (Equation("x", 2, "x", 2),), ())
    with pytest.raises(StructuralError):
        ChannelKernel("bad", {"x": 2}, {}, (), (), ())


def test_equation_leaving_alphabet_is_caught():
    k = ChannelKernel("bad", {"x": 2}, {1: ("x",)}, (), (Equation("y", 2, "x + 1", 2),), ())
    with pytest.raises(StructuralError, match="alphabet"):
        k.evaluate({"x": np.array([1])}, {})


def test_kernel_round_trip_and_strict_parsing():
    k = example1(NoiseParams(0.1, 0.2, 0.05))
    doc = json.dumps(k.to_dict())
    again = ChannelKernel.from_json(doc)
    assert again.to_dict() == k.to_dict()
    bad = k.to_dict()
    bad["colour"] = "red"
    with pytest.raises(StructuralError, match="colour"):
        ChannelKernel.from_dict(bad)
    missing = k.to_dict()
    del missing["noises"]
    with pytest.raises(StructuralError, match="noises"):
        ChannelKernel.from_dict(missing)
    with pytest.raises(StructuralError):
        ChannelKernel.from_json("{oops")


def test_presets():
    params = NoiseParams(0.1, 0.2, 0.0, 0.1, 0.2)
    assert preset("example1", params).name == "example1"
    assert preset("example2", params).provenance == "reconstruction"
    with pytest.raises(StructuralError):
        preset("example3", params)
    with pytest.raises(DomainError):
        example2(NoiseParams(p1=0.6))


# Single-use behaviour --------------------------------------------------------


def test_example1_transition_rows():
    k = example1(NoiseParams(0.1, 0.2, 0.0))
    inputs = {"x11": 0, "x12": 1, "x2": 0, "x32": 1, "x33": 0}
    table = k.transition_pmf(inputs)
    assert sum(table.values()) == pytest.approx(1.0, abs=1e-15)
    # agreeing helpers: y2p = 1 ^ n_delta, independent of e
    names = [e.name for e in k.outputs] + [e.name for e in k.feedback]
    i = names.index("y2p")
    p_y2p_one = sum(v for key, v in table.items() if key[i] == 1)
    assert p_y2p_one == pytest.approx(0.8, abs=1e-15)
    # disagreeing helpers: y2p is a fair coin
    table = k.transition_pmf({**inputs, "x32": 0})
    assert sum(v for key, v in table.items() if key[i] == 1) == pytest.approx(0.5, abs=1e-15)


def test_example2_feedback_reveals_shared_noise():
    k = example2(NoiseParams(0.0, 0.1, 0.0, 0.1, 0.2))
    x = {n: np.zeros(8, dtype=np.int64) for n in k.inputs}
    x["x11"] = np.array([0, 1] * 4)
    noise = {"n_delta": np.zeros(8), "e": np.array([0, 0, 1, 1] * 2), "n_eps": np.zeros(8), "n1": np.zeros(8), "n3": np.zeros(8)}
    outs, fbs = k.evaluate(x, noise)
    assert np.array_equal(fbs["z1"] - x["x11"], noise["e"])
    assert np.array_equal(fbs["z3p"], noise["e"])


def test_noise_frequencies():
    k = example1(NoiseParams(0.1, 0.3, 0.05))
    rng = np.random.default_rng(0)
    m = 200_000
    noise = k.draw_noise(rng, m)
    for src in k.noises:
        sigma = np.sqrt(src.p * (1 - src.p) / m)
        assert abs(noise[src.name].mean() - src.p) <= 5 * sigma + 1e-12


def test_step_checks_inputs():
    k = tiny_kernel()
    rng = np.random.default_rng(0)
    outs, fbs, noise = step(k, {"x": np.array([0, 1, 1])}, rng)
    assert np.array_equal(outs["y"], np.array([0, 1, 1]) ^ noise["n"])
    with pytest.raises(DomainError):
        step(k, {"x": np.array([2])}, rng)


# Sessions --------------------------------------------------------------------


def test_encoders_only_see_the_past():
    seen = []

    def enc(view):
        seen.append((view.t, view.feedback["z"].shape[1], view.past_inputs["x"].shape[1]))
        # echo the last feedback bit
        fb = view.feedback["z"]
        return {"x": fb[:, -1] if view.t else np.ones(view.message.shape[0], dtype=np.int8)}

    res = run_session(tiny_kernel(0.3), Plain({1: Fn(enc), 2: zeros(), 3: zeros()}), 6, 50, seed=1)
    assert seen == [(t, t, t) for t in range(6)]
    # the echo makes x[t] = y[t-1]
    assert np.array_equal(res.data["x"][:, 1:], res.data["y"][:, :-1])


def test_out_of_alphabet_encoder_output_aborts_with_step():
    bad = Fn(lambda v: {"x": np.full(v.message.shape[0], 2 if v.t == 3 else 0)})
    with pytest.raises(DomainError, match="step 3"):
        run_session(tiny_kernel(), Plain({1: bad, 2: zeros(), 3: zeros()}), 5, 10, seed=0)


def test_missing_encoder_output_rejected():
    with pytest.raises(StructuralError):
        run_session(tiny_kernel(), Plain({1: zeros(), 2: zeros(), 3: zeros("x")}), 2, 4, seed=0)


def test_sessions_are_reproducible():
    params = NoiseParams(0.1, 0.1, 0.05)
    k, s = example1(params), scheme_uncoded(params)
    a = run_session(k, s, 12, 3000, seed=5, batch_size=1000)
    b = run_session(k, s, 12, 3000, seed=5, batch_size=1000)
    c = run_session(k, s, 12, 3000, seed=6, batch_size=1000)
    for name in a.data:
        assert np.array_equal(a.data[name], b.data[name])
    assert a.summary() == b.summary()
    assert not np.array_equal(a.data["n_p"], c.data["n_p"])


def test_transcripts_and_summary():
    params = NoiseParams(0.1, 0.1, 0.0)
    res = run_session(example1(params), scheme_uncoded(params), 4, 20, seed=0)
    rec = res.transcript(3)
    assert len(rec.steps) == 4
    assert rec.steps[0]["noise"]["n_p"] == int(res.data["n_p"][3, 0])
    lines = res.transcripts_csv(max_trials=2).splitlines()
    assert lines[0].startswith("trial,t,x11")
    assert len(lines) == 1 + 2 * 4
    assert res.summary()["agreement"]["value"] == 1.0


# Exact enumeration -----------------------------------------------------------


def test_hand_enumerated_two_use_table():
    p = 0.3
    echo = Fn(lambda v: {"x": v.feedback["z"][:, -1] if v.t else np.zeros(v.message.shape[0], dtype=np.int8)})
    joint = exact_output_distribution(tiny_kernel(p), Plain({1: echo, 2: zeros(), 3: zeros()}), 2, keep=["y"])
    assert joint.names == ["y[0]", "y[1]"]
    got = {tuple(int(v) for v in row): pr for row, pr in zip(joint.states, joint.probs)}
    # y0 = n0; x1 = y0; y1 = y0 ^ n1
    want = {
        (0, 0): (1 - p) * (1 - p),
        (0, 1): (1 - p) * p,
        (1, 1): p * (1 - p),
        (1, 0): p * p,
    }
    assert got.keys() == want.keys()
    for key in want:
        assert got[key] == pytest.approx(want[key], abs=1e-15)


def test_exact_distribution_matches_monte_carlo():
    params = NoiseParams(0.2, 0.1, 0.0)
    k, s = example1(params), scheme_uncoded(params)
    n = 3
    joint = exact_output_distribution(k, s, n, keep=["n_p", "y2p"])
    res = run_session(k, s, n, 100_000, seed=11)
    cols = [res.data["n_p"][:, t] for t in range(n)] + [res.data["y2p"][:, t] for t in range(n)]
    sample = np.stack(cols, axis=1)
    for row, pr in zip(joint.states, joint.probs):
        freq = np.mean(np.all(sample == row, axis=1))
        assert abs(freq - pr) <= 5 * np.sqrt(pr * (1 - pr) / 100_000) + 1e-4


def test_exact_distribution_bookkeeping():
    params = NoiseParams(0.2, 0.1, 0.0)
    joint = exact_output_distribution(example1(params), scheme_uncoded(params), 2)
    assert joint.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert joint.resolve("n_p") == [joint.names.index("n_p[0]"), joint.names.index("n_p[1]")]
    with pytest.raises(StructuralError):
        joint.resolve("nope")
    with pytest.raises(StructuralError):
        exact_output_distribution(example1(params), scheme_uncoded(params), 2, keep=["nope"])


def test_exact_distribution_cap():
    params = NoiseParams(0.2, 0.1, 0.05)
    with pytest.raises(ResourceError):
        exact_output_distribution(example1(params), scheme_uncoded(params), 7)
    with pytest.raises(ResourceError):
        exact_output_distribution(example1(params), scheme_uncoded(params), 3, cap=2**10)
