import numpy as np
import pytest

from efflen import regions
from efflen.errors import ConfigurationError, StructuralError
from efflen.icfb_channels import example1, run_session
from efflen.info_math import NoiseParams
from efflen.strategies import (
    HAMMING_7_4,
    RepetitionCode,
    build,
    forwarded_stream_error,
    inner_code,
    measure_agreement_and_r2_bound,
    scheme_agreement_pattern,
    scheme_independent_random,
    scheme_shared_codebook,
    scheme_uncoded,
)


def test_repetition_code_round_trip_and_error():
    code = RepetitionCode(3)
    bits = np.array([0, 1, 1])
    words = code.encode(bits)
    assert words.tolist() == [[0, 0, 0], [1, 1, 1], [1, 1, 1]]
    words[1, 0] ^= 1
    assert code.decode(words).ravel().tolist() == [0, 1, 1]
    assert code.bit_error(0.05) == pytest.approx(3 * 0.05**2 * 0.95 + 0.05**3, abs=1e-15)
    assert RepetitionCode(1).bit_error(0.2) == pytest.approx(0.2)
    with pytest.raises(ConfigurationError):
        RepetitionCode(4)


def test_hamming_corrects_single_errors():
    msgs = np.array(np.meshgrid(*[[0, 1]] * 4)).reshape(4, -1).T
    words = HAMMING_7_4.encode(msgs)
    for pos in range(7):
        noisy = words.copy()
        noisy[:, pos] ^= 1
        assert np.array_equal(HAMMING_7_4.decode(noisy), msgs)
    assert inner_code("hamming74") is HAMMING_7_4
    assert inner_code(5).n == 5


def test_shared_codebook_agrees_everywhere_and_decodes_cleanly():
    params = NoiseParams(0.1, 0.0, 0.0)
    s = scheme_shared_codebook(params, 3)
    res = run_session(example1(params), s, 30, 500, seed=2)
    assert np.array_equal(res.data["x12"], res.data["x32"])
    assert res.agreement.value == 1.0
    # delta = 0: the forwarded stream arrives intact, so user 2 decodes without error
    assert res.user_error_rates[2].value == 0.0
    assert s.message_bits(30) == {1: 30, 2: 9, 3: 30}


def test_shared_codebook_needs_identical_feedback():
    with pytest.raises(ConfigurationError):
        scheme_shared_codebook(NoiseParams(0.1, 0.1, 0.05))


def test_forwarded_stream_error_matches_inner_code():
    params = NoiseParams(0.05, 0.1, 0.0)
    s = scheme_shared_codebook(params, 3)
    res = run_session(example1(params), s, 90, 2000, seed=4)
    rate, count = forwarded_stream_error(res, s)
    expected = RepetitionCode(3).bit_error(0.1)
    assert abs(rate - expected) <= 4 * np.sqrt(expected * (1 - expected) / count)


def test_uncoded_forwards_previous_noise_bit():
    params = NoiseParams(0.2, 0.0, 0.0)
    s = scheme_uncoded(params)
    res = run_session(example1(params), s, 10, 300, seed=0)
    assert np.array_equal(res.data["x12"][:, 1:], res.data["n_p"][:, :-1])
    assert np.all(res.data["x12"][:, 0] == 0)
    assert res.user_error_rates[2].value == 0.0
    assert res.user_error_rates[1].value > 0.0  # p > 0 on the direct link


def test_uncoded_helpers_disagree_at_feedback_noise_rate():
    params = NoiseParams(0.2, 0.0, 0.1)
    res = run_session(example1(params), scheme_uncoded(params), 20, 4000, seed=3)
    steady = res.agreement_by_time[1:]
    assert abs(steady.mean() - 0.9) <= 0.01


def test_independent_scheme_metadata_and_steady_agreement():
    params = NoiseParams(0.2, 0.05, 0.0)
    s = scheme_independent_random(params, seed1=1, seed3=2, n0=4, balanced=True)
    meta = s.metadata
    assert 1.0 <= meta["eff_len_x12"] <= 4.0
    bounds = meta["disagreement_bounds"]
    assert bounds["lower_clamped"] - 1e-9 <= meta["steady_disagreement"] <= bounds["upper_clamped"] + 1e-9
    res = run_session(example1(params), s, 24, 4000, seed=9)
    steady = res.agreement_by_time[4:].mean()
    assert abs(steady - (1 - meta["steady_disagreement"])) <= 0.02
    assert res.agreement.value < 1.0


def test_agreement_pattern_scheme():
    params = NoiseParams(0.3, 0.1, 0.0)
    pattern = (1, 0, 1, 1, 0, 0)
    for base in ("constant0", "last-bit", "parity-window", "random-window"):
        s = scheme_agreement_pattern(pattern, base, n0=2, seed=3)
        res = run_session(example1(params), s, 6, 200, seed=1)
        same = res.data["x12"] == res.data["x32"]
        assert np.array_equal(same, np.broadcast_to(np.array(pattern, bool), same.shape))
    with pytest.raises(ConfigurationError):
        scheme_agreement_pattern(pattern, "nonsense")


def test_r2_bound_at_measured_agreement():
    params = NoiseParams(0.05, 0.05, 0.0)
    s = scheme_shared_codebook(params, 3)
    res = run_session(example1(params), s, 30, 100, seed=0)
    rep = measure_agreement_and_r2_bound(res, 0.05, 0.05)
    assert rep.agreement == 1.0
    assert rep.r2_bound == regions.outer_bound(0.05, 0.05, 0.0, 1.0).r2
    assert rep.r2_bound_linear == pytest.approx(1.0)


def test_forwarded_error_requires_forwarding_layout():
    params = NoiseParams(0.2, 0.05, 0.0)
    s = scheme_independent_random(params, 1, 2, 2)
    res = run_session(example1(params), s, 6, 10, seed=0)
    with pytest.raises(StructuralError):
        forwarded_stream_error(res, s)


def test_factory():
    params = NoiseParams(0.1, 0.1, 0.0)
    assert build("shared", params).name == "shared"
    assert build("uncoded", params).name == "uncoded"
    assert build("independent", params, n0=3).params["n0"] == 3
    with pytest.raises(ConfigurationError):
        build("telepathy", params)
