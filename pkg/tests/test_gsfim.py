from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indexmod.core import int_to_bits
from indexmod.gsfim import (
    GsfimConfig,
    GsfimFrame,
    SelectiveChannel,
    block_channel,
    channel_from_json,
    channel_to_json,
    detect_ml_gsfim,
    frame_from_json,
    frame_to_json,
    gsfim_decode,
    gsfim_encode,
    ofdm_demodulate,
    ofdm_modulate,
    sample_selective_channel,
    transmit_through,
)

B1 = np.array([[-1 - 1j, 0, -1 + 1j, 1 - 1j],
               [1 - 1j, -1 + 1j, -1 - 1j, 1 + 1j]])
B1_BITS = "001" "01" "00" "11" "11" "00" "01" "10"


@pytest.fixture
def b1_config(qam4_example_labeling, sf_example_set):
    # a single sub-matrix with both antennas always on, so no antenna bits
    return GsfimConfig.build(2, 2, 1, 4, 4, 7, 1, alphabet=qam4_example_labeling,
                             freq_patterns=sf_example_set.patterns)


def test_b1_golden(b1_config):
    assert b1_config.bits_per_frame == 17
    frame = gsfim_encode(B1_BITS, b1_config)
    assert np.array_equal(frame.B, B1)


def test_b1_inverse(b1_config):
    bits = gsfim_decode(GsfimFrame(B1, np.array([1, 1], dtype=np.uint8)), b1_config)
    assert "".join(map(str, bits)) == B1_BITS


def test_column_major_would_not_match(b1_config):
    # the same symbols filled column-major give a different matrix
    frame = gsfim_encode(B1_BITS, b1_config)
    assert not np.array_equal(frame.B.T.reshape(2, 4), B1)


def test_fig12a_dimensions():
    cfg = GsfimConfig.build(3, 2, 4, 8, 4, 7, 4, M=4)
    assert (cfg.k_a, cfg.k_f, cfg.n_b) == (1, 3, 2)
    assert cfg.bits_per_frame == 35
    assert cfg.rate == Fraction(35, 11)
    assert cfg.bits_per_frame == cfg.rate * (cfg.N + cfg.L - 1)


def test_mimo_ofdm_config():
    cfg = GsfimConfig.mimo_ofdm(2, 4, 8, 4, M=4)
    assert (cfg.k_a, cfg.k_f) == (0, 0)
    assert cfg.bits_per_frame == 32
    assert cfg.active_per_subcarrier == 2


def test_config_validation():
    with pytest.raises(ValueError):
        GsfimConfig.build(3, 2, 4, 8, 3, 5, 4)
    with pytest.raises(ValueError):
        GsfimConfig.build(3, 2, 4, 8, 4, 9, 4)
    with pytest.raises(ValueError):
        GsfimConfig.build(3, 2, 4, 8, 4, 7, 0)


@pytest.mark.parametrize("args", [(3, 2, 1, 8, 4, 7, 4, 4), (4, 2, 1, 16, 2, 3, 3, 16),
                                  (2, 1, 1, 4, 4, 2, 1, 2), (2, 2, 1, 4, 4, 8, 2, 4)])
def test_roundtrip(args, rng):
    cfg = GsfimConfig.build(*args)
    bits = rng.integers(0, 2, (500, cfg.bits_per_frame), dtype=np.uint8)
    for b in bits:
        frame = gsfim_encode(b, cfg)
        assert frame.B.shape == (cfg.n_rf, cfg.N)
        assert cfg.antenna_set.contains(frame.antenna_pattern)
        for i in range(cfg.n_b):
            assert cfg.freq_set.contains(frame.sub_matrix(i, cfg.n_f).reshape(-1) != 0)
        assert np.array_equal(gsfim_decode(frame, cfg), b)


def test_encode_wrong_length(b1_config):
    with pytest.raises(ValueError):
        gsfim_encode(B1_BITS + "0", b1_config)


def test_decode_rejects_wrong_weight(b1_config):
    with pytest.raises(ValueError):
        gsfim_decode(GsfimFrame(np.ones((2, 4)), np.array([1, 1], dtype=np.uint8)), b1_config)


def test_no_prefix_when_single_tap(rng):
    B = rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))
    s = ofdm_modulate(B, 1)
    assert s.shape == (2, 8)
    assert np.allclose(s, np.fft.ifft(B, axis=-1) * np.sqrt(8))


def test_prefix_is_cyclic(rng):
    B = rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))
    s = ofdm_modulate(B, 4)
    assert s.shape == (2, 11)
    assert np.array_equal(s[:, :3], s[:, -3:])


@pytest.mark.parametrize("L", [1, 2, 4])
def test_loopback(L, rng):
    B = rng.standard_normal((3, 16)) + 1j * rng.standard_normal((3, 16))
    assert np.max(np.abs(ofdm_demodulate(ofdm_modulate(B, L), 16, L) - B)) <= 1e-10


def test_unitary_transform_preserves_energy(rng):
    B = rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))
    s = ofdm_modulate(B, 1)
    assert np.sum(np.abs(s) ** 2) == pytest.approx(np.sum(np.abs(B) ** 2))


def test_two_tap_per_subcarrier_model(rng):
    N, L, n_r = 8, 2, 3
    taps = rng.standard_normal((L, n_r, 2)) + 1j * rng.standard_normal((L, n_r, 2))
    ch = SelectiveChannel(taps, N)
    # direct oracle for H_n = sum_l h_l exp(-j 2 pi n l / N)
    for n in range(N):
        ref = sum(taps[l] * np.exp(-2j * np.pi * n * l / N) for l in range(L))
        assert np.allclose(ch.per_subcarrier[n], ref)
    B = rng.standard_normal((2, N)) + 1j * rng.standard_normal((2, N))
    Y = ofdm_demodulate(transmit_through(ofdm_modulate(B, L), [0, 1], ch), N, L)
    for n in range(N):
        assert np.max(np.abs(Y[:, n] - ch.per_subcarrier[n] @ B[:, n])) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_per_subcarrier_model_random(seed, L):
    rng = np.random.default_rng(seed)
    cfg = GsfimConfig.build(4, 2, 3, 8, 4, 5, L, M=4)
    frame = gsfim_encode(rng.integers(0, 2, cfg.bits_per_frame), cfg)
    ch = sample_selective_channel(rng, 3, 4, L, 8)
    Y = ofdm_demodulate(transmit_through(ofdm_modulate(frame, L), frame.active_antennas, ch), 8, L)
    Ha = ch.per_subcarrier[:, :, frame.active_antennas]
    ref = np.einsum("nrt,tn->rn", Ha, frame.B)
    assert np.max(np.abs(Y - ref)) <= 1e-9


def test_channel_taps_statistics():
    rng = np.random.default_rng(3)
    taps = np.stack([sample_selective_channel(rng, 2, 2, 4, 8).taps for _ in range(5000)])
    assert np.mean(np.abs(taps) ** 2) == pytest.approx(0.25, rel=0.03)
    Hn = np.stack([sample_selective_channel(rng, 2, 2, 4, 8).per_subcarrier for _ in range(5000)])
    assert np.mean(np.abs(Hn) ** 2) == pytest.approx(1.0, rel=0.03)


def test_noise_variance_preserved_by_dft():
    rng = np.random.default_rng(4)
    ch = SelectiveChannel(np.zeros((4, 2, 2)), 16)
    r = np.stack([transmit_through(np.zeros((2, 19)), [0, 1], ch, 0.3, rng) for _ in range(3000)])
    Y = ofdm_demodulate(r, 16, 4)
    assert np.mean(np.abs(Y) ** 2) == pytest.approx(0.3, rel=0.02)


def test_transmit_needs_rng_for_noise():
    ch = SelectiveChannel(np.ones((1, 1, 1)), 4)
    with pytest.raises(ValueError):
        transmit_through(np.ones((1, 4)), [0], ch, 0.1)


def test_block_channel(rng):
    Hn = rng.standard_normal((8, 2, 3)) + 1j * rng.standard_normal((8, 2, 3))
    G = block_channel(Hn, [0, 2], 1, 4)
    assert G.shape == (8, 8)
    for j in range(4):
        assert np.array_equal(G[2 * j:2 * j + 2, 2 * j:2 * j + 2], Hn[4 + j][:, [0, 2]])
    mask = np.kron(np.eye(4), np.ones((2, 2)))
    assert not np.any(G[mask == 0])


def _joint_ml_oracle(Y, Hn, cfg):
    best, arg = np.inf, None
    for i in range(1 << cfg.bits_per_frame):
        b = int_to_bits(i, cfg.bits_per_frame)
        fr = gsfim_encode(b, cfg)
        Ha = Hn[:, :, fr.active_antennas]
        c = sum(np.sum(np.abs(Y[n] - Ha[n] @ fr.B[:, n]) ** 2) for n in range(cfg.N))
        if c < best:
            best, arg = c, b
    return arg, best


def test_separable_ml_equals_joint(rng):
    cfg = GsfimConfig.build(3, 2, 2, 4, 2, 3, 2, M=2)
    assert cfg.bits_per_frame == 11
    for snr_s2 in (0.05, 0.5, 2.0):
        bits = rng.integers(0, 2, cfg.bits_per_frame, dtype=np.uint8)
        fr = gsfim_encode(bits, cfg)
        ch = sample_selective_channel(rng, 2, 3, 2, 4)
        r = transmit_through(ofdm_modulate(fr, 2), fr.active_antennas, ch, snr_s2, rng)
        Y = ofdm_demodulate(r, 4, 2).T
        arg, best = _joint_ml_oracle(Y, ch.per_subcarrier, cfg)
        det = detect_ml_gsfim(Y, ch.per_subcarrier, cfg)
        assert det.cost == pytest.approx(best)
        assert np.array_equal(det.bits, arg)


def test_ml_via_block_channel_cost(rng):
    cfg = GsfimConfig.build(3, 2, 4, 8, 4, 7, 4, M=4)
    bits = rng.integers(0, 2, cfg.bits_per_frame, dtype=np.uint8)
    fr = gsfim_encode(bits, cfg)
    ch = sample_selective_channel(rng, 4, 3, 4, 8)
    Y = ofdm_demodulate(transmit_through(ofdm_modulate(fr, 4), fr.active_antennas, ch, 0.1, rng), 8, 4).T
    det = detect_ml_gsfim(Y, ch.per_subcarrier, cfg)
    a = det.frame.active_antennas
    cost = 0.0
    for i in range(cfg.n_b):
        G = block_channel(ch.per_subcarrier, a, i, cfg.n_f)
        b = det.frame.sub_matrix(i, cfg.n_f).T.reshape(-1)
        cost += np.sum(np.abs(Y[i * 4:(i + 1) * 4].reshape(-1) - G @ b) ** 2)
    assert det.cost == pytest.approx(cost)


def test_ml_noiseless(rng):
    cfg = GsfimConfig.build(3, 2, 4, 8, 4, 7, 4, M=4)
    for _ in range(10):
        bits = rng.integers(0, 2, cfg.bits_per_frame, dtype=np.uint8)
        fr = gsfim_encode(bits, cfg)
        ch = sample_selective_channel(rng, 4, 3, 4, 8)
        Y = ofdm_demodulate(transmit_through(ofdm_modulate(fr, 4), fr.active_antennas, ch), 8, 4).T
        assert np.array_equal(detect_ml_gsfim(Y, ch.per_subcarrier, cfg).bits, bits)


def test_ml_search_guard():
    cfg = GsfimConfig.build(3, 2, 1, 8, 4, 7, 4, M=4)
    with pytest.raises(ValueError):
        detect_ml_gsfim(np.zeros((8, 1)), np.zeros((8, 1, 3)), cfg, limit=10)


def test_json_roundtrip(rng):
    cfg = GsfimConfig.build(3, 2, 2, 8, 4, 7, 4, M=4)
    fr = gsfim_encode(rng.integers(0, 2, cfg.bits_per_frame), cfg)
    back = frame_from_json(frame_to_json(fr))
    assert np.array_equal(back.B, fr.B) and np.array_equal(back.antenna_pattern, fr.antenna_pattern)
    ch = sample_selective_channel(rng, 2, 3, 4, 8)
    ch2 = channel_from_json(channel_to_json(ch))
    assert ch2.N == 8 and np.array_equal(ch2.taps, ch.taps)
    assert np.allclose(ch2.per_subcarrier, ch.per_subcarrier)


def test_frame_json_fixture():
    fr = frame_from_json('{"B": [[[1, 1], [0, 0]]], "antenna_pattern": [0, 1]}')
    assert fr.B.tolist() == [[1 + 1j, 0]]
    assert fr.active_antennas.tolist() == [1]
