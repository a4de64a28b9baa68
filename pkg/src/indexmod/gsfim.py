"""GSFIM frames, OFDM over an L-tap MIMO channel, and separable ML detection.

Frame bit layout: ``k_a`` antenna index bits, then for each of the ``n_b``
sub-matrices ``k_f`` frequency index bits followed by ``k`` symbols. A
frequency pattern is an ``n_rf x n_f`` 0/1 matrix flattened row-major, and
symbols fill its active cells in that same row-major order. Active
antennas carry the rows of ``B`` in ascending antenna index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .core import (
    ModulationAlphabet,
    PatternSet,
    as_bits,
    bits_to_int,
    build_pattern_set,
    build_qam_alphabet,
    int_to_bits,
)
from .rates import gsfim_rate

__all__ = [
    "GsfimConfig",
    "GsfimFrame",
    "SelectiveChannel",
    "GsfimDetection",
    "gsfim_encode",
    "gsfim_decode",
    "ofdm_modulate",
    "ofdm_demodulate",
    "sample_selective_channel",
    "transmit_through",
    "detect_ml_gsfim",
    "block_channel",
    "frame_to_json",
    "frame_from_json",
    "channel_to_json",
    "channel_from_json",
    "SEARCH_LIMIT",
]

SEARCH_LIMIT = 1 << 20


@dataclass(frozen=True, eq=False)
class GsfimConfig:
    n_t: int
    n_rf: int
    n_r: int
    N: int
    n_f: int
    k: int
    L: int
    alphabet: ModulationAlphabet
    antenna_set: PatternSet
    freq_set: PatternSet
    noise_var: float = 1.0

    def __post_init__(self):
        if self.N % self.n_f:
            raise ValueError(f"n_f={self.n_f} must divide N={self.N}")
        if not 1 <= self.k <= self.n_rf * self.n_f:
            raise ValueError(f"need 1 <= k <= n_rf*n_f = {self.n_rf * self.n_f}, got {self.k}")
        if (self.antenna_set.n, self.antenna_set.w) != (self.n_t, self.n_rf):
            raise ValueError("antenna pattern set does not match (n_t, n_rf)")
        if (self.freq_set.n, self.freq_set.w) != (self.n_rf * self.n_f, self.k):
            raise ValueError("frequency pattern set does not match (n_rf*n_f, k)")
        if self.L < 1 or self.n_r < 1:
            raise ValueError("L and n_r must be >= 1")

    @classmethod
    def build(cls, n_t: int, n_rf: int, n_r: int, N: int, n_f: int, k: int, L: int,
              M: int = 4, noise_var: float = 1.0, alphabet: ModulationAlphabet | None = None,
              antenna_patterns=None, freq_patterns=None) -> "GsfimConfig":
        if n_f < 1 or N % n_f:
            raise ValueError(f"n_f={n_f} must divide N={N}")
        alphabet = alphabet or build_qam_alphabet(M)
        return cls(n_t, n_rf, n_r, N, n_f, k, L, alphabet,
                   build_pattern_set(n_t, n_rf, antenna_patterns),
                   build_pattern_set(n_rf * n_f, k, freq_patterns), noise_var)

    @classmethod
    def mimo_ofdm(cls, n_rf: int, n_r: int, N: int, L: int, M: int = 4,
                  noise_var: float = 1.0, alphabet: ModulationAlphabet | None = None) -> "GsfimConfig":
        """Plain MIMO-OFDM: every antenna and every subcarrier active."""
        return cls.build(n_rf, n_rf, n_r, N, N, n_rf * N, L, M, noise_var, alphabet)

    def with_noise(self, noise_var: float) -> "GsfimConfig":
        return GsfimConfig(self.n_t, self.n_rf, self.n_r, self.N, self.n_f, self.k, self.L,
                           self.alphabet, self.antenna_set, self.freq_set, noise_var)

    @property
    def n_b(self) -> int:
        return self.N // self.n_f

    @property
    def k_a(self) -> int:
        return self.antenna_set.index_bits

    @property
    def k_f(self) -> int:
        return self.freq_set.index_bits

    @property
    def bits_per_block(self) -> int:
        return self.k_f + self.k * self.alphabet.bits_per_symbol

    @property
    def bits_per_frame(self) -> int:
        return self.k_a + self.n_b * self.bits_per_block

    @property
    def rate(self):
        return gsfim_rate(self.n_t, self.n_rf, self.N, self.n_f, self.k,
                          self.alphabet.order, self.L).total

    @property
    def active_per_subcarrier(self) -> float:
        """Average number of non-zero entries per subcarrier column."""
        return self.k / self.n_f


@dataclass(frozen=True, eq=False)
class GsfimFrame:
    B: np.ndarray                 # (n_rf, N) over A u {0}
    antenna_pattern: np.ndarray   # (n_t,) 0/1

    def sub_matrix(self, i: int, n_f: int) -> np.ndarray:
        return self.B[:, i * n_f:(i + 1) * n_f]

    @property
    def active_antennas(self) -> np.ndarray:
        return np.flatnonzero(self.antenna_pattern)


def gsfim_encode(bits, config: GsfimConfig) -> GsfimFrame:
    bits = as_bits(bits)
    if bits.size != config.bits_per_frame:
        raise ValueError(f"expected {config.bits_per_frame} bits per frame, got {bits.size}")
    ka, kf, n_f, n_rf = config.k_a, config.k_f, config.n_f, config.n_rf
    a = config.antenna_set.bits_to_pattern(bits[:ka])
    B = np.zeros((n_rf, config.N), dtype=np.complex128)
    pos = ka
    for i in range(config.n_b):
        chunk = bits[pos:pos + config.bits_per_block]
        pos += config.bits_per_block
        pat = config.freq_set.bits_to_pattern(chunk[:kf])
        cells = np.zeros(n_rf * n_f, dtype=np.complex128)
        cells[pat.astype(bool)] = config.alphabet.modulate(chunk[kf:])
        B[:, i * n_f:(i + 1) * n_f] = cells.reshape(n_rf, n_f)
    return GsfimFrame(B, a.copy())


def _block_bits(z: np.ndarray, config: GsfimConfig) -> np.ndarray:
    """Bits of one sub-matrix given as its row-major flattened cells."""
    fbits = config.freq_set.pattern_to_bits(z != 0)
    mbits = config.alphabet.demodulate(z[z != 0])
    return np.concatenate([fbits, mbits]).astype(np.uint8)


def gsfim_decode(frame: GsfimFrame, config: GsfimConfig) -> np.ndarray:
    """Antenna bits, then per sub-matrix frequency bits and symbol bits."""
    parts = [config.antenna_set.pattern_to_bits(frame.antenna_pattern)]
    for i in range(config.n_b):
        z = frame.sub_matrix(i, config.n_f).reshape(-1)
        if np.count_nonzero(z) != config.k:
            raise ValueError(f"sub-matrix {i} does not have {config.k} active cells")
        parts.append(_block_bits(z, config))
    return np.concatenate(parts).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class SelectiveChannel:
    taps: np.ndarray          # (L, n_r, n_t) time-domain taps
    N: int
    per_subcarrier: np.ndarray = field(init=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128)
        # H_n = sum_l taps_l exp(-j 2 pi n l / N)
        Hn = np.fft.fft(taps, n=self.N, axis=0)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "per_subcarrier", Hn)

    @property
    def L(self) -> int:
        return self.taps.shape[0]


def sample_selective_channel(rng: np.random.Generator, n_r: int, n_t: int, L: int, N: int) -> SelectiveChannel:
    """i.i.d. CN(0, 1/L) taps: uniform power-delay profile, unit total power."""
    shape = (L, n_r, n_t)
    taps = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5 / L)
    return SelectiveChannel(taps, N)


def ofdm_modulate(frame: GsfimFrame | np.ndarray, L: int) -> np.ndarray:
    """Rows of B -> unitary IDFT -> cyclic prefix of L-1 samples."""
    B = frame.B if isinstance(frame, GsfimFrame) else np.asarray(frame)
    N = B.shape[-1]
    s = np.fft.ifft(B, axis=-1) * np.sqrt(N)
    return np.concatenate([s[..., N - (L - 1):], s], axis=-1) if L > 1 else s


def ofdm_demodulate(r: np.ndarray, N: int, L: int) -> np.ndarray:
    """Strip the prefix and apply the unitary DFT: ``(n_r, N+L-1) -> (n_r, N)``."""
    r = np.asarray(r)
    return np.fft.fft(r[..., L - 1:L - 1 + N], axis=-1) / np.sqrt(N)


def transmit_through(tx: np.ndarray, antennas, channel: SelectiveChannel,
                     noise_var: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Linear convolution of the active antennas' streams with the taps.

    ``tx`` is ``(n_rf, T)``; the output is ``(n_r, T)``, i.e. the tail
    spilling past the frame is dropped.
    """
    taps = channel.taps[:, :, np.asarray(antennas)]
    T = tx.shape[-1]
    r = np.zeros((taps.shape[1], T), dtype=np.complex128)
    for ell in range(channel.L):
        r[:, ell:] += taps[ell] @ tx[:, :T - ell]
    if noise_var > 0:
        if rng is None:
            raise ValueError("rng required when noise_var > 0")
        r += (rng.standard_normal(r.shape) + 1j * rng.standard_normal(r.shape)) * np.sqrt(noise_var / 2)
    return r


def block_channel(Hn: np.ndarray, antennas, i: int, n_f: int) -> np.ndarray:
    """Block-diagonal ``G_i^a`` stacking the sub-matrix's subcarrier channels."""
    Ha = Hn[i * n_f:(i + 1) * n_f][:, :, np.asarray(antennas)]
    n_r, n_rf = Ha.shape[1:]
    G = np.zeros((n_f * n_r, n_f * n_rf), dtype=np.complex128)
    for j in range(n_f):
        G[j * n_r:(j + 1) * n_r, j * n_rf:(j + 1) * n_rf] = Ha[j]
    return G


@dataclass
class GsfimDetection:
    antenna_index: int
    frame: GsfimFrame
    cost: float
    bits: np.ndarray


def _column_candidates(n_rf: int, points: np.ndarray):
    """All vectors over A u {0} of length n_rf, with each one's mask id."""
    vals = np.concatenate([[0], points])
    combos = np.array(list(product(range(vals.size), repeat=n_rf)))
    C = vals[combos]                                  # (P, n_rf)
    mask = ((combos != 0) * (1 << np.arange(n_rf - 1, -1, -1))).sum(axis=1)
    return C, mask


def detect_ml_gsfim(Y: np.ndarray, Hn: np.ndarray, config: GsfimConfig,
                    limit: int = SEARCH_LIMIT) -> GsfimDetection:
    """Exact ML over (antenna pattern, sub-matrices).

    ``Y`` is ``(N, n_r)`` (received vector per subcarrier), ``Hn`` is
    ``(N, n_r, n_t)``. The metric is a sum over sub-matrices and, inside a
    sub-matrix, over subcarriers; so for each antenna pattern and each
    subcarrier the best column for every activity mask is found once, and a
    frequency pattern's cost is the sum of its columns' entries.
    """
    n_rf, n_f, N = config.n_rf, config.n_f, config.N
    M = config.alphabet.order
    if (M + 1) ** n_rf > limit or len(config.freq_set) > limit:
        raise ValueError("GSFIM ML search space exceeds the limit")
    Y = np.asarray(Y)
    Hn = np.asarray(Hn)
    C, cmask = _column_candidates(n_rf, config.alphabet.points)
    n_masks = 1 << n_rf

    fp = config.freq_set.patterns.reshape(-1, n_rf, n_f)
    weights = 1 << np.arange(n_rf - 1, -1, -1)
    pat_masks = np.einsum("prf,r->pf", fp, weights)          # (P, n_f) column masks

    best = (np.inf, None, None)
    for a_idx, a in enumerate(config.antenna_set.patterns):
        Ha = Hn[:, :, a.astype(bool)]                         # (N, n_r, n_rf)
        r = Y[:, :, None] - Ha @ C.T                          # (N, n_r, P)
        d = np.sum(r.real ** 2 + r.imag ** 2, axis=1)         # (N, P)
        col_cost = np.full((N, n_masks), np.inf)
        col_arg = np.zeros((N, n_masks), dtype=np.int64)
        for m in range(n_masks):
            sel = np.flatnonzero(cmask == m)
            j = np.argmin(d[:, sel], axis=1)
            col_arg[:, m] = sel[j]
            col_cost[:, m] = d[np.arange(N), sel[j]]
        total = 0.0
        choice = []
        for i in range(config.n_b):
            cc = col_cost[i * n_f:(i + 1) * n_f]              # (n_f, n_masks)
            pc = cc[np.arange(n_f), pat_masks].sum(axis=1)    # (P,)
            p = int(np.argmin(pc))
            total += pc[p]
            choice.append(p)
        if total < best[0]:
            best = (total, a_idx, (choice, col_arg))

    cost, a_idx, (choice, col_arg) = best
    B = np.zeros((n_rf, N), dtype=np.complex128)
    for i, p in enumerate(choice):
        for j in range(n_f):
            n = i * n_f + j
            B[:, n] = C[col_arg[n, pat_masks[p, j]]]
    frame = GsfimFrame(B, config.antenna_set.patterns[a_idx].copy())
    return GsfimDetection(a_idx, frame, float(cost), gsfim_decode(frame, config))


def _cplx(a) -> list:
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _uncplx(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def frame_to_json(frame: GsfimFrame) -> str:
    return json.dumps({"B": _cplx(frame.B), "antenna_pattern": frame.antenna_pattern.astype(int).tolist()})


def frame_from_json(text: str) -> GsfimFrame:
    d = json.loads(text)
    return GsfimFrame(_uncplx(d["B"]), np.array(d["antenna_pattern"], dtype=np.uint8))


def channel_to_json(channel: SelectiveChannel) -> str:
    return json.dumps({"N": channel.N, "taps": _cplx(channel.taps)})


def channel_from_json(text: str) -> SelectiveChannel:
    d = json.loads(text)
    return SelectiveChannel(_uncplx(d["taps"]), int(d["N"]))
