"""GSIM transmitter, flat Rayleigh MIMO channel, MMSE and brute-force ML.

A GSIM transmit vector of length ``n_t`` has exactly ``n_rf`` non-zero
entries. The first K bits of a block choose the support from the pattern
set, the remaining bits are modulation symbols placed on the active
antennas in ascending order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

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
from .rates import gsim_rate

__all__ = [
    "GsimConfig",
    "DetectionResult",
    "gsim_encode",
    "gsim_decode",
    "transmit_set",
    "sample_channel",
    "sample_noise",
    "noise_variance",
    "ml_cost",
    "detect_mmse",
    "mmse_estimate",
    "project_to_valid",
    "detect_ml_bruteforce",
    "ml_detect_batch",
    "mmse_detect_batch",
    "ML_SEARCH_LIMIT",
]

# brute-force ML refuses search spaces larger than this
ML_SEARCH_LIMIT = 1 << 20


@dataclass(frozen=True, eq=False)
class GsimConfig:
    n_t: int
    n_rf: int
    n_r: int
    alphabet: ModulationAlphabet
    pattern_set: PatternSet
    noise_var: float = 1.0
    _U: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.pattern_set.n != self.n_t or self.pattern_set.w != self.n_rf:
            raise ValueError(
                f"pattern set is over ({self.pattern_set.n}, {self.pattern_set.w}), "
                f"config needs ({self.n_t}, {self.n_rf})"
            )
        if self.n_r < 1:
            raise ValueError("n_r must be >= 1")
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")

    @classmethod
    def build(cls, n_t: int, n_rf: int, n_r: int, M: int = 4, noise_var: float = 1.0,
              alphabet: ModulationAlphabet | None = None, patterns=None) -> "GsimConfig":
        alphabet = alphabet or build_qam_alphabet(M)
        return cls(n_t, n_rf, n_r, alphabet, build_pattern_set(n_t, n_rf, patterns), noise_var)

    def with_noise(self, noise_var: float) -> "GsimConfig":
        return GsimConfig(self.n_t, self.n_rf, self.n_r, self.alphabet, self.pattern_set, noise_var)

    @property
    def K(self) -> int:
        return self.pattern_set.index_bits

    @property
    def bits_per_vector(self) -> int:
        return self.K + self.n_rf * self.alphabet.bits_per_symbol

    @property
    def rate(self) -> int:
        return gsim_rate(self.n_t, self.n_rf, self.alphabet.order).rate_bpcu

    def transmit_set(self) -> np.ndarray:
        """Every valid transmit vector, row ``i`` encoding the integer ``i``."""
        if self._U is None:
            if self.bits_per_vector > 20:
                raise ValueError(f"|U| = 2^{self.bits_per_vector} is too large to enumerate")
            bits = int_to_bits(np.arange(1 << self.bits_per_vector), self.bits_per_vector)
            U = gsim_encode(bits, self)
            U.setflags(write=False)
            object.__setattr__(self, "_U", U)
        return self._U


def transmit_set(config: GsimConfig) -> np.ndarray:
    return config.transmit_set()


def gsim_encode(bits, config: GsimConfig) -> np.ndarray:
    """Bits -> transmit vector(s). Accepts ``(nbits,)`` or ``(T, nbits)``."""
    bits = as_bits(bits)
    if bits.shape[-1] != config.bits_per_vector:
        raise ValueError(f"expected {config.bits_per_vector} bits per vector, got {bits.shape[-1]}")
    K = config.K
    lead = bits.shape[:-1]
    pats = config.pattern_set.patterns[bits_to_int(bits[..., :K])] if K else \
        np.broadcast_to(config.pattern_set.patterns[0], (*lead, config.n_t))
    syms = config.alphabet.modulate(bits[..., K:])
    x = np.zeros((*lead, config.n_t), dtype=np.complex128)
    # np.nonzero walks rows in order, so symbols land on ascending antennas
    x[np.nonzero(pats)] = syms.reshape(-1)
    return x


def gsim_decode(x, config: GsimConfig) -> np.ndarray:
    """Inverse of :func:`gsim_encode` for a valid vector (or batch of them)."""
    x = np.asarray(x, dtype=np.complex128)
    support = (x != 0).astype(np.uint8)
    flat = support.reshape(-1, config.n_t)
    if np.any(flat.sum(axis=1) != config.n_rf):
        raise ValueError(f"vector does not have exactly {config.n_rf} non-zero entries")
    idx = np.array([config.pattern_set.index_of(p) for p in flat])
    pbits = int_to_bits(idx, config.K)
    syms = x.reshape(-1, config.n_t)[np.nonzero(flat)].reshape(-1, config.n_rf)
    sbits = config.alphabet.demodulate(syms)
    out = np.concatenate([pbits, sbits], axis=-1)
    return out.reshape(*x.shape[:-1], config.bits_per_vector)


def sample_channel(rng: np.random.Generator, n_r: int, n_t: int, size=()) -> np.ndarray:
    """i.i.d. CN(0, 1) entries (variance 1/2 per real dimension)."""
    shape = (*np.atleast_1d(size), n_r, n_t) if size != () else (n_r, n_t)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def sample_noise(rng: np.random.Generator, noise_var: float, n_r: int, size=()) -> np.ndarray:
    shape = (*np.atleast_1d(size), n_r) if size != () else (n_r,)
    if noise_var == 0:
        return np.zeros(shape, dtype=np.complex128)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(noise_var / 2)


def noise_variance(snr_db: float, active: float, alphabet: ModulationAlphabet) -> float:
    """sigma^2 giving ``snr_db`` of average received power per receive antenna.

    With unit-variance channel taps the received signal power per antenna is
    ``active * E_s``; dividing by the SNR folds in the unit-energy
    normalization of the constellation.
    """
    return active * alphabet.average_energy / 10 ** (snr_db / 10)


def ml_cost(y, H, x) -> float:
    r = np.asarray(y) - np.asarray(H) @ np.asarray(x)
    return float(np.real(np.vdot(r, r)))


@dataclass
class DetectionResult:
    detector: str
    x: np.ndarray
    bits: np.ndarray
    cost: float
    iterations: int = 0
    restarts: int = 0
    fallback_used: bool = False

    def to_json(self) -> str:
        nbits = len(self.bits)
        value = bits_to_int(self.bits) if nbits else 0
        width = max(1, (nbits + 3) // 4)
        return json.dumps({
            "detector": self.detector,
            "cost": self.cost,
            "iterations": self.iterations,
            "restarts": self.restarts,
            "fallback_used": self.fallback_used,
            "decoded_bits": format(value, f"0{width}x"),
            "n_bits": nbits,
        })

    @staticmethod
    def parse_bits(record: dict) -> np.ndarray:
        return int_to_bits(int(record["decoded_bits"], 16), record["n_bits"])


def mmse_estimate(y, H, noise_var: float) -> np.ndarray:
    H = np.asarray(H)
    G = H.conj().T @ H + noise_var * np.eye(H.shape[1])
    try:
        return np.linalg.solve(G, H.conj().T @ y)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            "regularized Gram matrix is singular (noise_var=0 with a rank-deficient channel)"
        ) from None


def project_to_valid(x_soft, config: GsimConfig) -> np.ndarray:
    """Strongest pattern in the set, supported entries quantized, rest zero."""
    x_soft = np.asarray(x_soft)
    energy = np.abs(x_soft) ** 2
    pats = config.pattern_set.patterns
    best = np.argmax(energy @ pats.T.astype(float), axis=-1)
    mask = pats[best].astype(bool)
    return np.where(mask, config.alphabet.quantize(x_soft), 0)


def detect_mmse(y, H, config: GsimConfig) -> DetectionResult:
    x = project_to_valid(mmse_estimate(y, H, config.noise_var), config)
    return DetectionResult("mmse", x, gsim_decode(x, config), ml_cost(y, H, x))


def detect_ml_bruteforce(y, H, config: GsimConfig) -> DetectionResult:
    """argmin over the whole valid set; ties go to the lowest bit label."""
    if 1 << config.bits_per_vector > ML_SEARCH_LIMIT:
        raise ValueError(f"ML search space 2^{config.bits_per_vector} exceeds the limit")
    U = config.transmit_set()
    r = np.asarray(y)[:, None] - np.asarray(H) @ U.T
    costs = np.sum(np.abs(r) ** 2, axis=0)
    i = int(np.argmin(costs))
    return DetectionResult("ml", U[i].copy(), int_to_bits(i, config.bits_per_vector), float(costs[i]))


def ml_detect_batch(Y: np.ndarray, H: np.ndarray, config: GsimConfig) -> np.ndarray:
    """Vectorized brute-force ML over a batch; returns the winning labels.

    ``Y`` is ``(T, n_r)``, ``H`` is ``(T, n_r, n_t)``.
    """
    if 1 << config.bits_per_vector > ML_SEARCH_LIMIT:
        raise ValueError(f"ML search space 2^{config.bits_per_vector} exceeds the limit")
    U = config.transmit_set()
    r = Y[:, :, None] - H @ U.T
    costs = np.einsum("tru,tru->tu", r.real, r.real) + np.einsum("tru,tru->tu", r.imag, r.imag)
    return np.argmin(costs, axis=1)


def mmse_detect_batch(Y: np.ndarray, H: np.ndarray, config: GsimConfig) -> np.ndarray:
    Hh = np.conj(np.swapaxes(H, 1, 2))
    G = Hh @ H + config.noise_var * np.eye(config.n_t)
    soft = np.linalg.solve(G, (Hh @ Y[:, :, None]))[..., 0]
    return project_to_valid(soft, config)
