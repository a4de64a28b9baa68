"""Constellations, activation patterns and the bit mappings built on them.

Everything here is immutable once constructed. Bit strings are handled as
``uint8`` numpy arrays (MSB first) or as plain ``"0101"`` strings at the
edges; symbols and patterns are indexed by the integer value of their label.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, islice
from math import comb
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ModulationAlphabet",
    "PatternSet",
    "build_qam_alphabet",
    "enumerate_patterns",
    "build_pattern_set",
    "bits_to_int",
    "int_to_bits",
    "as_bits",
    "index_bits",
]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def index_bits(n: int, w: int) -> int:
    """floor(log2 C(n, w)), exact."""
    return comb(n, w).bit_length() - 1


def as_bits(bits: str | Sequence[int] | np.ndarray) -> np.ndarray:
    """Coerce ``"0101"``, a list of 0/1 or an array into a uint8 bit array."""
    if isinstance(bits, str):
        s = bits.replace(" ", "").replace("|", "")
        if set(s) - {"0", "1"}:
            raise ValueError(f"not a bit string: {bits!r}")
        return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size and arr.max() > 1:
        raise ValueError("bit arrays may only hold 0 and 1")
    return arr


def bits_to_int(bits: np.ndarray) -> np.ndarray | int:
    """MSB-first bit groups along the last axis -> integers."""
    bits = np.asarray(bits, dtype=np.int64)
    n = bits.shape[-1]
    if n == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64) if bits.ndim > 1 else 0
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    out = bits @ weights
    return int(out) if np.ndim(out) == 0 else out


def int_to_bits(values, n: int) -> np.ndarray:
    """Integers -> MSB-first uint8 bit groups of width ``n`` (new last axis)."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ModulationAlphabet:
    """An M-ary constellation; ``points[i]`` carries the label ``i``.

    Points are kept on the unnormalized lattice, e.g. 4-QAM is ``{±1±j}``.
    Energy normalization belongs to whoever sets the noise level.
    """

    points: np.ndarray
    name: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).copy()
        M = pts.size
        if not _is_pow2(M) or M < 2:
            raise ValueError(f"alphabet size must be a power of two >= 2, got {M}")
        if np.unique(np.round(pts, 12)).size != M:
            raise ValueError("alphabet points must be distinct")
        if np.any(np.abs(pts) == 0):
            raise ValueError("0 is reserved for silent antennas/subcarriers")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_labels(cls, labeling: Mapping[str, complex], name: str = "") -> "ModulationAlphabet":
        """Build from an explicit ``{"01": -1-1j, ...}`` labeling."""
        M = len(labeling)
        if not _is_pow2(M) or M < 2:
            raise ValueError(f"labeling must have a power-of-two size, got {M}")
        m = M.bit_length() - 1
        pts = np.zeros(M, dtype=np.complex128)
        seen = set()
        for label, point in labeling.items():
            b = as_bits(label)
            if b.size != m:
                raise ValueError(f"label {label!r} should have {m} bits")
            idx = bits_to_int(b)
            if idx in seen:
                raise ValueError(f"duplicate label {label!r}")
            seen.add(idx)
            pts[idx] = point
        return cls(pts, name=name)

    @property
    def order(self) -> int:
        return self.points.size

    M = order

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def average_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def labeling(self) -> dict[str, complex]:
        m = self.bits_per_symbol
        return {format(i, f"0{m}b"): complex(p) for i, p in enumerate(self.points)}

    def modulate(self, bits) -> np.ndarray:
        """Bits (length a multiple of log2 M) -> symbols."""
        bits = as_bits(bits)
        m = self.bits_per_symbol
        if bits.shape[-1] % m:
            raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of {m}")
        groups = bits.reshape(*bits.shape[:-1], bits.shape[-1] // m, m)
        return self.points[bits_to_int(groups)]

    def nearest_index(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.complex128)
        d = np.abs(values[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)

    def quantize(self, values) -> np.ndarray:
        """Element-wise nearest alphabet point (zeros are *not* kept)."""
        return self.points[self.nearest_index(values)]

    def demodulate(self, symbols) -> np.ndarray:
        """Hard decision: symbols -> MSB-first bits (flattened per leading axis)."""
        idx = self.nearest_index(symbols)
        bits = int_to_bits(idx, self.bits_per_symbol)
        return bits.reshape(*bits.shape[:-2], -1)

    def __repr__(self) -> str:
        return f"ModulationAlphabet(M={self.order}{', ' + self.name if self.name else ''})"


def _gray_pam(nbits: int) -> np.ndarray:
    """Level for each Gray label; label 0 sits on the largest level."""
    n = 1 << nbits
    levels = np.empty(n)
    for i in range(n):
        levels[i ^ (i >> 1)] = (n - 1) - 2 * i
    return levels


def build_qam_alphabet(M: int) -> ModulationAlphabet:
    """Gray-labeled QAM on the odd-integer lattice.

    The first ``ceil(log2(M)/2)`` label bits pick the in-phase level and the
    rest the quadrature level, so BPSK is ``{0: +1, 1: -1}``, 4-QAM maps
    ``00 -> 1+j`` and ``11 -> -1-j``, and 8-QAM is a 4x2 rectangle.
    """
    if not isinstance(M, (int, np.integer)) or not _is_pow2(int(M)) or M < 2:
        raise ValueError(f"M must be a power of two >= 2, got {M!r}")
    m = int(M).bit_length() - 1
    mi = (m + 1) // 2
    mq = m - mi
    li = _gray_pam(mi)
    lq = _gray_pam(mq) if mq else np.zeros(1)
    labels = np.arange(M)
    pts = li[labels >> mq] + 1j * lq[labels & ((1 << mq) - 1)]
    return ModulationAlphabet(pts, name=f"{M}-QAM" if M > 2 else "BPSK")


def enumerate_patterns(n: int, w: int, limit: int | None = None) -> np.ndarray:
    """All C(n, w) weight-``w`` binary vectors, lexicographic by support set.

    Returns a ``(C(n, w), n)`` uint8 array (or its first ``limit`` rows);
    ``n=4, w=2`` starts with ``1100, 1010, 1001, 0110``.
    """
    if not 1 <= w <= n:
        raise ValueError(f"need 1 <= w <= n, got n={n}, w={w}")
    count = comb(n, w) if limit is None else min(limit, comb(n, w))
    out = np.zeros((count, n), dtype=np.uint8)
    for row, support in enumerate(islice(combinations(range(n), w), count)):
        out[row, list(support)] = 1
    return out


@dataclass(frozen=True, eq=False)
class PatternSet:
    """2^K activation patterns of length ``n`` and weight ``w``.

    Row ``i`` of :attr:`patterns` is the pattern selected by the K-bit label
    ``i`` (MSB first).
    """

    n: int
    w: int
    patterns: np.ndarray
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pats = np.asarray(self.patterns, dtype=np.uint8).copy()
        if pats.ndim != 2 or pats.shape[1] != self.n:
            raise ValueError(f"patterns must be an (m, {self.n}) array")
        K = index_bits(self.n, self.w)
        if pats.shape[0] != 1 << K:
            raise ValueError(f"need exactly 2^{K} = {1 << K} patterns, got {pats.shape[0]}")
        if np.any(pats > 1):
            raise ValueError("patterns must be 0/1")
        weights = pats.sum(axis=1)
        if np.any(weights != self.w):
            bad = int(np.flatnonzero(weights != self.w)[0])
            raise ValueError(f"pattern {bad} has weight {weights[bad]}, expected {self.w}")
        lookup = {p.tobytes(): i for i, p in enumerate(pats)}
        if len(lookup) != pats.shape[0]:
            raise ValueError("duplicate patterns in set")
        pats.setflags(write=False)
        object.__setattr__(self, "patterns", pats)
        object.__setattr__(self, "_lookup", lookup)

    @property
    def index_bits(self) -> int:
        return self.patterns.shape[0].bit_length() - 1

    K = index_bits

    def __len__(self) -> int:
        return self.patterns.shape[0]

    def bits_to_pattern(self, bits) -> np.ndarray:
        bits = as_bits(bits)
        if bits.size != self.index_bits:
            raise ValueError(f"expected {self.index_bits} pattern bits, got {bits.size}")
        return self.patterns[bits_to_int(bits)]

    def index_of(self, pattern) -> int:
        """Label of ``pattern``; raises ``KeyError`` if it is not in the set."""
        key = (np.asarray(pattern).reshape(-1) != 0).astype(np.uint8).tobytes()
        try:
            return self._lookup[key]
        except KeyError:
            raise KeyError(f"pattern {self._fmt(pattern)} is not in the set") from None

    def contains(self, pattern) -> bool:
        key = (np.asarray(pattern).reshape(-1) != 0).astype(np.uint8).tobytes()
        return key in self._lookup

    def pattern_to_bits(self, pattern) -> np.ndarray:
        return int_to_bits(self.index_of(pattern), self.index_bits)

    @staticmethod
    def _fmt(pattern) -> str:
        return "".join(str(int(v != 0)) for v in np.asarray(pattern).reshape(-1))

    def to_text(self) -> str:
        """One pattern per line as a 0/1 string, first entry = antenna/cell 1."""
        return "".join(self._fmt(p) + "\n" for p in self.patterns)

    @classmethod
    def from_text(cls, text: str, w: int | None = None) -> "PatternSet":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows:
            raise ValueError("empty pattern file")
        pats = np.array([as_bits(r) for r in rows], dtype=np.uint8)
        n = pats.shape[1]
        weight = int(pats[0].sum()) if w is None else w
        return cls(n, weight, pats)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, w: int | None = None) -> "PatternSet":
        return cls.from_text(Path(path).read_text(), w)


def build_pattern_set(n: int, w: int, override: Iterable | None = None) -> PatternSet:
    """First 2^K patterns in canonical order, or ``override`` verbatim."""
    if override is None:
        if not 1 <= w <= n:
            raise ValueError(f"need 1 <= w <= n, got n={n}, w={w}")
        return PatternSet(n, w, enumerate_patterns(n, w, limit=1 << index_bits(n, w)))
    rows = [as_bits(p).reshape(-1) if isinstance(p, str) else np.asarray(p).reshape(-1) for p in override]
    return PatternSet(n, w, np.array(rows, dtype=np.uint8))
