"""Closed-form rates, Stirling-type bounds and rate/RF-chain tables.

All binomial coefficients are exact Python integers; ``floor(log2 C)`` is the
bit length minus one, and logs are only taken after the integer is formed.
GSFIM rates are returned as :class:`fractions.Fraction` so published values
such as 35/11 bpcu can be checked exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from math import comb, log2

from .core import index_bits

__all__ = [
    "GsimRateReport",
    "RateBounds",
    "GsfimRateReport",
    "gsim_rate",
    "gsim_rate_max",
    "theorem1_holds",
    "min_rf_for_rate",
    "f_function",
    "gsim_rate_bounds",
    "n_rf_star",
    "round_half_up",
    "gsim_rmax_bounds",
    "gsfim_rate",
    "mimo_ofdm_rate",
    "optimize_k",
    "max_gsfim_rate",
    "table2",
    "gsfim_gain_table",
    "pct",
]

# log2(e / 2pi) and log2(sqrt(2pi) / e^2): the Stirling constants of the bounds
C_UPPER = log2(math.e / (2 * math.pi))
C_LOWER = log2(math.sqrt(2 * math.pi) / math.e**2)


def _log2M(M: int) -> int:
    if M < 2 or M & (M - 1):
        raise ValueError(f"M must be a power of two >= 2, got {M}")
    return M.bit_length() - 1


def _check_pair(n_t: int, n_rf: int) -> None:
    if n_t < 1 or not 1 <= n_rf <= n_t:
        raise ValueError(f"need 1 <= n_rf <= n_t, got n_t={n_t}, n_rf={n_rf}")


@dataclass(frozen=True)
class GsimRateReport:
    n_t: int
    n_rf: int
    M: int
    antenna_index_bits: int
    modulation_bits: int

    @property
    def rate_bpcu(self) -> int:
        return self.antenna_index_bits + self.modulation_bits


@dataclass(frozen=True)
class RateBounds:
    lower: int
    upper: int
    exact: int
    f_value: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.exact <= self.upper

    @property
    def gap(self) -> int:
        return max(self.exact - self.lower, self.upper - self.exact)


@dataclass(frozen=True)
class GsfimRateReport:
    n_t: int
    n_rf: int
    N: int
    n_f: int
    k: int
    M: int
    L: int
    R_A: Fraction
    R_F: Fraction
    R_Q: Fraction

    @property
    def n_b(self) -> int:
        return self.N // self.n_f

    @property
    def total(self) -> Fraction:
        return self.R_A + self.R_F + self.R_Q

    @property
    def R1(self) -> Fraction:
        return self.R_F + self.R_Q

    @property
    def bits_per_frame(self) -> int:
        return int(self.total * (self.N + self.L - 1))


def gsim_rate(n_t: int, n_rf: int, M: int) -> GsimRateReport:
    """floor(log2 C(n_t, n_rf)) + n_rf log2 M bits per channel use."""
    _check_pair(n_t, n_rf)
    return GsimRateReport(n_t, n_rf, M, index_bits(n_t, n_rf), n_rf * _log2M(M))


def gsim_rate_max(n_t: int, M: int) -> tuple[int, int]:
    """(R_max, fewest RF chains reaching it)."""
    _check_pair(n_t, 1)
    best, arg = -1, 0
    for n_rf in range(1, n_t + 1):
        r = gsim_rate(n_t, n_rf, M).rate_bpcu
        if r > best:
            best, arg = r, n_rf
    return best, arg


def theorem1_holds(n_t: int, M: int) -> bool:
    """Whether GSIM beats spatial multiplexing (n_t log2 M) at its best n_rf."""
    return gsim_rate_max(n_t, M)[0] > n_t * _log2M(M)


def min_rf_for_rate(n_t: int, M: int, target: float) -> int | None:
    if target <= 0:
        raise ValueError("target rate must be positive")
    for n_rf in range(1, n_t + 1):
        if gsim_rate(n_t, n_rf, M).rate_bpcu >= target:
            return n_rf
    return None


def _xlog2x(x: float) -> float:
    return x * log2(x) if x > 0 else 0.0


def f_function(n_t: float, n_rf: float, log2M: float) -> float:
    """n_t log n_t - n_rf log n_rf - (n_t - n_rf) log(n_t - n_rf) + n_rf log2M.

    Base-2 logs; 0 log 0 is taken as 0 so the endpoints are finite.
    """
    return _xlog2x(n_t) - _xlog2x(n_rf) - _xlog2x(n_t - n_rf) + n_rf * log2M


def _upper(f: float, n_t: int) -> int:
    return math.floor(f + 0.5 * log2(n_t / (n_t - 1)) + C_UPPER)


def _lower(f: float, n_t: int) -> int:
    return math.ceil(f - 0.5 * log2(n_t) + C_LOWER)


def gsim_rate_bounds(n_t: int, n_rf: int, M: int) -> RateBounds:
    """Integer lower/upper bounds on the GSIM rate, no factorials needed."""
    if not 1 <= n_rf <= n_t - 1:
        raise ValueError(f"bounds need 1 <= n_rf <= n_t - 1, got n_t={n_t}, n_rf={n_rf}")
    f = f_function(n_t, n_rf, _log2M(M))
    return RateBounds(_lower(f, n_t), _upper(f, n_t), gsim_rate(n_t, n_rf, M).rate_bpcu, f)


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def n_rf_star(n_t: int, M: int) -> tuple[float, int]:
    """Continuous maximizer n_t M / (M + 1) and its nearest integer."""
    x = n_t * M / (M + 1)
    return x, round_half_up(x)


def gsim_rmax_bounds(n_t: int, M: int) -> RateBounds:
    """Bounds on R_max evaluated at n_rf* instead of scanning every n_rf."""
    if n_t < 2:
        raise ValueError("R_max bounds need n_t >= 2")
    b = _log2M(M)
    _, n_star = n_rf_star(n_t, M)
    upper = math.floor(n_t * log2(M + 1) + 0.5 * log2(n_t / (n_t - 1)) + C_UPPER)
    f_star = f_function(n_t, n_star, b)
    return RateBounds(_lower(f_star, n_t), upper, gsim_rate_max(n_t, M)[0], f_star)


def gsfim_rate(n_t: int, n_rf: int, N: int, n_f: int, k: int, M: int, L: int) -> GsfimRateReport:
    _check_pair(n_t, n_rf)
    if N < 1 or n_f < 1 or N % n_f:
        raise ValueError(f"n_f={n_f} must divide N={N}")
    if not 1 <= k <= n_rf * n_f:
        raise ValueError(f"need 1 <= k <= n_rf*n_f = {n_rf * n_f}, got k={k}")
    if L < 1:
        raise ValueError("L must be >= 1")
    b = _log2M(M)
    n_b = N // n_f
    den = N + L - 1
    return GsfimRateReport(
        n_t, n_rf, N, n_f, k, M, L,
        R_A=Fraction(index_bits(n_t, n_rf), den),
        R_F=Fraction(n_b * index_bits(n_rf * n_f, k), den),
        R_Q=Fraction(n_b * k * b, den),
    )


def mimo_ofdm_rate(n_rf: int, N: int, M: int, L: int) -> Fraction:
    if n_rf < 1 or N < 1 or L < 1:
        raise ValueError("n_rf, N and L must be positive")
    return Fraction(n_rf * N * _log2M(M), N + L - 1)


def optimize_k(n_rf: int, n_f: int, M: int) -> tuple[int, int]:
    """Smallest k maximizing the bits carried by one sub-matrix."""
    Nf = n_rf * n_f
    if Nf < 1:
        raise ValueError("n_rf * n_f must be >= 1")
    b = _log2M(M)
    best, arg = -1, 0
    for k in range(1, Nf + 1):
        bits = index_bits(Nf, k) + k * b
        if bits > best:
            best, arg = bits, k
    assert arg >= Nf // 2
    return arg, best


def max_gsfim_rate(n_t: int, n_rf: int, N: int, n_f: int, M: int, L: int) -> GsfimRateReport:
    k, _ = optimize_k(n_rf, n_f, M)
    return gsfim_rate(n_t, n_rf, N, n_f, k, M, L)


def pct(x: float, places: int = 2) -> float:
    """Percentages printed the way tables usually round them (half up)."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


def table2(n_ts=(16, 32), Ms=(2, 4, 8, 16)) -> list[dict]:
    """RF-chain savings and rate increase of GSIM over spatial multiplexing."""
    rows = []
    for M in Ms:
        for n_t in n_ts:
            r_max, n_opt = gsim_rate_max(n_t, M)
            sm = n_t * _log2M(M)
            n_mid = min_rf_for_rate(n_t, M, sm)
            rows.append({
                "M": M,
                "n_t": n_t,
                "rate_max": r_max,
                "n_rf_opt": n_opt,
                "n_rf_mid": n_mid,
                "sm_rate": sm,
                "saving_at_rmax_pct": 100 * (n_t - n_opt) / n_t,
                "saving_at_sm_rate_pct": 100 * (n_t - n_mid) / n_t,
                "rate_increase_pct": 100 * (r_max - sm) / sm,
            })
    return rows


def gsfim_gain_table(grid) -> list[dict]:
    """Max GSFIM rate (best k) against MIMO-OFDM with the same n_rf.

    ``grid`` yields ``(n_t, n_rf, N, n_f, M, L)`` tuples.
    """
    rows = []
    for n_t, n_rf, N, n_f, M, L in grid:
        rep = max_gsfim_rate(n_t, n_rf, N, n_f, M, L)
        base = mimo_ofdm_rate(n_rf, N, M, L)
        rows.append({
            "n_t": n_t, "n_rf": n_rf, "N": N, "n_f": n_f, "M": M, "L": L,
            "k_best": rep.k,
            "gsfim_rate": float(rep.total),
            "mimo_ofdm_rate": float(base),
            "rate_gain_pct": float(100 * (rep.total - base) / base),
        })
    return rows
