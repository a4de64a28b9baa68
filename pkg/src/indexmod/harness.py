"""Monte Carlo BER sweeps and rate-table generation.

Every trial draws its bits, channel and noise from its own generator seeded
by ``(master_seed, snr index, trial index)``, and the detector's own
randomness from a sibling stream. Results therefore do not depend on how
trials are split across workers, and two detectors run with the same seed
see exactly the same channels and noise.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import rates
from .core import ModulationAlphabet, PatternSet, build_qam_alphabet, int_to_bits
from .gibbs import detect_gsim_gibbs
from .gsfim import (
    GsfimConfig,
    detect_ml_gsfim,
    gsfim_encode,
    ofdm_demodulate,
    ofdm_modulate,
    sample_selective_channel,
    transmit_through,
)
from .gsim import (
    GsimConfig,
    gsim_decode,
    gsim_encode,
    ml_detect_batch,
    mmse_detect_batch,
    noise_variance,
    sample_channel,
    sample_noise,
)

__all__ = [
    "ConfigError",
    "SimConfig",
    "BerRecord",
    "run_ber_sweep",
    "write_records",
    "load_config",
    "run_rate_report",
    "RATE_SERIES",
    "snr_at_ber",
]

SCHEMES = ("gsim", "sm", "gsfim", "mimo-ofdm")
DETECTORS = {"gsim": ("ml", "mmse", "gibbs"), "sm": ("ml", "mmse"),
             "gsfim": ("ml",), "mimo-ofdm": ("ml",)}


class ConfigError(ValueError):
    """Bad simulation configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True, eq=False)
class SimConfig:
    scheme: str
    detector: str
    link: GsimConfig | GsfimConfig
    snr_db: tuple[float, ...]
    seed: int = 0
    min_bit_errors: int = 200
    max_trials: int = 1_000_000
    batch_trials: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError("scheme", f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.detector not in DETECTORS[self.scheme]:
            raise ConfigError("detector", f"{self.detector!r} cannot detect {self.scheme!r} "
                                          f"(allowed: {', '.join(DETECTORS[self.scheme])})")
        if self.detector == "gibbs" and self.link.n_rf >= self.link.n_t:
            raise ConfigError("detector", "gibbs needs n_rf < n_t (nothing to swap)")
        if not self.snr_db:
            raise ConfigError("snr_db", "need at least one SNR point")
        if self.min_bit_errors < 1:
            raise ConfigError("min_bit_errors", "must be >= 1")
        if self.max_trials < 1:
            raise ConfigError("max_trials", "must be >= 1")
        if self.batch_trials < 1:
            raise ConfigError("batch_trials", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")

    @property
    def is_ofdm(self) -> bool:
        return self.scheme in ("gsfim", "mimo-ofdm")

    @property
    def bits_per_trial(self) -> int:
        return self.link.bits_per_frame if self.is_ofdm else self.link.bits_per_vector

    @property
    def rate_bpcu(self) -> float:
        return float(self.link.rate)

    def noise_var(self, snr_db: float) -> float:
        active = self.link.active_per_subcarrier if self.is_ofdm else self.link.n_rf
        return noise_variance(snr_db, active, self.link.alphabet)

    @classmethod
    def from_mapping(cls, d: Mapping[str, Any], base_dir: Path | None = None) -> "SimConfig":
        return _config_from_mapping(dict(d), base_dir or Path("."))

    def replace(self, **kw) -> "SimConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kw)
        return SimConfig(**vals)


@dataclass
class BerRecord:
    scheme: str
    detector: str
    snr_db: float
    trials: int
    bit_errors: int
    ber: float
    rate_bpcu: float
    mean_iterations: float
    mean_restarts: float
    fallback_count: int
    wall_time_s: float
    truncated: bool = False


_INT_KEYS = ("n_t", "n_rf", "n_r", "M", "N", "n_f", "k", "L", "seed",
             "min_bit_errors", "max_trials", "batch_trials", "workers")
_KNOWN = set(_INT_KEYS) | {"scheme", "detector", "snr_db", "antenna_patterns",
                           "freq_patterns", "labeling"}


def _int(d: dict, key: str, default=None) -> int:
    if key not in d:
        if default is None:
            raise ConfigError(key, "missing required key")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    return v


def _alphabet(d: dict) -> ModulationAlphabet:
    M = _int(d, "M")
    if "labeling" in d:
        try:
            lab = {str(k): complex(*v) if isinstance(v, (list, tuple)) else complex(v)
                   for k, v in d["labeling"].items()}
            alpha = ModulationAlphabet.from_labels(lab)
        except (TypeError, ValueError, AttributeError) as e:
            raise ConfigError("labeling", str(e)) from None
        if alpha.order != M:
            raise ConfigError("labeling", f"has {alpha.order} points but M = {M}")
        return alpha
    try:
        return build_qam_alphabet(M)
    except ValueError as e:
        raise ConfigError("M", str(e)) from None


def _patterns(d: dict, key: str, base_dir: Path, w: int):
    if key not in d:
        return None
    path = base_dir / d[key]
    try:
        return PatternSet.load(path, w).patterns
    except OSError as e:
        raise ConfigError(key, f"cannot read pattern file {path}: {e.strerror}") from None
    except ValueError as e:
        raise ConfigError(key, str(e)) from None


def _config_from_mapping(d: dict, base_dir: Path) -> SimConfig:
    unknown = sorted(set(d) - _KNOWN)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    scheme = d.get("scheme")
    if scheme is None:
        raise ConfigError("scheme", "missing required key")
    if scheme not in SCHEMES:
        raise ConfigError("scheme", f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    detector = d.get("detector", "ml")
    snr = d.get("snr_db")
    if snr is None:
        raise ConfigError("snr_db", "missing required key")
    if isinstance(snr, (int, float)):
        snr = [snr]
    try:
        snr = tuple(float(s) for s in snr)
    except (TypeError, ValueError):
        raise ConfigError("snr_db", f"expected a list of numbers, got {d['snr_db']!r}") from None
    alphabet = _alphabet(d)
    n_r = _int(d, "n_r")
    try:
        if scheme in ("gsim", "sm"):
            n_t = _int(d, "n_t")
            n_rf = n_t if scheme == "sm" else _int(d, "n_rf")
            if scheme == "sm" and d.get("n_rf", n_t) != n_t:
                raise ConfigError("n_rf", "spatial multiplexing needs n_rf == n_t")
            if not 1 <= n_rf <= n_t:
                raise ConfigError("n_rf", f"need 1 <= n_rf <= n_t, got n_rf={n_rf}, n_t={n_t}")
            link = GsimConfig.build(n_t, n_rf, n_r, alphabet=alphabet,
                                    patterns=_patterns(d, "antenna_patterns", base_dir, n_rf))
        else:
            N, L = _int(d, "N"), _int(d, "L")
            if scheme == "mimo-ofdm":
                n_rf = _int(d, "n_rf", d.get("n_t"))
                if "n_t" in d and d["n_t"] != n_rf:
                    raise ConfigError("n_t", "MIMO-OFDM uses every antenna: n_t must equal n_rf")
                link = GsfimConfig.mimo_ofdm(n_rf, n_r, N, L, alphabet=alphabet)
            else:
                n_t, n_rf, n_f = _int(d, "n_t"), _int(d, "n_rf"), _int(d, "n_f")
                if not 1 <= n_rf <= n_t:
                    raise ConfigError("n_rf", f"need 1 <= n_rf <= n_t, got n_rf={n_rf}, n_t={n_t}")
                if n_f < 1 or N % n_f:
                    raise ConfigError("n_f", f"n_f={n_f} does not divide N={N}")
                k = _int(d, "k", rates.optimize_k(n_rf, n_f, alphabet.order)[0])
                if not 1 <= k <= n_rf * n_f:
                    raise ConfigError("k", f"need 1 <= k <= n_rf*n_f = {n_rf * n_f}")
                link = GsfimConfig.build(
                    n_t, n_rf, n_r, N, n_f, k, L, alphabet=alphabet,
                    antenna_patterns=_patterns(d, "antenna_patterns", base_dir, n_rf),
                    freq_patterns=_patterns(d, "freq_patterns", base_dir, k))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError("link", str(e)) from None
    kw = {k: _int(d, k) for k in ("seed", "min_bit_errors", "max_trials", "batch_trials", "workers") if k in d}
    return SimConfig(scheme, detector, link, snr, **kw)


def load_config(path) -> SimConfig:
    """Read a flat TOML file of ``key = value`` lines."""
    import tomli

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e.strerror}") from None
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ConfigError("config", f"{path}: {e}") from None
    return SimConfig.from_mapping(data, path.parent)


def _streams(seed: int, snr_idx: int, trial: int):
    data = np.random.SeedSequence(seed, spawn_key=(snr_idx, trial, 0))
    det = np.random.SeedSequence(seed, spawn_key=(snr_idx, trial, 1))
    return np.random.Generator(np.random.PCG64(data)), np.random.Generator(np.random.PCG64(det))


def _gsim_chunk(sim: SimConfig, snr_idx: int, start: int, stop: int):
    cfg = sim.link.with_noise(sim.noise_var(sim.snr_db[snr_idx]))
    n = stop - start
    nb = cfg.bits_per_vector
    bits = np.empty((n, nb), dtype=np.uint8)
    H = np.empty((n, cfg.n_r, cfg.n_t), dtype=np.complex128)
    noise = np.empty((n, cfg.n_r), dtype=np.complex128)
    det_rngs = []
    for t in range(n):
        rng, det_rng = _streams(sim.seed, snr_idx, start + t)
        bits[t] = rng.integers(0, 2, nb, dtype=np.uint8)
        H[t] = sample_channel(rng, cfg.n_r, cfg.n_t)
        noise[t] = sample_noise(rng, cfg.noise_var, cfg.n_r)
        det_rngs.append(det_rng)
    x = gsim_encode(bits, cfg)
    Y = (H @ x[:, :, None])[..., 0] + noise
    iters = np.zeros(n, dtype=np.int64)
    rsts = np.zeros(n, dtype=np.int64)
    fb = np.zeros(n, dtype=np.int64)
    if sim.detector == "ml":
        bhat = int_to_bits(ml_detect_batch(Y, H, cfg), nb)
    elif sim.detector == "mmse":
        bhat = gsim_decode(mmse_detect_batch(Y, H, cfg), cfg)
    else:
        bhat = np.empty_like(bits)
        for t in range(n):
            res = detect_gsim_gibbs(Y[t], H[t], cfg, det_rngs[t])
            bhat[t] = res.bits
            iters[t], rsts[t], fb[t] = res.iterations, res.restarts, res.fallback_used
    errs = np.count_nonzero(bhat != bits, axis=1)
    return errs, iters, rsts, fb


def _ofdm_chunk(sim: SimConfig, snr_idx: int, start: int, stop: int):
    cfg = sim.link
    s2 = sim.noise_var(sim.snr_db[snr_idx])
    n = stop - start
    errs = np.zeros(n, dtype=np.int64)
    for t in range(n):
        rng, _ = _streams(sim.seed, snr_idx, start + t)
        bits = rng.integers(0, 2, cfg.bits_per_frame, dtype=np.uint8)
        frame = gsfim_encode(bits, cfg)
        ch = sample_selective_channel(rng, cfg.n_r, cfg.n_t, cfg.L, cfg.N)
        r = transmit_through(ofdm_modulate(frame, cfg.L), frame.active_antennas, ch, s2, rng)
        Y = ofdm_demodulate(r, cfg.N, cfg.L).T
        det = detect_ml_gsfim(Y, ch.per_subcarrier, cfg)
        errs[t] = np.count_nonzero(det.bits != bits)
    zeros = np.zeros(n, dtype=np.int64)
    return errs, zeros, zeros, zeros


def run_chunk(sim: SimConfig, snr_idx: int, start: int, stop: int):
    """Per-trial (bit errors, iterations, restarts, fallback flags)."""
    if sim.is_ofdm:
        return _ofdm_chunk(sim, snr_idx, start, stop)
    return _gsim_chunk(sim, snr_idx, start, stop)


def _split(start: int, stop: int, parts: int):
    edges = np.linspace(start, stop, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_ber_sweep(sim: SimConfig, progress=None) -> list[BerRecord]:
    """One record per SNR point; stops each point on the error/trial rule.

    Trials run in batches of ``batch_trials``; the stop rule is checked
    between batches, so the trial count is a multiple of the batch size
    (or ``max_trials``) whatever the worker count.
    """
    records = []
    pool = ProcessPoolExecutor(sim.workers) if sim.workers > 1 else None
    try:
        for si, snr in enumerate(sim.snr_db):
            t0 = time.perf_counter()
            trials = errors = iters = rsts = fbs = 0
            while errors < sim.min_bit_errors and trials < sim.max_trials:
                stop = min(trials + sim.batch_trials, sim.max_trials)
                if pool is None:
                    parts = [run_chunk(sim, si, trials, stop)]
                else:
                    spans = _split(trials, stop, sim.workers)
                    parts = list(pool.map(run_chunk, [sim] * len(spans), [si] * len(spans),
                                          [a for a, _ in spans], [b for _, b in spans]))
                e, it, rs, fb = (np.concatenate(p) for p in zip(*parts))
                errors += int(e.sum())
                iters += int(it.sum())
                rsts += int(rs.sum())
                fbs += int(fb.sum())
                trials = stop
            rec = BerRecord(
                scheme=sim.scheme, detector=sim.detector, snr_db=snr, trials=trials,
                bit_errors=errors, ber=errors / (trials * sim.bits_per_trial),
                rate_bpcu=sim.rate_bpcu, mean_iterations=iters / trials,
                mean_restarts=rsts / trials, fallback_count=fbs,
                wall_time_s=time.perf_counter() - t0,
                truncated=errors < sim.min_bit_errors,
            )
            records.append(rec)
            if progress:
                progress(rec)
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def _record_rows(records, timing: bool):
    for r in records:
        d = asdict(r)
        if not timing:
            d["wall_time_s"] = 0.0
        yield d


def write_records(records, path=None, fmt: str = "csv", timing: bool = True) -> str:
    """Serialize BER records as CSV (header row) or JSON lines.

    With ``timing=False`` the wall-clock column is written as 0 so repeated
    runs produce byte-identical files.
    """
    buf = io.StringIO()
    rows = list(_record_rows(records, timing))
    names = [f.name for f in fields(BerRecord)]
    if fmt == "csv":
        w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    elif fmt == "jsonl":
        for row in rows:
            buf.write(json.dumps(row) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def snr_at_ber(records, target: float) -> float:
    """SNR where the curve crosses ``target``, by log-linear interpolation."""
    pts = [(r.snr_db, r.ber) for r in sorted(records, key=lambda r: r.snr_db)]
    for (s0, b0), (s1, b1) in zip(pts, pts[1:]):
        if b0 >= target > b1:
            if b1 == 0:
                return s1
            l0, l1, lt = math.log10(b0), math.log10(b1), math.log10(target)
            return s0 + (s1 - s0) * (l0 - lt) / (l0 - l1)
    return math.nan


# ---- rate reports ---------------------------------------------------------

def _gsim_rate_series():
    for n_t in (4, 8, 12, 16, 22, 32):
        for n_rf in range(1, n_t + 1):
            rep = rates.gsim_rate(n_t, n_rf, 4)
            yield {"n_t": n_t, "n_rf": n_rf, "M": 4, "antenna_index_bits": rep.antenna_index_bits,
                   "modulation_bits": rep.modulation_bits, "rate_bpcu": rep.rate_bpcu}


def _gsim_bounds_series():
    for n_rf in range(1, 16):
        b = rates.gsim_rate_bounds(16, n_rf, 2)
        yield {"n_t": 16, "n_rf": n_rf, "M": 2, "lower": b.lower, "rate_bpcu": b.exact,
               "upper": b.upper, "f_value": b.f_value}


def _rmax_bounds_series():
    for M in (2, 4):
        for n_t in range(2, 33):
            b = rates.gsim_rmax_bounds(n_t, M)
            yield {"n_t": n_t, "M": M, "lower": b.lower, "rate_max": b.exact, "upper": b.upper,
                   "n_rf_opt": rates.gsim_rate_max(n_t, M)[1],
                   "n_rf_star": rates.n_rf_star(n_t, M)[0],
                   "asymptote": n_t * math.log2(M + 1)}


def _r1_vs_k_series(N=32, L=4, n_rf=8):
    for M in (2, 4):
        for Nf in (8, 16, 32):
            n_f = Nf // n_rf
            for k in range(1, Nf + 1):
                rep = rates.gsfim_rate(n_rf, n_rf, N, n_f, k, M, L)
                yield {"M": M, "N_f": Nf, "n_rf": n_rf, "n_f": n_f, "N": N, "L": L, "k": k,
                       "bits_per_submatrix": rates.index_bits(Nf, k) + k * (M.bit_length() - 1),
                       "R1": float(rep.R1)}


def _gsfim_vs_nt_series(n_rf=8, N=32, L=4):
    for M in (2, 4):
        for n_f in (1, 2, 4, 8, 16, 32):
            for n_t in range(n_rf, 33):
                rep = rates.max_gsfim_rate(n_t, n_rf, N, n_f, M, L)
                base = rates.mimo_ofdm_rate(n_rf, N, M, L)
                yield {"M": M, "n_f": n_f, "n_t": n_t, "n_rf": n_rf, "N": N, "L": L, "k_best": rep.k,
                       "gsfim_rate": float(rep.total), "mimo_ofdm_rate": float(base),
                       "rate_gain_pct": float(100 * (rep.total - base) / base)}


def _gsfim_gain_series(n_t=32, N=32, L=4):
    grid = [(n_t, n_rf, N, n_f, M, L) for M in (2, 4) for n_f in (2, 4, 8, 16, 32)
            for n_rf in range(1, n_t + 1)]
    yield from rates.gsfim_gain_table(grid)


def _gsfim_vs_nrf_series(n_t=32, N=32, L=4):
    grid = [(n_t, n_rf, N, n_f, M, L) for M in (2, 4) for n_f in (1, 32) for n_rf in range(1, n_t + 1)]
    yield from rates.gsfim_gain_table(grid)


def _gsfim_rf_savings_series(n_t=32, N=32, L=4):
    for M in (2, 4):
        base = rates.mimo_ofdm_rate(n_t, N, M, L)
        for n_f in (1, 4, 32):
            need = next((n_rf for n_rf in range(1, n_t + 1)
                         if rates.max_gsfim_rate(n_t, n_rf, N, n_f, M, L).total >= base), None)
            yield {"M": M, "n_t": n_t, "N": N, "L": L, "n_f": n_f, "mimo_ofdm_rate": float(base),
                   "n_rf_needed": need,
                   "rf_saving_pct": None if need is None else 100 * (n_t - need) / n_t}


def _gsfim_vs_nf_series(n_t=32, n_rf=8, N=32, L=4):
    for M in (2, 4):
        sat = n_rf * N * math.log2(M + 1) / (N + L - 1)
        for n_f in (1, 2, 4, 8, 16, 32):
            rep = rates.max_gsfim_rate(n_t, n_rf, N, n_f, M, L)
            yield {"M": M, "n_t": n_t, "n_rf": n_rf, "N": N, "L": L, "n_f": n_f, "k_best": rep.k,
                   "gsfim_rate": float(rep.total), "R1": float(rep.R1), "R1_saturation": sat}


def _table2_series():
    for row in rates.table2():
        out = dict(row)
        for key in ("saving_at_rmax_pct", "saving_at_sm_rate_pct", "rate_increase_pct"):
            out[key] = rates.pct(row[key])
        yield out


RATE_SERIES = {
    "table2": _table2_series,
    "gsim-rate": _gsim_rate_series,
    "gsim-bounds": _gsim_bounds_series,
    "rmax-bounds": _rmax_bounds_series,
    "r1-vs-k": _r1_vs_k_series,
    "gsfim-vs-nt": _gsfim_vs_nt_series,
    "gsfim-gain": _gsfim_gain_series,
    "gsfim-vs-nrf": _gsfim_vs_nrf_series,
    "gsfim-rf-savings": _gsfim_rf_savings_series,
    "gsfim-vs-nf": _gsfim_vs_nf_series,
}


def run_rate_report(series: str) -> list[dict]:
    try:
        return list(RATE_SERIES[series]())
    except KeyError:
        raise ValueError(f"unknown series {series!r}; choose from {', '.join(RATE_SERIES)}") from None


def rows_to_csv(rows, path=None) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
