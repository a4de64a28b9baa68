"""Restarted Gibbs-sampling detector for GSIM.

The chain moves over vectors with exactly ``n_rf`` non-zero entries. Each
step looks at one active position ``i`` and one silent position ``j`` and
picks between two candidates:

* no swap -- keep the support, re-fit ``x_i`` along ``e_i`` and quantize;
* swap    -- silence ``i``, activate ``j`` and fit ``x_j`` the same way.

The choice is a logistic draw on the cost difference, mixed with a
fair coin with probability ``q = 1/n_t``. A run stops once the best vector
has not improved for ``Theta_s`` iterations; restarts continue until the
best valid output has been seen ``Theta_r`` times or the restart budget is
spent. The first restart starts from the projected MMSE vector.

Costs are tracked incrementally through the gradient ``g = H^H (y - Hx)``,
which equals the conjugate of ``y_MF - x^H R`` used in the textbook form
of the coordinate update.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gsim import (
    DetectionResult,
    GsimConfig,
    gsim_decode,
    ml_cost,
    mmse_estimate,
    project_to_valid,
)

__all__ = [
    "GibbsParams",
    "GibbsState",
    "gibbs_lambda_opt",
    "gibbs_candidates",
    "gibbs_sample_step",
    "swap_probability",
    "normalized_cost",
    "stopping_metric",
    "restart_metric",
    "detect_gsim_gibbs",
]

EXP_CLAMP = 1e6
# relative change in the best cost that counts as an improvement for the stop rule
_REL_TOL = 1e-10


@dataclass(frozen=True)
class GibbsParams:
    c_min: float
    c1: float
    c2: float
    max_itr: int
    max_rst: int
    q: float

    @classmethod
    def default(cls, n_t: int, n_rf: int, M: int) -> "GibbsParams":
        b = M.bit_length() - 1
        c_min = 10 * n_rf * (n_t - n_rf)
        return cls(
            c_min=c_min,
            c1=c_min * b,
            c2=0.5 * (1 + b),
            max_itr=int(math.ceil(8 * n_t * n_rf * (n_t - n_rf) * math.sqrt(M))),
            max_rst=20,
            q=1.0 / n_t,
        )


class GibbsState:
    """Mutable chain state for one detector invocation."""

    def __init__(self, y, H, config: GsimConfig, x0):
        self.y = np.asarray(y, dtype=np.complex128)
        self.H = np.asarray(H, dtype=np.complex128)
        self.config = config
        self.points = config.alphabet.points
        self.y_mf = self.y.conj() @ self.H          # row vector y^H H
        self.R = self.H.conj().T @ self.H
        self.Rdiag = np.real(np.diag(self.R)).copy()
        if np.any(self.Rdiag <= 0):
            raise ValueError("channel has an all-zero column")
        self.reset(x0)

    def reset(self, x0) -> None:
        self.x = np.array(x0, dtype=np.complex128)
        if np.count_nonzero(self.x) != self.config.n_rf:
            raise ValueError(f"initial vector must have {self.config.n_rf} non-zero entries")
        self.resync()
        self.z = self.x.copy()
        self.beta = self.cost
        self.t = 0

    def resync(self) -> None:
        """Recompute gradient and cost from scratch to shed rounding drift."""
        self.g = self.y_mf.conj() - self.R @ self.x
        self.cost = ml_cost(self.y, self.H, self.x)

    def quantize(self, v: complex) -> complex:
        return complex(self.points[np.argmin(np.abs(self.points - v))])

    def move(self, i: int, new: complex) -> None:
        d = new - self.x[i]
        if d == 0:
            return
        gi = self.g[i]
        self.cost += -2 * (d.conjugate() * gi).real + abs(d) ** 2 * self.Rdiag[i]
        self.g -= self.R[:, i] * d
        self.x[i] = new


def gibbs_lambda_opt(state: GibbsState, i: int) -> complex:
    """Unconstrained best step along ``e_i``: (y_MF_i - x^H r_i)^* / R_ii."""
    return complex(np.conj(state.y_mf[i] - state.x.conj() @ state.R[:, i]) / state.Rdiag[i])


def _delta_cost(g_i: complex, R_ii: float, d: complex) -> float:
    return -2 * (d.conjugate() * g_i).real + abs(d) ** 2 * R_ii


def gibbs_candidates(state: GibbsState, i: int, j: int):
    """No-swap and swap candidates for active ``i`` and silent ``j``.

    Returns ``((i, a_ns, cost_ns), (j, a_s, cost_s))``: the no-swap candidate
    sets ``x_i = a_ns``; the swap candidate zeroes ``x_i`` and sets
    ``x_j = a_s``. Use :func:`candidate_vectors` for the full vectors.
    """
    x = state.x
    if x[i] == 0 or x[j] != 0:
        raise ValueError("need x[i] != 0 and x[j] == 0")
    g, Rd = state.g, state.Rdiag
    gi = complex(g[i])
    xi = complex(x[i])

    a_ns = state.quantize(xi + gi / Rd[i])
    cost_ns = state.cost + _delta_cost(gi, Rd[i], a_ns - xi)

    # silence i, then fit the freshly activated j against the new residual
    d1 = -xi
    cost_1 = state.cost + _delta_cost(gi, Rd[i], d1)
    gj = complex(g[j] - state.R[j, i] * d1)
    a_s = state.quantize(gj / Rd[j])
    cost_s = cost_1 + _delta_cost(gj, Rd[j], a_s)
    return (i, a_ns, cost_ns), (j, a_s, cost_s)


def candidate_vectors(state: GibbsState, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    (_, a_ns, _), (_, a_s, _) = gibbs_candidates(state, i, j)
    x_ns = state.x.copy()
    x_ns[i] = a_ns
    x_s = state.x.copy()
    x_s[i] = 0
    x_s[j] = a_s
    return x_ns, x_s


def swap_probability(cost_s: float, cost_ns: float, noise_var: float, q: float) -> float:
    """(1 - q) * sigmoid(-(cost_s - cost_ns) / sigma^2) + q / 2."""
    u = -(cost_s - cost_ns) / noise_var
    if u >= 0:
        p = 1.0 / (1.0 + math.exp(-u))
    else:
        e = math.exp(u)
        p = e / (1.0 + e)
    return (1 - q) * p + q / 2


def gibbs_sample_step(state: GibbsState, i: int, j: int, rng: np.random.Generator,
                      q: float | None = None) -> bool:
    """Advance the chain by one step; returns True if the swap was taken."""
    q = 1.0 / state.config.n_t if q is None else q
    (_, a_ns, cost_ns), (_, a_s, cost_s) = gibbs_candidates(state, i, j)
    p_s = swap_probability(cost_s, cost_ns, max(state.config.noise_var, 1e-300), q)
    if rng.random() < p_s:
        state.move(i, 0j)
        state.move(j, a_s)
        state.cost = cost_s
        swapped = True
    else:
        state.move(i, a_ns)
        state.cost = cost_ns
        swapped = False
    if state.cost <= state.beta:
        state.z = state.x.copy()
        state.beta = state.cost
    return swapped


def normalized_cost(cost: float, n_r: int, noise_var: float) -> float:
    """(cost - n_r sigma^2) / (sqrt(n_r) sigma^2)."""
    return (cost - n_r * noise_var) / (math.sqrt(n_r) * noise_var)


def stopping_metric(phi: float, params: GibbsParams) -> int:
    e = math.exp(min(phi, math.log(EXP_CLAMP)))
    return math.ceil(max(params.c_min, params.c1 * e))


def restart_metric(phi: float, params: GibbsParams) -> int:
    return math.floor(max(0.0, params.c2 * phi)) + 1


def _random_start(config: GsimConfig, rng: np.random.Generator) -> np.ndarray:
    pats = config.pattern_set.patterns
    p = pats[rng.integers(len(pats))]
    x = np.zeros(config.n_t, dtype=np.complex128)
    x[p.astype(bool)] = config.alphabet.points[rng.integers(config.alphabet.order, size=config.n_rf)]
    return x


def detect_gsim_gibbs(y, H, config: GsimConfig, rng: np.random.Generator,
                      params: GibbsParams | None = None, trace: list | None = None) -> DetectionResult:
    """Gibbs-sampling GSIM detection with stopping and restart rules.

    ``trace``, if given, receives one ``(restart, t, beta)`` tuple per step;
    tests use it to check that the best cost never increases.
    """
    n_t, n_rf = config.n_t, config.n_rf
    if n_rf >= n_t:
        raise ValueError("Gibbs detection needs n_rf < n_t (there is nothing to swap)")
    if config.noise_var <= 0:
        raise ValueError("Gibbs detection needs noise_var > 0")
    params = params or GibbsParams.default(n_t, n_rf, config.alphabet.order)
    s2, n_r = config.noise_var, config.n_r

    x_mmse = project_to_valid(mmse_estimate(y, H, s2), config)
    state = GibbsState(y, H, config, x_mmse)

    kappa = math.inf
    s = None
    r_s = 0
    theta_r = 1
    total_itr = 0
    r = 0
    while r < params.max_rst:
        if r > 0:
            state.reset(_random_start(config, rng))
        theta_s = stopping_metric(normalized_cost(state.beta, n_r, s2), params)
        last_change = 0
        best_seen = state.beta
        while state.t < params.max_itr:
            state.resync()
            for l in range(n_rf):
                for k in range(n_t - n_rf):
                    active = np.flatnonzero(state.x)
                    silent = np.flatnonzero(state.x == 0)
                    gibbs_sample_step(state, int(active[l]), int(silent[k]), rng, params.q)
                    state.t += 1
                    if state.beta < best_seen * (1 - _REL_TOL) or (best_seen <= 0 and state.beta < best_seen):
                        best_seen = state.beta
                        last_change = state.t
                        theta_s = stopping_metric(normalized_cost(state.beta, n_r, s2), params)
                    if trace is not None:
                        trace.append((r, state.t, state.beta))
            if theta_s < state.t and state.t - last_change >= theta_s:
                break
        total_itr += state.t
        r += 1

        z = state.z
        if not config.pattern_set.contains(z != 0):
            continue
        beta = ml_cost(y, H, z)
        if beta < kappa:
            kappa, s, r_s = beta, z.copy(), 1
            theta_r = restart_metric(normalized_cost(kappa, n_r, s2), params)
        elif beta == kappa:
            r_s += 1
        if r_s >= theta_r:
            break

    if s is None:
        return DetectionResult("gibbs", x_mmse, gsim_decode(x_mmse, config), ml_cost(y, H, x_mmse),
                               iterations=total_itr, restarts=r, fallback_used=True)
    return DetectionResult("gibbs", s, gsim_decode(s, config), kappa,
                           iterations=total_itr, restarts=r)
