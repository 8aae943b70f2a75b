"""1-D absorbing random walk: closed forms and a Monte Carlo oracle.

Cells ``1..a-1`` are free, walls sit at ``0`` and ``a``. The walker starts at
``z`` and steps toward wall 0 with probability ``p_toward`` (``q`` below) and
away with ``p = 1 - q``. Ruin means absorption at wall 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import CENSORED, GAIN, RUIN, absorb_chunk

_EPS = np.finfo(float).eps


class PrecisionError(ArithmeticError):
    """Cancellation wiped out the significant digits of a result."""


@dataclass(frozen=True)
class RuinParams:
    z: int
    a: int
    p_toward: float

    def __post_init__(self):
        if not 0 < self.z < self.a:
            raise ValueError(f"need 0 < z < a, got z={self.z}, a={self.a}")
        if not 0.0 <= self.p_toward <= 1.0:
            raise ValueError(f"p_toward must be a probability, got {self.p_toward}")

    @property
    def q(self) -> float:
        return self.p_toward

    @property
    def p(self) -> float:
        return 1.0 - self.p_toward


def _require_open(params: RuinParams) -> None:
    if not 0.0 < params.p_toward < 1.0:
        raise ValueError("closed forms need 0 < p_toward < 1")


def ruin_probability(params: RuinParams) -> float:
    _require_open(params)
    z, a, q, p = params.z, params.a, params.q, params.p
    if q == p:
        return 1.0 - z / a
    lr = math.log(q / p)
    if lr > 0:
        # divide through by r^a so nothing overflows
        return math.expm1((z - a) * lr) / math.expm1(-a * lr)
    return (math.exp(z * lr) - math.exp(a * lr)) / -math.expm1(a * lr)


def _ratio_term(z: int, a: int, lr: float) -> float:
    """(1 - r^z) / (1 - r^a) with r = exp(lr), evaluated without overflow."""
    if lr > 0:
        return math.exp((z - a) * lr) * math.expm1(-z * lr) / math.expm1(-a * lr)
    return math.expm1(z * lr) / math.expm1(a * lr)


def expected_duration(params: RuinParams) -> float:
    """Expected number of steps until either wall is hit."""
    _require_open(params)
    z, a, q, p = params.z, params.a, params.q, params.p
    if q == p:
        return float(z * (a - z))
    d = q - p
    return z / d - (a / d) * _ratio_term(z, a, math.log(q / p))


def shortest_path_probability(params: RuinParams) -> float:
    if params.z > params.a / 2:
        raise ValueError("nearest wall must be wall 0 (z <= a/2); mirror the walk first")
    return params.q ** params.z


def ruin_time_pmf(params: RuinParams, t: int) -> float:
    """Probability that ruin happens exactly on step ``t``.

    Trigonometric series for the absorbing walk, rearranged so each term is
    ``(2 sqrt(pq) cos θ)^(t-1) sin θ sin(zθ)`` times a common factor; terms
    are combined in log space and summed with ``math.fsum``.
    """
    _require_open(params)
    z, a, q, p = params.z, params.a, params.q, params.p
    if t < z or (t - z) % 2:
        return 0.0
    log_pref = math.log(2.0 / a) + 0.5 * math.log(p * q) + 0.5 * z * math.log(q / p)
    two_root = 2.0 * math.sqrt(p * q)
    logs, signs = [], []
    worst_log_base = 0.0
    for v in range(1, a):
        theta = math.pi * v / a
        base = two_root * math.cos(theta)
        trig = math.sin(theta) * math.sin(z * theta)
        if trig == 0.0:
            continue
        sign = 1.0 if trig > 0 else -1.0
        if t == 1:
            log_pow = 0.0
        elif base == 0.0:
            continue
        else:
            log_pow = (t - 1) * math.log(abs(base))
            worst_log_base = max(worst_log_base, abs(math.log(abs(base))))
            if base < 0 and (t - 1) % 2:
                sign = -sign
        logs.append(log_pow + math.log(abs(trig)))
        signs.append(sign)
    if not logs:
        return 0.0
    top = max(logs)
    scaled = [s * math.exp(lg - top) for s, lg in zip(signs, logs)]
    total = math.fsum(scaled)
    magnitude = math.fsum(abs(v) for v in scaled)
    err = 8.0 * _EPS * (1.0 + (t - 1) * worst_log_base) * magnitude
    if total <= 0.0 or err > 1e-2 * abs(total):
        raise PrecisionError(
            f"ruin_time_pmf lost its significant digits at t={t} (sum={total:.3e}, error bound={err:.3e})"
        )
    return math.exp(log_pref + top) * total


def ruin_time_pmf_table(params: RuinParams, t_max: int) -> np.ndarray:
    """pmf[t] for t = 0..t_max (entry 0 is always 0)."""
    out = np.zeros(t_max + 1)
    for t in range(1, t_max + 1):
        out[t] = ruin_time_pmf(params, t)
    return out


@dataclass
class McSummary:
    n_episodes: int
    n_ruin: int
    n_gain: int
    n_censored: int
    mean_time: float
    ruin_hist: np.ndarray  # counts of ruin at step t, index t = 0..t_max

    @property
    def ruin_fraction(self) -> float:
        return self.n_ruin / self.n_episodes

    def ruin_frequency(self) -> np.ndarray:
        return self.ruin_hist / self.n_episodes


def mc_absorbing_walk(
    params: RuinParams,
    n_episodes: int,
    seed: int,
    t_max: int = 100_000,
    chunk: int = 32,
    block: int = 1 << 17,
) -> McSummary:
    """Direct simulation; episodes still running at ``t_max`` count as censored."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    rng = np.random.default_rng(seed)
    pos = np.full(n_episodes, params.z, dtype=np.int64)
    times = np.zeros(n_episodes, dtype=np.int64)
    outcome = np.zeros(n_episodes, dtype=np.int64)
    while True:
        alive = np.nonzero(outcome == 0)[0]
        if len(alive) == 0:
            break
        for lo in range(0, len(alive), block):
            rows = alive[lo:lo + block]
            u = rng.random((len(rows), chunk))
            absorb_chunk(pos, times, outcome, rows, u, params.p_toward, params.a, t_max)
    done = outcome != CENSORED
    ruined = outcome == RUIN
    hist = np.bincount(times[ruined], minlength=t_max + 1)[: t_max + 1]
    mean_time = float(times[done].mean()) if done.any() else float("nan")
    return McSummary(
        n_episodes, int(ruined.sum()), int((outcome == GAIN).sum()),
        int((~done).sum()), mean_time, hist,
    )


def near_shortest_curve(a: int, p_toward: float, slack: int, zs=None) -> tuple[np.ndarray, np.ndarray]:
    """P(ruin within ``z + slack`` steps) for each start ``z`` with wall 0 nearest."""
    zs = np.arange(1, a // 2 + 1) if zs is None else np.asarray(zs)
    vals = np.array([
        math.fsum(ruin_time_pmf(RuinParams(int(z), a, p_toward), t) for t in range(int(z), int(z) + slack + 1))
        for z in zs
    ])
    return zs, vals


def mc_near_shortest_curve(a: int, p_toward: float, slack: int, n_episodes: int, seed: int,
                           zs=None) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo counterpart of :func:`near_shortest_curve`.

    Episodes only need to run for ``z + slack`` steps, so each start uses a
    short horizon. Start ``z`` draws from seed ``seed + z``.
    """
    zs = np.arange(1, a // 2 + 1) if zs is None else np.asarray(zs)
    vals = []
    for z in zs:
        z = int(z)
        s = mc_absorbing_walk(RuinParams(z, a, p_toward), n_episodes, seed + z, t_max=z + slack)
        vals.append(s.ruin_hist[: z + slack + 1].sum() / n_episodes)
    return zs, np.array(vals)
