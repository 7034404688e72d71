"""Multi-pair SPDC source states and the imperfect-visibility noise model."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq, minimize_scalar

from .fock import (ConfigError, MixedState, PureState, TruncationError,
                   apply_creation, make_vacuum)

DEFAULT_REP_RATE = 76e6  # pulses per second


@dataclass(frozen=True)
class SpdcParams:
    r: float
    n_max: int = 4
    rep_rate: float = DEFAULT_REP_RATE
    pair_rate: float | None = None  # detected pairs/second, for calibration

    def __post_init__(self):
        if self.r < 0:
            raise ConfigError(f"coupling r={self.r} must be >= 0")
        if self.n_max < 1:
            raise ConfigError(f"n_max={self.n_max} must be >= 1")


@dataclass(frozen=True)
class SourceNoise:
    visibility: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.visibility <= 1.0):
            raise ConfigError(f"visibility {self.visibility} outside [0, 1]")


def pair_probability(n: int, r: float) -> float:
    """p_n = (n+1) tanh^{2n}(r) / cosh^4(r)."""
    if n < 0:
        raise ConfigError("pair count must be >= 0")
    if r == 0.0:
        return 1.0 if n == 0 else 0.0
    return (n + 1) * math.tanh(r) ** (2 * n) / math.cosh(r) ** 4


def _p1_peak() -> tuple[float, float]:
    res = minimize_scalar(lambda r: -pair_probability(1, r),
                          bounds=(1e-6, 3.0), method="bounded",
                          options={"xatol": 1e-13})
    return res.x, -res.fun


def coupling_from_rate(p1: float) -> float:
    """Invert p_1(r) = 2 tanh^2(r)/cosh^4(r) on its increasing branch."""
    if p1 < 0:
        raise ConfigError(f"p1={p1} must be >= 0")
    if p1 == 0.0:
        return 0.0
    r_peak, p_max = _p1_peak()
    if p1 > p_max:
        raise ConfigError(f"p1={p1} exceeds achievable maximum {p_max:.6g}")
    return brentq(lambda r: pair_probability(1, r) - p1, 0.0, r_peak,
                  xtol=1e-12, rtol=8.9e-16)


_MODE_AX = ("a", "x")
_MODE_AY = ("a", "y")
_MODE_BX = ("b", "x")
_MODE_BY = ("b", "y")

SOURCE_MODES = (_MODE_AX, _MODE_AY, _MODE_BX, _MODE_BY)


def _apply_pair_operator(state: PureState, sign: float,
                         max_photons: int) -> PureState:
    """Apply a_x b_y + sign * a_y b_x (creation operators)."""
    first = apply_creation(apply_creation(state, _MODE_AX, max_photons),
                           _MODE_BY, max_photons)
    second = apply_creation(apply_creation(state, _MODE_AY, max_photons),
                            _MODE_BX, max_photons)
    return first.add(second.scaled(sign))


def _pair_power_state(n_singlet: int, n_flipped: int,
                      max_photons: int) -> PureState:
    """Normalized state from n_singlet singlet-pair ops and n_flipped
    phase-flipped ones applied to vacuum."""
    state = make_vacuum()
    for _ in range(n_singlet):
        state = _apply_pair_operator(state, -1.0, max_photons)
    for _ in range(n_flipped):
        state = _apply_pair_operator(state, +1.0, max_photons)
    return state.normalized()


def n_pair_state(n: int, n_max: int | None = None) -> PureState:
    """Normalized n-pair state: (a_x b_y - a_y b_x)^n |vac> up to norm.

    The unnormalized operator-power expansion has norm^2 = (n+1)(n!)^2.
    """
    if n_max is not None and n > n_max:
        raise TruncationError(f"n={n} exceeds pair truncation {n_max}")
    if n == 0:
        return make_vacuum()
    return _pair_power_state(n, 0, max_photons=2 * n)


def unnormalized_pair_power_norm_sq(n: int) -> float:
    return (n + 1) * math.factorial(n) ** 2


def spdc_state(params: SpdcParams) -> PureState:
    """Coherent superposition sum_n sqrt(p_n) |n pairs> up to n_max.

    Sub-normalized: norm^2 equals the truncated sum of p_n.  Relative phases
    across photon-number sectors are unobservable in detection statistics.
    """
    state = PureState()
    for n in range(params.n_max + 1):
        w = pair_probability(n, params.r)
        if w > 0.0:
            state = state.add(n_pair_state(n).scaled(math.sqrt(w)))
    return state


def truncation_deficit(params: SpdcParams) -> float:
    return 1.0 - sum(pair_probability(n, params.r)
                     for n in range(params.n_max + 1))


def dephased_branch_weights(n: int, visibility: float) -> list[float]:
    """Weight of the branch with j phase-flipped pairs out of n.

    Each emitted pair is ideal with probability V and H/V-dephased with
    probability 1-V; a dephased pair is an equal mixture of the singlet and
    its one-arm sigma_z flip, so the flip probability per pair is (1-V)/2.
    """
    p_flip = (1.0 - visibility) / 2.0
    return [math.comb(n, j) * (1.0 - p_flip) ** (n - j) * p_flip ** j
            for j in range(n + 1)]


def dephased_source(params: SpdcParams, noise: SourceNoise) -> MixedState:
    """Incoherent mixture over (pair number, number of flipped pairs).

    The one-pair branch reproduces diagonal-basis visibility V exactly.
    """
    branches = []
    for n in range(params.n_max + 1):
        p_n = pair_probability(n, params.r)
        if p_n <= 0.0:
            continue
        for j, w in enumerate(dephased_branch_weights(n, noise.visibility)):
            if w <= 0.0:
                continue
            branches.append((p_n * w, _pair_power_state(n - j, j, 2 * n)))
    return MixedState(tuple(branches))
