"""Detector semantics, loss application, click enumeration and heralding.

Losses are applied as beam-splitter dilations into environment modes which
are then traced out, so threshold under-counting (the beta-class escape
patterns) emerges from exhaustive enumeration rather than a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np

from .elements import (OUTPUT_ARMS, TRIGGER_MODES, is_env_mode, loss_channel,
                       measurement_rotation)
from .fock import (ConfigError, FockKey, MixedState, Mode, PureState,
                   as_mixed, key_occupation, substitute_modes)

THRESHOLD = "threshold"
NUMBER_RESOLVING = "pnr"


@dataclass(frozen=True)
class DetectorSpec:
    id: str
    mode: Mode
    kind: str = THRESHOLD
    coupling: float = 1.0            # fiber-coupling probability p
    quantum_efficiency: float = 1.0  # detector quantum efficiency q
    dark_rate: float = 0.0           # counts / second
    window: float = 0.0              # coincidence window, seconds

    def __post_init__(self):
        if self.kind not in (THRESHOLD, NUMBER_RESOLVING):
            raise ConfigError(f"unknown detector kind {self.kind!r}")
        if not (0.0 <= self.coupling <= 1.0 and 0.0 <= self.quantum_efficiency <= 1.0):
            raise ConfigError(f"detector {self.id}: efficiencies outside [0, 1]")
        if not (0.0 <= self.dark_probability < 1.0):
            raise ConfigError(f"detector {self.id}: dark probability outside [0, 1)")

    @property
    def eta(self) -> float:
        """Detection efficiency: coupling times quantum efficiency."""
        return self.coupling * self.quantum_efficiency

    @property
    def dark_probability(self) -> float:
        return self.dark_rate * self.window


def threshold_detector(id: str, mode: Mode, eta: float = 1.0,
                       dark_rate: float = 0.0, window: float = 0.0
                       ) -> DetectorSpec:
    return DetectorSpec(id=id, mode=mode, kind=THRESHOLD, coupling=eta,
                        dark_rate=dark_rate, window=window)


def pnr_detector(id: str, mode: Mode, eta: float = 1.0) -> DetectorSpec:
    return DetectorSpec(id=id, mode=mode, kind=NUMBER_RESOLVING, coupling=eta)


def apply_detector_losses(state: PureState | MixedState,
                          detectors: list[DetectorSpec]) -> MixedState:
    """Insert a loss channel with transmission eta before each detector and
    trace the environment modes into mixture branches."""
    from .fock import branch_on_modes

    mixed = as_mixed(state)
    out = []
    lossy = [d for d in detectors if d.eta < 1.0]
    for weight, pure in mixed.branches:
        universe = pure.occupied_modes()
        for det in lossy:
            if det.mode in universe:
                pure = substitute_modes(
                    pure, loss_channel(det.mode, det.eta).extended(universe))
                universe = pure.occupied_modes()
        env = [m for m in pure.occupied_modes() if is_env_mode(m)]
        if env:
            for w, branch in branch_on_modes(pure, env).branches:
                out.append((weight * w, branch))
        else:
            out.append((weight, pure))
    return MixedState(tuple(out))


def _click_options(det: DetectorSpec, occupation: int
                   ) -> list[tuple[object, float]]:
    """Possible detector readings and probabilities given surviving photons.

    Losses are assumed already applied, so `occupation` is the surviving
    photon number at the detector mode.
    """
    d = det.dark_probability
    if det.kind == THRESHOLD:
        p_click = 1.0 if occupation >= 1 else d
        return [(True, p_click), (False, 1.0 - p_click)]
    # number-resolving: dark adds one extra count with probability d
    if d == 0.0:
        return [(occupation, 1.0)]
    return [(occupation, 1.0 - d), (occupation + 1, d)]


def click_distribution(state: PureState | MixedState,
                       detectors: list[DetectorSpec]
                       ) -> dict[tuple, float]:
    """Distribution over joint click patterns (ordered as `detectors`).

    Occupations of non-detector modes are marginalized; coherences between
    distinct joint occupation patterns never contribute to probabilities.
    """
    mixed = as_mixed(state)
    occ_probs: dict[tuple[int, ...], float] = {}
    modes = [d.mode for d in detectors]
    for weight, pure in mixed.branches:
        for key, amp in pure.terms.items():
            occ = tuple(key_occupation(key, m) for m in modes)
            occ_probs[occ] = occ_probs.get(occ, 0.0) + weight * abs(amp) ** 2
    dist: dict[tuple, float] = {}
    for occ, p_occ in occ_probs.items():
        options = [_click_options(det, n) for det, n in zip(detectors, occ)]
        for combo in iproduct(*options):
            prob = p_occ
            for _, p in combo:
                prob *= p
            if prob > 0.0:
                pattern = tuple(reading for reading, _ in combo)
                dist[pattern] = dist.get(pattern, 0.0) + prob
    return dist


def _trigger_probability(det: DetectorSpec, occupation: int) -> float:
    """Probability this detector contributes to the four-fold trigger."""
    d = det.dark_probability
    if det.kind == THRESHOLD:
        return 1.0 if occupation >= 1 else d
    # number-resolving trigger requires a reading of exactly one photon
    if occupation == 1:
        return 1.0 - d
    if occupation == 0:
        return d
    return 0.0


@dataclass(frozen=True)
class HeraldDecomposition:
    """Weights of the perfect-trigger, deficient-output and no-trigger
    classes of the post-circuit three-pair state."""

    alpha_sq: float
    beta_sq: float
    gamma_sq: float


@dataclass(frozen=True)
class HeraldResult:
    herald_probability: float
    conditional_dm: np.ndarray  # 4x4 over (c,d) polarization, trace = prep eff
    preparation_efficiency: float
    heralded: bool
    decomposition: HeraldDecomposition | None = None

    @property
    def remainder_weight(self) -> float:
        """Conditional weight outside the one-photon-per-arm sector."""
        return 1.0 - self.preparation_efficiency

    def normalized_qubit_dm(self) -> np.ndarray:
        t = np.trace(self.conditional_dm).real
        if t <= 0.0:
            raise ConfigError("empty qubit sector; nothing to normalize")
        return self.conditional_dm / t


QUBIT_BASIS = [("x", "x"), ("x", "y"), ("y", "x"), ("y", "y")]


def _qubit_index(key: FockKey, arms: tuple[str, str]) -> int | None:
    """Index into QUBIT_BASIS if the key is exactly one photon per arm."""
    pols = {arms[0]: None, arms[1]: None}
    for (spatial, pol), n in key:
        if spatial not in pols or n != 1 or pols[spatial] is not None:
            return None
        pols[spatial] = "x" if pol == "x" else ("y" if pol == "y" else None)
        if pols[spatial] is None:
            return None
    pc, pd = pols[arms[0]], pols[arms[1]]
    if pc is None or pd is None:
        return None
    return QUBIT_BASIS.index((pc, pd))


def herald(state: PureState | MixedState,
           trigger_detectors: list[DetectorSpec],
           output_arms: tuple[str, str] = OUTPUT_ARMS) -> HeraldResult:
    """Condition on all four trigger detectors firing.

    Applies trigger losses, enumerates every trigger-mode occupation pattern
    with its click probability, and accumulates the conditional output state.
    The conditional density matrix is restricted to the one-photon-per-arm
    sector of the output modes; its trace (after normalization by the herald
    probability) is the preparation efficiency.
    """
    if len(trigger_detectors) != 4:
        raise ConfigError("heralding requires exactly four trigger detectors")
    mixed = apply_detector_losses(state, trigger_detectors)
    trig_modes = [d.mode for d in trigger_detectors]
    trig_set = set(trig_modes)

    herald_p = 0.0
    good_p = 0.0
    rho = np.zeros((4, 4), dtype=complex)
    for weight, pure in mixed.branches:
        groups: dict[tuple[int, ...], dict[FockKey, complex]] = {}
        for key, amp in pure.terms.items():
            occ = tuple(key_occupation(key, m) for m in trig_modes)
            rest = tuple((m, n) for m, n in key if m not in trig_set)
            bucket = groups.setdefault(occ, {})
            bucket[rest] = bucket.get(rest, 0.0) + amp
        for occ, rest_terms in groups.items():
            p_click = 1.0
            for det, n in zip(trigger_detectors, occ):
                p_click *= _trigger_probability(det, n)
                if p_click == 0.0:
                    break
            if p_click == 0.0:
                continue
            group_w = weight * p_click
            herald_p += group_w * sum(abs(a) ** 2 for a in rest_terms.values())
            vec = np.zeros(4, dtype=complex)
            for key, amp in rest_terms.items():
                idx = _qubit_index(key, output_arms)
                if idx is not None:
                    vec[idx] = amp
            vnorm = float(np.vdot(vec, vec).real)
            if vnorm > 0.0:
                good_p += group_w * vnorm
                rho += group_w * np.outer(vec, vec.conjugate())

    if herald_p <= 0.0:
        return HeraldResult(herald_probability=0.0,
                            conditional_dm=np.zeros((4, 4), dtype=complex),
                            preparation_efficiency=0.0, heralded=False)
    return HeraldResult(herald_probability=herald_p,
                        conditional_dm=rho / herald_p,
                        preparation_efficiency=good_p / herald_p,
                        heralded=True)


def decompose_s1(state: PureState,
                 trigger_modes: tuple[Mode, ...] = TRIGGER_MODES,
                 output_arms: tuple[str, str] = OUTPUT_ARMS
                 ) -> HeraldDecomposition:
    """Classify the lossless post-circuit state into trigger classes.

    alpha^2: exactly one photon per trigger mode and two output photons;
    beta^2: at least one photon at every trigger mode, deficient output;
    gamma^2: everything else (no complete trigger).
    """
    alpha_sq = beta_sq = gamma_sq = 0.0
    arms = set(output_arms)
    for key, amp in state.terms.items():
        p = abs(amp) ** 2
        trig = [key_occupation(key, m) for m in trigger_modes]
        out_photons = sum(n for (spatial, _), n in key if spatial in arms)
        if all(n == 1 for n in trig) and out_photons == 2:
            alpha_sq += p
        elif all(n >= 1 for n in trig):
            beta_sq += p
        else:
            gamma_sq += p
    return HeraldDecomposition(alpha_sq, beta_sq, gamma_sq)


def sixfold_probability(state: PureState | MixedState,
                        trigger_detectors: list[DetectorSpec],
                        output_detectors: list[DetectorSpec],
                        basis: tuple[str, str],
                        outcome: tuple[int, int] = (0, 0),
                        output_arms: tuple[str, str] = OUTPUT_ARMS,
                        exclusive: bool = True) -> float:
    """Probability of a six-fold coincidence for one outcome pair.

    Output arms are rotated into the measurement basis before detection.
    `outcome` selects which detector clicks in each arm (0 = the x-labeled
    port: H, + or R).  With `exclusive` the complementary output detectors
    must not click, matching coincidence-logic counting.
    """
    mixed = as_mixed(state)
    rotated = []
    for weight, pure in mixed.branches:
        for arm, b in zip(output_arms, basis):
            pure = substitute_modes(
                pure, measurement_rotation(arm, b).extended(pure.occupied_modes()))
        rotated.append((weight, pure))
    detectors = list(trigger_detectors) + list(output_detectors)
    lossy = apply_detector_losses(MixedState(tuple(rotated)), detectors)
    dist = click_distribution(lossy, detectors)

    n_trig = len(trigger_detectors)
    by_arm: dict[str, list[int]] = {arm: [] for arm in output_arms}
    for i, det in enumerate(output_detectors):
        by_arm[det.mode[0]].append(n_trig + i)
    wanted = []
    for arm_i, arm in enumerate(output_arms):
        ports = sorted(by_arm[arm], key=lambda i: detectors[i].mode[1])
        wanted.append(ports[outcome[arm_i]])

    total = 0.0
    for pattern, prob in dist.items():
        if not all(pattern[i] for i in range(n_trig)):
            continue
        if not all(pattern[i] for i in wanted):
            continue
        if exclusive:
            others = [i for i in range(n_trig, len(detectors)) if i not in wanted]
            if any(pattern[i] for i in others):
                continue
        total += prob
    return total


def fidelity_to_phi_plus(dm: np.ndarray) -> float:
    """Tr(rho |Phi+><Phi+|) on the (c,d) polarization qubit sector."""
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1.0 / math.sqrt(2.0)
    return float(np.real(phi.conjugate() @ dm @ phi))
