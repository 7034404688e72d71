"""Pulse-level Monte Carlo driver.

Per pulse the simulator samples a source branch (pair number and dephasing
pattern) and then a joint click pattern from an exact per-branch
distribution, so there is no per-photon trajectory bias: sampling error is
the only stochastic component.  Randomness is counter-based (Philox keyed by
seed and basis index, one counter block per pulse), which makes results
independent of sharding: pulse i always consumes counter block i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from .analysis import (EfficiencyEstimate, FidelityEstimate, PauliCorrelation,
                       correlation_from_counts, eff_exp, fidelity_phi_plus)
from .config import ExperimentConfig
from .detect import THRESHOLD, DetectorSpec
from .elements import BASIS_OUTCOMES, apply_circuit, measurement_rotation
from .fock import ConfigError, PureState, key_occupation, substitute_modes
from .source import dephased_branch_weights, pair_probability

_RAWS_PER_PULSE = 4  # one Philox counter block


@dataclass(frozen=True)
class CountRecord:
    basis: tuple[str, str]
    pulses: int
    n_t: int
    n_s: int
    outcomes: dict[tuple[str, str], int]


@dataclass(frozen=True)
class McResult:
    records: tuple[CountRecord, ...]
    efficiency: EfficiencyEstimate | None
    fidelity: FidelityEstimate | None
    seed: int
    pulses_per_basis: int


@dataclass(frozen=True)
class BasisTables:
    """Exact per-branch click-pattern distributions for one basis setting."""

    basis: tuple[str, str]
    detector_ids: tuple[str, ...]
    branch_cdf: np.ndarray               # over source branches (last = remainder)
    pattern_cdfs: tuple[np.ndarray, ...]  # one CDF over patterns per branch
    pattern_probs: tuple[np.ndarray, ...]
    branch_weights: np.ndarray
    is_trigger: np.ndarray               # per pattern
    outcome_index: np.ndarray            # per pattern, -1 if not a six-fold
    outcome_labels: tuple[tuple[str, str], ...]

    def sixfold_probability_per_pulse(self) -> float:
        total = 0.0
        for w, probs in zip(self.branch_weights, self.pattern_probs):
            total += w * float(probs[self.is_trigger
                                     & (self.outcome_index >= 0)].sum())
        return total

    def trigger_probability_per_pulse(self) -> float:
        total = 0.0
        for w, probs in zip(self.branch_weights, self.pattern_probs):
            total += w * float(probs[self.is_trigger].sum())
        return total


def _survival_click_probability(det: DetectorSpec, occupation: int) -> float:
    """P(click | n photons arrive) for a threshold detector with loss and
    dark counts folded in classically (loss commutes with measurement here:
    the dilation maps distinct arrival patterns to distinct joint
    occupations, so no coherence survives)."""
    p_all_lost = (1.0 - det.eta) ** occupation
    return 1.0 - p_all_lost * (1.0 - det.dark_probability)


def _pattern_vector(state: PureState, detectors: list[DetectorSpec]
                    ) -> np.ndarray:
    """Probability over the 2^k click patterns (bit i = detector i clicked)."""
    k = len(detectors)
    modes = [d.mode for d in detectors]
    occ_probs: dict[tuple[int, ...], float] = {}
    for key, amp in state.terms.items():
        occ = tuple(key_occupation(key, m) for m in modes)
        occ_probs[occ] = occ_probs.get(occ, 0.0) + abs(amp) ** 2
    out = np.zeros(1 << k)
    for occ, p_occ in occ_probs.items():
        click_p = np.array([_survival_click_probability(d, n)
                            for d, n in zip(detectors, occ)])
        acc = np.array([p_occ])
        for i in range(k):
            acc = np.concatenate([acc * (1.0 - click_p[i]), acc * click_p[i]])
        out += acc
    return out


def _branch_states(config: ExperimentConfig):
    """Source branches (weight, pure state) over (pair number, flips)."""
    from .source import _pair_power_state

    params, noise = config.source, config.noise
    branches = []
    for n in range(params.n_max + 1):
        p_n = pair_probability(n, params.r)
        if p_n <= 0.0:
            continue
        for j, w in enumerate(dephased_branch_weights(n, noise.visibility)):
            if w <= 0.0:
                continue
            branches.append((n, p_n * w, _pair_power_state(n - j, j, 2 * n)))
    return branches


def precompute_outcome_tables(config: ExperimentConfig) -> list[BasisTables]:
    """Exact categorical click-pattern tables per (basis, source branch)."""
    detectors = list(config.trigger_detectors()) + list(config.output_detectors())
    if any(d.kind != THRESHOLD for d in detectors):
        raise ConfigError("Monte Carlo tables support threshold detectors only")
    n_trig = len(config.trigger_detectors())
    out_dets = config.output_detectors()
    arms = config.output_arms()
    circuit = config.circuit()
    branches = _branch_states(config)

    k = len(detectors)
    n_pat = 1 << k
    bit = {det.id: i for i, det in enumerate(detectors)}
    trig_mask = 0
    for det in config.trigger_detectors():
        trig_mask |= 1 << bit[det.id]
    pattern_ids = np.arange(n_pat)
    is_trigger = (pattern_ids & trig_mask) == trig_mask

    # six-fold outcome: triggers fired plus exactly one click per output arm
    arm_bits = {arm: [] for arm in arms}
    for det in out_dets:
        arm_bits[det.mode[0]].append(bit[det.id])
    for arm in arms:
        arm_bits[arm].sort(key=lambda i: detectors[i].mode[1])
    tables = []
    for basis in (config.bases or (("HV", "HV"),)):
        outcome_labels = []
        for o1 in range(2):
            for o2 in range(2):
                outcome_labels.append((BASIS_OUTCOMES[basis[0]][o1],
                                       BASIS_OUTCOMES[basis[1]][o2]))
        outcome_index = np.full(n_pat, -1, dtype=np.int64)
        if len(arms) == 2 and all(len(arm_bits[a]) == 2 for a in arms):
            for p in range(n_pat):
                idx = 0
                ok = True
                for pos, arm in enumerate(arms):
                    b0, b1 = arm_bits[arm]
                    c0, c1 = bool(p >> b0 & 1), bool(p >> b1 & 1)
                    if c0 == c1:
                        ok = False
                        break
                    idx = idx * 2 + (1 if c1 else 0)
                if ok:
                    outcome_index[p] = idx
        weights = []
        vectors = []
        for n, w, state in branches:
            out = apply_circuit(state, circuit)
            for arm, b in zip(arms, basis):
                out = substitute_modes(
                    out, measurement_rotation(arm, b).extended(out.occupied_modes()))
            weights.append(w)
            vectors.append(_pattern_vector(out, detectors))
        remainder = max(1.0 - sum(weights), 0.0)
        if remainder > 0.0:
            # truncated tail: treated as dark-count-only pulses
            weights.append(remainder)
            vectors.append(_pattern_vector(PureState({(): 1.0}), detectors))
        branch_weights = np.array(weights)
        branch_cdf = np.cumsum(branch_weights)
        branch_cdf[-1] = max(branch_cdf[-1], 1.0)
        pattern_cdfs = tuple(np.cumsum(v / v.sum()) for v in vectors)
        tables.append(BasisTables(
            basis=basis, detector_ids=tuple(d.id for d in detectors),
            branch_cdf=branch_cdf, pattern_cdfs=pattern_cdfs,
            pattern_probs=tuple(np.asarray(v) for v in vectors),
            branch_weights=branch_weights,
            is_trigger=is_trigger, outcome_index=outcome_index,
            outcome_labels=tuple(outcome_labels)))
    return tables


def _sample_shard(tables: BasisTables, key: tuple[int, int],
                  start: int, count: int) -> np.ndarray:
    """Exact per-pulse sampling of pulses [start, start+count); returns the
    click-pattern histogram.  Pulse i always uses Philox counter block i."""
    raws = Philox(key=key, counter=start).random_raw(_RAWS_PER_PULSE * count)
    raws = raws.reshape(count, _RAWS_PER_PULSE)
    u = raws[:, :2] * 2.0 ** -64
    branch = np.searchsorted(tables.branch_cdf, u[:, 0], side="right")
    branch = np.minimum(branch, len(tables.pattern_cdfs) - 1)
    n_pat = len(tables.is_trigger)
    hist = np.zeros(n_pat, dtype=np.int64)
    for b in range(len(tables.pattern_cdfs)):
        mask = branch == b
        if not mask.any():
            continue
        idx = np.searchsorted(tables.pattern_cdfs[b], u[mask, 1], side="right")
        hist += np.bincount(np.minimum(idx, n_pat - 1), minlength=n_pat)
    return hist


def _sample_aggregate(tables: BasisTables, key: tuple[int, int],
                      pulses: int) -> np.ndarray:
    """Statistically equivalent sampling for very large pulse counts:
    multinomial over branches, then over patterns.  Deterministic for a
    fixed seed but not shard-invariant."""
    rng = Generator(Philox(key=key))
    probs = tables.branch_weights / tables.branch_cdf[-1]
    per_branch = rng.multinomial(pulses, probs)
    n_pat = len(tables.is_trigger)
    hist = np.zeros(n_pat, dtype=np.int64)
    for b, n_b in enumerate(per_branch):
        if n_b == 0:
            continue
        p = tables.pattern_probs[b]
        hist += rng.multinomial(int(n_b), p / p.sum())
    return hist


def _record_from_hist(tables: BasisTables, hist: np.ndarray,
                      pulses: int) -> CountRecord:
    n_t = int(hist[tables.is_trigger].sum())
    outcomes: dict[tuple[str, str], int] = {}
    n_s = 0
    for k, label in enumerate(tables.outcome_labels):
        mask = tables.is_trigger & (tables.outcome_index == k)
        c = int(hist[mask].sum())
        outcomes[label] = c
        n_s += c
    return CountRecord(basis=tables.basis, pulses=pulses, n_t=n_t, n_s=n_s,
                       outcomes=outcomes)


def run_experiment(config: ExperimentConfig,
                   tables: list[BasisTables] | None = None,
                   shard_size: int = 1 << 20,
                   aggregate: bool = False) -> McResult:
    """Run the pulse loop for every basis setting and derive estimates."""
    if tables is None:
        tables = precompute_outcome_tables(config)
    records = []
    for bi, t in enumerate(tables):
        key = (config.seed, bi)
        if aggregate:
            hist = _sample_aggregate(t, key, config.pulses)
        else:
            hist = np.zeros(len(t.is_trigger), dtype=np.int64)
            start = 0
            while start < config.pulses:
                count = min(shard_size, config.pulses - start)
                hist += _sample_shard(t, key, start, count)
                start += count
        records.append(_record_from_hist(t, hist, config.pulses))

    efficiency = None
    n_t = sum(r.n_t for r in records)
    n_s = sum(r.n_s for r in records)
    if n_t > 0:
        efficiency = eff_exp(n_s, n_t, config.mean_output_eta())
    fidelity = None
    try:
        fidelity = estimate_fidelity(records)
    except ConfigError:
        pass
    return McResult(records=tuple(records), efficiency=efficiency,
                    fidelity=fidelity, seed=config.seed,
                    pulses_per_basis=config.pulses)


_CORRELATION_BASIS = {("DA", "DA"): "xx", ("RL", "RL"): "yy", ("HV", "HV"): "zz"}


def estimate_fidelity(records: list[CountRecord] | tuple[CountRecord, ...]
                      ) -> FidelityEstimate:
    """Fidelity to Phi+ from counts in the three complementary bases."""
    found: dict[str, tuple[float, float]] = {}
    for record in records:
        component = _CORRELATION_BASIS.get(record.basis)
        if component is None or component in found:
            continue
        if sum(record.outcomes.values()) > 0:
            found[component] = correlation_from_counts(record.outcomes)
    missing = [c for c in ("xx", "yy", "zz") if c not in found]
    if missing:
        raise ConfigError("fidelity needs counts in all three bases; missing "
                          + ", ".join(sorted(missing)))
    corr = PauliCorrelation(
        xx=found["xx"][0], yy=found["yy"][0], zz=found["zz"][0],
        sigma_xx=found["xx"][1], sigma_yy=found["yy"][1], sigma_zz=found["zz"][1])
    return fidelity_phi_plus(corr)
