"""Detector semantics, click enumeration, and herald conditioning."""

import math

import numpy as np
import pytest

from heraldsim.fock import ConfigError, apply_creation, make_vacuum, mode
from heraldsim.elements import TRIGGER_MODES, apply_circuit, heralding_circuit
from heraldsim.source import n_pair_state
from heraldsim.detect import (
    apply_detector_losses,
    click_distribution,
    decompose_s1,
    fidelity_to_phi_plus,
    herald,
    pnr_detector,
    sixfold_probability,
    threshold_detector,
)
from heraldsim.analysis import eff_theory


def trigger_set(kind="pnr", eta=1.0, dark=0.0, window=0.0):
    dets = []
    for i, m in enumerate(TRIGGER_MODES, start=1):
        if kind == "pnr":
            dets.append(pnr_detector(f"t{i}", m, eta=eta))
        else:
            dets.append(threshold_detector(f"t{i}", m, eta=eta,
                                           dark_rate=dark, window=window))
    return dets


def test_dark_click_probability_on_vacuum():
    det = threshold_detector("d", mode("c", "x"), eta=1.0,
                             dark_rate=300.0, window=12e-9)
    assert det.dark_probability == pytest.approx(3.6e-6, rel=1e-12)
    dist = click_distribution(make_vacuum(), [det])
    assert dist[(1,)] == pytest.approx(3.6e-6, rel=1e-12)
    assert dist[(0,)] == pytest.approx(1.0 - 3.6e-6, rel=1e-12)


def test_click_distribution_normalized():
    st = apply_circuit(n_pair_state(2), heralding_circuit(0.4))
    dets = trigger_set(kind="threshold", eta=0.3, dark=100.0, window=1e-8)
    dist = click_distribution(apply_detector_losses(st, dets), dets)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-10)


def test_pnr_counts_are_binomial_under_loss():
    eta = 0.58
    n = 3
    st = make_vacuum()
    for _ in range(n):
        st = apply_creation(st, mode("c", "x"))
    st = st.normalized()
    det = pnr_detector("d", mode("c", "x"), eta=eta)
    dist = click_distribution(apply_detector_losses(st, [det]), [det])
    for k in range(n + 1):
        expect = math.comb(n, k) * eta ** k * (1 - eta) ** (n - k)
        assert dist[(k,)] == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("R", [0.3, 0.486, 0.57, 0.685])
def test_ideal_herald_reproduces_closed_form(R):
    T = 1.0 - R
    st = apply_circuit(n_pair_state(3), heralding_circuit(R))
    res = herald(st, trigger_set("pnr"))
    assert res.herald_probability == pytest.approx(T ** 4 * R ** 2 / 2.0,
                                                   abs=1e-12)
    assert res.preparation_efficiency == pytest.approx(1.0, abs=1e-12)
    assert fidelity_to_phi_plus(res.normalized_dm()) == pytest.approx(
        1.0, abs=1e-12) if hasattr(res, "normalized_dm") else True
    dm = res.conditional_dm / np.trace(res.conditional_dm).real
    assert fidelity_to_phi_plus(dm) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("R,eta_t", [(0.486, 0.167), (0.685, 0.207),
                                     (0.5, 0.5)])
def test_threshold_efficiency_matches_formula(R, eta_t):
    st = apply_circuit(n_pair_state(3), heralding_circuit(R))
    res = herald(st, trigger_set("threshold", eta=eta_t))
    assert res.preparation_efficiency == pytest.approx(
        eff_theory(R, eta_t), abs=1e-10)


def test_trigger_class_decomposition():
    R = 0.486
    T = 1.0 - R
    st = apply_circuit(n_pair_state(3), heralding_circuit(R))
    d = decompose_s1(st)
    total = d.alpha_sq + d.beta_sq + d.gamma_sq
    assert total == pytest.approx(1.0, abs=1e-10)
    # weight of the perfect four-photon trigger class
    assert d.alpha_sq == pytest.approx(T ** 4 * R ** 2 / 2.0, abs=1e-10)
    # among trigger-satisfying events, the proper fraction matches the
    # ideal-detection efficiency formula
    ratio = d.alpha_sq / (d.alpha_sq + d.beta_sq)
    assert ratio == pytest.approx(eff_theory(R, 1.0), abs=1e-10)


def test_sixfold_correlations_of_heralded_state():
    st = apply_circuit(n_pair_state(3), heralding_circuit(0.486))
    trig = trigger_set("pnr")
    outs = [threshold_detector(f"s{i}", m) for i, m in enumerate(
        [mode("c", "x"), mode("c", "y"), mode("d", "x"), mode("d", "y")],
        start=1)]

    def correlation(basis):
        probs = {}
        for o1 in (0, 1):
            for o2 in (0, 1):
                probs[(o1, o2)] = sixfold_probability(
                    st, trig, outs, (basis, basis), (o1, o2))
        tot = sum(probs.values())
        same = probs[(0, 0)] + probs[(1, 1)]
        diff = probs[(0, 1)] + probs[(1, 0)]
        return (same - diff) / tot

    assert correlation("HV") == pytest.approx(1.0, abs=1e-10)
    assert correlation("DA") == pytest.approx(1.0, abs=1e-10)
    assert correlation("RL") == pytest.approx(-1.0, abs=1e-10)


def test_sixfold_scales_with_output_efficiency_squared():
    st = apply_circuit(n_pair_state(3), heralding_circuit(0.486))
    trig = trigger_set("threshold", eta=1.0)

    def total(eta_s):
        outs = [threshold_detector(f"s{i}", m, eta=eta_s)
                for i, m in enumerate(
                    [mode("c", "x"), mode("c", "y"),
                     mode("d", "x"), mode("d", "y")], start=1)]
        return sum(sixfold_probability(st, trig, outs, ("HV", "HV"), (a, b))
                   for a in (0, 1) for b in (0, 1))

    p_full = total(1.0)
    p_low = total(0.129)
    assert p_low / p_full == pytest.approx(0.129 ** 2, rel=1e-9)


def test_herald_requires_four_triggers():
    st = apply_circuit(n_pair_state(3), heralding_circuit(0.5))
    with pytest.raises(ConfigError):
        herald(st, trigger_set("pnr")[:3])


def test_detector_parameter_validation():
    with pytest.raises(ConfigError):
        threshold_detector("d", mode("c", "x"), eta=1.3)
    with pytest.raises(ConfigError):
        threshold_detector("d", mode("c", "x"), dark_rate=1e9, window=1.0)
