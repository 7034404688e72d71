"""Multi-pair downconversion source model and its dephasing noise."""

import math

import pytest

from heraldsim.fock import ConfigError, inner_product, substitute_modes
from heraldsim.source import (
    SourceNoise,
    SpdcParams,
    coupling_from_rate,
    dephased_branch_weights,
    dephased_source,
    n_pair_state,
    pair_probability,
    spdc_state,
    truncation_deficit,
    unnormalized_pair_power_norm_sq,
)
from heraldsim.elements import ModeTransform
from heraldsim.fock import mode


def test_pair_probability_form():
    r = 0.2
    th2 = math.tanh(r) ** 2
    ch4 = math.cosh(r) ** 4
    for n in range(0, 6):
        assert pair_probability(n, r) == pytest.approx(
            (n + 1) * th2 ** n / ch4, rel=1e-12)


def test_pair_probabilities_sum_to_one():
    r = 0.35
    total = sum(pair_probability(n, r) for n in range(0, 200))
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p1", [0.01, 0.03, 0.047, 0.1])
def test_coupling_round_trip(p1):
    r = coupling_from_rate(p1)
    assert pair_probability(1, r) == pytest.approx(p1, abs=1e-10)


def test_coupling_rejects_unreachable_rate():
    with pytest.raises(ConfigError):
        coupling_from_rate(0.30)


def test_single_pair_is_polarization_singlet():
    st = n_pair_state(1)
    key_xy = tuple(sorted(((mode("a", "x"), 1), (mode("b", "y"), 1))))
    key_yx = tuple(sorted(((mode("a", "y"), 1), (mode("b", "x"), 1))))
    s = 1.0 / math.sqrt(2.0)
    assert st.terms[key_xy] == pytest.approx(s)
    assert st.terms[key_yx] == pytest.approx(-s)
    assert st.norm_sq() == pytest.approx(1.0, abs=1e-12)


def test_singlet_invariant_under_bilateral_rotation():
    theta = math.radians(30.0)
    c, s = math.cos(theta), math.sin(theta)
    cols = {}
    for spatial in ("a", "b"):
        cols[mode(spatial, "x")] = ((c + 0j, mode(spatial, "x")),
                                    (s + 0j, mode(spatial, "y")))
        cols[mode(spatial, "y")] = ((-s + 0j, mode(spatial, "x")),
                                    (c + 0j, mode(spatial, "y")))
    rot = ModeTransform(cols)
    for n in (1, 2):
        st = n_pair_state(n)
        out = substitute_modes(st, rot)
        overlap = inner_product(st, out)
        assert abs(abs(overlap) - 1.0) < 1e-10


def test_pair_power_norm():
    # brute-force norm of the unnormalized n-pair creation polynomial
    for n in (1, 2, 3):
        st = n_pair_state(n)
        raw = unnormalized_pair_power_norm_sq(n)
        assert raw == pytest.approx((n + 1) * math.factorial(n) ** 2,
                                    rel=1e-12)
        assert st.norm_sq() == pytest.approx(1.0, abs=1e-12)


def test_spdc_state_coefficients():
    params = SpdcParams(r=0.158, n_max=4)
    st = spdc_state(params)
    vac_amp = st.terms[()]
    assert abs(vac_amp) ** 2 == pytest.approx(pair_probability(0, params.r),
                                              rel=1e-12)
    one = n_pair_state(1)
    amp = inner_product(one, st)
    assert abs(amp) ** 2 == pytest.approx(pair_probability(1, params.r),
                                          rel=1e-10)


def test_truncation_deficit_small_at_paper_rate():
    r = coupling_from_rate(0.047)
    deficit = truncation_deficit(SpdcParams(r=r, n_max=4))
    assert 0.0 < deficit < 1e-7


def test_dephasing_branch_weights():
    w = dephased_branch_weights(1, 0.91)
    assert w == pytest.approx([0.955, 0.045], abs=1e-12)
    for n in (1, 2, 3):
        assert sum(dephased_branch_weights(n, 0.91)) == pytest.approx(
            1.0, abs=1e-12)


def test_dephased_source_normalized():
    params = SpdcParams(r=0.15, n_max=3)
    mix = dephased_source(params, SourceNoise(visibility=0.91))
    total = sum(w * st.norm_sq() for w, st in mix.branches)
    assert total == pytest.approx(1.0 - truncation_deficit(params), abs=1e-10)


def test_dephased_source_reduces_to_pure_at_unit_visibility():
    params = SpdcParams(r=0.15, n_max=3)
    mix = dephased_source(params, SourceNoise(visibility=1.0))
    ref = spdc_state(params)
    acc = None
    for w, st in mix.branches:
        scaled = st.scaled(math.sqrt(w))
        acc = scaled if acc is None else acc.add(scaled)
    # the single surviving branch is the truncated coherent expansion itself,
    # so the overlap equals its (slightly sub-unit) squared norm
    assert abs(inner_product(ref, acc)) == pytest.approx(ref.norm_sq(),
                                                         abs=1e-10)


def test_visibility_bounds_checked():
    with pytest.raises(ConfigError):
        SourceNoise(visibility=1.5)
