import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from timecausal.cascade import (
    CascadeSpec,
    DelayKind,
    build_cascade,
    cascade_for_range,
    continuous_delay_measures,
    delay_measures_discrete,
    mean_delay_continuous,
    mu_discrete,
    mu_limit,
    mu_truncated,
    scale_levels,
    tmax_delay_approx,
    variance_residuals,
)
from timecausal.engine import KernelSamples, equivalent_kernel

SQRT2 = math.sqrt(2.0)


@pytest.mark.parametrize(
    "c, tau0, K, expected",
    [(2, 1, 3, [4, 16, 64]), (SQRT2, 1, 2, [2, 4]), (2, 1, 1, [4])],
)
def test_scale_levels(c, tau0, K, expected):
    assert scale_levels(c, tau0, K) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("c", [1.0, 0.5, -2.0, math.nan])
def test_scale_levels_rejects_bad_ratio(c):
    with pytest.raises(ValueError):
        scale_levels(c, 1.0, 3)


def test_scale_levels_rejects_bad_tau_and_K():
    with pytest.raises(ValueError):
        scale_levels(2.0, 0.0, 3)
    with pytest.raises(ValueError):
        scale_levels(2.0, 1.0, 0)


def test_mu_limit_values():
    assert mu_limit(2, 1, 1) == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    assert mu_limit(2, 1, 2) == pytest.approx(math.sqrt(3) / 4, rel=1e-15)


def test_mu_limit_geometric_tail():
    partial = np.cumsum([mu_limit(2, 1, k) ** 2 for k in range(1, 60)])
    assert partial[-1] == pytest.approx(1.0, abs=1e-15)
    gaps = 1.0 - partial[:10]
    assert np.allclose(gaps[1:] / gaps[:-1], 0.25, rtol=1e-9)


def test_mu_truncated_values():
    mus = mu_truncated(2, 1, 8)
    assert mus[0] == pytest.approx(2.0**-7, rel=1e-15)
    assert mus[-1] == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    assert sum(m * m for m in mus) == pytest.approx(1.0, rel=1e-15)
    assert mu_truncated(SQRT2, 4, 1) == [2.0]


@pytest.mark.parametrize("dtau, mu", [(2.0, 1.0), (6.0, 2.0), (0.0, 0.0)])
def test_mu_discrete(dtau, mu):
    assert mu_discrete(dtau) == pytest.approx(mu, abs=1e-15)


def test_mu_discrete_rejects_negative():
    with pytest.raises(ValueError):
        mu_discrete(-1e-3)


@given(st.floats(min_value=0.0, max_value=1e8))
def test_mu_discrete_round_trip(dtau):
    mu = mu_discrete(dtau)
    assert mu >= 0
    assert mu * mu + mu == pytest.approx(dtau, rel=1e-12, abs=1e-300)


def test_mu_discrete_no_cancellation_for_tiny_increments():
    assert mu_discrete(1e-12) == pytest.approx(1e-12, rel=1e-10)


def test_build_cascade_examples():
    spec = build_cascade(2, 1, 2)
    assert spec.mu_disc == pytest.approx([(math.sqrt(17) - 1) / 2, 3.0], rel=1e-14)
    assert build_cascade(SQRT2, 1, 3).tau_levels == pytest.approx([2, 4, 8], rel=1e-14)


def test_build_cascade_rejects_unknown_mode():
    with pytest.raises(ValueError):
        build_cascade(2, 1, 2, mode="fast")


@settings(max_examples=60, deadline=None)
@given(
    c=st.floats(min_value=1.05, max_value=4.0),
    tau0=st.floats(min_value=1e-3, max_value=1e3),
    K=st.integers(min_value=1, max_value=20),
    dt=st.floats(min_value=0.05, max_value=5.0),
)
def test_variance_identities(c, tau0, K, dt):
    spec = build_cascade(c, tau0, K, dt)
    cont, disc = variance_residuals(spec)
    assert cont < 1e-12
    assert disc < 1e-12
    assert all(m > 0 for m in spec.mu_disc + spec.mu_cont)


def test_spec_validation():
    spec = build_cascade(2, 1, 2)
    with pytest.raises(ValueError):
        CascadeSpec(2.0, 1.0, 2, spec.mu_cont, spec.mu_disc[:1], spec.tau_levels)
    with pytest.raises(ValueError):
        CascadeSpec(2.0, 1.0, 2, spec.mu_cont, (0.0, 1.0), spec.tau_levels)
    with pytest.raises(ValueError):
        CascadeSpec(2.0, 1.0, 2, spec.mu_cont, spec.mu_disc, spec.tau_levels[::-1])


def test_spec_helpers():
    spec = build_cascade(2, 1, 3)
    assert spec.sigmas == pytest.approx([2, 4, 8])
    assert spec.gains == pytest.approx([1 / (1 + m) for m in spec.mu_disc])
    assert spec.mean_delays() == pytest.approx(np.cumsum(spec.mu_disc))
    assert spec.truncated(2).mu_disc == spec.mu_disc[:2]


def test_cascade_for_range():
    spec, first = cascade_for_range(SQRT2, 0.125, 64.0)
    assert first == 7
    assert spec.sigmas[first] == pytest.approx(0.125, rel=1e-12)
    assert spec.sigmas[-1] == pytest.approx(64.0, rel=1e-12)
    with pytest.raises(ValueError):
        cascade_for_range(SQRT2, 2.0, 1.0)


def test_mean_delay_continuous():
    assert mean_delay_continuous(2, 1) == pytest.approx(math.sqrt(3), rel=1e-15)
    assert mean_delay_continuous(SQRT2, 1) == pytest.approx(1 + SQRT2, rel=1e-14)
    assert mean_delay_continuous(2, 4) == pytest.approx(2 * math.sqrt(3), rel=1e-15)


def test_tmax_delay_approx():
    assert tmax_delay_approx(2, 1) == pytest.approx(9 / 8, rel=1e-14)
    assert tmax_delay_approx(2, 4) == pytest.approx(2.25, rel=1e-14)
    # (1+sqrt2)^2 / (2 sqrt2 sqrt((sqrt2-1) 2 sqrt2))
    assert tmax_delay_approx(SQRT2, 1) == pytest.approx(1.9038017561685685, rel=1e-12)


def test_delay_measures_of_impulse():
    d = delay_measures_discrete(KernelSamples(np.array([1.0, 0.0, 0.0])))
    assert (d.mean_delay, d.tmax_delay) == (0.0, 0.0)
    assert d.kind is DelayKind.discrete_empirical


def test_discrete_mean_delay_matches_sum_of_time_constants():
    spec = build_cascade(2, 1, 8)
    kern = equivalent_kernel(spec, tol=1e-12)
    d = delay_measures_discrete(kern)
    assert d.mean_delay == pytest.approx(sum(spec.mu_disc), rel=1e-6)


@pytest.mark.parametrize("c", [SQRT2, 2.0])
def test_discrete_delay_shorter_than_continuous(c):
    spec = build_cascade(c, 1, 8)
    d = delay_measures_discrete(equivalent_kernel(spec))
    cont = continuous_delay_measures(c, spec.tau_levels[-1])
    assert d.mean_delay < cont.mean_delay
    assert cont.kind is DelayKind.continuous_closed_form


def test_delay_measure_validation():
    from timecausal.cascade import DelayMeasure

    with pytest.raises(ValueError):
        DelayMeasure(-1.0, 0.0, DelayKind.discrete_empirical)
