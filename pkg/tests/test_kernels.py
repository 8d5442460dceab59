import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.kernels import (
    DeltaParams,
    apply_semigroup,
    eta_of_delta,
    heat_multiplier,
    kappa_of_delta,
    kernel_gap_sup,
    kernel_rate_check,
    weighted_gap_profile,
)
from fraclab.spectral import FourierGrid, Hs, norm
from oracles import random_field, single_mode

deltas = st.floats(1e-6, 1 / 6 - 1e-6)

# Oracle: brute-force max of |exp(-t r^1.9) - exp(-t r^2)| over 10^6 log-spaced radii in
# [1e-6, 1e3], evaluated once independently and frozen here.
GAP_ALPHA_1_9_T1 = 0.0138496915536


def brute_gap(alpha, t, w, lo=1e-6, hi=1e3, points=10**6):
    r = np.geomspace(lo, hi, points)
    return float(np.max(r**w * np.abs(np.exp(-t * r**alpha) - np.exp(-t * r**2))))


# -- multipliers ----------------------------------------------------------------------


def test_heat_multiplier_examples():
    assert heat_multiplier(2, 1, 1) == pytest.approx(math.exp(-1))
    assert heat_multiplier(1.7, 0, 5.0) == 1.0
    assert heat_multiplier(1.5, 2, 3) == pytest.approx(math.exp(-2 * 3**1.5))
    assert heat_multiplier(1.5, 2, 0.0) == 1.0


def test_heat_multiplier_rejects_bad_input():
    with pytest.raises(ValueError):
        heat_multiplier(0, 1, 1)
    with pytest.raises(ValueError):
        heat_multiplier(2, -1, 1)


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(1.01, 3), t=st.floats(1e-3, 5), r=st.floats(1e-2, 5), dt=st.floats(1e-3, 1),
       dr=st.floats(1e-3, 1))
def test_heat_multiplier_strictly_decreasing(alpha, t, r, dt, dr):
    assert heat_multiplier(alpha, t + dt, r) < heat_multiplier(alpha, t, r)
    assert heat_multiplier(alpha, t, r + dr) < heat_multiplier(alpha, t, r)


def test_apply_semigroup_examples():
    g = FourierGrid(1, 16)
    f = random_field(g, seed=1)
    assert np.array_equal(apply_semigroup(f, 1.8, 0.0).coeffs, f.coeffs)
    z = f * 0.0
    assert np.all(apply_semigroup(z, 1.8, 1.0).coeffs == 0)
    m = single_mode(g, (1,))
    assert np.allclose(apply_semigroup(m, 2.0, 1.0).coeffs, math.exp(-1) * m.coeffs)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.floats(1.1, 2.5), s=st.floats(0, 1), t=st.floats(0, 1))
def test_semigroup_property(seed, alpha, s, t):
    f = random_field(FourierGrid(2, 16), n=2, seed=seed)
    two = apply_semigroup(apply_semigroup(f, alpha, s), alpha, t).coeffs
    one = apply_semigroup(f, alpha, s + t).coeffs
    assert np.max(np.abs(two - one)) <= 1e-12 * np.max(np.abs(one)) + 1e-300
    assert apply_semigroup(f, alpha, s).hermitian


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.floats(1.1, 2.5), t=st.floats(0, 1), dt=st.floats(0, 1))
def test_semigroup_hs_nonincreasing(seed, alpha, t, dt):
    f = random_field(FourierGrid(1, 32), seed=seed)
    assert norm(apply_semigroup(f, alpha, t + dt), Hs(1)) <= norm(apply_semigroup(f, alpha, t), Hs(1))


def test_componentwise_alpha():
    g = FourierGrid(1, 8)
    f = random_field(g, n=2, seed=0)
    out = apply_semigroup(f, [1.5, 2.0], 0.3).coeffs
    assert np.allclose(out[0], apply_semigroup(f.component(0), 1.5, 0.3).coeffs[0])
    assert np.allclose(out[1], apply_semigroup(f.component(1), 2.0, 0.3).coeffs[0])


# -- exponents -------------------------------------------------------------------------


def test_eta_kappa_examples():
    assert eta_of_delta(0.1) == pytest.approx(1.4 / 3.8, abs=1e-12)
    assert kappa_of_delta(0.1) == pytest.approx(3.4 / 3.8, abs=1e-12)
    assert eta_of_delta(1e-12) == pytest.approx(0.25)
    assert kappa_of_delta(1e-12) == pytest.approx(0.75)


@pytest.mark.parametrize("delta", [0.0, 1 / 6, -0.1, 0.2])
def test_delta_out_of_range(delta):
    with pytest.raises(ValueError):
        DeltaParams(delta)


@settings(max_examples=100)
@given(delta=deltas)
def test_exponent_ranges_and_cancellations(delta):
    p = DeltaParams(delta)
    assert 0.25 < p.eta < 0.5 and 0.75 < p.kappa < 1
    assert abs(p.eta + 1 - (5 + 2 * delta) / (4 - 2 * delta)) <= 1e-14
    assert abs(p.kappa + 1 - (7 + 2 * delta) / (4 - 2 * delta)) <= 1e-14


# -- kernel gap --------------------------------------------------------------------------


def test_gap_zero_cases():
    assert kernel_gap_sup(2.0, 0.7, 0) == 0.0
    assert kernel_gap_sup(1.9, 0.0, 1) == 0.0


def test_gap_matches_frozen_oracle():
    assert kernel_gap_sup(1.9, 1.0, 0) == pytest.approx(GAP_ALPHA_1_9_T1, rel=1e-9)


@pytest.mark.parametrize("alpha,t,w", [(1.9, 1.0, 0), (2.1, 0.3, 1), (1.85, 0.01, 0), (2.15, 2.0, 1)])
def test_gap_matches_brute_force(alpha, t, w):
    # refinement can only improve on a grid value
    approx = kernel_gap_sup(alpha, t, w)
    brute = brute_gap(alpha, t, w, hi=max(1e3, 1e2 / math.sqrt(t)))
    assert approx >= brute * (1 - 1e-12)
    assert approx == pytest.approx(brute, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(1.5, 2.5).filter(lambda a: abs(a - 2) > 1e-3), t=st.floats(1e-4, 10),
       w=st.sampled_from([0, 1]))
def test_gap_positive_off_classical(alpha, t, w):
    assert kernel_gap_sup(alpha, t, w) > 0


def test_gap_rejects_bad_weight():
    with pytest.raises(ValueError):
        kernel_gap_sup(1.9, 1.0, 2)


# -- weighted profiles ----------------------------------------------------------------------


def test_profile_small_time_bounded():
    p = weighted_gap_profile(1.9, 0.15, 1.0, n_times=41)
    assert p.times[0] == 0 and p.times[1] == pytest.approx(1e-8) and p.times[-1] == 1.0
    assert np.all(np.isfinite(p.weighted_grad_gap))
    # the raw gradient gap grows like t^(-1/2) near 0; the kappa weight tames it
    assert p.weighted_grad_gap[1] < p.max_grad_gap


def test_profile_classical_all_zero():
    p = weighted_gap_profile(2.0, 0.1, 1.0, n_times=11)
    assert np.all(p.weighted_gap == 0) and np.all(p.weighted_grad_gap == 0)


def test_profile_rejects_alpha_outside_window():
    with pytest.raises(ValueError):
        weighted_gap_profile(1.8, 0.15, 1.0)


def test_profile_max_against_dense_scan():
    # independent oracle: dense (t, r) grid, no refinement
    alpha, delta, T = 1.95, 0.15, 1.0
    eta = eta_of_delta(delta)
    t = np.geomspace(1e-8, T, 400)[:, None]
    r = np.geomspace(1e-6, 1e5, 4000)[None, :]
    dense = float(np.max(t[:, 0] ** eta * np.max(np.abs(np.exp(-t * r**alpha) - np.exp(-t * r**2)), axis=1)))
    p = weighted_gap_profile(alpha, delta, T, n_times=121)
    assert p.max_gap == pytest.approx(dense, rel=2e-3)
    C = p.max_gap / ((1 + T ** (eta + 1)) * abs(2 - alpha))
    assert 0 < C < 10


# -- rate check -----------------------------------------------------------------------------


def test_rate_check_small_grid():
    rep = kernel_rate_check([1.9, 1.95, 1.99], 0.15, 1.0, n_times=61)
    assert 0.9 <= rep.fit_gap.slope <= 1.1
    assert 0.9 <= rep.fit_grad_gap.slope <= 1.1
    assert rep.passed
    d = rep.to_dict()
    assert d["passed"] and len(d["ratio_gap"]) == 3


def test_rate_check_synthetic_linear_gap(monkeypatch):
    import fraclab.kernels as k

    monkeypatch.setattr(k, "kernel_gap_sup", lambda a, t, w: abs(2 - a) * t / (1 + t))
    rep = k.kernel_rate_check([1.9, 1.95, 2.05, 2.1], 0.15, 1.0, n_times=11)
    assert rep.fit_gap.slope == pytest.approx(1.0, abs=1e-12)
    assert rep.ratio_gap.max() / rep.ratio_gap.min() == pytest.approx(1.0)


@pytest.mark.parametrize("grid", [[1.9], [1.9, 2.0], [1.9, 2.3]])
def test_rate_check_rejects_bad_grids(grid):
    with pytest.raises(ValueError):
        kernel_rate_check(grid, 0.15, 1.0)
