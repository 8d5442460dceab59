import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.errors import BlowUpError, ConfigError, NonConvergenceError
from fraclab.kernels import apply_semigroup
from fraclab.solver import (
    ETD_MARCHING,
    GLOBAL_PICARD,
    SolutionTrajectory,
    SolverConfig,
    etd_march,
    existence_time_alpha,
    existence_time_classical,
    existence_time_floor,
    existence_time_for,
    operator_A,
    operator_B,
    phi_floor,
    picard_solve,
    solve,
    uniform_product_bound,
)
from fraclab.spectral import FourierGrid, Hs, SpectralField, forward_transform, norm
from fraclab.system import SystemSpec, build_preset, divergence_defect
from oracles import random_field, single_mode

ROOT_2PI = math.sqrt(2 * math.pi)


def burgers(N=256, amp=(0.05, 0.02), alpha=1.9, s=1.0):
    g = FourierGrid(1, N)
    x = g.coordinates()[0]
    u = forward_transform(amp[0] * np.sin(x) + amp[1] * np.cos(3 * x), g)
    return build_preset("Burgers1D", g, alpha, u, s)


def rel_hs(a, b, grid, s):
    w = (1 + grid.xi_norm**2) ** s
    axes = tuple(range(1, a.ndim))
    diff = np.sqrt(np.sum(w * np.abs(a - b) ** 2, axis=axes)).sum()
    return diff / np.sqrt(np.sum(w * np.abs(b) ** 2, axis=axes)).sum()


# -- existence times ---------------------------------------------------------------------


def test_t_alpha_example():
    assert existence_time_alpha([1.5], [1.0], 1, 1.0) == pytest.approx(1 / 39366, rel=1e-14)


def test_t_alpha_zero_data_first_branch():
    assert existence_time_alpha([1.5, 1.7], [0.0, 0.0], 2, 1.0) == pytest.approx(1 / 12)


def test_t_alpha_four_pair_enumeration():
    alpha, norms, n, C = (1.8, 2.2), (1.0, 2.0), 2, 1.0
    vals = [((1 - 1 / a) / (9 * n**2 * C * u)) ** (a / (a - 1)) for a in alpha for u in norms]
    expected = 0.5 * min([1 / (3 * n * C)] + vals)
    assert existence_time_alpha(alpha, norms, n, C) == pytest.approx(expected, rel=1e-14)


def test_t2_example_and_consistency():
    assert existence_time_classical([1.0], 1, 1.0) == pytest.approx(1 / 648, rel=1e-14)
    assert existence_time_classical([0.0], 1, 1.0) == pytest.approx(1 / 6)
    for norms in ([1.0], [0.3, 2.0], [0.01, 0.02, 5.0]):
        n = len(norms)
        assert existence_time_alpha([2.0] * n, norms, n) == pytest.approx(existence_time_classical(norms, n))


@pytest.mark.parametrize("bad", [dict(alpha=[1.0]), dict(alpha=[0.5]), dict(C=0.0), dict(norms=[-1.0])])
def test_t_alpha_errors(bad):
    kw = dict(alpha=[1.5], norms=[1.0], C=1.0) | bad
    with pytest.raises(ValueError):
        existence_time_alpha(kw["alpha"], kw["norms"], 1, kw["C"])


@settings(max_examples=60)
@given(a=st.floats(1.05, 3.0), u=st.floats(1e-3, 10), sign=st.sampled_from([-1, 1]))
def test_t_alpha_continuous(a, u, sign):
    t0 = existence_time_alpha([a], [u])
    d1 = abs(existence_time_alpha([a + sign * 1e-5], [u]) - t0)
    d2 = abs(existence_time_alpha([a + sign * 1e-7], [u]) - t0)
    # shrinking the step 100x shrinks the change roughly 100x (or it was already zero)
    assert d2 <= d1 / 50 + 1e-15 * t0


def test_t0_arithmetic():
    delta, beta = 0.1, 1.0
    phi = (1 - 1 / 1.9) / (9 + 0.1)
    assert phi_floor(delta, beta, 1.0, 1, 1.0) == pytest.approx(phi, rel=1e-14)
    expected = 0.5 * min(1 / 3, phi ** (2.1 / 0.9), phi ** (1.9 / 1.1))
    assert existence_time_floor(delta, beta, [1.0], 1, 1.0) == pytest.approx(expected, rel=1e-14)
    # phi < 1 picks the larger exponent
    assert expected == pytest.approx(0.5 * phi ** (2.1 / 0.9))


def test_t0_large_phi_branch():
    # tiny data and small C push phi above 1; then the exponent (2 - delta)/(1 + delta) wins
    delta, beta, C = 0.1, 2.0, 1e-4
    phi = phi_floor(delta, beta, 1e-6, 1, C)
    assert phi > 1
    assert existence_time_floor(delta, beta, [1e-6], 1, C) == pytest.approx(0.5 * phi ** (1.9 / 1.1))


def test_t0_tends_to_t2_as_delta_vanishes():
    T2 = existence_time_classical([1.0], 1)
    gaps = [abs(existence_time_floor(10.0**-k, 1.0, [1.0], 1) - T2) / T2 for k in range(2, 8)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-5


@settings(max_examples=200)
@given(delta=st.floats(1e-3, 1 / 6 - 1e-3), beta=st.floats(0.1, 3), frac=st.floats(-1, 1),
       u2=st.floats(0, 10), c=st.floats(0, 1 / 9))
def test_t0_below_t_alpha(delta, beta, frac, u2, c):
    # data family with c <= 1/(9 n^2 C): ||u_0alpha|| <= ||u_02|| + c |2 - alpha|^beta
    alpha = 2 + frac * delta
    if alpha == 2:
        return
    ua = u2 + c * abs(2 - alpha) ** beta
    assert existence_time_floor(delta, beta, [u2], 1) <= existence_time_alpha([alpha], [ua], 1) * (1 + 1e-12)


def test_t0_errors():
    with pytest.raises(ValueError):
        existence_time_floor(0.2, 1.0, [1.0])
    with pytest.raises(ValueError):
        existence_time_floor(0.1, 0.0, [1.0])


# -- config and trajectory types ---------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(substeps=0), dict(picard_tol=1.0), dict(picard_max_iters=0),
                                dict(generic_constant=-1), dict(mode="RK4"), dict(dt=0.0)])
def test_solver_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_dt_sets_node_count():
    assert SolverConfig(dt=0.1).time_nodes(1.0).size == 11


def test_trajectory_invariants():
    spec = burgers(N=16)
    c = spec.initial_data.coeffs
    with pytest.raises(ValueError):
        SolutionTrajectory(np.array([0.1, 0.2]), np.stack([c, c]), spec)
    with pytest.raises(ValueError):
        SolutionTrajectory(np.array([0.0, 0.0]), np.stack([c, c]), spec)
    bad = np.stack([c, c * np.nan])
    with pytest.raises(BlowUpError):
        SolutionTrajectory(np.array([0.0, 1.0]), bad, spec)
    traj = SolutionTrajectory(np.array([0.0, 1.0]), np.stack([c, c]), spec)
    with pytest.raises(ValueError):
        traj.index_of(0.5)


# -- Duhamel operators ----------------------------------------------------------------------------


def constant_trajectory(spec, times, field):
    return SolutionTrajectory(np.asarray(times), np.stack([field.coeffs] * len(times)), spec)


def test_operators_vanish_without_symbols():
    spec = burgers(N=16).without_symbols()
    traj = constant_trajectory(spec, [0, 0.1, 0.2], spec.initial_data)
    assert np.all(operator_A(spec, traj, 0.2).coeffs == 0)
    assert np.all(operator_B(spec, traj, traj, 0.2).coeffs == 0)


def test_operator_A_constant_integrand_closed_form():
    # L = identity symbol, alpha = 2, constant state: A(t) = (1 - exp(-t |xi|^2))/|xi|^2 * u_hat
    g = FourierGrid(1, 8)
    u = single_mode(g, (2,))
    spec = SystemSpec("lin", g, 2.0, {}, {(0, 0): lambda xi: 1.0}, u, 1.0)
    t = 0.37
    traj = constant_trajectory(spec, np.linspace(0, t, 4), u)
    out = operator_A(spec, traj, t).coeffs[0]
    assert out[2] == pytest.approx((1 - math.exp(-4 * t)) / 4 * u.coeffs[0, 2], rel=1e-14)


def test_operator_B_two_substeps_by_hand():
    # Burgers, u(tau_0) = cos x, u(tau_1) = a cos x; at k = 2 the frozen forcing is
    # F_l = a_l^2 * i sqrt(2 pi)/4 and the kernel weights are exact exponential integrals
    g = FourierGrid(1, 8)
    u = single_mode(g, (1,))
    spec = build_preset("Burgers1D", g, 1.8, u)
    a, h = 0.6, 0.05
    times = np.array([0.0, h, 2 * h])
    traj = SolutionTrajectory(times, np.stack([u.coeffs, a * u.coeffs, a * a * u.coeffs]), spec)
    lam = 2.0**1.8
    F0 = 1j * ROOT_2PI / 4
    t = 2 * h
    w0 = (math.exp(-(t - h) * lam) - math.exp(-t * lam)) / lam
    w1 = (1 - math.exp(-(t - h) * lam)) / lam
    expected = w0 * F0 + w1 * a**2 * F0
    out = operator_B(spec, traj, traj, t).coeffs[0]
    assert out[2] == pytest.approx(expected, rel=1e-14)
    assert out[-2] == pytest.approx(np.conj(expected), rel=1e-14)


def test_operator_B_grid_mismatch():
    spec = burgers(N=16)
    a = constant_trajectory(spec, [0, 0.1, 0.2], spec.initial_data)
    b = constant_trajectory(spec, [0, 0.05, 0.2], spec.initial_data)
    with pytest.raises(ValueError):
        operator_B(spec, a, b, 0.2)


# -- Picard ----------------------------------------------------------------------------------------


def test_picard_zero_data():
    spec = burgers(N=16, amp=(0.0, 0.0))
    traj, rep = picard_solve(spec, 0.1, SolverConfig(substeps=8, mode=GLOBAL_PICARD))
    assert rep.iterations == 1 and np.all(traj.states == 0)


@pytest.mark.parametrize("mode", [GLOBAL_PICARD, ETD_MARCHING])
def test_linear_system_exact(mode):
    g = FourierGrid(2, 16)
    spec = SystemSpec("lin", g, [1.6, 2.3], {}, {}, random_field(g, n=2, seed=4), 2.0)
    traj = solve(spec, 0.7, SolverConfig(substeps=16, mode=mode))
    for m, t in enumerate(traj.times):
        ref = apply_semigroup(spec.initial_data, spec.alpha, t).coeffs
        assert np.max(np.abs(traj.states[m] - ref)) <= 1e-14 * np.max(np.abs(ref))


def test_picard_matches_etd_on_burgers():
    spec = burgers()
    T = min(existence_time_for(spec), 0.1)
    cfg = SolverConfig(substeps=512, mode=GLOBAL_PICARD)
    p, rep = picard_solve(spec, T, cfg)
    e = etd_march(spec, T, SolverConfig(substeps=512))
    assert rep.converged and rep.conditions_hold
    for m in range(len(p)):
        assert rel_hs(p.states[m], e.states[m], spec.grid, spec.sobolev_index) <= 1e-6
    assert max(rep.ratios) <= rep.contraction_bound + 0.1
    assert np.all(np.diff(rep.differences) < 0)


def test_picard_non_convergence():
    spec = burgers(N=32)
    with pytest.raises(NonConvergenceError, match="last ratio"):
        picard_solve(spec, 0.01, SolverConfig(substeps=8, mode=GLOBAL_PICARD, picard_max_iters=2,
                                              picard_tol=1e-15))


def test_picard_enforces_existence():
    spec = burgers(N=32)
    T = existence_time_for(spec)
    cfg = SolverConfig(substeps=8, mode=GLOBAL_PICARD, enforce_existence=True)
    with pytest.raises(ConfigError):
        picard_solve(spec, 2 * T, cfg)
    picard_solve(spec, T, cfg)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_picard_blow_up_detected():
    spec = burgers(N=64, amp=(1e150, 0.0), alpha=1.5)
    with pytest.raises(BlowUpError):
        picard_solve(spec, 1.0, SolverConfig(substeps=4, mode=GLOBAL_PICARD))


# -- ETD --------------------------------------------------------------------------------------------


def test_etd_zero_data():
    spec = burgers(N=16, amp=(0.0, 0.0))
    assert np.all(etd_march(spec, 1.0, SolverConfig(substeps=10)).states == 0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_etd_blow_up_reports_step():
    spec = burgers(N=64, amp=(1e150, 0.0), alpha=1.5)
    with pytest.raises(BlowUpError, match="step"):
        etd_march(spec, 1.0, SolverConfig(substeps=4))


def test_etd_first_order_self_convergence():
    g = FourierGrid(1, 64)
    x = g.coordinates()[0]
    spec = build_preset("Burgers1D", g, 1.9, forward_transform(0.5 * np.sin(x) + 0.2 * np.cos(2 * x), g), 1.0)
    T = 0.5
    ref = etd_march(spec, T, SolverConfig(substeps=6400)).states[-1]
    w = 1 + g.xi_norm**2

    def err(M):
        return np.sqrt(np.sum(w * np.abs(etd_march(spec, T, SolverConfig(substeps=M)).states[-1] - ref) ** 2))

    e32, e64 = err(32), err(64)
    assert 1.7 < e32 / e64 < 2.3


@pytest.mark.parametrize("model,N", [("NavierStokes", 8), ("MHD", 8)])
def test_divergence_free_along_trajectory(model, N):
    g = FourierGrid(3, N)
    n = 3 if model == "NavierStokes" else 6
    spec = build_preset(model, g, 1.9, random_field(g, n=n, seed=7) * 0.1)
    traj = etd_march(spec, 0.2, SolverConfig(substeps=20))
    for m in range(len(traj)):
        for b in spec.divergence_blocks:
            assert divergence_defect(traj.state(m), b) <= 1e-12


# -- diagnostics ----------------------------------------------------------------------------------------


def test_uniform_product_bound_zero_and_constant():
    spec = burgers(N=8, amp=(0.0, 0.0))
    traj = constant_trajectory(spec, [0.0, 1.0], spec.initial_data)
    assert uniform_product_bound(traj) == 0.0
    c = 0.7
    g = spec.grid
    const = forward_transform(np.full(8, c), g)
    traj = constant_trajectory(spec.with_initial_data(const), [0.0, 1.0], const)
    # u^2 = c^2 has only the mean mode: coefficient c^2 sqrt(L), weight (1 + 0)^s = 1
    assert uniform_product_bound(traj, 3.0) == pytest.approx(c**2 * math.sqrt(g.length), rel=1e-14)


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(0.01, 20), seed=st.integers(0, 1000))
def test_uniform_product_bound_quadratic(lam, seed):
    g = FourierGrid(2, 8)
    f = random_field(g, n=2, seed=seed)
    spec = SystemSpec("x", g, 1.9, {}, {}, f, 2.0)
    a = uniform_product_bound(constant_trajectory(spec, [0, 1], f))
    b = uniform_product_bound(constant_trajectory(spec, [0, 1], f * lam))
    assert b == pytest.approx(lam**2 * a, rel=1e-12)


def test_hs_norms_of_trajectory():
    spec = burgers(N=16)
    traj = etd_march(spec, 0.01, SolverConfig(substeps=4))
    assert traj.hs_norms().shape == (5, 1)
    assert traj.hs_norms()[0, 0] == pytest.approx(norm(spec.initial_data, Hs(spec.sobolev_index)))
    assert traj.metadata["mode"] == ETD_MARCHING and len(traj.metadata["spec_hash"]) == 16


def test_solution_state_is_spectral_field():
    spec = burgers(N=16)
    traj = etd_march(spec, 0.01, SolverConfig(substeps=4))
    assert isinstance(traj.state(2), SpectralField) and traj.state(2).hermitian
