import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
import mpmath

from flowholo.errors import ConfigurationError, DomainError
from flowholo.hubbard_flow import (FlowState, coherent_state, conservation_mask, energy_mismatch,
                                   flow_rhs, flow_trajectory, h_closed_form, h_closed_form_sum,
                                   integrate_flow, m_closed_form, m_closed_form_grid,
                                   phase_space_factor, quasiparticle_residue, residue_curve)
from flowholo.lattice import density_of_states, mode_grid


@pytest.fixture(scope="module")
def grid10():
    return mode_grid(10, 0.0)


def test_rhs_vanishes_without_interaction(grid10):
    state = coherent_state(grid10)
    dh, dm = flow_rhs(FlowState(2.0, state.h, np.ones_like(state.m), state.targets), grid10, 0.0)
    assert not np.any(dh) and not np.any(dm)


def test_rhs_at_zero_flow_time(grid10):
    dh, dm = flow_rhs(coherent_state(grid10), grid10, 0.3)
    np.testing.assert_allclose(dm, 0.3 * energy_mismatch(grid10, np.arange(10)), rtol=1e-15)
    assert not np.any(dh)


def test_resonant_channels_frozen(grid10):
    rng = np.random.default_rng(1)
    st0 = coherent_state(grid10)
    state = FlowState(3.7, st0.h, rng.normal(size=st0.m.shape), st0.targets)
    _, dm = flow_rhs(state, grid10, 0.2)
    delta = energy_mismatch(grid10, st0.targets)
    assert np.all(dm[delta == 0.0] == 0.0)
    assert np.count_nonzero(delta == 0.0) > 0


def test_dimension_mismatch(grid10):
    with pytest.raises(ConfigurationError):
        flow_rhs(coherent_state(mode_grid(8)), grid10, 0.1)
    with pytest.raises(ConfigurationError):
        coherent_state(grid10, [10])
    with pytest.raises(ConfigurationError):
        conservation_mask(4, [0], "momentum")


def test_no_interaction_leaves_state(grid10):
    out = integrate_flow(coherent_state(grid10), grid10, 0.0, 25.0)
    assert np.all(out.h == 1.0) and not np.any(out.m)


def test_ode_matches_closed_forms(grid10):
    u = 0.1
    bs = [0.0, 0.5, 2.0, 10.0, 50.0]
    states = flow_trajectory(coherent_state(grid10), grid10, u, bs)
    for b, st_ in zip(bs, states):
        assert np.max(np.abs(st_.m - m_closed_form_grid(grid10, u, b))) <= 1e-6
        assert np.max(np.abs(st_.h - h_closed_form_sum(grid10, u, b))) <= 1e-6


def test_stepper_convergence(grid10):
    a = integrate_flow(coherent_state(grid10), grid10, 0.1, 50.0)
    b = integrate_flow(coherent_state(grid10), grid10, 0.1, 50.0, rtol=1e-12, atol=1e-15)
    assert np.max(np.abs(a.h - b.h)) < 1e-8
    assert np.max(np.abs(a.m - b.m)) < 1e-8


def test_bad_target_times(grid10):
    with pytest.raises(DomainError):
        flow_trajectory(coherent_state(grid10), grid10, 0.1, [2.0, 1.0])


def test_m_closed_form_examples():
    assert m_closed_form(0.0, 0.3, 0.2, 0.5, 1.0, 4.0) == 0.0
    assert m_closed_form(0.0, 0.5, 0.0, 0.0, 0.2, 1e6) == pytest.approx(0.4, rel=1e-14)
    assert m_closed_form(0.0, 1.0, 0.0, 0.0, 1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert m_closed_form(0.0, 1.0, 0.0, 0.0, 1.0, 1.0) == pytest.approx(0.6321, abs=1e-4)


def test_m_closed_form_against_toy_ode():
    # two channels Delta = 1 and Delta = -0.4, dM/dB = U Delta exp(-B Delta^2)
    deltas = np.array([1.0, -0.4])
    sol = solve_ivp(lambda b, m: deltas * np.exp(-b * deltas ** 2), (0, 1), [0.0, 0.0],
                    rtol=1e-12, atol=1e-14)
    for d, m in zip(deltas, sol.y[:, -1]):
        assert m == pytest.approx(m_closed_form(0.0, d, 0.0, 0.0, 1.0, 1.0), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-6, 6), st.floats(0.01, 1), st.floats(0, 100))
def test_m_linear_in_u(delta, u, b):
    assert m_closed_form(0, delta, 0, 0, u, b) / u == pytest.approx(
        m_closed_form(0, delta, 0, 0, 1.0, b), rel=1e-12, abs=1e-15)


def test_h_and_m_scaling_from_ode(grid10):
    out = {u: integrate_flow(coherent_state(grid10), grid10, u, 40.0) for u in (0.05, 0.1)}
    dev = {u: (1 - s.h) / u ** 2 for u, s in out.items()}
    assert np.max(np.abs(dev[0.05] - dev[0.1])) < 1e-8
    assert np.max(np.abs(out[0.05].m / 0.05 - out[0.1].m / 0.1)) < 1e-10


def test_saturation_on_gapped_grid():
    grid = mode_grid(6, 0.0)
    delta = np.abs(energy_mismatch(grid, np.arange(6)))
    gap = delta[delta > 1e-12].min()
    b1 = 40.0 / gap ** 2
    a, b = flow_trajectory(coherent_state(grid), grid, 0.1, [b1, 3 * b1])
    assert np.max(np.abs(a.h - b.h)) < 1e-10
    assert np.max(np.abs(a.m - b.m)) < 1e-10


def test_fermi_residue_monotone_and_bounded():
    grid = mode_grid(12, 0.0)
    curve = residue_curve(grid, 0.1, np.linspace(0, 60, 13))
    assert np.all(np.diff(curve.h_fermi) <= 1e-14)
    assert np.all((curve.z > 0) & (curve.z <= 1))
    assert curve.z[0] == 1.0


def test_residue_without_interaction():
    curve = residue_curve(mode_grid(8, 0.3), 0.0, [0.0, 5.0, 50.0])
    assert np.all(curve.z == 1.0)


def test_linear_form_differs_at_finite_b(grid10):
    flow = h_closed_form_sum(grid10, 0.1, 1.0)
    lin = h_closed_form_sum(grid10, 0.1, 1.0, form="linear")
    assert np.max(np.abs(flow - lin)) > 1e-4
    np.testing.assert_allclose(h_closed_form_sum(grid10, 0.1, 1e8),
                               h_closed_form_sum(grid10, 0.1, 1e8, form="linear"), atol=1e-12)
    with pytest.raises(ConfigurationError):
        h_closed_form_sum(grid10, 0.1, 1.0, form="cubic")


def test_self_consistent_is_higher_order(grid10):
    diffs = []
    for u in (0.05, 0.1):
        a = integrate_flow(coherent_state(grid10, [4]), grid10, u, 20.0)
        b = integrate_flow(coherent_state(grid10, [4]), grid10, u, 20.0, self_consistent=True)
        diffs.append(abs(a.h[0] - b.h[0]))
    # the difference enters at U^4 in h
    assert diffs[1] / diffs[0] == pytest.approx(16, rel=0.05)


def test_conservation_rules():
    idx = conservation_mask(5, np.arange(5), "index")
    fold = conservation_mask(5, np.arange(5), "folded")
    assert np.all(fold[idx])
    assert fold.sum() > idx.sum()
    assert conservation_mask(5, [0], "none").all()
    # l + p = p' + q' with 1-based labels
    assert idx[1, 0, 2, 1] and not idx[1, 0, 3, 1]


def test_phase_space_factor_values():
    grid = mode_grid(4, 0.0)     # occupations 1, 1, 0, 0
    q = phase_space_factor(grid)
    assert q[0, 1, 2] == 1.0     # two filled in, one empty out
    assert q[2, 3, 0] == 1.0     # two empty, one filled
    assert q[0, 2, 1] == 0.0


def test_h_closed_form_examples():
    assert h_closed_form(0.0, 0.0, 0.0, 10.0) == 1.0
    assert h_closed_form(0.5, 0.3, 0.0, 0.0) == 1.0
    values = [h_closed_form(0.0, 0.1, 0.0, b) for b in (1.0, 10.0, 30.0)]
    assert values[1] < 1.0
    assert values[0] > values[1] > values[2]
    with pytest.raises(DomainError):
        h_closed_form(0.0, 0.1, 0.0, -1.0)


def test_h_closed_form_against_mpmath():
    b, el, mu, u = 10.0, 0.3, 0.0, 0.1
    rho = density_of_states(mu)
    lo, hi = -2.0, 2.0
    f = lambda e: (e - mu) ** 2 * (1 - mpmath.exp(-b * (e - el) ** 2)) / (e - el) ** 2
    ref = 1 - u * u * rho ** 3 * float(mpmath.quad(f, [lo, el, hi]))
    assert h_closed_form(el, u, mu, b) == pytest.approx(ref, rel=1e-10)


def test_quasiparticle_residue():
    assert quasiparticle_residue(1.0) == 1.0
    assert quasiparticle_residue(0.9) == pytest.approx(0.81)
    for bad in (0.0, -0.1, 1.2):
        with pytest.raises(DomainError):
            quasiparticle_residue(bad)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.9, 1.9), st.floats(-1.5, 1.5), st.floats(0.01, 50), st.floats(1.01, 10))
def test_h_closed_form_non_increasing_in_b(el, mu, b, factor):
    assert h_closed_form(el, 0.1, mu, b * factor) <= h_closed_form(el, 0.1, mu, b) + 1e-12
