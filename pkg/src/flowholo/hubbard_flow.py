"""
Diagonalising flow of the Hubbard subsystem, truncated at leading order.

A physical fermion in mode l is dressed as

    c_l^dag = h_l(B) a_l^dag + sum_{p'q'p} M^l_{p'q'p}(B) :a_{p'}^dag a_{q'}^dag a_p:

with h_l(0) = 1, M(0) = 0 (coherent initialisation).  Keeping terms to
first order in U in the M equation gives

    dM^l_{p'q'p}/dB = U Delta exp(-B Delta^2)            (h_l -> 1)
    dh_l/dB        = -U sum_{p'q'p} M^l_{p'q'p} Delta exp(-B Delta^2) W_{p'q'p}

with Delta = eps_{p'} - eps_p + eps_{q'} - eps_l and channel weight
W = Q K.  Q = n_{p'} n_{q'} (1 - n_p) + (1 - n_{p'})(1 - n_{q'}) n_p is the
phase-space factor and K the momentum-conservation constraint between the
standing-wave labels (see ``conservation_mask``).
The solution is

    M = U (1 - exp(-B Delta^2)) / Delta
    h = 1 - (U^2/2) sum W (1 - exp(-B Delta^2))^2 / Delta^2,

so that h^2 + sum W M^2 = 1 + O(U^4): the flow keeps the operator
normalised and h decreases monotonically.  Both spin species obey the
same equations; one copy is computed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigurationError, DomainError, StiffnessError
from .lattice import ModeGrid, density_of_states
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate_1d


@dataclass(frozen=True)
class FlowState:
    """Dressing functions at flow time B for the target modes ``targets``.

    ``m`` has shape (len(targets), N, N, N) indexed [target, p', q', p].
    """

    flow_time: float
    h: np.ndarray
    m: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class ResidueCurve:
    b_values: np.ndarray
    h_fermi: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return self.h_fermi ** 2


def coherent_state(grid: ModeGrid, targets: Sequence[int] | None = None) -> FlowState:
    """h = 1, M = 0 for each target mode (all modes by default)."""
    n = grid.n_modes
    targets = np.arange(n) if targets is None else np.asarray(targets, dtype=int)
    if targets.size == 0 or targets.min() < 0 or targets.max() >= n:
        raise ConfigurationError("target modes must index the grid")
    return FlowState(0.0, np.ones(targets.size), np.zeros((targets.size, n, n, n)), targets)


def energy_mismatch(grid: ModeGrid, targets) -> np.ndarray:
    """Delta[t, p', q', p] = eps_p' - eps_p + eps_q' - eps_l(t)."""
    e = grid.energies
    el = e[np.asarray(targets)]
    return (e[None, :, None, None] + e[None, None, :, None]
            - e[None, None, None, :] - el[:, None, None, None])


def phase_space_factor(grid: ModeGrid) -> np.ndarray:
    """Q[p', q', p] = n_p' n_q' (1 - n_p) + (1 - n_p')(1 - n_q') n_p."""
    n = grid.occupations.astype(float)
    h = 1.0 - n
    return (n[:, None, None] * n[None, :, None] * h[None, None, :]
            + h[:, None, None] * h[None, :, None] * n[None, None, :])


CONSERVATION_RULES = ("folded", "index", "none")


def conservation_mask(n_modes: int, targets, rule: str = "folded") -> np.ndarray:
    """K[t, p', q', p]: which (l, p', q', p) quadruples the vertex connects.

    ``index`` is l + p = p' + q' on the 1-based grid labels.  ``folded``
    also accepts sign flips of any label (s_l l + s_p p = s_p' p' + s_q' q'),
    since a standing wave sin(k j) is the sum of the plane waves +k and -k.
    ``none`` keeps every quadruple.
    """
    if rule not in CONSERVATION_RULES:
        raise ConfigurationError(f"unknown conservation rule {rule!r}")
    targets = np.asarray(targets)
    shape = (targets.size,) + (n_modes,) * 3
    if rule == "none":
        return np.ones(shape, dtype=bool)
    idx = np.arange(1, n_modes + 1)
    a = (targets + 1)[:, None, None, None]
    c = idx[None, :, None, None]
    d = idx[None, None, :, None]
    b = idx[None, None, None, :]
    keep = a + b == c + d
    if rule == "folded":
        for sa, sb, sc in itertools.product((1, -1), repeat=3):
            keep = keep | (sa * a + sb * b == sc * c + d)
    return np.broadcast_to(keep, shape)


def channel_weights(grid: ModeGrid, targets, rule: str = "folded") -> np.ndarray:
    """W[t, p', q', p] = Q times the conservation mask."""
    targets = np.asarray(targets)
    return phase_space_factor(grid)[None] * conservation_mask(grid.n_modes, targets, rule)


def _check_state(state: FlowState, grid: ModeGrid):
    n = grid.n_modes
    if state.m.shape != (state.targets.size, n, n, n) or state.h.shape != (state.targets.size,):
        raise ConfigurationError("flow state dimensions do not match the grid")


def flow_rhs(state: FlowState, grid: ModeGrid, u: float, self_consistent: bool = False,
             conservation: str = "folded", _cache=None):
    """Right-hand side (dh/dB, dM/dB) of the truncated flow.

    With ``self_consistent`` the M source carries h_l(B) instead of its
    initial value 1; this adds O(U^3) terms beyond the leading order.
    """
    _check_state(state, grid)
    if _cache is None:
        delta = energy_mismatch(grid, state.targets)
        weights = channel_weights(grid, state.targets, conservation)
    else:
        delta, weights = _cache
    decay = delta * np.exp(-state.flow_time * delta * delta)
    dm = u * decay
    if self_consistent:
        dm = dm * state.h[:, None, None, None]
    dh = -u * np.einsum("tabc,tabc->t", state.m * decay, weights)
    return dh, dm


def integrate_flow(init: FlowState, grid: ModeGrid, u: float, b_target: float,
                   rtol: float = 1e-10, atol: float = 1e-13, self_consistent: bool = False,
                   conservation: str = "folded") -> FlowState:
    """Advance ``init`` to ``b_target`` with an adaptive 8th-order Runge-Kutta."""
    return flow_trajectory(init, grid, u, [b_target], rtol, atol, self_consistent,
                           conservation)[-1]


def flow_trajectory(init: FlowState, grid: ModeGrid, u: float, b_values: Sequence[float],
                    rtol: float = 1e-10, atol: float = 1e-13, self_consistent: bool = False,
                    conservation: str = "folded") -> list[FlowState]:
    """States at each of the increasing flow times ``b_values``."""
    _check_state(init, grid)
    b_values = np.asarray(b_values, dtype=float)
    if b_values.size == 0 or b_values[0] < init.flow_time or np.any(np.diff(b_values) < 0):
        raise DomainError("target flow times must be non-decreasing and >= the initial time")
    t = init.targets.size
    shape_m = init.m.shape
    cache = (energy_mismatch(grid, init.targets),
             channel_weights(grid, init.targets, conservation))

    def rhs(b, y):
        st = FlowState(b, y[:t], y[t:].reshape(shape_m), init.targets)
        dh, dm = flow_rhs(st, grid, u, self_consistent, conservation, _cache=cache)
        return np.concatenate([dh, dm.ravel()])

    y0 = np.concatenate([init.h, init.m.ravel()])
    if b_values[-1] == init.flow_time:
        return [init for _ in b_values]
    sol = solve_ivp(rhs, (init.flow_time, b_values[-1]), y0, method="DOP853",
                    t_eval=b_values, rtol=rtol, atol=atol)
    if sol.status != 0:
        reached = float(sol.t[-1]) if sol.t.size else init.flow_time
        raise StiffnessError(f"flow integration stopped at B = {reached}: {sol.message}", reached)
    return [FlowState(float(b), y[:t].copy(), y[t:].reshape(shape_m).copy(), init.targets)
            for b, y in zip(sol.t, sol.y.T)]


def _one_minus_exp_over(delta, b):
    """(1 - exp(-B Delta^2)) / Delta with the Delta -> 0 limit 0."""
    delta = np.asarray(delta, dtype=float)
    safe = np.where(delta == 0.0, 1.0, delta)
    return np.where(delta == 0.0, 0.0, -np.expm1(-b * delta * delta) / safe)


def m_closed_form(eps_l, eps_pp, eps_qp, eps_p, u: float, b: float):
    """M^l_{p'q'p}(B) = U (1 - exp(-B Delta^2)) / Delta."""
    out = u * _one_minus_exp_over(np.asarray(eps_pp) - eps_p + eps_qp - eps_l, b)
    return float(out) if np.ndim(out) == 0 else out


def m_closed_form_grid(grid: ModeGrid, u: float, b: float, targets=None) -> np.ndarray:
    targets = np.arange(grid.n_modes) if targets is None else np.asarray(targets)
    return u * _one_minus_exp_over(energy_mismatch(grid, targets), b)


def h_closed_form_sum(grid: ModeGrid, u: float, b: float, targets=None,
                      conservation: str = "folded", form: str = "flow") -> np.ndarray:
    """Discrete-sum h_l(B) on ``grid``.

    ``form="flow"`` is the exact solution of the truncated equations,
    1 - (U^2/2) sum W (1 - e^{-B D^2})^2 / D^2.  ``form="linear"`` is the
    variant 1 - U^2 sum W (1 - e^{-B D^2}) / (2 D^2), which has the same
    B -> infinity limit but a different approach to it.
    """
    targets = np.arange(grid.n_modes) if targets is None else np.asarray(targets)
    delta = energy_mismatch(grid, targets)
    w = channel_weights(grid, targets, conservation)
    ratio = _one_minus_exp_over(delta, b)
    if form == "flow":
        terms = 0.5 * ratio ** 2
    elif form == "linear":
        safe = np.where(delta == 0.0, 1.0, delta)
        terms = np.where(delta == 0.0, 0.0, ratio / (2.0 * safe))
    else:
        raise ConfigurationError(f"unknown closed-form variant {form!r}")
    return 1.0 - u * u * np.einsum("tabc,tabc->t", terms, w)


def h_closed_form(eps_l: float, u: float, mu: float, b: float,
                  cfg: QuadratureConfig | None = None) -> float:
    """Continuum h_l(B) = 1 - U^2 rho^3 int dE (E-mu)^2/(E-eps_l)^2 (1 - e^{-B(E-eps_l)^2}).

    rho = rho(mu) is frozen at the chemical potential; E runs over the band
    [-2, 2].
    """
    if b < 0:
        raise DomainError("flow time must be non-negative")
    if u == 0.0 or b == 0.0:
        return 1.0
    rho = density_of_states(mu)
    # the integrand tends to 1 off the band instead of decaying, so a margin
    # around the band would add spurious weight; rho vanishes there anyway
    lo, hi = -2.0, 2.0

    def f(e):
        x = e - eps_l
        bx2 = b * x * x
        # (1 - e^{-y})/x^2 -> B as x -> 0
        reg = b if bx2 < 1e-12 else -math.expm1(-bx2) / (x * x)
        return (e - mu) ** 2 * reg

    value, _ = integrate_1d(f, lo, hi, cfg or DEFAULT_CONFIG, points=[eps_l])
    return 1.0 - u * u * rho ** 3 * value


def quasiparticle_residue(h_at_fermi: float) -> float:
    """Z = h_{k_F}^2; h outside (0, 1] signals perturbative breakdown."""
    if not 0.0 < h_at_fermi <= 1.0:
        raise DomainError(f"h at the Fermi level must lie in (0, 1], got {h_at_fermi!r}")
    return h_at_fermi * h_at_fermi


def residue_curve(grid: ModeGrid, u: float, b_values: Sequence[float],
                  conservation: str = "folded") -> ResidueCurve:
    """h_{k_F}(B) from the flow equations for the mode nearest mu."""
    b_values = np.asarray(sorted(b_values), dtype=float)
    init = coherent_state(grid, [grid.fermi_index()])
    states = flow_trajectory(init, grid, u, b_values, conservation=conservation)
    h = np.array([s.h[0] for s in states])
    for value in h:
        quasiparticle_residue(float(value))
    return ResidueCurve(b_values, h)
