"""
O(U^2) correction to the min-entropy from the M x M sector of <eta^2>.

After freezing the density of states at mu and doing the occupation sums,
the correction takes the form

    dS = -C int_{(1/L)^2}^{(l/L)^2} dB B^{-3/2} K(B),   C = 3 g^2 U^2 rho / (pi^2 sqrt(2 pi))

(L the UV cutoff).  The scaled energies are E~ = sqrt(2B)(E - mu) and
eps~ = sqrt(2B)(eps_l - mu).  Without regularisation the kernel
K = int d eps~ int_0^inf dE~ E~^2 erfc(E~)/(E~ + eps~)^2 does not depend on
B and has a second-order pole on the line E~ = -eps~.  The B-integral then
gives 2L(1 - 1/l), i.e. C * 2L(1 - 1/l) = 6 g^2 U^2 rho (L - L/l)/(pi^2 sqrt(2 pi)).

Stopping the diagonalising flow at B* multiplies the integrand by
(1 - exp(-(B*/B)(E - eps)^2))^2, which vanishes quadratically on the pole
line.  With B* = B^alpha and eps restricted to [0, sqrt(2B) eps0] the
kernel stays finite for every alpha in (0, 1).

The sign is reported as computed: C > 0 and K > 0, so dS < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, PoleError
from .flow_free import FitResult, EntropyScan, fit_scaling
from .lattice import density_of_states
from .quadrature import (DEFAULT_CONFIG, QuadratureConfig, erfc, gauss_legendre_panels,
                         integrate_1d, probe_pole_divergence)

SQRT_PI = math.sqrt(math.pi)
#: erfc(E) E^2 < 1e-19 beyond this scaled energy
E_MAX = 6.5


@dataclass(frozen=True)
class CorrectionInput:
    g: float
    u: float
    mu: float
    cutoff: float
    l: float
    rho_mu: float | None = None

    def __post_init__(self):
        if not self.cutoff > 0:
            raise DomainError("UV cutoff must be positive")
        if not self.l > 1:
            raise DomainError("subsystem length must exceed 1")
        if self.rho_mu is not None and not self.rho_mu > 0:
            raise DomainError("density of states must be positive")

    @property
    def rho(self) -> float:
        return density_of_states(self.mu) if self.rho_mu is None else self.rho_mu


@dataclass(frozen=True)
class RegularizationSchedule:
    """B* = B^alpha; eps0 bounds the scaled eps-integral at sqrt(2B) eps0."""

    alpha: float
    eps0: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if not self.eps0 > 0:
            raise DomainError("eps0 must be positive")


@dataclass(frozen=True)
class CorrectionResult:
    lengths: np.ndarray
    values: np.ndarray
    fit: FitResult
    sign: int


def prefactor(inp: CorrectionInput) -> float:
    """-3 g^2 U^2 rho / (pi^2 sqrt(2 pi)), the coefficient of the B-integral."""
    return -3.0 * inp.g ** 2 * inp.u ** 2 * inp.rho / (math.pi ** 2 * math.sqrt(2 * math.pi))


def b_factor(cutoff: float, l: float) -> float:
    """int_{(1/L)^2}^{(l/L)^2} B^{-3/2} dB = 2 L (1 - 1/l)."""
    return 2.0 * cutoff * (1.0 - 1.0 / l)


def correction_integrand(e: float, eps_l: float) -> float:
    """E^2 erfc(E) / (E + eps_l)^2 for scaled energies, E >= 0."""
    if e < 0:
        raise DomainError("scaled energy E must be non-negative")
    denom = e + eps_l
    if denom == 0.0:
        raise PoleError(f"second-order pole at E = -eps_l = {e}")
    return e * e * erfc(e) / (denom * denom)


def erfc_moment(eps: float) -> float:
    """int_0^inf E^2 erfc(E) (E - eps)^2 dE = -3 eps/8 + (6 + 5 eps^2)/(15 sqrt(pi))."""
    return -0.375 * eps + (6.0 + 5.0 * eps * eps) / (15.0 * SQRT_PI)


def erfc_moment_quadrature(eps: float, cfg: QuadratureConfig | None = None) -> float:
    value, _ = integrate_1d(lambda e: e * e * erfc(e) * (e - eps) ** 2, 0.0, math.inf,
                            cfg or DEFAULT_CONFIG)
    return value


# -- unregularised kernel ----------------------------------------------------

def unregularized_kernel(delta: float, cfg: QuadratureConfig | None = None,
                         domain: str = "half") -> float:
    """Kernel with the strip |E - eps| < delta removed.

    ``half`` integrates eps~ = -eps over eps in [0, inf), the region that
    contains the pole.  ``full`` adds eps~ in [0, inf), which is regular.
    """
    cfg = cfg or DEFAULT_CONFIG
    if domain not in ("half", "full"):
        raise DomainError(f"unknown domain {domain!r}")
    # algebraic 1/eps^2 tails need the rational map
    eps_cfg = replace(cfg, semi_infinite_map="rational")

    def over_eps(e):
        # pole at eps = e for the factor 1/(e - eps)^2
        (_, v), = probe_pole_divergence(lambda x: 1.0 / (e - x) ** 2, e, [delta], eps_cfg,
                                        a=0.0, b=math.inf)
        if domain == "full" and e > 0:
            v += integrate_1d(lambda x: 1.0 / (e + x) ** 2, 0.0, math.inf, eps_cfg)[0]
        return e * e * erfc(e) * v

    try:
        first = integrate_1d(over_eps, 0.0, delta, cfg)[0]
        second = integrate_1d(over_eps, delta, math.inf, cfg)[0]
    except ConvergenceError as exc:
        raise ConvergenceError(f"unregularized E-integral failed at window {delta:g}: {exc}",
                               exc.partial, exc.error_estimate) from exc
    return first + second


def delta_s_unregularized(inp: CorrectionInput, windows: Sequence[float],
                          cfg: QuadratureConfig | None = None,
                          domain: str = "half") -> list[tuple[float, float]]:
    """dS with an exclusion window around the pole, for each window.

    Values grow like 1/delta: the unregularised correction diverges.
    """
    windows = [float(w) for w in windows]
    if any(w <= 0 for w in windows) or any(b >= a for a, b in zip(windows, windows[1:])):
        raise DomainError("windows must be positive and strictly decreasing")
    scale = prefactor(inp) * b_factor(inp.cutoff, inp.l)
    if scale == 0.0:
        return [(w, 0.0) for w in windows]
    return [(w, scale * unregularized_kernel(w, cfg, domain)) for w in windows]


# -- regularised kernel ------------------------------------------------------

def _regulated(u, ratio):
    """(1 - exp(-ratio u^2))^2 / u^2, finite (-> 0) on u = 0."""
    x = ratio * u * u
    safe = np.where(u == 0.0, 1.0, u * u)
    small = x < 1e-6
    series = ratio * ratio * u * u * (1.0 - x + 7.0 / 12.0 * x * x)
    return np.where(small, series, np.expm1(-x) ** 2 / safe)


def _e_integral(eps: float, ratio: float, window: float = 0.0) -> float:
    """int_0^inf dE E^2 erfc(E) (1 - e^{-ratio (E-eps)^2})^2 / (E-eps)^2 on a fixed rule."""
    width = min(0.5, 0.5 / math.sqrt(ratio))
    breaks = [0.0]
    if window > 0.0:
        lo, hi = eps - window, eps + window
        breaks += [min(max(lo, 0.0), E_MAX), min(max(hi, 0.0), E_MAX)]
    else:
        if 0.0 < eps < E_MAX:
            breaks.append(eps)
    breaks.append(E_MAX)
    if window > 0.0:
        e1, w1 = gauss_legendre_panels(breaks[:2], max_width=width)
        e2, w2 = gauss_legendre_panels(breaks[2:], max_width=width)
        e, w = np.concatenate([e1, e2]), np.concatenate([w1, w2])
    else:
        e, w = gauss_legendre_panels(breaks, max_width=width)
    return float(np.dot(w * e * e * erfc(e), _regulated(e - eps, ratio)))


def regularized_inner(ratio: float, eps_max: float, cfg: QuadratureConfig | None = None,
                      window: float = 0.0) -> float:
    """int_0^eps_max d eps int_0^inf dE E^2 erfc(E) (1 - e^{-ratio (E-eps)^2})^2/(E-eps)^2."""
    cfg = cfg or DEFAULT_CONFIG
    f = lambda x: _e_integral(x, ratio, window)
    split = min(eps_max, E_MAX + 1.0)
    value = integrate_1d(f, 0.0, split, cfg)[0]
    if eps_max > split:
        value += integrate_1d(f, split, eps_max, cfg)[0]
    return value


def taylor_inner(ratio: float, eps_max: float) -> float:
    """Small-ratio limit: ratio^2 int_0^eps_max erfc_moment(eps) d eps (closed form)."""
    x = eps_max
    return ratio * ratio * (-3.0 * x * x / 16.0 + 2.0 * x / (5.0 * SQRT_PI)
                            + x ** 3 / (9.0 * SQRT_PI))


def taylor_inner_in_b(b: float, sched: RegularizationSchedule) -> float:
    """Same as ``taylor_inner`` written in B with eps_max = sqrt(2B) eps0:

    (B*/B)^2 [2 sqrt2 eps0/(5 sqrt pi) sqrt B - 3 eps0^2/8 B + 2 sqrt2 eps0^3/(9 sqrt pi) B^{3/2}].
    """
    r = b ** (sched.alpha - 1.0)
    e0 = sched.eps0
    return r * r * (2 * math.sqrt(2) * e0 / (5 * SQRT_PI) * math.sqrt(b)
                    - 3 * e0 * e0 / 8 * b
                    + 2 * math.sqrt(2) * e0 ** 3 / (9 * SQRT_PI) * b ** 1.5)


def regularized_kernel(b: float, sched: RegularizationSchedule,
                       cfg: QuadratureConfig | None = None, window: float = 0.0) -> float:
    """Regularised inner double integral at flow time B (ratio B*/B = B^(alpha-1))."""
    if not b > 0:
        raise DomainError("flow time must be positive")
    return regularized_inner(b ** (sched.alpha - 1.0), math.sqrt(2.0 * b) * sched.eps0, cfg,
                             window)


def regularized_b_integral(inp: CorrectionInput, sched: RegularizationSchedule,
                           cfg: QuadratureConfig | None = None) -> float:
    """I(l) = int dB B^{-3/2} K_reg(B) over [(1/L)^2, (l/L)^2], done in t = log B."""
    cfg = cfg or DEFAULT_CONFIG
    t_lo = -2.0 * math.log(inp.cutoff)
    t_hi = 2.0 * math.log(inp.l / inp.cutoff)

    def f(t):
        b = math.exp(t)
        return regularized_kernel(b, sched, cfg) / math.sqrt(b)

    try:
        return integrate_1d(f, t_lo, t_hi, cfg)[0]
    except ConvergenceError as exc:
        raise ConvergenceError(f"regularized B-integral failed: {exc}", exc.partial,
                               exc.error_estimate) from exc


def delta_s_regularized(inp: CorrectionInput, sched: RegularizationSchedule,
                        cfg: QuadratureConfig | None = None) -> float:
    """Regularised dS(l) = -C I(l)."""
    c = prefactor(inp)
    if c == 0.0:
        return 0.0
    return c * regularized_b_integral(inp, sched, cfg)


def leading_scaling(alpha: float, cutoff: float, l: float) -> float:
    """int_{(1/L)^2}^{(l/L)^2} B^{2(alpha-1)} dB = L^{2-4a}/(2a-1) (l^{-(2-4a)} - 1).

    At alpha = 1/2 this is the logarithmic limit 2 ln l.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    s = 2.0 - 4.0 * alpha
    if abs(s) < 1e-12:
        return 2.0 * math.log(l)
    return cutoff ** s / (2.0 * alpha - 1.0) * (l ** (-s) - 1.0)


def direct_b_integral(alpha: float, cutoff: float, l: float,
                      cfg: QuadratureConfig | None = None) -> float:
    """Numerical int B^{2(alpha-1)} dB over the flow window (oracle for ``leading_scaling``)."""
    f = lambda t: math.exp(t) ** (2.0 * alpha - 1.0)
    return integrate_1d(f, -2.0 * math.log(cutoff), 2.0 * math.log(l / cutoff),
                        cfg or DEFAULT_CONFIG)[0]


def delta_s_full(inp: CorrectionInput, sched: RegularizationSchedule,
                 lengths: Sequence[float] | None = None,
                 cfg: QuadratureConfig | None = None) -> CorrectionResult:
    """Regularised dS over an l-sweep, fitted as dS(l) - dS(l_max) = c/l + d.

    ``lengths`` defaults to (32, 64, 128, 256, inp.l) without duplicates.
    """
    lengths = np.array(sorted(set(lengths or (32, 64, 128, 256, inp.l))), dtype=float)
    values = np.array([delta_s_regularized(_with_l(inp, l), sched, cfg) for l in lengths])
    shifted = values - values[-1]
    if len(lengths) >= 4:
        fit = fit_scaling(EntropyScan(lengths, shifted), "inverse_l")
    else:
        fit = FitResult(float("nan"), float("nan"), float("nan"), "inverse_l")
    return CorrectionResult(lengths, values, fit, int(np.sign(values[-1])))


def _with_l(inp: CorrectionInput, l: float) -> CorrectionInput:
    return CorrectionInput(inp.g, inp.u, inp.mu, inp.cutoff, float(l), inp.rho_mu)


def delta_s_mode_sum(g: float, u: float, n_modes: int, mu: float, cutoff: float, l: float,
                     conservation: str = "index") -> float:
    """Direct mode sum of the M x M term before any continuum reduction.

    -sum 4 int B dB (16 g^2/(N+1)^2) e^{-2B D_m^2} D_m^2 U^2 sin^2 m sin^2 l K / D_l^2 x occ
    with D_m = eps_p' + eps_q' - eps_p - eps_m, D_l = eps_p' - eps_p + eps_q' - eps_l and
    occ = n_p' n_q' (1-n_p)(1-n_m) + (1-n_p')(1-n_q') n_p n_m.  The B-integral is
    done in closed form; terms with D_l = 0 are dropped.  Only for small grids.
    """
    from .hubbard_flow import conservation_mask
    from .lattice import mode_grid
    if n_modes > 16:
        raise DomainError("the direct mode sum is limited to n_modes <= 16")
    grid = mode_grid(n_modes, mu)
    e, n = grid.energies, grid.occupations.astype(float)
    s2 = np.sin(grid.momenta) ** 2
    k = conservation_mask(n_modes, np.arange(n_modes), conservation).astype(float)  # [l,p',q',p]
    three = e[:, None, None] + e[None, :, None] - e[None, None, :]                 # [p',q',p]
    d_l = three[None] - e[:, None, None, None]
    inv_dl2 = np.where(d_l == 0.0, 0.0, 1.0 / np.where(d_l == 0.0, 1.0, d_l) ** 2)
    d_m = three[..., None] - e[None, None, None, :]                                # [p',q',p,m]
    a = 2.0 * d_m * d_m
    b_lo, b_hi = cutoff ** -2, (l / cutoff) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = lambda b: -np.exp(-a * b) * (a * b + 1.0) / (a * a)
        b_int = np.where(a == 0.0, 0.5 * (b_hi ** 2 - b_lo ** 2), anti(b_hi) - anti(b_lo))
    h = 1.0 - n
    occ = (n[:, None, None, None] * n[None, :, None, None] * h[None, None, :, None] * h[None, None, None, :]
           + h[:, None, None, None] * h[None, :, None, None] * n[None, None, :, None] * n[None, None, None, :])
    inner = np.einsum("abcm,abcm,abcm,m->abc", b_int, d_m * d_m, occ, s2)
    total = np.einsum("labc,labc,abc,l->", k, inv_dl2, inner, s2)
    return -4.0 * 16.0 * g * g * u * u / (n_modes + 1) ** 2 * total
