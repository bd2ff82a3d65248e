"""
Disentangling flow for the quadratic sector of the weak-link chain.

The generator that removes the junction bond at flow time B is

    eta(B) = sum_{l,m} eta_lm(B) (a_l^dag b_m - b_m^dag a_l)
    eta_lm(B) = (2g/(N+1)) sin l sin m (eps_l - eps_m) exp(-B (eps_l - eps_m)^2)

and the min-entropy to leading order in g is

    S_min(l) = -4 int_{(1/Lambda)^2}^{(l/Lambda)^2} B <eta^2(B)> dB,

with <eta^2> = -sum_{l,m} eta_lm^2 [n_l(1-n_m) + (1-n_l) n_m] per spin.
The flow integral is done in t = log B so that both ends of the range,
which differ by several decades, are resolved on one grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, FitError
from .lattice import LatticeModel, ModeGrid, dispersion, mode_grid
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate_1d

FIT_MODELS = ("log_l", "inverse_l", "power_law")


@dataclass(frozen=True)
class EtaCoefficients:
    amplitudes: np.ndarray
    flow_time: float
    residue_scale: float = 1.0


@dataclass(frozen=True)
class EntropyScan:
    """Entropy (nats) against subsystem length, with run metadata."""

    lengths: np.ndarray
    entropies: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.lengths) != len(self.entropies):
            raise ConfigurationError("lengths and entropies differ in size")
        if np.any(np.diff(self.lengths) <= 0):
            raise ConfigurationError("lengths must be strictly increasing")


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual_rms: float
    model: str


def _check_grid(grid: ModeGrid):
    if not isinstance(grid, ModeGrid):
        raise ConfigurationError("expected a ModeGrid")
    if not np.array_equal(dispersion(grid.momenta), grid.energies):
        raise ConfigurationError("grid energies do not follow eps = -2 cos k")


def eta_coefficients(model: LatticeModel, grid_a: ModeGrid, grid_b: ModeGrid, b: float,
                     residue_scale: float = 1.0) -> EtaCoefficients:
    """Generator amplitudes eta_lm(B) on the A x B mode grids."""
    if b < 0:
        raise DomainError("flow time must be non-negative")
    _check_grid(grid_a)
    _check_grid(grid_b)
    if grid_a.mu != grid_b.mu:
        raise ConfigurationError("grids were filled with different chemical potentials")
    diff = grid_a.energies[:, None] - grid_b.energies[None, :]
    # sqrt(2/(N+1)) sin k on both sides gives 2/(N+1) sin l sin m for equal grids
    amp = model.g * residue_scale * np.outer(grid_a.boundary_amplitudes, grid_b.boundary_amplitudes)
    amp = amp * diff * np.exp(-b * diff * diff)
    return EtaCoefficients(amplitudes=amp, flow_time=float(b), residue_scale=residue_scale)


def eta_squared_expectation(eta: EtaCoefficients, occ_a, occ_b, spinful: bool = False) -> float:
    """<psi| eta^2 |psi> in the decoupled Fermi sea (always <= 0)."""
    na = np.asarray(occ_a, dtype=float)
    nb = np.asarray(occ_b, dtype=float)
    if eta.amplitudes.shape != (na.size, nb.size):
        raise ConfigurationError("occupations do not match the generator grids")
    blocked = np.outer(na, 1.0 - nb) + np.outer(1.0 - na, nb)
    spin = 2.0 if spinful else 1.0
    return -spin * float(np.sum(eta.amplitudes ** 2 * blocked))


class _PairKernel:
    """<eta^2(B)> as a sum over the unblocked (l, m) pairs only."""

    def __init__(self, grid_a: ModeGrid, grid_b: ModeGrid, g: float, spin: float,
                 residue_scale: float = 1.0):
        na = grid_a.occupations.astype(bool)
        nb = grid_b.occupations.astype(bool)
        wa = 2.0 / math.sqrt((grid_a.n_modes + 1) * (grid_b.n_modes + 1))
        sa, sb = np.sin(grid_a.momenta), np.sin(grid_b.momenta)
        weights, gaps = [], []
        for rows, cols in ((na, ~nb), (~na, nb)):
            d = grid_a.energies[rows][:, None] - grid_b.energies[cols][None, :]
            s = np.outer(sa[rows] ** 2, sb[cols] ** 2)
            weights.append((s * d * d).ravel())
            gaps.append((d * d).ravel())
        self.weight = np.concatenate(weights) * (wa * g * residue_scale) ** 2 * spin
        self.two_gap2 = 2.0 * np.concatenate(gaps)

    def __call__(self, b: float) -> float:
        return -float(np.dot(self.weight, np.exp(-b * self.two_gap2)))


def default_grid_size(l_max: float) -> int:
    return max(8 * int(math.ceil(l_max)), 512)


def min_entropy_flow(model: LatticeModel, cutoff: float, l: float,
                     cfg: QuadratureConfig | None = None,
                     grid_size: int | None = None, residue_scale: float = 1.0) -> float:
    """Min-entropy of a region of length ``l`` from the disentangling flow.

    Both subsystems use ``grid_size`` modes (default max(8 l, 512)).
    """
    return _entropy_from_kernel(_kernel_for(model, grid_size or default_grid_size(l),
                                            residue_scale), cutoff, l, cfg)


def _kernel_for(model: LatticeModel, n_modes: int, residue_scale: float = 1.0,
                mu: float | None = None) -> _PairKernel:
    mu = model.mu if mu is None else mu
    grid = mode_grid(n_modes, mu)
    return _PairKernel(grid, grid, model.g, float(model.spin_degeneracy), residue_scale)


def _entropy_from_kernel(kernel: _PairKernel, cutoff: float, l: float,
                         cfg: QuadratureConfig | None) -> float:
    return float(_entropies_from_kernel(kernel, cutoff, np.array([float(l)]), cfg)[0])


def _entropies_from_kernel(kernel: _PairKernel, cutoff: float, lengths: np.ndarray,
                           cfg: QuadratureConfig | None) -> np.ndarray:
    """S(l) for sorted ``lengths`` by integrating consecutive B-windows once each."""
    if not cutoff > 0:
        raise DomainError("UV cutoff must be positive")
    if np.any(lengths <= 1):
        raise DomainError("subsystem length must exceed 1")
    if kernel.weight.size == 0 or not np.any(kernel.weight):
        return np.zeros(lengths.size)

    def integrand(t):
        b = math.exp(t)
        return b * b * kernel(b)

    edges = np.concatenate([[-2.0 * math.log(cutoff)], 2.0 * np.log(lengths / cutoff)])
    pieces = [integrate_1d(integrand, lo, hi, cfg or DEFAULT_CONFIG)[0]
              for lo, hi in zip(edges[:-1], edges[1:])]
    return -4.0 * np.cumsum(pieces)


def entropy_scan(model: LatticeModel, cutoff: float, lengths: Sequence[float],
                 cfg: QuadratureConfig | None = None, grid_size: int | None = None,
                 residue_scale: float = 1.0) -> EntropyScan:
    """S_min(l) for each length on one shared grid of size max(8 l_max, 512).

    The B-range is cut at every requested l and integrated piecewise, so
    the cost is that of the largest l alone.
    """
    lengths = np.asarray(sorted(lengths), dtype=float)
    n = grid_size or default_grid_size(lengths.max())
    kernel = _kernel_for(model, n, residue_scale)
    s = _entropies_from_kernel(kernel, cutoff, lengths, cfg)
    meta = dict(g=model.g, mu=model.mu, cutoff=cutoff, grid_size=n,
                spin_degeneracy=model.spin_degeneracy)
    return EntropyScan(lengths, s, meta)


def min_entropy_2d(model: LatticeModel, n_y: int, cutoff: float, l: float,
                   cfg: QuadratureConfig | None = None, grid_size: int | None = None) -> float:
    """Square-lattice strip as n_y decoupled chains.

    Transverse channel k_y = pi j/(n_y+1) sees mu_eff = mu + 2 cos k_y;
    channels with |mu_eff| >= 2 are empty or full and contribute nothing.
    """
    return float(min_entropy_2d_scan(model, n_y, cutoff, [l], cfg, grid_size).entropies[0])


def min_entropy_2d_scan(model: LatticeModel, n_y: int, cutoff: float, lengths: Sequence[float],
                        cfg: QuadratureConfig | None = None,
                        grid_size: int | None = None) -> EntropyScan:
    """Channel-summed S(l) over a sweep of lengths, one kernel per channel."""
    if int(n_y) != n_y or n_y < 1:
        raise DomainError("n_y must be a positive integer")
    lengths = np.asarray(sorted(lengths), dtype=float)
    n = grid_size or default_grid_size(lengths.max())
    total = np.zeros(lengths.size)
    for mu_eff in channel_potentials(model.mu, n_y):
        if abs(mu_eff) >= 2.0:
            continue
        total += _entropies_from_kernel(_kernel_for(model, n, mu=mu_eff), cutoff, lengths, cfg)
    meta = dict(g=model.g, mu=model.mu, n_y=int(n_y), cutoff=cutoff, grid_size=n,
                spin_degeneracy=model.spin_degeneracy)
    return EntropyScan(lengths, total, meta)


def channel_potentials(mu: float, n_y: int) -> np.ndarray:
    ky = np.pi * np.arange(1, n_y + 1) / (n_y + 1)
    return mu + 2.0 * np.cos(ky)


def kappa_1d(g: float, mu: float, spin_degeneracy: int = 1) -> float:
    """Continuum log-slope of the flow result, per the pair-sum asymptotics.

    Near mu the kernel approaches -g^2 (4 - mu^2)/(16 pi^2 B^2) per spin, so
    S = spin * g^2 (4 - mu^2)/(2 pi^2) ln l.
    """
    return spin_degeneracy * g * g * (4.0 - mu * mu) / (2.0 * math.pi ** 2)


def kappa_closed_form(g: float, mu: float) -> float:
    """kappa(g) = g^2 (4/pi^2)(1 - mu^2/4), the quoted 1D prefactor."""
    return g * g * 4.0 / math.pi ** 2 * (1.0 - mu * mu / 4.0)


def slope_2d_closed_form(g: float, mu: float, n_y: int) -> float:
    """Quoted 2D log-slope g^2 N_y/(2 pi^3)[(2-mu^2) asin(mu/2-1) + sqrt(mu-mu^2/4)(6mu-4)]."""
    return g * g * n_y / (2 * math.pi ** 3) * (
        (2 - mu * mu) * math.asin(mu / 2 - 1) + math.sqrt(mu - mu * mu / 4) * (6 * mu - 4))


def slope_2d_channel_integral(g: float, mu: float, n_y: int, spin_degeneracy: int = 1) -> float:
    """Continuum limit of the channel sum of ``kappa_1d`` for 0 <= mu <= 4.

    (n_y/pi) int dk_y kappa_1d(mu + 2 cos k_y) evaluates to
    g^2 n_y/(2 pi^3) [(2 - mu^2)(pi/2 - asin(mu/2 - 1)) + sqrt(mu - mu^2/4)(3 mu + 2)].
    """
    if not 0.0 <= mu <= 4.0:
        raise DomainError("closed form derived for 0 <= mu <= 4")
    bracket = ((2 - mu * mu) * (math.pi / 2 - math.asin(mu / 2 - 1))
               + math.sqrt(mu - mu * mu / 4) * (3 * mu + 2))
    return spin_degeneracy * g * g * n_y / (2 * math.pi ** 3) * bracket


def fit_scaling(scan: EntropyScan, model: str = "log_l") -> FitResult:
    """Least-squares fit of S(l).

    ``log_l``:     S = slope ln l + intercept
    ``inverse_l``: S = slope / l + intercept
    ``power_law``: |S| = exp(intercept) l^slope, fitted in log space
                   (residual_rms is then in log units)
    """
    if model not in FIT_MODELS:
        raise FitError(f"unknown fit model {model!r}")
    l = np.asarray(scan.lengths, dtype=float)
    s = np.asarray(scan.entropies, dtype=float)
    if l.size < 4:
        raise FitError("at least 4 points are needed for a fit")
    if model == "log_l":
        x, y = np.log(l), s
    elif model == "inverse_l":
        x, y = 1.0 / l, s
    else:
        if np.any(s == 0):
            raise FitError("power-law fit needs non-zero values")
        x, y = np.log(l), np.log(np.abs(s))
    design = np.column_stack([x, np.ones_like(x)])
    if np.linalg.matrix_rank(design) < 2:
        raise FitError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return FitResult(slope=float(coef[0]), intercept=float(coef[1]),
                     residual_rms=float(np.sqrt(np.mean(resid ** 2))), model=model)
