"""
Bipartite weak-link chain: model parameters, open-boundary mode grids,
tight-binding dispersion, zero-temperature occupations and density of states.

All energies are in units of the hopping amplitude t = 1.  Open chains of
``N`` sites are diagonalised by standing waves

    phi_n(j) = sqrt(2/(N+1)) sin(k_n j),   k_n = pi n / (N+1),  n = 1..N

so the amplitude of a mode on the boundary site is sqrt(2/(N+1)) sin k_n.
The band is eps_k = -2 cos k.  (Some texts write +2 cos k; only the mode
labelling changes, the band and every |eps - eps'| are identical.)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BandEdgeError, DomainError

#: energies closer than this to mu count as a tie and are occupied
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LatticeModel:
    """Two open chains A and B joined by a single weak bond.

    Parameters
    ----------
    n_sites_a, n_sites_b : int
        Number of sites in subsystems A and B.
    g : float
        Weak-link hopping in [0, 1]; g = 1 is the homogeneous chain.
    u : float
        On-site Hubbard interaction (only meaningful when ``spinful``).
    mu : float
        Chemical potential inside the band [-2, 2].
    spinful : bool
        Two spin species when True.
    """

    n_sites_a: int
    n_sites_b: int
    g: float = 1.0
    u: float = 0.0
    mu: float = 0.0
    spinful: bool = False

    def __post_init__(self):
        if int(self.n_sites_a) != self.n_sites_a or self.n_sites_a < 1:
            raise DomainError(f"n_sites_a must be a positive integer, got {self.n_sites_a!r}")
        if int(self.n_sites_b) != self.n_sites_b or self.n_sites_b < 1:
            raise DomainError(f"n_sites_b must be a positive integer, got {self.n_sites_b!r}")
        if not 0.0 <= self.g <= 1.0:
            raise DomainError(f"weak link g must lie in [0, 1], got {self.g!r}")
        if not -2.0 <= self.mu <= 2.0:
            raise DomainError(f"chemical potential must lie in [-2, 2], got {self.mu!r}")
        if not np.isfinite(self.u):
            raise DomainError("interaction u must be finite")

    @property
    def spin_degeneracy(self) -> int:
        return 2 if self.spinful else 1


@dataclass(frozen=True)
class ModeGrid:
    """Standing-wave modes of one open chain.

    ``momenta``, ``energies`` and ``occupations`` are read-only arrays of
    equal length; ``mu`` is the chemical potential used for the filling.
    """

    momenta: np.ndarray
    energies: np.ndarray
    occupations: np.ndarray
    mu: float = field(default=0.0)

    def __post_init__(self):
        for arr in (self.momenta, self.energies, self.occupations):
            arr.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return len(self.momenta)

    @property
    def boundary_amplitudes(self) -> np.ndarray:
        """sqrt(2/(N+1)) sin k: weight of each mode on the end site."""
        return np.sqrt(2.0 / (self.n_modes + 1)) * np.sin(self.momenta)

    def fermi_index(self) -> int:
        """Index of the mode whose energy is closest to mu."""
        return int(np.argmin(np.abs(self.energies - self.mu)))


def momentum_grid(n_sites: int) -> np.ndarray:
    """Open-chain momenta k_n = pi n/(N+1), n = 1..N."""
    if int(n_sites) != n_sites or n_sites < 1:
        raise DomainError(f"n_sites must be a positive integer, got {n_sites!r}")
    n_sites = int(n_sites)
    return np.pi * np.arange(1, n_sites + 1) / (n_sites + 1)


def dispersion(k):
    """Tight-binding band eps(k) = -2 cos k."""
    return -2.0 * np.cos(k)


def occupation(energy, mu):
    """Zero-temperature occupation; a level exactly at mu is filled."""
    return (np.asarray(energy) <= mu + TIE_TOLERANCE).astype(np.int8)


def density_of_states(energy):
    """rho(eps) = 1/sqrt(4 - eps^2) for |eps| < 2."""
    e = np.asarray(energy, dtype=float)
    if np.any(np.abs(e) >= 2.0):
        raise BandEdgeError("density of states diverges at the band edge |eps| >= 2")
    out = 1.0 / np.sqrt(4.0 - e * e)
    return float(out) if out.ndim == 0 else out


def mode_grid(n_sites: int, mu: float = 0.0) -> ModeGrid:
    """Momenta, energies and ground-state occupations of an N-site chain."""
    k = momentum_grid(n_sites)
    eps = dispersion(k)
    return ModeGrid(momenta=k, energies=eps, occupations=occupation(eps, mu), mu=float(mu))
