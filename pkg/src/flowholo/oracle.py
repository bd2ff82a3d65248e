"""
Exact entanglement of the free weak-link chain from its correlation matrix.

For a quadratic Hamiltonian the ground state is a Slater determinant and
the reduced state of a region is fixed by C_ij = <c_i^dag c_j> restricted
to that region.  Its eigenvalues nu_j give every Renyi entropy:

    S_alpha = sum_j log(nu_j^alpha + (1 - nu_j)^alpha) / (1 - alpha)
    S_min   = -sum_j log(max(nu_j, 1 - nu_j))

Spinful free chains are two identical copies; entropies are multiplied by
the spin degeneracy carried on the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedModelError
from .lattice import TIE_TOLERANCE, LatticeModel

#: eigenvalues within this distance of 0 or 1 are set to exactly 0 or 1
CLAMP_WINDOW = 1e-10


@dataclass(frozen=True)
class CorrelationMatrix:
    """C_ij = <c_i^dag c_j> of one spin species over the whole chain."""

    entries: np.ndarray
    n_particles: int
    spin_degeneracy: int = 1


@dataclass(frozen=True)
class EntanglementSpectrum:
    """Eigenvalues of C restricted to a region, clamped to [0, 1]."""

    mode_occupations: np.ndarray
    spin_degeneracy: int = 1


def hopping_matrix(model: LatticeModel) -> np.ndarray:
    """Single-particle Hamiltonian of the chain A(0..n_a-1) - g - B(n_a..)."""
    n = model.n_sites_a + model.n_sites_b
    h = np.zeros((n, n))
    idx = np.arange(n - 1)
    h[idx, idx + 1] = h[idx + 1, idx] = -1.0
    j = model.n_sites_a - 1
    h[j, j + 1] = h[j + 1, j] = -model.g
    return h


def ground_state_correlations(model: LatticeModel) -> CorrelationMatrix:
    """Fill every single-particle level at or below mu and return C."""
    if model.u != 0.0:
        raise UnsupportedModelError("the correlation-matrix oracle needs u = 0")
    levels, orbitals = np.linalg.eigh(hopping_matrix(model))
    occ = orbitals[:, levels <= model.mu + TIE_TOLERANCE]
    c = occ @ occ.T
    return CorrelationMatrix(entries=c, n_particles=occ.shape[1],
                             spin_degeneracy=model.spin_degeneracy)


def subsystem_spectrum(corr: CorrelationMatrix, region) -> EntanglementSpectrum:
    """Entanglement spectrum of the sites listed in ``region``."""
    region = np.asarray(region, dtype=int).ravel()
    n = corr.entries.shape[0]
    if region.size == 0:
        raise DomainError("region must contain at least one site")
    if region.min() < 0 or region.max() >= n:
        raise DomainError(f"region indices must lie in [0, {n})")
    nu = np.linalg.eigvalsh(corr.entries[np.ix_(region, region)])
    if nu.min() < -CLAMP_WINDOW or nu.max() > 1 + CLAMP_WINDOW:
        raise DomainError("correlation eigenvalues outside [0, 1]; matrix is not a projector")
    # eigensolver noise around pure modes is snapped so product states give exactly 0
    nu = np.where(nu < CLAMP_WINDOW, 0.0, np.where(nu > 1.0 - CLAMP_WINDOW, 1.0, nu))
    return EntanglementSpectrum(nu, corr.spin_degeneracy)


def renyi_entropy(spectrum: EntanglementSpectrum, alpha: float) -> float:
    """Renyi entropy of order alpha (nats); alpha = 1 is excluded."""
    if not alpha > 0:
        raise DomainError("Renyi order must be positive")
    if alpha == 1:
        raise DomainError("alpha = 1 (von Neumann) is not supported")
    nu = spectrum.mode_occupations
    with np.errstate(divide="ignore"):
        terms = np.logaddexp(alpha * np.log(nu), alpha * np.log1p(-nu))
    return spectrum.spin_degeneracy * float(np.sum(terms)) / (1.0 - alpha)


def min_entropy(spectrum: EntanglementSpectrum) -> float:
    """S_min = -log of the largest reduced-density-matrix eigenvalue."""
    nu = spectrum.mode_occupations
    return -spectrum.spin_degeneracy * float(np.sum(np.log(np.maximum(nu, 1.0 - nu))))


def weak_link_min_entropy(model: LatticeModel) -> float:
    """Min-entropy of subsystem A for the ground state of ``model``."""
    corr = ground_state_correlations(model)
    return min_entropy(subsystem_spectrum(corr, np.arange(model.n_sites_a)))
