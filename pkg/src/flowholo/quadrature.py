"""
One-dimensional integration helpers.

``integrate_1d`` wraps QUADPACK's adaptive Gauss-Kronrod routine (through
``scipy.integrate.quad``) behind a small config object and maps
semi-infinite ranges onto [0, 1) explicitly, so the same code path handles
finite and infinite limits.  ``gauss_legendre_panels`` is a fixed,
vectorised rule used for smooth inner integrals of nested quadratures.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError

SEMI_INFINITE_MAPS = ("exp_decay", "rational")


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and budget for adaptive quadrature.

    ``semi_infinite_map`` selects how [a, inf) is compressed onto [0, 1):
    ``rational`` uses x = a + t/(1-t), ``exp_decay`` uses x = a - log(1-t),
    which suits integrands with Gaussian or erfc tails.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    semi_infinite_map: str = "exp_decay"

    def __post_init__(self):
        if not self.rel_tol > 0 or not self.abs_tol > 0:
            raise DomainError("quadrature tolerances must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer")
        if self.semi_infinite_map not in SEMI_INFINITE_MAPS:
            raise DomainError(f"unknown semi_infinite_map {self.semi_infinite_map!r}")

    def tightened(self, factor: float = 10.0) -> "QuadratureConfig":
        """Copy with both tolerances divided by ``factor``."""
        return QuadratureConfig(self.rel_tol / factor, self.abs_tol / factor,
                                self.max_subdivisions * 2, self.semi_infinite_map)


DEFAULT_CONFIG = QuadratureConfig()


def _map_upper(f, a, kind):
    if kind == "rational":
        def g(t):
            if t >= 1.0:
                return 0.0
            s = 1.0 - t
            return f(a + t / s) / (s * s)
    else:
        def g(t):
            if t >= 1.0:
                return 0.0
            s = 1.0 - t
            return f(a - math.log(s)) / s
    return g


def _quad(f, a, b, cfg, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                             limit=int(cfg.max_subdivisions), points=points, full_output=1)
    value, err = float(out[0]), float(out[1])
    if len(out) == 4:
        target = max(cfg.abs_tol, cfg.rel_tol * abs(value))
        if not (np.isfinite(value) and err <= target):
            raise ConvergenceError(f"quadrature on [{a}, {b}] did not converge: {out[3]}",
                                   partial=value, error_estimate=err)
    return value, err


def integrate_1d(f: Callable[[float], float], a: float, b: float,
                 cfg: QuadratureConfig | None = None,
                 points: Sequence[float] | None = None) -> tuple[float, float]:
    """Integrate ``f`` over [a, b]; either limit may be infinite.

    Returns
    -------
    (value, error_estimate)

    Raises
    ------
    ConvergenceError
        If the subdivision budget is exhausted before the tolerance is met;
        the exception carries the partial value.
    """
    cfg = cfg or DEFAULT_CONFIG
    if not a < b:
        raise DomainError(f"integration limits must satisfy a < b, got [{a}, {b}]")
    if math.isinf(a) and math.isinf(b):
        v1, e1 = integrate_1d(f, a, 0.0, cfg)
        v2, e2 = integrate_1d(f, 0.0, b, cfg)
        return v1 + v2, e1 + e2
    if math.isinf(a):
        return integrate_1d(lambda x: f(-x), -b, math.inf, cfg)
    if math.isinf(b):
        return _quad(_map_upper(f, a, cfg.semi_infinite_map), 0.0, 1.0, cfg)
    if points is not None:
        points = [p for p in points if a < p < b] or None
    return _quad(f, a, b, cfg, points=points)


def erfc(x):
    """Complementary error function (Cephes implementation via scipy)."""
    out = special.erfc(x)
    return float(out) if np.ndim(out) == 0 else out


def probe_pole_divergence(f: Callable[[float], float], pole: float, windows: Sequence[float],
                          cfg: QuadratureConfig | None = None,
                          a: float = -1.0, b: float = 1.0) -> list[tuple[float, float]]:
    """Integrate ``f`` over [a, b] minus (pole - d, pole + d) for each d.

    The caller fits the growth law of the returned values in d; a
    second-order pole gives values ~ 1/d.
    """
    windows = [float(d) for d in windows]
    if not windows or any(d <= 0 for d in windows):
        raise DomainError("exclusion windows must be positive")
    if any(w2 >= w1 for w1, w2 in zip(windows, windows[1:])):
        raise DomainError("exclusion windows must be strictly decreasing")
    out = []
    for d in windows:
        total = 0.0
        try:
            # geometric panels away from the pole keep QUADPACK's endpoint
            # extrapolation from mistaking the excluded pole for an endpoint one
            for lo, hi in _pole_panels(pole, d, a, b):
                total += integrate_1d(f, lo, hi, cfg)[0]
        except ConvergenceError as exc:
            raise ConvergenceError(f"pole probe failed for window {d:g}: {exc}",
                                   exc.partial, exc.error_estimate) from exc
        out.append((d, total))
    return out


def _pole_panels(pole, d, a, b):
    panels = []
    for sign, end in ((-1.0, a), (1.0, b)):
        reach = abs(end - pole)
        if d >= reach:
            continue
        edges = [d]
        while edges[-1] * 10.0 < min(reach, 1.0):
            edges.append(edges[-1] * 10.0)
        edges.append(reach)
        pts = [pole + sign * e for e in edges]
        panels += [(min(x, y), max(x, y)) for x, y in zip(pts[:-1], pts[1:]) if x != y]
    return panels


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre_panels(breaks: Sequence[float], order: int = 24,
                          max_width: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule.

    Each interval between consecutive ``breaks`` is cut into equal panels no
    wider than ``max_width``; empty intervals are skipped.
    """
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    x0, w0 = _GL_CACHE[order]
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        n_panels = max(1, int(math.ceil((hi - lo) / max_width)))
        edges = np.linspace(lo, hi, n_panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes.append((mid[:, None] + half[:, None] * x0[None, :]).ravel())
        weights.append((half[:, None] * w0[None, :]).ravel())
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(weights)
