"""Closed-form overlap and local-density-of-states laws.

The master kernel for the rescaled mean squared overlap between a perturbed
eigenvector at location lambda and an initial eigenvector at location a is

    N E[<psi|phi>^2] -> t / ((a - lambda - t H)^2 + t^2 pi^2 rho^2),

with rho, H the boundary density / Hilbert transform of the time-t spectrum
at lambda. Specializations: the GOE closed form, the small-t Cauchy flight
and the two perturbative formulas, plus the second-order eigenvalue /
first-order eigenvector expansion coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DegenerateGapError, DomainError, OutsideSupportError
from .matrices import ensure_symmetric
from .profiles import SemicircleQuantileProfile
from .stieltjes import (DensityLine, density_and_hilbert, semicircle_density_line,
                        solve_grid, support_bounds)


def overlap_full(t: float, lambda_i: float, a_j, density: DensityLine):
    """Master overlap kernel, valid for any t given boundary data at
    lambda_i."""
    if density.rho <= 0 or not density.inside_support:
        raise OutsideSupportError(f"lambda={lambda_i} outside the time-t support")
    a = np.asarray(a_j, dtype=float)
    val = t / ((a - lambda_i - t * density.hilbert) ** 2
               + (t * math.pi * density.rho) ** 2)
    return float(val) if a.ndim == 0 else val


def overlap_goe(t: float, lambda_i: float, a_j):
    """GOE specialization: t / ((a-l)^2 + t/(1+t) l (a-l) + t^2/(1+t)).

    Algebraically identical to overlap_full fed with the semicircle closed
    forms (complete the square in the denominator).
    """
    edge = 2.0 * math.sqrt(1.0 + t)
    if abs(lambda_i) > edge:
        raise OutsideSupportError(f"lambda={lambda_i} outside [-{edge}, {edge}]")
    a = np.asarray(a_j, dtype=float)
    d = a - lambda_i
    denom = d * d + (t / (1.0 + t)) * lambda_i * d + t * t / (1.0 + t)
    if np.any(denom <= 0):
        raise ArithmeticError("nonpositive overlap denominator inside the support")
    val = t / denom
    return float(val) if a.ndim == 0 else val


def overlap_cauchy(t: float, lambda_i: float, a_j):
    """Small-t Cauchy-flight kernel: a Lorentzian of half width t."""
    if t <= 0:
        raise DomainError("t must be positive")
    a = np.asarray(a_j, dtype=float)
    d = a - lambda_i
    val = t / (d * d + t * t)
    return float(val) if a.ndim == 0 else val


def ldos(profile, t: float, lambda_i: float, alpha, density: DensityLine):
    """Mean local density of states of the perturbed vector in the initial
    eigenvalue space: induced density times the overlap kernel."""
    rho0 = profile.induced_density(alpha)
    return rho0 * overlap_full(t, lambda_i, alpha, density)


def perturbative_offdiag(t: float, n: int, a_i: float, a_j: float) -> float:
    """E[<psi_i|phi_j>^2] = (t/N) / (a_i - a_j)^2 for macroscopic gaps,
    t << 1."""
    if a_i == a_j:
        raise DegenerateGapError("coinciding eigenvalues")
    return (t / n) / (a_i - a_j) ** 2


def perturbative_diag(t: float, n: int, i: int, spectrum) -> float:
    """E[<psi_i|phi_i>^2] = 1 - (t/N) sum_{j != i} 1/(a_i - a_j)^2.

    `i` is a 0-based index into `spectrum`.
    """
    a = np.asarray(spectrum, dtype=float)
    gaps = np.delete(a - a[i], i)
    if np.any(gaps == 0):
        raise DegenerateGapError("duplicate eigenvalues in spectrum")
    return 1.0 - (t / n) * float(np.sum(1.0 / gaps ** 2))


@dataclass
class PerturbationExpansion:
    """Coefficients of lambda_i^t = a_i + sqrt(t) alpha + t beta + o(t) and
    |psi_i^t> = (1 - gamma_i t)|phi_i> + sqrt(t) sum_j gamma[j] |phi_j>."""

    index: int
    alpha_i: float
    beta_i: float
    gamma: np.ndarray  # gamma[j] for j != index, 0 at the index itself
    gamma_i: float

    def eigenvalue_at(self, t: float, a_i: float) -> float:
        return a_i + math.sqrt(t) * self.alpha_i + t * self.beta_i


def perturbation_expansion(spectrum, h1, i: int) -> PerturbationExpansion:
    """First/second order coefficients for eigenpair i (0-based) of
    diag(spectrum) + sqrt(t) h1."""
    a = np.asarray(spectrum, dtype=float)
    h1 = ensure_symmetric(h1)
    if len(a) != h1.shape[0]:
        raise DomainError("spectrum and matrix dimensions differ")
    gaps = a[i] - a
    gaps[i] = np.inf  # excluded from all sums
    if np.any(gaps == 0):
        raise DegenerateGapError("duplicate eigenvalues in spectrum")
    col = h1[:, i]
    gamma = col / gaps
    gamma[i] = 0.0
    beta = float(np.sum(col ** 2 / gaps))
    gamma_i = 0.5 * float(np.sum(gamma ** 2))
    return PerturbationExpansion(index=i, alpha_i=float(h1[i, i]), beta_i=beta,
                                 gamma=gamma, gamma_i=gamma_i)


# ---------------------------------------------------------------------------
# index -> spectral location


def perturbed_quantile(profile, t: float, x: float) -> float:
    """Location of the x-quantile of the time-t spectrum (the N -> infinity
    bridge from eigenvalue index i to lambda_i^t via x = i/N)."""
    if not 0.0 < x < 1.0:
        raise DomainError("quantile x must be in (0,1)")
    if t == 0:
        return float(profile.eval(x))
    if isinstance(profile, SemicircleQuantileProfile) and profile.radius == 2.0:
        # time-t spectrum is again a semicircle, radius scaled by sqrt(1+t)
        return math.sqrt(1.0 + t) * float(profile.eval(x))
    lo, hi = support_bounds(profile, t)
    grid = np.linspace(lo, hi, 257)
    sol = solve_grid(profile, t, grid)
    cdf = np.concatenate([[0.0], np.cumsum((sol.rho[1:] + sol.rho[:-1]) / 2.0
                                           * np.diff(grid))])
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    inv = PchipInterpolator(cdf[keep], grid[keep])
    return float(inv(x))


def density_line_at(profile, t: float, lam: float, closed_form: bool = True) -> DensityLine:
    """Boundary data at lam: GOE closed form when available, otherwise the
    fixed-point solver."""
    if closed_form and isinstance(profile, SemicircleQuantileProfile) and profile.radius == 2.0:
        return semicircle_density_line(t, lam)
    return density_and_hilbert(profile, t, lam)
