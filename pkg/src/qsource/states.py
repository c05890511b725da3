"""Named source states wired to their Hamiltonians and overlap evaluators.

Each constructor returns a SourceModel bundling the pieces a study needs:
the Hamiltonian, the normalised source state (when a grid realisation
exists), and the overlap evaluator m(t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from . import grids
from .grids import (FiniteHermitian, FreeDispersion, GridSpec, Hamiltonian,
                    Multiplication, WaveFunction, grid_state,
                    inverse_fourier_transform)
from .overlap import (OverlapFunction, overlap_closed_lorentzian,
                      overlap_explicit_d3, overlap_from_hamiltonian,
                      overlap_gaussian_free, overlap_matrix)


@dataclass(frozen=True)
class SourceModel:
    name: str
    hamiltonian: Hamiltonian | None
    phi: WaveFunction | None
    overlap: OverlapFunction


def lorentzian_x(grid: GridSpec | None = None, use_grid_overlap: bool = False) -> SourceModel:
    """H = x (multiplication), phi(x) = 1/sqrt(pi (1+x^2)): m(t) = e^{-|t|}.

    The closed-form overlap is exact on the line; the grid realisation
    truncates the Cauchy tails, so its own overlap differs at O(1/L).
    """
    H = phi = None
    m = overlap_closed_lorentzian()
    if grid is not None:
        if grid.dimension != 1:
            raise ContractViolation("lorentzian_x is one-dimensional")
        x = grid.position_axis()
        H = Multiplication(grid, x)
        phi = grid_state(grid, lambda xx: 1.0 / np.sqrt(np.pi * (1.0 + xx ** 2)))
        if use_grid_overlap:
            m = overlap_from_hamiltonian(H, phi)
    return SourceModel("lorentzian_x", H, phi, m)


def gaussian_free_1d(grid: GridSpec | None = None, a: float = 1.0,
                     use_grid_overlap: bool = False) -> SourceModel:
    """Free dispersion omega(p) = a p^2 with the unit Gaussian source."""
    H = phi = None
    m = overlap_gaussian_free(1, a)
    if grid is not None:
        if grid.dimension != 1:
            raise ContractViolation("gaussian_free_1d is one-dimensional")
        H = FreeDispersion(grid, a)
        phi = grid_state(grid, lambda x: np.pi ** -0.25 * np.exp(-x ** 2 / 2.0))
        if use_grid_overlap:
            m = overlap_from_hamiltonian(H, phi)
    return SourceModel("gaussian_free_1d", H, phi, m)


def radial_d3_explicit(a: float = 1.0) -> SourceModel:
    """The d=3 source with exponential growth at every positive coupling."""
    return SourceModel("radial_d3_explicit", None, None, overlap_explicit_d3(a))


def radial_d3_gaussian(a: float = 1.0) -> SourceModel:
    """tau-finite d=3 Gaussian radial source: |m| ~ t^{-3/2}."""
    return SourceModel("radial_d3_gaussian", None, None, overlap_gaussian_free(3, a))


def matrix_model(eigenvalues, coefficients) -> SourceModel:
    """Finite Hermitian diag(eigenvalues) with phi = coefficients in that basis."""
    w = np.asarray(eigenvalues, dtype=float)
    c = np.asarray(coefficients, dtype=complex)
    H = FiniteHermitian(np.diag(w))
    phi = WaveFunction(None, c, grids.COEFF).normalized()
    m = overlap_matrix(w, phi.amplitudes)
    return SourceModel("matrix", H, phi, m)


def spread_matrix_model(n: int = 64, scale: float = 1.0) -> SourceModel:
    """n Chebyshev-node eigenvalues in [-scale, scale] with smooth weights.

    Deterministic pure-point model with well-spread spacings (no exact
    resonances), used for the sublinear and domain-bound studies.
    ||H phi|| <= scale by construction.
    """
    j = np.arange(n)
    omega = scale * np.cos(np.pi * (2 * j + 1) / (2 * n))
    c = np.exp(-((omega / scale) ** 2))
    c = c / np.linalg.norm(c)
    return matrix_model(omega, c)


def band_limited(grid: GridSpec, K: float = 1.0, a: float = 1.0,
                 power: int = 2) -> SourceModel:
    """phihat supported exactly on [-K, K]: phihat ~ (1 - (p/K)^2)^power there.

    Compact momentum support bounds the group speed by 2 a K and feeds the
    phase-space bound (2 pi)^{-d} |Omega| |K_set|.
    """
    if grid.dimension != 1:
        raise ContractViolation("band_limited is one-dimensional here")
    p = grid.momentum_axis()
    profile = np.where(np.abs(p) <= K, (1.0 - (p / K) ** 2) ** power, 0.0)
    phat = WaveFunction(grid, profile.astype(complex), grids.MOMENTUM).normalized()
    phi = inverse_fourier_transform(phat)
    H = FreeDispersion(grid, a)
    m = overlap_from_hamiltonian(H, phi)
    return SourceModel("band_limited", H, phi, m)


NAMED_SOURCES = {
    "lorentzian_x": lorentzian_x,
    "gaussian_free_1d": gaussian_free_1d,
    "radial_d3_explicit": radial_d3_explicit,
    "radial_d3_gaussian": radial_d3_gaussian,
    "matrix": matrix_model,
    "band_limited": band_limited,
}
