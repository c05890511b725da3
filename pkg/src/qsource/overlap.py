"""Free-evolution overlap m(t) = <phi, e^{-iHt} phi> and the transport constant tau.

m carries everything the scalar dynamics needs: the Volterra kernel, the
Laplace-side characteristic function, and the integrability constant
tau = integral_0^inf |m(t)| dt that separates linear from exponential
boson production.

Evaluator provenances
---------------------
closed_lorentzian    m(t) = e^{-|t|}            (multiplication H = x, Cauchy state)
gaussian_free        m(t) = (1 + i a t)^(-d/2)  (free dispersion, Gaussian state)
radial_quadrature    oscillatory panel quadrature over a radial momentum profile
matrix_spectral      m(t) = sum |c_n|^2 e^{-i w_n t}
grid_numeric         spectral weights read off a grid Hamiltonian

All evaluators accept scalar or ndarray t; negative times go through
m(-t) = conj(m(t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ContractViolation, QuadratureError, TauStatus
from . import grids
from .grids import (FiniteHermitian, FreeDispersion, GridSpec, Hamiltonian,
                    Multiplication, WaveFunction, fourier_transform)

_ABS_TOL = 1e-9  # slack on the |m| <= 1 Cauchy-Schwarz bound


def _sphere_area(d: int) -> float:
    """Area of the unit sphere S^{d-1}."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class RadialProfile:
    """Radial momentum density r -> |phihat(r)|^2 in dimension d.

    Normalisation: integral_0^inf S_{d-1} r^{d-1} |phihat(r)|^2 dr = 1.
    `weight_fn`, when given, is the scalar weight q(r) = S_{d-1} r^{d-1}
    |phihat(r)|^2 as an analytic expression; it must accept complex r (the
    resolvent quadrature continues q off the real axis).
    """

    dimension: int
    density: Callable[[np.ndarray], np.ndarray]
    rmax: float = 100.0
    label: str = "radial"
    weight_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def weight(self, r: np.ndarray) -> np.ndarray:
        """q(r) = S_{d-1} r^{d-1} |phihat(r)|^2, the scalar spectral weight."""
        if self.weight_fn is not None:
            return self.weight_fn(np.asarray(r))
        r = np.asarray(r, dtype=float)
        return _sphere_area(self.dimension) * r ** (self.dimension - 1) * self.density(r)

    def check_normalization(self, tol: float = 1e-8) -> float:
        val = _gl_integral(self.weight, 0.0, self.rmax, panels=400, nodes=12)
        if abs(val - 1.0) > tol:
            raise ContractViolation(
                f"radial profile {self.label!r} normalises to {val!r}, not 1")
        return val


@dataclass(frozen=True)
class OverlapFunction:
    """Evaluator for m(t) plus the spectral data needed downstream."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    provenance: str
    label: str = ""
    # discrete spectral measure (energies, weights), when available
    energies: np.ndarray | None = None
    weights: np.ndarray | None = None
    # radial measure, when available
    profile: RadialProfile | None = None
    dispersion_coefficient: float = 1.0
    # closed-form Laplace transform of m, when available
    laplace_closed: Callable[[complex], complex] | None = None
    _tau_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, t) -> np.ndarray | complex:
        scalar = np.isscalar(t)
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(tt.shape, dtype=complex)
        pos = tt >= 0
        if pos.any():
            out[pos] = self.evaluator(tt[pos])
        if (~pos).any():
            out[~pos] = np.conj(self.evaluator(-tt[~pos]))
        bad = np.abs(out) > 1.0 + _ABS_TOL
        if bad.any():
            raise ContractViolation(
                f"|m(t)| exceeded 1 at t={tt[bad][0]!r}: {out[bad][0]!r}")
        return complex(out[0]) if scalar else out


def _gl_nodes(a_edges: np.ndarray, nodes: int):
    x, w = leggauss(nodes)
    mid = 0.5 * (a_edges[1:] + a_edges[:-1])
    half = 0.5 * (a_edges[1:] - a_edges[:-1])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def _gl_integral(fn, a: float, b: float, panels: int, nodes: int = 10) -> float:
    pts, wts = _gl_nodes(np.linspace(a, b, panels + 1), nodes)
    return float(np.sum(fn(pts) * wts))


# ---------------------------------------------------------------------------
# closed forms


def overlap_closed_lorentzian() -> OverlapFunction:
    """m(t) = e^{-|t|}: multiplication operator H = x with a Cauchy profile."""
    return OverlapFunction(
        evaluator=lambda t: np.exp(-np.asarray(t, dtype=float)) + 0j,
        provenance="closed_lorentzian",
        label="lorentzian_x",
        laplace_closed=lambda alpha: 1.0 / (alpha + 1.0),
    )


def gaussian_profile(dimension: int) -> RadialProfile:
    """Radial profile of the unit Gaussian |phihat(r)|^2 = pi^{-d/2} e^{-r^2}."""
    d = dimension
    area = _sphere_area(d)

    def density(r):
        return np.pi ** (-d / 2.0) * np.exp(-np.asarray(r, dtype=float) ** 2)

    def weight_fn(r):
        r = np.asarray(r)
        return area * np.pi ** (-d / 2.0) * r ** (d - 1) * np.exp(-r ** 2)

    return RadialProfile(dimension=d, density=density, rmax=14.0,
                         label=f"gaussian_d{d}", weight_fn=weight_fn)


def overlap_gaussian_free(dimension: int = 1, a: float = 1.0) -> OverlapFunction:
    """m(t) = (1 + i a t)^{-d/2} for the unit Gaussian under omega(p) = a p^2."""
    d = dimension

    def ev(t):
        return (1.0 + 1j * a * np.asarray(t, dtype=float)) ** (-d / 2.0)

    return OverlapFunction(evaluator=ev, provenance="gaussian_free",
                           label=f"gaussian_free_{d}d", dispersion_coefficient=a,
                           profile=gaussian_profile(d))


# ---------------------------------------------------------------------------
# radial quadrature path


def _radial_m_single(profile: RadialProfile, a: float, t: float,
                     density_scale: float = 1.0) -> complex:
    """Oscillatory quadrature of m(t) = int_0^inf q(r) e^{-i a r^2 t} dr.

    Panels are sized so each sees at most a quarter oscillation of the
    phase a r^2 t; the radial cut r <= rmax is amplitude-limited.
    """
    rmax = profile.rmax
    edges = [0.0]
    r = 0.0
    base = rmax / (400.0 * density_scale)
    while r < rmax:
        width = base
        if t > 0:
            width = min(width, np.pi / (4.0 * a * max(r, 0.25) * t) / density_scale)
        r = min(r + max(width, 1e-6), rmax)
        edges.append(r)
    pts, wts = _gl_nodes(np.asarray(edges), 10)
    q = profile.weight(pts)
    return complex(np.sum(q * np.exp(-1j * a * pts ** 2 * t) * wts))


def overlap_radial(profile: RadialProfile, a: float = 1.0,
                   tol: float = 1e-8) -> OverlapFunction:
    """Generic radial path with per-call panel-refinement error control."""
    profile.check_normalization()

    def ev(t):
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(tt.shape, dtype=complex)
        for i, ti in enumerate(tt):
            coarse = _radial_m_single(profile, a, ti)
            fine = _radial_m_single(profile, a, ti, density_scale=2.0)
            if abs(fine - coarse) > tol:
                finer = _radial_m_single(profile, a, ti, density_scale=4.0)
                if abs(finer - fine) > tol:
                    raise QuadratureError(
                        f"radial overlap did not converge at t={ti} "
                        f"(last refinement moved by {abs(finer - fine):.2e})")
                fine = finer
            out[i] = fine
        return out

    return OverlapFunction(evaluator=ev, provenance="radial_quadrature",
                           label=profile.label, profile=profile,
                           dispersion_coefficient=a)


def explicit_d3_profile() -> RadialProfile:
    """|phihat(r)|^2 = |S^2|^{-1} r^{-2} * 3/(pi (r^6+1)): the all-lambda
    exponential source in d = 3.  Its scalar weight is q(r) = 3/(pi(r^6+1))."""
    s2 = _sphere_area(3)

    def weight_fn(r):
        return 3.0 / (np.pi * (np.asarray(r) ** 6 + 1.0))

    def density(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r > 0,
                            weight_fn(r) / np.maximum(r, 1e-300) ** 2 / s2,
                            np.inf)

    return RadialProfile(dimension=3, density=density, rmax=80.0,
                         label="radial_d3_explicit", weight_fn=weight_fn)


def _explicit_d3_rotated(t: np.ndarray, a: float) -> np.ndarray:
    """m(t) for the explicit d=3 profile via the rotated contour r -> e^{-i pi/4} s.

    m(t) = (3/pi) e^{-i pi/4} int_0^inf e^{-s^2 (a t)} / (1 + i s^6) ds
           - i e^{i 5 pi/6} e^{-sqrt(3) a t / 2} e^{-i a t / 2}

    The rotation picks up the pole of (r^6+1)^{-1} at e^{-i pi/6}.  Valid for
    t > 0; accurate and cheap uniformly in t.
    """
    t = np.asarray(t, dtype=float)
    at = a * t
    x, w = leggauss(12)
    out = np.empty(t.shape, dtype=complex)
    smax = np.minimum(np.sqrt(45.0 / np.maximum(at, 1e-12)), 60.0)
    edges01 = np.linspace(0.0, 1.0, 49)
    mid = 0.5 * (edges01[1:] + edges01[:-1])
    half = 0.5 * (edges01[1:] - edges01[:-1])
    base_pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    base_wts = (half[:, None] * w[None, :]).ravel()
    for i, ati in enumerate(at.ravel()):
        s = smax.ravel()[i] * base_pts
        ws = smax.ravel()[i] * base_wts
        integral = np.sum(np.exp(-s ** 2 * ati) / (1.0 + 1j * s ** 6) * ws)
        residue = -1j * np.exp(1j * 5 * np.pi / 6) * np.exp(-np.sqrt(3) * ati / 2) \
            * np.exp(-1j * ati / 2)
        out.ravel()[i] = (3.0 / np.pi) * np.exp(-1j * np.pi / 4) * integral + residue
    return out


def overlap_explicit_d3(a: float = 1.0) -> OverlapFunction:
    """Fast evaluator for the explicit d=3 source: oscillatory panels for
    small t, rotated-contour representation beyond (they agree to ~1e-12)."""
    profile = explicit_d3_profile()
    crossover = 2.0 / a

    def ev(t):
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(tt.shape, dtype=complex)
        small = tt < crossover
        if small.any():
            for i in np.nonzero(small)[0]:
                out[i] = _radial_m_single(profile, a, tt[i], density_scale=2.0)
        if (~small).any():
            out[~small] = _explicit_d3_rotated(tt[~small], a)
        return out

    return OverlapFunction(evaluator=ev, provenance="radial_quadrature",
                           label="radial_d3_explicit", profile=profile,
                           dispersion_coefficient=a)


def gaussian_d3_profile() -> RadialProfile:
    """Gaussian radial profile in d = 3 (tau finite, |m| ~ t^{-3/2})."""
    def density(r):
        return np.pi ** -1.5 * np.exp(-np.asarray(r, dtype=float) ** 2)

    def weight_fn(r):
        r = np.asarray(r)
        return 4.0 / np.sqrt(np.pi) * r ** 2 * np.exp(-r ** 2)

    return RadialProfile(dimension=3, density=density, rmax=14.0,
                         label="radial_d3_gaussian", weight_fn=weight_fn)


# ---------------------------------------------------------------------------
# discrete spectral paths


def overlap_matrix(eigenvalues: np.ndarray, coefficients: np.ndarray) -> OverlapFunction:
    """m(t) = sum |c_n|^2 e^{-i w_n t} for phi = sum c_n psi_n, H psi_n = w_n psi_n."""
    w = np.asarray(eigenvalues, dtype=float)
    c = np.asarray(coefficients, dtype=complex)
    if w.shape != c.shape:
        raise ContractViolation("eigenvalues and coefficients must align")
    wt = np.abs(c) ** 2
    total = wt.sum()
    if abs(total - 1.0) > 1e-10:
        raise ContractViolation(f"source coefficients normalise to {total}, not 1")
    return _spectral_overlap(w, wt, "matrix_spectral")


def _spectral_overlap(energies, weights, provenance, label="") -> OverlapFunction:
    energies = np.asarray(energies, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def ev(t):
        tt = np.asarray(t, dtype=float)
        return np.exp(-1j * np.multiply.outer(tt, energies)) @ weights.astype(complex)

    def lap(alpha):
        return complex(np.sum(weights / (alpha + 1j * energies)))

    return OverlapFunction(evaluator=ev, provenance=provenance, label=label,
                           energies=energies, weights=weights, laplace_closed=lap)


def overlap_from_hamiltonian(H: Hamiltonian, phi: WaveFunction) -> OverlapFunction:
    """Read the spectral measure of (H, phi) off the grid or the matrix.

    The free and multiplication variants are diagonal in a known basis, so
    m(t) reduces to an exact finite spectral sum on the lattice.
    """
    if isinstance(H, FiniteHermitian):
        coeffs = H.eigenvectors.conj().T @ phi.amplitudes
        return _spectral_overlap(H.eigenvalues, np.abs(coeffs) ** 2, "matrix_spectral")
    if isinstance(H, FreeDispersion):
        phat = phi if phi.representation == grids.MOMENTUM else fourier_transform(phi)
        weights = np.abs(phat.amplitudes) ** 2 * phat.measure
        energies = H.dispersion_coefficient * H.grid.momentum_sq()
        return _spectral_overlap(energies, weights, "grid_numeric")
    if isinstance(H, Multiplication):
        if phi.representation != grids.POSITION:
            raise ContractViolation("multiplication overlap needs a position-space state")
        weights = np.abs(phi.amplitudes) ** 2 * phi.measure
        return _spectral_overlap(H.values, weights, "grid_numeric")
    raise ContractViolation(f"unknown Hamiltonian variant {type(H).__name__}")


def compute_overlap(spec, phi=None, t=0.0):
    """Evaluate m(t) for a Hamiltonian + state, a RadialProfile, or a tag.

    `spec` may be an OverlapFunction (returned unchanged semantics), a
    RadialProfile, a Hamiltonian (with phi), or one of the closed-form tags
    'closed_lorentzian' / 'gaussian_free'.
    """
    m = as_overlap(spec, phi)
    return m(t)


def as_overlap(spec, phi=None) -> OverlapFunction:
    if isinstance(spec, OverlapFunction):
        return spec
    if isinstance(spec, RadialProfile):
        return overlap_radial(spec)
    if isinstance(spec, (FreeDispersion, Multiplication, FiniteHermitian)):
        if phi is None:
            raise ContractViolation("a source state is required with a Hamiltonian")
        return overlap_from_hamiltonian(spec, phi)
    if spec == "closed_lorentzian":
        return overlap_closed_lorentzian()
    if spec == "gaussian_free":
        return overlap_gaussian_free()
    raise ContractViolation(f"cannot interpret overlap spec {spec!r}")


# ---------------------------------------------------------------------------
# tau


@dataclass(frozen=True)
class TauEstimate:
    status: TauStatus
    value: float | None = None
    error: float | None = None
    beta: float | None = None
    diagnostics: dict | None = None

    def require_value(self) -> float:
        if self.status is not TauStatus.CONVERGED or self.value is None:
            raise ContractViolation(f"tau is not finite here: {self.status.value}")
        return self.value


def tau_estimate(m: OverlapFunction, horizon: float = 200.0,
                 tail_tol: float = 0.05, fit_residual_tol: float = 0.05) -> TauEstimate:
    """Estimate tau = int_0^inf |m| dt from a finite horizon.

    The last decade of [0, horizon] is fitted with |m| ~ C t^-beta on a
    log-log scale.  beta > 1 extrapolates the tail; beta <= 1 reports
    DIVERGENT; a bad fit reports INDETERMINATE unless |m(horizon)| is
    already negligible.
    """
    if not (horizon > 0):
        raise ContractViolation("horizon must be positive")
    key = (horizon, tail_tol)
    if key in m._tau_cache:
        return m._tau_cache[key]

    panels = max(2048, int(horizon * 8))
    pts, wts = _gl_nodes(np.linspace(0.0, horizon, panels + 1), 8)
    absm = np.abs(m(pts))
    head = float(np.sum(absm * wts))

    tail_negligible = np.all(absm[pts > 0.9 * horizon] < 1e-12)
    if tail_negligible:
        res = TauEstimate(TauStatus.CONVERGED, head, 1e-10, None,
                          {"head": head, "tail": 0.0})
        m._tau_cache[key] = res
        return res

    sel = pts >= horizon / 10.0
    logt = np.log(pts[sel])
    vals = np.maximum(np.abs(m(pts[sel])), 1e-300)
    logm = np.log(vals)
    slope, intercept = np.polyfit(logt, logm, 1)
    fit = slope * logt + intercept
    residual = float(np.sqrt(np.mean((logm - fit) ** 2)))
    beta = -slope
    diag = {"beta": beta, "fit_residual": residual, "head": head}

    if residual > fit_residual_tol:
        res = TauEstimate(TauStatus.INDETERMINATE, None, None, beta, diag)
    elif beta <= 1.0 + tail_tol:
        res = TauEstimate(TauStatus.DIVERGENT, None, None, beta, diag)
    else:
        m_end = float(np.abs(m(horizon)))
        tail = m_end * horizon / (beta - 1.0)
        # bracket the tail with the fit uncertainty on beta
        err = tail * (residual + tail_tol) / max(beta - 1.0, 1e-2)
        res = TauEstimate(TauStatus.CONVERGED, head + tail, err, beta,
                          diag | {"tail": tail})
    m._tau_cache[key] = res
    return res
