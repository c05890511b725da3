"""Eigenvalue analysis of iH + lambda P_phi.

The Laplace transform of the overlap,

    mhat(alpha) = integral_0^inf e^{-alpha t} m(t) dt
                = <phi, (alpha + iH)^{-1} phi>,   Re alpha > 0,

drives everything: alpha is an eigenvalue of -iH + lambda P_phi exactly
when lambda mhat(alpha) = 1, and the corresponding eigenvalue of
iH + lambda P_phi is its complex conjugate, with (non-normalised)
eigenvector psi = (alpha - iH)^{-1} phi.  Both operators share the growth
rate 2 Re alpha.

Routes
------
CHARACTERISTIC   complex Newton on lambda mhat(alpha) = 1 (contour-bisection
                 fallback), arbitrary overlap.
QUARTIC          the explicit d=3 source only: the polynomial
                 p(z) = z^4 + 2i z^3 + (lambda i - 2) z^2 - (2 lambda + i) z
                        - (3/2) lambda i
                 has a root z0 with Im z0 > 0 for every lambda > 0, and
                 alpha = i z0^2 with eigenvector (H0 - z0^2)^{-1} phi.

Root counting uses the argument principle on a rectangle in the right
half-plane, so the absence of an exponential eigenmode can be certified.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ContourUnresolved, ContractViolation, QSourceError, QuadratureError
from .overlap import OverlapFunction, RadialProfile

ALPHA_MIN = 1e-6

CHARACTERISTIC = "CHARACTERISTIC"
QUARTIC = "QUARTIC"


class NoRootFound(QSourceError):
    """The right half-plane carries no eigenvalue for this coupling."""


@dataclass(frozen=True)
class EigenvalueResult:
    lam: float
    alpha: complex            # eigenvalue of iH + lambda P_phi, Re alpha > 0
    method: str
    residual: float           # ||(iH + lam P_phi) psi - alpha psi|| / ||psi||
    characteristic_defect: float   # |lambda mhat - 1| at the accepted root
    iterations: int = 0
    fallback_used: bool = False


@dataclass(frozen=True)
class QuarticRoots:
    lam: float
    roots: np.ndarray
    z0: complex
    poly_residuals: np.ndarray
    identity_defect: float    # |<phi, psi> + i/lambda| from independent quadrature


# ---------------------------------------------------------------------------
# Laplace transform of the overlap


def laplace_overlap(m: OverlapFunction, alpha: complex,
                    alpha_min: float = ALPHA_MIN, method: str = "auto") -> complex:
    """mhat(alpha) for Re alpha >= alpha_min.

    method='auto' prefers exactness: closed forms and discrete spectral
    measures evaluate directly, radial profiles go through a pole-subtracted
    resolvent integral.  method='time' forces the damped time-domain panel
    quadrature (the independent route used in cross-checks), and
    method='spectral' forces the resolvent form.
    """
    alpha = complex(alpha)
    if alpha.real < alpha_min:
        raise ContractViolation(f"Re alpha = {alpha.real:.3e} below alpha_min = {alpha_min:.0e}")
    if method == "time":
        return _laplace_time_domain(m, alpha)
    if method == "spectral":
        if m.profile is None:
            raise ContractViolation("no radial profile for the spectral route")
        return _laplace_radial(m.profile, m.dispersion_coefficient, alpha)
    if m.laplace_closed is not None:
        return complex(m.laplace_closed(alpha))
    if m.profile is not None:
        return _laplace_radial(m.profile, m.dispersion_coefficient, alpha)
    return _laplace_time_domain(m, alpha)


def _laplace_time_domain(m: OverlapFunction, alpha: complex,
                         tol: float = 1e-9) -> complex:
    """Panelled Gauss-Legendre for int_0^inf e^{-alpha t} m(t) dt."""
    horizon = 40.0 / alpha.real
    width = min(0.25, np.pi / (2.0 * (abs(alpha.imag) + 1.0)), horizon / 32.0)
    npanels = int(np.ceil(horizon / width))
    if npanels > 400_000:
        raise QuadratureError("laplace quadrature budget exceeded; Re alpha too small")

    def run(nodes):
        pts, wts = _panel_nodes(0.0, horizon, npanels, nodes)
        vals = m(pts) * np.exp(-alpha * pts)
        return complex(np.sum(vals * wts))

    coarse, fine = run(8), run(12)
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise QuadratureError(
            f"laplace quadrature error estimate {abs(fine - coarse):.2e} above {tol:.0e}")
    return fine


def _panel_nodes(a: float, b: float, panels: int, nodes: int):
    x, w = leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return ((mid[:, None] + half[:, None] * x[None, :]).ravel(),
            (half[:, None] * w[None, :]).ravel())


def cauchy_even_integral(q, w: complex, R: float | None = None,
                         panels: int = 80, nodes: int = 14) -> complex:
    """integral_R q(k) / (k^2 - w^2) dk for even, decaying, analytic q and Im w > 0.

    The nearly-singular factors are removed by subtracting q(+-w) under the
    partial fractions, whose finite-interval integrals are complex logs; the
    |k| > R tails are mapped to u = 1/k and integrated directly.
    """
    if w.imag <= 0:
        raise ContractViolation("cauchy_even_integral needs Im w > 0")
    if R is None:
        R = max(6.0, 2.0 * abs(w) + 2.0)
    qw = complex(q(np.asarray([w], dtype=complex))[0])
    k, wts = _panel_nodes(-R, R, panels, nodes)
    qk = q(k)
    log_plus = np.log((R - w) / (-R - w))
    log_minus = np.log((R + w) / (-R + w))
    I1 = np.sum((qk - qw) / (k - w) * wts) + qw * log_plus
    I2 = np.sum((qk - qw) / (k + w) * wts) + qw * log_minus
    inner = (I1 - I2) / (2.0 * w)
    u, uw = _panel_nodes(1e-12, 1.0 / R, 24, nodes)
    kk = 1.0 / u
    tail = np.sum(q(kk) / (kk ** 2 - w ** 2) / u ** 2 * uw)
    return complex(inner + 2.0 * tail)


def _radial_weight_q(profile: RadialProfile):
    """Even analytic continuation of the scalar weight q(r)."""
    def q(r):
        return profile.weight(r)
    return q


def _laplace_radial(profile: RadialProfile, a: float, alpha: complex) -> complex:
    """mhat(alpha) = int_0^inf q(r)/(alpha + i a r^2) dr via the Cauchy helper.

    alpha + i a r^2 = i a (r^2 - w^2) with w = sqrt(i alpha / a), Im w > 0.
    """
    w = np.sqrt(1j * alpha / a)
    if w.imag < 0:
        w = -w
    val = cauchy_even_integral(_radial_weight_q(profile), w)
    return complex(val / (2.0j * a))


# ---------------------------------------------------------------------------
# root counting by the argument principle


def count_roots_halfplane(m: OverlapFunction, lam: float,
                          alpha_min: float = ALPHA_MIN, R: float = 10.0,
                          samples_per_edge: int = 96) -> int:
    """Winding number of F(alpha) = lambda mhat(alpha) - 1 around the
    rectangle [alpha_min, R] x [-R, R].  count 0 certifies that no
    exponential eigenmode lives inside."""
    base = [complex(alpha_min, -R), complex(R, -R), complex(R, R), complex(alpha_min, R)]
    for attempt in range(3):
        try:
            return _winding_number(m, lam, base, samples_per_edge)
        except ContourUnresolved:
            if attempt == 2:
                raise
            # a zero sits too close: nudge the rectangle outward
            grow = 1.07 ** (attempt + 1)
            base = [complex(max(alpha_min / grow, 1e-9), -R * grow),
                    complex(R * grow, -R * grow),
                    complex(R * grow, R * grow),
                    complex(max(alpha_min / grow, 1e-9), R * grow)]
    raise ContourUnresolved("unreachable")


def _winding_number(m, lam, corners, samples_per_edge) -> int:
    pts = []
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        seg = a + (b - a) * np.linspace(0.0, 1.0, samples_per_edge, endpoint=False)
        pts.extend(seg.tolist())
    pts.append(pts[0])

    def F(z):
        return lam * laplace_overlap(m, z) - 1.0

    vals = [F(z) for z in pts]
    safety = 1e-8 * max(1.0, np.median(np.abs(vals)))
    total = 0.0
    i = 0
    while i < len(pts) - 1:
        f0, f1 = vals[i], vals[i + 1]
        if min(abs(f0), abs(f1)) < safety:
            raise ContourUnresolved("|F| below safety threshold on the contour")
        dphi = np.angle(f1 / f0)
        if abs(dphi) > np.pi / 2:
            # refine this segment until the phase step is resolved
            sub = _refine_segment(F, pts[i], pts[i + 1], f0, f1, safety, depth=0)
            total += sub
        else:
            total += dphi
        i += 1
    winding = total / (2.0 * np.pi)
    if abs(winding - round(winding)) > 1e-3:
        raise ContourUnresolved(f"winding {winding} did not land on an integer")
    return int(round(winding))


def _refine_segment(F, z0, z1, f0, f1, safety, depth) -> float:
    if depth > 24:
        raise ContourUnresolved("phase step unresolved after maximal refinement")
    zm = 0.5 * (z0 + z1)
    fm = F(zm)
    if abs(fm) < safety:
        raise ContourUnresolved("|F| below safety threshold during refinement")
    total = 0.0
    for (za, zb, fa, fb) in ((z0, zm, f0, fm), (zm, z1, fm, f1)):
        dphi = np.angle(fb / fa)
        if abs(dphi) > np.pi / 2:
            total += _refine_segment(F, za, zb, fa, fb, safety, depth + 1)
        else:
            total += dphi
    return total


# ---------------------------------------------------------------------------
# characteristic root


def solve_characteristic(m: OverlapFunction, lam: float,
                         alpha_guess: complex | None = None,
                         alpha_min: float = ALPHA_MIN,
                         max_iter: int = 60) -> EigenvalueResult:
    """Find the right-half-plane eigenvalue of iH + lambda P_phi.

    Newton runs on F(beta) = lambda mhat(beta) - 1; the eigenvalue reported
    is alpha = conj(beta).  When Newton stalls, rectangle bisection guided
    by the winding count recovers a seed.  Raises NoRootFound when the
    count certifies an empty half-plane.
    """
    if lam <= 0:
        if count_roots_halfplane(m, lam) == 0:
            raise NoRootFound(f"no right-half-plane eigenvalue for lambda = {lam}")
        raise ContractViolation("negative coupling produced a nonzero count")

    def F(beta):
        return lam * laplace_overlap(m, beta, alpha_min=alpha_min) - 1.0

    seeds = [alpha_guess] if alpha_guess is not None else []
    seeds.append(complex(lam))
    asym = _asymptotic_seed(m, lam)
    if asym is not None:
        seeds.append(asym)

    best = None
    for seed in seeds:
        root, iters = _newton(F, complex(seed), alpha_min, max_iter)
        if root is not None:
            best = (root, iters, False)
            break
    if best is None:
        center = _contour_bisect_seed(m, lam, alpha_min)
        root, iters = _newton(F, center, alpha_min, max_iter)
        if root is None:
            raise ContourUnresolved("Newton failed even from the bisection seed")
        best = (root, iters, True)

    beta, iters, fell_back = best
    defect = abs(F(beta))
    if defect > 1e-10:
        raise ContourUnresolved(f"characteristic defect {defect:.2e} above 1e-10")
    alpha = np.conj(beta)
    residual = eigen_residual(m, lam, alpha)
    if residual > 1e-6:
        raise ContourUnresolved(f"eigen-residual {residual:.2e} above 1e-6")
    return EigenvalueResult(lam=lam, alpha=complex(alpha), method=CHARACTERISTIC,
                            residual=residual, characteristic_defect=defect,
                            iterations=iters, fallback_used=fell_back)


def _newton(F, z0: complex, alpha_min: float, max_iter: int):
    z = complex(max(z0.real, 2 * alpha_min), z0.imag)
    fz = F(z)
    for it in range(1, max_iter + 1):
        h = 1e-7 * max(abs(z), 1e-4)
        try:
            dF = (F(z + h) - F(z - h)) / (2.0 * h)
        except (ContractViolation, QuadratureError):
            return None, it
        if dF == 0:
            return None, it
        step = -fz / dF
        # backtracking line search, kept inside the half-plane
        for _ in range(10):
            cand = z + step
            if cand.real < alpha_min:
                cand = complex(alpha_min, cand.imag)
            try:
                fc = F(cand)
            except (ContractViolation, QuadratureError):
                step *= 0.5
                continue
            if abs(fc) < abs(fz) or abs(fc) < 1e-13:
                z, fz = cand, fc
                break
            step *= 0.5
        else:
            return None, it
        if abs(fz) < 1e-13:
            return z, it
    return (z, max_iter) if abs(fz) < 1e-11 else (None, max_iter)


def _asymptotic_seed(m: OverlapFunction, lam: float) -> complex | None:
    """Heavy-tailed radial overlaps: m ~ (q(0)/2) sqrt(pi/(a t)) e^{-i pi/4}
    gives mhat ~ K / sqrt(beta), so beta ~ (lam K)^2."""
    if m.profile is None:
        return None
    a = m.dispersion_coefficient
    q0 = float(np.real(m.profile.weight(np.asarray([1e-9]))[0]))
    if not np.isfinite(q0) or q0 <= 0:
        return None
    K = 0.5 * q0 * np.sqrt(np.pi / a) * np.exp(-1j * np.pi / 4)
    return (lam * K) ** 2


def _contour_bisect_seed(m: OverlapFunction, lam: float, alpha_min: float) -> complex:
    lo_r, hi_r = alpha_min, max(4.0 * lam, 2.0)
    lo_i, hi_i = -max(4.0 * lam, 2.0), max(4.0 * lam, 2.0)

    def count(r0, r1, i0, i1):
        corners = [complex(r0, i0), complex(r1, i0), complex(r1, i1), complex(r0, i1)]
        return _winding_number(m, lam, corners, 64)

    if count(lo_r, hi_r, lo_i, hi_i) < 1:
        raise NoRootFound("contour count 0 in the search rectangle")
    for _ in range(40):
        if max(hi_r - lo_r, hi_i - lo_i) < 1e-3 * max(1.0, lam):
            break
        if hi_r - lo_r >= hi_i - lo_i:
            mid = 0.5 * (lo_r + hi_r)
            if count(lo_r, mid, lo_i, hi_i) >= 1:
                hi_r = mid
            else:
                lo_r = mid
        else:
            mid = 0.5 * (lo_i + hi_i)
            if count(lo_r, hi_r, lo_i, mid) >= 1:
                hi_i = mid
            else:
                lo_i = mid
    return complex(0.5 * (lo_r + hi_r), 0.5 * (lo_i + hi_i))


# ---------------------------------------------------------------------------
# eigen residual on an independent discretisation


def eigen_residual(m: OverlapFunction, lam: float, alpha: complex) -> float:
    """|| (iH + lam P_phi) psi - alpha psi || / ||psi|| with
    psi = (alpha - iH)^{-1} phi, evaluated on the spectral measure of (H, phi)
    by dense quadrature independent of the root-finding path."""
    if m.energies is not None:
        E = m.energies
        wts = m.weights
        return _residual_from_measure(E, wts, lam, alpha)
    if m.profile is not None:
        a = m.dispersion_coefficient
        k, wts = _dense_grid_near_pole(m.profile, a, alpha)
        E = a * k ** 2
        q = np.real(m.profile.weight(k))
        return _residual_from_measure(E, q * wts, lam, alpha)
    if m.provenance == "closed_lorentzian":
        # H = x with Cauchy spectral density 1/(pi(1+E^2)) on the whole line
        E = np.linspace(-400.0, 400.0, 2_000_001)
        dens = 1.0 / (np.pi * (1.0 + E ** 2))
        wts = np.full_like(E, E[1] - E[0])
        return _residual_from_measure(E, dens * wts, lam, alpha)
    raise ContractViolation("no independent spectral measure available for the residual")


def _residual_from_measure(E, wts, lam, alpha) -> float:
    """Residual over a scalar spectral measure: psi(E) = 1/(alpha - iE)."""
    psi = 1.0 / (alpha - 1j * E)
    phi_psi = np.sum(wts * psi)
    # (iE - alpha) psi + lam <phi,psi> = lam <phi,psi> - 1 pointwise
    num = abs(lam * phi_psi - 1.0) * np.sqrt(np.sum(wts).real)
    den = np.sqrt(np.sum(wts * np.abs(psi) ** 2).real)
    return float(num / den)


def _dense_grid_near_pole(profile: RadialProfile, a: float, alpha: complex):
    """Trapezoid grid on [0, rmax] refined around the resolvent peak."""
    w = np.sqrt(1j * alpha / a)
    if w.imag < 0:
        w = -w
    k_star, width = abs(w.real), max(abs(w.imag), 1e-9)
    base = np.linspace(0.0, profile.rmax, 60_001)
    lo = max(k_star - 60.0 * width, 0.0)
    hi = min(k_star + 60.0 * width, profile.rmax)
    fine = np.linspace(lo, hi, 40_001) if hi > lo else np.empty(0)
    k = np.unique(np.concatenate([base, fine]))
    wts = np.empty_like(k)
    wts[1:-1] = 0.5 * (k[2:] - k[:-2])
    wts[0] = 0.5 * (k[1] - k[0])
    wts[-1] = 0.5 * (k[-1] - k[-2])
    return k, wts


# ---------------------------------------------------------------------------
# the explicit quartic route


def quartic_polynomial(lam: float) -> np.ndarray:
    """Coefficients of p(z), highest power first."""
    return np.array([1.0, 2.0j, lam * 1.0j - 2.0, -(2.0 * lam + 1.0j), -1.5 * lam * 1.0j],
                    dtype=complex)


def companion_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots as eigenvalues of the companion matrix of a monic polynomial."""
    c = np.asarray(coeffs, dtype=complex)
    c = c / c[0]
    n = len(c) - 1
    comp = np.zeros((n, n), dtype=complex)
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -c[1:][::-1]
    return np.linalg.eigvals(comp)


def quartic_alpha(lam: float, profile_a: float = 1.0) -> tuple[QuarticRoots, EigenvalueResult]:
    """Roots of the explicit-source quartic, the selected upper root z0, and
    the eigenvalue alpha = i z0^2 with its quadrature cross-checks."""
    if lam <= 0:
        raise ContractViolation("the quartic route requires lambda > 0")
    coeffs = quartic_polynomial(lam)
    roots = companion_roots(coeffs)
    resid = np.abs(np.polyval(coeffs, roots))
    scale = np.max(np.abs(coeffs))
    if np.max(resid) > 1e-10 * scale:
        raise ContractViolation(f"companion residual {np.max(resid):.2e} too large")
    upper = roots[roots.imag > 0]
    if len(upper) == 0:
        raise ContractViolation(
            "no root with positive imaginary part: contradicts the guarantee, "
            "implementation bug")
    z0 = complex(upper[np.argmax(upper.imag)])

    # independent quadrature check of <phi, psi> = -i/lambda
    q = lambda k: (3.0 / (2.0 * np.pi)) / (np.asarray(k, dtype=complex) ** 6 + 1.0)
    identity_val = cauchy_even_integral(q, z0)
    identity_defect = abs(identity_val - (-1j / lam))
    qr = QuarticRoots(lam=lam, roots=roots, z0=z0, poly_residuals=resid,
                      identity_defect=identity_defect)

    alpha = 1j * z0 ** 2
    if alpha.real <= 0:
        raise ContractViolation(f"quartic alpha has Re <= 0: {alpha}")
    from .overlap import overlap_explicit_d3
    m = overlap_explicit_d3(a=profile_a)
    residual = eigen_residual(m, lam, alpha)
    defect = abs(lam * laplace_overlap(m, np.conj(alpha), alpha_min=1e-9) - 1.0)
    ev = EigenvalueResult(lam=lam, alpha=alpha, method=QUARTIC, residual=residual,
                          characteristic_defect=defect)
    return qr, ev
