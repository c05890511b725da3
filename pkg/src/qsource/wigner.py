"""Wigner transform of low-rank densities and the semiclassical pairing.

The transform of a kernel kappa is

    W[kappa](x, p) = (2 pi)^{-d} integral e^{-i p y} kappa(x + y/2, x - y/2) dy,

computed per rank-one term on the doubled-offset lattice y_m = 2 m dx, so
W lives on the position grid times a momentum grid of spacing pi/L (twice
as fine as the state's momentum lattice, half its span).  The discrete
marginal identity sum_p W(x, p) dp = |psi(x)|^2 holds exactly, so the mass
equals the trace to rounding.

Macroscopic pairing uses the substitution

    integral f^eps(X, P) theta(X, P) dX dP
        = integral W(x, p) theta(eps x, p) dx dp,

with f^eps(X,P) = eps^{-d} W(X/eps, P), so no quantity is ever evaluated
on the singular macro density itself.  The classical limit

    f0(X, P, T) = g(X - P T, P) + 2|c| int_0^T delta(X - P s) |phihat(P)|^2 ds

is paired by integrating the delta along its ray analytically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ContractViolation
from .grids import GridSpec, WaveFunction, POSITION
from .propagate import LowRankDensity

MACRO_SUPPORT_CLIP_TOL = 1e-9


@dataclass(frozen=True)
class PhaseSpaceField:
    """Real samples W(x, p) on the micro grid (positions x row, momenta p column)."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # shape (len(x), len(p))
    trace: float

    def mass(self) -> float:
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(self.values.sum() * dx * dp)


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported tensor bump on macro phase space.

    theta(X, P) = bump((X-X0)/wX) * bump((P-P0)/wP) with the mollified
    profile bump(u) = exp(u^2/(u^2-1)) for |u| < 1, zero outside (peak
    value 1 at the centre).  A nonzero `flat_x`/`flat_p` inserts an exactly
    flat unit plateau of that half-width, joined to zero by a smooth
    partition-of-unity ramp; the support box is unchanged.
    """

    center_x: float
    center_p: float
    width_x: float
    width_p: float
    label: str = ""
    flat_x: float = 0.0
    flat_p: float = 0.0

    @staticmethod
    def _bump(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        out[inside] = np.exp(ui ** 2 / (ui ** 2 - 1.0))
        return out

    @staticmethod
    def _plateau(u: np.ndarray, flat: float) -> np.ndarray:
        # 1 on |u| <= flat, smooth ramp to 0 at |u| = 1
        u = np.abs(np.asarray(u, dtype=float))
        s = np.clip((u - flat) / max(1.0 - flat, 1e-12), 0.0, 1.0)

        def g(t):
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)

        return g(1.0 - s) / (g(s) + g(1.0 - s))

    def _profile(self, u: np.ndarray, flat_frac: float) -> np.ndarray:
        if flat_frac > 0:
            return self._plateau(u, flat_frac)
        return self._bump(u)

    def __call__(self, X, P) -> np.ndarray:
        ux = (np.asarray(X) - self.center_x) / self.width_x
        up = (np.asarray(P) - self.center_p) / self.width_p
        return (self._profile(ux, self.flat_x / self.width_x if self.flat_x else 0.0)
                * self._profile(up, self.flat_p / self.width_p if self.flat_p else 0.0))

    @property
    def support(self) -> tuple[float, float, float, float]:
        return (self.center_x - self.width_x, self.center_x + self.width_x,
                self.center_p - self.width_p, self.center_p + self.width_p)


def _wigner_single(psi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """W of one normalised column on the (x_j, p_k) lattice, p_k = (pi/L) k.

    Offsets are windowed to |y_m| <= L/2: beyond that the periodised kernel
    only contains cross terms with the state's box images (a mass-free ghost
    located L/2 away from the state).  The m = 0 term is untouched, so the
    marginal identity sum_k W dp = |psi(x)|^2 stays exact.
    """
    n = grid.points_per_axis
    j = np.arange(n)
    m = np.fft.fftfreq(n, d=1.0 / n).astype(int)  # signed offsets
    plus = psi[(j[:, None] + m[None, :]) % n]
    minus = np.conj(psi[(j[:, None] - m[None, :]) % n])
    G = plus * minus * (np.abs(m) <= n // 4)[None, :]
    # W(x_j, p_k) = (dy / 2 pi) sum_m e^{-i p_k y_m} G[j, m], y_m = 2 m dx
    W = np.fft.fft(G, axis=1) * (2.0 * grid.dx / (2.0 * np.pi))
    return W


def wigner_momentum_axis(grid: GridSpec) -> np.ndarray:
    n = grid.points_per_axis
    return np.fft.fftfreq(n, d=1.0 / n) * (np.pi / grid.box_length)


def wigner_of_density(rho: LowRankDensity, imag_tol: float = 1e-10) -> PhaseSpaceField:
    """Weighted sum of rank-one Wigner transforms (d = 1 only)."""
    if rho.rank == 0:
        raise ContractViolation("empty density: build a field from a grid instead")
    grid = rho.columns[0].grid
    if grid is None or grid.dimension != 1:
        raise ContractViolation("the full transform is implemented for d = 1 grids")
    n = grid.points_per_axis
    acc = np.zeros((n, n), dtype=complex)
    for w, col in zip(rho.weights, rho.columns):
        if col.representation != POSITION:
            raise ContractViolation("columns must be in the position representation")
        if w == 0.0:
            continue
        acc += w * _wigner_single(col.amplitudes, grid)
    scale = max(float(np.max(np.abs(acc))), 1e-300)
    imag_resid = float(np.max(np.abs(acc.imag))) / scale
    if imag_resid > imag_tol:
        raise ContractViolation(f"Wigner field imaginary residue {imag_resid:.2e}")
    p = wigner_momentum_axis(grid)
    order = np.argsort(p)
    x = grid.position_axis()
    return PhaseSpaceField(x=x, p=p[order], values=acc.real[:, order],
                           trace=rho.trace())


def wigner_of_state(psi: WaveFunction) -> PhaseSpaceField:
    """Wigner transform of a pure state (unit weight)."""
    rho = LowRankDensity(np.ones(1), [psi], np.zeros(1))
    return wigner_of_density(rho)


def pair_macro(W: PhaseSpaceField, theta: TestFunction, eps: float) -> float:
    """integral f^eps theta dX dP = integral W(x,p) theta(eps x, p) dx dp."""
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    x_lo, x_hi, p_lo, p_hi = theta.support
    micro_lo, micro_hi = x_lo / eps, x_hi / eps
    if micro_lo < W.x[0] - 1e-12 or micro_hi > W.x[-1] + 1e-12:
        warnings.warn("MACRO_SUPPORT_CLIPPED: theta extends beyond the micro grid")
    if p_lo < W.p[0] or p_hi > W.p[-1]:
        warnings.warn("MACRO_SUPPORT_CLIPPED: theta extends beyond the momentum grid")
    dx = W.x[1] - W.x[0]
    dp = W.p[1] - W.p[0]
    th = theta(eps * W.x[:, None], W.p[None, :])
    return float(np.sum(W.values * th) * dx * dp)


def classical_limit_pairing(theta: TestFunction, momentum_density: Callable,
                            c: float, T: float,
                            g: Callable | None = None,
                            nodes: int = 12, panels: int = 64) -> float:
    """Pair f0(.,.,T) with theta.

    Source term: 2|c| int_0^T int theta(P S, P) |phihat(P)|^2 dP dS by
    tensor Gauss-Legendre over the test-function support.
    Transport term (when g is given): int g(X - P T, P) theta(X, P) dX dP.
    """
    _, _, p_lo, p_hi = theta.support
    sp, wp = _panel_rule(p_lo, p_hi, panels, nodes)
    ss, ws = _panel_rule(0.0, T, panels, nodes) if T > 0 else (np.empty(0), np.empty(0))
    total = 0.0
    if T > 0 and c != 0.0:
        th = theta(np.outer(sp, ss), sp[:, None])
        dens = momentum_density(sp)
        total += 2.0 * abs(c) * float(np.einsum("p,ps,s->", dens * wp, th, ws))
    if g is not None:
        x_lo, x_hi, _, _ = theta.support
        sx, wx = _panel_rule(x_lo, x_hi, panels, nodes)
        gv = g(sx[:, None] - sp[None, :] * T, sp[None, :])
        th = theta(sx[:, None], sp[None, :])
        total += float(np.einsum("x,xp,p->", wx, gv * th, wp))
    return total


def _panel_rule(a: float, b: float, panels: int, nodes: int):
    x, w = leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return ((mid[:, None] + half[:, None] * x[None, :]).ravel(),
            (half[:, None] * w[None, :]).ravel())


def semiclassical_deviation(run_micro: Callable[[float, float], PhaseSpaceField],
                            momentum_density: Callable,
                            c_values, eps_values, T: float,
                            thetas: list[TestFunction]) -> list[dict]:
    """Deviation table |pair_macro - classical| per (c, eps, theta).

    run_micro(c, eps) must return the Wigner field of rho^eps(T/eps) for
    coupling lambda = c * eps.
    """
    rows = []
    for c in c_values:
        for eps in eps_values:
            W = run_micro(c, eps)
            for theta in thetas:
                micro = pair_macro(W, theta, eps)
                classical = classical_limit_pairing(theta, momentum_density, c, T)
                rows.append({"c": c, "eps": eps, "theta": theta.label,
                             "pair_micro": micro, "pair_classical": classical,
                             "deviation": abs(micro - classical)})
    return rows
