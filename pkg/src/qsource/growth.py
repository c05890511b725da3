"""Grid-free particle-number dynamics.

Everything follows from the scalar Volterra equation for the perturbed
autocorrelation u(t) = <phi, e^{(-iH + lambda P_phi) t} phi>,

    u(t) = m(t) + lambda * integral_0^t m(t-s) u(s) ds,

obtained by pairing the Duhamel identity with phi.  From u the squared
norm h^2(t) = ||e^{(-iH+lambda P_phi)t} phi||^2 and the particle number
follow by quadrature:

    d/dt h^2 = 2 lambda |u|^2,      h^2(0) = 1,
    d/dt N   = 2 |lambda| h^2,      N(0) = 0      (empty initial state).

The solver uses the product-trapezoidal scheme: u is interpolated
piecewise-linearly and the kernel m is integrated exactly against the hat
functions (panel integrals by fixed Gauss-Legendre).  Second order,
implicit diagonal, well posed for |lambda| dt sup|m| < 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ContractViolation, Regime, StepTooCoarse
from .overlap import OverlapFunction


@dataclass(frozen=True)
class GrowthTrace:
    """Uniform-grid solution: u, h^2, N, dN/dt, and an optional regime call."""

    lam: float
    dt: float
    t: np.ndarray
    u: np.ndarray
    hsq: np.ndarray
    N: np.ndarray
    dNdt: np.ndarray
    regime: Regime | None = None
    rate: float | None = None
    rate_spread: float | None = None

    def with_regime(self, regime: Regime, rate=None, spread=None) -> "GrowthTrace":
        return replace(self, regime=regime, rate=rate, rate_spread=spread)


def _product_weights(m: OverlapFunction, J: int, dt: float, nodes: int = 6):
    """Panel integrals of m(k dt - s) against the linear interpolation basis.

    Returns A, B with A[k-1] = (1/dt) int_0^dt m(k dt - s)(dt - s) ds and
    B[k-1] the mirror moment, so that

        int_0^{t_j} m(t_j - s) u(s) ds
            ~= sum_{i=0}^{j-1} A_{j-i} u_i + B_{j-i} u_{i+1}.
    """
    x, w = leggauss(nodes)
    sig = 0.5 * dt * (x + 1.0)
    ws = 0.5 * dt * w
    k = np.arange(1, J + 1)
    args = (k[:, None] * dt - sig[None, :]).ravel()
    mv = np.asarray(m(args)).reshape(J, nodes)
    A = mv @ (((dt - sig) / dt) * ws)
    B = mv @ ((sig / dt) * ws)
    return A.astype(complex), B.astype(complex)


def solve_volterra(m: OverlapFunction, lam: float, dt: float, T: float) -> np.ndarray:
    """Solve u = m + lambda (m * u) on t_j = j dt, j = 0..T/dt.

    Cost is O(J^2) through growing dot products; memory O(J).
    """
    if not (dt > 0 and T > 0):
        raise ContractViolation("dt and T must be positive")
    J = int(round(T / dt))
    if J < 1:
        raise ContractViolation("horizon shorter than one step")
    sup_m = float(np.max(np.abs(m(np.linspace(0.0, T, 64)))))
    if abs(lam) * dt * max(sup_m, 1.0) >= 0.5:
        raise StepTooCoarse(
            f"|lambda| dt sup|m| = {abs(lam) * dt * sup_m:.3f} >= 1/2; refine dt")

    t = np.arange(J + 1) * dt
    mvals = np.asarray(m(t), dtype=complex)
    if lam == 0.0:
        return mvals.copy()

    A, B = _product_weights(m, J, dt)
    u = np.empty(J + 1, dtype=complex)
    u[0] = mvals[0]
    diag = 1.0 - lam * B[0]
    Ar = A[::-1]
    Br = B[::-1]
    for j in range(1, J + 1):
        conv = np.dot(Ar[J - j:J], u[:j])
        if j > 1:
            conv += np.dot(Br[J - j:J - 1], u[1:j])
        u[j] = (mvals[j] + lam * conv) / diag
    return u


def _cumtrapz(y: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty(len(y))
    out[0] = 0.0
    np.cumsum(0.5 * dt * (y[1:] + y[:-1]), out=out[1:])
    return out


def integrate_growth(u: np.ndarray, lam: float, dt: float) -> GrowthTrace:
    """h^2 and N by cumulative trapezoids of the exact rate identities."""
    u = np.asarray(u, dtype=complex)
    t = np.arange(len(u)) * dt
    hsq = 1.0 + 2.0 * lam * _cumtrapz(np.abs(u) ** 2, dt)
    N = 2.0 * abs(lam) * _cumtrapz(hsq, dt)
    dNdt = 2.0 * abs(lam) * hsq
    return GrowthTrace(lam=lam, dt=dt, t=t, u=u, hsq=hsq, N=N, dNdt=dNdt)


def solve_growth(m: OverlapFunction, lam: float, dt: float, T: float) -> GrowthTrace:
    """Convenience: Volterra solve followed by the growth integrals."""
    return integrate_growth(solve_volterra(m, lam, dt, T), lam, dt)


def limiting_rate(trace: GrowthTrace, window: float = 0.25) -> tuple[float, float]:
    """Final-window mean of dN/dt with the window spread as the error bar."""
    j0 = int(len(trace.t) * (1.0 - window))
    seg = trace.dNdt[j0:]
    mean = float(seg.mean())
    spread = float(seg.max() - seg.min())
    return mean, spread


# classifier defaults (overridable per call)
RATE_SPREAD_TOL = 0.05        # relative window spread for LINEAR / EXPONENTIAL
PLATEAU_TOL = 1e-4            # relative N change defining BOUNDED
SUBLINEAR_DROP = 0.5          # dN/dt must fall below this fraction of its start


def classify_regime(trace: GrowthTrace, window: float = 0.25,
                    rate_spread_tol: float = RATE_SPREAD_TOL,
                    plateau_tol: float = PLATEAU_TOL,
                    r_min: float | None = None) -> GrowthTrace:
    """Label the trace BOUNDED / SUBLINEAR / LINEAR{rate} / EXPONENTIAL{rate}.

    Decisions are made on the final `window` fraction of the run:

    * EXPONENTIAL when d(log N)/dt settles to r > r_min with spread < 5%
    * else LINEAR when dN/dt settles to a positive constant (spread < 5%)
    * else SUBLINEAR when dN/dt is still decaying toward 0 while N moves
    * else BOUNDED when N has plateaued (relative change < 1e-4)
    * else INDETERMINATE (expected near the critical coupling)
    """
    n = len(trace.t)
    if n < 16:
        raise ContractViolation("trace too short to classify")
    T = trace.t[-1]
    if r_min is None:
        r_min = 3.0 / T
    j0 = int(n * (1.0 - window))

    # exponential: log-derivative of N on the window
    Nw = trace.N[j0:]
    if np.all(Nw > 0):
        r = np.gradient(np.log(Nw), trace.dt)
        r_mean = float(r.mean())
        spread = float((r.max() - r.min()) / max(abs(r_mean), 1e-300))
        if r_mean > r_min and spread < rate_spread_tol:
            return trace.with_regime(Regime.EXPONENTIAL, 2.0 * _half_rate(trace, j0),
                                     spread)

    # linear: dN/dt settles
    rate, spread_abs = limiting_rate(trace, window)
    if rate > 0 and spread_abs / max(rate, 1e-300) < rate_spread_tol:
        return trace.with_regime(Regime.LINEAR, rate, spread_abs / rate)

    # plateau vs decay-in-progress
    dN_rel = (trace.N[-1] - trace.N[j0]) / max(trace.N[-1], 1e-300)
    early = trace.dNdt[: max(n // 8, 2)].mean()
    late = trace.dNdt[j0:].mean()
    decreasing = late < SUBLINEAR_DROP * early and _is_decreasing(trace.dNdt[j0:])
    if dN_rel < plateau_tol:
        return trace.with_regime(Regime.BOUNDED, float(trace.N[-1]), dN_rel)
    if decreasing:
        return trace.with_regime(Regime.SUBLINEAR, late, None)
    return trace.with_regime(Regime.INDETERMINATE)


def _half_rate(trace: GrowthTrace, j0: int) -> float:
    """Re alpha estimate: half the final-window mean of d(log N)/dt."""
    r = np.gradient(np.log(trace.N[j0:]), trace.dt)
    return float(r.mean()) / 2.0


def _is_decreasing(seg: np.ndarray, tol: float = 1e-3) -> bool:
    return bool(np.all(np.diff(seg) <= tol * max(abs(seg[0]), 1e-300)))


@dataclass(frozen=True)
class SweepResult:
    table: list  # (lam, Regime, rate or None)
    bracket: tuple[float, float] | None
    lambda_c: float | None
    uncertainty: float | None


def sweep_lambda(m: OverlapFunction, lambdas, dt: float, T: float,
                 refine_to: float | None = None, window: float = 0.25) -> SweepResult:
    """Classify along a sorted lambda grid and bracket the LINEAR->EXPONENTIAL flip.

    Optional bisection shrinks the bracket until its width is <= refine_to.
    INDETERMINATE points are legal strictly inside the bracket only.
    """
    lambdas = sorted(float(v) for v in lambdas)
    if lambdas != sorted(set(lambdas)):
        raise ContractViolation("lambda grid must be strictly sorted")

    seen: dict[float, tuple] = {}

    def classify(lam):
        if lam not in seen:
            tr = classify_regime(solve_growth(m, lam, dt, T), window=window)
            seen[lam] = (tr.regime, tr.rate)
        return seen[lam]

    for lam in lambdas:
        classify(lam)

    lo = hi = None
    for lam in lambdas:
        reg, _ = seen[lam]
        if reg in (Regime.LINEAR, Regime.BOUNDED, Regime.SUBLINEAR):
            lo = lam
        if reg is Regime.EXPONENTIAL and hi is None and lo is not None:
            hi = lam

    def finish():
        table = [(lam, reg, rate) for lam, (reg, rate) in sorted(seen.items())]
        if lo is None or hi is None or hi < lo:
            return SweepResult(table, None, None, None)
        return SweepResult(table, (lo, hi), 0.5 * (lo + hi), 0.5 * (hi - lo))

    if lo is None or hi is None or hi < lo:
        return finish()

    while refine_to is not None and (hi - lo) > refine_to:
        mid = 0.5 * (lo + hi)
        reg, _ = classify(mid)
        if reg is Regime.EXPONENTIAL:
            hi = mid
        elif reg in (Regime.LINEAR, Regime.BOUNDED, Regime.SUBLINEAR):
            lo = mid
        else:
            # indeterminate midpoint: probe the quarter points instead
            moved = False
            reg1, _ = classify(0.5 * (lo + mid))
            if reg1 in (Regime.LINEAR, Regime.BOUNDED, Regime.SUBLINEAR):
                lo, moved = 0.5 * (lo + mid), True
            reg2, _ = classify(0.5 * (mid + hi))
            if reg2 is Regime.EXPONENTIAL:
                hi, moved = 0.5 * (mid + hi), True
            if not moved:
                break

    return finish()
