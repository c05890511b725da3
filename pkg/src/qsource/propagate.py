"""Grid-space evolution under -iH + lambda P_phi and low-rank densities.

Trajectories integrate d psi/dt = -i H psi + lambda <phi, psi> phi by
Strang splitting: half free step, exact rank-one substep, half free step.
The rank-one generator exponentiates in closed form,

    e^{lambda P_phi dt} psi = psi + (e^{lambda dt} - 1) <phi, psi> phi,

so the splitting error is O(dt^2) uniformly in lambda.

With an empty initial state the density is the emission-time integral

    rho(t) = 2|lambda| integral_0^t P_{chi(s)} ds,
    chi(s) = e^{(-iH + lambda P_phi) s} phi,

discretised as a weighted sum of rank-one projectors onto trajectory
snapshots (trapezoidal end-weights).  Everything observable reduces to
Gram matrices of the snapshot columns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, GridMismatch, StepTooCoarse
from .grids import (Hamiltonian, Region, WaveFunction, check_boundary_guard,
                    free_step, inner_product, project_region)

RANK_CAP = 2048


@dataclass(frozen=True)
class LowRankDensity:
    """rho = sum_j w_j |chi_j><chi_j| with w_j >= 0."""

    weights: np.ndarray
    columns: list[WaveFunction]
    emission_times: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ContractViolation("low-rank weights must be nonnegative")
        if len(self.columns) != len(w) or len(self.emission_times) != len(w):
            raise ContractViolation("weights, columns and emission times must align")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "emission_times", np.asarray(self.emission_times, dtype=float))

    @property
    def rank(self) -> int:
        return len(self.weights)

    def trace(self) -> float:
        return float(sum(w * c.norm_sq() for w, c in zip(self.weights, self.columns)))

    @classmethod
    def empty(cls) -> "LowRankDensity":
        return cls(np.empty(0), [], np.empty(0))


def _rank_one_substep(psi: WaveFunction, phi: WaveFunction, lam: float,
                      dt: float) -> WaveFunction:
    ov = inner_product(phi, psi)
    amps = psi.amplitudes + (np.exp(lam * dt) - 1.0) * ov * phi.amplitudes
    return WaveFunction(psi.grid, amps, psi.representation)


def evolve_trajectory(H: Hamiltonian, phi: WaveFunction, lam: float,
                      psi0: WaveFunction, dt: float, T: float,
                      snapshot_stride: int = 1, guard: bool = True):
    """Strang-split integration of psi(t) = e^{(-iH + lambda P_phi) t} psi0.

    Returns (times, snapshots): psi at t_k = k * stride * dt, including t=0
    and the final time.  The boundary-mass guard runs at snapshot cadence.
    """
    if dt <= 0 or T <= 0:
        raise ContractViolation("dt and T must be positive")
    if abs(lam) * dt >= 0.5:
        raise StepTooCoarse(f"|lambda| dt = {abs(lam) * dt:.3f} >= 1/2")
    if phi.grid != psi0.grid or phi.representation != psi0.representation:
        raise GridMismatch("phi and psi0 must share a grid and representation")
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise ContractViolation("T must be an integer number of steps")

    psi = psi0
    times = [0.0]
    snaps = [psi0]
    if guard:
        check_boundary_guard(psi0, "initial state")
    half = 0.5 * dt
    for k in range(1, nsteps + 1):
        psi = free_step(psi, half, H)
        psi = _rank_one_substep(psi, phi, lam, dt)
        psi = free_step(psi, half, H)
        if k % snapshot_stride == 0 or k == nsteps:
            times.append(k * dt)
            snaps.append(psi)
            if guard:
                check_boundary_guard(psi, f"t = {k * dt:.3f}")
    return np.asarray(times), snaps


def assemble_density(snapshots: list[WaveFunction], emission_times: np.ndarray,
                     lam: float) -> LowRankDensity:
    """rho(t) = 2|lambda| integral_0^t P_chi(s) ds by trapezoid over the
    snapshot grid (uniform emission times required)."""
    if len(snapshots) == 0:
        raise ContractViolation("no snapshots to assemble")
    s = np.asarray(emission_times, dtype=float)
    if len(s) != len(snapshots):
        raise ContractViolation("snapshot and time counts differ")
    if len(s) == 1:
        return LowRankDensity(np.zeros(1), list(snapshots), s)
    ds = np.diff(s)
    if np.max(np.abs(ds - ds[0])) > 1e-9 * ds[0]:
        raise ContractViolation("emission times must be uniform")
    if len(s) > RANK_CAP:
        warnings.warn(f"rank {len(s)} exceeds the cap {RANK_CAP}; "
                      "consider a larger snapshot stride")
    w = np.full(len(s), 2.0 * abs(lam) * ds[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return LowRankDensity(w, list(snapshots), s)


def source_density(H: Hamiltonian, phi: WaveFunction, lam: float, dt: float,
                   T: float, snapshot_stride: int, guard: bool = True) -> LowRankDensity:
    """Evolve the source trajectory from phi and assemble rho(T)."""
    times, snaps = evolve_trajectory(H, phi, lam, phi, dt, T,
                                     snapshot_stride=snapshot_stride, guard=guard)
    return assemble_density(snaps, times, lam)


def evolve_density(rho0: LowRankDensity, H: Hamiltonian, phi: WaveFunction,
                   lam: float, dt: float, T: float, guard: bool = True) -> LowRankDensity:
    """Conjugate rho0 by the semigroup: each column is evolved, weights kept."""
    new_cols = []
    for col in rho0.columns:
        _, snaps = evolve_trajectory(H, phi, lam, col, dt, T, snapshot_stride=10 ** 9,
                                     guard=guard)
        new_cols.append(snaps[-1])
    return LowRankDensity(rho0.weights.copy(), new_cols, rho0.emission_times.copy())


def local_trace(rho: LowRankDensity, region: Region) -> float:
    """tr(P_Omega rho P_Omega) = sum_j w_j ||P_Omega chi_j||^2."""
    total = 0.0
    for w, col in zip(rho.weights, rho.columns):
        total += w * project_region(col, region).norm_sq()
    return float(total)


def gram_matrix(rho: LowRankDensity) -> np.ndarray:
    """M_ij = sqrt(w_i w_j) <chi_i, chi_j>; its spectrum is rho's nonzero spectrum."""
    k = rho.rank
    if k == 0:
        return np.zeros((0, 0))
    cols = np.stack([c.amplitudes for c in rho.columns], axis=1)
    measure = rho.columns[0].measure
    G = cols.conj().T @ cols * measure
    sw = np.sqrt(rho.weights)
    M = G * np.outer(sw, sw)
    herm_defect = np.max(np.abs(M - M.conj().T)) if k else 0.0
    if herm_defect > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise ContractViolation(f"Gram matrix non-Hermitian by {herm_defect:.2e}")
    return 0.5 * (M + M.conj().T)


def fermionic_check(rho: LowRankDensity) -> float:
    """Largest eigenvalue of rho; rho <= 1 holds iff the result is <= 1."""
    if rho.rank == 0:
        return 0.0
    M = gram_matrix(rho)
    return float(np.linalg.eigvalsh(M)[-1])


def dominant_mode(rho: LowRankDensity) -> tuple[float, WaveFunction]:
    """Top eigenpair of rho, reassembled on the grid from the Gram eigenvector."""
    if rho.rank == 0:
        raise ContractViolation("empty density has no dominant mode")
    M = gram_matrix(rho)
    vals, vecs = np.linalg.eigh(M)
    top = vecs[:, -1] * np.sqrt(rho.weights)
    cols = np.stack([c.amplitudes for c in rho.columns], axis=1)
    amps = cols @ top
    mode = WaveFunction(rho.columns[0].grid, amps, rho.columns[0].representation)
    return float(vals[-1]), mode.normalized()
