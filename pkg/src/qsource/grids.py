"""Discrete representation of states and Hamiltonians.

A periodic box [-L/2, L/2)^d replaces R^d.  Position samples sit at
x_j = -L/2 + j*dx and the momentum lattice at p_k = 2*pi*k/L for signed
integers k in [-n/2, n/2).  The Fourier transform uses the unitary
angular-frequency convention

    phihat(p) = (2*pi)^(-d/2) * integral e^{-i p.x} phi(x) dx,

discretised so that the map is unitary to machine precision.  Momentum
arrays are kept in natural FFT order (use ``GridSpec.momentum_axis``).

Three Hamiltonian variants are supported: a free dispersion
omega(p) = a|p|^2 (exact step by phase multiplication in momentum space),
a real multiplication operator V(x) (exact step in position space), and a
finite Hermitian matrix (exact step by eigendecomposition, no grid).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import BoxTooSmall, ContractViolation, GridMismatch

POSITION = "position"
MOMENTUM = "momentum"
COEFF = "coeff"

#: mass fraction allowed within 2*dx of the box edge before a run aborts
BOUNDARY_GUARD_TOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid: d dimensions, n points per axis (power of two), box length L."""

    dimension: int
    points_per_axis: int
    box_length: float

    def __post_init__(self):
        d, n, L = self.dimension, self.points_per_axis, self.box_length
        if d not in (1, 2, 3):
            raise ContractViolation(f"dimension must be 1, 2 or 3, got {d}")
        if n < 8 or (n & (n - 1)) != 0:
            raise ContractViolation(f"points_per_axis must be a power of two >= 8, got {n}")
        if not (L > 0):
            raise ContractViolation(f"box_length must be positive, got {L}")

    @property
    def dx(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def dp(self) -> float:
        return 2.0 * np.pi / self.box_length

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dimension

    @property
    def volume_element(self) -> float:
        return self.dx ** self.dimension

    def position_axis(self) -> np.ndarray:
        n = self.points_per_axis
        return (np.arange(n) - n // 2) * self.dx

    def momentum_axis(self) -> np.ndarray:
        """Signed momentum values in natural FFT order."""
        n = self.points_per_axis
        k = np.fft.fftfreq(n, d=1.0 / n)  # integers 0..n/2-1, -n/2..-1
        return self.dp * k

    def position_mesh(self) -> list[np.ndarray]:
        axes = [self.position_axis()] * self.dimension
        return np.meshgrid(*axes, indexing="ij")

    def momentum_mesh(self) -> list[np.ndarray]:
        axes = [self.momentum_axis()] * self.dimension
        return np.meshgrid(*axes, indexing="ij")

    def momentum_sq(self) -> np.ndarray:
        """|p|^2 on the flattened lattice, FFT order."""
        mesh = self.momentum_mesh()
        return sum(m ** 2 for m in mesh).ravel()


@dataclass(frozen=True)
class WaveFunction:
    """State vector: grid amplitudes (position or momentum) or bare coefficients."""

    grid: GridSpec | None
    amplitudes: np.ndarray
    representation: str = POSITION

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amps)
        if self.grid is not None:
            if self.representation not in (POSITION, MOMENTUM):
                raise ContractViolation(f"bad representation {self.representation!r}")
            if amps.shape != (self.grid.size,):
                raise GridMismatch(
                    f"amplitude length {amps.shape} does not match grid size {self.grid.size}")
        elif self.representation != COEFF:
            raise ContractViolation("grid-free states must use the 'coeff' representation")

    @property
    def measure(self) -> float:
        """Volume element of the current representation."""
        if self.grid is None:
            return 1.0
        if self.representation == POSITION:
            return self.grid.volume_element
        return self.grid.dp ** self.grid.dimension

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real * self.measure)

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def normalized(self) -> "WaveFunction":
        n = self.norm()
        if n == 0:
            raise ContractViolation("cannot normalize the zero state")
        return WaveFunction(self.grid, self.amplitudes / n, self.representation)


@dataclass(frozen=True)
class FreeDispersion:
    """H with omega(p) = a * |p|^2 on a periodic grid (a = 1 or 1/2 in practice)."""

    grid: GridSpec
    dispersion_coefficient: float = 1.0

    def __post_init__(self):
        if not (self.dispersion_coefficient > 0):
            raise ContractViolation("dispersion coefficient must be positive")


@dataclass(frozen=True)
class Multiplication:
    """H acting as multiplication by real samples V(x_j)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v) and np.max(np.abs(v.imag)) > 1e-12 * max(1.0, np.max(np.abs(v))):
            raise ContractViolation("multiplication samples must be real")
        v = np.ascontiguousarray(v.real, dtype=float)
        if v.shape != (self.grid.size,):
            raise GridMismatch("multiplication samples do not match the grid")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FiniteHermitian:
    """Finite Hermitian matrix Hamiltonian; realises pure point spectra exactly."""

    matrix: np.ndarray
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractViolation("matrix must be square")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.conj().T)) > 1e-12 * scale:
            raise ContractViolation("matrix is not Hermitian to 1e-12")
        object.__setattr__(self, "matrix", m)
        w, v = np.linalg.eigh(m)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


Hamiltonian = Union[FreeDispersion, Multiplication, FiniteHermitian]


@dataclass(frozen=True)
class Region:
    """Subset of the position lattice; measure = count * dx^d."""

    grid: GridSpec
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.grid.size,):
            raise GridMismatch("mask length does not match the grid")
        object.__setattr__(self, "mask", m)

    @property
    def measure(self) -> float:
        return float(np.count_nonzero(self.mask)) * self.grid.volume_element

    @classmethod
    def full(cls, grid: GridSpec) -> "Region":
        return cls(grid, np.ones(grid.size, dtype=bool))

    @classmethod
    def empty(cls, grid: GridSpec) -> "Region":
        return cls(grid, np.zeros(grid.size, dtype=bool))

    @classmethod
    def interval(cls, grid: GridSpec, lo: float, hi: float) -> "Region":
        """Axis-aligned box lo <= x_i <= hi in every dimension."""
        mesh = grid.position_mesh()
        inside = np.ones_like(mesh[0], dtype=bool)
        for ax in mesh:
            inside &= (ax >= lo) & (ax <= hi)
        return cls(grid, inside.ravel())

    def complement(self) -> "Region":
        return Region(self.grid, ~self.mask)


def _check_same_grid(a: WaveFunction, b: WaveFunction):
    if a.grid != b.grid:
        raise GridMismatch("states live on different grids")
    if a.representation != b.representation:
        raise GridMismatch(
            f"representations differ: {a.representation} vs {b.representation}")


def _phase_parity(grid: GridSpec) -> np.ndarray:
    """(-1)^(k1+..+kd) tensor accounting for the grid offset x_0 = -L/2."""
    n = grid.points_per_axis
    sign1 = (-1.0) ** np.arange(n)
    out = sign1
    for _ in range(grid.dimension - 1):
        out = np.multiply.outer(out, sign1)
    return out.ravel()


def fourier_transform(psi: WaveFunction) -> WaveFunction:
    """Position -> momentum under the unitary angular-frequency convention."""
    if psi.grid is None or psi.representation != POSITION:
        raise ContractViolation("fourier_transform requires a position-representation grid state")
    g = psi.grid
    shape = (g.points_per_axis,) * g.dimension
    # e^{-i p_k x_j} = (-1)^k e^{-2 pi i k j / n} for x_j = (j - n/2) dx
    parity = _phase_parity(g)
    arr = np.fft.fftn(psi.amplitudes.reshape(shape)).ravel()
    scale = g.volume_element / (2.0 * np.pi) ** (g.dimension / 2.0)
    return WaveFunction(g, scale * parity * arr, MOMENTUM)


def inverse_fourier_transform(phat: WaveFunction) -> WaveFunction:
    """Momentum -> position, inverse of :func:`fourier_transform`."""
    if phat.grid is None or phat.representation != MOMENTUM:
        raise ContractViolation("inverse transform requires a momentum-representation state")
    g = phat.grid
    shape = (g.points_per_axis,) * g.dimension
    parity = _phase_parity(g)
    arr = np.fft.ifftn((parity * phat.amplitudes).reshape(shape)).ravel()
    scale = g.size * (2.0 * np.pi) ** (g.dimension / 2.0) / g.box_length ** g.dimension
    return WaveFunction(g, scale * arr, POSITION)


def inner_product(psi: WaveFunction, chi: WaveFunction) -> complex:
    """<psi, chi> = sum conj(psi_j) chi_j * measure (antilinear in the first slot)."""
    _check_same_grid(psi, chi)
    return complex(np.vdot(psi.amplitudes, chi.amplitudes) * psi.measure)


def free_step(psi: WaveFunction, dt: float, H: Hamiltonian) -> WaveFunction:
    """Exact e^{-i H dt}: phase multiply in the diagonalising representation."""
    if not np.isfinite(dt):
        raise ContractViolation("dt must be finite")
    if isinstance(H, FreeDispersion):
        if psi.grid != H.grid:
            raise GridMismatch("state and Hamiltonian grids differ")
        back = psi.representation == POSITION
        ph = fourier_transform(psi) if back else psi
        phase = np.exp(-1j * H.dispersion_coefficient * H.grid.momentum_sq() * dt)
        out = WaveFunction(H.grid, ph.amplitudes * phase, MOMENTUM)
        return inverse_fourier_transform(out) if back else out
    if isinstance(H, Multiplication):
        if psi.grid != H.grid:
            raise GridMismatch("state and Hamiltonian grids differ")
        if psi.representation != POSITION:
            raise ContractViolation("multiplication step requires the position representation")
        return WaveFunction(H.grid, psi.amplitudes * np.exp(-1j * H.values * dt), POSITION)
    if isinstance(H, FiniteHermitian):
        if psi.grid is not None or psi.amplitudes.shape != (H.dimension,):
            raise GridMismatch("state does not match the matrix dimension")
        v = H.eigenvectors
        coeffs = v.conj().T @ psi.amplitudes
        coeffs *= np.exp(-1j * H.eigenvalues * dt)
        return WaveFunction(None, v @ coeffs, COEFF)
    raise ContractViolation(f"unknown Hamiltonian variant {type(H).__name__}")


def apply_hamiltonian(psi: WaveFunction, H: Hamiltonian) -> WaveFunction:
    """H psi, used for residual checks."""
    if isinstance(H, FreeDispersion):
        back = psi.representation == POSITION
        ph = fourier_transform(psi) if back else psi
        out = WaveFunction(H.grid, ph.amplitudes * H.dispersion_coefficient * H.grid.momentum_sq(),
                           MOMENTUM)
        return inverse_fourier_transform(out) if back else out
    if isinstance(H, Multiplication):
        return WaveFunction(H.grid, psi.amplitudes * H.values, POSITION)
    if isinstance(H, FiniteHermitian):
        return WaveFunction(None, H.matrix @ psi.amplitudes, COEFF)
    raise ContractViolation(f"unknown Hamiltonian variant {type(H).__name__}")


def project_region(psi: WaveFunction, region: Region) -> WaveFunction:
    """Zero the amplitudes outside the region mask (orthogonal projection P_Omega)."""
    if psi.grid is None or psi.representation != POSITION:
        raise ContractViolation("project_region requires a position-representation state")
    if psi.grid != region.grid:
        raise GridMismatch("region and state grids differ")
    return WaveFunction(psi.grid, np.where(region.mask, psi.amplitudes, 0.0), POSITION)


def boundary_band_mass(psi: WaveFunction) -> float:
    """Norm^2 fraction within 2*dx of the box edge (aliasing guard)."""
    if psi.grid is None:
        return 0.0
    wf = psi if psi.representation == POSITION else inverse_fourier_transform(psi)
    g = wf.grid
    edge = g.box_length / 2.0 - 2.0 * g.dx
    mesh = g.position_mesh()
    band = np.zeros_like(mesh[0], dtype=bool)
    for ax in mesh:
        band |= np.abs(ax) >= edge
    m = float(np.sum(np.abs(wf.amplitudes.reshape(band.shape))[band] ** 2) * g.volume_element)
    total = wf.norm_sq()
    return m / total if total > 0 else 0.0


def check_boundary_guard(psi: WaveFunction, context: str = ""):
    frac = boundary_band_mass(psi)
    if frac > BOUNDARY_GUARD_TOL:
        raise BoxTooSmall(
            f"ABORTED_BOX_TOO_SMALL: boundary band holds {frac:.3e} of the mass"
            + (f" ({context})" if context else ""))


def grid_state(grid: GridSpec, fn, representation: str = POSITION,
               normalize: bool = True) -> WaveFunction:
    """Sample fn on the position (or momentum) lattice and wrap as a WaveFunction."""
    if representation == POSITION:
        mesh = grid.position_mesh()
    else:
        mesh = grid.momentum_mesh()
    amps = np.asarray(fn(*mesh), dtype=complex).ravel()
    wf = WaveFunction(grid, amps, representation)
    return wf.normalized() if normalize else wf
