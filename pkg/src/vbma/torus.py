"""Spectral calculus on the flat torus C/(Z + tau Z).

Fields are sampled on an ``n x n`` grid in lattice coordinates ``(s, t)``,
``z = s + t * tau``.  Arrays are indexed ``[k, j]`` with ``s = j/n`` and
``t = k/n``, so flattening in C order gives the row-major, x-fast layout
used by the file formats.

All (1,1)-forms are stored as densities against ``dx dy`` and every
curvature-type form is divided by ``2*pi`` so that the curvature of a
degree-d line bundle integrates to ``d``.  With ``Delta = d_xx + d_yy`` this
means ``i d dbar psi / 2pi`` has density ``Delta psi / (4 pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import optimize

from .errors import BadGridSize, GridMismatch, NonPositiveImaginaryPart, NonZeroMean

PHI2_TARGET_MAX = 0.49


@dataclass(frozen=True)
class TorusGrid:
    tau: complex
    n: int

    @property
    def im_tau(self) -> float:
        return float(self.tau.imag)

    @property
    def area(self) -> float:
        return self.im_tau

    @property
    def cell_area(self) -> float:
        return self.im_tau / self.n**2

    @cached_property
    def lattice_coords(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.n) / self.n
        t, s = np.meshgrid(idx, idx, indexing="ij")
        return s, t

    @cached_property
    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        s, t = self.lattice_coords
        return s + t * self.tau.real, t * self.tau.imag

    @cached_property
    def z(self) -> np.ndarray:
        x, y = self.xy
        return x + 1j * y

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        # d/dx acts on e^{2 pi i (p s + q t)} as 2 pi i p; d/dy mixes both
        # lattice directions because s = x - y Re(tau)/Im(tau).
        freq = np.fft.fftfreq(self.n, d=1.0 / self.n)
        q, p = np.meshgrid(freq, freq, indexing="ij")
        kx = 2 * np.pi * p
        ky = 2 * np.pi * (q - p * self.tau.real) / self.tau.imag
        return kx, ky

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        return -(kx**2 + ky**2)

    @cached_property
    def dz_symbol(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        sym = (1j * kx + ky) / 2
        # first derivatives drop the unpaired Nyquist modes
        nyq = self.n // 2
        sym = sym.copy()
        sym[nyq, :] = 0
        sym[:, nyq] = 0
        return sym

    def check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.shape != (self.n, self.n):
            raise GridMismatch(f"expected shape {(self.n, self.n)}, got {values.shape}")
        return values


def make_grid(tau: complex, n: int) -> TorusGrid:
    """Build a torus grid; ``n`` must be a power of two no smaller than 8."""
    tau = complex(tau)
    if not tau.imag > 0:
        raise NonPositiveImaginaryPart(f"Im(tau) must be positive, got {tau!r}")
    if int(n) != n or n < 8 or (int(n) & (int(n) - 1)) != 0:
        raise BadGridSize(f"n must be a power of two >= 8, got {n!r}")
    return TorusGrid(tau=tau, n=int(n))


@dataclass(frozen=True)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.grid.check(self.values), dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Density11:
    """Real (1,1)-form stored as a density against dx dy."""

    grid: TorusGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.grid.check(self.values), dtype=float))


# -- array-level spectral operators (used directly by the solver) ----------


def laplacian(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(grid.laplacian_symbol * np.fft.fft2(values)).real


def ddbar(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Density of ``i d dbar f / 2 pi``."""
    return laplacian(grid, values) / (4 * np.pi)


def dz(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(grid.dz_symbol * np.fft.fft2(values))


def omega_values(grid: TorusGrid) -> np.ndarray:
    return np.full((grid.n, grid.n), 1.0 / grid.im_tau)


def integrate_values(grid: TorusGrid, values: np.ndarray) -> float:
    return float(np.sum(values) * grid.cell_area)


# -- public field operations -----------------------------------------------


def omega_sigma(grid: TorusGrid) -> Density11:
    """Kahler form of the base: curvature of the degree-one bundle, total mass 1."""
    return Density11(grid, omega_values(grid))


def curvature_increment(psi: ScalarField) -> Density11:
    return Density11(psi.grid, ddbar(psi.grid, psi.values))


def curvature_density(psi: ScalarField) -> Density11:
    """Curvature of ``h0 * exp(-psi)``: the base form plus the increment."""
    grid = psi.grid
    return Density11(grid, omega_values(grid) + ddbar(grid, psi.values))


def integrate(rho: Density11) -> float:
    return integrate_values(rho.grid, rho.values)


def poisson_solve(rho: Density11, mean_tol: float = 1e-8) -> ScalarField:
    """Invert :func:`curvature_increment` on mean-zero data.

    Returns the mean-zero ``psi`` with ``curvature_increment(psi) = rho -
    mean(rho)``.  Raises :class:`NonZeroMean` if ``|integrate(rho)|`` is not
    below ``mean_tol``.
    """
    grid = rho.grid
    total = integrate(rho)
    if not abs(total) < mean_tol:
        raise NonZeroMean(f"density integrates to {total:.3e}, not zero")
    sym = grid.laplacian_symbol / (4 * np.pi)
    hat = np.fft.fft2(rho.values)
    safe = np.where(sym == 0, 1.0, sym)
    psi_hat = np.where(sym == 0, 0.0, hat / safe)
    return ScalarField(grid, np.fft.ifft2(psi_hat).real)


# -- theta-function section of the degree-one bundle -------------------------


@dataclass(frozen=True)
class ThetaSection:
    """Classical theta series, a holomorphic section of the degree-one bundle.

    ``rescale`` is the constant A in the raw metric ``A exp(-2 pi y^2 / Im tau)``.
    """

    tau: complex
    truncation: int = 12
    rescale: float = 1.0

    def __post_init__(self):
        if self.truncation < 8:
            raise ValueError("theta truncation must be at least 8")
        if not complex(self.tau).imag > 0:
            raise NonPositiveImaginaryPart(f"Im(tau) must be positive, got {self.tau!r}")


def _theta_terms(z, tau, truncation):
    k = np.arange(-truncation, truncation + 1)
    z = np.asarray(z, dtype=complex)
    expo = 1j * np.pi * tau * k**2 + 2j * np.pi * np.multiply.outer(z, k)
    return k, np.exp(expo)


def theta_eval(z, section: ThetaSection):
    """Truncated series sum_k exp(i pi tau k^2 + 2 pi i k z)."""
    _, terms = _theta_terms(z, complex(section.tau), section.truncation)
    return terms.sum(axis=-1)


def theta_derivative(z, section: ThetaSection):
    k, terms = _theta_terms(z, complex(section.tau), section.truncation)
    return (2j * np.pi * k * terms).sum(axis=-1)


def theta_zero(tau: complex) -> complex:
    return (1 + complex(tau)) / 2


def _raw_norm_sq(z, tau, truncation):
    z = np.asarray(z, dtype=complex)
    section = ThetaSection(tau, truncation)
    return np.abs(theta_eval(z, section)) ** 2 * np.exp(-2 * np.pi * z.imag**2 / tau.imag)


def make_section(tau: complex, truncation: int = 12, target_max: float = PHI2_TARGET_MAX) -> ThetaSection:
    """Theta section with the metric rescaled so that ``max |phi|^2_0 = target_max``.

    The maximum is located on a fixed 128 x 128 lattice sampling and then
    polished with Nelder-Mead, so the constant does not depend on the grid
    later used for solving.
    """
    tau = complex(tau)
    m = 128
    idx = np.arange(m) / m
    t, s = np.meshgrid(idx, idx, indexing="ij")
    vals = _raw_norm_sq(s + t * tau, tau, truncation)
    k0 = np.unravel_index(np.argmax(vals), vals.shape)

    def neg(st):
        zz = st[0] + st[1] * tau
        # reduce into the fundamental strip so the weight stays periodic
        return -float(_raw_norm_sq(zz - np.floor(st[1]) * tau - np.floor(st[0]), tau, truncation))

    res = optimize.minimize(neg, x0=[s[k0], t[k0]], method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000})
    peak = max(-res.fun, float(vals[k0]))
    return ThetaSection(tau, truncation, target_max / peak)


@lru_cache(maxsize=32)
def _theta_on_grid(grid: TorusGrid, section: ThetaSection) -> tuple[np.ndarray, np.ndarray]:
    theta = theta_eval(grid.z, section)
    dtheta = theta_derivative(grid.z, section)
    theta.setflags(write=False)
    dtheta.setflags(write=False)
    return theta, dtheta


def raw_phi_norm_sq(grid: TorusGrid, section: ThetaSection) -> np.ndarray:
    """``|phi|^2`` for the rescaled base metric (psi = 0), as an array."""
    y = grid.xy[1]
    return section.rescale * np.abs(_theta_on_grid(grid, section)[0]) ** 2 * np.exp(
        -2 * np.pi * y**2 / grid.im_tau)


def gradient_density_values(grid: TorusGrid, section: ThetaSection, psi: np.ndarray,
                            dpsi: np.ndarray | None = None) -> np.ndarray:
    """Density of ``i nabla^{1,0} phi ^ nabla^{0,1} phi^dagger / 2 pi`` for ``h0 exp(-psi)``.

    In the trivialisation with weight ``w = 2 pi y^2/Im tau + psi`` the
    covariant derivative is ``theta' - theta * d_z w``.
    """
    y = grid.xy[1]
    if dpsi is None:
        dpsi = dz(grid, psi)
    theta, dtheta = _theta_on_grid(grid, section)
    dweight = -2j * np.pi * y / grid.im_tau + dpsi
    cov = dtheta - theta * dweight
    weight = section.rescale * np.exp(-2 * np.pi * y**2 / grid.im_tau - psi)
    return np.abs(cov) ** 2 * weight / np.pi


def phi_norm_sq(psi: ScalarField, section: ThetaSection) -> ScalarField:
    return ScalarField(psi.grid, raw_phi_norm_sq(psi.grid, section) * np.exp(-psi.values))


def connection_gradient_density(psi: ScalarField, section: ThetaSection) -> Density11:
    return Density11(psi.grid, gradient_density_values(psi.grid, section, psi.values))


def weitzenbock_residual(psi: ScalarField, section: ThetaSection) -> float:
    """Sup-norm of ``ddbar|phi|^2 - (-F |phi|^2 + G)``; zero in exact arithmetic."""
    grid = psi.grid
    phi2 = phi_norm_sq(psi, section).values
    lhs = ddbar(grid, phi2)
    F = omega_values(grid) + ddbar(grid, psi.values)
    G = gradient_density_values(grid, section, psi.values)
    return float(np.max(np.abs(lhs - (-F * phi2 + G))))
