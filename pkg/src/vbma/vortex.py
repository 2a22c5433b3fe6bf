"""Rank-2 vortex bundle over torus x CP^1: assembly and verification.

The bundle is ``S + Q`` with ``S = (r1+1)L x r2 O(2)`` and
``Q = r1 L x (r2+1) O(2)``, holomorphically glued by the theta section.
With ``H = h1 + g2`` built from the torus metric ``h`` and a positive
function ``f2 = exp(-v)``, the curvature is diagonal up to the second
fundamental form, and the vbMA equation reduces to two scalar equations on
the torus.  Everything here is checked pointwise on the solver grid; the
CP^1 direction only contributes the factor ``omega_FS(w) = 1/(1 + |w|^2)^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import mav, torus
from .positivity import EndoForm11
from .torus import Density11, ScalarField


def fs_density(w: complex) -> float:
    """Density of omega_FS on CP^1 in the affine chart (2pi dropped)."""
    return 1.0 / (1.0 + abs(w) ** 2) ** 2


def cp1_samples(count: int = 4, seed: int = 0) -> list[complex]:
    """``w = 0`` plus ``count`` seeded chart points."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(count, 2))
    return [0j] + [complex(a, b) for a, b in pts]


@dataclass(frozen=True)
class VortexSolution:
    cfg: mav.VortexConfig
    psi: ScalarField
    v: ScalarField

    @classmethod
    def from_report(cls, report: mav.SolutionReport) -> "VortexSolution":
        if not report.converged:
            raise ValueError("report is not converged")
        return cls(report.cfg, report.psi_final, mav.recover_f2(report.psi_final, report.cfg))

    @cached_property
    def state(self) -> mav.MetricState:
        return mav.make_state(1.0, self.psi, self.cfg)

    @property
    def grid(self) -> torus.TorusGrid:
        return self.psi.grid

    @property
    def omega(self) -> np.ndarray:
        return torus.omega_values(self.grid)

    @property
    def F_h(self) -> np.ndarray:
        return self.state.F

    @property
    def G(self) -> np.ndarray:
        return self.state.G

    @property
    def phi2(self) -> np.ndarray:
        return self.state.phi2

    @cached_property
    def F_f2(self) -> np.ndarray:
        return torus.ddbar(self.grid, self.v.values)

    def mav_residual(self) -> float:
        return float(np.max(np.abs(mav.mav_residual(self.state, self.cfg).values)))

    def f2_roundtrip(self) -> float:
        """Sup-norm of ``F_f2 + r1 omega`` against the cancelled right-hand side."""
        target = mav.f2_rhs(self.psi, self.cfg).values
        return float(np.max(np.abs(self.F_f2 + self.cfg.r1 * self.omega - target)))

    def perturbed(self, dv: np.ndarray) -> "VortexSolution":
        return VortexSolution(self.cfg, self.psi, ScalarField(self.grid, self.v.values + dv))


def reduced_system_residuals(sol: VortexSolution) -> tuple[Density11, Density11]:
    """Residuals of the two diagonal equations of ``(i Theta)^2 = mu omega ^ omega_FS Id``::

        2 (F_h + F_f2 + r1 omega)(2 r2 + p) - G - mu omega
        2 (F_f2 + r1 omega)(2 r2 + 2 - p) - G - mu omega
    """
    cfg, p, om = sol.cfg, sol.phi2, sol.omega
    rhs = sol.G + cfg.mu * om
    res1 = 2 * (sol.F_h + sol.F_f2 + cfg.r1 * om) * (2 * cfg.r2 + p) - rhs
    res2 = 2 * (sol.F_f2 + cfg.r1 * om) * (2 * cfg.r2 + 2 - p) - rhs
    return Density11(sol.grid, res1), Density11(sol.grid, res2)


@dataclass(frozen=True)
class GriffithsMargins:
    """Griffiths conditions at every grid point for one CP^1 point ``w``.

    ``upper`` and ``lower`` are the torus parts of the two diagonal entries,
    ``fs_gap`` the CP^1 coefficient ``2 r2 + 2 - p`` and ``mixed`` the
    ``|v1 v2|^2`` coefficient of the squared form, scaled by omega_FS(w).
    """

    w: complex
    upper: np.ndarray = field(repr=False)
    lower: np.ndarray = field(repr=False)
    fs_gap: np.ndarray = field(repr=False)
    mixed: np.ndarray = field(repr=False)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"upper": self.upper, "lower": self.lower, "fs_gap": self.fs_gap, "mixed": self.mixed}

    @property
    def min_margin(self) -> float:
        return float(min(np.min(x) for x in self.as_dict().values()))


def griffiths_margins(sol: VortexSolution, w: complex = 0j) -> GriffithsMargins:
    cfg, p, om = sol.cfg, sol.phi2, sol.omega
    lower = sol.F_f2 + cfg.r1 * om
    upper = sol.F_h + lower
    fs_gap = 2 * cfg.r2 + 2 - p
    mixed = sol.F_h * fs_gap + (4 * cfg.r2 + 2) * lower - sol.G
    return GriffithsMargins(w, upper, lower, fs_gap, mixed * fs_density(w))


def curvature_blocks(sol: VortexSolution, index: tuple[int, int], w: complex = 0j) -> EndoForm11:
    """Curvature at one grid point as blocks on (torus, CP^1) directions.

    Only ``|b|^2 = G omega_FS`` of the off-diagonal entry is determined by
    the reduction; its phase is irrelevant for every check here.
    """
    k, j = index
    cfg = sol.cfg
    fs = fs_density(w)
    p = sol.phi2[k, j]
    lower = sol.F_f2[k, j] + cfg.r1 * sol.omega[k, j]
    A = np.diag([sol.F_h[k, j] + lower, lower])
    C = fs * np.diag([2 * cfg.r2 + p, 2 * cfg.r2 + 2 - p])
    b = np.sqrt(max(sol.G[k, j], 0.0) * fs)
    B = np.array([[0.0, b], [0.0, 0.0]])
    return EndoForm11(A, B, C)


def vortex_chern_gap(sol: VortexSolution, w: complex = 0j) -> np.ndarray:
    """``(F11 - F22)^2 + 4 F12 ^ F21`` per grid point, in units of omega_Sigma ^ omega_FS.

    The diagonal difference has torus part ``F_h`` and CP^1 part
    ``(2p - 2) omega_FS``; the off-diagonal product contributes ``-G omega_FS``.
    """
    fs = fs_density(w)
    return split_chern_gap(sol.F_h, (2 * sol.phi2 - 2) * fs, sol.G * fs)


def split_chern_gap(diff_sigma, diff_fs, off_sq):
    """Gap for blocks whose diagonal difference is ``diff_sigma + diff_fs`` and ``|F12|^2 = off_sq``."""
    return 2 * np.asarray(diff_sigma) * np.asarray(diff_fs) - 4 * np.asarray(off_sq)


# -- slope arithmetic ---------------------------------------------------------
# Classes on torus x CP^1 are pairs (a, b) meaning a c1(L) + b H with H the
# hyperplane class of CP^1, so L.L = H.H = 0 and L.H = 1.  O(2) is 2H.


def _dot(x: tuple[int, int], y: tuple[int, int]) -> int:
    return x[0] * y[1] + x[1] * y[0]


def _summands(r1: int, r2: int) -> tuple[tuple[int, int], tuple[int, int]]:
    return (r1 + 1, 2 * r2), (r1, 2 * (r2 + 1))


def _check_ranks(r1, r2):
    if int(r1) != r1 or int(r2) != r2 or r1 < 1 or r2 < 1:
        raise ValueError("r1 and r2 must be integers >= 1")


@dataclass(frozen=True)
class SlopeRecord:
    r1: int
    r2: int
    mu_ma_sub: Fraction
    mu_ma_total: Fraction
    mumford_gap: int

    @property
    def ma_stable(self) -> bool:
        return self.mu_ma_sub < self.mu_ma_total

    def to_json(self) -> dict:
        return {
            "mu_ma_sub": str(self.mu_ma_sub),
            "mu_ma_total": str(self.mu_ma_total),
            "ma_stable": self.ma_stable,
            "mumford_gap": self.mumford_gap,
        }


def ma_slopes(r1: int, r2: int) -> SlopeRecord:
    """MA slopes of the subbundle S and of the whole bundle, exactly.

    ``ch2`` of a line bundle is ``c1^2 / 2``; values are reported in units of
    ``c1(L) . c1(O(2)) = 2``, so ``ch2(S) = (r1 + 1) r2``.
    """
    _check_ranks(r1, r2)
    s, q = _summands(r1, r2)
    unit = _dot((1, 0), (0, 2))
    ch2_s = Fraction(_dot(s, s), 2 * unit)
    ch2_q = Fraction(_dot(q, q), 2 * unit)
    return SlopeRecord(int(r1), int(r2), ch2_s, (ch2_s + ch2_q) / 2, mumford_gap(r1, r2))


def mumford_gap(r1: int, r2: int) -> int:
    """``deg(S) - deg(V)/2`` with degrees taken against c1(V)."""
    _check_ranks(r1, r2)
    s, q = _summands(r1, r2)
    c1v = (s[0] + q[0], s[1] + q[1])
    deg_v = _dot(c1v, c1v)
    deg_s = _dot(s, c1v)
    # deg(V) = c1(V)^2 is even because L.L = H.H = 0
    return deg_s - deg_v // 2


# -- verification report ------------------------------------------------------


def verify(sol: VortexSolution, samples: list[complex] | None = None) -> dict:
    """Reduced residuals, Griffiths margins and Chern gap over the grid and CP^1 samples."""
    if samples is None:
        samples = cp1_samples()
    res1, res2 = reduced_system_residuals(sol)
    margins = [griffiths_margins(sol, w).min_margin for w in samples]
    gaps = [float(np.max(vortex_chern_gap(sol, w))) for w in samples]
    return {
        "reduced_res": [float(np.max(np.abs(res1.values))), float(np.max(np.abs(res2.values)))],
        "griffiths_min_margin": min(margins),
        "chern_gap_max": max(gaps),
        "slopes": ma_slopes(sol.cfg.r1, sol.cfg.r2).to_json(),
        "mav_residual": sol.mav_residual(),
        "f2_roundtrip": sol.f2_roundtrip(),
        "max_phi2": float(np.max(sol.phi2)),
    }


def verification_passed(report: dict, res_tol: float = 1e-6, gap_tol: float = 1e-8) -> bool:
    return (max(report["reduced_res"]) < res_tol
            and report["griffiths_min_margin"] > 0
            and report["chern_gap_max"] <= gap_tol)
