"""Continuity-method solver for the Monge-Ampere vortex equation on a torus.

The unknown is the conformal potential ``psi`` of ``h = h0 exp(-psi)`` on the
degree-one theta bundle.  Along the path ``t in [0, 1]`` we solve::

    F_h = (1 - p) (mu u^(1-t) omega + t G) / ((2 r2 + t p)(2 + 2 r2 - t p))

with ``p = |phi|_h^2``, ``G`` the gradient density of phi and
``u = 1 / (alpha (1 - |phi|_0^2))``, so that ``psi = 0`` solves ``t = 0``.
All forms are 2pi-normalised densities (see :mod:`vbma.torus`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import torus
from .errors import (
    ConfigParseError,
    DampingFloor,
    LinearSolveFailure,
    MonitorViolation,
    NewtonStall,
    SolverError,
    StabilityGate,
    StepFloorReached,
)
from .torus import Density11, ScalarField

log = logging.getLogger(__name__)

PHI2_MONITOR_SLACK = 1e-6
DIVISION_GUARD = 1e-12
DAMPING_FLOOR = 1.0 / 1024


@dataclass(frozen=True)
class VortexConfig:
    r1: int
    r2: int
    tau: complex = 1j
    n: int = 64
    theta_truncation: int = 12
    tol_newton: float = 1e-10
    tol_path: float = 1e-10
    t_step_init: float = 0.1
    t_step_min: float = 1e-4
    max_newton: int = 20
    allow_unstable: bool = False
    psi_rail: float = 50.0
    phi2_floor: float = 1e-6

    def __post_init__(self):
        if int(self.r1) != self.r1 or int(self.r2) != self.r2 or self.r1 < 2 or self.r2 < 2:
            raise ValueError("r1 and r2 must be integers >= 2")
        if not (0 < self.t_step_min <= self.t_step_init <= 1):
            raise ValueError("need 0 < t_step_min <= t_step_init <= 1")
        if self.tol_newton <= 0 or self.tol_path <= 0:
            raise ValueError("tolerances must be positive")
        object.__setattr__(self, "tau", complex(self.tau))
        torus.make_grid(self.tau, self.n)

    @property
    def mu_exact(self) -> int:
        r1, r2 = self.r1, self.r2
        return 2 * (r2 * (r1 + 1) + r1 * (r2 + 1))

    @property
    def alpha_exact(self) -> Fraction:
        return alpha_exact(self.r1, self.r2)

    @property
    def mu(self) -> float:
        return float(self.mu_exact)

    @property
    def alpha(self) -> float:
        return float(self.alpha_exact)

    @property
    def stable(self) -> bool:
        return self.alpha_exact > 1

    @property
    def juncture_target(self) -> float:
        r2 = self.r2
        return (self.mu + 1) / (1 + 2 * r2 * (2 * r2 + 2))

    def to_json(self) -> dict:
        return {
            "r1": self.r1, "r2": self.r2,
            "tau_re": self.tau.real, "tau_im": self.tau.imag,
            "n": self.n, "theta_truncation": self.theta_truncation,
            "tol_newton": self.tol_newton, "tol_path": self.tol_path,
            "t_step_init": self.t_step_init, "t_step_min": self.t_step_min,
            "max_newton": self.max_newton, "allow_unstable": self.allow_unstable,
            "psi_rail": self.psi_rail, "phi2_floor": self.phi2_floor,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VortexConfig":
        if not isinstance(obj, dict):
            raise ConfigParseError("config must be a JSON object")
        known = {"r1", "r2", "tau_re", "tau_im", "n", "theta_truncation", "tol_newton",
                 "tol_path", "t_step_init", "t_step_min", "max_newton", "allow_unstable",
                 "psi_rail", "phi2_floor"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigParseError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw = {k: obj[k] for k in known - {"tau_re", "tau_im"} if k in obj}
            for k in ("r1", "r2", "n", "theta_truncation", "max_newton"):
                if k in kw:
                    if isinstance(kw[k], bool) or int(kw[k]) != kw[k]:
                        raise ConfigParseError(f"{k} must be an integer")
                    kw[k] = int(kw[k])
            if "allow_unstable" in kw and not isinstance(kw["allow_unstable"], bool):
                raise ConfigParseError("allow_unstable must be a boolean")
            kw["tau"] = complex(float(obj.get("tau_re", 0.0)), float(obj.get("tau_im", 1.0)))
            return cls(**kw)
        except ConfigParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigParseError(str(exc)) from exc


def mu_value(r1: int, r2: int) -> int:
    return 2 * (r2 * (r1 + 1) + r1 * (r2 + 1))


def alpha_exact(r1: int, r2: int) -> Fraction:
    return Fraction(mu_value(r1, r2), (2 * r2) * (2 * r2 + 2))


@dataclass(frozen=True)
class _Background:
    grid: torus.TorusGrid
    section: torus.ThetaSection
    omega: np.ndarray
    phi2_0: np.ndarray
    log_u: np.ndarray


@lru_cache(maxsize=16)
def _background(tau: complex, n: int, truncation: int, alpha: float) -> _Background:
    grid = torus.make_grid(tau, n)
    section = torus.make_section(tau, truncation)
    phi2_0 = torus.raw_phi_norm_sq(grid, section)
    log_u = -np.log(alpha) - np.log1p(-phi2_0)
    return _Background(grid, section, torus.omega_values(grid), phi2_0, log_u)


def background(cfg: VortexConfig) -> _Background:
    return _background(cfg.tau, cfg.n, cfg.theta_truncation, cfg.alpha)


@dataclass(frozen=True)
class MetricState:
    """A point on the continuity path with its derived densities."""

    t: float
    psi: ScalarField
    F: np.ndarray = field(repr=False)
    phi2: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    I: np.ndarray = field(repr=False)
    II: np.ndarray = field(repr=False)
    numer: np.ndarray = field(repr=False)

    @property
    def grid(self) -> torus.TorusGrid:
        return self.psi.grid


def make_state(t: float, psi, cfg: VortexConfig) -> MetricState:
    bg = background(cfg)
    grid = bg.grid
    values = psi.values if isinstance(psi, ScalarField) else np.asarray(psi, dtype=float)
    psi = ScalarField(grid, values)
    F = bg.omega + torus.ddbar(grid, values)
    phi2 = bg.phi2_0 * np.exp(-values)
    G = torus.gradient_density_values(grid, bg.section, values)
    I = 2 * cfg.r2 + t * phi2
    II = 2 + 2 * cfg.r2 - t * phi2
    numer = cfg.mu * np.exp((1 - t) * bg.log_u) * bg.omega + t * G
    return MetricState(float(t), psi, F, phi2, G, I, II, numer)


def _residual_values(state: MetricState) -> np.ndarray:
    return state.F - (1 - state.phi2) * state.numer / (state.I * state.II)


def mav_residual(state: MetricState, cfg: VortexConfig) -> Density11:
    return Density11(state.grid, _residual_values(state))


def _linearized(state: MetricState, w: np.ndarray) -> np.ndarray:
    grid = state.grid
    t, p, F = state.t, state.phi2, state.F
    Q = 1.0 / (state.I * state.II)
    ddw = torus.ddbar(grid, w)
    dp = -p * w
    # variation of G through the Weitzenbock identity ddbar p = -F p + G
    dG = torus.ddbar(grid, dp) + ddw * p + F * dp
    dQ = -Q * (t * dp / state.I - t * dp / state.II)
    dK = -dp * state.numer * Q + (1 - p) * t * dG * Q + (1 - p) * state.numer * dQ
    return ddw - dK


def mav_linearize_apply(state: MetricState, w: ScalarField, cfg: VortexConfig) -> Density11:
    """Derivative of the path residual in ``psi`` along ``w``."""
    values = w.values if isinstance(w, ScalarField) else np.asarray(w, dtype=float)
    return Density11(state.grid, _linearized(state, values))


def _linear_solve(state: MetricState, rhs: np.ndarray) -> np.ndarray:
    grid = state.grid
    n = grid.n
    shape = (n, n)

    def matvec(x):
        return _linearized(state, x.reshape(shape)).ravel()

    zeroth = state.phi2 * state.numer / (state.I * state.II)
    shift = max(float(np.mean(zeroth)), 1e-3)
    symbol = grid.laplacian_symbol / (4 * np.pi) - shift

    def precond(x):
        return np.fft.ifft2(np.fft.fft2(x.reshape(shape)) / symbol).real.ravel()

    op = LinearOperator((n * n, n * n), matvec=matvec, dtype=float)
    pc = LinearOperator((n * n, n * n), matvec=precond, dtype=float)
    b = rhs.ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(shape)
    x, info = gmres(op, b, rtol=1e-12, atol=0.0, restart=60, maxiter=3, M=pc)
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure("Krylov solve produced non-finite values")
    rel = np.linalg.norm(matvec(x) - b) / bnorm
    if info != 0 and rel > 1e-8:
        raise LinearSolveFailure(f"GMRES did not converge (info={info}, relative residual {rel:.2e})")
    return x.reshape(shape)


def _sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values)))


def newton_step(state: MetricState, cfg: VortexConfig) -> MetricState:
    """One damped Newton step at fixed ``t``.

    Returns the state unchanged when the Newton update is below
    ``cfg.tol_newton``.  Backtracking halves the step until the residual
    sup-norm decreases, down to a factor of 1/1024.
    """
    R = _residual_values(state)
    if not np.all(np.isfinite(R)):
        raise LinearSolveFailure("residual is not finite")
    res0 = _sup(R)
    w = _linear_solve(state, -R)
    if _sup(w) < cfg.tol_newton:
        return state
    lam = 1.0
    while lam >= DAMPING_FLOOR:
        trial = make_state(state.t, state.psi.values + lam * w, cfg)
        res = _sup(_residual_values(trial))
        if np.isfinite(res) and res < res0:
            return trial
        lam /= 2
    raise DampingFloor(f"no decrease in residual {res0:.3e} down to damping {DAMPING_FLOOR}")


def solve_at(t: float, psi0: np.ndarray, cfg: VortexConfig) -> tuple[MetricState, int, float]:
    """Newton iteration at fixed ``t`` until the residual is below ``tol_path``."""
    state = make_state(t, psi0, cfg)
    for it in range(cfg.max_newton + 1):
        res = _sup(_residual_values(state))
        if res < cfg.tol_path:
            return state, it, res
        if it == cfg.max_newton:
            break
        new = newton_step(state, cfg)
        if new is state:
            raise NewtonStall(f"Newton step below tol_newton with residual {res:.3e}")
        state = new
    raise NewtonStall(f"no convergence in {cfg.max_newton} Newton iterations (residual {res:.3e})")


def monitors(state: MetricState, cfg: VortexConfig) -> dict:
    """Scalar diagnostics of a path state.

    ``juncture_value`` is ``int F / (1 - |phi|^2)``; it is reported as None
    when ``max |phi|^2`` comes within ``1e-12`` of 1.
    """
    grid = state.grid
    max_phi2 = float(np.max(state.phi2))
    if max_phi2 < 1 - DIVISION_GUARD:
        juncture = torus.integrate_values(grid, state.F / (1 - state.phi2))
    else:
        juncture = None
    return {
        "t": state.t,
        "max_phi2": max_phi2,
        "degree": torus.integrate_values(grid, state.F),
        "juncture_value": juncture,
        "juncture_target": cfg.juncture_target,
        "psi_min": float(np.min(state.psi.values)),
        "psi_max": float(np.max(state.psi.values)),
        "residual": _sup(_residual_values(state)),
    }


def _check_monitors(state: MetricState, cfg: VortexConfig) -> None:
    m = monitors(state, cfg)
    if m["max_phi2"] > 1 + PHI2_MONITOR_SLACK:
        raise MonitorViolation(f"max |phi|^2 = {m['max_phi2']:.6f} exceeds 1 at t={state.t:.6f}")
    if m["max_phi2"] < cfg.phi2_floor:
        raise MonitorViolation(
            f"max |phi|^2 = {m['max_phi2']:.3e} collapsed below {cfg.phi2_floor:g} at t={state.t:.6f}")
    if m["psi_max"] > cfg.psi_rail or m["psi_min"] < -cfg.psi_rail:
        raise MonitorViolation(f"psi left [-{cfg.psi_rail}, {cfg.psi_rail}] at t={state.t:.6f}")


@dataclass
class SolutionReport:
    cfg: VortexConfig
    converged: bool
    t_history: list = field(default_factory=list)
    monitors: dict = field(default_factory=dict)
    psi_final: ScalarField | None = None
    reason: str | None = None
    message: str | None = None

    def to_json(self) -> dict:
        return {
            "converged": self.converged,
            "reason": self.reason,
            "message": self.message,
            "t_history": [list(row) for row in self.t_history],
            "monitors": self.monitors,
        }


def continuity_solve(cfg: VortexConfig, perturbation: np.ndarray | None = None) -> SolutionReport:
    """Continue from ``(t=0, psi=0)`` to ``t=1`` with adaptive steps.

    ``perturbation`` is added to every warm start before Newton; it is used
    to probe uniqueness.  Failures raise a :class:`SolverError` whose
    ``report`` attribute holds the partial :class:`SolutionReport`.
    """
    report = SolutionReport(cfg, converged=False)
    if not cfg.stable and not cfg.allow_unstable:
        exc = StabilityGate(f"r1={cfg.r1} <= r2={cfg.r2} (alpha = {cfg.alpha_exact}); no solution exists")
        report.reason, report.message = exc.reason, str(exc)
        exc.report = report
        raise exc

    state, iters, res = solve_at(0.0, np.zeros((cfg.n, cfg.n)), cfg)
    report.t_history.append((0.0, iters, res))
    prev: MetricState | None = None
    dt = cfg.t_step_init
    try:
        while state.t < 1.0:
            t_new = state.t + dt
            if t_new > 1.0 - cfg.t_step_min / 2:
                t_new = 1.0
            guess = state.psi.values
            if prev is not None:
                guess = guess + (t_new - state.t) / (state.t - prev.t) * (state.psi.values - prev.psi.values)
            if perturbation is not None:
                guess = guess + perturbation
            try:
                new, iters, res = solve_at(t_new, guess, cfg)
                _check_monitors(new, cfg)
            except (LinearSolveFailure, DampingFloor, NewtonStall, MonitorViolation, FloatingPointError) as exc:
                log.debug("step to t=%.6f failed: %s", t_new, exc)
                dt /= 2
                if dt < cfg.t_step_min:
                    if isinstance(exc, MonitorViolation):
                        raise
                    raise StepFloorReached(
                        f"t-step fell below {cfg.t_step_min:g} at t={state.t:.6f} ({exc})") from exc
                continue
            prev, state = state, new
            report.t_history.append((state.t, iters, res))
            dt = min(2 * dt, cfg.t_step_init)
    except SolverError as exc:
        report.reason, report.message = exc.reason, str(exc)
        report.monitors = monitors(state, cfg)
        report.psi_final = state.psi
        exc.report = report
        raise
    report.converged = True
    report.monitors = monitors(state, cfg)
    report.psi_final = state.psi
    return report


def final_state(report: SolutionReport) -> MetricState:
    return make_state(1.0 if report.converged else report.monitors.get("t", 1.0), report.psi_final, report.cfg)


def recover_f2(psi1: ScalarField, cfg: VortexConfig, integral_tol: float = 1e-6) -> ScalarField:
    """Solve ``ddbar v + r1 omega = (mu omega + G) / (2 (2 r2 + 2 - p))`` for mean-zero ``v``.

    Then ``f2 = exp(-v)``.  The right-hand side is the form with the
    ``(1 - |phi|^2)`` factors already cancelled against the vortex equation.
    """
    from .errors import SolvabilityFailure

    state = make_state(1.0, psi1, cfg)
    bg = background(cfg)
    rhs = (cfg.mu * bg.omega + state.G) / (2 * state.II)
    total = torus.integrate_values(bg.grid, rhs)
    if abs(total - cfg.r1) > integral_tol:
        raise SolvabilityFailure(f"right-hand side integrates to {total:.10f}, expected {cfg.r1}")
    rho = Density11(bg.grid, rhs - cfg.r1 * bg.omega)
    return torus.poisson_solve(rho, mean_tol=integral_tol)


def f2_rhs(psi1: ScalarField, cfg: VortexConfig) -> Density11:
    state = make_state(1.0, psi1, cfg)
    return Density11(state.grid, (cfg.mu * background(cfg).omega + state.G) / (2 * state.II))


def with_overrides(cfg: VortexConfig, **kw) -> VortexConfig:
    return replace(cfg, **kw)
