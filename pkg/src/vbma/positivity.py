"""Pointwise positivity algebra for endomorphism-valued (1,1)-forms on a surface.

A form is written in a unitary frame as::

    i Theta = A i dz1^dzb1 + C i dz2^dzb2 + B i dz1^dzb2 + B^H i dz2^dzb1

and top-degree forms are coefficients of ``vol = (i dz1^dzb1) ^ (i dz2^dzb2)``.
Factors of 1/2pi are dropped throughout; they rescale margins by a positive
constant and cannot change a verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import GridMismatch, RankNotTwo

INCONCLUSIVE_MARGIN = 1e-8


def _herm(X):
    return np.asarray(X).conj().T


@dataclass(frozen=True)
class EndoForm11:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A, B, C = (np.atleast_2d(np.asarray(X, dtype=complex)) for X in (self.A, self.B, self.C))
        r = A.shape[0]
        for name, X in (("A", A), ("B", B), ("C", C)):
            if X.shape != (r, r):
                raise ValueError(f"block {name} has shape {X.shape}, expected {(r, r)}")
        for name, X in (("A", A), ("C", C)):
            if not np.allclose(X, _herm(X), atol=1e-12):
                raise ValueError(f"block {name} must be Hermitian")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def r(self) -> int:
        return self.A.shape[0]

    @classmethod
    def scalar(cls, a: float, c: float | None = None, r: int = 1) -> "EndoForm11":
        c = a if c is None else c
        eye = np.eye(r)
        return cls(a * eye, np.zeros((r, r)), c * eye)

    def conjugated(self, g: np.ndarray) -> "EndoForm11":
        """Blocks of ``g F g^{-1}``; Hermiticity is kept only for unitary ``g``."""
        gi = np.linalg.inv(g)
        return EndoForm11(g @ self.A @ gi, g @ self.B @ gi, g @ self.C @ gi)

    def to_json(self) -> dict:
        def enc(X):
            return [[[float(v.real), float(v.imag)] for v in row] for row in X]
        return {"r": self.r, "A": enc(self.A), "B": enc(self.B), "C": enc(self.C)}

    @classmethod
    def from_json(cls, obj: dict) -> "EndoForm11":
        r = int(obj["r"])

        def dec(rows):
            arr = np.array(rows, dtype=float)
            if arr.shape != (r, r, 2):
                raise ValueError(f"block has shape {arr.shape}, expected {(r, r, 2)}")
            return arr[..., 0] + 1j * arr[..., 1]

        return cls(dec(obj["A"]), dec(obj["B"]), dec(obj["C"]))


# Coefficient of vol, an r x r Hermitian matrix.
TopFormEndo = np.ndarray


@dataclass(frozen=True)
class PositivityVerdict:
    positive: bool
    margin: float
    witness: np.ndarray | None = field(default=None, repr=False)
    conclusive: bool = True

    def to_json(self) -> dict:
        out = {"positive": bool(self.positive), "margin": float(self.margin),
               "witness": None}
        if self.witness is not None:
            w = np.asarray(self.witness).ravel()
            out["witness"] = [[float(v.real), float(v.imag)] for v in w.astype(complex)]
        if not self.conclusive:
            out["inconclusive"] = True
        return out


def _verdict(margin, witness=None, conclusive=True):
    margin = float(margin)
    return PositivityVerdict(margin > 0, margin, witness, conclusive)


def wedge_square(F: EndoForm11) -> TopFormEndo:
    """``(i Theta)^2 = (AC + CA - BB^H - B^H B) vol``."""
    A, B, C = F.A, F.B, F.C
    return A @ C + C @ A - B @ _herm(B) - _herm(B) @ B


def nakano_matrix(F: EndoForm11) -> np.ndarray:
    return np.block([[F.A, _herm(F.B)], [F.B, F.C]])


def nakano_check(F: EndoForm11) -> PositivityVerdict:
    w, v = np.linalg.eigh(nakano_matrix(F))
    return _verdict(w[0], v[:, 0])


def ma_form(F: EndoForm11) -> np.ndarray:
    """Hermitian matrix of the MA quadratic form on endomorphism (0,1)-forms.

    Variables are the entries of ``alpha`` then ``beta`` (row-major), where
    ``a^H = alpha dz1 + beta dz2``.  The form is::

        sum_l x_l^H T x_l + sum_l y_l T' y_l^H

    with ``x_l = [beta_l; -alpha_l]`` (columns), ``y_l = [beta^l, -alpha^l]``
    (rows), ``T = [[A, B^H], [B, C]]`` and ``T' = [[A, B], [B^H, C]]``.
    """
    r = F.r
    T = nakano_matrix(F)
    Tp = np.block([[F.A, F.B], [_herm(F.B), F.C]])
    nvar = 2 * r * r
    Q = np.zeros((nvar, nvar), dtype=complex)

    def a_idx(i, j):
        return i * r + j

    def b_idx(i, j):
        return r * r + i * r + j

    for l in range(r):
        # x_l = L z, stacked [beta[:, l]; -alpha[:, l]]
        L = np.zeros((2 * r, nvar))
        # w_l = M z, the transposed row [beta[l, :], -alpha[l, :]]
        M = np.zeros((2 * r, nvar))
        for i in range(r):
            L[i, b_idx(i, l)] = 1
            L[r + i, a_idx(i, l)] = -1
            M[i, b_idx(l, i)] = 1
            M[r + i, a_idx(l, i)] = -1
        Q += L.T @ T @ L + M.T @ Tp.T @ M
    return (Q + _herm(Q)) / 2


def ma_check(F: EndoForm11) -> PositivityVerdict:
    w, v = np.linalg.eigh(ma_form(F))
    return _verdict(w[0], v[:, 0])


def _griffiths_value(F: EndoForm11, v: np.ndarray) -> float:
    """Smallest eigenvalue of the 2x2 form ``xi -> v^H Theta(xi, xibar) v`` for unit v."""
    v = v / np.linalg.norm(v)
    a = float(np.real(np.vdot(v, F.A @ v)))
    c = float(np.real(np.vdot(v, F.C @ v)))
    b = np.vdot(v, F.B @ v)
    return (a + c) / 2 - np.sqrt(((a - c) / 2) ** 2 + abs(b) ** 2)


def griffiths_check(F: EndoForm11, samples: int = 256, seed: int = 0) -> PositivityVerdict:
    """Sampled Griffiths margin ``min_{|v|=|xi|=1} Theta(xi, xibar)(v, vbar)``.

    The minimum over ``xi`` is exact (a 2x2 eigenvalue); ``v`` is sampled on
    the unit sphere of C^r and the best sample is polished with Nelder-Mead.
    The verdict is not a certificate: margins within ``1e-8`` of zero are
    flagged inconclusive.
    """
    if samples < 64:
        raise ValueError("griffiths_check needs at least 64 samples")
    r = F.r
    rng = np.random.default_rng(seed)
    cands = rng.normal(size=(samples, r)) + 1j * rng.normal(size=(samples, r))
    cands = np.vstack([np.eye(r, dtype=complex), cands])
    vals = np.array([_griffiths_value(F, v) for v in cands])
    best = cands[np.argmin(vals)]

    def obj(x):
        v = x[:r] + 1j * x[r:]
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            return np.inf
        return _griffiths_value(F, v)

    x0 = np.concatenate([best.real, best.imag])
    res = optimize.minimize(obj, x0, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400 * r})
    if res.fun < vals.min():
        margin, witness = float(res.fun), res.x[:r] + 1j * res.x[r:]
    else:
        margin, witness = float(vals.min()), best
    witness = witness / np.linalg.norm(witness)
    return _verdict(margin, witness, conclusive=abs(margin) >= INCONCLUSIVE_MARGIN)


def chern_gap(F: EndoForm11) -> float:
    """Pointwise ``c1^2 - 4 c2 = 2 tr(F^2) - (tr F)^2`` as a coefficient of vol."""
    if F.r != 2:
        raise RankNotTwo(f"chern_gap needs rank 2, got {F.r}")
    trF2 = np.trace(wedge_square(F)).real
    a, c, b = np.trace(F.A).real, np.trace(F.C).real, np.trace(F.B)
    trF_sq = 2 * a * c - 2 * abs(b) ** 2
    return float(2 * trF2 - trF_sq)


def vbma_residual(F: EndoForm11, eta: float) -> float:
    """Sup-norm of ``wedge_square(F) - eta Id``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    M = wedge_square(F)
    return float(np.max(np.abs(M - eta * np.eye(F.r))))


def wedge_square_field(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Batched :func:`wedge_square` over leading axes of ``(..., r, r)`` blocks."""
    Bh = np.conj(np.swapaxes(B, -1, -2))
    return A @ C + C @ A - B @ Bh - Bh @ B


def moment_map_value(H: np.ndarray, A: np.ndarray, B: np.ndarray, C: np.ndarray,
                     eta: np.ndarray, weights: np.ndarray, W: int = 1) -> float:
    """``W * sum_x w_x tr(H (F^2 - eta Id))`` over a sampled grid.

    ``H``, ``A``, ``B``, ``C`` have shape ``(N, r, r)``; ``eta`` and the
    quadrature ``weights`` have shape ``(N,)``.
    """
    if W < 1 or int(W) != W:
        raise ValueError("W must be a positive integer")
    H, A, B, C = (np.asarray(X) for X in (H, A, B, C))
    eta, weights = np.asarray(eta, dtype=float), np.asarray(weights, dtype=float)
    shapes = {X.shape for X in (H, A, B, C)}
    if len(shapes) != 1 or H.ndim != 3 or eta.shape != (H.shape[0],) or weights.shape != eta.shape:
        raise GridMismatch("fields are not sampled on a common grid")
    r = H.shape[-1]
    M = wedge_square_field(A, B, C) - eta[:, None, None] * np.eye(r)
    dens = np.einsum("nij,nji->n", H, M).real
    return float(W * np.sum(weights * dens))
