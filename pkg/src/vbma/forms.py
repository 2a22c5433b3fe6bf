"""Minimal exterior algebra with matrix coefficients.

On complex dimension ``n`` the 1-forms ``dz^1..dz^n`` get indices ``0..n-1``
and ``dzbar^1..dzbar^n`` get ``n..2n-1``.  A form is a dict mapping a sorted
index tuple to an ``r x r`` complex coefficient.  Products multiply the
coefficients in order, so ``(X ^ Y)_{ij} = sum_m X_{im} ^ Y_{mj}``.
"""

from __future__ import annotations

import numpy as np


def sort_sign(idx: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting ``idx`` (0 on a repeated index)."""
    if len(set(idx)) < len(idx):
        return 0, ()
    idx = list(idx)
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


def wedge(X: dict, Y: dict) -> dict:
    out: dict = {}
    for kx, cx in X.items():
        for ky, cy in Y.items():
            sign, key = sort_sign(kx + ky)
            if sign == 0:
                continue
            term = sign * (cx @ cy)
            out[key] = out[key] + term if key in out else term
    return out


def form11(coeffs: np.ndarray) -> dict:
    """(1,1)-form ``sum_{k,l} coeffs[..., k, l] dz^k ^ dzbar^l``.

    ``coeffs`` has shape ``(r, r, n, n)``.
    """
    n = coeffs.shape[-1]
    return {(k, n + l): np.asarray(coeffs[:, :, k, l], dtype=complex)
            for k in range(n) for l in range(n)}


def power(X: dict, n: int) -> dict:
    out = X
    for _ in range(n - 1):
        out = wedge(out, X)
    return out


def top_coefficient(X: dict, n: int) -> np.ndarray:
    """Coefficient of ``prod_j (dz^j ^ dzbar^j)`` in a top-degree form."""
    # dz^1 dzb^1 ... dz^n dzb^n sorts to (0..n-1, n..2n-1) with this sign
    order = tuple(i for j in range(n) for i in (j, n + j))
    sign, key = sort_sign(order)
    r = next(iter(X.values())).shape[0] if X else 1
    return sign * X.get(key, np.zeros((r, r), dtype=complex))
